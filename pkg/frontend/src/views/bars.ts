// Side-by-side decomposition bars: for every reward component, the Q-value
// the agent assigned to the factual action next to the foil's. Values come
// straight from the payload's bar_chart.

import type { BarChartDoc } from "../api";
import { clear, el, svgEl } from "../dom";

const W = 340;
const H = 190;
const PAD = 26;

export function renderBars(
  container: Element,
  chart: BarChartDoc,
  factName: string,
  foilName: string,
): void {
  clear(container);
  const values = [...chart.fact_values, ...chart.foil_values];
  const top = Math.max(0, ...values);
  const bottom = Math.min(0, ...values);
  const span = top - bottom || 1;
  const plotH = H - 2 * PAD;
  const yOf = (v: number) => PAD + ((top - v) * plotH) / span;
  const zero = yOf(0);
  const groupW = (W - 2 * PAD) / chart.components.length;
  const barW = groupW / 3;

  const svg = svgEl("svg", {
    viewBox: `0 0 ${W} ${H}`,
    class: "bars-svg",
    role: "img",
  });
  svg.append(
    svgEl("line", { x1: PAD, x2: W - PAD, y1: zero, y2: zero, class: "axis" }),
  );
  chart.components.forEach((name, i) => {
    const x0 = PAD + i * groupW;
    const bars: Array<[number, string, string]> = [
      [chart.fact_values[i], "fact", factName],
      [chart.foil_values[i], "foil", foilName],
    ];
    bars.forEach(([value, kind, actionName], j) => {
      svg.append(
        svgEl(
          "rect",
          {
            x: x0 + barW * (j + 0.5),
            width: barW,
            y: Math.min(yOf(value), zero),
            height: Math.abs(yOf(value) - zero),
            class: `bar ${kind}`,
            "data-component": name,
            "data-kind": kind,
            "data-value": String(value),
          },
          svgEl("title", {}, `${name}, ${actionName}: ${value}`),
        ),
      );
    });
    svg.append(
      svgEl(
        "text",
        {
          x: x0 + groupW / 2,
          y: H - 8,
          class: "bar-label",
          "text-anchor": "middle",
        },
        name,
      ),
    );
  });
  container.append(
    svg,
    el(
      "div",
      { class: "legend" },
      el("span", { class: "chip fact" }, `${factName} (fact)`),
      el("span", { class: "chip foil" }, `${foilName} (foil)`),
    ),
  );
}
