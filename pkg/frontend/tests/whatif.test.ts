// What-if fidelity: every number and shape the explorer shows comes verbatim
// from recorded service responses. The auto foil must be the second-best
// action under the agent's own Q-values, foil=fact must be blocked on both
// sides, and a stale response must never overwrite a newer selection.

import { afterEach, describe, expect, it, vi } from "vitest";

import type { CounterfactualDoc, StepDoc } from "../src/api";
import { ApiClient } from "../src/api";
import { App } from "../src/app";
import {
  FACT_COLOR,
  FOIL_COLOR,
  OTHER_COLOR,
  renderFrame,
} from "../src/views/playback";
import {
  FixtureFetch,
  fixtureDoc,
  fixtureUrl,
  meta,
  until,
} from "./fixtureFetch";

const cfAuto = fixtureDoc<CounterfactualDoc>("cf_auto");
const cfNamed = fixtureDoc<CounterfactualDoc>("cf_named");
const stepFixture = fixtureDoc<StepDoc>("step");

interface Booted {
  app: App;
  ff: FixtureFetch;
  root: HTMLElement;
}

async function boot(hash = ""): Promise<Booted> {
  const ff = new FixtureFetch();
  ff.install();
  document.body.innerHTML = "";
  const root = document.createElement("div");
  document.body.append(root);
  const app = new App(root, new ApiClient());
  await app.start(hash);
  return { app, ff, root };
}

async function openOrigin(b: Booted): Promise<void> {
  await b.app.openTrace(meta.main_trace);
  await b.app.selectStep(meta.origin_step);
}

function q<T extends Element>(root: ParentNode, selector: string): T {
  const node = root.querySelector<T>(selector);
  if (!node) throw new Error(`expected ${selector} in the document`);
  return node;
}

afterEach(() => {
  vi.useRealTimers();
});

describe("auto foil", () => {
  it("requests the exact counterfactual URL the service recorded", async () => {
    const b = await boot();
    await openOrigin(b);
    expect(b.ff.calls).toContain(fixtureUrl("cf_auto"));
  });

  it("stores the recorded payload verbatim", async () => {
    const b = await boot();
    await openOrigin(b);
    expect(b.app.store.get().payload).toEqual(cfAuto);
  });

  it("is the second-best action under the step's own Q-totals", async () => {
    const b = await boot();
    await openOrigin(b);
    const ranked = stepFixture.q_totals
      .map((total, action) => ({ total, action }))
      .sort((a, z) => z.total - a.total || a.action - z.action);
    expect(ranked[0].action).toBe(stepFixture.greedy_action);
    const secondBest = ranked[1].action;
    const payload = b.app.store.get().payload;
    expect(payload?.foil_action).toBe(secondBest);
    expect(payload?.foil_action_name).toBe(
      stepFixture.action_names[secondBest],
    );
    expect(payload?.foil_action_name).toBe(meta.foil_action_name);
    expect(payload?.cf_method).toBe("second-best");
    const method = q<HTMLElement>(b.root, ".method");
    expect(method.getAttribute("data-method")).toBe("second-best");
    expect(method.textContent).toBe("second-best action");
    const auto = q<HTMLOptionElement>(b.root, '#foil-select option[value="auto"]');
    expect(auto.textContent).toBe("auto (second-best action)");
  });
});

describe("frame fidelity", () => {
  it("draws frame 0 exactly as served: every car at its recorded position", async () => {
    const b = await boot();
    await openOrigin(b);
    const frame = cfAuto.frames[0];

    const svg = q<SVGSVGElement>(b.root, "#playback svg.road-svg");
    expect(svg.getAttribute("data-offset")).toBe("0");

    const fact = q<SVGRectElement>(svg, "rect.car.fact");
    expect(fact.getAttribute("data-x")).toBe(String(frame.fact_ego.x));
    expect(fact.getAttribute("data-lane")).toBe(String(frame.fact_ego.lane));
    expect(fact.getAttribute("fill")).toBe(FACT_COLOR);

    const foil = q<SVGRectElement>(svg, "rect.car.foil");
    expect(frame.foil_ego).not.toBeNull();
    expect(foil.getAttribute("data-x")).toBe(String(frame.foil_ego?.x));
    expect(foil.getAttribute("data-lane")).toBe(String(frame.foil_ego?.lane));
    expect(foil.getAttribute("fill")).toBe("none");
    expect(foil.getAttribute("stroke")).toBe(FOIL_COLOR);

    const others = [...svg.querySelectorAll("rect.car.other")];
    expect(others).toHaveLength(frame.others.length);
    others.forEach((rect, i) => {
      expect(rect.getAttribute("data-x")).toBe(String(frame.others[i].x));
      expect(rect.getAttribute("data-lane")).toBe(
        String(frame.others[i].lane),
      );
      expect(rect.getAttribute("fill")).toBe(OTHER_COLOR);
    });
  });

  it("scrubbing moves through all k+1 recorded frames", async () => {
    const b = await boot();
    await openOrigin(b);
    expect(cfAuto.frames).toHaveLength(meta.k + 1);
    const last = cfAuto.frames.length - 1;

    const slider = q<HTMLInputElement>(b.root, "input.scrub");
    expect(slider.max).toBe(String(last));
    slider.value = String(last);
    slider.dispatchEvent(new Event("input"));

    const svg = q<SVGSVGElement>(b.root, "#playback svg.road-svg");
    expect(svg.getAttribute("data-offset")).toBe(String(last));
    const label = q<HTMLElement>(b.root, ".frame-label");
    expect(label.textContent).toBe(`t = ${last} / ${cfAuto.k}`);

    const endFrame = cfAuto.frames[last];
    const fact = q<SVGRectElement>(svg, "rect.car.fact");
    expect(fact.getAttribute("data-x")).toBe(String(endFrame.fact_ego.x));
    const foil = q<SVGRectElement>(svg, "rect.car.foil");
    expect(foil.getAttribute("data-x")).toBe(String(endFrame.foil_ego?.x));
  });

  it("playback advances one frame per tick and wraps at the end", async () => {
    const b = await boot();
    await openOrigin(b);
    vi.useFakeTimers();

    q<HTMLButtonElement>(b.root, ".play-btn").click();
    expect(q<HTMLElement>(b.root, ".play-btn").textContent).toBe("⏸");

    vi.advanceTimersByTime(600);
    expect(
      q<SVGSVGElement>(b.root, "#playback svg.road-svg").getAttribute(
        "data-offset",
      ),
    ).toBe("1");

    vi.advanceTimersByTime(600 * (cfAuto.frames.length - 1));
    expect(
      q<SVGSVGElement>(b.root, "#playback svg.road-svg").getAttribute(
        "data-offset",
      ),
    ).toBe("0");

    q<HTMLButtonElement>(b.root, ".play-btn").click();
    expect(q<HTMLElement>(b.root, ".play-btn").textContent).toBe("▶");
    expect(b.app.store.get().playing).toBe(false);
  });
});

describe("reward decomposition bars", () => {
  it("shows each component's fact and foil values exactly as served", async () => {
    const b = await boot();
    await openOrigin(b);
    const chart = cfAuto.bar_chart;
    chart.components.forEach((name, i) => {
      const fact = q<SVGRectElement>(
        b.root,
        `#bars rect.bar.fact[data-component="${name}"]`,
      );
      expect(fact.getAttribute("data-value")).toBe(
        String(chart.fact_values[i]),
      );
      const foil = q<SVGRectElement>(
        b.root,
        `#bars rect.bar.foil[data-component="${name}"]`,
      );
      expect(foil.getAttribute("data-value")).toBe(
        String(chart.foil_values[i]),
      );
    });
    const legend = q<HTMLElement>(b.root, "#bars .legend");
    expect(legend.textContent).toContain(`${cfAuto.fact_action_name} (fact)`);
    expect(legend.textContent).toContain(`${cfAuto.foil_action_name} (foil)`);
  });

  it("shows the end-state value gap exactly as served", async () => {
    const b = await boot();
    await openOrigin(b);
    const score = q<HTMLElement>(b.root, ".score-line");
    expect(score.getAttribute("data-score")).toBe(
      String(cfAuto.last_state_importance),
    );
  });
});

describe("choosing a foil by hand", () => {
  it("fetches the recorded user-chosen payload", async () => {
    const b = await boot();
    await openOrigin(b);
    b.app.setFoil(meta.foil_action_name);
    await until(
      () => b.app.store.get().payload?.cf_method !== "second-best",
    );
    expect(b.ff.calls).toContain(fixtureUrl("cf_named"));
    expect(b.app.store.get().payload).toEqual(cfNamed);
    const method = q<HTMLElement>(b.root, ".method");
    expect(method.textContent).toBe(cfNamed.cf_method);
    expect(q<HTMLSelectElement>(b.root, "#foil-select").value).toBe(
      meta.foil_action_name,
    );
  });

  it("disables the factual action in the foil picker", async () => {
    const b = await boot();
    await openOrigin(b);
    const factOption = q<HTMLOptionElement>(
      b.root,
      `#foil-select option[value="${meta.fact_action_name}"]`,
    );
    expect(factOption.disabled).toBe(true);
    expect(factOption.title).toContain("must differ from the factual action");
    const otherOption = q<HTMLOptionElement>(
      b.root,
      `#foil-select option[value="${meta.foil_action_name}"]`,
    );
    expect(otherOption.disabled).toBe(false);
  });

  it("surfaces the service's own refusal when a deep link forces foil=fact", async () => {
    const b = await boot(
      `#trace=${meta.main_trace}&step=${meta.origin_step}&foil=${meta.fact_action_name}`,
    );
    expect(b.ff.calls).toContain(fixtureUrl("cf_foil_eq_fact"));
    expect(b.app.store.get().payload).toBeNull();
    const notice = q<HTMLElement>(b.root, "#notice");
    expect(notice.textContent).toContain("equals the factual action");
    expect(b.root.querySelector("#playback svg")).toBeNull();
  });

  it("surfaces the service's refusal for an origin too close to the end", async () => {
    const b = await boot(
      `#trace=${meta.main_trace}&step=${meta.ineligible_step}&foil=auto`,
    );
    expect(b.ff.calls).toContain(fixtureUrl("cf_ineligible"));
    expect(b.app.store.get().payload).toBeNull();
    const notice = q<HTMLElement>(b.root, "#notice");
    expect(notice.textContent).toContain("factual steps remaining");
  });

  it("shows the service's message for an unknown trace", async () => {
    const b = await boot("#trace=no-such-trace");
    const banner = q<HTMLElement>(b.root, "#banner");
    expect(banner.textContent).toBe("unknown trace 'no-such-trace'");
    expect(b.app.store.get().trace).toBeNull();
  });
});

describe("latest selection wins", () => {
  it("a delayed earlier response never overwrites a newer one", async () => {
    const b = await boot();
    await b.app.openTrace(meta.main_trace);

    const release = b.ff.gate(fixtureUrl("cf_auto"));
    const first = b.app.selectStep(meta.origin_step);
    await until(() => b.ff.calls.includes(fixtureUrl("cf_auto")));
    expect(b.app.store.get().payload).toBeNull();

    b.app.setFoil(meta.foil_action_name);
    await until(() => b.app.store.get().payload != null);
    expect(b.app.store.get().payload).toEqual(cfNamed);

    release();
    await first;
    expect(b.app.store.get().payload).toEqual(cfNamed);
    expect(b.app.store.get().notice).toBeNull();
  });
});

describe("foil crash depiction", () => {
  it("replaces the foil outline with a crash mark once the foil is gone", () => {
    const frame = {
      offset: 3,
      lanes: 4,
      car_length: 5,
      view_x: 80,
      view_width: 120,
      fact_ego: { lane: 2, x: 130.5 },
      others: [{ lane: 1, x: 150.25 }],
      foil_ego: null,
      foil_absent: true,
      crash_marker: { lane: 1, x: 142.75 },
    };
    const box = document.createElement("div");
    renderFrame(box, frame);
    expect(box.querySelector("rect.car.foil")).toBeNull();
    const mark = q<SVGTextElement>(box, "text.crash-mark");
    expect(mark.textContent).toBe("✖");
    expect(mark.getAttribute("data-x")).toBe("142.75");
    expect(mark.getAttribute("data-lane")).toBe("1");
    expect(mark.getAttribute("fill")).toBe(FOIL_COLOR);
    expect(box.querySelector("rect.car.fact")).not.toBeNull();
  });
});
