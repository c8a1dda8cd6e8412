// Frame-by-frame playback of one what-if pair: the factual ego (green
// fill), surrounding traffic (blue fill), and the counterfactual ego as a
// red outline. After an early foil crash the outline is replaced by a red
// crash mark at its final position.

import type { CounterfactualDoc, FrameDoc } from "../api";
import { clear, el, svgEl } from "../dom";

export const FACT_COLOR = "#2e7d32";
export const OTHER_COLOR = "#1565c0";
export const FOIL_COLOR = "#c62828";

const PX_PER_M = 4;
const LANE_PX = 26;
const CAR_H = 16;

export function renderFrame(container: Element, frame: FrameDoc): void {
  clear(container);
  const width = frame.view_width * PX_PER_M;
  const height = frame.lanes * LANE_PX;
  const carW = frame.car_length * PX_PER_M;
  const xOf = (worldX: number) => (worldX - frame.view_x) * PX_PER_M;
  const yOf = (lane: number) => lane * LANE_PX + (LANE_PX - CAR_H) / 2;

  const svg = svgEl("svg", {
    viewBox: `0 0 ${width} ${height}`,
    class: "road-svg",
    "data-offset": frame.offset,
  });
  for (let lane = 1; lane < frame.lanes; lane++) {
    svg.append(
      svgEl("line", {
        x1: 0,
        x2: width,
        y1: lane * LANE_PX,
        y2: lane * LANE_PX,
        class: "lane-line",
      }),
    );
  }
  for (const other of frame.others) {
    svg.append(
      svgEl("rect", {
        x: xOf(other.x),
        y: yOf(other.lane),
        width: carW,
        height: CAR_H,
        rx: 3,
        fill: OTHER_COLOR,
        class: "car other",
        "data-lane": other.lane,
        "data-x": String(other.x),
      }),
    );
  }
  svg.append(
    svgEl("rect", {
      x: xOf(frame.fact_ego.x),
      y: yOf(frame.fact_ego.lane),
      width: carW,
      height: CAR_H,
      rx: 3,
      fill: FACT_COLOR,
      class: "car fact",
      "data-lane": frame.fact_ego.lane,
      "data-x": String(frame.fact_ego.x),
    }),
  );
  if (frame.foil_ego) {
    svg.append(
      svgEl("rect", {
        x: xOf(frame.foil_ego.x),
        y: yOf(frame.foil_ego.lane),
        width: carW,
        height: CAR_H,
        rx: 3,
        fill: "none",
        stroke: FOIL_COLOR,
        "stroke-width": 2.5,
        class: "car foil",
        "data-lane": frame.foil_ego.lane,
        "data-x": String(frame.foil_ego.x),
      }),
    );
  } else if (frame.crash_marker) {
    svg.append(
      svgEl(
        "text",
        {
          x: xOf(frame.crash_marker.x) + carW / 2,
          y: yOf(frame.crash_marker.lane) + CAR_H - 3,
          fill: FOIL_COLOR,
          class: "crash-mark",
          "text-anchor": "middle",
          "data-lane": frame.crash_marker.lane,
          "data-x": String(frame.crash_marker.x),
        },
        "✖",
      ),
    );
  }
  container.append(svg);
}

export interface PlaybackCallbacks {
  onScrub(offset: number): void;
  onTogglePlay(): void;
}

export function renderPlayback(
  container: Element,
  payload: CounterfactualDoc,
  cursor: number,
  playing: boolean,
  cb: PlaybackCallbacks,
): void {
  clear(container);
  const frame = payload.frames[Math.min(cursor, payload.frames.length - 1)];

  container.append(
    el(
      "div",
      { class: "playback-title" },
      el("span", { class: "chip fact" }, `fact: ${payload.fact_action_name}`),
      el("span", { class: "chip foil" }, `foil: ${payload.foil_action_name}`),
      el(
        "span",
        { class: "method", "data-method": payload.cf_method },
        payload.cf_method === "second-best"
          ? "second-best action"
          : payload.cf_method,
      ),
      payload.foil_terminal_cause
        ? el(
            "span",
            { class: "crash-badge" },
            `foil ${payload.foil_terminal_cause}`,
          )
        : null,
    ),
  );

  const frameBox = el("div", { class: "frame-box" });
  renderFrame(frameBox, frame);
  container.append(frameBox);

  const slider = el("input", {
    type: "range",
    min: 0,
    max: payload.frames.length - 1,
    value: frame.offset,
    class: "scrub",
  });
  slider.addEventListener("input", () => cb.onScrub(Number(slider.value)));
  container.append(
    el(
      "div",
      { class: "controls" },
      el(
        "button",
        { class: "play-btn", onclick: () => cb.onTogglePlay() },
        playing ? "⏸" : "▶",
      ),
      slider,
      el(
        "span",
        { class: "frame-label", "data-offset": frame.offset },
        `t = ${frame.offset} / ${payload.k}`,
      ),
    ),
    el(
      "div",
      {
        class: "score-line",
        "data-score": String(payload.last_state_importance),
      },
      `end-state value gap: ${payload.last_state_importance}`,
    ),
  );
}
