// One cell per step of the trace: the action taken, and whether a what-if
// can start there (enough factual steps must remain to compare against).

import type { TraceDoc } from "../api";
import { clear, el } from "../dom";

const GLYPHS: Record<string, string> = {
  "lane-left": "◀",
  idle: "·",
  "lane-right": "▶",
  faster: "+",
  slower: "−",
};

export function glyphFor(actionName: string): string {
  return GLYPHS[actionName] ?? "?";
}

export interface TimelineCallbacks {
  onSelect(index: number): void;
}

export function renderTimeline(
  container: Element,
  trace: TraceDoc,
  selected: number | null,
  cb: TimelineCallbacks,
): void {
  clear(container);
  const badge =
    trace.terminal_cause === "collision"
      ? el(
          "span",
          {
            class: "crash-badge",
            title: `this episode ended in a collision at step ${trace.length - 1}`,
          },
          "✖ collision",
        )
      : el("span", { class: "end-badge" }, trace.terminal_cause);
  container.append(
    el(
      "div",
      { class: "timeline-header" },
      el("span", { class: "trace-name" }, trace.trace_id),
      el(
        "span",
        {
          class: "trace-meta",
          "data-length": trace.length,
          "data-eligible": trace.eligible_origins,
        },
        `${trace.length} steps · ${trace.eligible_origins} eligible origins · k=${trace.k}`,
      ),
      badge,
    ),
  );
  const row = el("div", { class: "timeline-row" });
  for (const step of trace.steps) {
    const classes = ["step-cell"];
    if (step.eligible) classes.push("eligible");
    if (selected === step.index) classes.push("selected");
    row.append(
      el(
        "button",
        {
          class: classes.join(" "),
          "data-index": step.index,
          "data-action": step.action_name,
          "data-eligible": String(step.eligible),
          disabled: !step.eligible,
          title: step.eligible
            ? `step ${step.index}: ${step.action_name} (reward ${step.reward_total})`
            : `step ${step.index}: ${step.action_name} — fewer than ` +
              `${trace.k} factual steps remain, so no what-if starts here`,
          onclick: () => cb.onSelect(step.index),
        },
        glyphFor(step.action_name),
      ),
    );
  }
  container.append(row);
}
