// Summary gallery: one card per entry of the service's importance summary,
// in the exact order the service returned them (it already sorts by score).

import type { SummaryDoc, SummaryEntryDoc } from "../api";
import { clear, el } from "../dom";

export interface GalleryCallbacks {
  onOpen(entry: SummaryEntryDoc, rank: number): void;
}

export function renderGallery(
  container: Element,
  summary: SummaryDoc,
  selected: number | null,
  cb: GalleryCallbacks,
): void {
  clear(container);
  container.append(
    el(
      "div",
      { class: "gallery-header" },
      `top ${summary.entries.length} of ${summary.pair_count} what-ifs · ` +
        `method ${summary.method} · overlap ≤ ${summary.overlap_limit}`,
    ),
  );
  const row = el("div", { class: "gallery-row" });
  summary.entries.forEach((entry, rank) => {
    row.append(
      el(
        "button",
        {
          class: rank === selected ? "card selected" : "card",
          "data-rank": rank,
          "data-trace": entry.trace_id,
          "data-step": entry.origin_index,
          "data-score": String(entry.score),
          "data-url": entry.counterfactual_url,
          onclick: () => cb.onOpen(entry, rank),
        },
        el("div", { class: "card-rank" }, `#${rank + 1}`),
        el(
          "div",
          { class: "card-score" },
          entry.score == null ? "unscored" : `score ${entry.score}`,
        ),
        el(
          "div",
          { class: "card-what" },
          `${entry.fact_action_name} vs ${entry.foil_action_name}`,
        ),
        el(
          "div",
          { class: "card-where" },
          `${entry.trace_id} · step ${entry.origin_index}`,
        ),
        entry.foil_terminal_cause
          ? el("div", { class: "card-end" }, `foil ${entry.foil_terminal_cause}`)
          : null,
      ),
    );
  });
  container.append(row);
}
