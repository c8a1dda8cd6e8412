// Wires the views to the API client and the view-state store. All data shown
// comes from service responses; the app only decides what to fetch and when.

import {
  ApiClient,
  ApiError,
  isAbort,
  LatestGate,
  type SummaryEntryDoc,
} from "./api";
import { clear, el } from "./dom";
import { initialState, Store, type ViewState } from "./state";
import { renderBars } from "./views/bars";
import { renderGallery } from "./views/gallery";
import { renderPlayback } from "./views/playback";
import { renderTimeline } from "./views/timeline";

const SUMMARY_METHOD = "last-state";
const SUMMARY_N = 4;
const SUMMARY_OVERLAP = 5;
const PLAY_MS = 600;

export interface HashSelection {
  trace?: string;
  step?: number;
  foil?: string;
}

/** Deep links look like `#trace=<id>&step=<i>&foil=<action|auto>`. */
export function parseHash(hash: string): HashSelection {
  const params = new URLSearchParams(hash.replace(/^#/, ""));
  const out: HashSelection = {};
  const trace = params.get("trace");
  if (trace) out.trace = trace;
  const step = params.get("step");
  if (step && !Number.isNaN(Number(step))) out.step = Number(step);
  const foil = params.get("foil");
  if (foil) out.foil = foil;
  return out;
}

export class App {
  readonly store = new Store();
  private readonly gate = new LatestGate();
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
  ) {}

  async start(hash = ""): Promise<void> {
    this.scaffold();
    this.store.subscribe(() => this.render());
    let agent: string;
    try {
      const agents = await this.api.agents();
      if (agents.agents.length === 0) {
        this.store.set({
          banner: "the artifact store has no agents — run the pipeline first",
        });
        return;
      }
      const select = this.q<HTMLSelectElement>("#agent-select");
      for (const a of agents.agents) {
        select.append(el("option", { value: a.id }, a.id));
      }
      agent = agents.agents[0].id;
      select.value = agent;
      select.addEventListener("change", () => void this.selectAgent(select.value));
    } catch (err) {
      this.fail(err);
      return;
    }
    await this.selectAgent(agent);
    const wanted = parseHash(hash);
    if (wanted.trace) {
      await this.openTrace(wanted.trace, wanted.step ?? null, wanted.foil ?? "auto");
    }
  }

  async selectAgent(agent: string): Promise<void> {
    this.stopPlaying();
    this.store.set({ ...initialState, agent });
    try {
      const traces = await this.api.traces(agent);
      const summary = await this.api.summary(
        agent,
        SUMMARY_METHOD,
        SUMMARY_N,
        SUMMARY_OVERLAP,
      );
      this.store.set({
        traceRows: traces.traces,
        summary: summary.doc,
        summaryText: summary.text,
      });
    } catch (err) {
      this.fail(err);
    }
  }

  async openTrace(
    traceId: string,
    step: number | null = null,
    foil = "auto",
  ): Promise<void> {
    this.stopPlaying();
    try {
      const trace = await this.api.trace(traceId);
      this.store.set({
        traceId,
        trace,
        step: null,
        stepDoc: null,
        payload: null,
        foil: "auto",
        cursor: 0,
        gallerySelection: null,
        notice: null,
        banner: null,
      });
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        this.store.set({ banner: err.detail, traceId: null, trace: null });
      } else {
        this.fail(err);
      }
      return;
    }
    if (step != null) await this.selectStep(step, foil);
  }

  async selectStep(
    index: number,
    foil = "auto",
    viaUrl: string | null = null,
  ): Promise<void> {
    const { traceId } = this.store.get();
    if (traceId == null) return;
    this.stopPlaying();
    try {
      const stepDoc = await this.api.step(traceId, index);
      this.store.set({
        step: index,
        stepDoc,
        foil,
        payload: null,
        cursor: 0,
        notice: null,
      });
    } catch (err) {
      this.fail(err);
      return;
    }
    await this.requestWhatIf(viaUrl);
  }

  setFoil(foil: string): void {
    this.store.set({ foil, gallerySelection: null });
    void this.requestWhatIf();
  }

  /** Opens a gallery entry using the exact counterfactual URL the service
   * attached to it. */
  async openEntry(entry: SummaryEntryDoc, rank: number): Promise<void> {
    await this.openTrace(entry.trace_id);
    if (this.store.get().traceId !== entry.trace_id) return;
    this.store.set({ gallerySelection: rank });
    await this.selectStep(
      entry.origin_index,
      entry.foil_action_name,
      entry.counterfactual_url,
    );
  }

  private async requestWhatIf(viaUrl: string | null = null): Promise<void> {
    const { traceId, trace, step, foil } = this.store.get();
    if (traceId == null || trace == null || step == null) return;
    const url =
      viaUrl ?? this.api.counterfactualUrl(traceId, step, foil, trace.k);
    try {
      const payload = await this.api.counterfactualByUrl(url, this.gate.next());
      this.store.set({ payload, cursor: 0, notice: null });
    } catch (err) {
      if (isAbort(err)) return; // superseded by a newer request
      if (err instanceof ApiError && (err.status === 400 || err.status === 422)) {
        this.store.set({ payload: null, notice: err.detail });
      } else {
        this.fail(err);
      }
    }
  }

  togglePlay(): void {
    if (this.timer) {
      this.stopPlaying();
      return;
    }
    if (!this.store.get().payload) return;
    this.store.set({ playing: true });
    this.timer = setInterval(() => {
      const st = this.store.get();
      if (!st.payload) {
        this.stopPlaying();
        return;
      }
      const last = st.payload.frames.length - 1;
      this.store.set({ cursor: st.cursor >= last ? 0 : st.cursor + 1 });
    }, PLAY_MS);
  }

  private stopPlaying(): void {
    if (this.timer) clearInterval(this.timer);
    this.timer = null;
    if (this.store.get().playing) this.store.set({ playing: false });
  }

  private fail(err: unknown): void {
    this.store.set({
      banner: err instanceof Error ? err.message : String(err),
    });
  }

  // --- rendering -------------------------------------------------------------

  private scaffold(): void {
    clear(this.root);
    this.root.append(
      el(
        "header",
        {},
        el("h1", {}, "what-if explorer"),
        el("label", { for: "agent-select" }, "agent"),
        el("select", { id: "agent-select" }),
        el("span", { id: "banner", class: "banner" }),
      ),
      el(
        "main",
        {},
        el("aside", { id: "trace-list" }),
        el(
          "div",
          { class: "middle" },
          el("section", { id: "timeline" }),
          el(
            "section",
            { id: "whatif" },
            el("div", { id: "foil-bar" }),
            el("div", { id: "notice", class: "notice" }),
            el(
              "div",
              { class: "side-by-side" },
              el("div", { id: "playback" }),
              el("div", { id: "bars" }),
            ),
          ),
        ),
      ),
      el("section", { id: "gallery" }),
    );
  }

  private q<T extends HTMLElement = HTMLElement>(selector: string): T {
    const node = this.root.querySelector<T>(selector);
    if (!node) throw new Error(`missing element ${selector}`);
    return node;
  }

  private render(): void {
    const st = this.store.get();

    const banner = this.q("#banner");
    banner.textContent = st.banner ?? "";
    banner.className = st.banner ? "banner visible" : "banner";

    this.renderTraceList(st);

    const timeline = this.q("#timeline");
    if (st.trace) {
      renderTimeline(timeline, st.trace, st.step, {
        onSelect: (i) => void this.selectStep(i),
      });
    } else {
      clear(timeline);
      timeline.append(
        el("p", { class: "hint" }, "pick a trace to browse its timeline"),
      );
    }

    this.renderWhatIf(st);

    const gallery = this.q("#gallery");
    if (st.summary) {
      renderGallery(gallery, st.summary, st.gallerySelection, {
        onOpen: (entry, rank) => void this.openEntry(entry, rank),
      });
    } else {
      clear(gallery);
    }
  }

  private renderTraceList(st: ViewState): void {
    const list = this.q("#trace-list");
    clear(list);
    if (!st.traceRows) return;
    list.append(el("h2", {}, `traces (${st.traceRows.length})`));
    for (const row of st.traceRows) {
      list.append(
        el(
          "button",
          {
            class:
              row.trace_id === st.traceId ? "trace-row selected" : "trace-row",
            "data-trace": row.trace_id,
            onclick: () => void this.openTrace(row.trace_id),
          },
          el("span", { class: "trace-name" }, row.trace_id),
          el(
            "span",
            { class: "trace-meta" },
            `${row.length} steps · ${row.eligible_origins} origins`,
          ),
          row.terminal_cause === "collision"
            ? el("span", { class: "crash-badge", title: "ended in a collision" }, "✖")
            : null,
        ),
      );
    }
  }

  private renderWhatIf(st: ViewState): void {
    const bar = this.q("#foil-bar");
    clear(bar);
    if (st.stepDoc) {
      const select = el("select", {
        id: "foil-select",
        class: "foil-select",
      });
      select.append(el("option", { value: "auto" }, "auto (second-best action)"));
      for (const name of st.stepDoc.action_names) {
        const opt = el("option", { value: name }, name);
        if (name === st.stepDoc.action_name) {
          opt.disabled = true;
          opt.title = "the foil must differ from the factual action";
        }
        select.append(opt);
      }
      select.value = st.foil;
      select.addEventListener("change", () => this.setFoil(select.value));
      bar.append(
        el("span", {}, `what if, at step ${st.stepDoc.index}, instead of `),
        el(
          "span",
          { class: "chip fact", "data-fact": st.stepDoc.action_name },
          st.stepDoc.action_name,
        ),
        el("label", { for: "foil-select" }, " the agent had tried "),
        select,
      );
    }

    const notice = this.q("#notice");
    notice.textContent = st.notice ?? "";
    notice.className = st.notice ? "notice visible" : "notice";

    const playback = this.q("#playback");
    const bars = this.q("#bars");
    if (st.payload) {
      renderPlayback(playback, st.payload, st.cursor, st.playing, {
        onScrub: (offset) => {
          this.stopPlaying();
          this.store.set({ cursor: offset });
        },
        onTogglePlay: () => this.togglePlay(),
      });
      renderBars(
        bars,
        st.payload.bar_chart,
        st.payload.fact_action_name,
        st.payload.foil_action_name,
      );
    } else {
      clear(playback);
      clear(bars);
      if (st.stepDoc && !st.notice) {
        playback.append(el("p", { class: "hint" }, "loading what-if…"));
      }
    }
  }
}
