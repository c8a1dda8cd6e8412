// Single view-state record plus a minimal subscribe/patch store. Views are
// re-rendered from this state; nothing UI-visible lives anywhere else.

import type {
  CounterfactualDoc,
  StepDoc,
  SummaryDoc,
  TraceDoc,
  TraceRow,
} from "./api";

export interface ViewState {
  agent: string | null;
  traceRows: TraceRow[] | null;
  traceId: string | null;
  trace: TraceDoc | null;
  /** selected origin step, or null when no what-if is open */
  step: number | null;
  stepDoc: StepDoc | null;
  /** "auto" or an action name */
  foil: string;
  payload: CounterfactualDoc | null;
  /** playback frame offset, 0..k */
  cursor: number;
  playing: boolean;
  summary: SummaryDoc | null;
  /** verbatim summary response text, kept for byte-for-byte checks */
  summaryText: string | null;
  /** rank of the gallery card the current playback came from */
  gallerySelection: number | null;
  /** inline explanation for a refused what-if request */
  notice: string | null;
  /** page-level problem, e.g. an unknown trace id */
  banner: string | null;
}

export const initialState: ViewState = {
  agent: null,
  traceRows: null,
  traceId: null,
  trace: null,
  step: null,
  stepDoc: null,
  foil: "auto",
  payload: null,
  cursor: 0,
  playing: false,
  summary: null,
  summaryText: null,
  gallerySelection: null,
  notice: null,
  banner: null,
};

export type Listener = (state: ViewState) => void;

export class Store {
  private state: ViewState = { ...initialState };
  private readonly listeners = new Set<Listener>();

  get(): ViewState {
    return this.state;
  }

  set(patch: Partial<ViewState>): void {
    this.state = { ...this.state, ...patch };
    for (const fn of this.listeners) fn(this.state);
  }

  subscribe(fn: Listener): () => void {
    this.listeners.add(fn);
    return () => this.listeners.delete(fn);
  }
}
