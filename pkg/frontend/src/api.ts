// Typed client for the whatif artifact service. The UI consumes these
// documents verbatim: every number it shows is a field from one of them,
// never something recomputed on the client.

export interface AgentDoc {
  id: string;
  gamma: number;
  fold_collision: string;
  k: number;
  trace_count: number;
  pair_count: number;
  weights: Record<string, number>;
  training: Record<string, unknown>;
}

export interface AgentsDoc {
  agents: AgentDoc[];
}

export interface TraceRow {
  trace_id: string;
  length: number;
  terminal_cause: string;
  eligible_origins: number;
}

export interface TracesDoc {
  agent_id: string;
  k: number;
  traces: TraceRow[];
}

export interface TimelineStepDoc {
  index: number;
  action: number;
  action_name: string;
  reward_total: number;
  eligible: boolean;
}

export interface TraceDoc {
  trace_id: string;
  agent_id: string;
  seed: number;
  length: number;
  terminal_cause: string;
  k: number;
  eligible_origins: number;
  steps: TimelineStepDoc[];
}

export interface StepDoc {
  trace_id: string;
  index: number;
  observation: Record<string, unknown>;
  action: number;
  action_name: string;
  reward: number[];
  q: number[][];
  q_totals: number[];
  greedy_action: number;
  action_names: string[];
  k: number;
  eligible: boolean;
}

export interface MarkDoc {
  lane: number;
  x: number;
}

export interface FrameDoc {
  offset: number;
  lanes: number;
  car_length: number;
  view_x: number;
  view_width: number;
  fact_ego: MarkDoc;
  others: MarkDoc[];
  foil_ego: MarkDoc | null;
  foil_absent: boolean;
  crash_marker: MarkDoc | null;
}

export interface BarChartDoc {
  components: string[];
  fact_action: number;
  foil_action: number;
  fact_values: number[];
  foil_values: number[];
}

export interface CounterfactualDoc {
  trace_id: string;
  origin_index: number;
  k: number;
  agent_id: string;
  fact_action: number;
  fact_action_name: string;
  foil_action: number;
  foil_action_name: string;
  cf_method: string;
  foil_terminal_cause: string | null;
  degenerate: boolean;
  score: number | null;
  score_method: string | null;
  last_state_importance: number;
  bar_chart: BarChartDoc;
  frames: FrameDoc[];
}

export interface SummaryEntryDoc {
  trace_id: string;
  origin_index: number;
  score: number | null;
  fact_action: number;
  fact_action_name: string;
  foil_action: number;
  foil_action_name: string;
  foil_terminal_cause: string | null;
  k: number;
  counterfactual_url: string;
}

export interface SummaryDoc {
  agent_id: string;
  method: string;
  n: number;
  overlap_limit: number;
  pair_count: number;
  entries: SummaryEntryDoc[];
}

/** A non-200 response; `detail` is the service's own explanation. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

function detailOf(status: number, text: string): string {
  try {
    const doc: unknown = JSON.parse(text);
    if (
      typeof doc === "object" &&
      doc !== null &&
      typeof (doc as { detail?: unknown }).detail === "string"
    ) {
      return (doc as { detail: string }).detail;
    }
  } catch {
    // not JSON; fall through
  }
  return `request failed with status ${status}`;
}

export class ApiClient {
  constructor(private readonly base = "") {}

  private async getJson<T>(
    url: string,
    signal?: AbortSignal,
  ): Promise<{ doc: T; text: string }> {
    const resp = await fetch(this.base + url, signal ? { signal } : undefined);
    const text = await resp.text();
    if (resp.status !== 200) {
      throw new ApiError(resp.status, detailOf(resp.status, text));
    }
    return { doc: JSON.parse(text) as T, text };
  }

  async agents(): Promise<AgentsDoc> {
    return (await this.getJson<AgentsDoc>("/api/agents")).doc;
  }

  async traces(agent: string): Promise<TracesDoc> {
    const url = `/api/traces?agent=${encodeURIComponent(agent)}`;
    return (await this.getJson<TracesDoc>(url)).doc;
  }

  async trace(traceId: string): Promise<TraceDoc> {
    const url = `/api/traces/${encodeURIComponent(traceId)}`;
    return (await this.getJson<TraceDoc>(url)).doc;
  }

  async step(traceId: string, index: number): Promise<StepDoc> {
    const url = `/api/traces/${encodeURIComponent(traceId)}/steps/${index}`;
    return (await this.getJson<StepDoc>(url)).doc;
  }

  counterfactualUrl(
    traceId: string,
    index: number,
    action: string,
    k: number,
  ): string {
    return (
      `/api/traces/${encodeURIComponent(traceId)}/steps/${index}` +
      `/counterfactual?action=${encodeURIComponent(action)}&k=${k}`
    );
  }

  async counterfactualByUrl(
    url: string,
    signal?: AbortSignal,
  ): Promise<CounterfactualDoc> {
    return (await this.getJson<CounterfactualDoc>(url, signal)).doc;
  }

  /** Returns the parsed document plus the verbatim response text so callers
   * can check byte-for-byte agreement with what they display. */
  async summary(
    agent: string,
    method: string,
    n: number,
    overlap: number,
  ): Promise<{ doc: SummaryDoc; text: string }> {
    const url =
      `/api/summary?agent=${encodeURIComponent(agent)}` +
      `&method=${encodeURIComponent(method)}&n=${n}&overlap=${overlap}`;
    return this.getJson<SummaryDoc>(url);
  }
}

/** Hands out one AbortSignal per request slot; asking for the next signal
 * aborts the previous request, so only the latest response can land. */
export class LatestGate {
  private ctrl: AbortController | null = null;

  next(): AbortSignal {
    this.ctrl?.abort();
    this.ctrl = new AbortController();
    return this.ctrl.signal;
  }
}

export function isAbort(err: unknown): boolean {
  return err instanceof DOMException && err.name === "AbortError";
}
