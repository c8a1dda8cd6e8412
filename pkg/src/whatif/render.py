"""Presentation payloads: reward bars, frame sequences, SVG export.

A pair renders as k+1 frames at offsets 0..k. Frame 0 is the shared origin —
the foil marker sits exactly on the factual ego, and the two drift apart in
later frames as the trajectories diverge. If the foil ends early (collision),
later frames keep a crash marker at its final position instead of a vehicle.

Frames carry world coordinates plus a camera window that follows the factual
ego; renderers (the SVG writer here, or a UI) apply the same affine mapping
meters -> pixels. Bars copy stored Q values verbatim — no recomputation in
the presentation layer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from whatif.agent import COMPONENTS, AgentModel
from whatif.counterfactual import CFPair
from whatif.errors import ConsistencyError, InvalidFoilError
from whatif.highway import ACTION_NAMES, Action, EnvConfig, Observation, SimState, observe

# Camera window around the factual ego (meters).
VIEW_BEHIND = 60.0
VIEW_AHEAD = 120.0

# Frame SVG geometry (pixels).
FRAME_WIDTH_PX = 720
LANE_HEIGHT_PX = 40
FRAME_MARGIN_PX = 10
CAR_HEIGHT_PX = 24

# Bar-chart SVG geometry (pixels).
BAR_WIDTH_PX = 460
BAR_PLOT_HEIGHT_PX = 150
BAR_MARGIN_PX = 40


@dataclass(frozen=True)
class VehicleMark:
    lane: int
    x: float  # world meters


@dataclass(frozen=True)
class Frame:
    offset: int                      # 0 (origin) .. k
    lanes: int
    car_length: float
    view_x: float                    # camera left edge, world meters
    view_width: float
    fact_ego: VehicleMark
    others: tuple[VehicleMark, ...]
    foil_ego: Optional[VehicleMark]  # None once the foil has ended
    foil_absent: bool
    crash_marker: Optional[VehicleMark]


@dataclass(frozen=True)
class BarChart:
    components: tuple[str, ...]
    fact_action: Action
    foil_action: Action
    fact_values: tuple[float, ...]
    foil_values: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class ExplanationPayload:
    """Everything a presentation needs for one fact/foil pair."""

    trace_id: str
    origin_index: int
    k: int
    agent_id: str
    fact_action: Action
    foil_action: Action
    cf_method: str
    foil_terminal_cause: Optional[str]
    degenerate: bool
    score: Optional[float]
    score_method: Optional[str]
    bar_chart: BarChart
    frames: tuple[Frame, ...]


def rd_bar_data(model: AgentModel, obs: Observation, fact: Action,
                foil: Action) -> BarChart:
    """Per-component Q bars for the factual and foil actions, copied from the
    model's decomposition."""
    if fact == foil:
        raise InvalidFoilError(
            f"bar chart needs two distinct actions, got {fact.name} twice")
    q = model.decomposed_q(obs)
    return BarChart(
        components=COMPONENTS,
        fact_action=Action(fact),
        foil_action=Action(foil),
        fact_values=tuple(float(v) for v in q[:, int(fact)]),
        foil_values=tuple(float(v) for v in q[:, int(foil)]),
    )


def _mark(state: SimState) -> VehicleMark:
    return VehicleMark(state.ego.lane, state.ego.x)


def _frame(config: EnvConfig, offset: int, fact_state: SimState,
           foil_state: Optional[SimState], last_foil: SimState) -> Frame:
    absent = foil_state is None
    return Frame(
        offset=offset,
        lanes=config.lanes,
        car_length=config.car_length,
        view_x=fact_state.ego.x - VIEW_BEHIND,
        view_width=VIEW_BEHIND + VIEW_AHEAD,
        fact_ego=_mark(fact_state),
        others=tuple(VehicleMark(v.lane, v.x) for v in fact_state.others),
        foil_ego=None if absent else _mark(foil_state),
        foil_absent=absent,
        crash_marker=_mark(last_foil) if absent else None,
    )


def pair_to_frames(config: EnvConfig, pair: CFPair) -> tuple[Frame, ...]:
    """k+1 frames: the shared origin, then one frame per step.

    Frame 0 overlays the foil marker exactly on the factual ego. Frame t
    (t >= 1) shows fact state origin+t with the foil's t-th state; after the
    foil's early end the foil marker is absent and a crash marker holds its
    final position.
    """
    origin = pair.origin_snapshot
    frames = [_frame(config, 0, origin, origin, pair.foil[-1])]
    for t in range(1, pair.k + 1):
        fact_state = pair.fact[t - 1]
        foil_state = pair.foil[t - 1] if t - 1 < len(pair.foil) else None
        frames.append(_frame(config, t, fact_state, foil_state, pair.foil[-1]))
    return tuple(frames)


def build_payload(config: EnvConfig, model: AgentModel, pair: CFPair,
                  score: Optional[float] = None,
                  score_method: Optional[str] = None) -> ExplanationPayload:
    """Bundle origin bars and the frame sequence for one pair."""
    if pair.agent_id != model.agent_id:
        raise ConsistencyError(
            f"pair belongs to {pair.agent_id!r}, model is {model.agent_id!r}")
    obs = observe(config, pair.origin_snapshot)
    chart = rd_bar_data(model, obs, pair.fact_action, pair.foil_action)
    return ExplanationPayload(
        trace_id=pair.trace_id,
        origin_index=pair.origin_index,
        k=pair.k,
        agent_id=pair.agent_id,
        fact_action=pair.fact_action,
        foil_action=pair.foil_action,
        cf_method=pair.cf_method,
        foil_terminal_cause=pair.foil_terminal_cause,
        degenerate=pair.degenerate,
        score=score,
        score_method=score_method,
        bar_chart=chart,
        frames=pair_to_frames(config, pair),
    )


# --- JSON form ----------------------------------------------------------------

def _mark_to_dict(m: Optional[VehicleMark]) -> Optional[dict]:
    return None if m is None else {"lane": m.lane, "x": m.x}


def frame_to_dict(f: Frame) -> dict:
    return {
        "offset": f.offset,
        "lanes": f.lanes,
        "car_length": f.car_length,
        "view_x": f.view_x,
        "view_width": f.view_width,
        "fact_ego": _mark_to_dict(f.fact_ego),
        "others": [_mark_to_dict(m) for m in f.others],
        "foil_ego": _mark_to_dict(f.foil_ego),
        "foil_absent": f.foil_absent,
        "crash_marker": _mark_to_dict(f.crash_marker),
    }


def payload_to_dict(p: ExplanationPayload) -> dict:
    return {
        "trace_id": p.trace_id,
        "origin_index": p.origin_index,
        "k": p.k,
        "agent_id": p.agent_id,
        "fact_action": int(p.fact_action),
        "fact_action_name": ACTION_NAMES[p.fact_action],
        "foil_action": int(p.foil_action),
        "foil_action_name": ACTION_NAMES[p.foil_action],
        "cf_method": p.cf_method,
        "foil_terminal_cause": p.foil_terminal_cause,
        "degenerate": p.degenerate,
        "score": p.score,
        "score_method": p.score_method,
        "bar_chart": {
            "components": list(p.bar_chart.components),
            "fact_action": int(p.bar_chart.fact_action),
            "foil_action": int(p.bar_chart.foil_action),
            "fact_values": list(p.bar_chart.fact_values),
            "foil_values": list(p.bar_chart.foil_values),
        },
        "frames": [frame_to_dict(f) for f in p.frames],
    }


def save_payload(p: ExplanationPayload, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload_to_dict(p), sort_keys=True, indent=1))
    return path


# --- SVG ----------------------------------------------------------------------

FACT_COLOR = "#2e7d32"   # green ego
OTHER_COLOR = "#1565c0"  # blue traffic
FOIL_COLOR = "#c62828"   # red foil marker


def _fmt(v: float) -> str:
    return format(v, ".2f")


def _frame_px(f: Frame):
    """Affine world->pixel mapping for one frame."""
    scale = FRAME_WIDTH_PX / f.view_width

    def to_px(mark: VehicleMark) -> tuple[float, float]:
        x = (mark.x - f.view_x) * scale
        y = FRAME_MARGIN_PX + mark.lane * LANE_HEIGHT_PX + LANE_HEIGHT_PX / 2
        return x, y

    return scale, to_px


def render_frame_svg(frame: Frame) -> str:
    """One frame as a deterministic standalone SVG document."""
    scale, to_px = _frame_px(frame)
    height = frame.lanes * LANE_HEIGHT_PX + 2 * FRAME_MARGIN_PX
    car_w = frame.car_length * scale
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{FRAME_WIDTH_PX}" '
        f'height="{height}" viewBox="0 0 {FRAME_WIDTH_PX} {height}">',
        f'<desc>step offset {frame.offset}</desc>',
        f'<rect x="0" y="0" width="{FRAME_WIDTH_PX}" height="{height}" fill="#f5f5f5"/>',
    ]
    for lane in range(frame.lanes + 1):
        y = FRAME_MARGIN_PX + lane * LANE_HEIGHT_PX
        dash = ' stroke-dasharray="12 8"' if 0 < lane < frame.lanes else ""
        parts.append(f'<line x1="0" y1="{y}" x2="{FRAME_WIDTH_PX}" y2="{y}" '
                     f'stroke="#9e9e9e" stroke-width="1"{dash}/>')

    def rect(mark: VehicleMark, color: str, cls: str, opacity: str = "1.0") -> str:
        x, y = to_px(mark)
        return (f'<rect class="{cls}" x="{_fmt(x - car_w / 2)}" '
                f'y="{_fmt(y - CAR_HEIGHT_PX / 2)}" width="{_fmt(car_w)}" '
                f'height="{CAR_HEIGHT_PX}" fill="{color}" fill-opacity="{opacity}" '
                f'rx="3"/>')

    for m in frame.others:
        parts.append(rect(m, OTHER_COLOR, "other"))
    parts.append(rect(frame.fact_ego, FACT_COLOR, "fact-ego"))
    if frame.foil_ego is not None:
        parts.append(rect(frame.foil_ego, FOIL_COLOR, "foil-ego", opacity="0.75"))
    if frame.crash_marker is not None:
        x, y = to_px(frame.crash_marker)
        r = CAR_HEIGHT_PX / 2
        parts.append(f'<g class="crash" stroke="{FOIL_COLOR}" stroke-width="3">'
                     f'<line x1="{_fmt(x - r)}" y1="{_fmt(y - r)}" '
                     f'x2="{_fmt(x + r)}" y2="{_fmt(y + r)}"/>'
                     f'<line x1="{_fmt(x - r)}" y1="{_fmt(y + r)}" '
                     f'x2="{_fmt(x + r)}" y2="{_fmt(y - r)}"/></g>')
    parts.append("</svg>")
    return "\n".join(parts)


def render_bar_svg(chart: BarChart) -> str:
    """Grouped per-component bars for fact vs foil action, zero-line anchored.

    Bar heights are proportional to |Q|; negative values hang below the zero
    line. Geometry is exactly value/max_abs * plot height.
    """
    n = len(chart.components)
    all_vals = list(chart.fact_values) + list(chart.foil_values)
    max_abs = max((abs(v) for v in all_vals), default=0.0) or 1.0
    group_w = (BAR_WIDTH_PX - 2 * BAR_MARGIN_PX) / n
    bar_w = group_w / 3
    zero_y = BAR_MARGIN_PX + BAR_PLOT_HEIGHT_PX / 2
    half = BAR_PLOT_HEIGHT_PX / 2
    height = BAR_PLOT_HEIGHT_PX + 2 * BAR_MARGIN_PX

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{BAR_WIDTH_PX}" '
        f'height="{height}" viewBox="0 0 {BAR_WIDTH_PX} {height}">',
        f'<desc>reward decomposition: {ACTION_NAMES[chart.fact_action]} vs '
        f'{ACTION_NAMES[chart.foil_action]}</desc>',
        f'<rect x="0" y="0" width="{BAR_WIDTH_PX}" height="{height}" fill="#ffffff"/>',
        f'<line x1="{BAR_MARGIN_PX}" y1="{_fmt(zero_y)}" '
        f'x2="{BAR_WIDTH_PX - BAR_MARGIN_PX}" y2="{_fmt(zero_y)}" '
        f'stroke="#616161" stroke-width="1"/>',
    ]
    for i, label in enumerate(chart.components):
        gx = BAR_MARGIN_PX + i * group_w
        for j, (value, color, cls) in enumerate((
                (chart.fact_values[i], FACT_COLOR, "fact"),
                (chart.foil_values[i], FOIL_COLOR, "foil"))):
            h = abs(value) / max_abs * half
            x = gx + bar_w * (0.5 + j)
            y = zero_y - h if value >= 0 else zero_y
            parts.append(
                f'<rect class="bar {cls}" data-component="{label}" '
                f'data-value="{value!r}" x="{_fmt(x)}" y="{_fmt(y)}" '
                f'width="{_fmt(bar_w * 0.9)}" height="{_fmt(h)}" fill="{color}"/>')
        parts.append(
            f'<text x="{_fmt(gx + group_w / 2)}" '
            f'y="{height - BAR_MARGIN_PX / 2}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts)


def render_payload_svgs(payload: ExplanationPayload, out_dir: str | Path,
                        ) -> list[Path]:
    """One SVG per frame plus the bar chart; deterministic bytes."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for frame in payload.frames:
        path = out_dir / f"frame_{frame.offset:02d}.svg"
        path.write_text(render_frame_svg(frame))
        written.append(path)
    bars = out_dir / "bars.svg"
    bars.write_text(render_bar_svg(payload.bar_chart))
    written.append(bars)
    return written
