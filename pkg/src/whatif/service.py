"""HTTP facade over an ArtifactStore.

Read-mostly JSON API: agent/trace browsing straight from stored artifacts,
plus on-demand counterfactual rollouts for any user-chosen foil action. Every
response is a pure function of (store contents, query): rollouts run on copied
snapshots, bodies are canonically serialized (sorted keys), and summaries are
cached per parameter tuple. CORS is open so the explorer UI can run from any
origin; the OpenAPI description is served at /api/spec.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Query, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.staticfiles import StaticFiles

from whatif import __version__
from whatif.agent import greedy_action, totals
from whatif.counterfactual import (
    CFPair,
    SECOND_BEST,
    eligible_origins,
    pair_for_origin,
    user_chosen,
)
from whatif.errors import (
    ConfigError,
    IneligibleOriginError,
    InvalidFoilError,
    WhatifError,
)
from whatif.highway import ACTION_NAMES, ACTIONS_BY_NAME, observation_to_dict
from whatif.render import build_payload, payload_to_dict
from whatif.store import ArtifactStore, RunArtifacts
from whatif.summary import ImportanceMethod, last_state_importance, top_important

SUMMARY_METHODS = ("last-state", "qdiff-second-best", "qdiff-worst", "frequency")


def canonical_json(doc: dict) -> Response:
    """Canonical bytes so identical queries return byte-identical bodies."""
    return Response(content=json.dumps(doc, sort_keys=True),
                    media_type="application/json")


def _agent_doc(run: RunArtifacts) -> dict:
    model = run.model
    return {
        "id": model.agent_id,
        "weights": {
            "collision_lane_change": model.weights[0],
            "high_speed": model.weights[1],
            "right_most_lane": model.weights[2],
            "collision": model.weights[3],
        },
        "gamma": model.gamma,
        "fold_collision": model.fold_collision,
        "training": model.metadata,
        "k": run.k,
        "trace_count": len(run.traces),
        "pair_count": len(run.pairs),
    }


def _trace_doc(run: RunArtifacts, trace_id: str) -> dict:
    trace = run.traces[trace_id]
    eligible = eligible_origins(trace, run.k)
    return {
        "trace_id": trace.trace_id,
        "agent_id": trace.agent_id,
        "seed": trace.seed,
        "length": len(trace.steps),
        "terminal_cause": trace.terminal_cause,
        "k": run.k,
        "eligible_origins": len(eligible),
        "steps": [
            {
                "index": ts.index,
                "action": int(ts.action),
                "action_name": ACTION_NAMES[ts.action],
                "reward_total": float(sum(ts.reward)),
                "eligible": ts.index in eligible,
            }
            for ts in trace.steps
        ],
    }


def _step_doc(run: RunArtifacts, trace_id: str, index: int) -> dict:
    trace = run.traces[trace_id]
    ts = trace.steps[index]
    q = ts.q
    return {
        "trace_id": trace_id,
        "index": index,
        "observation": observation_to_dict(ts.obs),
        "action": int(ts.action),
        "action_name": ACTION_NAMES[ts.action],
        "reward": list(ts.reward),
        "q": q.tolist(),
        "q_totals": totals(q).tolist(),
        "greedy_action": greedy_action(q),
        "action_names": list(ACTION_NAMES.values()),
        "k": run.k,
        "eligible": index in eligible_origins(trace, run.k),
    }


def _parse_foil(text: str) -> Optional[int]:
    """Foil query value -> action ordinal, or None for auto/second-best."""
    if text == "auto":
        return None
    if text in ACTIONS_BY_NAME:
        return int(ACTIONS_BY_NAME[text])
    if text.isdigit() and int(text) < len(ACTION_NAMES):
        return int(text)
    raise HTTPException(
        status_code=400,
        detail=f"unknown action {text!r}; expected auto, an ordinal < "
               f"{len(ACTION_NAMES)}, or one of "
               + ", ".join(ACTION_NAMES.values()))


def _counterfactual_doc(run: RunArtifacts, trace_id: str, index: int,
                        action: str, k: int) -> dict:
    trace = run.traces[trace_id]
    if k < 1:
        raise HTTPException(status_code=400, detail=f"k must be >= 1, got {k}")
    ordinal = _parse_foil(action)
    fact = trace.steps[index].action
    if ordinal is not None and ordinal == int(fact):
        raise HTTPException(
            status_code=400,
            detail=f"foil action {ACTION_NAMES[fact]!r} equals the factual "
                   f"action at step {index}")
    method = SECOND_BEST if ordinal is None else user_chosen(ordinal)
    try:
        pair = pair_for_origin(run.env, run.model, trace, index, method, k)
    except IneligibleOriginError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    except InvalidFoilError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    score = last_state_importance(run.env, run.model, pair)
    payload = build_payload(run.env, run.model, pair, score=score,
                            score_method="last-state")
    doc = payload_to_dict(payload)
    doc["last_state_importance"] = score
    return doc


def _summary_doc(run: RunArtifacts, method: ImportanceMethod, n: int,
                 overlap: int) -> dict:
    summary = top_important(run.env, run.model, list(run.pairs), method, n,
                            overlap)
    entries = []
    for e in summary.entries:
        p: CFPair = e.pair
        entries.append({
            "trace_id": p.trace_id,
            "origin_index": p.origin_index,
            "score": e.score,
            "fact_action": int(p.fact_action),
            "fact_action_name": ACTION_NAMES[p.fact_action],
            "foil_action": int(p.foil_action),
            "foil_action_name": ACTION_NAMES[p.foil_action],
            "foil_terminal_cause": p.foil_terminal_cause,
            "k": p.k,
            "counterfactual_url": (
                f"/api/traces/{p.trace_id}/steps/{p.origin_index}"
                f"/counterfactual?action={ACTION_NAMES[p.foil_action]}&k={p.k}"),
        })
    return {
        "agent_id": summary.agent_id,
        "method": summary.method,
        "n": summary.n,
        "overlap_limit": summary.overlap_limit,
        "pair_count": len(run.pairs),
        "entries": entries,
    }


def create_app(store: ArtifactStore, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(
        title="whatif artifact service",
        version=__version__,
        openapi_url="/api/spec",
        docs_url="/api/docs",
    )
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["GET"],
        allow_headers=["*"],
    )
    summary_cache: dict[tuple, Response] = {}

    def _run_or_404(agent_id: str) -> RunArtifacts:
        run = store.run_for_agent(agent_id)
        if run is None:
            raise HTTPException(status_code=404,
                                detail=f"unknown agent {agent_id!r}")
        return run

    def _trace_run_or_404(trace_id: str) -> RunArtifacts:
        run = store.run_for_trace(trace_id)
        if run is None:
            raise HTTPException(status_code=404,
                                detail=f"unknown trace {trace_id!r}")
        return run

    def _check_step(run: RunArtifacts, trace_id: str, index: int) -> None:
        n = len(run.traces[trace_id].steps)
        if not 0 <= index < n:
            raise HTTPException(
                status_code=404,
                detail=f"step {index} out of range for {trace_id} "
                       f"(length {n})")

    @app.get("/api/agents")
    def list_agents() -> Response:
        return canonical_json(
            {"agents": [_agent_doc(store.runs[a]) for a in store.agent_ids()]})

    @app.get("/api/traces")
    def list_traces(agent: str = Query(...)) -> Response:
        run = _run_or_404(agent)
        rows = [
            {
                "trace_id": tid,
                "length": len(run.traces[tid].steps),
                "terminal_cause": run.traces[tid].terminal_cause,
                "eligible_origins": len(eligible_origins(run.traces[tid], run.k)),
            }
            for tid in run.traces
        ]
        return canonical_json({"agent_id": agent, "k": run.k, "traces": rows})

    @app.get("/api/traces/{trace_id}")
    def trace_detail(trace_id: str) -> Response:
        run = _trace_run_or_404(trace_id)
        return canonical_json(_trace_doc(run, trace_id))

    @app.get("/api/traces/{trace_id}/steps/{index}")
    def step_detail(trace_id: str, index: int) -> Response:
        run = _trace_run_or_404(trace_id)
        _check_step(run, trace_id, index)
        return canonical_json(_step_doc(run, trace_id, index))

    @app.get("/api/traces/{trace_id}/steps/{index}/counterfactual")
    def counterfactual(trace_id: str, index: int,
                       action: str = Query("auto"),
                       k: int = Query(7)) -> Response:
        run = _trace_run_or_404(trace_id)
        _check_step(run, trace_id, index)
        return canonical_json(_counterfactual_doc(run, trace_id, index,
                                                  action, k))

    @app.get("/api/summary")
    def summary(agent: str = Query(...),
                method: str = Query("last-state"),
                n: int = Query(4),
                overlap: int = Query(5),
                seed: int = Query(0)) -> Response:
        run = _run_or_404(agent)
        if method not in SUMMARY_METHODS:
            raise HTTPException(
                status_code=400,
                detail=f"unknown method {method!r}; expected one of "
                       + ", ".join(SUMMARY_METHODS))
        key = (agent, method, n, overlap, seed)
        cached = summary_cache.get(key)
        if cached is not None:
            return cached
        text = f"frequency:{seed}" if method == "frequency" else method
        try:
            doc = _summary_doc(run, ImportanceMethod.parse(text), n, overlap)
        except ConfigError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        response = canonical_json(doc)
        summary_cache[key] = response
        return response

    @app.exception_handler(WhatifError)
    def _library_error(request, exc: WhatifError):  # pragma: no cover - safety net
        return Response(content=json.dumps({"detail": str(exc)}, sort_keys=True),
                        status_code=500, media_type="application/json")

    if ui_dir is not None:
        ui_dir = Path(ui_dir)
        if not ui_dir.is_dir():
            raise ConfigError(f"UI directory not found: {ui_dir}")
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
