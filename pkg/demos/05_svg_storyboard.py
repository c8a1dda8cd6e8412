"""From pair to picture: the SVG storyboard
==========================================

The end product of the pipeline is visual: a strip of road frames showing
the factual ego and its what-if ghost drifting apart, plus a bar chart
decomposing why the agent preferred the action it took. This demo renders
one storyboard to ``demos/out/storyboard/`` with a tiny HTML index you can
open in a browser.

Run it directly: ``python3 demos/05_svg_storyboard.py`` (about 10 seconds).
"""

from pathlib import Path

from whatif import Hyperparams
from whatif.agent import profile_config, train
from whatif.counterfactual import PairConfig, collect_traces, generate_pairs
from whatif.highway import ACTION_NAMES, EnvConfig
from whatif.render import build_payload, render_payload_svgs, save_payload
from whatif.summary import LAST_STATE, top_important

# Build the usual corpus and keep the single most important moment.

env = profile_config(EnvConfig(), "agent2")
model = train(env, Hyperparams(episodes=2000, seed=0), agent_id="agent2")
traces = collect_traces(env, model, n_sim=12, base_seed=100_000)
pairs = generate_pairs(env, model, traces, PairConfig())
entry = top_important(env, model, pairs, LAST_STATE, n=1, overlap_limit=5).entries[0]
pair = entry.pair
print(f"most important moment: {pair.trace_id} step {pair.origin_index} "
      f"({ACTION_NAMES[pair.fact_action]} vs {ACTION_NAMES[pair.foil_action]}, "
      f"score {entry.score:.3f})\n")

# The payload is the hand-off format between the analysis side and any
# front end: frames (one per offset, fact ego + traffic + foil ghost) and
# the per-component Q bars for both actions at the origin.

payload = build_payload(env, model, pair, score=entry.score,
                        score_method="last-state")
print(f"frames: {len(payload.frames)} (origin + k={payload.k} steps)")
chart = payload.bar_chart
print(f"bar chart components: {chart.components}")
print(f"  {ACTION_NAMES[chart.fact_action]:>10}: "
      + "  ".join(f"{v:7.2f}" for v in chart.fact_values))
print(f"  {ACTION_NAMES[chart.foil_action]:>10}: "
      + "  ".join(f"{v:7.2f}" for v in chart.foil_values))
print()

# Rendering is pure serialization — same payload, same bytes — so artifacts
# can be regenerated and diffed at will. One SVG per frame plus the bars.

out = Path(__file__).parent / "out" / "storyboard"
files = render_payload_svgs(payload, out)
save_payload(payload, out / "payload.json")
for f in files:
    print(f"wrote {f.relative_to(out.parent.parent)} ({f.stat().st_size} bytes)")

# A minimal gallery page so the strip can be eyeballed in a browser.

imgs = "\n".join(
    f'  <figure><img src="{f.name}" alt="{f.stem}">'
    f"<figcaption>{f.stem}</figcaption></figure>"
    for f in files)
title = (f"{payload.trace_id} step {payload.origin_index}: "
         f"{ACTION_NAMES[payload.fact_action]} vs "
         f"{ACTION_NAMES[payload.foil_action]}")
html = (
    "<!doctype html>\n<meta charset='utf-8'>\n"
    f"<title>{title}</title>\n<h1>{title}</h1>\n"
    "<style>figure{display:inline-block;margin:4px}"
    "figcaption{font:12px monospace;text-align:center}</style>\n"
    f"{imgs}\n")
index = out / "index.html"
index.write_text(html)
print(f"\nopen {index} in a browser to view the storyboard")
