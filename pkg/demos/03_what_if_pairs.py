"""What-if pairs: replaying the road not taken
=============================================

A trace records every decision an agent made during one episode. A what-if
pair picks one of those decisions, forces a different action (the *foil*),
and lets the greedy policy finish the next k steps from there. Because the
simulator state is a plain value — random stream included — the factual
branch replays bit-for-bit and the foil branch is the only thing that
changes.

Run it directly: ``python3 demos/03_what_if_pairs.py`` (about 10 seconds).
"""

from whatif import Hyperparams
from whatif.agent import profile_config, ranked_actions, totals, train
from whatif.counterfactual import (
    PairConfig, collect_traces, eligible_origins, generate_pairs, replay_check,
)
from whatif.highway import ACTION_NAMES, EnvConfig
from whatif.summary import rejoin_fraction

# Train a speed-loving driver and record a dozen greedy episodes.

env = profile_config(EnvConfig(), "agent2")
model = train(env, Hyperparams(episodes=2000, seed=0), agent_id="agent2")
traces = collect_traces(env, model, n_sim=12, base_seed=100_000)

print("trace           steps  ended by    eligible origins (k=7)")
for t in traces:
    print(f"{t.trace_id}  {len(t.steps):>5}  {t.terminal_cause:<10}  "
          f"{len(eligible_origins(t, 7)):>5}")
print()

# Traces are replayable: feeding the recorded seed and action sequence back
# through the simulator must reproduce every snapshot exactly. This is the
# property the whole counterfactual machinery leans on.

replay_check(env, traces[0])
print(f"replay check on {traces[0].trace_id}: exact match\n")

# One pair per eligible origin. The default foil is the second-best action
# by total Q at the origin, and each branch runs k=7 steps.

pairs = generate_pairs(env, model, traces, PairConfig())
degenerate = sum(p.degenerate for p in pairs)
crashed = sum(p.foil_terminal_cause == "collision" for p in pairs)
print(f"pairs: {len(pairs)} | degenerate (foil physically identical at step 1): "
      f"{degenerate} | foil crashed early: {crashed}")
print(f"foils that rejoin the factual path at some offset: "
      f"{rejoin_fraction(pairs):.0%}\n")

# Pick a dramatic pair — one whose foil ends in a collision — and look at the
# decision that spawned it. The fact action is the greedy argmax of the total
# Q at the origin; the foil is the runner-up.

pair = next(p for p in pairs if p.foil_terminal_cause == "collision")
q_tot = totals(pair.origin_q)
ranking = ranked_actions(pair.origin_q)
print(f"origin: step {pair.origin_index} of {pair.trace_id}")
print("ranked actions by total Q at the origin:")
for rank, a in enumerate(ranking):
    tag = " <- fact" if a == pair.fact_action else (
        " <- foil" if a == pair.foil_action else "")
    print(f"  {rank + 1}. {ACTION_NAMES[a]:<10} Q={q_tot[a]:>8.3f}{tag}")
print()

# Side by side: the ego vehicle under each branch, offset by offset. The
# foil list is shorter than k only because the branch hit a crash and the
# episode ended there.

print("offset  fact ego (lane, x, speed)   foil ego (lane, x, speed)")
print(f"{0:>6}  both start from the origin snapshot")
for j in range(pair.k):
    f = pair.fact[j].ego
    c = pair.foil[j].ego if j < len(pair.foil) else None
    foil_txt = f"({c.lane}, {c.x:6.1f}, {c.speed_level})" if c else "-- crashed --"
    print(f"{j + 1:>6}  ({f.lane}, {f.x:6.1f}, {f.speed_level})         {foil_txt}")
print(f"\nfoil branch ended by: {pair.foil_terminal_cause} "
      f"after {len(pair.foil)} of {pair.k} steps")
