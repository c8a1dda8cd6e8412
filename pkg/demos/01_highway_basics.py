"""
Driving the simulator by hand
=============================

The environment is a multi-lane highway on a discrete grid: an ego car
choosing among five actions, bot traffic flowing at fixed speed levels, and a
four-part reward (safe lane changing, high speed, keeping right, collision).
Everything below is deterministic given the seed.
"""

from whatif.highway import (
    ACTION_NAMES,
    Action,
    EnvConfig,
    compute_reward,
    is_terminal,
    observe,
    reset,
    step,
)

config = EnvConfig()
state = reset(config, seed=7)

# The state is a plain value: vehicles as (lane, x, speed level) plus the
# random stream position. Printing a crude top-down view needs nothing else.
def draw(state, width=70):
    rows = [["."] * width for _ in range(config.lanes)]
    origin = state.ego.x - 10
    for v in state.others:
        col = int(v.x - origin)
        if 0 <= col < width:
            rows[v.lane][col] = "o"
    rows[state.ego.lane][10] = "E"
    print("\n".join("".join(r) for r in rows))

print("initial road (E = ego, o = traffic):")
draw(state)
print("ego lane:", state.ego.lane, "| speed level:", state.ego.speed_level)

# Drive for a few steps: speed up twice, then hold the lane. Each step
# returns the next state, the reward vector, and a terminal flag.
script = [Action.FASTER, Action.FASTER, Action.IDLE, Action.IDLE, Action.IDLE]
for action in script:
    state, reward, terminated = step(config, state, action)
    print(f"{ACTION_NAMES[action]:>10}: reward "
          f"(cl={reward.cl:+.0f}, hs={reward.hs:+.0f}, "
          f"rml={reward.rml:+.0f}, col={reward.col:+.0f})"
          f"{'  <- crash' if terminated else ''}")

print("\nafter the script:")
draw(state)

# Lane changes are gated by speed: at the top rung the merge is refused and
# the ego stays put, which is exactly what the safe-lane-change reward prices.
before = state.ego.lane
state2, reward, _ = step(config, state, Action.LANE_LEFT)
print(f"\nlane-left at level {state.ego.speed_level}: lane {before} ->",
      state2.ego.lane, f"(cl reward {reward.cl:+.0f})")

# The observation is what the agents actually see: a compact, discrete
# summary of the neighborhood rather than raw coordinates.
obs = observe(config, state)
print("\nagent observation:", obs)
print("terminal?", is_terminal(config, state))

# Rewards can also be queried without stepping, for any transition:
r = compute_reward(config, state, Action.IDLE, state)
print("idle reward at current state:", tuple(r))
