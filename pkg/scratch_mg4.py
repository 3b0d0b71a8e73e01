import numpy as np
from epiplan import AgentConfig
from epiplan.epistemic import StaticInfoEntropies, state_info_scores
from epiplan.envs import minigrid
from epiplan.model import build_graph, filter_history

np.set_printoptions(precision=4, suppress=True)

spec = minigrid.reduced_spec()
model = minigrid.build_model(spec)
pack = model.obs_info_pack
print("pack dyn:", pack.dyn_names, pack.dyn_cards,
      "static:", pack.static_names, pack.static_cards)

# uniform static beliefs, delta-ish dynamic beliefs
static_b = {"k": np.full(4, 0.25), "d": np.full(2, 0.5)}
ent = StaticInfoEntropies(pack, static_b)
print("h_all range:", ent.h_all.min(), ent.h_all.max(),
      "nonzero frac:", (ent.h_all > 1e-12).mean())

dyn_b = {
    "l": np.full(16, 1 / 16),
    "o": np.full(4, 0.25),
    "s": np.array([1.0, 0.0, 0.0]),
}
scores = state_info_scores(pack, dyn_b, ent)
for name, sc in scores.items():
    print(f"score[{name}] =", sc)

# now a real plan: seed 1 (key not initially visible)
env = minigrid.MiniGridEnv(spec)
obs0 = env.reset(seed=1)
print("\nlayout: agent", env.cell, "orient", env.orient,
      "key", spec.key_cell(env.k_idx), "door", spec.door_cell(env.d_idx))
model_obs = env.observation_dict(obs0)
belief = filter_history(model, [], [model_obs])
for f in ("l", "o", "s", "k", "d"):
    from epiplan.tensor import marginal
    print(f"belief[{f}] =", marginal(belief, [f]).data)
