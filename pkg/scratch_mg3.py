import time
import numpy as np

from epiplan import AgentConfig, run_episode
from epiplan.envs import minigrid

known = minigrid.MiniGridSpec(
    door_rows=(1,), key_cells=((1, 1),), start_cells=((2, 0),),
    start_orients=(0,), horizon=25,
)
known_model = minigrid.build_model(known)

red = minigrid.reduced_spec()
red_model = minigrid.build_model(red)

for scale in (1.0, 0.3, 0.1, 0.03):
    cfg = AgentConfig(horizon=25, vi_iterations=10, epistemic_enabled=True,
                      score_scale=scale, compute_bfe_trace=False)
    env = minigrid.MiniGridEnv(known)
    rec = run_episode(env, known_model, cfg, seed=0, agent="efe")
    print(f"scale={scale}: known-layout efe steps={rec.steps} "
          f"success={rec.success} reward={rec.total_reward:.3f}")

print()
for scale in (0.3, 0.1, 0.03):
    cfg = AgentConfig(horizon=25, vi_iterations=10, epistemic_enabled=True,
                      score_scale=scale, compute_bfe_trace=False)
    wins = 0
    kvs = []
    t0 = time.time()
    for seed in range(8):
        env = minigrid.MiniGridEnv(red)
        rec = run_episode(env, red_model, cfg, seed=seed, agent="efe")
        wins += rec.success
        kv = minigrid.key_visibility_step(rec.observations)
        kvs.append(kv)
    print(f"scale={scale}: reduced efe wins={wins}/8 key_vis={kvs} "
          f"({(time.time()-t0)/8:.1f}s/ep)")

cfg = AgentConfig(horizon=25, vi_iterations=10, epistemic_enabled=False,
                  compute_bfe_trace=False)
wins = 0
kvs = []
for seed in range(8):
    env = minigrid.MiniGridEnv(red)
    rec = run_episode(env, red_model, cfg, seed=seed, agent="kl")
    wins += rec.success
    kvs.append(minigrid.key_visibility_step(rec.observations))
print(f"kl baseline: wins={wins}/8 key_vis={kvs}")
