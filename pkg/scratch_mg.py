import time
import numpy as np

from epiplan import AgentConfig, plan, run_episode
from epiplan.envs import grid, minigrid

# criterion 7: BFE trace flattening on the gridworld initial state
spec = grid.GridSpec()
model = grid.build_model(spec)
cfg = AgentConfig(horizon=12, vi_iterations=20, epistemic_enabled=True)
obs0 = spec.cell_index(spec.start)
policy, trace = plan(model, ([], [obs0]), cfg)
bfe = np.array(trace.bfe)
deltas = np.abs(np.diff(bfe))
print("gridworld EFE BFE trace:", np.round(bfe[:8], 6))
print("min |dBFE|:", deltas.min(), "first tau with |dBFE|<1e-6:",
      int(np.argmax(deltas < 1e-6)) + 2 if np.any(deltas < 1e-6) else None)

# minigrid: build + one episode each agent
t0 = time.time()
mspec = minigrid.reduced_spec()
print("\nreduced spec validated in", round(time.time() - t0, 2), "s")
t0 = time.time()
mtensors = minigrid.build_tensors(mspec)
mmodel = minigrid.build_model(mspec, mtensors)
print("tensors+model in", round(time.time() - t0, 2), "s")

for label, epi in (("efe", True), ("kl", False)):
    cfg = AgentConfig(horizon=25, vi_iterations=10, epistemic_enabled=epi,
                      compute_bfe_trace=False)
    env = minigrid.MiniGridEnv(mspec)
    t0 = time.time()
    rec = run_episode(env, mmodel, cfg, seed=3, agent=label)
    kv = minigrid.key_visibility_step(rec.observations)
    print(f"{label}: steps={rec.steps} success={rec.success} "
          f"reward={rec.total_reward:.3f} key_vis={kv} "
          f"actions={rec.actions} time={time.time()-t0:.1f}s")
