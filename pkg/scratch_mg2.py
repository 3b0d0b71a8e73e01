import time
import numpy as np

from epiplan import AgentConfig, run_episode, plan
from epiplan.envs import minigrid

# fully observed: single candidates for everything
spec = minigrid.MiniGridSpec(
    door_rows=(1,),
    key_cells=((1, 1),),
    start_cells=((2, 0),),
    start_orients=(0,),
    horizon=25,
)
tensors = minigrid.build_tensors(spec)
model = minigrid.build_model(spec, tensors)
env = minigrid.MiniGridEnv(spec)
print(minigrid.render_frame(spec, (2, 0), 0, 0, 0, 0))
print("BFS solution length:",
      minigrid.shortest_solution(spec, (2, 0), 0, 0, 0))

for label, epi in (("kl", False), ("efe", True)):
    cfg = AgentConfig(horizon=25, vi_iterations=10, epistemic_enabled=epi,
                      compute_bfe_trace=False)
    env = minigrid.MiniGridEnv(spec)
    t0 = time.time()
    rec = run_episode(env, model, cfg, seed=0, agent=label)
    print(f"{label}: steps={rec.steps} success={rec.success} "
          f"reward={rec.total_reward:.3f} actions={rec.actions} "
          f"time={time.time()-t0:.1f}s")

# first-plan control posteriors for the KL agent
cfg = AgentConfig(horizon=25, vi_iterations=10, epistemic_enabled=False)
env = minigrid.MiniGridEnv(spec)
obs0 = env.reset(seed=0)
policy, _ = plan(model, ([], [env.observation_dict(obs0)]), cfg)
np.set_printoptions(precision=3, suppress=True)
for t in range(6):
    print(f"q(u_{t+1}) =", policy.controls[t])
