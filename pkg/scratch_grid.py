"""Scratch: gridworld agent behavior on the default instance."""
import time
import numpy as np

from epiplan import AgentConfig, plan, run_episode
from epiplan.envs import grid


def probe(beta, horizon=12, vi=20):
    spec = grid.GridSpec(preference_sharpness=beta, horizon=horizon)
    model = grid.build_model(spec)
    cfg_efe = AgentConfig(horizon=horizon, vi_iterations=vi, epistemic_enabled=True)
    cfg_kl = AgentConfig(horizon=horizon, vi_iterations=vi, epistemic_enabled=False)
    out = {}
    for label, cfg in (("efe", cfg_efe), ("kl", cfg_kl)):
        t0 = time.time()
        env = grid.GridEnv(spec)
        rec = run_episode(env, model, cfg, seed=0, agent=label)
        dt = time.time() - t0
        out[label] = (rec.actions, rec.success, rec.total_reward, dt)
    return spec, out


for beta in (1.0, 2.0, 4.0, 8.0):
    spec, out = probe(beta)
    print(f"beta={beta}")
    for label, (acts, succ, rew, dt) in out.items():
        names = {0: "U", 1: "D", 2: "L", 3: "R"}
        print(f"  {label}: {''.join(names[a] for a in acts)} success={succ} "
              f"reward={rew} time={dt:.2f}s")
