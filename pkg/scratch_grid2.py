import numpy as np
from epiplan import AgentConfig, run_episode
from epiplan.envs import grid

names = {0: "U", 1: "D", 2: "L", 3: "R"}


def probe(beta, slip_noise, vi=20):
    spec = grid.GridSpec(preference_sharpness=beta, slip_obs_noise=slip_noise)
    model = grid.build_model(spec)
    row = []
    for label, epi in (("efe", True), ("kl", False)):
        cfg = AgentConfig(horizon=12, vi_iterations=vi, epistemic_enabled=epi,
                          compute_bfe_trace=False)
        env = grid.GridEnv(spec)
        rec = run_episode(env, model, cfg, seed=1, agent=label)
        row.append(f"{label}:{''.join(names[a] for a in rec.actions)}"
                   f"({'Y' if rec.success else 'n'},{rec.total_reward:+.0f})")
    return "  ".join(row)


for beta in (6.0, 8.0, 10.0, 12.0):
    for sn in (0.5, 0.7, 0.9):
        print(f"beta={beta:4} slip_noise={sn}: {probe(beta, sn)}")
