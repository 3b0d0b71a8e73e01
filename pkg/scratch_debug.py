import numpy as np
from epiplan import AgentConfig, plan
from epiplan.envs import grid
from epiplan.model import build_graph, filter_history

spec = grid.GridSpec(preference_sharpness=4.0)
model = grid.build_model(spec)
cfg = AgentConfig(horizon=12, vi_iterations=20, epistemic_enabled=False)

obs0 = spec.cell_index(spec.start)
policy, trace = plan(model, ([], [obs0]), cfg)
np.set_printoptions(precision=5, suppress=True)
print("KL q(u_1):", policy.controls[0])
print("KL q(u_2):", policy.controls[1])
print("KL q(u_6):", policy.controls[5])
print("BFE trace:", np.array(trace.bfe))

# inspect beliefs over x_t
belief = filter_history(model, [], [obs0])
built = build_graph(model, horizon=12, init_belief=belief.data,
                    include_obs=False, obs_directives=False)
g = built.graph
g.run(2)
for t in (0, 1, 6, 11, 12):
    b = g.edge_belief(built.dyn_edge("x", t))
    top = np.argsort(b)[-3:][::-1]
    print(f"b(x_{t}) top cells:", [(int(i), round(float(b[i]), 4)) for i in top])
print("q(u_1) from direct graph:", g.edge_belief(built.control_edge(1)))
