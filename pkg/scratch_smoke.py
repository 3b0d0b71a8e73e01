"""Scratch smoke checks (not part of the package)."""
import itertools
import numpy as np

from epiplan import (
    DiscreteTensor, FactorGraph, run_inference, bethe_free_energy,
    ModelSpec, StateFactor, TransitionModel, ObservationModel,
    build_graph, verify_decomposition,
)
from epiplan.graph import Marginals


def brute_force_marginals(factors):
    """Ground truth by full enumeration over all named variables."""
    cards = {}
    for _, t in factors:
        for n, c in t.axes:
            cards.setdefault(n, c)
    names = sorted(cards)
    joint = np.zeros([cards[n] for n in names])
    for assign in itertools.product(*[range(cards[n]) for n in names]):
        amap = dict(zip(names, assign))
        v = 1.0
        for _, t in factors:
            idx = tuple(amap[n] for n in t.names)
            v *= t.data[idx]
        joint[assign] = v
    Z = joint.sum()
    marg = {}
    for i, n in enumerate(names):
        axes = tuple(j for j in range(len(names)) if j != i)
        marg[n] = joint.sum(axis=axes) / Z
    return marg, Z


def random_tree_factors(rng, n_edges=6, max_card=4):
    cards = [int(rng.integers(2, max_card + 1)) for _ in range(n_edges)]
    names = [f"v{i}" for i in range(n_edges)]
    factors = []
    # random tree over variables: each var i>0 links to a previous var
    factors.append(("f0", DiscreteTensor([(names[0], cards[0])],
                                         rng.random(cards[0]) + 0.1)))
    for i in range(1, n_edges):
        j = int(rng.integers(0, i))
        table = rng.random((cards[i], cards[j])) + 0.1
        factors.append((f"f{i}", DiscreteTensor(
            [(names[i], cards[i]), (names[j], cards[j])], table)))
    return factors


rng = np.random.default_rng(0)
worst = 0.0
worst_z = 0.0
for trial in range(30):
    factors = random_tree_factors(rng)
    g = FactorGraph.from_factors(factors)
    m = run_inference(g, sweeps=1)
    ref, Z = brute_force_marginals(factors)
    for n, tv in ref.items():
        got = m.edge_marginals[n].data
        worst = max(worst, np.abs(got - tv).max())
    bfe = bethe_free_energy(g, m)
    bfe2 = g.bethe_from_messages()
    worst_z = max(worst_z, abs(bfe - (-np.log(Z))), abs(bfe2 - (-np.log(Z))))
print("tree marginals worst err:", worst)
print("tree BFE vs -logZ worst err:", worst_z)

# decomposition residual on tiny random models
def random_tiny_model(rng, n=2, ny=2, nu=2, T=2):
    init = rng.random(n) + 0.1
    init /= init.sum()
    B = rng.random((n, n, nu)) + 0.1
    B /= B.sum(axis=0, keepdims=True)
    A = rng.random((ny, n)) + 0.1
    A /= A.sum(axis=0, keepdims=True)
    pref = rng.random(n) + 0.1
    pref /= pref.sum()
    return ModelSpec(
        name="tiny", horizon=T, control_card=nu,
        factors=(StateFactor("x", n, init),),
        transitions=(TransitionModel("x", ("x",), B),),
        observations=(ObservationModel("y", ("x",), A),),
        preferences={"x": pref},
    )

worst_res = 0.0
for trial in range(20):
    model = random_tiny_model(rng, n=int(rng.integers(2, 4)),
                              ny=int(rng.integers(2, 4)),
                              T=int(rng.integers(1, 4)))
    built = build_graph(model)
    built.graph.run(2)
    m = built.graph.marginals()
    rep = verify_decomposition(model, m, built)
    worst_res = max(worst_res, rep.residual)
print("decomposition worst residual:", worst_res)
