"""Preference and epistemic prior tables computed from posteriors.

Control priors score each control value by the conditional-entropy
difference H[q(child, parents | u)] - H[q(parents | u)], which by the
chain rule is the expected transition entropy under that control. State
priors score each state value by the information the predicted
observations carry: the summed per-observation mutual information
between the observation symbol and the remaining state factors, given
the target value. For a single unfactored state this reduces to the
negative expected observation entropy. Scores go through a softmax, so
adding any constant changes nothing.

Both generic signed-term evaluation (EpistemicPriorSpec) and fast
closed-form paths (used by the planner at scale) live here; tests pin
their equality.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import StructuralError
from .graph import FactorGraph, Marginals
from .model import BuiltGraph, ModelSpec
from .tensor import (
    DiscreteTensor,
    conditional_entropy,
    marginal,
    softmax,
)


@dataclass(frozen=True)
class EpistemicTerm:
    node_joint_source: str
    entropy_sign: float
    subset_axes: frozenset[str]
    conditioning_axis: str


@dataclass(frozen=True)
class EpistemicPriorSpec:
    target_edge: str
    kind: str  # "control" | "state"
    terms: tuple[EpistemicTerm, ...]


def entropy_difference_score(joint: DiscreteTensor, subset_axes,
                             cond: str) -> DiscreteTensor:
    """H[q(everything-else | cond)] - H[q(subset | cond)], per cond value.

    By the chain rule this equals the expected conditional entropy of the
    axes outside `subset`, so every entry is >= 0 (up to rounding).
    """
    subset = set(subset_axes)
    if cond not in joint.names:
        raise StructuralError(f"conditioning axis {cond!r} not in joint")
    if cond in subset:
        raise StructuralError("conditioning axis cannot be in subset_axes")
    if not subset <= set(joint.names):
        raise StructuralError("subset_axes must be axes of the joint")
    h_all = conditional_entropy(joint, given={cond})
    if not subset:
        return h_all
    sub_joint = marginal(joint, subset | {cond})
    h_sub = conditional_entropy(sub_joint, given={cond})
    return DiscreteTensor(h_all.axes, h_all.data - h_sub.data, validate=False)


def control_epistemic_prior(node_joint_q: DiscreteTensor, control_axis: str,
                            child_axis: str) -> DiscreteTensor:
    """Softmax of the transition-entropy score over the control axis."""
    subset = set(node_joint_q.names) - {control_axis, child_axis}
    score = entropy_difference_score(node_joint_q, subset, control_axis)
    return softmax(score)


def state_epistemic_prior(obs_conditional: DiscreteTensor, state_axis: str,
                          obs_axis: str) -> DiscreteTensor:
    """Softmax over states of the negative per-state observation entropy.

    `obs_conditional` is q(y | x): normalized over the observation axis
    for every state value.
    """
    if set(obs_conditional.names) != {state_axis, obs_axis}:
        raise StructuralError("obs_conditional must have exactly (obs, state) axes")
    s_pos = obs_conditional.names.index(state_axis)
    mat = np.moveaxis(obs_conditional.data, s_pos, 0)
    h = kernels.row_entropies(np.ascontiguousarray(mat))
    card = obs_conditional.card(state_axis)
    return softmax(DiscreteTensor([(state_axis, card)], -h, validate=False))


def factored_epistemic_prior(spec: EpistemicPriorSpec, m: Marginals,
                             score_scale: float = 1.0) -> DiscreteTensor:
    """Sum the signed entropy-difference terms of `spec`, then softmax."""
    total: np.ndarray | None = None
    axes = None
    for term in spec.terms:
        joint = m.node_joints.get(term.node_joint_source)
        if joint is None:
            raise StructuralError(
                f"marginals carry no node joint {term.node_joint_source!r}"
            )
        score = entropy_difference_score(joint, term.subset_axes,
                                         term.conditioning_axis)
        if total is None:
            total = term.entropy_sign * score.data
            axes = score.axes
        else:
            total = total + term.entropy_sign * score.data
    if total is None:
        raise StructuralError("epistemic prior spec has no terms")
    return softmax(DiscreteTensor(axes, score_scale * total, validate=False))


def observation_info_terms(built: BuiltGraph, target_factor: str,
                           t: int | None) -> tuple[EpistemicTerm, ...]:
    """Signed terms for the per-cell view-information state score.

    Each observation node contributes the pair

        + (H[q(y, dyn | target)] - H[q(dyn | target)])
        - (H[q(y, dyn, statics | target)] - H[q(dyn, statics | target)])

    where dyn are the other non-static state axes at that timestep. The
    second pair is the expected view entropy given the full state (zero
    for deterministic observations); the first marginalizes the static
    unknowns into the view prediction, so the sum is the conditional
    mutual information between the view and the statics given the pose.
    """
    model = built.model
    static = {f.name for f in model.static_factors}
    terms: list[EpistemicTerm] = []
    times = [t] if t is not None else list(range(1, built.horizon + 1))
    for tt in times:
        for o in model.observations:
            if target_factor not in o.parents:
                continue
            nid = built.obs_node(o.name, tt)
            y_axis = built.y_edge(o.name, tt)
            node = built.graph.nodes[nid]
            cond = built.state_edge(target_factor, tt)
            rest = frozenset(e for e in node.edge_ids if e not in (cond, y_axis))
            rest_dyn = frozenset(e for e in rest if e not in static)
            rest_y = rest_dyn | {y_axis}
            full_y = rest | {y_axis}
            terms.append(EpistemicTerm(nid, +1.0, rest_dyn, cond))
            terms.append(EpistemicTerm(nid, -1.0, rest_y, cond))
            terms.append(EpistemicTerm(nid, -1.0, rest, cond))
            terms.append(EpistemicTerm(nid, +1.0, full_y, cond))
    return tuple(terms)


def control_prior_terms(built: BuiltGraph, t: int) -> tuple[EpistemicTerm, ...]:
    """One transition-entropy term per dynamic factor's transition node."""
    terms = []
    for tr in built.model.transitions:
        nid = built.trans_node(tr.child, t)
        node = built.graph.nodes[nid]
        child_edge = node.edge_ids[0]
        u_edge = built.control_edge(t)
        subset = frozenset(e for e in node.edge_ids if e not in (child_edge, u_edge))
        terms.append(EpistemicTerm(nid, +1.0, subset, u_edge))
    return tuple(terms)


def preference_prior(goal: DiscreteTensor, floor: float = 1e-4) -> DiscreteTensor:
    """Terminal preference table with zero entries floored at `floor`."""
    data = goal.data.ravel()
    if data.sum() <= 0.0:
        raise StructuralError("preference goal must have positive mass")
    floored = np.where(data > 0.0, data, floor)
    return DiscreteTensor(goal.axes, floored / floored.sum(), validate=False)


# ---------------------------------------------------------------------------
# planner-facing score computation (raw arrays, closed forms)
# ---------------------------------------------------------------------------


def control_scores_from_graph(graph: FactorGraph, built: BuiltGraph,
                              t: int) -> np.ndarray:
    """Summed transition-entropy scores for the controls at step t.

    Deterministic transition nodes contribute exactly zero (their
    posterior child-conditionals are one-hot), so they are skipped.
    """
    model = built.model
    total = np.zeros(model.control_card)
    for tr in model.transitions:
        nid = built.trans_node(tr.child, t)
        node = graph.nodes[nid]
        if node.det_succ is not None:
            continue
        jraw = graph.node_joint_raw(nid)
        u_card = model.control_card
        child_card = node.table.shape[0]
        mat = jraw.reshape(-1, u_card)  # rows: (child, parents); cols: u
        h_all = kernels.row_entropies(np.ascontiguousarray(mat.T))
        parents_mat = jraw.reshape(child_card, -1, u_card).sum(axis=0)
        h_par = kernels.row_entropies(np.ascontiguousarray(parents_mat.T))
        total += h_all - h_par
    return total


class StaticInfoEntropies:
    """Per-iteration mixture entropies over the static unknowns.

    `h_all[cell, z]` is the entropy of the predicted view symbol at a FOV
    cell for dynamic pose z, mixing over all static factors under their
    current beliefs. `h_given[f][v, cell, z]` conditions static factor f
    on value v (mixing only over the others). Zero everywhere once the
    static beliefs are one-hot.
    """

    def __init__(self, pack, static_beliefs: dict[str, np.ndarray]):
        self.pack = pack
        n_rows = pack.n_cells * pack.n_dyn
        w_all = static_beliefs[pack.static_names[0]]
        for name in pack.static_names[1:]:
            w_all = np.multiply.outer(w_all, static_beliefs[name])
        acc = np.zeros(n_rows * pack.n_sym)
        kernels.scatter_acc(pack.comb_all, np.ascontiguousarray(w_all.ravel()), acc)
        self.h_all = kernels.row_entropies(
            acc.reshape(n_rows, pack.n_sym)
        ).reshape(pack.n_cells, pack.n_dyn)
        self.h_given: dict[str, np.ndarray] = {}
        for i, fname in enumerate(pack.static_names):
            others = [
                static_beliefs[n] for j, n in enumerate(pack.static_names) if j != i
            ]
            if others:
                w = others[0]
                for v in others[1:]:
                    w = np.multiply.outer(w, v)
                w = np.ascontiguousarray(w.ravel())
            else:
                w = np.ones(1)
            card = pack.static_cards[i]
            per_v = np.empty((card, pack.n_cells, pack.n_dyn))
            for v in range(card):
                acc = np.zeros(n_rows * pack.n_sym)
                kernels.scatter_acc(pack.comb_per_static[fname][v], w, acc)
                per_v[v] = kernels.row_entropies(
                    acc.reshape(n_rows, pack.n_sym)
                ).reshape(pack.n_cells, pack.n_dyn)
            self.h_given[fname] = per_v


def state_info_scores(pack, dyn_beliefs: dict[str, np.ndarray],
                      entropies: StaticInfoEntropies) -> dict[str, np.ndarray]:
    """Expected view-information scores for one timestep's beliefs.

    For a dynamic target f: score(v) = sum over cells of the expected
    (over the other dynamic beliefs) mixture entropy h_all with f fixed
    at v. For a static target: same with h_given and the full dynamic
    expectation. Deterministic per-state views make these exactly the
    conditional mutual informations MI(view ; statics | pose).
    """
    dyn_vecs = [dyn_beliefs[n] for n in pack.dyn_names]
    h_all = entropies.h_all.reshape(pack.n_cells, *pack.dyn_cards)
    scores: dict[str, np.ndarray] = {}
    n_dyn_axes = len(pack.dyn_names)
    for i, fname in enumerate(pack.dyn_names):
        operands = [h_all, list(range(n_dyn_axes + 1))]
        for j, vec in enumerate(dyn_vecs):
            if j != i:
                operands += [vec, [j + 1]]
        scores[fname] = np.einsum(*operands, [i + 1], optimize=True)
    w_dyn = dyn_vecs[0]
    for vec in dyn_vecs[1:]:
        w_dyn = np.multiply.outer(w_dyn, vec)
    w_dyn = w_dyn.ravel()
    for fname in pack.static_names:
        scores[fname] = np.einsum(
            "vcz,z->v", entropies.h_given[fname], w_dyn, optimize=True
        )
    return scores
