"""Brute-force reference computations for tiny single-factor models.

Everything here enumerates full joints: exact policy cost per action
sequence, exact variational free energy of an assembled posterior, and
the numeric certification that the free energy with installed epistemic
priors splits into expected policy cost + complexity + the softmax
log-normalizer constants. Guards refuse instances beyond desk scale.

Deliberately built only on the tensor layer (plus the Marginals value
type), so disagreements with the message-passing engine localize bugs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .epistemic import entropy_difference_score
from .errors import EnumerationGuardError, ModelValidationError
from .graph import Marginals
from .model import BuiltGraph, ModelSpec
from .tensor import (
    DiscreteTensor,
    contract,
    log_sum_exp,
    softmax_scores,
)

MAX_SEQUENCES = 4 ** 6
MAX_JOINT_ENTRIES = 2_000_000


def _single_factor(model: ModelSpec):
    if len(model.factors) != 1 or not model.factors[0].dynamic:
        raise EnumerationGuardError(
            "oracle supports single-dynamic-factor models only"
        )
    if len(model.observations) != 1:
        raise EnumerationGuardError("oracle supports a single observation stream")
    return model.factors[0], model.transitions[0], model.observations[0]


def _guard(model: ModelSpec) -> None:
    f, _, obs = _single_factor(model)
    T = model.horizon
    n, ny, nu = f.cardinality, obs.table.shape[0], model.control_card
    if nu ** T > MAX_SEQUENCES:
        raise EnumerationGuardError(f"{nu}^{T} action sequences exceed the guard")
    if (n ** (T + 1)) * (ny ** T) * (nu ** T) > MAX_JOINT_ENTRIES:
        raise EnumerationGuardError("full joint exceeds the enumeration guard")


def _axes(model: ModelSpec):
    f, _, obs = _single_factor(model)
    T = model.horizon
    x = [f"x{t}" for t in range(T + 1)]
    u = [f"u{t}" for t in range(1, T + 1)]
    y = [f"y{t}" for t in range(1, T + 1)]
    return x, u, y, f.cardinality, model.control_card, obs.table.shape[0]


def _pref_tables(model: ModelSpec, preference) -> dict[int, np.ndarray]:
    f = model.factors[0]
    if preference is None:
        table = model.preferences.get(f.name)
        if table is None:
            raise ModelValidationError("model has no terminal preference")
        return {model.horizon: np.asarray(table, dtype=np.float64)}
    if isinstance(preference, dict):
        return {int(t): np.asarray(v, dtype=np.float64) for t, v in preference.items()}
    return {model.horizon: np.asarray(preference, dtype=np.float64)}


def _obs_entropies(obs_table: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(obs_table > 0.0, obs_table * np.log(obs_table), 0.0)
    return -plogp.sum(axis=0)


@dataclass
class ExactPolicyEvaluation:
    """G values for every action sequence, as a tensor over control axes."""

    g_table: DiscreteTensor
    risk: DiscreteTensor
    ambiguity: DiscreteTensor

    def g_of(self, u_sequence) -> float:
        names = self.g_table.names
        idx = {f"u{t + 1}": int(a) for t, a in enumerate(u_sequence)}
        sel = tuple(idx[n] for n in names)
        return float(self.g_table.data[sel])


def _policy_costs(model: ModelSpec, x0: np.ndarray, conds: list[np.ndarray],
                  pref: dict[int, np.ndarray],
                  obs_entropies: list[np.ndarray] | None = None) -> ExactPolicyEvaluation:
    """Exact G(u) from chain conditionals: risk against the preference
    tables plus expected observation entropy (evaluated by enumeration)."""
    x, u, _, n, nu, _ = _axes(model)
    _, _, obs = _single_factor(model)
    T = model.horizon
    factors = [DiscreteTensor([(x[0], n)], x0)]
    for t in range(1, T + 1):
        factors.append(
            DiscreteTensor([(x[t], n), (x[t - 1], n), (u[t - 1], nu)], conds[t - 1])
        )
    keep = x + u
    qxu = contract(factors, keep)  # q(x_{0:T} | u), proper per u-assignment
    names = qxu.names
    arr = qxu.data
    logq = np.where(arr > 0.0, np.log(np.where(arr > 0.0, arr, 1.0)), 0.0)
    log_pref = np.zeros_like(arr)
    for t, table in pref.items():
        axis = names.index(x[t])
        shape = [1] * arr.ndim
        shape[axis] = n
        with np.errstate(divide="ignore"):
            lp = np.log(table)
        log_pref = log_pref + lp.reshape(shape)
    amb = np.zeros_like(arr)
    if obs_entropies is None:
        obs_entropies = [_obs_entropies(obs.table)] * T
    for t in range(1, T + 1):
        axis = names.index(x[t])
        shape = [1] * arr.ndim
        shape[axis] = n
        amb = amb + obs_entropies[t - 1].reshape(shape)
    with np.errstate(invalid="ignore"):
        risk_arr = np.where(arr > 0.0, arr * (logq - log_pref), 0.0)
    risk_int = DiscreteTensor(qxu.axes, risk_arr, validate=False)
    amb_int = DiscreteTensor(qxu.axes, arr * amb, validate=False)
    risk = contract([risk_int], u)
    ambiguity = contract([amb_int], u)
    g = DiscreteTensor(risk.axes, risk.data + ambiguity.data, validate=False)
    return ExactPolicyEvaluation(g_table=g, risk=risk, ambiguity=ambiguity)


def exact_efe(model: ModelSpec, preference=None, u_sequence=None):
    """Expected free energy of action sequences under the model predictive.

    With `u_sequence` given, returns that sequence's G; otherwise returns
    the full ExactPolicyEvaluation table.
    """
    _guard(model)
    f, trans, _ = _single_factor(model)
    pref = _pref_tables(model, preference)
    conds = [trans.table for _ in range(model.horizon)]
    ev = _policy_costs(model, np.asarray(f.init, dtype=np.float64), conds, pref)
    if u_sequence is None:
        return ev
    return ev.g_of(u_sequence)


# ---------------------------------------------------------------------------
# assembled posteriors
# ---------------------------------------------------------------------------


@dataclass
class AssembledPosterior:
    """Chain posterior pieces extracted from Bethe marginals."""

    x0: np.ndarray
    conds: list[np.ndarray]  # per t: q(x_t | x_{t-1}, u_t), axes (x_t, x_{t-1}, u)
    qu: list[np.ndarray]
    obs_conds: list[np.ndarray]  # per t: q(y_t | x_t), axes (y, x)


def assemble_posterior(model: ModelSpec, m: Marginals,
                       built: BuiltGraph) -> AssembledPosterior:
    f, trans, obs = _single_factor(model)
    n, nu = f.cardinality, model.control_card
    T = built.horizon
    x0 = m.edge_marginals[built.dyn_edge(f.name, 0)].data.copy()
    conds = []
    qu = []
    obs_conds = []
    for t in range(1, T + 1):
        joint = m.node_joints[built.trans_node(f.name, t)]
        # axes arrive sorted by edge id; rebuild (child, parent, control) order
        child, parent = built.dyn_edge(f.name, t), built.dyn_edge(f.name, t - 1)
        ctrl = built.control_edge(t)
        perm = [joint.names.index(e) for e in (child, parent, ctrl)]
        arr = np.transpose(joint.data, perm).copy()
        cols = arr.sum(axis=0, keepdims=True)
        safe = np.where(cols > 0.0, cols, 1.0)
        cond = np.where(cols > 0.0, arr / safe, 1.0 / n)
        conds.append(cond)
        qu.append(m.edge_marginals[ctrl].data.copy())
        y_edge = built.y_edge(obs.name, t)
        ye = built.graph.edges[y_edge]
        if ye.observed_value is not None:
            oc = np.zeros((obs.table.shape[0], n))
            oc[ye.observed_value, :] = 1.0
            obs_conds.append(oc)
        else:
            obs_conds.append(obs.table.copy())
    return AssembledPosterior(x0=x0, conds=conds, qu=qu, obs_conds=obs_conds)


def _full_joint_factors(model: ModelSpec, post: AssembledPosterior):
    x, u, y, n, nu, ny = _axes(model)
    T = model.horizon
    q_factors = [DiscreteTensor([(x[0], n)], post.x0)]
    for t in range(1, T + 1):
        q_factors.append(
            DiscreteTensor([(x[t], n), (x[t - 1], n), (u[t - 1], nu)],
                           post.conds[t - 1])
        )
        q_factors.append(DiscreteTensor([(u[t - 1], nu)], post.qu[t - 1]))
        q_factors.append(
            DiscreteTensor([(y[t - 1], ny), (x[t], n)], post.obs_conds[t - 1])
        )
    return q_factors


def _model_factors(model: ModelSpec, observations=None):
    x, u, y, n, nu, ny = _axes(model)
    f, trans, obs = _single_factor(model)
    T = model.horizon
    cp = (
        model.control_prior
        if model.control_prior is not None
        else np.full(nu, 1.0 / nu)
    )
    p_factors = [DiscreteTensor([(x[0], n)], np.asarray(f.init))]
    for t in range(1, T + 1):
        p_factors.append(
            DiscreteTensor([(x[t], n), (x[t - 1], n), (u[t - 1], nu)], trans.table)
        )
        p_factors.append(DiscreteTensor([(u[t - 1], nu)], cp))
        p_factors.append(DiscreteTensor([(y[t - 1], ny), (x[t], n)], obs.table))
    return p_factors


def exact_vfe(model: ModelSpec, m: Marginals, built: BuiltGraph,
              preference=None, epistemic=None) -> float:
    """E_q[log q - log(p * preference * epistemic)] by full enumeration.

    `epistemic`, if given, is (control_tables, state_tables): lists of
    per-timestep prior vectors. Omitted priors count as constant 1.
    """
    _guard(model)
    post = assemble_posterior(model, m, built)
    return _vfe_value(model, post, _pref_tables(model, preference), epistemic)


def _vfe_value(model: ModelSpec, post: AssembledPosterior,
               pref: dict[int, np.ndarray], epistemic) -> float:
    x, u, y, n, nu, ny = _axes(model)
    keep = x + u + y
    q = contract(_full_joint_factors(model, post), keep)
    p = contract(_model_factors(model), keep)
    arr_q, arr_p = q.data, p.data
    names = q.names
    log_extra = np.zeros_like(arr_q)
    for t, table in pref.items():
        axis = names.index(x[t])
        shape = [1] * arr_q.ndim
        shape[axis] = n
        with np.errstate(divide="ignore"):
            log_extra = log_extra + np.log(table).reshape(shape)
    if epistemic is not None:
        control_tables, state_tables = epistemic
        for t in range(1, model.horizon + 1):
            shape = [1] * arr_q.ndim
            shape[names.index(u[t - 1])] = nu
            log_extra = log_extra + np.log(control_tables[t - 1]).reshape(shape)
            shape = [1] * arr_q.ndim
            shape[names.index(x[t])] = n
            log_extra = log_extra + np.log(state_tables[t - 1]).reshape(shape)
    mask = arr_q > 0.0
    if np.any(arr_p[mask] <= 0.0):
        return math.inf
    qm = arr_q[mask]
    return float(
        (qm * (np.log(qm) - np.log(arr_p[mask]) - log_extra[mask])).sum()
    )


@dataclass
class DecompositionReport:
    f_value: float
    expected_policy_cost: float
    complexity: float
    c_x: list[float] = field(default_factory=list)
    c_y: list[float] = field(default_factory=list)
    h0: float = 0.0

    @property
    def constant(self) -> float:
        return sum(self.c_x) + sum(self.c_y) + self.h0

    @property
    def residual(self) -> float:
        return abs(
            self.f_value - self.expected_policy_cost - self.complexity - self.constant
        )


def verify_decomposition(model: ModelSpec, m: Marginals, built: BuiltGraph,
                         preference=None) -> DecompositionReport:
    """Numerically certify F = E_q[G] + complexity + constants.

    The epistemic priors are recomputed here from the assembled posterior
    q itself (the self-consistent reading), installed into F, and their
    softmax log-normalizers plus the initial-state entropy form the
    constant.
    """
    _guard(model)
    x, u, y, n, nu, ny = _axes(model)
    f, _, obs = _single_factor(model)
    T = model.horizon
    post = assemble_posterior(model, m, built)
    pref = _pref_tables(model, preference)

    # assembled per-step state marginals q(x_t)
    margs = [post.x0]
    for t in range(T):
        step = np.einsum("ijk,j,k->i", post.conds[t], margs[-1], post.qu[t])
        margs.append(step)

    control_tables, c_x = [], []
    for t in range(1, T + 1):
        pair = post.conds[t - 1] * margs[t - 1][None, :, None] / nu
        joint = DiscreteTensor(
            [(x[t], n), (x[t - 1], n), (u[t - 1], nu)], pair, validate=False
        )
        score = entropy_difference_score(joint, {x[t - 1]}, u[t - 1])
        control_tables.append(softmax_scores(score.data))
        c_x.append(log_sum_exp(score.data))

    state_tables, c_y = [], []
    for t in range(1, T + 1):
        score = -_obs_entropies(post.obs_conds[t - 1])
        state_tables.append(softmax_scores(score))
        c_y.append(log_sum_exp(score))

    f_value = _vfe_value(model, post, pref, (control_tables, state_tables))
    complexity = _vfe_value(model, post, {}, None)

    ev = _policy_costs(
        model, post.x0, post.conds, pref,
        obs_entropies=[_obs_entropies(oc) for oc in post.obs_conds],
    )
    g_arr = ev.g_table.data
    # expectation over q(u): weight each sequence by the product of q(u_t)
    weights = post.qu[0]
    for t in range(1, T):
        weights = np.multiply.outer(weights, post.qu[t])
    # g_table axes are sorted u1..uT which matches outer-product order
    expected_g = float((weights * g_arr).sum())

    h0 = float(
        -(post.x0[post.x0 > 0.0] * np.log(post.x0[post.x0 > 0.0])).sum()
    )
    return DecompositionReport(
        f_value=f_value,
        expected_policy_cost=expected_g,
        complexity=complexity,
        c_x=c_x,
        c_y=c_y,
        h0=h0,
    )
