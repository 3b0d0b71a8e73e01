"""Declarative factorized state-space models and their factor graphs.

A ModelSpec describes a controlled Markov model over named state factors:
per-factor initial priors, per-factor transition CPTs (conditioned on
parent factors and the shared control), observation CPTs, and terminal
preference tables. Factors may be static (no transition; one shared edge
across the horizon, like a fixed object location).

build_graph unrolls the spec into a chain-structured factor graph with
attachment nodes for preference priors and epistemic priors on every
future timestep; the planner installs concrete tables into those nodes.

filter_history maintains the exact joint posterior over all state
factors given an action/observation history; replanning roots the next
graph in that belief.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InconsistentEvidenceError, ModelValidationError
from .graph import FactorGraph
from .tensor import DiscreteTensor, contract

_CPT_TOL = 1e-9


@dataclass(frozen=True)
class StateFactor:
    name: str
    cardinality: int
    init: np.ndarray
    dynamic: bool = True


@dataclass(frozen=True)
class TransitionModel:
    child: str
    parents: tuple[str, ...]  # state factors; dynamic ones are read at t-1
    table: np.ndarray  # axes (child', *parents, control)


@dataclass(frozen=True)
class ObservationModel:
    name: str
    parents: tuple[str, ...]  # state factors read at time t
    table: np.ndarray  # axes (obs, *parents)


@dataclass(frozen=True)
class ObsInfoPack:
    """Per-cell observation symbols split into dynamic pose and static axes.

    `sym` holds the deterministic symbol for every (cell, dynamic state,
    static state). The scatter tables turn one weighted pass into the
    per-cell predicted-view mixtures over the static unknowns, from which
    the epistemic state scores are conditional mutual informations
    MI(view ; statics | pose): they vanish exactly once the statics are
    known, so exploration switches itself off.
    """

    dyn_names: tuple[str, ...]
    dyn_cards: tuple[int, ...]
    static_names: tuple[str, ...]
    static_cards: tuple[int, ...]
    n_sym: int
    sym: np.ndarray  # (n_cells, n_dyn, n_static) int32
    comb_all: np.ndarray  # (n_cells * n_dyn, n_static) int32 scatter indices
    comb_per_static: dict[str, np.ndarray] = field(default_factory=dict)
    # comb_per_static[f]: (card_f, n_cells * n_dyn, n_other_static)

    @property
    def n_cells(self) -> int:
        return self.sym.shape[0]

    @property
    def n_dyn(self) -> int:
        return self.sym.shape[1]


@dataclass(frozen=True)
class ModelSpec:
    name: str
    horizon: int
    control_card: int
    factors: tuple[StateFactor, ...]
    transitions: tuple[TransitionModel, ...]
    observations: tuple[ObservationModel, ...]
    preferences: dict[str, np.ndarray] = field(default_factory=dict)
    control_prior: np.ndarray | None = None
    # optional epistemic-score inputs (see epistemic module)
    obs_entropy_scores: dict[str, np.ndarray] = field(default_factory=dict)
    obs_info_pack: ObsInfoPack | None = None

    def factor(self, name: str) -> StateFactor:
        for f in self.factors:
            if f.name == name:
                return f
        raise ModelValidationError(f"unknown state factor {name!r}")

    @property
    def dynamic_factors(self) -> tuple[StateFactor, ...]:
        return tuple(f for f in self.factors if f.dynamic)

    @property
    def static_factors(self) -> tuple[StateFactor, ...]:
        return tuple(f for f in self.factors if not f.dynamic)

    def transition_for(self, child: str) -> TransitionModel:
        for tr in self.transitions:
            if tr.child == child:
                return tr
        raise ModelValidationError(f"no transition for factor {child!r}")

    def validate(self) -> None:
        if self.horizon < 1:
            raise ModelValidationError("horizon must be >= 1")
        if self.control_card < 1:
            raise ModelValidationError("control cardinality must be >= 1")
        names = [f.name for f in self.factors]
        if len(set(names)) != len(names):
            raise ModelValidationError(f"duplicate factor names {names}")
        for f in self.factors:
            init = np.asarray(f.init)
            if init.shape != (f.cardinality,):
                raise ModelValidationError(f"init for {f.name!r} has wrong shape")
            if abs(init.sum() - 1.0) > _CPT_TOL or np.any(init < 0):
                raise ModelValidationError(f"init for {f.name!r} is not a distribution")
        dyn = {f.name for f in self.dynamic_factors}
        children = [tr.child for tr in self.transitions]
        if set(children) != dyn or len(children) != len(dyn):
            raise ModelValidationError(
                "transitions must cover each dynamic factor exactly once"
            )
        for tr in self.transitions:
            cards = [self.factor(tr.child).cardinality]
            cards += [self.factor(p).cardinality for p in tr.parents]
            cards.append(self.control_card)
            if tr.table.shape != tuple(cards):
                raise ModelValidationError(
                    f"transition table for {tr.child!r} has shape {tr.table.shape}, "
                    f"expected {tuple(cards)}"
                )
            sums = tr.table.sum(axis=0)
            if not np.allclose(sums, 1.0, atol=_CPT_TOL):
                raise ModelValidationError(
                    f"transition CPT for {tr.child!r} is not normalized over its child"
                )
        obs_names = [o.name for o in self.observations]
        if len(set(obs_names)) != len(obs_names):
            raise ModelValidationError("duplicate observation names")
        for o in self.observations:
            cards = [o.table.shape[0]] + [self.factor(p).cardinality for p in o.parents]
            if o.table.shape != tuple(cards):
                raise ModelValidationError(
                    f"observation table {o.name!r} has shape {o.table.shape}, "
                    f"expected {tuple(cards)}"
                )
            if not np.allclose(o.table.sum(axis=0), 1.0, atol=_CPT_TOL):
                raise ModelValidationError(
                    f"observation CPT {o.name!r} is not normalized over its symbol axis"
                )
        for fname, table in self.preferences.items():
            f = self.factor(fname)
            if not f.dynamic:
                raise ModelValidationError("preferences attach to dynamic factors")
            if np.asarray(table).shape != (f.cardinality,):
                raise ModelValidationError(f"preference for {fname!r} has wrong shape")
        if self.control_prior is not None and self.control_prior.shape != (
            self.control_card,
        ):
            raise ModelValidationError("control prior has wrong shape")


# ---------------------------------------------------------------------------
# graph construction
# ---------------------------------------------------------------------------


@dataclass
class BuiltGraph:
    graph: FactorGraph
    model: ModelSpec
    horizon: int

    def dyn_edge(self, factor: str, t: int) -> str:
        return f"{factor}_{t:02d}"

    def static_edge(self, factor: str) -> str:
        return factor

    def state_edge(self, factor: str, t: int) -> str:
        f = self.model.factor(factor)
        return self.dyn_edge(factor, t) if f.dynamic else factor

    def control_edge(self, t: int) -> str:
        return f"u_{t:02d}"

    def y_edge(self, obs_name: str, t: int) -> str:
        return f"{obs_name}_{t:02d}"

    def trans_node(self, child: str, t: int) -> str:
        return f"trans_{child}_{t:02d}"

    def obs_node(self, obs_name: str, t: int) -> str:
        return f"obs_{obs_name}_{t:02d}"

    def control_prior_node(self, t: int) -> str:
        return f"cprior_{t:02d}"

    def epi_control_node(self, t: int) -> str:
        return f"epi_u_{t:02d}"

    def epi_state_node(self, factor: str, t: int | None = None) -> str:
        if t is None:
            return f"epi_{factor}"
        return f"epi_{factor}_{t:02d}"

    def pref_node(self, factor: str, t: int) -> str:
        return f"pref_{factor}_{t:02d}"


def build_graph(
    model: ModelSpec,
    horizon: int | None = None,
    init_belief: np.ndarray | None = None,
    include_epistemic: bool = True,
    include_obs: bool = True,
    obs_directives: bool = True,
    static_backward: bool = True,
) -> BuiltGraph:
    """Unroll a validated model into a scheduled factor graph.

    With `init_belief` (a joint table over all factors, in model factor
    order) the initial slice is a single correlated prior node; otherwise
    each factor gets its independent init prior. Preference and epistemic
    attachment nodes are created uniform on every future timestep; the
    terminal preference tables from the model are installed at t=horizon.
    """
    model.validate()
    T = model.horizon if horizon is None else int(horizon)
    if T < 1:
        raise ModelValidationError("graph horizon must be >= 1")
    g = FactorGraph()
    bg = BuiltGraph(graph=g, model=model, horizon=T)

    for f in model.dynamic_factors:
        for t in range(T + 1):
            g.add_edge(bg.dyn_edge(f.name, t), f.cardinality)
    for f in model.static_factors:
        g.add_edge(f.name, f.cardinality)
    for t in range(1, T + 1):
        g.add_edge(bg.control_edge(t), model.control_card)
        if include_obs:
            for o in model.observations:
                g.add_edge(bg.y_edge(o.name, t), o.table.shape[0])

    init_edges = [bg.state_edge(f.name, 0) for f in model.factors]
    if init_belief is not None:
        cards = tuple(f.cardinality for f in model.factors)
        belief = np.asarray(init_belief, dtype=np.float64).reshape(cards)
        g.add_node("init", "prior", init_edges, belief)
    else:
        for f in model.factors:
            g.add_node(f"prior_{f.name}", "prior",
                       [bg.state_edge(f.name, 0)], np.asarray(f.init))

    control_prior = (
        model.control_prior
        if model.control_prior is not None
        else np.full(model.control_card, 1.0 / model.control_card)
    )
    for t in range(1, T + 1):
        for tr in model.transitions:
            edge_ids = [bg.dyn_edge(tr.child, t)]
            for p in tr.parents:
                pf = model.factor(p)
                edge_ids.append(bg.dyn_edge(p, t - 1) if pf.dynamic else p)
            edge_ids.append(bg.control_edge(t))
            g.add_node(bg.trans_node(tr.child, t), "cpt", edge_ids, tr.table,
                       child_edge=edge_ids[0])
        if include_obs:
            for o in model.observations:
                edge_ids = [bg.y_edge(o.name, t)]
                edge_ids += [bg.state_edge(p, t) for p in o.parents]
                g.add_node(bg.obs_node(o.name, t), "cpt", edge_ids, o.table,
                           child_edge=edge_ids[0])
        g.add_node(bg.control_prior_node(t), "prior",
                   [bg.control_edge(t)], control_prior)
        if include_epistemic:
            g.add_node(bg.epi_control_node(t), "epistemic_prior",
                       [bg.control_edge(t)],
                       np.full(model.control_card, 1.0 / model.control_card))
            for f in model.dynamic_factors:
                g.add_node(bg.epi_state_node(f.name, t), "epistemic_prior",
                           [bg.dyn_edge(f.name, t)],
                           np.full(f.cardinality, 1.0 / f.cardinality))
        for fname, pref in model.preferences.items():
            card = model.factor(fname).cardinality
            table = np.asarray(pref) if t == T else np.full(card, 1.0 / card)
            g.add_node(bg.pref_node(fname, t), "preference_prior",
                       [bg.dyn_edge(fname, t)], table)
    if include_epistemic:
        for f in model.static_factors:
            g.add_node(bg.epi_state_node(f.name), "epistemic_prior",
                       [f.name], np.full(f.cardinality, 1.0 / f.cardinality))

    g.schedule = _model_schedule(bg, obs_directives and include_obs, static_backward)
    return bg


def _model_schedule(bg: BuiltGraph, obs_directives: bool,
                    static_backward: bool = True) -> list[tuple[str, str]]:
    """With static_backward off, transition nodes never message the shared
    static edges: a horizon of tied transitions would otherwise multiply
    near-duplicate backward evidence into them (loopy overcounting)."""
    model, g, T = bg.model, bg.graph, bg.horizon
    static_edges = {f.name for f in model.static_factors}
    sched: list[tuple[str, str]] = []
    init_directives = []
    if "init" in g.nodes and g.nodes["init"].degree > 1:
        init_directives = [("init", eid) for eid in g.nodes["init"].edge_ids]
    sched += init_directives
    for t in range(1, T + 1):
        for tr in model.transitions:
            nid = bg.trans_node(tr.child, t)
            sched.append((nid, g.nodes[nid].edge_ids[0]))
        if obs_directives:
            for o in model.observations:
                nid = bg.obs_node(o.name, t)
                for eid in g.nodes[nid].edge_ids:
                    sched.append((nid, eid))
    for t in range(T, 0, -1):
        for tr in reversed(model.transitions):
            nid = bg.trans_node(tr.child, t)
            for eid in g.nodes[nid].edge_ids[1:]:
                if not static_backward and eid in static_edges:
                    continue
                sched.append((nid, eid))
    sched += init_directives
    return sched


# ---------------------------------------------------------------------------
# exact filtering
# ---------------------------------------------------------------------------


def initial_belief(model: ModelSpec) -> DiscreteTensor:
    axes = [(f.name, f.cardinality) for f in model.factors]
    data = np.asarray(model.factors[0].init)
    for f in model.factors[1:]:
        data = np.multiply.outer(data, np.asarray(f.init))
    return DiscreteTensor(axes, data)


def observation_update(model: ModelSpec, belief: DiscreteTensor,
                       observation) -> DiscreteTensor:
    """Condition the joint belief on one full observation.

    `observation` maps observation names to symbol indices (a bare int is
    accepted for single-observation models).
    """
    if isinstance(observation, (int, np.integer)):
        observation = {model.observations[0].name: int(observation)}
    arr = belief.data.copy()
    names = [n for n, _ in belief.axes]
    for o in model.observations:
        y = observation[o.name]
        lik = o.table[y]
        idx = [names.index(p) for p in o.parents]
        shape = [1] * arr.ndim
        perm_lik = np.transpose(lik, np.argsort(idx))
        for axis_pos, dim in zip(sorted(idx), perm_lik.shape):
            shape[axis_pos] = dim
        arr = arr * perm_lik.reshape(shape)
    s = arr.sum()
    if s <= 0.0:
        raise InconsistentEvidenceError("belief", "observation impossible under belief")
    return DiscreteTensor(belief.axes, arr / s, validate=False)


def transition_update(model: ModelSpec, belief: DiscreteTensor,
                      action: int) -> DiscreteTensor:
    """Push the joint belief through one step of the dynamics."""
    factors = [belief]
    next_suffix = "__next"
    for tr in model.transitions:
        axes = [(tr.child + next_suffix, tr.table.shape[0])]
        axes += [(p, model.factor(p).cardinality) for p in tr.parents]
        factors.append(DiscreteTensor(axes, tr.table[..., action], validate=False))
    keep = []
    for f in model.factors:
        keep.append(f.name + next_suffix if f.dynamic else f.name)
    out = contract(factors, keep)
    renames = {f.name + next_suffix: f.name for f in model.dynamic_factors}
    out = out.rename(renames)
    s = out.data.sum()
    return DiscreteTensor(out.axes, out.data / s, validate=False)


def filter_history(model: ModelSpec, actions, observations) -> DiscreteTensor:
    """Exact posterior over the joint state after a history.

    `observations[0]` is the reset-time observation; `observations[i]`
    follows `actions[i-1]`.
    """
    if len(observations) != len(actions) + 1:
        raise ModelValidationError(
            "history must contain one more observation than actions"
        )
    belief = initial_belief(model)
    belief = observation_update(model, belief, observations[0])
    for a, y in zip(actions, observations[1:]):
        belief = transition_update(model, belief, int(a))
        belief = observation_update(model, belief, y)
    return belief
