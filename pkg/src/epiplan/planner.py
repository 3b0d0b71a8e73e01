"""Iterative policy inference and receding-horizon episode control.

plan() filters the episode history into an exact joint belief, unrolls
the model over the remaining steps with that belief as the initial
factor, and then alternates: refresh the epistemic prior tables from the
previous iteration's posterior, run message passing, record the Bethe
free energy. With epistemic priors disabled the same loop is a KL-control
planner (generative model + preference only).

Prior refresh rules:
* control priors: softmax of summed transition-entropy scores from the
  transition node joints; deterministic transitions contribute exactly
  zero, so fully deterministic models keep uniform control priors;
* state priors: either the static negative-observation-entropy scores a
  single-factor model carries, or the per-cell predicted-observation
  information scores of a factored model's observation pack.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .epistemic import (
    StaticInfoEntropies,
    control_scores_from_graph,
    state_info_scores,
)
from .errors import ConfigError
from .model import BuiltGraph, ModelSpec, build_graph, filter_history
from .tensor import softmax_scores


@dataclass(frozen=True)
class AgentConfig:
    horizon: int
    vi_iterations: int = 20
    sweeps_per_iteration: int = 1
    epistemic_enabled: bool = True
    action_selection: str = "argmax"  # "argmax" | "sample"
    sample_seed: int | None = None
    score_scale: float = 1.0
    compute_bfe_trace: bool = True
    record_prior_snapshots: bool = False

    def validate(self) -> None:
        if self.horizon < 1 or self.vi_iterations < 1:
            raise ConfigError("horizon and vi_iterations must be >= 1")
        if self.sweeps_per_iteration < 1:
            raise ConfigError("sweeps_per_iteration must be >= 1")
        if self.action_selection not in ("argmax", "sample"):
            raise ConfigError(f"unknown action selection {self.action_selection!r}")


@dataclass
class PolicyPosterior:
    controls: list[np.ndarray]


@dataclass
class InferenceTrace:
    bfe: list[float] = field(default_factory=list)
    prior_snapshots: list[dict] | None = None


def _all_transitions_deterministic(built: BuiltGraph) -> bool:
    g = built.graph
    for tr in built.model.transitions:
        if g.nodes[built.trans_node(tr.child, 1)].det_succ is None:
            return False
    return True


def _install_epistemic(built: BuiltGraph, cfg: AgentConfig,
                       static_installed: bool) -> None:
    model, g, R = built.model, built.graph, built.horizon
    scale = cfg.score_scale

    if not _all_transitions_deterministic(built):
        for t in range(1, R + 1):
            scores = control_scores_from_graph(g, built, t)
            g.set_node_table(built.epi_control_node(t), softmax_scores(scale * scores))

    if model.obs_entropy_scores and not static_installed:
        # iteration-invariant: the observation conditional equals the CPT
        for fname, sc in model.obs_entropy_scores.items():
            table = softmax_scores(scale * np.asarray(sc))
            for t in range(1, R + 1):
                g.set_node_table(built.epi_state_node(fname, t), table)

    pack = model.obs_info_pack
    if pack is not None:
        static_beliefs = {name: g.edge_belief(name) for name in pack.static_names}
        entropies = StaticInfoEntropies(pack, static_beliefs)
        static_totals = {
            name: np.zeros(card)
            for name, card in zip(pack.static_names, pack.static_cards)
        }
        for t in range(1, R + 1):
            dyn_beliefs = {
                name: g.edge_belief(built.dyn_edge(name, t))
                for name in pack.dyn_names
            }
            scores = state_info_scores(pack, dyn_beliefs, entropies)
            for name in pack.dyn_names:
                g.set_node_table(built.epi_state_node(name, t),
                                 softmax_scores(scale * scores[name]))
            for name in pack.static_names:
                static_totals[name] += scores[name]
        for name, total in static_totals.items():
            g.set_node_table(built.epi_state_node(name), softmax_scores(scale * total))


def _snapshot_priors(built: BuiltGraph) -> dict:
    g, model, R = built.graph, built.model, built.horizon
    snap: dict = {"control": {}, "state": {}}
    for t in range(1, R + 1):
        snap["control"][t] = g.nodes[built.epi_control_node(t)].table.tolist()
        for f in model.dynamic_factors:
            snap["state"][f"{f.name}_{t}"] = g.nodes[
                built.epi_state_node(f.name, t)
            ].table.tolist()
    for f in model.static_factors:
        snap["state"][f.name] = g.nodes[built.epi_state_node(f.name)].table.tolist()
    return snap


def plan(model: ModelSpec, history, cfg: AgentConfig,
         include_epistemic_nodes: bool = True
         ) -> tuple[PolicyPosterior, InferenceTrace]:
    """Infer the policy posterior over the remaining horizon."""
    cfg.validate()
    actions, observations = history
    remaining = cfg.horizon - len(actions)
    if remaining < 1:
        raise ConfigError("no steps remain to plan over")
    belief = filter_history(model, list(actions), list(observations))
    built = build_graph(
        model,
        horizon=remaining,
        init_belief=belief.data,
        include_epistemic=include_epistemic_nodes,
        include_obs=False,
        obs_directives=False,
    )
    g = built.graph
    # loopy deterministic models can produce contradictory hard messages
    g.message_floor = 1e-10
    trace = InferenceTrace(
        prior_snapshots=[] if cfg.record_prior_snapshots else None
    )
    static_installed = False
    for tau in range(1, cfg.vi_iterations + 1):
        if tau > 1 and cfg.epistemic_enabled and include_epistemic_nodes:
            _install_epistemic(built, cfg, static_installed)
            static_installed = True
        g.run(cfg.sweeps_per_iteration)
        if cfg.compute_bfe_trace:
            trace.bfe.append(g.bethe_from_messages())
        if trace.prior_snapshots is not None and include_epistemic_nodes:
            trace.prior_snapshots.append(_snapshot_priors(built))
    controls = [
        g.edge_belief(built.control_edge(t)).copy() for t in range(1, remaining + 1)
    ]
    return PolicyPosterior(controls=controls), trace


def select_action(q_u1, cfg: AgentConfig,
                  rng: np.random.Generator | None = None) -> int:
    q = np.asarray(q_u1, dtype=np.float64)
    if cfg.action_selection == "argmax":
        return int(np.argmax(q))
    if rng is None:
        rng = np.random.default_rng(cfg.sample_seed)
    return int(rng.choice(q.shape[0], p=q / q.sum()))


@dataclass
class EpisodeRecord:
    seed: int
    agent: str
    actions: list[int] = field(default_factory=list)
    observations: list = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)
    states: list = field(default_factory=list)
    bfe_traces: list[list[float]] = field(default_factory=list)
    success: bool = False
    steps: int = 0
    total_reward: float = 0.0
    extras: dict = field(default_factory=dict)

    def to_json_obj(self) -> dict:
        return {
            "seed": self.seed,
            "agent": self.agent,
            "actions": self.actions,
            "observations": self.observations,
            "rewards": self.rewards,
            "states": self.states,
            "bfe_traces": self.bfe_traces,
            "success": self.success,
            "steps": self.steps,
            "total_reward": self.total_reward,
            "extras": self.extras,
        }


def _state_repr(env):
    getter = getattr(env, "state_repr", None)
    if getter is not None:
        return getter()
    return getattr(env, "state", None)


def run_episode(env, model: ModelSpec, cfg: AgentConfig, seed: int,
                agent: str = "efe") -> EpisodeRecord:
    """Receding-horizon episode: observe, replan, act until done."""
    cfg.validate()
    obs = env.reset(seed)
    to_model_obs = getattr(env, "observation_dict", None)
    rec = EpisodeRecord(seed=seed, agent=agent)
    rec.observations.append(obs)
    rec.states.append(_state_repr(env))
    model_obs = [to_model_obs(obs) if to_model_obs else obs]
    action_rng = np.random.default_rng([seed, 977])
    while not env.done and len(rec.actions) < cfg.horizon:
        policy, trace = plan(model, (rec.actions, model_obs), cfg)
        a = select_action(policy.controls[0], cfg, rng=action_rng)
        obs, reward, done = env.step(a)
        rec.actions.append(a)
        rec.observations.append(obs)
        model_obs.append(to_model_obs(obs) if to_model_obs else obs)
        rec.rewards.append(float(reward))
        rec.states.append(_state_repr(env))
        rec.bfe_traces.append(trace.bfe)
    rec.success = bool(env.success)
    rec.steps = len(rec.actions)
    rec.total_reward = float(sum(rec.rewards))
    return rec
