"""Forney-style factor graphs: nodes are factors, edges are variables.

Sum-product message passing runs over an explicit (node -> edge)
directive schedule. Messages are renormalized after every update so long
horizons cannot underflow. Observed edges are clamped through one-hot
messages rather than graph surgery.

Two structural fast paths keep planning-scale graphs cheap without
changing any result:

* a factor whose table is a deterministic CPT (every column one-hot)
  sends messages via an integer successor table instead of dense sums;
* a CPT factor whose child edge is a latent leaf sends exactly uniform
  messages to its parents (the column sums cancel), so those directives
  are skipped.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (
    InconsistentEvidenceError,
    ScheduleError,
    StructuralError,
)
from .tensor import DiscreteTensor

_NORM_EPS = 0.0  # messages with an exactly zero sum are conflicts


class VariableEdge:
    __slots__ = ("id", "cardinality", "nodes", "observed_value", "messages", "_onehot")

    def __init__(self, edge_id: str, cardinality: int):
        self.id = edge_id
        self.cardinality = int(cardinality)
        self.nodes: list[str] = []
        self.observed_value: int | None = None
        self.messages: dict[str, np.ndarray] = {}
        self._onehot: np.ndarray | None = None

    @property
    def degree(self) -> int:
        return len(self.nodes)

    def onehot(self) -> np.ndarray:
        if self._onehot is None:
            v = np.zeros(self.cardinality)
            v[self.observed_value] = 1.0
            self._onehot = v
        return self._onehot


class FactorNode:
    __slots__ = (
        "id", "kind", "edge_ids", "table", "child_index", "det_succ",
        "_t2d_cache", "_parent_strides",
    )

    def __init__(self, node_id, kind, edge_ids, table, child_index=None):
        self.id = node_id
        self.kind = kind
        self.edge_ids = tuple(edge_ids)
        self.table = np.asarray(table, dtype=np.float64)
        self.child_index = child_index
        self.det_succ: np.ndarray | None = None
        self._t2d_cache: dict[int, np.ndarray] = {}
        self._parent_strides: dict[int, tuple[int, int]] = {}

    @property
    def degree(self) -> int:
        return len(self.edge_ids)

    def as_tensor(self) -> DiscreteTensor:
        axes = list(zip(self.edge_ids, self.table.shape))
        return DiscreteTensor(axes, self.table, validate=False)

    def detect_deterministic(self) -> None:
        """Mark the node deterministic if its CPT columns are one-hot."""
        if self.child_index is None or self.table.ndim < 2:
            return
        t = np.moveaxis(self.table, self.child_index, 0)
        flat = t.reshape(t.shape[0], -1)
        is_binary = np.all((flat == 0.0) | (flat == 1.0))
        if is_binary and np.all(flat.sum(axis=0) == 1.0):
            self.det_succ = np.ascontiguousarray(np.argmax(flat, axis=0).astype(np.int64))

    def t2d(self, pos: int) -> np.ndarray:
        cached = self._t2d_cache.get(pos)
        if cached is None:
            moved = np.moveaxis(self.table, pos, 0)
            cached = np.ascontiguousarray(moved.reshape(moved.shape[0], -1))
            self._t2d_cache[pos] = cached
        return cached

    def parent_stride(self, parent_pos: int) -> tuple[int, int]:
        """(stride, card) of a parent axis within the flat successor table."""
        cached = self._parent_strides.get(parent_pos)
        if cached is None:
            parent_shape = [
                c for i, c in enumerate(self.table.shape) if i != self.child_index
            ]
            # position of this axis among the parents
            ppos = parent_pos if parent_pos < self.child_index else parent_pos - 1
            stride = int(np.prod(parent_shape[ppos + 1:], dtype=np.int64))
            cached = (stride, parent_shape[ppos])
            self._parent_strides[parent_pos] = cached
        return cached


@dataclass
class Marginals:
    edge_marginals: dict[str, DiscreteTensor]
    node_joints: dict[str, DiscreteTensor] = field(default_factory=dict)


class FactorGraph:
    """message_floor > 0 switches conflict handling from raising to a tiny
    uniform mix on every message: loopy graphs over deterministic tables
    can manufacture contradictory hard zeros that a tree never produces."""

    def __init__(self, message_floor: float = 0.0):
        self.edges: dict[str, VariableEdge] = {}
        self.nodes: dict[str, FactorNode] = {}
        self.schedule: list[tuple[str, str]] = []
        self.message_floor = float(message_floor)

    # -- construction --------------------------------------------------------

    def add_edge(self, edge_id: str, cardinality: int) -> VariableEdge:
        if edge_id in self.edges:
            raise StructuralError(f"duplicate edge id {edge_id!r}")
        e = VariableEdge(edge_id, cardinality)
        self.edges[edge_id] = e
        return e

    def add_node(self, node_id, kind, edge_ids, table, child_edge=None) -> FactorNode:
        if node_id in self.nodes:
            raise StructuralError(f"duplicate node id {node_id!r}")
        table = np.asarray(table, dtype=np.float64)
        edge_ids = tuple(edge_ids)
        if table.ndim != len(edge_ids):
            raise StructuralError(
                f"node {node_id!r}: table rank {table.ndim} != {len(edge_ids)} edges"
            )
        for dim, eid in zip(table.shape, edge_ids):
            e = self.edges.get(eid)
            if e is None:
                raise StructuralError(f"node {node_id!r} references missing edge {eid!r}")
            if e.cardinality != dim:
                raise StructuralError(
                    f"node {node_id!r}: axis for edge {eid!r} has size {dim}, "
                    f"edge cardinality is {e.cardinality}"
                )
        child_index = edge_ids.index(child_edge) if child_edge is not None else None
        node = FactorNode(node_id, kind, edge_ids, table, child_index)
        self.nodes[node_id] = node
        for eid in edge_ids:
            self.edges[eid].nodes.append(node_id)
        if kind == "cpt":
            node.detect_deterministic()
        if node.degree == 1:
            self._install_unary_message(node)
        return node

    @classmethod
    def from_factors(cls, factors) -> "FactorGraph":
        """Build a graph from (name, DiscreteTensor) pairs.

        Edges are inferred from shared axis names; a deterministic
        schedule is generated (exact single-pass on trees).
        """
        g = cls()
        for name, t in factors:
            for axis, card in t.axes:
                if axis not in g.edges:
                    g.add_edge(axis, card)
        for name, t in factors:
            kind = "prior" if len(t.axes) == 1 else "cpt"
            g.add_node(name, kind, [n for n, _ in t.axes], t.data)
        g.schedule = g.auto_schedule()
        return g

    def observe(self, edge_id: str, value: int | None) -> None:
        e = self.edges[edge_id]
        if value is not None and not (0 <= value < e.cardinality):
            raise StructuralError(
                f"observed value {value} out of range for edge {edge_id!r}"
            )
        e.observed_value = value
        e._onehot = None

    def set_node_table(self, node_id: str, table) -> None:
        """Replace a node's table (prior installs); unary messages refresh."""
        node = self.nodes[node_id]
        table = np.asarray(table, dtype=np.float64)
        if table.shape != node.table.shape:
            raise StructuralError(
                f"node {node_id!r}: new table shape {table.shape} != {node.table.shape}"
            )
        node.table = table
        node._t2d_cache = {}
        if node.degree == 1:
            self._install_unary_message(node)

    def _install_unary_message(self, node: FactorNode) -> None:
        s = node.table.sum()
        if s <= 0.0:
            raise StructuralError(f"node {node.id!r} has an all-zero table")
        self.edges[node.edge_ids[0]].messages[node.id] = node.table.ravel() / s

    def reset_messages(self) -> None:
        for e in self.edges.values():
            e.messages.clear()
        for node in self.nodes.values():
            if node.degree == 1:
                self._install_unary_message(node)

    # -- message passing -----------------------------------------------------

    def _message_product(self, e: VariableEdge, skip: str | None) -> np.ndarray | None:
        prod = None
        for nid, msg in e.messages.items():
            if nid == skip:
                continue
            if prod is None:
                prod = msg.copy()
            else:
                prod *= msg
                m = prod.max()
                if 0.0 < m < 1e-250:  # renormalize early to dodge underflow
                    prod /= m
        return prod

    def incoming(self, node_id: str, edge_id: str) -> np.ndarray:
        """Product of messages into `edge_id` from all nodes except `node_id`."""
        e = self.edges[edge_id]
        if e.observed_value is not None:
            return e.onehot()
        prod = self._message_product(e, node_id)
        if prod is None:
            return np.full(e.cardinality, 1.0 / e.cardinality)
        s = prod.sum()
        if s <= 0.0:
            if self.message_floor > 0.0:
                return np.full(e.cardinality, 1.0 / e.cardinality)
            raise InconsistentEvidenceError(edge_id)
        return prod / s

    def _child_is_latent_leaf(self, node: FactorNode) -> bool:
        if node.child_index is None:
            return False
        child = self.edges[node.edge_ids[node.child_index]]
        return child.degree == 1 and child.observed_value is None

    def compute_message(self, node_id: str, target_edge: str) -> np.ndarray | None:
        """Sum-product message node -> edge, normalized; None means uniform."""
        node = self.nodes[node_id]
        if target_edge not in node.edge_ids:
            raise ScheduleError(f"node {node_id!r} not attached to edge {target_edge!r}")
        if node.degree == 1:
            return self.edges[target_edge].messages[node_id]
        pos = node.edge_ids.index(target_edge)
        # CPT with an uninformed leaf child: parent messages are uniform
        if pos != node.child_index and self._child_is_latent_leaf(node):
            return None
        if node.det_succ is not None:
            out = self._det_message(node, pos)
        else:
            msgs = [
                self.incoming(node_id, eid)
                for i, eid in enumerate(node.edge_ids)
                if i != pos
            ]
            out = node.t2d(pos) @ kernels.weight_vector(msgs)
        s = out.sum()
        if s <= 0.0 or not np.isfinite(s):
            if self.message_floor > 0.0 and np.isfinite(s):
                return np.full(out.shape[0], 1.0 / out.shape[0])
            raise InconsistentEvidenceError(target_edge)
        out = out / s
        if self.message_floor > 0.0:
            out = out + self.message_floor
            out /= out.sum()
        return out

    def _det_message(self, node: FactorNode, pos: int) -> np.ndarray:
        ci = node.child_index
        parent_ids = [eid for i, eid in enumerate(node.edge_ids) if i != ci]
        if pos == ci:
            wrest = kernels.weight_vector(
                [self.incoming(node.id, eid) for eid in parent_ids]
            )
            return kernels.gather_child(
                node.det_succ, wrest, node.table.shape[ci]
            )
        child_msg = self.incoming(node.id, node.edge_ids[ci])
        msgs = []
        for i, eid in enumerate(node.edge_ids):
            if i == ci:
                continue
            if i == pos:
                msgs.append(np.ones(self.edges[eid].cardinality))
            else:
                msgs.append(self.incoming(node.id, eid))
        wexcl = kernels.weight_vector(msgs)
        stride, card = node.parent_stride(pos)
        return kernels.gather_parent(node.det_succ, child_msg, wexcl, stride, card)

    def sweep(self, schedule=None) -> float:
        """Run every directive once; returns the max elementwise change."""
        directives = self.schedule if schedule is None else schedule
        delta = 0.0
        for node_id, edge_id in directives:
            new = self.compute_message(node_id, edge_id)
            if new is None:
                continue
            slot = self.edges[edge_id].messages
            old = slot.get(node_id)
            if old is not None:
                d = float(np.max(np.abs(new - old)))
                if d > delta:
                    delta = d
            else:
                delta = math.inf
            slot[node_id] = new
        return delta

    def run(self, sweeps: int) -> float:
        delta = math.inf
        for _ in range(max(1, int(sweeps))):
            delta = self.sweep()
        return delta

    # -- queries ---------------------------------------------------------------

    def edge_belief(self, edge_id: str) -> np.ndarray:
        e = self.edges[edge_id]
        if e.observed_value is not None:
            return e.onehot()
        prod = self._message_product(e, None)
        if prod is None:
            return np.full(e.cardinality, 1.0 / e.cardinality)
        s = prod.sum()
        if s <= 0.0:
            if self.message_floor > 0.0:
                return np.full(e.cardinality, 1.0 / e.cardinality)
            raise InconsistentEvidenceError(edge_id)
        return prod / s

    def node_joint_raw(self, node_id: str) -> np.ndarray:
        """Normalized joint over the node's own axis order, flattened."""
        node = self.nodes[node_id]
        msgs = [self.incoming(node_id, eid) for eid in node.edge_ids]
        w = node.table.ravel() * kernels.weight_vector(msgs)
        s = w.sum()
        if s <= 0.0:
            raise InconsistentEvidenceError(node.edge_ids[0])
        return w / s

    def node_joint(self, node_id: str) -> DiscreteTensor:
        node = self.nodes[node_id]
        axes = list(zip(node.edge_ids, node.table.shape))
        return DiscreteTensor(axes, self.node_joint_raw(node_id).reshape(node.table.shape),
                              validate=False)

    def marginals(self, include_joints: bool = True) -> Marginals:
        em = {}
        for eid, e in self.edges.items():
            em[eid] = DiscreteTensor([(eid, e.cardinality)], self.edge_belief(eid),
                                     validate=False)
        nj = {}
        if include_joints:
            for nid in self.nodes:
                nj[nid] = self.node_joint(nid)
        return Marginals(edge_marginals=em, node_joints=nj)

    # -- free energy -------------------------------------------------------------

    def bethe_from_messages(self) -> float:
        """Bethe free energy of the current message state.

        Equals -log Z on trees at a message fixed point. CPT nodes with a
        latent leaf child and deterministic nodes use closed forms that
        are exact rewrites of the generic sum.
        """
        total = 0.0
        for node in self.nodes.values():
            if node.degree == 1:
                eid = node.edge_ids[0]
                b = self.edge_belief(eid)
                f = node.table.ravel()
                mask = b > 0.0
                if np.any(f[mask] <= 0.0):
                    return math.inf
                total += float(
                    (b[mask] * (np.log(b[mask]) - np.log(f[mask]))).sum()
                )
            elif self._child_is_latent_leaf(node):
                for i, eid in enumerate(node.edge_ids):
                    if i == node.child_index:
                        continue
                    total -= kernels.entropy_flat(self.incoming(node.id, eid))
            elif node.det_succ is not None:
                ci = node.child_index
                parent_msgs = [
                    self.incoming(node.id, eid)
                    for i, eid in enumerate(node.edge_ids)
                    if i != ci
                ]
                child_msg = self.incoming(node.id, node.edge_ids[ci])
                w = kernels.det_weight(
                    node.det_succ, child_msg, kernels.weight_vector(parent_msgs)
                )
                z = w.sum()
                if z <= 0.0:
                    return math.inf
                total += kernels.xlogx_sum(w) / z - math.log(z)
            else:
                msgs = [self.incoming(node.id, eid) for eid in node.edge_ids]
                wmsg = kernels.weight_vector(msgs)
                w = node.table.ravel() * wmsg
                z = w.sum()
                if z <= 0.0:
                    return math.inf
                mask = w > 0.0
                q = w[mask] / z
                total += float((q * np.log(wmsg[mask] / z)).sum())
        for e in self.edges.values():
            if e.degree > 1:
                total += (e.degree - 1) * kernels.entropy_flat(self.edge_belief(e.id))
        return total

    # -- scheduling ------------------------------------------------------------

    def is_tree(self) -> bool:
        incidences = sum(n.degree for n in self.nodes.values())
        vertices = len(self.nodes) + len(self.edges)
        if incidences != vertices - self._component_count():
            return False
        return True

    def _component_count(self) -> int:
        seen: set[str] = set()
        comps = 0
        for start in self.nodes:
            key = "n:" + start
            if key in seen:
                continue
            comps += 1
            stack = [("n", start)]
            while stack:
                typ, vid = stack.pop()
                k = typ + ":" + vid
                if k in seen:
                    continue
                seen.add(k)
                if typ == "n":
                    for eid in self.nodes[vid].edge_ids:
                        stack.append(("e", eid))
                else:
                    for nid in self.edges[vid].nodes:
                        stack.append(("n", nid))
        for eid, e in self.edges.items():
            if not e.nodes and "e:" + eid not in seen:
                comps += 1
        return comps

    def auto_schedule(self) -> list[tuple[str, str]]:
        """Deterministic schedule: exact two-phase order on trees,
        forward-then-reversed round robin otherwise."""
        if self.is_tree():
            return self._tree_schedule()
        forward = [
            (nid, eid)
            for nid in sorted(self.nodes)
            for eid in self.nodes[nid].edge_ids
            if self.nodes[nid].degree > 1
        ]
        return forward + forward[::-1]

    def _tree_schedule(self) -> list[tuple[str, str]]:
        upward: list[tuple[str, str]] = []
        downward: list[tuple[str, str]] = []
        visited_nodes: set[str] = set()
        for root in sorted(self.nodes):
            if root in visited_nodes:
                continue
            # DFS over the bipartite tree; parent_edge[n] is the edge toward root
            order: list[tuple[str, str | None]] = []
            stack: list[tuple[str, str | None]] = [(root, None)]
            seen_edges: set[str] = set()
            while stack:
                nid, via = stack.pop()
                if nid in visited_nodes:
                    continue
                visited_nodes.add(nid)
                order.append((nid, via))
                for eid in self.nodes[nid].edge_ids:
                    if eid == via or eid in seen_edges:
                        continue
                    seen_edges.add(eid)
                    for other in self.edges[eid].nodes:
                        if other != nid and other not in visited_nodes:
                            stack.append((other, eid))
            for nid, via in reversed(order):
                if via is not None and self.nodes[nid].degree >= 1:
                    upward.append((nid, via))
            for nid, via in order:
                for eid in self.nodes[nid].edge_ids:
                    if eid != via:
                        downward.append((nid, eid))
        sched = upward + downward
        return [(n, e) for n, e in sched if self.nodes[n].degree > 1]

    # -- introspection -----------------------------------------------------------

    def structure_json(self) -> str:
        obj = {
            "edges": {
                eid: {
                    "cardinality": e.cardinality,
                    "degree": e.degree,
                    "observed": e.observed_value,
                    "nodes": list(e.nodes),
                }
                for eid, e in sorted(self.edges.items())
            },
            "nodes": {
                nid: {"kind": n.kind, "edges": list(n.edge_ids)}
                for nid, n in sorted(self.nodes.items())
            },
        }
        return json.dumps(obj, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# module-level operations (spec surface)
# ---------------------------------------------------------------------------


def sum_product_message(node: FactorNode, incoming: dict[str, DiscreteTensor],
                        target: str) -> DiscreteTensor:
    """Standalone message computation from explicit incoming messages."""
    if target not in node.edge_ids:
        raise ScheduleError(f"target edge {target!r} not attached to node {node.id!r}")
    missing = [e for e in node.edge_ids if e != target and e not in incoming]
    if missing:
        raise ScheduleError(f"missing incoming messages for edges {missing}")
    pos = node.edge_ids.index(target)
    msgs = []
    for i, eid in enumerate(node.edge_ids):
        if i == pos:
            continue
        m = incoming[eid]
        msgs.append(m.data.ravel() / m.data.sum())
    out = node.t2d(pos) @ kernels.weight_vector(msgs) if msgs else node.table.ravel()
    s = out.sum()
    if s <= 0.0:
        raise InconsistentEvidenceError(target)
    card = node.table.shape[pos]
    return DiscreteTensor([(target, card)], out / s, validate=False)


def run_inference(graph: FactorGraph, sweeps: int = 2,
                  include_joints: bool = True) -> Marginals:
    """Run `sweeps` passes over the schedule and extract all marginals."""
    if not graph.schedule:
        graph.schedule = graph.auto_schedule()
    graph.run(sweeps)
    return graph.marginals(include_joints=include_joints)


def bethe_free_energy(graph: FactorGraph, m: Marginals) -> float:
    """Bethe free energy of supplied marginals on the graph's structure.

    Node terms E_q[log(q_a/f_a)] plus (degree-1)-weighted edge entropies;
    +inf when some q_a puts mass where its factor is zero.
    """
    total = 0.0
    for nid, node in graph.nodes.items():
        q = m.node_joints.get(nid)
        if q is None:
            raise StructuralError(f"marginals missing node joint for {nid!r}")
        f = node.as_tensor()
        if q.axes != f.axes:
            raise StructuralError(f"node joint axes mismatch for {nid!r}")
        qa, fa = q.data.ravel(), f.data.ravel()
        mask = qa > 0.0
        if np.any(fa[mask] <= 0.0):
            return math.inf
        total += float((qa[mask] * (np.log(qa[mask]) - np.log(fa[mask]))).sum())
    for eid, e in graph.edges.items():
        if e.degree > 1:
            q = m.edge_marginals[eid]
            total += (e.degree - 1) * kernels.entropy_flat(q.data.ravel())
    return total
