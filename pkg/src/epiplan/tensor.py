"""Dense non-negative tensors over named, labeled axes.

A DiscreteTensor stores a row-major float64 array whose dimensions carry
axis names. Axes are canonicalized to sorted-by-name order on
construction, so value equality is well defined. All operations are pure
and return new tensors; the underlying arrays are marked read-only.

Everything downstream (CPTs, messages, marginals, priors) is one of
these.
"""

from __future__ import annotations

import json
import math
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    ContractViolationError,
    DegenerateDistributionError,
    DivergenceUndefinedError,
    StructuralError,
)

NORM_TOL = 1e-12


class DiscreteTensor:
    """Dense tensor over named axes; the substrate for all beliefs."""

    __slots__ = ("axes", "data")

    def __init__(self, axes: Sequence[tuple[str, int]], data, validate: bool = True):
        axes = tuple((str(n), int(c)) for n, c in axes)
        names = [n for n, _ in axes]
        if len(set(names)) != len(names):
            raise StructuralError(f"duplicate axis names in {names}")
        arr = np.asarray(data, dtype=np.float64)
        shape = tuple(c for _, c in axes)
        if arr.ndim == 1 and arr.size == int(np.prod(shape, dtype=np.int64)):
            arr = arr.reshape(shape)
        if arr.shape != shape:
            raise StructuralError(f"data shape {arr.shape} does not match axes {axes}")
        order = sorted(range(len(axes)), key=lambda i: axes[i][0])
        if order != list(range(len(axes))):
            axes = tuple(axes[i] for i in order)
            arr = np.transpose(arr, order)
        arr = np.ascontiguousarray(arr)
        if validate:
            if not np.all(np.isfinite(arr)):
                raise StructuralError("tensor entries must be finite")
            if np.any(arr < 0.0):
                raise StructuralError("tensor entries must be non-negative")
        arr.flags.writeable = False
        self.axes = axes
        self.data = arr

    # -- construction helpers ------------------------------------------------

    @classmethod
    def uniform(cls, axes: Sequence[tuple[str, int]]) -> "DiscreteTensor":
        size = int(np.prod([c for _, c in axes], dtype=np.int64))
        return cls(axes, np.full(size, 1.0 / size))

    @classmethod
    def one_hot(cls, name: str, card: int, index: int) -> "DiscreteTensor":
        v = np.zeros(card)
        v[index] = 1.0
        return cls([(name, card)], v)

    @classmethod
    def vector(cls, name: str, values) -> "DiscreteTensor":
        values = np.asarray(values, dtype=np.float64)
        return cls([(name, values.shape[0])], values)

    # -- basic queries ---------------------------------------------------------

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.axes)

    @property
    def size(self) -> int:
        return self.data.size

    def card(self, name: str) -> int:
        for n, c in self.axes:
            if n == name:
                return c
        raise StructuralError(f"no axis named {name!r}")

    def rename(self, mapping: Mapping[str, str]) -> "DiscreteTensor":
        axes = [(mapping.get(n, n), c) for n, c in self.axes]
        return DiscreteTensor(axes, self.data, validate=False)

    def total(self) -> float:
        return float(self.data.sum())

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(self.total() - 1.0) <= max(tol, 1e-9)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, DiscreteTensor)
            and self.axes == other.axes
            and np.array_equal(self.data, other.data)
        )

    def allclose(self, other: "DiscreteTensor", atol: float = 1e-10) -> bool:
        return self.axes == other.axes and np.allclose(
            self.data, other.data, atol=atol, rtol=0.0
        )

    def __repr__(self) -> str:
        return f"DiscreteTensor(axes={self.axes})"

    # -- serialization -----------------------------------------------------------

    def to_json_obj(self) -> dict:
        return {
            "axes": [[n, c] for n, c in self.axes],
            "data": self.data.ravel().tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj())

    @classmethod
    def from_json_obj(cls, obj: dict) -> "DiscreteTensor":
        return cls([(n, c) for n, c in obj["axes"]], np.asarray(obj["data"]))

    @classmethod
    def from_json(cls, s: str) -> "DiscreteTensor":
        return cls.from_json_obj(json.loads(s))


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def _letter_map(names: Iterable[str]) -> dict[str, int]:
    return {n: i for i, n in enumerate(sorted(set(names)))}


def contract(factors: Sequence[DiscreteTensor], keep_axes: Iterable[str]) -> DiscreteTensor:
    """Pointwise product of the factors summed over axes not kept.

    Shared axis names must agree in cardinality. The result's axes are the
    requested ones in sorted order.
    """
    if not factors:
        raise StructuralError("contract requires at least one factor")
    keep = sorted(set(keep_axes))
    cards: dict[str, int] = {}
    for f in factors:
        for n, c in f.axes:
            if cards.setdefault(n, c) != c:
                raise StructuralError(
                    f"axis {n!r} has conflicting cardinalities {cards[n]} vs {c}"
                )
    missing = [n for n in keep if n not in cards]
    if missing:
        raise StructuralError(f"keep_axes {missing} not present in any factor")
    letters = _letter_map(cards)
    operands = []
    for f in factors:
        operands.append(f.data)
        operands.append([letters[n] for n in f.names])
    operands.append([letters[n] for n in keep])
    out = np.einsum(*operands, optimize=True)
    return DiscreteTensor([(n, cards[n]) for n in keep], out, validate=False)


def normalize(t: DiscreteTensor, over: Iterable[str] | None = None) -> DiscreteTensor:
    """Scale slices so each sums to one over the `over` axes.

    With `over` omitted, normalizes over all axes. A zero-sum slice raises
    DegenerateDistributionError.
    """
    over_set = set(t.names) if over is None else set(over)
    unknown = over_set - set(t.names)
    if unknown:
        raise StructuralError(f"normalize: axes {sorted(unknown)} not in tensor")
    sum_axes = tuple(i for i, (n, _) in enumerate(t.axes) if n in over_set)
    sums = t.data.sum(axis=sum_axes, keepdims=True)
    if np.any(sums <= 0.0):
        raise DegenerateDistributionError("zero-sum slice cannot be normalized")
    return DiscreteTensor(t.axes, t.data / sums, validate=False)


def entropy(t: DiscreteTensor) -> float:
    """Shannon entropy in nats of a tensor normalized over all axes."""
    if not t.is_normalized():
        raise ContractViolationError("entropy requires a normalized tensor")
    p = t.data.ravel()
    nz = p[p > 0.0]
    return float(-(nz * np.log(nz)).sum())


def conditional_entropy(joint: DiscreteTensor, given: Iterable[str]) -> DiscreteTensor:
    """Entropy of the remaining axes conditioned on each `given` assignment.

    Returns a tensor over the `given` axes. Conditioning values with zero
    probability get entropy 0 (they carry no expectation weight).
    """
    given_set = set(given)
    unknown = given_set - set(joint.names)
    if unknown:
        raise StructuralError(f"conditional_entropy: axes {sorted(unknown)} missing")
    if not joint.is_normalized():
        raise ContractViolationError("conditional_entropy requires normalized joint")
    given_idx = [i for i, (n, _) in enumerate(joint.axes) if n in given_set]
    rest_idx = [i for i, (n, _) in enumerate(joint.axes) if n not in given_set]
    perm = given_idx + rest_idx
    arr = np.transpose(joint.data, perm)
    g_shape = arr.shape[: len(given_idx)]
    mat = arr.reshape(int(np.prod(g_shape, dtype=np.int64) or 1), -1)
    sums = mat.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(mat > 0.0, mat * np.log(mat), 0.0).sum(axis=1)
        h = np.where(sums > 0.0, np.log(sums) - plogp / sums, 0.0)
    out_axes = [joint.axes[i] for i in given_idx]
    return DiscreteTensor(out_axes, h.reshape(g_shape), validate=False)


def softmax(scores: DiscreteTensor) -> DiscreteTensor:
    """exp(scores - max) normalized over all axes; shift-invariant."""
    arr = scores.data
    if not np.all(np.isfinite(arr)):
        raise StructuralError("softmax requires finite scores")
    e = np.exp(arr - arr.max())
    return DiscreteTensor(scores.axes, e / e.sum(), validate=False)


def softmax_scores(scores: np.ndarray) -> np.ndarray:
    """Raw-array softmax used by planner internals."""
    e = np.exp(scores - scores.max())
    return e / e.sum()


def kl_divergence(p: DiscreteTensor, q: DiscreteTensor) -> float:
    """KL(p || q) in nats for matching normalized tensors."""
    if p.axes != q.axes:
        raise StructuralError(f"axis mismatch: {p.axes} vs {q.axes}")
    if not (p.is_normalized() and q.is_normalized()):
        raise ContractViolationError("kl_divergence requires normalized inputs")
    pa, qa = p.data.ravel(), q.data.ravel()
    mask = pa > 0.0
    if np.any(qa[mask] <= 0.0):
        raise DivergenceUndefinedError("q is zero where p has mass")
    return float((pa[mask] * (np.log(pa[mask]) - np.log(qa[mask]))).sum())


def marginal(t: DiscreteTensor, keep_axes: Iterable[str]) -> DiscreteTensor:
    """Sum a single tensor down to the kept axes."""
    return contract([t], keep_axes)


def expectation(weights: DiscreteTensor, values: DiscreteTensor) -> float:
    """Sum of weights times values over their shared (identical) axes."""
    if weights.axes != values.axes:
        raise StructuralError("expectation requires matching axes")
    return float((weights.data * values.data).sum())


def log_sum_exp(scores: np.ndarray) -> float:
    m = float(np.max(scores))
    return m + math.log(float(np.exp(scores - m).sum()))
