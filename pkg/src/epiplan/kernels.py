"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

Backend selection: set EPIPLAN_BACKEND to "numba", "numpy", or "auto"
(default). "auto" uses numba when it imports cleanly. The two paths are
numerically identical; benchmarks/bench_kernels.py compares their speed.

All kernels operate on flat float64 arrays in row-major layout over the
axes of a factor table. Messages are dense per-axis weight vectors.
"""

import os

import numpy as np

_ENV_VAR = "EPIPLAN_BACKEND"


def _select_backend() -> str:
    choice = os.environ.get(_ENV_VAR, "auto").strip().lower()
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(
            f"{_ENV_VAR} must be 'auto', 'numba' or 'numpy', got {choice!r}"
        )
    if choice == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        if choice == "numba":
            raise
        return "numpy"
    return "numba"


BACKEND = _select_backend()
USING_NUMBA = BACKEND == "numba"


# ---------------------------------------------------------------------------
# pure numpy implementations
# ---------------------------------------------------------------------------

def _weight_vector_np(msgs):
    out = np.asarray(msgs[0], dtype=np.float64)
    for m in msgs[1:]:
        out = np.multiply.outer(out, m)
    return out.ravel()


def _gather_child_np(succ, wrest, n_child):
    return np.bincount(succ, weights=wrest, minlength=n_child)


def _gather_parent_np(succ, child_msg, wexcl, stride, card):
    temp = child_msg[succ] * wexcl
    n = temp.shape[0]
    temp = temp.reshape(n // (stride * card), card, stride)
    return temp.sum(axis=(0, 2))


def _det_weight_np(succ, child_msg, wrest):
    return child_msg[succ] * wrest


def _row_entropies_np(mat):
    s = mat.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(mat > 0.0, mat * np.log(mat), 0.0).sum(axis=1)
        h = np.where(s > 0.0, np.log(s) - plogp / s, 0.0)
    return h


def _entropy_flat_np(p):
    nz = p[p > 0.0]
    return float(-(nz * np.log(nz)).sum())


def _xlogx_sum_np(w):
    nz = w[w > 0.0]
    return float((nz * np.log(nz)).sum())


def _scatter_acc_np(comb2d, w, out):
    n = out.shape[0]
    weights = np.broadcast_to(w, comb2d.shape).ravel()
    out += np.bincount(comb2d.ravel(), weights=weights, minlength=n)


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if USING_NUMBA:
    from numba import njit

    _MAXC = 0  # padding width chosen per call

    @njit(cache=True, nogil=True)
    def _weight_vector_nb(padded, cards):
        n = cards.shape[0]
        total = 1
        for i in range(n):
            total *= cards[i]
        out = np.empty(total, np.float64)
        out[0] = 1.0
        size = 1
        for i in range(n):
            c = cards[i]
            for j in range(size - 1, -1, -1):
                base = out[j]
                for v in range(c - 1, -1, -1):
                    out[j * c + v] = base * padded[i, v]
            size *= c
        return out

    def _weight_vector(msgs):
        n = len(msgs)
        if n == 1:
            return np.asarray(msgs[0], dtype=np.float64)
        maxc = max(m.shape[0] for m in msgs)
        padded = np.zeros((n, maxc), dtype=np.float64)
        cards = np.empty(n, dtype=np.int64)
        for i, m in enumerate(msgs):
            padded[i, : m.shape[0]] = m
            cards[i] = m.shape[0]
        return _weight_vector_nb(padded, cards)

    @njit(cache=True, nogil=True)
    def _gather_child_nb(succ, wrest, n_child):
        out = np.zeros(n_child, np.float64)
        for r in range(succ.shape[0]):
            out[succ[r]] += wrest[r]
        return out

    @njit(cache=True, nogil=True)
    def _gather_parent_nb(succ, child_msg, wexcl, stride, card):
        out = np.zeros(card, np.float64)
        for r in range(succ.shape[0]):
            out[(r // stride) % card] += child_msg[succ[r]] * wexcl[r]
        return out

    @njit(cache=True, nogil=True)
    def _det_weight_nb(succ, child_msg, wrest):
        out = np.empty(succ.shape[0], np.float64)
        for r in range(succ.shape[0]):
            out[r] = child_msg[succ[r]] * wrest[r]
        return out

    @njit(cache=True, nogil=True)
    def _row_entropies_nb(mat):
        n, m = mat.shape
        out = np.empty(n, np.float64)
        for i in range(n):
            s = 0.0
            plogp = 0.0
            for j in range(m):
                p = mat[i, j]
                if p > 0.0:
                    s += p
                    plogp += p * np.log(p)
            if s > 0.0:
                out[i] = np.log(s) - plogp / s
            else:
                out[i] = 0.0
        return out

    @njit(cache=True, nogil=True)
    def _entropy_flat_nb(p):
        acc = 0.0
        for i in range(p.shape[0]):
            v = p[i]
            if v > 0.0:
                acc -= v * np.log(v)
        return acc

    @njit(cache=True, nogil=True)
    def _xlogx_sum_nb(w):
        acc = 0.0
        for i in range(w.shape[0]):
            v = w[i]
            if v > 0.0:
                acc += v * np.log(v)
        return acc

    @njit(cache=True, nogil=True)
    def _scatter_acc_nb(comb2d, w, out):
        nc, ns = comb2d.shape
        for c in range(nc):
            row = comb2d[c]
            for r in range(ns):
                out[row[r]] += w[r]

    weight_vector = _weight_vector
    gather_child = _gather_child_nb
    gather_parent = _gather_parent_nb
    det_weight = _det_weight_nb
    row_entropies = _row_entropies_nb
    entropy_flat = _entropy_flat_nb
    xlogx_sum = _xlogx_sum_nb
    scatter_acc = _scatter_acc_nb
else:
    weight_vector = _weight_vector_np
    gather_child = _gather_child_np
    gather_parent = _gather_parent_np
    det_weight = _det_weight_np
    row_entropies = _row_entropies_np
    entropy_flat = _entropy_flat_np
    xlogx_sum = _xlogx_sum_np
    scatter_acc = _scatter_acc_np


# expose both paths for benchmarks and equivalence tests
numpy_impls = {
    "weight_vector": _weight_vector_np,
    "gather_child": _gather_child_np,
    "gather_parent": _gather_parent_np,
    "det_weight": _det_weight_np,
    "row_entropies": _row_entropies_np,
    "entropy_flat": _entropy_flat_np,
    "xlogx_sum": _xlogx_sum_np,
    "scatter_acc": _scatter_acc_np,
}

active_impls = {
    "weight_vector": weight_vector,
    "gather_child": gather_child,
    "gather_parent": gather_parent,
    "det_weight": det_weight,
    "row_entropies": row_entropies,
    "entropy_flat": entropy_flat,
    "xlogx_sum": xlogx_sum,
    "scatter_acc": scatter_acc,
}
