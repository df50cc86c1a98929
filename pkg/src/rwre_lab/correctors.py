"""Closed-loop function algebra on the shift digraph.

On a periodic environment every quotient cycle is a genuine closed loop,
so the class of admissible edge functions collapses to discrete gradients
of state potentials. This module verifies the closed-loop law via a
spanning-tree cycle basis, reconstructs potentials, evaluates path sums
from common ancestors, and certifies sublinear path growth through the
maximum mean cycle.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .chain import WordKernel, strongly_connected
from .errors import NonGradient, NotIrreducible, ShapeMismatch, Unreachable

LOOP_TOL = 1e-10


@dataclass(frozen=True)
class LoopReport:
    """Fundamental-cycle sums of an edge function over a spanning tree."""

    cycle_edges: tuple  # ((state, letter), ...) one non-tree edge per cycle
    cycle_sums: np.ndarray
    max_abs_sum: float
    passed: bool


def _check_table(f: np.ndarray, kernel: WordKernel) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != kernel.prob.shape:
        raise ShapeMismatch(f"table shape {f.shape} does not match kernel")
    if not np.all(np.isfinite(f)):
        raise ShapeMismatch("table has non-finite entries")
    return f


def gradient_of(h: np.ndarray, kernel: WordKernel) -> np.ndarray:
    """Discrete gradient table F(state, letter) = h(shift) - h(state)."""
    h = np.asarray(h, dtype=float)
    if h.shape != (kernel.n_states,):
        raise ShapeMismatch(f"potential shape {h.shape} does not match kernel")
    return h[kernel.succ] - h[:, None]


def _spanning_tree_potential(f: np.ndarray, kernel: WordKernel):
    """Accumulate f along a breadth-first spanning tree from state 0.

    Tree edges are explored in (state index, letter index) order, following
    shift edges forward and backward. Returns (h, non_tree_edges) where
    each non-tree edge is a (state, letter) pair.
    """
    n, r = kernel.prob.shape
    h = np.full(n, np.nan)
    h[0] = 0.0
    in_tree = np.zeros((n, r), dtype=bool)
    # incoming edges per state, in deterministic order
    incoming: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for s in range(n):
        for z in range(r):
            incoming[kernel.succ[s, z]].append((s, z))
    queue = deque([0])
    while queue:
        s = queue.popleft()
        for z in range(r):
            t = kernel.succ[s, z]
            if np.isnan(h[t]):
                h[t] = h[s] + f[s, z]
                in_tree[s, z] = True
                queue.append(t)
        for u, z in incoming[s]:
            if np.isnan(h[u]):
                h[u] = h[s] - f[u, z]
                in_tree[u, z] = True
                queue.append(u)
    if np.isnan(h).any():
        raise NotIrreducible("shift digraph is not connected")
    non_tree = [(s, z) for s in range(n) for z in range(r) if not in_tree[s, z]]
    return h, non_tree


def verify_class_k(f: np.ndarray, kernel: WordKernel) -> LoopReport:
    """Check the closed-loop law: every fundamental cycle sum vanishes."""
    f = _check_table(f, kernel)
    h, non_tree = _spanning_tree_potential(f, kernel)
    sums = np.array([f[s, z] - (h[kernel.succ[s, z]] - h[s]) for s, z in non_tree])
    max_abs = float(np.max(np.abs(sums))) if len(sums) else 0.0
    return LoopReport(cycle_edges=tuple(non_tree), cycle_sums=sums,
                      max_abs_sum=max_abs, passed=max_abs <= LOOP_TOL)


def fit_potential(f: np.ndarray, kernel: WordKernel) -> np.ndarray:
    """Reconstruct a potential h with gradient f, gauge-fixed h(0) = 0.

    Raises NonGradient with the worst edge when some non-tree residual
    exceeds the loop tolerance.
    """
    f = _check_table(f, kernel)
    h, non_tree = _spanning_tree_potential(f, kernel)
    worst_edge, worst = None, 0.0
    for s, z in non_tree:
        resid = abs(f[s, z] - (h[kernel.succ[s, z]] - h[s]))
        if resid > worst:
            worst_edge, worst = (s, z), resid
    if worst > LOOP_TOL:
        raise NonGradient(f"edge {worst_edge} has cycle residual {worst:.3e}")
    return h


def _path_sums_from(f: np.ndarray, kernel: WordKernel, source: int) -> np.ndarray:
    """Sum of f along some directed path from source to every state."""
    n, r = kernel.prob.shape
    total = np.full(n, np.nan)
    total[source] = 0.0
    queue = deque([source])
    while queue:
        s = queue.popleft()
        for z in range(r):
            t = kernel.succ[s, z]
            if np.isnan(total[t]):
                total[t] = total[s] + f[s, z]
                queue.append(t)
    return total


def path_sum_f(f: np.ndarray, kernel: WordKernel, from_state: int,
               to_state, ancestor: int = 0) -> float:
    """Common-ancestor path sum: (ancestor -> target) minus (ancestor -> source).

    ``to_state`` is a state index or an (offset coords, letter word) pair.
    Well-defined independently of the ancestor and the paths chosen because
    the edge function passes the closed-loop check.
    """
    f = _check_table(f, kernel)
    report = verify_class_k(f, kernel)
    if not report.passed:
        raise NonGradient(f"closed-loop check fails: max cycle sum {report.max_abs_sum:.3e}")
    if not isinstance(to_state, (int, np.integer)):
        offset, word = to_state
        to_state = kernel.state_index(kernel.env.offset_index(offset), word)
    sums = _path_sums_from(f, kernel, ancestor)
    if np.isnan(sums[from_state]) or np.isnan(sums[int(to_state)]):
        raise Unreachable(f"no path from ancestor {ancestor} to both endpoints")
    return float(sums[int(to_state)] - sums[from_state])


@dataclass(frozen=True)
class GrowthReport:
    """Normalized extremal path sums g(n) and the max mean cycle limit."""

    g: np.ndarray = field(repr=False)
    max_mean_cycle: float


def max_path_growth(f: np.ndarray, kernel: WordKernel, n_max: int) -> GrowthReport:
    """Max-plus dynamics: g(n) = n^{-1} max over length-n paths of |sum f|.

    The reported maximum mean cycle is the larger of the signed max mean
    cycles of f and -f (Karp's recurrence), which is the n -> infinity
    limit of g(n).
    """
    f = _check_table(f, kernel)
    n, r = kernel.prob.shape
    hi = np.zeros(n)
    lo = np.zeros(n)
    g = np.empty(n_max)
    for step in range(1, n_max + 1):
        hi = np.max(f + hi[kernel.succ], axis=1)
        lo = np.min(f + lo[kernel.succ], axis=1)
        g[step - 1] = max(hi.max(), -lo.min()) / step
    mmc = max(_karp_max_mean_cycle(f, kernel), _karp_max_mean_cycle(-f, kernel))
    return GrowthReport(g=g, max_mean_cycle=mmc)


def _karp_max_mean_cycle(f: np.ndarray, kernel: WordKernel) -> float:
    """Karp's recurrence for the maximum mean cycle of the shift digraph."""
    if not strongly_connected(kernel):
        raise NotIrreducible("max mean cycle needs a strongly connected digraph")
    n = kernel.n_states
    d = np.full((n + 1, n), -np.inf)
    d[0, :] = 0.0
    for k in range(1, n + 1):
        best = f + d[k - 1][kernel.succ]
        d[k] = np.max(best, axis=1)
    with np.errstate(invalid="ignore"):
        ratios = (d[n][None, :] - d[:n]) / (n - np.arange(n))[:, None]
    per_state = np.nanmin(np.where(np.isfinite(ratios), ratios, np.nan), axis=0)
    return float(np.nanmax(per_state))
