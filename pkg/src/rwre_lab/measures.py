"""Measures on word states: stationary laws, edge measures, empirical measures.

An edge measure is a joint probability alpha(state, letter); its source
marginal sums over letters and its target marginal pushes mass along the
shift successors. Stationarity of a word measure is encoded as equality of
the two marginals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .chain import WordKernel, build_word_chain, strongly_connected
from .env import PeriodicEnvironment
from .errors import NotIrreducible, PathTooShort, ShapeMismatch, ZeroMassState

STATIONARY_TOL = 1e-12


@dataclass(frozen=True)
class WalkPath:
    """A quenched walk realization: start point plus a sequence of letters."""

    start: tuple[int, ...]
    letters: np.ndarray  # indices into the environment's step range

    def positions(self, env: PeriodicEnvironment) -> np.ndarray:
        """Lattice positions X_0..X_N (partial sums of the steps)."""
        steps = env.range.as_array()[self.letters]
        out = np.zeros((len(self.letters) + 1, env.d), dtype=np.int64)
        out[0] = self.start
        np.cumsum(steps, axis=0, out=out[1:])
        out[1:] += np.asarray(self.start, dtype=np.int64)
        return out


def _solve_stationary(p: np.ndarray) -> np.ndarray:
    """Unique solution of mu P = mu, sum mu = 1 for an irreducible P."""
    n = p.shape[0]
    a = p.T - np.eye(n)
    a[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    mu = np.linalg.solve(a, b)
    mu = np.clip(mu, 0.0, None)
    return mu / mu.sum()


def stationary_measure(kernel: WordKernel) -> np.ndarray:
    """Stationary law of the word chain (Cesaro solution for periodic chains)."""
    if not strongly_connected(kernel):
        raise NotIrreducible("word chain support is not strongly connected")
    mu = _solve_stationary(kernel.dense())
    resid = np.abs(apply_kernel(mu, kernel) - mu).sum()
    if resid > STATIONARY_TOL:
        # one fixed-point polish pass handles marginally conditioned solves
        mu = apply_kernel(mu, kernel)
        mu = mu / mu.sum()
    return mu


def apply_kernel(mu: np.ndarray, kernel: WordKernel) -> np.ndarray:
    """Push a word measure one step through the kernel (mu K)."""
    out = np.zeros_like(mu)
    np.add.at(out, kernel.succ.ravel(), (mu[:, None] * kernel.prob).ravel())
    return out


def environment_stationary(env: PeriodicEnvironment) -> np.ndarray:
    """Stationary law of the environment chain on torus points.

    Defined as the linear-solve (Cesaro) solution, which exists and is
    unique for irreducible chains regardless of period.
    """
    n = env.n_cells
    steps = env.range.as_array()
    p = np.zeros((n, n))
    for u in range(n):
        coords = np.asarray(env.offset_coords(u), dtype=np.int64)
        for z in range(len(steps)):
            p[u, env.offset_index(coords + steps[z])] += env.cells[u, z]
    n_comp, _ = connected_components(csr_matrix(p > 0), directed=True,
                                     connection="strong")
    if n_comp != 1:
        raise NotIrreducible("environment chain is not irreducible")
    pi = _solve_stationary(p)
    if np.any(pi <= 0):
        raise NotIrreducible("environment stationary law has a zero entry")
    return pi


def empirical_word_measure(path: WalkPath, env: PeriodicEnvironment, ell: int,
                           n: int | None = None) -> np.ndarray:
    """Empirical measure of (walker offset, next ell steps) along a path."""
    kernel = build_word_chain(env, ell)
    n_letters = len(path.letters)
    if n is None:
        n = n_letters - ell
    if n < 1 or n + ell - 1 > n_letters:
        raise PathTooShort(f"path of {n_letters} steps too short for n={n}, ell={ell}")
    positions = path.positions(env)
    r = len(env.range)
    offsets = np.array([env.offset_index(positions[k]) for k in range(n)],
                       dtype=np.int64)
    word_ints = np.zeros(n, dtype=np.int64)
    for i in range(ell):
        word_ints = word_ints * r + path.letters[i:i + n]
    states = offsets * r**ell + word_ints
    weights = np.bincount(states, minlength=kernel.n_states).astype(float)
    return weights / n


def restrict_level(mu: np.ndarray, kernel: WordKernel, ell_prime: int) -> np.ndarray:
    """Pushforward of a level-ell word measure under word truncation."""
    ell = kernel.ell
    if not 1 <= ell_prime <= ell:
        raise ShapeMismatch(f"cannot restrict level {ell} to level {ell_prime}")
    if mu.shape != (kernel.n_states,):
        raise ShapeMismatch(f"measure shape {mu.shape} does not match kernel")
    r = kernel.n_letters
    out = np.zeros(len(mu) // r**(ell - ell_prime))
    prefix_ints = np.zeros(kernel.n_states, dtype=np.int64)
    for i in range(ell_prime):
        prefix_ints = prefix_ints * r + kernel.state_word[:, i]
    targets = kernel.state_offset * r**ell_prime + prefix_ints
    np.add.at(out, targets, mu)
    return out


def edge_to_kernel(alpha: np.ndarray, kernel: WordKernel):
    """Decompose an edge measure into (source marginal, conditional kernel).

    States with zero source mass get the base kernel's row by convention.
    """
    if alpha.shape != kernel.prob.shape:
        raise ShapeMismatch(f"edge measure shape {alpha.shape} does not match kernel")
    mu = alpha.sum(axis=1)
    q = kernel.prob.copy()
    live = mu > 0
    q[live] = alpha[live] / mu[live, None]
    dead_rows = ~live & (np.abs(alpha).sum(axis=1) > 0)
    if dead_rows.any():
        raise ZeroMassState(f"state {int(np.flatnonzero(dead_rows)[0])} has "
                            "zero mass but a nonzero edge row")
    return mu, q


def edge_marginals(alpha: np.ndarray, kernel: WordKernel):
    """Source and shift-target marginals of an edge measure."""
    mu = alpha.sum(axis=1)
    nu = np.zeros_like(mu)
    np.add.at(nu, kernel.succ.ravel(), alpha.ravel())
    return mu, nu


def edge_measure_from_kernel(mu: np.ndarray, q: np.ndarray) -> np.ndarray:
    """The joint mu x q as an edge measure table."""
    return mu[:, None] * q


def mean_step(alpha: np.ndarray, kernel: WordKernel) -> np.ndarray:
    """Mean step vector of an edge measure."""
    steps = kernel.env.range.as_array().astype(float)
    return alpha.sum(axis=0) @ steps


def drift(kernel: WordKernel, mu: np.ndarray | None = None) -> np.ndarray:
    """Mean step under the stationary law (or a supplied word measure)."""
    if mu is None:
        mu = stationary_measure(kernel)
    return mean_step(edge_measure_from_kernel(mu, kernel.prob), kernel)
