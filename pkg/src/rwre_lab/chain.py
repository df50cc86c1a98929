"""The word chain: states (torus offset, last-ell-steps word), kernel p+.

State enumeration is bit-exact: offset in row-major torus order, then the
word as a base-|R| integer with the most recent letter least significant.
Transitions consume the oldest letter and append a fresh one; the step
probability is read at the walker's current cell, i.e. offset plus the sum
of the word.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .env import PeriodicEnvironment
from .errors import NoConvergence, NotIrreducible, ShapeMismatch, StateBudgetExceeded

DEFAULT_STATE_CAP = 10**6
PF_RESIDUAL_TOL = 1e-13
PF_MAX_ITER = 10**5
DENSE_REFINE_CAP = 2000


@dataclass(frozen=True)
class WordKernel:
    """Row-stochastic kernel of the word chain at a fixed word length."""

    env: PeriodicEnvironment
    ell: int
    succ: np.ndarray = field(repr=False)   # (S, R) successor state indices
    prob: np.ndarray = field(repr=False)   # (S, R) transition probabilities
    state_offset: np.ndarray = field(repr=False)  # (S,) torus offset index
    state_word: np.ndarray = field(repr=False)    # (S, ell) letter indices

    @property
    def n_states(self) -> int:
        return self.succ.shape[0]

    @property
    def n_letters(self) -> int:
        return self.succ.shape[1]

    def state_index(self, offset_idx: int, letters) -> int:
        r = self.n_letters
        word = 0
        for a in letters:
            word = word * r + int(a)
        return offset_idx * r**self.ell + word

    def dense(self) -> np.ndarray:
        """The S x S transition matrix."""
        return scatter_rows(self.succ, self.prob)

    def walker_cell(self, state: int) -> int:
        """Torus cell at which the next step of this state is drawn."""
        u = self.env.offset_coords(int(self.state_offset[state]))
        steps = self.env.range.as_array()
        x = np.asarray(u, dtype=np.int64) + steps[self.state_word[state]].sum(axis=0)
        return self.env.offset_index(x)


def scatter_rows(succ: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Expand (S, R) row data into a dense S x S matrix."""
    n = succ.shape[0]
    out = np.zeros((n, n))
    rows = np.repeat(np.arange(n), succ.shape[1])
    np.add.at(out, (rows, succ.ravel()), values.ravel())
    return out


def build_word_chain(env: PeriodicEnvironment, ell: int,
                     state_cap: int = DEFAULT_STATE_CAP) -> WordKernel:
    """Construct the word chain of length-ell words over the environment."""
    if ell < 1:
        raise StateBudgetExceeded(f"word length must be >= 1, got {ell}")
    r = len(env.range)
    n_states = env.n_cells * r**ell
    if n_states > state_cap:
        raise StateBudgetExceeded(f"{n_states} states exceeds cap {state_cap}")

    steps = env.range.as_array()
    state_offset = np.empty(n_states, dtype=np.int64)
    state_word = np.empty((n_states, ell), dtype=np.int64)
    succ = np.empty((n_states, r), dtype=np.int64)
    prob = np.empty((n_states, r))

    for s in range(n_states):
        offset_idx, word_int = divmod(s, r**ell)
        letters = []
        w = word_int
        for _ in range(ell):
            w, a = divmod(w, r)
            letters.append(a)
        letters.reverse()
        state_offset[s] = offset_idx
        state_word[s] = letters

        u = np.asarray(env.offset_coords(offset_idx), dtype=np.int64)
        cell = env.offset_index(u + steps[letters].sum(axis=0))
        next_offset = env.offset_index(u + steps[letters[0]])
        tail_int = 0
        for a in letters[1:]:
            tail_int = tail_int * r + a
        for z in range(r):
            succ[s, z] = next_offset * r**ell + tail_int * r + z
            prob[s, z] = env.cells[cell, z]

    return WordKernel(env=env, ell=ell, succ=succ, prob=prob,
                      state_offset=state_offset, state_word=state_word)


def strongly_connected(kernel: WordKernel) -> bool:
    """True iff the support digraph is a single strongly connected component."""
    n = kernel.n_states
    mask = kernel.prob > 0
    rows = np.repeat(np.arange(n), kernel.n_letters)[mask.ravel()]
    cols = kernel.succ.ravel()[mask.ravel()]
    graph = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    n_comp, _ = connected_components(graph, directed=True, connection="strong")
    return n_comp == 1


def tilt_kernel(kernel: WordKernel, f: np.ndarray) -> np.ndarray:
    """Nonnegative matrix M(z, z') = p+(z, z') exp(f(z)), source-state tilt."""
    f = np.asarray(f, dtype=float)
    if f.shape != (kernel.n_states,):
        raise ShapeMismatch(
            f"tilt function shape {f.shape} does not match {kernel.n_states} states")
    return kernel.dense() * np.exp(f)[:, None]


def pf_log_eigenvalue(m: np.ndarray, residual_tol: float = 1e-12,
                      max_iter: int = PF_MAX_ITER):
    """Log spectral radius and positive right eigenvector of a nonnegative matrix.

    Power iteration on the diagonally shifted matrix (the shift keeps the
    eigenvector and makes periodic supports converge), with a dense
    eigensolver refinement for matrices up to 2000 x 2000. The eigenvector
    is normalized to max entry 1.

    Returns (log_radius, eigvec).
    """
    m = np.asarray(m, dtype=float)
    n = m.shape[0]
    graph = csr_matrix(m > 0)
    n_comp, _ = connected_components(graph, directed=True, connection="strong")
    if n_comp != 1:
        raise NotIrreducible(f"support digraph has {n_comp} strong components")

    shift = m.max()
    shifted = m + shift * np.eye(n)
    v = np.ones(n)
    lam = None
    for _ in range(max_iter):
        w = shifted @ v
        lam = w.max()
        w /= lam
        if np.max(np.abs(w - v)) <= PF_RESIDUAL_TOL:
            v = w
            break
        v = w

    if n <= DENSE_REFINE_CAP:
        eigvals, eigvecs = scipy.linalg.eig(shifted)
        k = int(np.argmax(eigvals.real))
        lam = float(eigvals[k].real)
        cand = np.abs(eigvecs[:, k].real)
        if cand.min() > 0:
            v = cand / cand.max()
        # a few polish steps to drive the residual to roundoff
        for _ in range(5):
            w = shifted @ v
            lam = float(w @ v / (v @ v))
            v = w / w.max()

    v = v / v.max()
    residual = np.max(np.abs(m @ v - (lam - shift) * v))
    if residual > residual_tol * np.max(np.abs(v)) * max(1.0, abs(lam - shift)):
        raise NoConvergence(f"eigen residual {residual:.3e} above target")
    return float(np.log(lam - shift)), v


def doob_transform(kernel: WordKernel, f: np.ndarray) -> WordKernel:
    """Optimal tilted kernel q*(z, z') = M(z, z') h*(z') / (e^L h*(z))."""
    m = tilt_kernel(kernel, f)
    log_lam, h = pf_log_eigenvalue(m)
    lam = np.exp(log_lam)
    q = kernel.prob * np.exp(np.asarray(f, dtype=float))[:, None]
    q = q * h[kernel.succ] / (lam * h[:, None])
    row_sums = q.sum(axis=1)
    if np.max(np.abs(row_sums - 1.0)) > 1e-10:
        raise NoConvergence(
            f"doob rows off stochastic by {np.max(np.abs(row_sums - 1.0)):.3e}")
    q = q / row_sums[:, None]
    return WordKernel(env=kernel.env, ell=kernel.ell, succ=kernel.succ,
                      prob=q, state_offset=kernel.state_offset,
                      state_word=kernel.state_word)
