"""Relative entropy of kernel pairs and the prefix/specific entropy ladder."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .chain import WordKernel
from .env import PeriodicEnvironment
from .errors import ShapeMismatch
from .measures import stationary_measure


@dataclass(frozen=True)
class EntropyValue:
    """Extended-real entropy: finite float, or +inf with the violating pairs."""

    value: float
    support_violations: tuple = ()

    @property
    def is_finite(self) -> bool:
        return not self.support_violations

    def __float__(self) -> float:
        return float(self.value) if self.is_finite else float("inf")


def _row_entropy(q_row: np.ndarray, p_row: np.ndarray) -> float:
    """H(q | p) for two probability vectors with supp q within supp p."""
    mask = q_row > 0
    q = q_row[mask]
    p = p_row[mask]
    ratio = q / p
    logs = np.where((ratio > 0.5) & (ratio < 2.0), np.log1p((q - p) / p),
                    np.log(ratio))
    return float(q @ logs)


def kernel_entropy(mu: np.ndarray, q: np.ndarray, p: np.ndarray) -> EntropyValue:
    """Relative entropy H(mu x q | mu x p) of two kernels on the same states.

    Infinite exactly when q puts mass where p vanishes on a state with
    positive mu-weight; those (state, letter) pairs are reported.
    """
    mu = np.asarray(mu, dtype=float)
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    if q.shape != p.shape or mu.shape != (q.shape[0],):
        raise ShapeMismatch(f"shapes mu={mu.shape} q={q.shape} p={p.shape}")
    bad = (q > 0) & (p == 0) & (mu > 0)[:, None]
    if bad.any():
        pairs = tuple(map(tuple, np.argwhere(bad)))
        return EntropyValue(value=float("inf"), support_violations=pairs)
    total = 0.0
    for s in np.flatnonzero(mu > 0):
        total += mu[s] * _row_entropy(q[s], p[s])
    return EntropyValue(value=total)


@dataclass(frozen=True)
class FiniteMemoryModel:
    """A stationary finite-memory walk model on a word chain.

    ``kernel`` is the environment word chain at the model's word length,
    ``q`` the model's next-step kernel on those states, ``mu`` its
    stationary word law, and ``memory`` the number of past steps the model
    actually depends on (0 for cell-wise i.i.d. draws).
    """

    kernel: WordKernel
    q: np.ndarray = field(repr=False)
    mu: np.ndarray = field(repr=False)
    memory: int = 1

    @classmethod
    def from_kernel(cls, kernel: WordKernel, q: np.ndarray, memory: int | None = None):
        holder = WordKernel(env=kernel.env, ell=kernel.ell, succ=kernel.succ,
                            prob=q, state_offset=kernel.state_offset,
                            state_word=kernel.state_word)
        mu = stationary_measure(holder)
        return cls(kernel=kernel, q=np.asarray(q, dtype=float), mu=mu,
                   memory=kernel.ell if memory is None else memory)


@dataclass(frozen=True)
class PrefixEntropyReport:
    """Per-step conditional entropies and their running means.

    ``terms[i]`` conditions the next step on the walker's cell and i past
    steps; terms are nondecreasing in i and coincide with the kernel
    entropy once i reaches the model's memory.
    """

    terms: np.ndarray
    limit: float

    @property
    def partial_sums(self) -> np.ndarray:
        return np.cumsum(self.terms)

    @property
    def partial_means(self) -> np.ndarray:
        return self.partial_sums / np.arange(1, len(self.terms) + 1)


def prefix_entropy(model: FiniteMemoryModel, env: PeriodicEnvironment,
                   n: int) -> PrefixEntropyReport:
    """Conditional next-step entropies of a stationary finite-memory model.

    Term i is the expected relative entropy of the model's next-step law,
    conditioned on the walker's cell and the last i steps, against the
    environment row at that cell. The sum of the first n terms is the
    entropy of the n-step marginal against the quenched walk.
    """
    kernel = model.kernel
    level = kernel.ell
    cells = np.array([kernel.walker_cell(s) for s in range(kernel.n_states)])
    p_rows = env.cells[cells]

    limit = float(kernel_entropy(model.mu, model.q, p_rows))

    terms = np.empty(n)
    for i in range(n):
        if i >= level:
            terms[i] = limit
            continue
        groups: dict[tuple, list[int]] = {}
        for s in range(kernel.n_states):
            key = (int(cells[s]), tuple(kernel.state_word[s, level - i:]))
            groups.setdefault(key, []).append(s)
        total = 0.0
        for (cell, _suffix), members in groups.items():
            w = model.mu[members]
            mass = w.sum()
            if mass <= 0:
                continue
            mixed = (w @ model.q[members]) / mass
            total += mass * _row_entropy(mixed, env.cells[cell])
        terms[i] = total
    return PrefixEntropyReport(terms=terms, limit=limit)


def jensen_gap(g: np.ndarray, mu: np.ndarray, rho: np.ndarray) -> float:
    """Slack in the interchange of log-integral and integral.

    Returns  int_Y log int_X e^g dmu drho  -  log int_X e^{int_Y g drho} dmu,
    which is nonnegative.
    """
    g = np.asarray(g, dtype=float)
    mu = np.asarray(mu, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if g.shape != (len(mu), len(rho)):
        raise ShapeMismatch(f"table shape {g.shape} does not match ({len(mu)}, {len(rho)})")
    outer = float(rho @ logsumexp(g, axis=0, b=mu[:, None]))
    inner = float(logsumexp(g @ rho, b=mu))
    return outer - inner
