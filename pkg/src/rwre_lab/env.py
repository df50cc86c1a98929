"""Periodic lattice environments: step ranges, torus cells, validation.

An environment assigns to every cell of a rectangular torus a strictly
positive step distribution over a shared range of integer displacements.
Transition probabilities at a lattice point are resolved by reducing the
point modulo the torus periods.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateStep,
    NonPositiveEntry,
    NotStochastic,
)

ROW_SUM_TOL = 1e-9
DEFAULT_MAX_STEP = 8


@dataclass(frozen=True)
class StepRange:
    """Ordered set of distinct integer step vectors in Z^d."""

    steps: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if not self.steps:
            raise DimensionMismatch("step range is empty")
        d = len(self.steps[0])
        if any(len(z) != d for z in self.steps):
            raise DimensionMismatch("steps have inconsistent dimension")
        if len(set(self.steps)) != len(self.steps):
            raise DuplicateStep(f"duplicate steps in {self.steps}")

    @property
    def d(self) -> int:
        return len(self.steps[0])

    def __len__(self) -> int:
        return len(self.steps)

    def index(self, z) -> int:
        return self.steps.index(tuple(int(c) for c in z))

    def as_array(self) -> np.ndarray:
        return np.array(self.steps, dtype=np.int64)


@dataclass(frozen=True)
class PeriodicEnvironment:
    """Finite quotient of the environment space: a torus of cells.

    ``cells`` has shape (n_cells, len(range)); row u lists the step
    probabilities at the torus point with row-major index u.
    """

    d: int
    periods: tuple[int, ...]
    range: StepRange
    cells: np.ndarray = field(repr=False)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.periods))

    def offset_index(self, x) -> int:
        u = tuple(int(c) % L for c, L in zip(x, self.periods))
        return int(np.ravel_multi_index(u, self.periods))

    def offset_coords(self, idx: int) -> tuple[int, ...]:
        return tuple(int(c) for c in np.unravel_index(idx, self.periods))

    def shift_offset(self, idx: int, z) -> int:
        u = self.offset_coords(idx)
        return self.offset_index(tuple(a + b for a, b in zip(u, z)))


def _renormalize_row(row: np.ndarray) -> np.ndarray:
    """Divide by the row sum, then pin the largest entry so the sum is 1.0."""
    q = row / row.sum()
    imax = int(np.argmax(q))
    mask = np.ones(len(q), dtype=bool)
    mask[imax] = False
    q[imax] = 1.0 - float(np.sum(q[mask]))
    return q


def validate_environment(config: dict, max_step: int = DEFAULT_MAX_STEP) -> PeriodicEnvironment:
    """Parse and validate an environment config document.

    Raises NotStochastic, NonPositiveEntry, DuplicateStep, or
    DimensionMismatch on malformed input. Rows are renormalized exactly
    after the stochasticity check so each sums to 1.0 to the last bit.
    """
    try:
        d = int(config["d"])
        periods = tuple(int(L) for L in config["periods"])
        steps = tuple(tuple(int(c) for c in z) for z in config["range"])
        raw_cells = config["cells"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DimensionMismatch(f"malformed config document: {exc}") from None

    if d < 1:
        raise DimensionMismatch(f"dimension must be >= 1, got {d}")
    if len(periods) != d:
        raise DimensionMismatch(f"{len(periods)} periods for dimension {d}")
    if any(L < 1 for L in periods):
        raise DimensionMismatch(f"periods must be positive, got {periods}")

    rng = StepRange(steps)
    if rng.d != d:
        raise DimensionMismatch(f"steps of dimension {rng.d} in dimension-{d} environment")
    if int(np.max(np.abs(rng.as_array()))) > max_step:
        raise DimensionMismatch(f"step exceeds |z|_inf bound {max_step}")

    n_cells = int(np.prod(periods))
    cells = np.empty((n_cells, len(rng)), dtype=float)
    seen = np.zeros(n_cells, dtype=bool)
    for key, probs in raw_cells.items():
        u = tuple(int(c) for c in str(key).split(","))
        if len(u) != d:
            raise DimensionMismatch(f"cell key {key!r} has {len(u)} coordinates, expected {d}")
        if any(c < 0 or c >= L for c, L in zip(u, periods)):
            raise DimensionMismatch(f"cell key {key!r} outside torus {periods}")
        idx = int(np.ravel_multi_index(u, periods))
        row = np.asarray(probs, dtype=float)
        if row.shape != (len(rng),):
            raise DimensionMismatch(
                f"cell {key!r} lists {row.size} probabilities for {len(rng)} steps")
        if np.any(row <= 0.0):
            raise NonPositiveEntry(f"cell {key!r} has a non-positive probability")
        if abs(row.sum() - 1.0) > ROW_SUM_TOL:
            raise NotStochastic(f"cell {key!r} row sums to {row.sum():.12g}")
        cells[idx] = _renormalize_row(row)
        seen[idx] = True
    if not seen.all():
        missing = np.flatnonzero(~seen)[0]
        raise DimensionMismatch(f"no probabilities for torus cell index {missing}")

    return PeriodicEnvironment(d=d, periods=periods, range=rng, cells=cells)


def emit_environment(env: PeriodicEnvironment) -> dict:
    """Inverse of validate_environment, suitable for JSON serialization."""
    cells = {}
    for idx in range(env.n_cells):
        key = ",".join(str(c) for c in env.offset_coords(idx))
        cells[key] = [float(p) for p in env.cells[idx]]
    return {
        "d": env.d,
        "periods": list(env.periods),
        "range": [list(z) for z in env.range.steps],
        "cells": cells,
    }


def _integer_echelon(vectors: list[list[int]], d: int) -> list[list[int]]:
    """Bring integer row vectors to echelon form with unimodular row ops."""
    rows = [list(map(int, v)) for v in vectors]
    pivot_rows: list[list[int]] = []
    for col in range(d):
        while True:
            nz = [i for i, r in enumerate(rows) if r[col] != 0]
            if not nz:
                break
            if len(nz) == 1:
                break
            nz.sort(key=lambda i: abs(rows[i][col]))
            i0 = nz[0]
            for i in nz[1:]:
                f = rows[i][col] // rows[i0][col]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[i0])]
        nz = [i for i, r in enumerate(rows) if r[col] != 0]
        if nz:
            pivot_rows.append(rows.pop(nz[0]))
    return pivot_rows


def check_span(rng: StepRange) -> bool:
    """True iff the additive group generated by the steps is all of Z^d."""
    d = rng.d
    rows = _integer_echelon([list(z) for z in rng.steps], d)
    if len(rows) < d:
        return False
    det = 1
    for col in range(d):
        det *= abs(rows[col][col])
    return det == 1


def _in_step_lattice(rng: StepRange, target: tuple[int, ...]) -> bool:
    """Membership of target in the integer lattice generated by the steps."""
    d = rng.d
    rows = _integer_echelon([list(z) for z in rng.steps], d)
    t = list(target)
    for r in rows:
        col = next(i for i, c in enumerate(r) if c != 0)
        if t[col] % r[col] == 0:
            f = t[col] // r[col]
            t = [a - f * b for a, b in zip(t, r)]
    return all(c == 0 for c in t)


REACHABLE = "reachable"
UNREACHABLE_BUDGET = "unreachable-within-budget"
UNREACHABLE_PROVEN = "proven-unreachable"


@dataclass(frozen=True)
class EllipticityReport:
    """Per canonical direction: reachability by nonnegative step sums."""

    directions: dict
    max_len: int

    @property
    def all_reachable(self) -> bool:
        return all(v["status"] == REACHABLE for v in self.directions.values())


def check_ellipticity(env: PeriodicEnvironment, max_len: int = 8,
                      node_budget: int = 200_000) -> EllipticityReport:
    """Breadth-first search for witness step sequences reaching +/- e_i.

    A direction left unreached within the path-length budget is reported as
    unreachable-within-budget, or proven-unreachable when the step lattice
    itself misses the target.
    """
    if max_len < 1:
        raise DimensionMismatch(f"max_len must be >= 1, got {max_len}")
    d = env.d
    steps = env.range.as_array()
    targets = {}
    for i in range(d):
        for sign, label in ((1, f"+e{i + 1}"), (-1, f"-e{i + 1}")):
            e = tuple(sign * int(i == j) for j in range(d))
            targets[label] = e

    origin = tuple(0 for _ in range(d))
    parent: dict[tuple[int, ...], tuple[tuple[int, ...], int]] = {origin: (origin, -1)}
    depth = {origin: 0}
    queue = deque([origin])
    truncated = False
    while queue:
        x = queue.popleft()
        if depth[x] >= max_len:
            continue
        for j in range(len(steps)):
            y = tuple(int(a + b) for a, b in zip(x, steps[j]))
            if y not in parent:
                if len(parent) >= node_budget:
                    truncated = True
                    continue
                parent[y] = (x, j)
                depth[y] = depth[x] + 1
                queue.append(y)

    directions = {}
    for label, target in targets.items():
        if target in parent:
            witness = []
            x = target
            while x != origin:
                x, j = parent[x]
                witness.append(tuple(int(c) for c in steps[j]))
            witness.reverse()
            directions[label] = {"status": REACHABLE, "witness": witness,
                                 "length": len(witness)}
        elif not _in_step_lattice(env.range, target):
            directions[label] = {"status": UNREACHABLE_PROVEN, "witness": None,
                                 "length": None}
        else:
            directions[label] = {"status": UNREACHABLE_BUDGET, "witness": None,
                                 "length": None, "truncated": truncated}
    return EllipticityReport(directions=directions, max_len=max_len)


def cell_transition(env: PeriodicEnvironment, x) -> np.ndarray:
    """Step probabilities at lattice point x (reduced modulo the periods)."""
    return env.cells[env.offset_index(x)].copy()
