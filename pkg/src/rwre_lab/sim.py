"""Quenched walk simulation, exact rare-event oracles, importance sampling.

Randomness comes from counter-based Philox streams keyed by (seed, sample
index), so every sample is reproducible in isolation and results do not
depend on how samples are distributed over workers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import logsumexp

from .chain import WordKernel, build_word_chain, doob_transform, pf_log_eigenvalue, tilt_kernel
from .env import PeriodicEnvironment
from .errors import (
    DegenerateWeights,
    EnumerationBudgetExceeded,
    NoConvergence,
    TiltNotFound,
)
from .measures import WalkPath, stationary_measure

DEFAULT_ENUM_BUDGET = 1 << 20
SAMPLE_BLOCK = 5_000


@dataclass(frozen=True)
class SimConfig:
    """Replication plan for Monte Carlo runs."""

    n: int
    samples: int = 1
    seed: int = 0
    start: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.n < 1 or self.samples < 1:
            raise ValueError(f"need n >= 1 and samples >= 1, got {self.n}, {self.samples}")


def sample_rng(seed: int, sample_index: int) -> np.random.Generator:
    """Philox stream for one sample, independent of all other samples."""
    return np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1),
                                                     sample_index & (2**64 - 1)]))


def _start(env: PeriodicEnvironment, config: SimConfig) -> tuple[int, ...]:
    return config.start if config.start is not None else tuple(0 for _ in range(env.d))


def simulate_walk(env: PeriodicEnvironment, config: SimConfig,
                  sample_index: int = 0) -> WalkPath:
    """One quenched walk path; identical bytes for identical (seed, index)."""
    rng = sample_rng(config.seed, sample_index)
    uniforms = rng.random(config.n)
    cum = np.cumsum(env.cells, axis=1)
    start = _start(env, config)
    letters = np.empty(config.n, dtype=np.int64)
    steps = env.range.as_array()
    pos = np.asarray(start, dtype=np.int64)
    for k in range(config.n):
        u = env.offset_index(pos)
        letters[k] = int(np.searchsorted(cum[u], uniforms[k], side="right"))
        pos = pos + steps[letters[k]]
    return WalkPath(start=start, letters=letters)


def path_to_csv(path: WalkPath, env: PeriodicEnvironment) -> str:
    """CSV text: header k,z_1..z_d,u_1..u_d, one row per step."""
    d = env.d
    header = ",".join(["k"] + [f"z_{i+1}" for i in range(d)]
                      + [f"u_{i+1}" for i in range(d)])
    steps = env.range.as_array()[path.letters]
    positions = path.positions(env)[1:]
    lines = [header]
    for k in range(len(path.letters)):
        u = [str(int(c) % L) for c, L in zip(positions[k], env.periods)]
        lines.append(",".join([str(k + 1)] + [str(int(c)) for c in steps[k]] + u))
    return "\n".join(lines) + "\n"


def _map_blocks(fn, n_samples: int, workers: int = 1):
    """Apply fn to sample-index blocks; reduction order is fixed by index."""
    blocks = [(lo, min(lo + SAMPLE_BLOCK, n_samples))
              for lo in range(0, n_samples, SAMPLE_BLOCK)]
    if workers <= 1 or len(blocks) == 1:
        results = [fn(lo, hi) for lo, hi in blocks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda b: fn(*b), blocks))
    return np.concatenate(results)


def _simulate_word_sums(env: PeriodicEnvironment, kernel: WordKernel,
                        sim_kernel: np.ndarray, f: np.ndarray,
                        config: SimConfig, workers: int = 1):
    """Per sample: sum of f over n word-chain states and the log likelihood
    ratio of the base kernel against the simulation kernel.

    The first ell steps are drawn from the quenched walk; the remaining
    n - 1 transitions follow ``sim_kernel``.
    """
    ell = kernel.ell
    cum_cells = np.cumsum(env.cells, axis=1)
    cum_sim = np.cumsum(sim_kernel, axis=1)
    start = _start(env, config)
    steps = env.range.as_array()
    logratio_table = np.zeros_like(kernel.prob)
    live = sim_kernel > 0
    logratio_table[live] = np.log(kernel.prob[live]) - np.log(sim_kernel[live])

    def run(lo, hi):
        m = hi - lo
        out = np.empty((m, 2))
        for j in range(m):
            rng = sample_rng(config.seed, lo + j)
            u = rng.random(ell + config.n - 1)
            pos = np.asarray(start, dtype=np.int64)
            letters = []
            for k in range(ell):
                c = env.offset_index(pos)
                z = int(np.searchsorted(cum_cells[c], u[k], side="right"))
                letters.append(z)
                pos = pos + steps[z]
            s = kernel.state_index(env.offset_index(start), letters)
            fsum = f[s]
            logw = 0.0
            for k in range(config.n - 1):
                z = int(np.searchsorted(cum_sim[s], u[ell + k], side="right"))
                logw += logratio_table[s, z]
                s = int(kernel.succ[s, z])
                fsum += f[s]
            out[j] = (fsum, logw)
        return out

    return _map_blocks(run, config.samples, workers)


def mc_cgf(env: PeriodicEnvironment, f: np.ndarray, ell: int,
           config: SimConfig, workers: int = 1):
    """Monte Carlo estimate of n^{-1} log E[exp sum f] with jackknife SE."""
    kernel = build_word_chain(env, ell)
    f = np.asarray(f, dtype=float)
    data = _simulate_word_sums(env, kernel, kernel.prob, f, config, workers)
    log_y = data[:, 0]
    m = len(log_y)
    log_s = logsumexp(log_y)
    ess = float(np.exp(2 * log_s - logsumexp(2 * log_y)))
    if ess < 10:
        raise DegenerateWeights(f"effective sample size {ess:.2f} < 10")
    estimate = (log_s - np.log(m)) / config.n
    if m > 1:
        with np.errstate(divide="ignore"):
            log_loo = log_s + np.log1p(-np.exp(np.minimum(log_y - log_s, -1e-17)))
        loo = (log_loo - np.log(m - 1)) / config.n
        se = float(np.sqrt((m - 1) / m * np.sum((loo - loo.mean()) ** 2)))
    else:
        se = 0.0
    return float(estimate), se


def exact_rare_event(env: PeriodicEnvironment, f: np.ndarray, ell: int, n: int,
                     a: float, budget: int = DEFAULT_ENUM_BUDGET) -> float:
    """Exact quenched probability of {L_n(f) >= a} by path-weight summation.

    Sums over all letter sequences via dynamic programming on (state, sum)
    with exact rational probabilities; raises when the sum-value table
    would outgrow the budget.
    """
    kernel = build_word_chain(env, ell)
    f = np.asarray(f, dtype=float)
    r = kernel.n_letters
    if kernel.n_states * r**max(ell, 2) > budget and r ** (n + ell - 1) > budget:
        raise EnumerationBudgetExceeded(
            f"{r ** (n + ell - 1)} paths exceed budget {budget}")

    start = tuple(0 for _ in range(env.d))
    start_idx = env.offset_index(start)
    steps = env.range.as_array()
    # exact rational rows, normalized so each sums to exactly one
    cell_frac = []
    for row in env.cells:
        fr = [Fraction(float(p)) for p in row]
        total = sum(fr)
        cell_frac.append([p / total for p in fr])

    # distribution over initial states after the first ell quenched steps
    dist: dict[tuple[int, float], Fraction] = {}
    words: list[tuple[list[int], Fraction, np.ndarray]] = [
        ([], Fraction(1), np.asarray(start, dtype=np.int64))]
    for _ in range(ell):
        nxt = []
        for letters, p, pos in words:
            c = env.offset_index(pos)
            for z in range(r):
                nxt.append((letters + [z], p * cell_frac[c][z], pos + steps[z]))
        words = nxt
        if len(words) > budget:
            raise EnumerationBudgetExceeded(f"initial words exceed budget {budget}")
    for letters, p, _pos in words:
        s = kernel.state_index(start_idx, letters)
        key = (s, round(float(f[s]), 12))
        dist[key] = dist.get(key, Fraction(0)) + p

    cells = [kernel.walker_cell(s) for s in range(kernel.n_states)]
    for _ in range(n - 1):
        nxt: dict[tuple[int, float], Fraction] = {}
        for (s, total), p in dist.items():
            c = cells[s]
            for z in range(r):
                s2 = int(kernel.succ[s, z])
                key = (s2, round(total + float(f[s2]), 12))
                nxt[key] = nxt.get(key, Fraction(0)) + p * cell_frac[c][z]
        dist = nxt
        if len(dist) > budget:
            raise EnumerationBudgetExceeded(f"sum table exceeds budget {budget}")

    hit = Fraction(0)
    threshold = n * a - 1e-9
    for (s, total), p in dist.items():
        if total >= threshold:
            hit += p
    return float(hit)


def tilt_for_mean(kernel: WordKernel, f: np.ndarray, a: float,
                  t_max: float = 64.0) -> float:
    """Find t with stationary mean of f under the Doob transform of t*f == a."""
    f = np.asarray(f, dtype=float)

    def drift_f(t):
        q = doob_transform(kernel, t * f)
        mu = stationary_measure(q)
        return float(mu @ f) - a

    lo, hi = -1.0, 1.0
    try:
        while drift_f(lo) > 0:
            lo *= 2
            if lo < -t_max:
                raise TiltNotFound(f"target mean {a} below the reachable range")
        while drift_f(hi) < 0:
            hi *= 2
            if hi > t_max:
                raise TiltNotFound(f"target mean {a} above the reachable range")
    except NoConvergence:
        # the tilted eigenproblem degenerates before the target is bracketed
        raise TiltNotFound(f"target mean {a} outside the numerically "
                           "reachable range") from None
    return float(brentq(drift_f, lo, hi, xtol=1e-12))


def half_space_rate(kernel: WordKernel, f: np.ndarray, a: float,
                    t_max: float = 64.0) -> float:
    """Reference decay rate of {L_n(f) >= a}: sup_{t>=0} (t a - log-eigenvalue(t f))."""
    f = np.asarray(f, dtype=float)

    def neg(t):
        lam, _ = pf_log_eigenvalue(tilt_kernel(kernel, t * f))
        return -(t * a - lam)

    res = minimize_scalar(neg, bounds=(0.0, t_max), method="bounded",
                          options={"xatol": 1e-10})
    return float(max(0.0, -res.fun))


@dataclass(frozen=True)
class ImportanceEstimate:
    rate: float
    se: float
    tilt: float
    probability: float
    hits: int


def importance_rate(env: PeriodicEnvironment, f: np.ndarray, ell: int, a: float,
                    config: SimConfig, eps: float = 1e-3,
                    workers: int = 1) -> ImportanceEstimate:
    """Estimate the decay rate of {L_n(f) >= a} by exponential tilting.

    The simulation kernel is the Doob transform matched to mean a, mixed
    with the untilted kernel at weight eps to guard the support; weights
    are the exact likelihood ratios.
    """
    kernel = build_word_chain(env, ell)
    f = np.asarray(f, dtype=float)
    t_star = tilt_for_mean(kernel, f, a)
    q_star = doob_transform(kernel, t_star * f)
    sim_kernel = (1.0 - eps) * q_star.prob + eps * kernel.prob
    data = _simulate_word_sums(env, kernel, sim_kernel, f, config, workers)
    fsum, logw = data[:, 0], data[:, 1]
    hit = fsum >= config.n * a - 1e-12
    n_hits = int(hit.sum())
    if n_hits < 10:
        raise DegenerateWeights(f"only {n_hits} samples hit the event")
    logx = np.where(hit, logw, -np.inf)
    c = logx[hit].max()
    x = np.exp(logx - c)
    m = len(x)
    mean_x = float(x.mean())
    se_rel = float(x.std(ddof=1) / (mean_x * np.sqrt(m)))
    log_p = c + np.log(mean_x)
    probability = float(np.exp(log_p))
    rate = -(log_p) / config.n
    return ImportanceEstimate(rate=float(rate), se=se_rel / config.n,
                              tilt=t_star, probability=probability, hits=n_hits)


@dataclass(frozen=True)
class LdpVerdict:
    """Finite-n sandwich check of a decay-rate estimate against a reference."""

    n: int
    estimate: float
    se: float
    reference: float
    envelope: float
    passed: bool


def ldp_verdict(env: PeriodicEnvironment, f: np.ndarray, ell: int, a: float,
                config: SimConfig, eps: float = 1e-3,
                workers: int = 1) -> LdpVerdict:
    """Importance-sampled decay estimate judged within 2*SE + 2*log(n+1)/n."""
    kernel = build_word_chain(env, ell)
    reference = half_space_rate(kernel, np.asarray(f, dtype=float), a)
    est = importance_rate(env, f, ell, a, config, eps=eps, workers=workers)
    envelope = float(2.0 * est.se + 2.0 * np.log(config.n + 1) / config.n)
    passed = bool(abs(est.rate - reference) <= envelope)
    return LdpVerdict(n=config.n, estimate=est.rate, se=est.se,
                      reference=reference, envelope=envelope, passed=passed)
