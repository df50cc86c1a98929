"""Rate functions and conjugates on the word chain.

The primal rate minimizes relative entropy over stationary edge measures
with a prescribed marginal; the dual maximizes the Donsker-Varadhan
potential objective; the convex conjugate and the inf-over-potentials
functional are computed by independent routes and cross-checked against
the Perron-Frobenius eigenvalue oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np
from scipy.optimize import linprog, minimize
from scipy.special import logsumexp

from .chain import WordKernel, pf_log_eigenvalue, tilt_kernel
from .entropy import kernel_entropy
from .errors import NoConvergence, NotIrreducible, ShapeMismatch, ZeroNotInRange
from .measures import (
    edge_marginals,
    edge_to_kernel,
    mean_step,
    stationary_measure,
)

IPF_TOL = 1e-13
IPF_MAX_ITER = 200_000
LP_TOL = 1e-10


@dataclass(frozen=True)
class RateReport:
    """Value, optimizer certificate, and convergence diagnostics."""

    value: float
    certificate: object = field(default=None, repr=False)
    gap: float | None = None
    iterations: int = 0
    converged: bool = True

    @property
    def is_finite(self) -> bool:
        return np.isfinite(self.value)


def _marginal_constraint_matrices(kernel: WordKernel):
    """Equality rows for source marginal and shift-target marginal."""
    n, r = kernel.prob.shape
    m = n * r
    src = np.zeros((n, m))
    tgt = np.zeros((n, m))
    for s in range(n):
        for z in range(r):
            src[s, s * r + z] = 1.0
            tgt[kernel.succ[s, z], s * r + z] += 1.0
    return src, tgt


def _edge_lp_feasible(kernel: WordKernel, mu: np.ndarray | None = None,
                      mean: np.ndarray | None = None) -> bool:
    """Feasibility of the stationary edge polytope, optionally with a fixed
    source marginal or a fixed mean step."""
    n, r = kernel.prob.shape
    src, tgt = _marginal_constraint_matrices(kernel)
    if mu is not None:
        a_eq = np.vstack([src, tgt])
        b_eq = np.concatenate([mu, mu])
    else:
        a_eq = np.vstack([src - tgt, np.ones((1, n * r))])
        b_eq = np.concatenate([np.zeros(n), [1.0]])
    if mean is not None:
        steps = kernel.env.range.as_array().astype(float)
        rows = np.tile(steps.T, (1, n))  # (d, n*r): step coords per edge
        a_eq = np.vstack([a_eq, rows])
        b_eq = np.concatenate([b_eq, mean])
    res = linprog(c=np.zeros(n * r), A_eq=a_eq, b_eq=b_eq,
                  bounds=(0, None), method="highs")
    if res.status != 0:
        return False
    return float(np.max(np.abs(a_eq @ res.x - b_eq))) <= LP_TOL


def rate_primal(mu: np.ndarray, kernel: WordKernel,
                tol: float = IPF_TOL, max_iter: int = IPF_MAX_ITER) -> RateReport:
    """Minimal relative entropy over edge measures with both marginals mu.

    Infeasibility of the stationarity constraints yields value +inf.
    The minimizer is found by iterative proportional fitting of the two
    marginal constraints starting from mu x p+.
    """
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (kernel.n_states,):
        raise ShapeMismatch(f"measure shape {mu.shape} does not match kernel")
    if not _edge_lp_feasible(kernel, mu=mu):
        return RateReport(value=float("inf"), converged=True)

    alpha = mu[:, None] * kernel.prob
    live = mu > 0
    it = 0
    resid = np.inf
    for it in range(1, max_iter + 1):
        rows = alpha.sum(axis=1)
        scale = np.zeros_like(mu)
        scale[live] = mu[live] / np.where(rows[live] > 0, rows[live], 1.0)
        alpha *= scale[:, None]
        _, nu = edge_marginals(alpha, kernel)
        ratio = np.zeros_like(mu)
        pos = nu > 0
        ratio[pos] = mu[pos] / nu[pos]
        alpha *= ratio[kernel.succ]
        src, tgt = edge_marginals(alpha, kernel)
        resid = np.abs(src - mu).sum() + np.abs(tgt - mu).sum()
        if resid <= tol:
            break
    converged = bool(resid <= tol)
    mu_hat, q = edge_to_kernel(alpha, kernel)
    value = float(kernel_entropy(mu, q, kernel.prob))
    return RateReport(value=value, certificate=alpha, iterations=it,
                      converged=converged)


def rate_dual(mu: np.ndarray, kernel: WordKernel,
              gtol: float = 1e-12, max_iter: int = 20_000) -> RateReport:
    """Donsker-Varadhan form: sup over potentials h of E[h] - E[log p+(e^h)]."""
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (kernel.n_states,):
        raise ShapeMismatch(f"measure shape {mu.shape} does not match kernel")
    logp = np.where(kernel.prob > 0, np.log(np.where(kernel.prob > 0, kernel.prob, 1.0)),
                    -np.inf)
    succ = kernel.succ

    def neg_objective(h):
        arg = logp + h[succ]
        lse = logsumexp(arg, axis=1)
        weights = np.exp(arg - lse[:, None])
        grad = mu.copy()
        np.add.at(grad, succ.ravel(), -(mu[:, None] * weights).ravel())
        value = float(mu @ h - mu @ lse)
        return -value, -grad

    res = minimize(neg_objective, np.zeros(kernel.n_states), jac=True,
                   method="L-BFGS-B",
                   options={"maxiter": max_iter, "gtol": gtol, "ftol": 1e-16})
    h = res.x - res.x[0]
    value = -float(res.fun)
    converged = bool(res.success) or float(np.max(np.abs(res.jac))) < 1e-8
    if not converged:
        raise NoConvergence(f"dual ascent stalled: {res.message}")
    return RateReport(value=value, certificate=h, iterations=int(res.nit),
                      converged=converged)


def _stationary_edge_program(kernel: WordKernel, f: np.ndarray | None,
                             mean: np.ndarray | None = None):
    """cvxpy edge-polytope program: optimize E[f] - H over stationary edge
    measures, optionally with a mean-step constraint."""
    n, r = kernel.prob.shape
    a = cp.Variable((n, r), nonneg=True)
    m = cp.sum(a, axis=1)
    ref = cp.multiply(np.asarray(kernel.prob),
                      cp.reshape(m, (n, 1), order="C") @ np.ones((1, r)))
    entropy_term = cp.sum(cp.rel_entr(a, ref))
    constraints = [cp.sum(a) == 1]
    scatter = np.zeros((n, n * r))
    for s in range(n):
        for z in range(r):
            scatter[kernel.succ[s, z], s * r + z] += 1.0
    constraints.append(scatter @ cp.vec(a, order="C") == m)
    if mean is not None:
        steps = kernel.env.range.as_array().astype(float)
        constraints.append(cp.sum(a, axis=0) @ steps == mean)
    if f is None:
        objective = cp.Minimize(entropy_term)
    else:
        objective = cp.Maximize(np.asarray(f) @ m - entropy_term)
    return a, objective, constraints


def _solve_cvxpy(objective, constraints):
    prob = cp.Problem(objective, constraints)
    try:
        prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12,
                   tol_feas=1e-12)
    except cp.error.SolverError:
        prob.solve(solver=cp.ECOS, abstol=1e-11, reltol=1e-11, feastol=1e-11)
    return prob


def legendre_rate(f: np.ndarray, kernel: WordKernel,
                  oracle_tol: float = 1e-6) -> RateReport:
    """Convex conjugate of the rate: max of E[f] - H over stationary edge
    measures, with the log-eigenvalue oracle recorded as the gap."""
    f = np.asarray(f, dtype=float)
    if f.shape != (kernel.n_states,):
        raise ShapeMismatch(f"tilt shape {f.shape} does not match kernel")
    a, objective, constraints = _stationary_edge_program(kernel, f)
    prob = _solve_cvxpy(objective, constraints)
    if prob.status not in ("optimal", "optimal_inaccurate"):
        raise NoConvergence(f"conjugate program status {prob.status}")
    value = float(prob.value)
    oracle, _ = pf_log_eigenvalue(tilt_kernel(kernel, f))
    gap = value - oracle
    return RateReport(value=value, certificate=np.asarray(a.value), gap=gap,
                      converged=abs(gap) <= oracle_tol)


def k_ell_h(f: np.ndarray, h: np.ndarray, kernel: WordKernel) -> float:
    """Max over states of log sum_z p+ e^{f - h + h o shift} (upper-bound
    certificate for any potential h)."""
    logp = np.log(kernel.prob)
    arg = logp + np.asarray(f)[:, None] - np.asarray(h)[:, None] + np.asarray(h)[kernel.succ]
    return float(np.max(logsumexp(arg, axis=1)))


def kbar(f: np.ndarray, kernel: WordKernel, agree_tol: float = 1e-8) -> RateReport:
    """Inf over potentials of the max-of-logsumexp functional.

    Solved two ways: the eigenvector closed form (h* = log of the
    Perron-Frobenius right eigenvector equalizes every row at the log
    eigenvalue) and a direct convex min-max program; the report's gap is
    their difference.
    """
    f = np.asarray(f, dtype=float)
    if f.shape != (kernel.n_states,):
        raise ShapeMismatch(f"tilt shape {f.shape} does not match kernel")
    log_lam, h_star = pf_log_eigenvalue(tilt_kernel(kernel, f))
    h_cert = np.log(h_star)
    h_cert = h_cert - h_cert[0]

    n = kernel.n_states
    h = cp.Variable(n)
    t = cp.Variable()
    logp = np.log(kernel.prob)
    constraints = [h[0] == 0]
    for s in range(n):
        row = logp[s] + f[s] - h[s] + h[kernel.succ[s]]
        constraints.append(cp.log_sum_exp(row) <= t)
    prob = _solve_cvxpy(cp.Minimize(t), constraints)
    if prob.status not in ("optimal", "optimal_inaccurate"):
        raise NoConvergence(f"min-max program status {prob.status}")
    value_b = float(prob.value)
    gap = log_lam - value_b
    return RateReport(value=log_lam, certificate=h_cert, gap=gap,
                      converged=abs(gap) <= agree_tol)


def fenchel_young_check(f: np.ndarray, mu: np.ndarray,
                        kernel: WordKernel) -> float:
    """Weak-duality slack: rate_primal(mu) + kbar(f) - E^mu[f] >= 0."""
    primal = rate_primal(mu, kernel)
    if not primal.is_finite:
        return float("inf")
    conj = kbar(f, kernel)
    return primal.value + conj.value - float(np.asarray(f) @ np.asarray(mu))


def level1_rate(v, kernel: WordKernel) -> RateReport:
    """Contraction to the mean step: min rate over stationary edge measures
    with mean step v; +inf when v is not attainable."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.shape != (kernel.env.d,):
        raise ShapeMismatch(f"velocity shape {v.shape} does not match d={kernel.env.d}")
    if not _edge_lp_feasible(kernel, mean=v):
        return RateReport(value=float("inf"), converged=True)
    a, objective, constraints = _stationary_edge_program(kernel, None, mean=v)
    prob = _solve_cvxpy(objective, constraints)
    if prob.status not in ("optimal", "optimal_inaccurate"):
        return RateReport(value=float("inf"), converged=False)
    return RateReport(value=float(prob.value), certificate=np.asarray(a.value))


def zero_set(kernel: WordKernel) -> np.ndarray:
    """Drift vectors of zero rate: the singleton stationary mean step."""
    mu = stationary_measure(kernel)
    alpha = mu[:, None] * kernel.prob
    return np.atleast_2d(mean_step(alpha, kernel))


def singular_example_rate(env, ell: int = 1) -> RateReport:
    """Rate of the walk frozen at the origin by repeated zero steps.

    Equals -log p_0(cell 0); requires the zero step in the range. The gap
    field records the difference from that closed form.
    """
    from .chain import build_word_chain

    zero = tuple(0 for _ in range(env.d))
    if zero not in env.range.steps:
        raise ZeroNotInRange("the zero step is not in the range")
    z0 = env.range.index(zero)
    kernel = build_word_chain(env, ell)
    state = kernel.state_index(env.offset_index(zero), [z0] * ell)
    mu = np.zeros(kernel.n_states)
    mu[state] = 1.0
    report = rate_primal(mu, kernel)
    reference = -float(np.log(env.cells[env.offset_index(zero), z0]))
    return RateReport(value=report.value, certificate=report.certificate,
                      gap=report.value - reference, iterations=report.iterations,
                      converged=report.converged and abs(report.value - reference) <= 1e-8)
