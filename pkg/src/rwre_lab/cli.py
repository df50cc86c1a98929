"""Command-line entry point: JSON reports, CSV paths, stable exit codes.

Exit codes: 0 success, 1 validation error, 2 numeric non-convergence,
3 budget exceeded. Every nonzero exit emits a machine-readable error
object; every report carries a schema-version field and the resolved
configuration for auditability.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import correctors, rates, sim
from .chain import build_word_chain, strongly_connected
from .env import check_ellipticity, check_span, emit_environment, validate_environment
from .errors import DimensionMismatch, LabError, NoConvergence, ShapeMismatch
from .measures import stationary_measure

SCHEMA_VERSION = 1


class _CliParser(argparse.ArgumentParser):
    """Argument parser that raises instead of calling sys.exit."""

    def error(self, message):
        raise DimensionMismatch(message)


def _load_json(path: str):
    with open(path) as fh:
        return json.load(fh)


def _write_report(report: dict, path: str | None):
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_env(args):
    if not getattr(args, "config", None):
        raise DimensionMismatch("missing required --config")
    return validate_environment(_load_json(args.config))


def _load_tilt(path: str, n_states: int) -> np.ndarray:
    """Tilt file: dense JSON array, or a list of [state-index, value] pairs."""
    doc = _load_json(path)
    if not isinstance(doc, list):
        raise ShapeMismatch("tilt file must hold a JSON array")
    if doc and isinstance(doc[0], list):
        f = np.zeros(n_states)
        for idx, value in doc:
            f[int(idx)] = float(value)
        return f
    f = np.asarray(doc, dtype=float)
    if f.shape != (n_states,):
        raise ShapeMismatch(f"tilt length {f.size} does not match {n_states} states")
    return f


def measure_document(mu: np.ndarray, env, ell: int) -> dict:
    """Measure file payload with the compatibility header."""
    return {
        "schema_version": SCHEMA_VERSION,
        "d": env.d,
        "periods": list(env.periods),
        "range": [list(z) for z in env.range.steps],
        "ell": int(ell),
        "values": [float(x) for x in mu],
    }


def _load_measure(path: str, env, ell: int) -> np.ndarray:
    doc = _load_json(path)
    header = {
        "d": env.d,
        "periods": list(env.periods),
        "range": [list(z) for z in env.range.steps],
        "ell": int(ell),
    }
    for name, expected in header.items():
        if name not in doc:
            raise DimensionMismatch(f"measure file is missing field '{name}'")
        if doc[name] != expected:
            raise DimensionMismatch(
                f"measure file field '{name}' is {doc[name]!r}, expected {expected!r}")
    return np.asarray(doc["values"], dtype=float)


def _resolved(args, keys) -> dict:
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def _cmd_validate(args):
    env = _load_env(args)
    ellipticity = check_ellipticity(env)
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "validate",
        "config": _resolved(args, ("config",)),
        "valid": True,
        "environment": emit_environment(env),
        "span_is_full_lattice": check_span(env.range),
        "ellipticity": {
            "all_reachable": ellipticity.all_reachable,
            "directions": ellipticity.directions,
        },
    }
    _write_report(report, args.report)
    return 0


def _cmd_chain(args):
    env = _load_env(args)
    kernel = build_word_chain(env, args.ell)
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "chain",
        "config": _resolved(args, ("config", "ell")),
        "d": env.d,
        "periods": list(env.periods),
        "range": [list(z) for z in env.range.steps],
        "ell": args.ell,
        "n_states": kernel.n_states,
        "irreducible": strongly_connected(kernel),
        "succ": kernel.succ.tolist(),
        "prob": kernel.prob.tolist(),
    }
    _write_report(report, args.out)
    return 0


def _cmd_rate(args):
    env = _load_env(args)
    kernel = build_word_chain(env, args.ell)
    mu = _load_measure(args.measure, env, args.ell)
    primal = rates.rate_primal(mu, kernel)
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "rate",
        "config": _resolved(args, ("config", "ell", "measure", "tol")),
        "value": primal.value,
        "iterations": primal.iterations,
        "converged": primal.converged,
        "certificate_path": None,
    }
    if primal.is_finite:
        dual = rates.rate_dual(mu, kernel)
        report["dual_value"] = dual.value
        report["gap"] = primal.value - dual.value
    else:
        report["gap"] = None
    if args.certificate and primal.certificate is not None:
        _write_report({"schema_version": SCHEMA_VERSION,
                       "edge_measure": np.asarray(primal.certificate).tolist()},
                      args.certificate)
        report["certificate_path"] = args.certificate
    _write_report(report, args.report)
    return 0


def _cmd_conjugate(args):
    env = _load_env(args)
    kernel = build_word_chain(env, args.ell)
    f = _load_tilt(args.f, kernel.n_states)
    res = rates.legendre_rate(f, kernel, oracle_tol=args.tol)
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "conjugate",
        "config": _resolved(args, ("config", "ell", "f", "tol")),
        "value": res.value,
        "gap": res.gap,
        "iterations": res.iterations,
        "converged": res.converged,
        "certificate_path": None,
    }
    _write_report(report, args.report)
    return 0


def _cmd_duality(args):
    env = _load_env(args)
    kernel = build_word_chain(env, args.ell)
    rng = sim.sample_rng(args.seed, 0)
    worst_pair = 0.0
    worst_oracle = 0.0
    trials = []
    for _ in range(args.trials):
        f = rng.uniform(-1.0, 1.0, kernel.n_states)
        kb = rates.kbar(f, kernel)
        lg = rates.legendre_rate(f, kernel)
        pair = abs(kb.value - lg.value)
        worst_pair = max(worst_pair, pair)
        worst_oracle = max(worst_oracle, abs(lg.gap))
        trials.append({"kbar": kb.value, "conjugate": lg.value,
                       "discrepancy": pair, "oracle_gap": lg.gap})
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "duality",
        "config": _resolved(args, ("config", "ell", "trials", "seed", "tol")),
        "max_discrepancy": worst_pair,
        "max_oracle_gap": worst_oracle,
        "trials": trials,
    }
    _write_report(report, args.report)
    if worst_pair > args.tol or worst_oracle > args.tol:
        raise NoConvergence(
            f"duality discrepancy {max(worst_pair, worst_oracle):.3e} above {args.tol}")
    return 0


def _cmd_level1(args):
    env = _load_env(args)
    kernel = build_word_chain(env, args.ell)
    v = np.asarray([float(c) for c in str(args.v).split(",")], dtype=float)
    res = rates.level1_rate(v, kernel)
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "level1",
        "config": _resolved(args, ("config", "ell", "v")),
        "value": res.value if np.isfinite(res.value) else "inf",
        "converged": res.converged,
        "zero_set": rates.zero_set(kernel).tolist(),
    }
    _write_report(report, args.report)
    return 0


def _cmd_simulate(args):
    env = _load_env(args)
    config = sim.SimConfig(n=args.n, seed=args.seed)
    path = sim.simulate_walk(env, config)
    csv_text = sim.path_to_csv(path, env)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(csv_text)
    else:
        sys.stdout.write(csv_text)
    return 0


def _cmd_ldp_verify(args):
    env = _load_env(args)
    kernel = build_word_chain(env, args.ell)
    f = _load_tilt(args.f, kernel.n_states)
    config = sim.SimConfig(n=args.n, samples=args.samples, seed=args.seed)
    verdict = sim.ldp_verdict(env, f, args.ell, args.a, config,
                              eps=args.eps, workers=args.threads)
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "ldp-verify",
        "config": _resolved(args, ("config", "ell", "f", "a", "n",
                                   "samples", "seed", "eps")),
        "n": verdict.n,
        "estimate": verdict.estimate,
        "se": verdict.se,
        "reference": verdict.reference,
        "envelope": verdict.envelope,
        "passed": verdict.passed,
    }
    _write_report(report, args.report)
    return 0


def _cmd_corrector(args):
    env = _load_env(args)
    kernel = build_word_chain(env, args.ell)
    table = np.asarray(_load_json(args.check), dtype=float)
    loop = correctors.verify_class_k(table, kernel)
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "corrector",
        "config": _resolved(args, ("config", "ell", "check", "nmax")),
        "passed": loop.passed,
        "max_cycle_sum": loop.max_abs_sum,
    }
    if loop.passed:
        h = correctors.fit_potential(table, kernel)
        growth = correctors.max_path_growth(table, kernel, args.nmax)
        report["potential"] = h.tolist()
        report["max_mean_cycle"] = growth.max_mean_cycle
        report["g"] = growth.g.tolist()
    _write_report(report, args.report)
    return 0


def _cmd_singular_example(args):
    env = _load_env(args)
    res = rates.singular_example_rate(env, ell=args.ell)
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "singular-example",
        "config": _resolved(args, ("config", "ell")),
        "value": res.value,
        "gap": res.gap,
        "converged": res.converged,
    }
    _write_report(report, args.report)
    return 0


def _build_parser() -> _CliParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="environment config JSON")
    common.add_argument("--tol", type=float, default=1e-6)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--report", help="report JSON output path (default stdout)")

    parser = _CliParser(prog="rwre-lab",
                        description="Numerical laboratory for random walks "
                                    "in periodic environments")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_CliParser)

    p = sub.add_parser("validate", parents=[common])
    p.set_defaults(fn=_cmd_validate)

    p = sub.add_parser("chain", parents=[common])
    p.add_argument("action", choices=["build"])
    p.add_argument("--ell", type=int, default=1)
    p.add_argument("--out", help="kernel JSON output path (default stdout)")
    p.set_defaults(fn=_cmd_chain)

    p = sub.add_parser("rate", parents=[common])
    p.add_argument("--ell", type=int, default=1)
    p.add_argument("--measure", required=True)
    p.add_argument("--certificate", help="edge-measure certificate output path")
    p.set_defaults(fn=_cmd_rate)

    p = sub.add_parser("conjugate", parents=[common])
    p.add_argument("--ell", type=int, default=1)
    p.add_argument("--f", required=True, help="tilt function JSON")
    p.set_defaults(fn=_cmd_conjugate)

    p = sub.add_parser("duality", parents=[common])
    p.add_argument("--ell", type=int, default=1)
    p.add_argument("--trials", type=int, default=50)
    p.set_defaults(fn=_cmd_duality)

    p = sub.add_parser("level1", parents=[common])
    p.add_argument("--ell", type=int, default=1)
    p.add_argument("--v", required=True, help="velocity, comma-separated coords")
    p.set_defaults(fn=_cmd_level1)

    p = sub.add_parser("simulate", parents=[common])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", help="CSV output path (default stdout)")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("ldp-verify", parents=[common])
    p.add_argument("--ell", type=int, default=1)
    p.add_argument("--f", required=True, help="tilt function JSON")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--n", type=int, default=128)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--eps", type=float, default=1e-3)
    p.set_defaults(fn=_cmd_ldp_verify)

    p = sub.add_parser("corrector", parents=[common])
    p.add_argument("--check", required=True, help="edge-function table JSON")
    p.add_argument("--ell", type=int, default=1)
    p.add_argument("--nmax", type=int, default=64)
    p.set_defaults(fn=_cmd_corrector)

    p = sub.add_parser("singular-example", parents=[common])
    p.add_argument("--ell", type=int, default=1)
    p.set_defaults(fn=_cmd_singular_example)

    return parser


def run(argv=None) -> int:
    """Dispatch a command line; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except (LabError, OSError, json.JSONDecodeError) as exc:
        exit_code = getattr(exc, "exit_code", 1)
        error = {
            "schema_version": SCHEMA_VERSION,
            "error": {
                "type": type(exc).__name__,
                "message": str(exc),
                "exit_code": exit_code,
            },
        }
        sys.stdout.write(json.dumps(error, indent=2, sort_keys=True) + "\n")
        return exit_code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
