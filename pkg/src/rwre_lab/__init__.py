"""Numerical laboratory for random walks in periodic random environments.

Builds the finite word chain of a periodic environment, computes its
large-deviation rate functions by independent primal, dual, conjugate and
eigenvalue routes, and verifies the results against exact enumeration and
seeded Monte Carlo.
"""

from .chain import WordKernel, build_word_chain, doob_transform, pf_log_eigenvalue, tilt_kernel
from .env import PeriodicEnvironment, StepRange, validate_environment
from .measures import WalkPath, stationary_measure

__all__ = [
    "PeriodicEnvironment",
    "StepRange",
    "WalkPath",
    "WordKernel",
    "build_word_chain",
    "doob_transform",
    "pf_log_eigenvalue",
    "stationary_measure",
    "tilt_kernel",
    "validate_environment",
]

__version__ = "0.1.0"
