import numpy as np
import pytest

from rwre_lab.chain import build_word_chain
from rwre_lab.errors import PathTooShort, ShapeMismatch
from rwre_lab.measures import (
    WalkPath,
    apply_kernel,
    drift,
    edge_marginals,
    edge_measure_from_kernel,
    edge_to_kernel,
    empirical_word_measure,
    environment_stationary,
    restrict_level,
    stationary_measure,
)
from conftest import random_stochastic_rows


def test_stationary_is_invariant(two_cell_env):
    kernel = build_word_chain(two_cell_env, 2)
    mu = stationary_measure(kernel)
    assert abs(mu.sum() - 1.0) < 1e-14
    np.testing.assert_allclose(apply_kernel(mu, kernel), mu, atol=1e-13)


def test_environment_stationary_two_cell(two_cell_env):
    # the torus chain alternates parity; the Cesaro law is uniform
    pi = environment_stationary(two_cell_env)
    np.testing.assert_allclose(pi, [0.5, 0.5], atol=1e-13)


def test_empirical_measure_counts(two_cell_env):
    path = WalkPath(start=(0,), letters=np.array([0, 0, 1, 0]))
    mu = empirical_word_measure(path, two_cell_env, 1, n=3)
    kernel = build_word_chain(two_cell_env, 1)
    expected = np.zeros(kernel.n_states)
    # states visited: (0, +1), (1, +1), (0, -1)
    expected[kernel.state_index(0, [0])] += 1
    expected[kernel.state_index(1, [0])] += 1
    expected[kernel.state_index(0, [1])] += 1
    np.testing.assert_array_equal(mu, expected / 3)


def test_empirical_measure_path_too_short(two_cell_env):
    path = WalkPath(start=(0,), letters=np.array([0, 1]))
    with pytest.raises(PathTooShort):
        empirical_word_measure(path, two_cell_env, 2, n=5)


def test_restriction_commutes_with_stationarity(two_cell_env):
    k2 = build_word_chain(two_cell_env, 2)
    k1 = build_word_chain(two_cell_env, 1)
    mu2 = stationary_measure(k2)
    mu1 = stationary_measure(k1)
    np.testing.assert_allclose(restrict_level(mu2, k2, 1), mu1, atol=1e-12)


def test_restrict_level_bounds(two_cell_env):
    k2 = build_word_chain(two_cell_env, 2)
    with pytest.raises(ShapeMismatch):
        restrict_level(stationary_measure(k2), k2, 3)


def test_edge_measure_round_trip(two_cell_env):
    kernel = build_word_chain(two_cell_env, 1)
    rng = np.random.default_rng(2)
    q = random_stochastic_rows(rng, kernel.prob.shape)
    mu = rng.dirichlet(np.ones(kernel.n_states))
    alpha = edge_measure_from_kernel(mu, q)
    mu2, q2 = edge_to_kernel(alpha, kernel)
    np.testing.assert_allclose(mu2, mu, atol=1e-15)
    np.testing.assert_allclose(q2, q, atol=1e-13)


def test_stationary_edge_marginals_agree(two_cell_env):
    kernel = build_word_chain(two_cell_env, 1)
    mu = stationary_measure(kernel)
    alpha = edge_measure_from_kernel(mu, kernel.prob)
    src, tgt = edge_marginals(alpha, kernel)
    np.testing.assert_allclose(src, tgt, atol=1e-13)


def test_drift_one_cell(one_cell_env):
    kernel = build_word_chain(one_cell_env, 1)
    np.testing.assert_allclose(drift(kernel), [0.4], atol=1e-13)


def test_positions_partial_sums(two_cell_env):
    path = WalkPath(start=(3,), letters=np.array([0, 1, 1]))
    np.testing.assert_array_equal(path.positions(two_cell_env).ravel(),
                                  [3, 4, 3, 2])
