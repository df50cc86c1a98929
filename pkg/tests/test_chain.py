import numpy as np
import pytest

from rwre_lab.chain import (
    build_word_chain,
    doob_transform,
    pf_log_eigenvalue,
    strongly_connected,
    tilt_kernel,
)
from rwre_lab.errors import NoConvergence, NotIrreducible, ShapeMismatch, StateBudgetExceeded
from rwre_lab.measures import drift, stationary_measure


def test_state_enumeration_is_bit_exact(two_cell_env):
    kernel = build_word_chain(two_cell_env, 2)
    r = 2
    for s in range(kernel.n_states):
        offset, word_int = divmod(s, r**2)
        assert kernel.state_offset[s] == offset
        letters = [word_int // r, word_int % r]
        assert list(kernel.state_word[s]) == letters
        assert kernel.state_index(offset, letters) == s


def test_successors_consume_oldest_letter(two_cell_env):
    kernel = build_word_chain(two_cell_env, 2)
    r = 2
    for s in range(kernel.n_states):
        offset = kernel.state_offset[s]
        a, b = kernel.state_word[s]
        step = two_cell_env.range.steps[a][0]
        next_offset = (two_cell_env.offset_coords(offset)[0] + step) % 2
        for z in range(r):
            expected = (next_offset * r**2) + b * r + z
            assert kernel.succ[s, z] == expected


def test_probabilities_read_at_walker_cell(two_cell_env):
    kernel = build_word_chain(two_cell_env, 1)
    for s in range(kernel.n_states):
        cell = kernel.walker_cell(s)
        np.testing.assert_array_equal(kernel.prob[s], two_cell_env.cells[cell])


def test_rows_are_stochastic(two_cell_env):
    kernel = build_word_chain(two_cell_env, 2)
    np.testing.assert_allclose(kernel.prob.sum(axis=1), 1.0, atol=1e-15)
    dense = kernel.dense()
    np.testing.assert_allclose(dense.sum(axis=1), 1.0, atol=1e-15)


def test_state_cap(two_cell_env):
    with pytest.raises(StateBudgetExceeded):
        build_word_chain(two_cell_env, 2, state_cap=4)


def test_strongly_connected(two_cell_env):
    assert strongly_connected(build_word_chain(two_cell_env, 1))
    assert strongly_connected(build_word_chain(two_cell_env, 2))


def test_pf_known_symmetric_matrix():
    log_lam, v = pf_log_eigenvalue(np.array([[2.0, 1.0], [1.0, 2.0]]))
    assert abs(log_lam - np.log(3.0)) < 1e-14
    np.testing.assert_allclose(v, [1.0, 1.0], atol=1e-12)


def test_pf_periodic_support():
    # a pure two-cycle defeats plain power iteration; the shift handles it
    log_lam, v = pf_log_eigenvalue(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert abs(log_lam) < 1e-14
    np.testing.assert_allclose(v, [1.0, 1.0], atol=1e-12)


def test_pf_stochastic_matrix_has_log_radius_zero(two_cell_env):
    kernel = build_word_chain(two_cell_env, 1)
    log_lam, v = pf_log_eigenvalue(kernel.dense())
    assert abs(log_lam) < 1e-13
    m = kernel.dense()
    residual = np.max(np.abs(m @ v - np.exp(log_lam) * v))
    assert residual <= 1e-12 * np.max(np.abs(v))


def test_pf_rejects_reducible_matrix():
    with pytest.raises(NotIrreducible):
        pf_log_eigenvalue(np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_tilt_shape_mismatch(two_cell_env):
    kernel = build_word_chain(two_cell_env, 1)
    with pytest.raises(ShapeMismatch):
        tilt_kernel(kernel, np.zeros(3))


def test_doob_zero_tilt_is_identity(two_cell_env):
    kernel = build_word_chain(two_cell_env, 1)
    q = doob_transform(kernel, np.zeros(kernel.n_states))
    np.testing.assert_allclose(q.prob, kernel.prob, atol=1e-12)


def test_doob_rows_stochastic_and_drift_moves(two_cell_env):
    kernel = build_word_chain(two_cell_env, 1)
    rng = np.random.default_rng(11)
    f = rng.uniform(-1.0, 1.0, kernel.n_states)
    q = doob_transform(kernel, f)
    np.testing.assert_allclose(q.prob.sum(axis=1), 1.0, atol=1e-12)
    # tilting toward the +1 word raises the drift
    plus = np.array([1.0 if kernel.state_word[s, 0] == 0 else 0.0
                     for s in range(kernel.n_states)])
    tilted = doob_transform(kernel, 2.0 * plus)
    assert drift(tilted)[0] > drift(kernel)[0]
