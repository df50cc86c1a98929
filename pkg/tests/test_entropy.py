import numpy as np
import pytest
from scipy.special import rel_entr

from rwre_lab.chain import build_word_chain, doob_transform
from rwre_lab.entropy import (
    FiniteMemoryModel,
    jensen_gap,
    kernel_entropy,
    prefix_entropy,
)
from rwre_lab.errors import ShapeMismatch
from rwre_lab.measures import stationary_measure
from conftest import random_stochastic_rows


def test_entropy_zero_iff_equal_kernels(two_cell_env):
    kernel = build_word_chain(two_cell_env, 1)
    mu = stationary_measure(kernel)
    value = kernel_entropy(mu, kernel.prob, kernel.prob)
    assert value.is_finite and value.value == 0.0


def test_entropy_matches_rel_entr(two_cell_env):
    kernel = build_word_chain(two_cell_env, 1)
    rng = np.random.default_rng(4)
    q = random_stochastic_rows(rng, kernel.prob.shape)
    mu = rng.dirichlet(np.ones(kernel.n_states))
    value = kernel_entropy(mu, q, kernel.prob)
    expected = float(np.sum(mu[:, None] * rel_entr(q, kernel.prob)))
    assert abs(value.value - expected) < 1e-12
    assert value.value >= 0.0


def test_entropy_infinite_with_violations(two_cell_env):
    kernel = build_word_chain(two_cell_env, 1)
    p = kernel.prob.copy()
    p[0, 1] = 0.0
    p[0, 0] = 1.0
    mu = stationary_measure(kernel)
    value = kernel_entropy(mu, kernel.prob, p)
    assert not value.is_finite
    assert float(value) == float("inf")
    assert (0, 1) in value.support_violations


def test_entropy_shape_mismatch(two_cell_env):
    kernel = build_word_chain(two_cell_env, 1)
    with pytest.raises(ShapeMismatch):
        kernel_entropy(np.ones(3), kernel.prob, kernel.prob)


def test_prefix_terms_stabilize_at_memory(two_cell_env):
    # a memory-1 law evaluated on the length-2 word chain: the term that
    # conditions on one past step must already equal the kernel entropy
    k1 = build_word_chain(two_cell_env, 1)
    rng = np.random.default_rng(9)
    q1 = doob_transform(k1, rng.uniform(-1.0, 1.0, k1.n_states)).prob
    k2 = build_word_chain(two_cell_env, 2)
    q2 = np.empty_like(k2.prob)
    for s in range(k2.n_states):
        cell = k2.walker_cell(s)
        last = k2.state_word[s, 1]
        # the memory-1 state with this cell as walker cell and word (last,)
        step = two_cell_env.range.steps[last][0]
        offset = (two_cell_env.offset_coords(cell)[0] - step) % 2
        q2[s] = q1[k1.state_index(offset, [last])]
    model = FiniteMemoryModel.from_kernel(k2, q2, memory=1)
    report = prefix_entropy(model, two_cell_env, 6)
    assert abs(report.terms[1] - report.limit) < 1e-12
    assert np.all(np.diff(report.terms) >= -1e-12)
    assert np.all(np.diff(report.partial_means) >= -1e-12)


def test_prefix_sums_against_direct_marginal_entropy(two_cell_env):
    # n = 1: the first term is the entropy of the step law given the cell only
    k1 = build_word_chain(two_cell_env, 1)
    rng = np.random.default_rng(12)
    q = random_stochastic_rows(rng, k1.prob.shape)
    model = FiniteMemoryModel.from_kernel(k1, q)
    report = prefix_entropy(model, two_cell_env, 4)
    cells = np.array([k1.walker_cell(s) for s in range(k1.n_states)])
    direct = 0.0
    for cell in np.unique(cells):
        members = np.flatnonzero(cells == cell)
        mass = model.mu[members].sum()
        mixed = (model.mu[members] @ q[members]) / mass
        direct += mass * float(np.sum(rel_entr(mixed, two_cell_env.cells[cell])))
    assert abs(report.terms[0] - direct) < 1e-12
    assert np.allclose(report.terms[1:], report.limit)


def test_jensen_gap_nonnegative_and_zero_cases():
    rng = np.random.default_rng(7)
    mu = rng.dirichlet(np.ones(5))
    rho = rng.dirichlet(np.ones(4))
    g = rng.normal(size=(5, 4))
    assert jensen_gap(g, mu, rho) >= -1e-12
    u = rng.normal(size=5)
    assert abs(jensen_gap(np.tile(u[:, None], (1, 4)), mu, rho)) <= 1e-12
