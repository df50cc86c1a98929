import numpy as np
import pytest

from rwre_lab.env import (
    StepRange,
    check_ellipticity,
    check_span,
    cell_transition,
    emit_environment,
    validate_environment,
)
from rwre_lab.errors import (
    DimensionMismatch,
    DuplicateStep,
    NonPositiveEntry,
    NotStochastic,
)
from conftest import TWO_CELL_CONFIG


def test_round_trip_is_bit_exact(two_cell_env):
    doc = emit_environment(two_cell_env)
    again = validate_environment(doc)
    assert again.periods == two_cell_env.periods
    assert again.range.steps == two_cell_env.range.steps
    np.testing.assert_array_equal(again.cells, two_cell_env.cells)


def test_rows_sum_to_one_exactly():
    config = dict(TWO_CELL_CONFIG)
    config["cells"] = {"0": [0.1, 0.9 + 1e-12], "1": [1.0 / 3.0, 2.0 / 3.0]}
    env = validate_environment(config)
    assert all(row.sum() == 1.0 for row in env.cells)


def test_rejects_non_stochastic_row():
    config = dict(TWO_CELL_CONFIG)
    config["cells"] = {"0": [0.7, 0.2], "1": [0.4, 0.6]}
    with pytest.raises(NotStochastic):
        validate_environment(config)


def test_rejects_non_positive_entry():
    config = dict(TWO_CELL_CONFIG)
    config["cells"] = {"0": [1.0, 0.0], "1": [0.4, 0.6]}
    with pytest.raises(NonPositiveEntry):
        validate_environment(config)


def test_rejects_duplicate_steps():
    config = dict(TWO_CELL_CONFIG)
    config["range"] = [[1], [1]]
    with pytest.raises(DuplicateStep):
        validate_environment(config)


def test_rejects_missing_cell():
    config = dict(TWO_CELL_CONFIG)
    config["cells"] = {"0": [0.7, 0.3]}
    with pytest.raises(DimensionMismatch):
        validate_environment(config)


def test_rejects_bad_cell_key():
    config = dict(TWO_CELL_CONFIG)
    config["cells"] = {"0": [0.7, 0.3], "5": [0.4, 0.6]}
    with pytest.raises(DimensionMismatch):
        validate_environment(config)


def test_check_span_full_lattice():
    assert check_span(StepRange(((1,), (-1,))))
    assert check_span(StepRange(((2,), (-1,))))
    assert check_span(StepRange(((1, 0), (0, 1), (-1, -1))))


def test_check_span_sublattice():
    assert not check_span(StepRange(((2,), (-2,))))
    assert not check_span(StepRange(((1, 1), (-1, -1))))
    assert not check_span(StepRange(((2, 0), (0, 1))))


def test_ellipticity_two_cell(two_cell_env):
    report = check_ellipticity(two_cell_env)
    assert report.all_reachable
    for entry in report.directions.values():
        total = np.sum(np.asarray(entry["witness"]), axis=0)
        assert entry["length"] == len(entry["witness"])
        assert abs(int(total[0])) == 1


def test_ellipticity_proven_unreachable():
    config = {"d": 1, "periods": [1], "range": [[2], [-2]],
              "cells": {"0": [0.5, 0.5]}}
    env = validate_environment(config)
    report = check_ellipticity(env)
    assert not report.all_reachable
    assert all(v["status"] == "proven-unreachable"
               for v in report.directions.values())


def test_cell_transition_reduces_mod_periods(two_cell_env):
    np.testing.assert_array_equal(cell_transition(two_cell_env, (4,)),
                                  two_cell_env.cells[0])
    np.testing.assert_array_equal(cell_transition(two_cell_env, (-3,)),
                                  two_cell_env.cells[1])
