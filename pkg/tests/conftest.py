import numpy as np
import pytest

from rwre_lab.env import validate_environment


TWO_CELL_CONFIG = {
    "d": 1,
    "periods": [2],
    "range": [[1], [-1]],
    "cells": {"0": [0.7, 0.3], "1": [0.4, 0.6]},
}

ONE_CELL_CONFIG = {
    "d": 1,
    "periods": [1],
    "range": [[1], [-1]],
    "cells": {"0": [0.7, 0.3]},
}

LAZY_CONFIG = {
    "d": 1,
    "periods": [1],
    "range": [[0], [1], [-1]],
    "cells": {"0": [0.25, 0.4, 0.35]},
}


@pytest.fixture
def two_cell_env():
    return validate_environment(TWO_CELL_CONFIG)


@pytest.fixture
def one_cell_env():
    return validate_environment(ONE_CELL_CONFIG)


@pytest.fixture
def lazy_env():
    return validate_environment(LAZY_CONFIG)


def random_environment(rng, n_cells=None, n_steps=None, lazy=False):
    """A random strictly positive one-dimensional environment."""
    if n_cells is None:
        n_cells = int(rng.integers(1, 4))
    if n_steps is None:
        n_steps = int(rng.integers(2, 4))
    steps = [[1], [-1], [0]][:n_steps] if lazy or n_steps == 3 else [[1], [-1]]
    cells = {}
    for u in range(n_cells):
        row = rng.uniform(0.1, 1.0, len(steps))
        cells[str(u)] = (row / row.sum()).tolist()
    config = {"d": 1, "periods": [n_cells], "range": steps, "cells": cells}
    return validate_environment(config)


def random_stochastic_rows(rng, shape, low=0.1):
    rows = rng.uniform(low, 1.0, shape)
    return rows / rows.sum(axis=1, keepdims=True)
