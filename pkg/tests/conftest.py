"""Shared fixtures: exact cubature rules are expensive, so they are built
once per session and reused across unit and acceptance tests."""

import time

import numpy as np
import pytest

from momentfusion.cubature import solve_weights
from momentfusion.grassmann import as_generator, haar_frame_batch

SESSION_START = time.monotonic()

_RULE_CACHE = {}


def solved_rule(d, k, t, n, seed=0):
    """An exact rule from least-squares weights on random Haar nodes."""
    key = (d, k, t, n, seed)
    if key not in _RULE_CACHE:
        gen = as_generator(seed)
        frames = haar_frame_batch(d, k, n, gen)
        nodes = np.einsum("nik,njk->nij", frames, frames)
        rule = solve_weights(nodes, t, rng=gen, return_rule=True)
        assert rule.gap is not None and rule.gap <= 1e-10, \
            f"rule construction failed for {key}: gap={rule.gap}"
        _RULE_CACHE[key] = rule
    return _RULE_CACHE[key]


@pytest.fixture(scope="session")
def rule_d3k1_t3():
    return solved_rule(3, 1, 3, 40, seed=31)


@pytest.fixture(scope="session")
def rule_d4k2_t3():
    return solved_rule(4, 2, 3, 300, seed=42)


@pytest.fixture(scope="session")
def rule_d5k2_t3():
    return solved_rule(5, 2, 3, 800, seed=52)


@pytest.fixture(scope="session")
def rule_d5k1_t4():
    return solved_rule(5, 1, 4, 550, seed=51)


@pytest.fixture(scope="session")
def rule_d6k1_t5():
    return solved_rule(6, 1, 5, 3300, seed=61)
