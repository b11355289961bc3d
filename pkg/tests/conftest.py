from __future__ import annotations

import numpy as np
import pytest

from banditnet.graph import build_topology


@pytest.fixture(scope="session")
def ring4():
    return build_topology("ring", 4)


@pytest.fixture(scope="session")
def complete100():
    return build_topology("complete", 100)


def sinkhorn_symmetric(rng: np.random.Generator, n: int) -> np.ndarray:
    """Random symmetric doubly stochastic matrix via symmetric Sinkhorn
    scaling of a positive symmetric matrix (test oracle input)."""
    a = rng.random((n, n)) + 0.1
    a = 0.5 * (a + a.T)
    for _ in range(10_000):
        d = 1.0 / np.sqrt(a.sum(axis=1))
        a = a * d[:, None] * d[None, :]
        a = 0.5 * (a + a.T)
        if np.max(np.abs(a.sum(axis=1) - 1.0)) < 1e-13:
            break
    return a
