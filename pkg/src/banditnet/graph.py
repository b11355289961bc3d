"""Network topologies, Metropolis-Hastings weights and spectral quantities.

Every topology is returned as a :class:`NetworkGraph` holding the adjacency
relation, a symmetric doubly stochastic weight matrix W and the second
largest eigenvalue magnitude |lambda_2| of W, which drives the consensus
round schedule.  Weights follow the Metropolis-Hastings rule

    W_ij = 1 / (1 + max(deg(i), deg(j)))   for edges i != j,
    W_ii = 1 - sum_{j != i} W_ij,

which is symmetric and doubly stochastic for any connected undirected graph
and reduces to the uniform 1/(k+1) scheme on regular graphs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, GenerationError, ValidationError

__all__ = [
    "NetworkGraph",
    "build_topology",
    "metropolis_weights",
    "spectral_gap",
]

# Dense eigendecomposition below this size; deflated power iteration above.
_DENSE_EIG_LIMIT = 256
_POWER_TOL = 1e-10
_POWER_MAX_ITER = 100_000
_ER_MAX_RESAMPLES = 200


@dataclass(frozen=True)
class NetworkGraph:
    """Immutable communication graph with its averaging matrix.

    Attributes:
        n_agents: number of nodes N.
        adjacency: (N, N) boolean, symmetric, zero diagonal.
        weights: (N, N) doubly stochastic Metropolis matrix W.
        lambda2_abs: second largest eigenvalue magnitude of W, in [0, 1).
    """

    n_agents: int
    adjacency: np.ndarray
    weights: np.ndarray
    lambda2_abs: float
    kind: str = field(default="custom")

    def __post_init__(self) -> None:
        self.adjacency.setflags(write=False)
        self.weights.setflags(write=False)

    def neighbors(self, i: int) -> np.ndarray:
        """Indices of the neighbors of node i (excluding i)."""
        return np.flatnonzero(self.adjacency[i])


# ---------------------------------------------------------------------------
# Weight construction
# ---------------------------------------------------------------------------


def metropolis_weights(adjacency: np.ndarray) -> np.ndarray:
    """Metropolis-Hastings doubly stochastic matrix for an undirected graph."""
    adjacency = np.asarray(adjacency, dtype=bool)
    n = adjacency.shape[0]
    if n == 1:
        return np.array([[1.0]])
    degrees = adjacency.sum(axis=1)
    # 1 / (1 + max(d_i, d_j)) on edges, computed densely then masked.
    pair_max = np.maximum.outer(degrees, degrees)
    weights = np.where(adjacency, 1.0 / (1.0 + pair_max), 0.0)
    np.fill_diagonal(weights, 0.0)
    np.fill_diagonal(weights, 1.0 - weights.sum(axis=1))
    return weights


def _is_connected(adjacency: np.ndarray) -> bool:
    n = adjacency.shape[0]
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        u = stack.pop()
        for v in np.flatnonzero(adjacency[u]):
            if not seen[v]:
                seen[v] = True
                stack.append(int(v))
    return bool(seen.all())


# ---------------------------------------------------------------------------
# Spectral gap
# ---------------------------------------------------------------------------


def spectral_gap(weights: np.ndarray) -> float:
    """Second largest eigenvalue magnitude |lambda_2| of a symmetric
    doubly stochastic matrix.

    Equals the spectral norm of W - (1/N) 1 1^T.  Uses a dense symmetric
    eigendecomposition for N <= 256 and power iteration on the deflated
    matrix (applied twice per step, so sign-symmetric spectra converge)
    for larger N.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValidationError("weight matrix must be square")
    n = w.shape[0]
    if not np.allclose(w, w.T, atol=1e-10):
        raise ValidationError("weight matrix must be symmetric")
    ones = np.ones(n)
    if np.max(np.abs(w @ ones - ones)) > 1e-8 or np.min(w) < -1e-12:
        raise ValidationError("weight matrix must be doubly stochastic")
    if n == 1:
        return 0.0

    deflated = w - np.full((n, n), 1.0 / n)
    if n <= _DENSE_EIG_LIMIT:
        eigvals = np.linalg.eigvalsh(deflated)
        return float(max(abs(eigvals[0]), abs(eigvals[-1])))

    # Power iteration on B^2 (PSD), estimating sqrt of its top eigenvalue.
    rng = np.random.default_rng(0)
    v = rng.standard_normal(n)
    v -= v.mean()
    norm = np.linalg.norm(v)
    if norm == 0.0:
        return 0.0
    v /= norm
    estimate = 0.0
    for _ in range(_POWER_MAX_ITER):
        bv = deflated @ v
        bbv = deflated @ bv
        new_norm = np.linalg.norm(bbv)
        if new_norm <= 1e-15:
            return float(np.linalg.norm(bv))
        new_estimate = np.sqrt(new_norm)
        v = bbv / new_norm
        if abs(new_estimate - estimate) <= _POWER_TOL:
            return float(new_estimate)
        estimate = new_estimate
    return float(estimate)


# ---------------------------------------------------------------------------
# Topology builders
# ---------------------------------------------------------------------------


def _complete_adjacency(n: int) -> np.ndarray:
    adjacency = np.ones((n, n), dtype=bool)
    np.fill_diagonal(adjacency, False)
    return adjacency


def _ring_adjacency(n: int) -> np.ndarray:
    if n < 3:
        raise ConfigurationError("ring topology requires n >= 3")
    adjacency = np.zeros((n, n), dtype=bool)
    idx = np.arange(n)
    adjacency[idx, (idx + 1) % n] = True
    adjacency[(idx + 1) % n, idx] = True
    return adjacency


_SWAPS_PER_EDGE = 20
_CONNECT_RETRIES = 50


def _circulant_adjacency(n: int, k: int) -> np.ndarray:
    adjacency = np.zeros((n, n), dtype=bool)
    idx = np.arange(n)
    for step in range(1, k // 2 + 1):
        adjacency[idx, (idx + step) % n] = True
        adjacency[(idx + step) % n, idx] = True
    if k % 2 == 1:
        adjacency[idx, (idx + n // 2) % n] = True
        adjacency[(idx + n // 2) % n, idx] = True
    return adjacency


def _k_regular_adjacency(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Random simple k-regular graph: circulant seed randomized by
    degree-preserving double-edge swaps.

    Well-mixed random regular graphs are near-Ramanujan, so their spectral
    gap is far smaller than a circulant's at the same degree, which is what
    makes degree sweeps informative.  k = n-1 is the complete graph.  The
    swap chain ((a,b),(c,d) -> (a,d),(c,b)) preserves the degree sequence
    and simplicity; connectivity is re-checked and, if broken, repaired by
    further swapping.
    """
    if not 1 <= k <= n - 1:
        raise ConfigurationError(f"k-regular degree must satisfy 1 <= k <= n-1, got k={k}, n={n}")
    if (n * k) % 2 != 0:
        raise ConfigurationError(f"k-regular graph needs n*k even, got n={n}, k={k}")
    if k % 2 == 1 and n % 2 != 0:
        raise ConfigurationError(f"odd degree k={k} requires even n, got n={n}")
    if k == n - 1:
        return _complete_adjacency(n)

    adjacency = _circulant_adjacency(n, k)
    rows, cols = np.nonzero(np.triu(adjacency, k=1))
    edges = np.stack([rows, cols], axis=1)
    n_edges = edges.shape[0]
    for _ in range(_CONNECT_RETRIES):
        swaps_done = 0
        target = _SWAPS_PER_EDGE * n_edges
        # Draw candidate pairs in batches; loop applies them sequentially
        # since each swap changes the edge list.
        while swaps_done < target:
            picks = rng.integers(0, n_edges, size=(4 * target, 2))
            coins = rng.random(4 * target) < 0.5
            for (i, j), flip in zip(picks, coins):
                if swaps_done >= target:
                    break
                if i == j:
                    continue
                a, b = edges[i]
                c, d = edges[j]
                if flip:
                    c, d = d, c
                if a == c or a == d or b == c or b == d:
                    continue
                if adjacency[a, d] or adjacency[c, b]:
                    continue
                adjacency[a, b] = adjacency[b, a] = False
                adjacency[c, d] = adjacency[d, c] = False
                adjacency[a, d] = adjacency[d, a] = True
                adjacency[c, b] = adjacency[b, c] = True
                edges[i] = (a, d)
                edges[j] = (c, b)
                swaps_done += 1
        if _is_connected(adjacency):
            return adjacency
    raise GenerationError(
        f"could not reach a connected {k}-regular graph by edge swapping (n={n})"
    )


def _erdos_renyi_adjacency(n: int, p: float, rng: np.random.Generator) -> np.ndarray:
    if not 0.0 < p <= 1.0:
        raise ConfigurationError(f"edge probability must lie in (0, 1], got {p}")
    for _ in range(_ER_MAX_RESAMPLES):
        upper = rng.random((n, n)) < p
        adjacency = np.triu(upper, k=1)
        adjacency = adjacency | adjacency.T
        if _is_connected(adjacency):
            return adjacency
    raise GenerationError(
        f"no connected Erdos-Renyi graph after {_ER_MAX_RESAMPLES} resamples (n={n}, p={p})"
    )


def build_topology(
    kind: str,
    n: int,
    k: int | None = None,
    p: float | None = None,
    seed: int = 0,
) -> NetworkGraph:
    """Construct a connected topology with Metropolis weights.

    kind is one of {"complete", "ring", "k_regular", "erdos_renyi"}.
    k is the degree for k_regular; p the edge probability for erdos_renyi
    (default 2 ln(n)/n, clipped to (0, 1]).  Erdos-Renyi graphs are
    resampled until connected, within a bounded retry budget.
    """
    if n < 1:
        raise ConfigurationError(f"n must be >= 1, got {n}")
    if n == 1:
        return NetworkGraph(1, np.zeros((1, 1), dtype=bool), np.array([[1.0]]), 0.0, kind)

    if kind == "complete":
        adjacency = _complete_adjacency(n)
    elif kind == "ring":
        adjacency = _ring_adjacency(n)
    elif kind == "k_regular":
        if k is None:
            raise ConfigurationError("k_regular topology requires a degree k")
        adjacency = _k_regular_adjacency(n, k, np.random.default_rng(seed))
    elif kind == "erdos_renyi":
        if p is None:
            p = min(1.0, max(2.0 * np.log(n) / n, 4.0 / n))
        rng = np.random.default_rng(seed)
        adjacency = _erdos_renyi_adjacency(n, p, rng)
    else:
        raise ConfigurationError(f"unknown topology kind: {kind!r}")

    if not _is_connected(adjacency):
        raise GenerationError(f"{kind} topology on n={n} nodes is not connected")

    weights = metropolis_weights(adjacency)
    lam2 = spectral_gap(weights)
    # Snap numerically-zero gaps (complete graphs) to an exact zero.
    if lam2 < 1e-12:
        lam2 = 0.0
    return NetworkGraph(n, adjacency, weights, lam2, kind)
