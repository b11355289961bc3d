"""Shared Gram matrix, regularized least squares and confidence geometry.

All agents play the same action sequence, so one Gram matrix

    Sigma_s = reg * I + sum_{k<=s} x_k x_k^T

is shared network-wide; only the reward-estimate histories y_k (and hence
the parameter estimates) differ per agent.  The inverse is maintained
incrementally by the Sherman-Morrison identity with a periodic full
re-inversion to bound drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError, ValidationError

__all__ = [
    "GramMatrix",
    "AgentEstimate",
    "ConfidenceSpec",
    "new_gram",
    "update_gram",
    "rls_estimate",
    "confidence_radius",
    "ellipsoid_norm",
    "min_eigenvalue",
]

# Full re-inversion cadence: rank-1 updates drift at O(eps) per step; at
# d = 2 a dense inverse costs nothing, so refresh often enough that the
# accumulated drift stays below the 1e-8 identity tolerance.
_REINVERT_EVERY = 512


@dataclass
class GramMatrix:
    """Regularized design matrix Sigma_s and its maintained inverse."""

    sigma: np.ndarray
    sigma_inv: np.ndarray
    episode_count: int
    reg: float
    _updates_since_inversion: int = field(default=0, repr=False)

    @property
    def dim(self) -> int:
        return self.sigma.shape[0]


@dataclass
class AgentEstimate:
    """One agent's view: its RLS estimate and reward-estimate history."""

    agent_id: int
    theta_hat: np.ndarray
    y_history: np.ndarray


def new_gram(dim: int, reg: float) -> GramMatrix:
    """Fresh Gram matrix Sigma_0 = reg * I."""
    if dim < 1:
        raise ValidationError(f"dimension must be >= 1, got {dim}")
    if reg <= 0.0:
        raise ValidationError(f"regularization must be > 0, got {reg}")
    return GramMatrix(
        sigma=reg * np.eye(dim),
        sigma_inv=np.eye(dim) / reg,
        episode_count=0,
        reg=reg,
    )


def update_gram(gram: GramMatrix, action: np.ndarray) -> GramMatrix:
    """Add one action's outer product; rank-1 update of the inverse.

    Mutates and returns ``gram``.  A zero action still advances the episode
    count (the episode happened; it just carried no excitation).
    """
    x = np.asarray(action, dtype=float)
    if x.shape != (gram.dim,):
        raise ValidationError(f"action shape {x.shape} does not match dim {gram.dim}")
    gram.sigma = gram.sigma + np.outer(x, x)
    u = gram.sigma_inv @ x
    denom = 1.0 + float(x @ u)
    gram.sigma_inv = gram.sigma_inv - np.outer(u, u) / denom
    gram.episode_count += 1
    gram._updates_since_inversion += 1
    if gram._updates_since_inversion >= _REINVERT_EVERY:
        gram.sigma_inv = np.linalg.inv(gram.sigma)
        gram._updates_since_inversion = 0
    return gram


def rls_estimate(gram: GramMatrix, actions: np.ndarray, y_history: np.ndarray) -> np.ndarray:
    """Regularized least-squares estimate Sigma_s^{-1} sum_k x_k y_k."""
    actions = np.asarray(actions, dtype=float).reshape(-1, gram.dim)
    ys = np.asarray(y_history, dtype=float).ravel()
    if actions.shape[0] != ys.shape[0]:
        raise UsageError(
            f"{actions.shape[0]} actions vs {ys.shape[0]} reward estimates"
        )
    if actions.shape[0] != gram.episode_count:
        raise UsageError(
            f"history length {actions.shape[0]} does not match episode count "
            f"{gram.episode_count}"
        )
    if actions.shape[0] == 0:
        return np.zeros(gram.dim)
    return gram.sigma_inv @ (actions.T @ ys)


@dataclass(frozen=True)
class ConfidenceSpec:
    """Fixed inputs of the confidence radius for one run.

    delta_conf carries the union-bound split delta / (2N); radius(s) then
    evaluates

        beta_s = (R/sqrt(N)) sqrt(d log((1 + s L^2/reg) / delta_conf))
                 + sqrt(reg) S + L / sqrt(reg)

    with natural logarithms.  The trailing L/sqrt(reg) term absorbs the
    consensus approximation error.
    """

    n_agents: int
    noise_r: float
    dim: int
    reg: float
    bound_s: float
    bound_l: float
    delta_conf: float

    @classmethod
    def for_run(
        cls,
        n_agents: int,
        noise_r: float,
        dim: int,
        reg: float,
        bound_s: float,
        bound_l: float,
        delta: float,
    ) -> "ConfidenceSpec":
        if not 0.0 < delta < 1.0:
            raise ValidationError(f"delta must lie in (0, 1), got {delta}")
        if min(noise_r, bound_s, bound_l) < 0.0 or reg <= 0.0 or n_agents < 1:
            raise ValidationError("confidence parameters out of range")
        return cls(
            n_agents=n_agents,
            noise_r=noise_r,
            dim=dim,
            reg=reg,
            bound_s=bound_s,
            bound_l=bound_l,
            delta_conf=delta / (2.0 * n_agents),
        )

    def radius(self, s: int) -> float:
        if s < 0:
            raise ValidationError(f"episode count must be >= 0, got {s}")
        log_term = math.log((1.0 + s * self.bound_l**2 / self.reg) / self.delta_conf)
        return (
            self.noise_r / math.sqrt(self.n_agents) * math.sqrt(self.dim * log_term)
            + math.sqrt(self.reg) * self.bound_s
            + self.bound_l / math.sqrt(self.reg)
        )


def confidence_radius(
    s: int,
    n_agents: int,
    noise_r: float,
    dim: int,
    reg: float,
    bound_s: float,
    bound_l: float,
    delta: float,
) -> float:
    """Confidence radius beta_s after s episodes (see ConfidenceSpec)."""
    spec = ConfidenceSpec.for_run(n_agents, noise_r, dim, reg, bound_s, bound_l, delta)
    return spec.radius(s)


def ellipsoid_norm(gram: GramMatrix, x: np.ndarray) -> float:
    """Sigma_s^{-1}-weighted norm sqrt(x^T Sigma_s^{-1} x)."""
    x = np.asarray(x, dtype=float)
    value = float(x @ gram.sigma_inv @ x)
    return math.sqrt(max(value, 0.0))


def min_eigenvalue(gram: GramMatrix) -> float:
    """Smallest eigenvalue of Sigma_s (always >= reg by construction)."""
    if gram.dim == 2:
        # Closed form for symmetric 2x2; exact and ~40x cheaper than a
        # LAPACK call, which matters in the per-episode loop.
        a = gram.sigma[0, 0]
        b = gram.sigma[1, 1]
        c = gram.sigma[0, 1]
        half_diff = 0.5 * (a - b)
        return float(0.5 * (a + b) - math.hypot(half_diff, c))
    return float(np.linalg.eigvalsh(gram.sigma)[0])
