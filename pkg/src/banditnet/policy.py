"""Safe-set membership, excitation gate, UCB selection, conservative action.

All functions are pure given their inputs plus an injected random stream,
so they can be exercised standalone and in parallel across runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ValidationError
from .estimator import GramMatrix

__all__ = [
    "SafeSetView",
    "ConservativeActionSpec",
    "compute_safe_set",
    "excitation_threshold",
    "select_ucb_action",
    "conservative_action",
    "mix_with_direction",
]


@dataclass
class SafeSetView:
    """Actions whose pessimistic reward estimate clears the safety bar."""

    safe_indices: np.ndarray   # indices into the action array, ascending
    lcb_values: np.ndarray     # per-action x^T theta_hat - beta ||x||_{Sigma^-1}
    threshold: float           # (1 - alpha) * r_b for the current episode
    actions: np.ndarray        # the action array the view indexes into

    def __len__(self) -> int:
        return int(self.safe_indices.size)

    @property
    def empty(self) -> bool:
        return self.safe_indices.size == 0


def compute_safe_set(
    actions: np.ndarray,
    theta_hat: np.ndarray,
    gram: GramMatrix,
    beta: float,
    alpha: float,
    r_b: float,
) -> SafeSetView:
    """Membership test: x^T theta_hat - beta ||x||_{Sigma^-1} >= (1-alpha) r_b."""
    if beta < 0.0:
        raise ValidationError(f"beta must be >= 0, got {beta}")
    acts = np.asarray(actions, dtype=float)
    means = acts @ theta_hat
    widths = np.sqrt(
        np.maximum(np.einsum("kd,de,ke->k", acts, gram.sigma_inv, acts), 0.0)
    )
    lcb = means - beta * widths
    threshold = (1.0 - alpha) * r_b
    return SafeSetView(
        safe_indices=np.flatnonzero(lcb >= threshold),
        lcb_values=lcb,
        threshold=threshold,
        actions=acts,
    )


def excitation_threshold(
    beta_prev: float, bound_l: float, kappa_l: float, alpha: float, r_l: float
) -> float:
    """Minimum-eigenvalue level (2 L beta / (kappa_l + alpha r_l))^2 above
    which the optimal action is guaranteed to sit in every safe set."""
    denom = kappa_l + alpha * r_l
    if denom <= 0.0:
        raise ConfigurationError(
            f"degenerate excitation denominator kappa_l + alpha*r_l = {denom}"
        )
    return (2.0 * bound_l * beta_prev / denom) ** 2


def select_ucb_action(
    safe_set: SafeSetView,
    theta_hat: np.ndarray,
    gram: GramMatrix,
    beta: float,
) -> int | None:
    """Index of the optimistic action within the safe set.

    Maximizes x^T theta_hat + beta ||x||_{Sigma^-1}; ties break to the
    lowest action index.  Returns None on an empty safe set, signalling
    the conservative fallback.
    """
    if safe_set.empty:
        return None
    candidates = safe_set.actions[safe_set.safe_indices]
    means = candidates @ theta_hat
    widths = np.sqrt(
        np.maximum(
            np.einsum("kd,de,ke->k", candidates, gram.sigma_inv, candidates), 0.0
        )
    )
    ucb = means + beta * widths
    return int(safe_set.safe_indices[int(np.argmax(ucb))])


@dataclass(frozen=True)
class ConservativeActionSpec:
    """Mixing weight and exploration-covariance floor of the fallback action."""

    rho: float
    sigma_zeta: float

    @classmethod
    def from_bounds(
        cls, alpha: float, r_l: float, bound_s: float, r_h: float, dim: int
    ) -> "ConservativeActionSpec":
        """rho = alpha r_l / (S + r_h); sigma_zeta = 1/sqrt(d), the exact
        minimum eigenvalue root of the uniform-sphere covariance."""
        rho = alpha * r_l / (bound_s + r_h)
        if not 0.0 < rho < 1.0:
            raise ConfigurationError(f"mixing weight rho = {rho} outside (0, 1)")
        return cls(rho=rho, sigma_zeta=1.0 / math.sqrt(dim))


def mix_with_direction(
    spec: ConservativeActionSpec, x_b: np.ndarray, zeta: np.ndarray
) -> np.ndarray:
    """(1 - rho) x_b + rho zeta for an explicit unit direction zeta."""
    return (1.0 - spec.rho) * np.asarray(x_b, dtype=float) + spec.rho * np.asarray(
        zeta, dtype=float
    )


def conservative_action(
    spec: ConservativeActionSpec, x_b: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Safe fallback: baseline mixed with a uniform unit-sphere direction.

    Safe for EVERY direction zeta: the margin chain
    x^T theta >= (1-rho) r_b - rho S >= (1-alpha) r_b holds deterministically
    because rho = alpha r_l / (S + r_h) and r_l <= r_b <= r_h.
    """
    x_b = np.asarray(x_b, dtype=float)
    raw = rng.standard_normal(x_b.shape[0])
    zeta = raw / np.linalg.norm(raw)
    return mix_with_direction(spec, x_b, zeta)
