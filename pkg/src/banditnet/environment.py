"""Ground-truth bandit instances: parameters, action set, baseline, rewards.

An instance fixes N local parameter vectors theta_i whose average is the
global parameter the network optimizes, a finite action set X (unit-norm
direction grid plus the baseline ring), a known-reward baseline schedule,
and the noise level.  It also serves as the hidden oracle that scores
regret and stage-wise safety.

Baseline schedule.  The baseline recommends the constant-reward vectors

    x_b(t) = scale * ( u + tan(dev(t)) * v ),
    dev(t) = snap( psi(t) * sin(2 pi t / period) ),
    psi(t) = psi_max * min(1, sqrt(t / ramp_rounds)),

where u is the global-parameter direction and v a fixed orthogonal
direction.  Every baseline vector earns exactly the same expected reward
(scale * ||theta_global||) while its direction sweeps a widening cone,
snapped to a fixed symmetric grid of ``n_grid`` angles so the set of
baseline vectors is finite and contained in the action set.  In ``fixed``
mode dev(t) = 0 for all t.  The sweep is what excites the direction
orthogonal to the optimum: without it the minimum eigenvalue of the Gram
matrix cannot reach the sufficient-excitation threshold within any
realistic horizon.  Norms stay within the action bound because
psi_max <= 60 degrees keeps scale / cos(dev) <= 2 * scale.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, GenerationError, ValidationError

__all__ = [
    "BaselineSchedule",
    "BanditInstance",
    "generate_instance",
    "observe_rewards",
    "instantaneous_regret",
    "safety_margin",
    "save_instance",
    "load_instance",
]

_REJECTION_BUDGET = 1_000_000
_GLOBAL_NORM = 0.8  # norm of the global parameter target
_PERTURB_RADIUS = 0.2

# Seed-stream tags: the global geometry (direction, action set) must not
# depend on the number of agents, so it draws from its own stream.
_TAG_GLOBAL = 101
_TAG_THETA = 102


@dataclass(frozen=True)
class BaselineSchedule:
    """Deterministic baseline recommendation schedule (see module docstring)."""

    mode: str = "ramped"  # "ramped" or "fixed"
    scale: float = 0.5
    psi_max: float = math.pi / 3.0
    # Period short relative to the ramp so each sweep nearly cancels in
    # sum over episodes of tan(dev): a long period lets the widening
    # envelope bias the design matrix off-diagonal, which shows up as an
    # estimation-error floor.
    period: int = 101
    ramp_rounds: int = 10000
    n_grid: int = 65

    def grid(self) -> np.ndarray:
        if self.mode == "fixed":
            return np.zeros(1)
        return np.linspace(-self.psi_max, self.psi_max, self.n_grid)

    def deviations(self, horizon: int) -> np.ndarray:
        """Snapped deviation angle for every round t = 1..horizon."""
        if self.mode == "fixed":
            return np.zeros(horizon)
        t = np.arange(1, horizon + 1, dtype=float)
        psi = self.psi_max * np.minimum(1.0, np.sqrt(t / self.ramp_rounds))
        raw = psi * np.sin(2.0 * math.pi * t / self.period)
        grid = self.grid()
        idx = np.clip(np.round((raw - grid[0]) / (grid[1] - grid[0])), 0, len(grid) - 1)
        return grid[idx.astype(int)]


@dataclass
class BanditInstance:
    """Immutable ground truth for one run (hidden from the algorithm except
    for the published constants)."""

    dim: int
    n_agents: int
    local_thetas: np.ndarray       # (N, d)
    global_theta: np.ndarray       # (d,)
    action_set: np.ndarray         # (K, d)
    baseline_devs: np.ndarray      # (horizon,) deviation angle per round
    baseline_rewards: np.ndarray   # (horizon,) r_{b,t}
    frame_u: np.ndarray            # unit direction of global_theta
    frame_v: np.ndarray            # unit direction orthogonal to frame_u
    schedule: BaselineSchedule
    optimal_index: int
    noise_r: float
    alpha: float
    kappa_l: float
    kappa_h: float
    r_l: float
    r_h: float
    bound_s: float
    bound_l: float
    horizon: int
    seed: int = field(default=0)

    # -- derived views ------------------------------------------------------

    @property
    def optimal_action(self) -> np.ndarray:
        return self.action_set[self.optimal_index]

    @property
    def optimal_reward(self) -> float:
        return float(self.optimal_action @ self.global_theta)

    @property
    def rho(self) -> float:
        """Conservative mixing weight alpha * r_l / (S + r_h)."""
        return self.alpha * self.r_l / (self.bound_s + self.r_h)

    def baseline_action(self, round_t: int) -> np.ndarray:
        dev = float(self.baseline_devs[self._t_index(round_t)])
        return self.schedule.scale * (self.frame_u + math.tan(dev) * self.frame_v)

    def baseline_reward(self, round_t: int) -> float:
        return float(self.baseline_rewards[self._t_index(round_t)])

    def _t_index(self, round_t: int) -> int:
        if not 1 <= round_t <= self.horizon:
            raise ValidationError(
                f"round {round_t} outside horizon 1..{self.horizon}"
            )
        return round_t - 1


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------


def _unit(vec: np.ndarray) -> np.ndarray:
    return vec / np.linalg.norm(vec)


def _sample_ball(rng: np.random.Generator, count: int, dim: int, radius: float) -> np.ndarray:
    if radius <= 0.0 or count == 0:
        return np.zeros((count, dim))
    directions = rng.standard_normal((count, dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = radius * rng.random(count) ** (1.0 / dim)
    return directions * radii[:, None]


def _direction_grid(u: np.ndarray, v: np.ndarray, count: int) -> np.ndarray:
    """Unit vectors at ``count`` evenly spaced angles strictly inside the
    nonnegative-reward half-space around u (all rewards in (0, 0.8])."""
    angles = np.linspace(-math.pi / 2.0, math.pi / 2.0, count + 2)[1:-1]
    return np.cos(angles)[:, None] * u[None, :] + np.sin(angles)[:, None] * v[None, :]


def _rejection_directions(
    rng: np.random.Generator,
    theta: np.ndarray,
    count: int,
    upper: float,
) -> np.ndarray:
    """Unit vectors with reward in [0, upper], for d > 2."""
    dim = theta.shape[0]
    kept: list[np.ndarray] = []
    draws = 0
    while len(kept) < count:
        if draws >= _REJECTION_BUDGET:
            raise GenerationError(
                f"action rejection sampling exhausted after {draws} draws"
            )
        batch = rng.standard_normal((1024, dim))
        draws += 1024
        batch /= np.linalg.norm(batch, axis=1, keepdims=True)
        rewards = batch @ theta
        good = batch[(rewards >= 0.0) & (rewards <= upper)]
        kept.extend(good)
    return np.asarray(kept[:count])


def _baseline_rewards(
    schedule: BaselineSchedule,
    devs: np.ndarray,
    u: np.ndarray,
    v: np.ndarray,
    theta: np.ndarray,
) -> np.ndarray:
    return schedule.scale * ((u @ theta) + np.tan(devs) * (v @ theta))


def generate_instance(
    d: int,
    n: int,
    action_count: int,
    alpha: float,
    noise_r: float,
    horizon: int,
    seed: int,
    bound_s: float = 1.0,
    bound_l: float = 1.0,
    baseline: BaselineSchedule | None = None,
) -> BanditInstance:
    """Sample a ground-truth instance satisfying all published assumptions.

    Local parameters are the exact-mean re-centering of ball perturbations
    around a 0.8-norm target direction; the action set is a deterministic
    angle grid (d = 2) or rejection-sampled directions (d > 2), plus the
    baseline ring; the known constants kappa_l, r_l are 0.9x the realized
    minima so the algorithm's knowledge is conservative but valid.
    """
    if action_count < 2:
        raise ConfigurationError(f"action_count must be >= 2, got {action_count}")
    if not 0.0 < alpha < 1.0:
        raise ConfigurationError(f"alpha must lie in (0, 1), got {alpha}")
    if d < 2:
        raise ConfigurationError(f"dimension must be >= 2, got {d}")
    if n < 1 or horizon < 1:
        raise ConfigurationError("n and horizon must be >= 1")
    if noise_r < 0.0:
        raise ConfigurationError(f"noise level must be >= 0, got {noise_r}")
    if bound_s < _GLOBAL_NORM:
        raise ConfigurationError(
            f"bound_s must be >= {_GLOBAL_NORM} to fit the global parameter"
        )
    if baseline is None:
        baseline = BaselineSchedule()

    rng_global = np.random.default_rng(np.random.SeedSequence((seed, _TAG_GLOBAL)))
    rng_theta = np.random.default_rng(np.random.SeedSequence((seed, _TAG_THETA)))

    # Global parameter target and an orthonormal 2-frame containing it.
    u = _unit(rng_global.standard_normal(d))
    v_raw = rng_global.standard_normal(d)
    v = _unit(v_raw - (v_raw @ u) * u)
    global_theta = _GLOBAL_NORM * u

    # Local parameters: ball perturbations re-centered to the exact target,
    # rescaled if re-centering pushed any deviation past the norm budget.
    radius = min(_PERTURB_RADIUS, bound_s - _GLOBAL_NORM)
    if n == 1:
        local_thetas = global_theta[None, :].copy()
    else:
        perturb = _sample_ball(rng_theta, n, d, radius)
        deviations = perturb - perturb.mean(axis=0)
        max_dev = float(np.linalg.norm(deviations, axis=1).max())
        if max_dev > radius > 0.0:
            deviations *= radius / max_dev
        local_thetas = global_theta[None, :] + deviations

    # Action set: direction grid/rejection sample, then the baseline ring.
    if d == 2:
        directions = _direction_grid(u, v, action_count)
    else:
        directions = np.vstack(
            [u, _rejection_directions(rng_global, global_theta, action_count - 1, 1.0)]
        )
    ring_angles = baseline.grid()
    ring = baseline.scale * (
        u[None, :] + np.tan(ring_angles)[:, None] * v[None, :]
    )
    action_set = np.vstack([directions, ring])

    rewards = action_set @ global_theta
    if rewards.min() < -1e-12 or rewards.max() > 1.0 + 1e-12:
        raise GenerationError("action set rewards fell outside [0, 1]")
    if rewards.max() < 0.5:
        raise GenerationError("no action with global reward >= 0.5")
    optimal_index = int(np.argmax(rewards))

    devs = baseline.deviations(horizon)
    r_b = _baseline_rewards(baseline, devs, u, v, global_theta)
    optimal_reward = float(rewards[optimal_index])
    kappas = optimal_reward - r_b
    if r_b.min() <= 0.0 or kappas.min() < 0.0:
        raise GenerationError("baseline schedule violates its reward bounds")

    instance = BanditInstance(
        dim=d,
        n_agents=n,
        local_thetas=local_thetas,
        global_theta=global_theta,
        action_set=action_set,
        baseline_devs=devs,
        baseline_rewards=r_b,
        frame_u=u,
        frame_v=v,
        schedule=baseline,
        optimal_index=optimal_index,
        noise_r=noise_r,
        alpha=alpha,
        kappa_l=0.9 * float(kappas.min()),
        kappa_h=float(kappas.max()),
        r_l=0.9 * float(r_b.min()),
        r_h=float(r_b.max()),
        bound_s=bound_s,
        bound_l=max(1.0, float(np.linalg.norm(action_set, axis=1).max())),
        horizon=horizon,
        seed=seed,
    )
    return instance


# ---------------------------------------------------------------------------
# Oracle operations
# ---------------------------------------------------------------------------


def observe_rewards(
    instance: BanditInstance, action: np.ndarray, round_rng: np.random.Generator
) -> np.ndarray:
    """Noisy local rewards x^T theta_i + eta_i, eta_i iid N(0, R^2)."""
    means = instance.local_thetas @ np.asarray(action, dtype=float)
    if instance.noise_r == 0.0:
        return means
    return means + instance.noise_r * round_rng.standard_normal(instance.n_agents)


def instantaneous_regret(instance: BanditInstance, action: np.ndarray) -> float:
    """Per-round pseudo-regret of an action against the optimal one.

    Nonnegative for members of the action set; explicit conservative
    mixtures may score any sign and are logged as-is.
    """
    return instance.optimal_reward - float(np.asarray(action) @ instance.global_theta)


def safety_margin(instance: BanditInstance, action: np.ndarray, round_t: int) -> float:
    """Margin of the stage-wise constraint at round t (>= 0 means safe)."""
    threshold = (1.0 - instance.alpha) * instance.baseline_reward(round_t)
    return float(np.asarray(action) @ instance.global_theta) - threshold


# ---------------------------------------------------------------------------
# Serialization (full precision, text)
# ---------------------------------------------------------------------------


def save_instance(instance: BanditInstance, path: str) -> None:
    payload = {
        "dim": instance.dim,
        "n_agents": instance.n_agents,
        "local_thetas": instance.local_thetas.tolist(),
        "global_theta": instance.global_theta.tolist(),
        "action_set": instance.action_set.tolist(),
        "frame_u": instance.frame_u.tolist(),
        "frame_v": instance.frame_v.tolist(),
        "schedule": {
            "mode": instance.schedule.mode,
            "scale": instance.schedule.scale,
            "psi_max": instance.schedule.psi_max,
            "period": instance.schedule.period,
            "ramp_rounds": instance.schedule.ramp_rounds,
            "n_grid": instance.schedule.n_grid,
        },
        "optimal_index": instance.optimal_index,
        "noise_r": instance.noise_r,
        "alpha": instance.alpha,
        "kappa_l": instance.kappa_l,
        "kappa_h": instance.kappa_h,
        "r_l": instance.r_l,
        "r_h": instance.r_h,
        "bound_s": instance.bound_s,
        "bound_l": instance.bound_l,
        "horizon": instance.horizon,
        "seed": instance.seed,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)


def load_instance(path: str) -> BanditInstance:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    schedule = BaselineSchedule(**payload["schedule"])
    devs = schedule.deviations(payload["horizon"])
    u = np.array(payload["frame_u"])
    v = np.array(payload["frame_v"])
    theta = np.array(payload["global_theta"])
    r_b = _baseline_rewards(schedule, devs, u, v, theta)
    return BanditInstance(
        dim=payload["dim"],
        n_agents=payload["n_agents"],
        local_thetas=np.array(payload["local_thetas"]),
        global_theta=theta,
        action_set=np.array(payload["action_set"]),
        baseline_devs=devs,
        baseline_rewards=r_b,
        frame_u=u,
        frame_v=v,
        schedule=schedule,
        optimal_index=payload["optimal_index"],
        noise_r=payload["noise_r"],
        alpha=payload["alpha"],
        kappa_l=payload["kappa_l"],
        kappa_h=payload["kappa_h"],
        r_l=payload["r_l"],
        r_h=payload["r_h"],
        bound_s=payload["bound_s"],
        bound_l=payload["bound_l"],
        horizon=payload["horizon"],
        seed=payload["seed"],
    )
