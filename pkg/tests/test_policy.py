from __future__ import annotations

import numpy as np
import pytest

from banditnet.errors import ConfigurationError, ValidationError
from banditnet.estimator import new_gram, update_gram
from banditnet.policy import (
    ConservativeActionSpec,
    compute_safe_set,
    conservative_action,
    excitation_threshold,
    mix_with_direction,
    select_ucb_action,
)


def diag_gram(d1: float, d2: float):
    gram = new_gram(2, 1.0)
    gram.sigma = np.diag([d1, d2])
    gram.sigma_inv = np.diag([1.0 / d1, 1.0 / d2])
    return gram


# ---------------------------------------------------------------------------
# Safe set
# ---------------------------------------------------------------------------


def test_safe_set_worked_example():
    # LCB(e1) = 0.9 - 0.2*0.5 = 0.8 >= (1-0.2)*0.9 = 0.72 -> safe.
    gram = diag_gram(4.0, 1.0)
    view = compute_safe_set(
        np.array([[1.0, 0.0]]), np.array([0.9, 0.0]), gram, 0.2, 0.2, 0.9
    )
    assert view.lcb_values[0] == pytest.approx(0.8)
    assert view.threshold == pytest.approx(0.72)
    assert list(view.safe_indices) == [0]


def test_zero_beta_recovers_true_safe_set():
    rng = np.random.default_rng(0)
    theta = np.array([0.8, 0.1])
    actions = rng.standard_normal((40, 2))
    gram = new_gram(2, 0.1)
    view = compute_safe_set(actions, theta, gram, 0.0, 0.3, 0.5)
    oracle = np.flatnonzero(actions @ theta >= 0.7 * 0.5)
    assert np.array_equal(view.safe_indices, oracle)


def test_huge_beta_empties_safe_set():
    rng = np.random.default_rng(1)
    actions = rng.standard_normal((20, 2))
    actions = actions[np.linalg.norm(actions, axis=1) > 0.1]
    gram = new_gram(2, 0.1)
    view = compute_safe_set(actions, np.array([0.8, 0.0]), gram, 1e9, 0.2, 0.4)
    assert view.empty
    assert select_ucb_action(view, np.array([0.8, 0.0]), gram, 1e9) is None


def test_negative_beta_rejected():
    with pytest.raises(ValidationError):
        compute_safe_set(np.ones((1, 2)), np.ones(2), new_gram(2, 1.0), -0.1, 0.2, 0.4)


def test_baseline_membership_under_accurate_estimate():
    """With theta_hat = theta and beta < alpha r_b / ||x_b||, the baseline
    action itself clears its own threshold."""
    theta = np.array([0.8, 0.0])
    x_b = np.array([0.5, 0.0])
    gram = diag_gram(2.0, 2.0)
    r_b = float(x_b @ theta)
    alpha = 0.2
    width = np.sqrt(x_b @ gram.sigma_inv @ x_b)
    beta = 0.9 * alpha * r_b / width
    view = compute_safe_set(np.array([x_b]), theta, gram, beta, alpha, r_b)
    assert 0 in view.safe_indices


# ---------------------------------------------------------------------------
# Excitation threshold
# ---------------------------------------------------------------------------


def test_threshold_worked_value():
    assert excitation_threshold(3.483, 1.0, 0.1, 0.2, 0.5) == pytest.approx(
        1213.1, abs=0.5
    )


def test_threshold_zero_beta():
    assert excitation_threshold(0.0, 1.0, 0.1, 0.2, 0.5) == 0.0


def test_threshold_quadratic_in_l():
    base = excitation_threshold(2.0, 1.0, 0.1, 0.2, 0.5)
    assert excitation_threshold(2.0, 2.0, 0.1, 0.2, 0.5) == pytest.approx(4 * base)


def test_threshold_degenerate_denominator():
    with pytest.raises(ConfigurationError):
        excitation_threshold(1.0, 1.0, 0.0, 0.2, 0.0)


# ---------------------------------------------------------------------------
# UCB selection
# ---------------------------------------------------------------------------


def test_ucb_worked_example():
    # UCB(e1) = 0.9 + 0.2*0.5 = 1.0; UCB(e2) = 0 + 0.2*1 = 0.2 -> e1.
    gram = diag_gram(4.0, 1.0)
    actions = np.array([[1.0, 0.0], [0.0, 1.0]])
    theta = np.array([0.9, 0.0])
    view = compute_safe_set(actions, theta, gram, 0.2, 0.9, 0.01)
    choice = select_ucb_action(view, theta, gram, 0.2)
    assert choice == 0


def test_zero_beta_picks_true_optimum():
    rng = np.random.default_rng(3)
    theta = np.array([0.7, -0.2])
    actions = rng.standard_normal((30, 2))
    gram = new_gram(2, 0.1)
    view = compute_safe_set(actions, theta, gram, 0.0, 0.99, 1e-9)
    choice = select_ucb_action(view, theta, gram, 0.0)
    oracle = int(np.argmax(actions @ theta))
    assert choice == oracle


def test_ucb_matches_brute_force_oracle():
    rng = np.random.default_rng(4)
    for trial in range(25):
        actions = rng.standard_normal((50, 2))
        theta = rng.standard_normal(2) * 0.5
        gram = new_gram(2, 0.5)
        for x in rng.standard_normal((12, 2)):
            update_gram(gram, x)
        beta = float(rng.random() * 2)
        r_b = float(rng.random() * 0.3 + 0.05)
        view = compute_safe_set(actions, theta, gram, beta, 0.2, r_b)
        choice = select_ucb_action(view, theta, gram, beta)
        widths = np.sqrt(np.einsum("kd,de,ke->k", actions, gram.sigma_inv, actions))
        ucb = actions @ theta + beta * widths
        feasible = np.flatnonzero(actions @ theta - beta * widths >= 0.8 * r_b)
        if feasible.size == 0:
            assert choice is None
        else:
            assert choice == feasible[np.argmax(ucb[feasible])]


def test_tie_breaks_to_lowest_index():
    actions = np.array([[0.5, 0.0], [0.5, 0.0], [0.4, 0.0]])
    theta = np.array([1.0, 0.0])
    gram = new_gram(2, 1.0)
    view = compute_safe_set(actions, theta, gram, 0.0, 0.5, 0.1)
    assert select_ucb_action(view, theta, gram, 0.0) == 0


# ---------------------------------------------------------------------------
# Conservative action
# ---------------------------------------------------------------------------


def test_rho_worked_value():
    spec = ConservativeActionSpec.from_bounds(0.2, 0.5, 1.0, 1.0, 2)
    assert spec.rho == pytest.approx(0.05)
    assert spec.sigma_zeta == pytest.approx(1.0 / np.sqrt(2.0))


def test_rho_out_of_range():
    with pytest.raises(ConfigurationError):
        ConservativeActionSpec.from_bounds(0.0, 0.0, 1.0, 1.0, 2)


def test_worked_margin_chain():
    # r_b = 0.8, rho = 0.05, S = 1: reward >= 0.95*0.8 - 0.05 = 0.71 >= 0.64.
    spec = ConservativeActionSpec(rho=0.05, sigma_zeta=1.0 / np.sqrt(2))
    theta = np.array([1.0, 0.0])
    x_b = np.array([0.8, 0.0])
    worst = mix_with_direction(spec, x_b, -theta)
    assert float(worst @ theta) >= 0.71 - 1e-12
    assert float(worst @ theta) >= (1 - 0.2) * 0.8


def test_deterministic_safety_all_directions():
    """For every direction on the sphere (sampled plus adversarial), the
    conservative mixture clears the stage-wise threshold with no tolerance."""
    rng = np.random.default_rng(5)
    theta = 0.8 * np.array([np.cos(0.3), np.sin(0.3)])
    r_b, r_l, r_h, alpha, bound_s = 0.4, 0.36, 0.4, 0.2, 1.0
    x_b = 0.5 * theta / np.linalg.norm(theta)
    spec = ConservativeActionSpec.from_bounds(alpha, r_l, bound_s, r_h, 2)
    threshold = (1 - alpha) * r_b
    zetas = rng.standard_normal((10_000, 2))
    zetas /= np.linalg.norm(zetas, axis=1, keepdims=True)
    zetas = np.vstack([zetas, -theta[None, :] / np.linalg.norm(theta)])
    rewards = ((1 - spec.rho) * x_b + spec.rho * zetas) @ theta
    assert (rewards >= threshold).all()


def test_action_norm_bounded():
    spec = ConservativeActionSpec(rho=0.05, sigma_zeta=1.0 / np.sqrt(2))
    rng = np.random.default_rng(6)
    x_b = np.array([0.3, 0.4])
    for _ in range(100):
        act = conservative_action(spec, x_b, rng)
        assert np.linalg.norm(act) <= (1 - spec.rho) * 0.5 + spec.rho + 1e-12


def test_sphere_direction_covariance():
    spec = ConservativeActionSpec(rho=1.0 - 1e-12, sigma_zeta=1.0 / np.sqrt(2))
    rng = np.random.default_rng(7)
    draws = np.array([conservative_action(spec, np.zeros(2), rng) for _ in range(100_000)])
    cov = draws.T @ draws / draws.shape[0]
    assert np.linalg.norm(cov - 0.5 * np.eye(2), 2) <= 0.02 * 0.5 * 2


def test_conservative_action_determinism():
    spec = ConservativeActionSpec(rho=0.05, sigma_zeta=1.0 / np.sqrt(2))
    a = conservative_action(spec, np.array([0.5, 0.0]), np.random.default_rng(9))
    b = conservative_action(spec, np.array([0.5, 0.0]), np.random.default_rng(9))
    assert np.array_equal(a, b)
