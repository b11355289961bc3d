"""Episodic simulation loop: action phase, communication phase, estimation.

Each episode plays one action for 1 + q(s) rounds (the action round plus
q(s) communication rounds during which the same action is replayed), runs
the accelerated consensus on the action round's local rewards, and updates
the shared Gram matrix plus every agent's least-squares estimate.  Regret
accrues every round, communication rounds included.

The per-round trace is stored as structure-of-arrays and materialized into
row records / CSV on demand, which keeps a 20000-round run well under a
millisecond per thousand episodes of bookkeeping.

Randomness discipline: one run seed derives independent substreams for
agent selection, per-agent observation noise, and the exploration
directions, all pre-drawn as tables indexed by episode.  Changing alpha
(or the topology) therefore never perturbs the noise or exploration
sequence, which is what makes paired-seed comparisons across sweep values
meaningful.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .consensus import ZERO_GAP, comm_schedule, init_mix, mix_step
from .environment import BanditInstance
from .errors import ValidationError
from .estimator import (
    ConfidenceSpec,
    GramMatrix,
    min_eigenvalue,
    new_gram,
    update_gram,
)
from .graph import NetworkGraph
from .policy import (
    ConservativeActionSpec,
    compute_safe_set,
    excitation_threshold,
    mix_with_direction,
    select_ucb_action,
)

__all__ = [
    "RoundRecord",
    "RunTrace",
    "RunDiagnostics",
    "SimState",
    "new_state",
    "run_episode",
    "run",
    "theoretical_bounds",
    "BoundConstants",
    "write_trace_csv",
    "CSV_COLUMNS",
]

_STREAM_AGENT = 201
_STREAM_NOISE = 202
_STREAM_ZETA = 203

PHASE_NAMES = ("action", "communication")
TYPE_NAMES = ("conservative", "ucb")

CSV_COLUMNS = (
    "round",
    "episode",
    "phase",
    "episode_type",
    "action",
    "inst_regret",
    "cum_regret",
    "expected_reward",
    "safety_threshold",
    "est_error",
)


# ---------------------------------------------------------------------------
# Round accounting
# ---------------------------------------------------------------------------


def episode_plan(t_horizon: int, n_agents: int, lambda2_abs: float):
    """Start round and round count of every episode within the horizon.

    Returns (starts, counts, truncated).  A final episode whose
    communication phase would overrun the horizon contributes exactly one
    (action) round and ends the run.
    """
    if t_horizon < 1:
        raise ValidationError(f"horizon must be >= 1, got {t_horizon}")
    starts: list[int] = []
    counts: list[int] = []
    t, s = 1, 1
    while t <= t_horizon:
        q = comm_schedule(s, n_agents, lambda2_abs)
        if t + q > t_horizon:
            starts.append(t)
            counts.append(1)
            return starts, counts, True
        starts.append(t)
        counts.append(1 + q)
        t += 1 + q
        s += 1
    return starts, counts, False


# ---------------------------------------------------------------------------
# Trace containers
# ---------------------------------------------------------------------------


@dataclass
class RoundRecord:
    round_t: int
    episode_s: int
    phase: str
    episode_type: str
    action: str
    inst_regret: float
    cum_regret: float
    expected_reward: float
    safety_threshold: float
    est_error: float


@dataclass
class RunDiagnostics:
    """Oracle-checked per-run facts (requires oracle_checks=True)."""

    unsafe_rounds: int = 0
    coverage_ok: bool = True
    min_coverage_slack: float = math.inf
    first_ucb_episode: int | None = None
    ucb_episode_count: int = 0
    safe_set_violations: int = 0
    optimism_violations: int = 0
    confidence_checked_ucb_episodes: int = 0
    regret_bound: float = math.nan
    cons_count_bound: float = math.nan


@dataclass
class RunTrace:
    """Full per-round log of one run (structure of arrays)."""

    episode_of_round: np.ndarray   # (rounds,) 1-based episode index
    phase: np.ndarray              # (rounds,) 0 action / 1 communication
    inst_regret: np.ndarray
    cum_regret: np.ndarray
    expected_reward: np.ndarray
    safety_threshold: np.ndarray
    est_error: np.ndarray
    # per-episode companions (index s-1)
    ep_type: np.ndarray            # 0 conservative / 1 ucb
    ep_action_index: np.ndarray    # -1 for explicit mixtures
    ep_actions: np.ndarray         # (episodes, d)
    ep_rounds: np.ndarray
    ep_lambda_min: np.ndarray      # lambda_min(Sigma_{s-1}) seen by episode s
    episodes_completed: int
    conservative_episode_count: int
    truncated: bool
    config_fingerprint: str
    diagnostics: RunDiagnostics | None = None

    @property
    def n_rounds(self) -> int:
        return int(self.episode_of_round.shape[0])

    @property
    def final_cum_regret(self) -> float:
        return float(self.cum_regret[-1])

    def cum_regret_at(self, round_t: int) -> float:
        return float(self.cum_regret[round_t - 1])

    def action_descriptor(self, episode_s: int) -> str:
        idx = int(self.ep_action_index[episode_s - 1])
        if idx >= 0:
            return str(idx)
        vec = self.ep_actions[episode_s - 1]
        return "mix[" + ";".join(repr(float(c)) for c in vec) + "]"

    def row(self, i: int) -> RoundRecord:
        s = int(self.episode_of_round[i])
        return RoundRecord(
            round_t=i + 1,
            episode_s=s,
            phase=PHASE_NAMES[int(self.phase[i])],
            episode_type=TYPE_NAMES[int(self.ep_type[s - 1])],
            action=self.action_descriptor(s),
            inst_regret=float(self.inst_regret[i]),
            cum_regret=float(self.cum_regret[i]),
            expected_reward=float(self.expected_reward[i]),
            safety_threshold=float(self.safety_threshold[i]),
            est_error=float(self.est_error[i]),
        )

    def rows(self):
        for i in range(self.n_rounds):
            yield self.row(i)


def write_trace_csv(trace: RunTrace, path: str) -> None:
    """Serialize the trace with the fixed column order; floats use repr
    (shortest round-trip form) so identical runs yield identical bytes."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for rec in trace.rows():
            fh.write(
                f"{rec.round_t},{rec.episode_s},{rec.phase},{rec.episode_type},"
                f"{rec.action},{rec.inst_regret!r},{rec.cum_regret!r},"
                f"{rec.expected_reward!r},{rec.safety_threshold!r},{rec.est_error!r}\n"
            )


# ---------------------------------------------------------------------------
# Simulation state
# ---------------------------------------------------------------------------


@dataclass
class SimState:
    """Everything one run carries between episodes."""

    instance: BanditInstance
    graph: NetworkGraph
    t_horizon: int
    reg: float
    delta: float
    seed: int
    oracle_checks: bool
    validate_every: int
    # plan
    ep_starts: list[int]
    ep_counts: list[int]
    plan_truncated: bool
    # pre-drawn randomness (indexed by episode-1)
    agent_table: np.ndarray
    zeta_table: np.ndarray
    noise_table: np.ndarray  # (N, episodes)
    # learner state
    gram: GramMatrix = None  # type: ignore[assignment]
    b_matrix: np.ndarray = None  # type: ignore[assignment]
    theta_hats: np.ndarray = None  # type: ignore[assignment]
    cons_spec: ConservativeActionSpec = None  # type: ignore[assignment]
    conf_spec: ConfidenceSpec = None  # type: ignore[assignment]
    episode_s: int = 1
    prev_coverage_ok: bool = True
    est_error_prev: float = 0.0
    # logs (filled per episode)
    log_type: list[int] = field(default_factory=list)
    log_action_index: list[int] = field(default_factory=list)
    log_actions: list[np.ndarray] = field(default_factory=list)
    log_inst_regret: list[float] = field(default_factory=list)
    log_expected: list[float] = field(default_factory=list)
    log_threshold: list[float] = field(default_factory=list)
    log_est_error: list[float] = field(default_factory=list)
    log_lambda_min: list[float] = field(default_factory=list)
    y_history: list[np.ndarray] = field(default_factory=list)
    diag: RunDiagnostics = field(default_factory=RunDiagnostics)

    @property
    def done(self) -> bool:
        return self.episode_s > len(self.ep_starts)


def new_state(
    instance: BanditInstance,
    graph: NetworkGraph,
    t_horizon: int,
    reg: float,
    delta: float,
    seed: int,
    oracle_checks: bool = False,
    validate_every: int = 0,
) -> SimState:
    if graph.n_agents != instance.n_agents:
        raise ValidationError(
            f"graph has {graph.n_agents} agents, instance has {instance.n_agents}"
        )
    if t_horizon > instance.horizon:
        raise ValidationError(
            f"horizon {t_horizon} exceeds instance horizon {instance.horizon}"
        )
    starts, counts, truncated = episode_plan(t_horizon, graph.n_agents, graph.lambda2_abs)
    m_upper = len(starts)
    n = graph.n_agents

    agent_rng = np.random.default_rng(np.random.SeedSequence((seed, _STREAM_AGENT)))
    agent_table = agent_rng.integers(0, n, size=m_upper)
    zeta_rng = np.random.default_rng(np.random.SeedSequence((seed, _STREAM_ZETA)))
    raw = zeta_rng.standard_normal((m_upper, instance.dim))
    zeta_table = raw / np.linalg.norm(raw, axis=1, keepdims=True)
    # Per-agent noise streams: agent i's draws do not depend on how many
    # other agents exist, so network-size sweeps stay noise-paired.
    noise_table = np.empty((n, m_upper))
    for i in range(n):
        rng_i = np.random.default_rng(np.random.SeedSequence((seed, _STREAM_NOISE, i)))
        noise_table[i] = rng_i.standard_normal(m_upper)

    state = SimState(
        instance=instance,
        graph=graph,
        t_horizon=t_horizon,
        reg=reg,
        delta=delta,
        seed=seed,
        oracle_checks=oracle_checks,
        validate_every=validate_every,
        ep_starts=starts,
        ep_counts=counts,
        plan_truncated=truncated,
        agent_table=agent_table,
        zeta_table=zeta_table,
        noise_table=noise_table,
    )
    state.gram = new_gram(instance.dim, reg)
    state.b_matrix = np.zeros((n, instance.dim))
    state.theta_hats = np.zeros((n, instance.dim))
    state.cons_spec = ConservativeActionSpec.from_bounds(
        instance.alpha, instance.r_l, instance.bound_s, instance.r_h, instance.dim
    )
    state.conf_spec = ConfidenceSpec.for_run(
        n, instance.noise_r, instance.dim, reg, instance.bound_s,
        instance.bound_l, delta,
    )
    state.est_error_prev = float(np.linalg.norm(instance.global_theta))
    return state


# ---------------------------------------------------------------------------
# Episode step
# ---------------------------------------------------------------------------


def run_episode(state: SimState) -> None:
    """Execute (and log) the current episode, advancing the state.

    The UCB path is taken iff the excitation gate lambda_min(Sigma_{s-1})
    >= k_{t_s} holds AND the safe set is non-empty; otherwise the
    randomized conservative action is played.  A truncated final episode
    logs its action round and leaves the estimator untouched.
    """
    if state.done:
        raise ValidationError("run already finished")
    inst = state.instance
    s = state.episode_s
    t_s = state.ep_starts[s - 1]
    n_rounds = state.ep_counts[s - 1]
    truncated = state.plan_truncated and s == len(state.ep_starts)

    beta_prev = state.conf_spec.radius(s - 1)
    k_t = excitation_threshold(
        beta_prev, inst.bound_l, inst.kappa_l, inst.alpha, inst.r_l
    )
    lam_min = min_eigenvalue(state.gram)
    x_b = inst.baseline_action(t_s)
    r_b = inst.baseline_reward(t_s)

    action_index = -1
    episode_type = 0  # conservative
    if lam_min >= k_t:
        acting_agent = int(state.agent_table[s - 1])
        safe = compute_safe_set(
            inst.action_set, state.theta_hats[acting_agent], state.gram,
            beta_prev, inst.alpha, r_b,
        )
        choice = select_ucb_action(safe, state.theta_hats[acting_agent], state.gram, beta_prev)
        if choice is not None:
            action_index = choice
            episode_type = 1
            if state.oracle_checks:
                _check_ucb_episode(state, safe, choice, beta_prev)
    if episode_type == 1:
        action = inst.action_set[action_index]
    else:
        action = mix_with_direction(state.cons_spec, x_b, state.zeta_table[s - 1])

    expected = float(action @ inst.global_theta)
    threshold = (1.0 - inst.alpha) * r_b
    diag = state.diag
    if episode_type == 1:
        if diag.first_ucb_episode is None:
            diag.first_ucb_episode = s
        diag.ucb_episode_count += 1
    if expected < threshold:
        diag.unsafe_rounds += n_rounds

    state.log_type.append(episode_type)
    state.log_action_index.append(action_index)
    state.log_actions.append(action)
    state.log_inst_regret.append(inst.optimal_reward - expected)
    state.log_expected.append(expected)
    state.log_threshold.append(threshold)
    state.log_est_error.append(state.est_error_prev)
    state.log_lambda_min.append(lam_min)

    state.episode_s += 1
    if truncated:
        return

    # Observation and communication phase.
    rewards = inst.local_thetas @ action
    if inst.noise_r != 0.0:
        rewards = rewards + inst.noise_r * state.noise_table[:, s - 1]
    q = n_rounds - 1
    if inst.n_agents == 1 or q == 0:
        y = rewards
    elif state.graph.lambda2_abs <= ZERO_GAP:
        y = state.graph.weights @ rewards
    else:
        mix = init_mix(rewards)
        for _ in range(q):
            mix = mix_step(mix, state.graph)
        y = mix.current

    update_gram(state.gram, action)
    state.b_matrix += y[:, None] * action[None, :]
    state.theta_hats = state.b_matrix @ state.gram.sigma_inv
    state.y_history.append(y)
    state.est_error_prev = float(
        np.linalg.norm(state.theta_hats.mean(axis=0) - inst.global_theta)
    )

    if state.oracle_checks:
        _check_coverage(state, s)
    if state.validate_every and s % state.validate_every == 0:
        _validate_internal(state)


def agent_estimate(state: SimState, agent_id: int) -> "AgentEstimate":
    """One agent's current estimate and reward-estimate history."""
    from .estimator import AgentEstimate

    ys = np.array([y[agent_id] for y in state.y_history])
    return AgentEstimate(
        agent_id=agent_id,
        theta_hat=state.theta_hats[agent_id].copy(),
        y_history=ys,
    )


def _check_ucb_episode(state: SimState, safe, choice: int, beta_prev: float) -> None:
    """Safe-set inclusion and optimism, audited only on episodes where the
    oracle confirmed every agent's confidence set before this episode."""
    if not state.prev_coverage_ok:
        return
    inst = state.instance
    diag = state.diag
    diag.confidence_checked_ucb_episodes += 1
    if inst.optimal_index not in safe.safe_indices:
        diag.safe_set_violations += 1
    chosen_vec = inst.action_set[choice]
    width = math.sqrt(
        max(float(chosen_vec @ state.gram.sigma_inv @ chosen_vec), 0.0)
    )
    acting_agent = int(state.agent_table[state.episode_s - 1])
    ucb_value = float(chosen_vec @ state.theta_hats[acting_agent]) + beta_prev * width
    if ucb_value < inst.optimal_reward - 1e-12:
        diag.optimism_violations += 1


def _check_coverage(state: SimState, s: int) -> None:
    """theta_global in every agent's ellipsoid after episode s."""
    inst = state.instance
    beta_s = state.conf_spec.radius(s)
    errs = state.theta_hats - inst.global_theta[None, :]
    quad = np.einsum("nd,de,ne->n", errs, state.gram.sigma, errs)
    worst = math.sqrt(max(float(quad.max()), 0.0))
    slack = beta_s - worst
    diag = state.diag
    diag.min_coverage_slack = min(diag.min_coverage_slack, slack)
    covered = slack >= 0.0
    if not covered:
        diag.coverage_ok = False
    state.prev_coverage_ok = covered


def _validate_internal(state: SimState) -> None:
    """Estimator self-consistency invariants (test hook)."""
    actions = np.asarray(state.log_actions[: len(state.y_history)])
    sigma_rebuilt = state.reg * np.eye(state.instance.dim) + actions.T @ actions
    if not np.allclose(sigma_rebuilt, state.gram.sigma, atol=1e-9):
        raise AssertionError("Gram matrix diverged from its definition")
    identity = state.gram.sigma @ state.gram.sigma_inv
    if np.linalg.norm(identity - np.eye(state.instance.dim)) > 1e-8:
        raise AssertionError("maintained inverse drifted past tolerance")
    ys = np.asarray(state.y_history)  # (episodes, N)
    theta_direct = np.linalg.solve(sigma_rebuilt, actions.T @ ys).T
    if not np.allclose(theta_direct, state.theta_hats, atol=1e-9):
        raise AssertionError("incremental estimates diverged from direct solve")


# ---------------------------------------------------------------------------
# Full run
# ---------------------------------------------------------------------------


def _fingerprint(parts) -> str:
    text = "|".join(str(p) for p in parts)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def run(
    config,
    instance: BanditInstance,
    graph: NetworkGraph,
    seed: int,
    oracle_checks: bool = False,
    validate_every: int = 0,
) -> RunTrace:
    """Execute a full run; deterministic given (config, instance, graph, seed).

    ``config`` provides t_horizon, reg_lambda and delta (the harness's
    ExperimentConfig or any object with those attributes).
    """
    state = new_state(
        instance, graph, int(config.t_horizon), float(config.reg_lambda),
        float(config.delta), seed, oracle_checks, validate_every,
    )
    while not state.done:
        run_episode(state)
    return _build_trace(state, config)


def _build_trace(state: SimState, config) -> RunTrace:
    counts = np.asarray(state.ep_counts, dtype=np.int64)
    m_total = len(state.ep_starts)
    m_complete = m_total - 1 if state.plan_truncated else m_total
    ep_type = np.asarray(state.log_type, dtype=np.int8)
    inst_regret_ep = np.asarray(state.log_inst_regret)

    episode_of_round = np.repeat(np.arange(1, m_total + 1), counts)
    phase = np.ones(int(counts.sum()), dtype=np.int8)
    starts_idx = np.concatenate(([0], np.cumsum(counts)[:-1]))
    phase[starts_idx] = 0
    inst_regret = np.repeat(inst_regret_ep, counts)

    diag = state.diag if state.oracle_checks else None
    if diag is not None:
        beta_m = state.conf_spec.radius(m_complete)
        q_m = comm_schedule(max(m_complete, 1), state.graph.n_agents, state.graph.lambda2_abs)
        regret_bound, cons_bound = theoretical_bounds(
            BoundConstants.from_instance(state.instance),
            dim=state.instance.dim,
            reg=state.reg,
            delta=state.delta,
            beta_m=beta_m,
            m_episodes=max(m_complete, 1),
            q_m=q_m,
        )
        diag.regret_bound = regret_bound
        diag.cons_count_bound = cons_bound

    return RunTrace(
        episode_of_round=episode_of_round,
        phase=phase,
        inst_regret=inst_regret,
        cum_regret=np.cumsum(inst_regret),
        expected_reward=np.repeat(np.asarray(state.log_expected), counts),
        safety_threshold=np.repeat(np.asarray(state.log_threshold), counts),
        est_error=np.repeat(np.asarray(state.log_est_error), counts),
        ep_type=ep_type,
        ep_action_index=np.asarray(state.log_action_index, dtype=np.int64),
        ep_actions=np.asarray(state.log_actions),
        ep_rounds=counts,
        ep_lambda_min=np.asarray(state.log_lambda_min),
        episodes_completed=m_complete,
        conservative_episode_count=int((ep_type[:m_complete] == 0).sum()),
        truncated=state.plan_truncated,
        config_fingerprint=_fingerprint(
            (
                getattr(config, "fingerprint_key", lambda: repr(config))(),
                state.instance.seed,
                state.graph.kind,
                state.graph.n_agents,
                state.seed,
            )
        ),
        diagnostics=diag,
    )


# ---------------------------------------------------------------------------
# Theoretical bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundConstants:
    """Assumption constants feeding the closed-form bounds; sourced either
    from a generated instance (realized values) or from a config's nominal
    values when no instance is in scope."""

    alpha: float
    kappa_l: float
    kappa_h: float
    r_l: float
    r_h: float
    bound_s: float
    bound_l: float

    @classmethod
    def from_instance(cls, instance: BanditInstance) -> "BoundConstants":
        return cls(
            alpha=instance.alpha,
            kappa_l=instance.kappa_l,
            kappa_h=instance.kappa_h,
            r_l=instance.r_l,
            r_h=instance.r_h,
            bound_s=instance.bound_s,
            bound_l=instance.bound_l,
        )

    @property
    def rho(self) -> float:
        return self.alpha * self.r_l / (self.bound_s + self.r_h)

    def h1(self) -> float:
        rho = self.rho
        return 2.0 * rho * (1.0 - rho) * self.bound_l + 2.0 * rho**2


def theoretical_bounds(
    constants: BoundConstants,
    dim: int,
    reg: float,
    delta: float,
    beta_m: float,
    m_episodes: int,
    q_m: int,
) -> tuple[float, float]:
    """Numeric high-probability bounds (regret_bound, cons_count_bound).

    cons_count_bound is the closed-form cap on the number of conservative
    episodes; the regret bound multiplies the per-episode terms by the
    worst-case episode length (1 + q(M)) and uses min(cons_count_bound, M)
    since no run can hold more conservative episodes than episodes.
    """
    rho = constants.rho
    sigma_z = 1.0 / math.sqrt(dim)
    denom = constants.kappa_l + constants.alpha * constants.r_l
    h1 = constants.h1()
    log_term = math.log(dim / (delta / 2.0))
    big_l = constants.bound_l

    cons_bound = (
        (2.0 * big_l * beta_m / (rho * sigma_z * denom)) ** 2
        + (2.0 * h1**2 / (rho**4 * sigma_z**4)) * log_term
        + (2.0 * big_l * h1 * beta_m / (rho**3 * sigma_z**3 * denom))
        * math.sqrt(8.0 * log_term)
    )
    ucb_term = 2.0 * beta_m * math.sqrt(
        2.0 * dim * m_episodes * math.log(1.0 + m_episodes * big_l**2 / (reg * dim))
    )
    cons_term = min(cons_bound, float(m_episodes)) * (
        constants.kappa_h + rho * (constants.r_h + constants.bound_s)
    )
    regret_bound = (1.0 + q_m) * (ucb_term + cons_term)
    return regret_bound, cons_bound
