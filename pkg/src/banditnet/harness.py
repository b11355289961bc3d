"""Experiment configs, seed ensembles, aggregation and CSV outputs.

A config expands into one or more concrete sub-configurations (a sweep),
each of which runs an ensemble of independent seeds.  Per-run child seeds
derive from the master seed and the seed index only, so every sweep value
sees identical instances, noise tables and exploration directions: sweep
comparisons are paired by construction.

Output layout (one directory per sub-configuration):

    <output_dir>/<config_id>/run_<seed_index>.csv   raw per-round traces
    <output_dir>/<config_id>/aggregate.csv          mean/stderr curves
    <output_dir>/summary.csv                        final-round statistics
"""

from __future__ import annotations

import dataclasses
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .consensus import comm_schedule
from .environment import BaselineSchedule, generate_instance
from .errors import ConfigurationError
from .estimator import confidence_radius
from .graph import build_topology
from .policy import excitation_threshold
from .simulator import (
    BoundConstants,
    RunTrace,
    run,
    theoretical_bounds,
    write_trace_csv,
)

__all__ = [
    "ExperimentConfig",
    "SeedResult",
    "EnsembleResult",
    "parse_config",
    "expand_config",
    "run_ensemble",
    "run_experiment",
    "evaluate_bounds",
]

_EXPERIMENTS = ("single", "connectivity_sweep", "alpha_sweep", "n_scaling")
_TOPOLOGIES = ("complete", "ring", "k_regular", "erdos_renyi")
_BASELINES = ("ramped", "fixed")
_SWEEPABLE = ("alpha", "topo_k", "topo_p", "n_agents", "t_horizon", "noise_r")

_SEED_TAG_RUN = 9001
_SEED_TAG_GRAPH = 9002

AGGREGATE_COLUMNS = (
    "config_id",
    "n_seeds",
    "round",
    "mean_cum_regret",
    "stderr_cum_regret",
    "mean_expected_reward",
    "stderr_expected_reward",
    "mean_safety_threshold",
    "stderr_safety_threshold",
    "mean_est_error",
    "stderr_est_error",
)


@dataclass
class ExperimentConfig:
    """Full experiment description; defaults follow the reference setup
    (d = 2, T = 20000, R = 0.01, S = 1.0, reg = 0.1, delta = 0.01, L = 1.0,
    50 seeds)."""

    experiment: str = "single"
    d: int = 2
    t_horizon: int = 20000
    n_agents: int = 100
    noise_r: float = 0.01
    bound_s: float = 1.0
    bound_l: float = 1.0
    reg_lambda: float = 0.1
    delta: float = 0.01
    alpha: float = 0.2
    topology: str = "complete"
    topo_k: int | None = None
    topo_p: float | None = None
    action_count: int = 64
    baseline: str = "ramped"
    n_seeds: int = 50
    master_seed: int = 0
    output_dir: str = "results"
    sweep: dict = field(default_factory=dict)
    # Nominal assumption constants: used by bound evaluation when no
    # generated instance is in scope (the `bounds` subcommand).
    nominal_r_l: float = 0.5
    nominal_r_h: float = 1.0
    nominal_kappa_l: float = 0.1
    nominal_kappa_h: float = 1.0

    def validate(self) -> None:
        if self.experiment not in _EXPERIMENTS:
            raise ConfigurationError(
                f"experiment must be one of {_EXPERIMENTS}, got {self.experiment!r}"
            )
        if not 0.0 < self.alpha < 1.0:
            raise ConfigurationError(
                f"alpha must lie in (0, 1), got {self.alpha}"
            )
        if not 0.0 < self.delta < 1.0:
            raise ConfigurationError(f"delta must lie in (0, 1), got {self.delta}")
        if self.d < 2:
            raise ConfigurationError(f"d must be >= 2, got {self.d}")
        if self.t_horizon < 1:
            raise ConfigurationError(f"t_horizon must be >= 1, got {self.t_horizon}")
        if self.n_agents < 1:
            raise ConfigurationError(f"n_agents must be >= 1, got {self.n_agents}")
        if self.noise_r < 0.0:
            raise ConfigurationError(f"noise_r must be >= 0, got {self.noise_r}")
        if self.reg_lambda <= 0.0:
            raise ConfigurationError(f"reg_lambda must be > 0, got {self.reg_lambda}")
        if self.bound_l <= 0.0 or self.bound_s <= 0.0:
            raise ConfigurationError("bound_l and bound_s must be > 0")
        if self.action_count < 2:
            raise ConfigurationError(f"action_count must be >= 2, got {self.action_count}")
        if self.topology not in _TOPOLOGIES:
            raise ConfigurationError(
                f"topology must be one of {_TOPOLOGIES}, got {self.topology!r}"
            )
        if self.topology == "k_regular":
            if self.topo_k is None and "topo_k" not in self.sweep:
                raise ConfigurationError("k_regular topology requires topo_k")
            if self.topo_k is not None and not 1 <= self.topo_k <= self.n_agents - 1:
                raise ConfigurationError(
                    f"topo_k must lie in 1..n_agents-1, got {self.topo_k}"
                )
        if self.baseline not in _BASELINES:
            raise ConfigurationError(
                f"baseline must be one of {_BASELINES}, got {self.baseline!r}"
            )
        if self.n_seeds < 1:
            raise ConfigurationError(f"n_seeds must be >= 1, got {self.n_seeds}")
        for key, values in self.sweep.items():
            if key not in _SWEEPABLE:
                raise ConfigurationError(
                    f"sweep key {key!r} not supported; valid keys: {_SWEEPABLE}"
                )
            if not values:
                raise ConfigurationError(f"sweep over {key!r} has no values")
            for value in values:
                try:
                    replace(self, sweep={}, **{key: value}).validate()
                except ConfigurationError as exc:
                    raise ConfigurationError(
                        f"sweep value {key}={value!r} invalid: {exc}"
                    ) from None

    def fingerprint_key(self) -> str:
        payload = dataclasses.asdict(self)
        payload.pop("output_dir")
        return repr(sorted(payload.items()))

    def baseline_schedule(self) -> BaselineSchedule:
        return BaselineSchedule(mode=self.baseline)


# ---------------------------------------------------------------------------
# Config file parsing (flat key = value, one optional [sweep] section)
# ---------------------------------------------------------------------------

_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}
_INT_FIELDS = {"d", "t_horizon", "n_agents", "topo_k", "action_count", "n_seeds", "master_seed"}
_FLOAT_FIELDS = {
    "noise_r", "bound_s", "bound_l", "reg_lambda", "delta", "alpha", "topo_p",
    "nominal_r_l", "nominal_r_h", "nominal_kappa_l", "nominal_kappa_h",
}
_STR_FIELDS = {"experiment", "topology", "baseline", "output_dir"}


def _convert(key: str, raw: str):
    raw = raw.strip()
    if key in _INT_FIELDS:
        try:
            return int(raw)
        except ValueError:
            raise ConfigurationError(f"{key} expects an integer, got {raw!r}") from None
    if key in _FLOAT_FIELDS:
        try:
            return float(raw)
        except ValueError:
            raise ConfigurationError(f"{key} expects a number, got {raw!r}") from None
    if key in _STR_FIELDS:
        return raw
    raise ConfigurationError(f"unknown config key {key!r}")


def parse_config(path: str) -> ExperimentConfig:
    """Parse the flat key-value config format with one [sweep] section."""
    config = ExperimentConfig()
    in_sweep = False
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if text == "[sweep]":
                in_sweep = True
                continue
            if text.startswith("["):
                raise ConfigurationError(f"{path}:{lineno}: unknown section {text}")
            if "=" not in text:
                raise ConfigurationError(f"{path}:{lineno}: expected key = value")
            key, raw = (part.strip() for part in text.split("=", 1))
            if in_sweep:
                if key not in _SWEEPABLE:
                    raise ConfigurationError(
                        f"{path}:{lineno}: sweep key {key!r} not supported; "
                        f"valid keys: {_SWEEPABLE}"
                    )
                values = [_convert(key, v) for v in raw.split(",") if v.strip()]
                config.sweep[key] = values
            else:
                setattr(config, key, _convert(key, raw))
    return config


def expand_config(config: ExperimentConfig) -> list[tuple[str, ExperimentConfig]]:
    """Concrete (config_id, sub-config) pairs, applying experiment presets."""
    cfg = replace(config, sweep=dict(config.sweep))
    if not cfg.sweep:
        if cfg.experiment == "connectivity_sweep":
            cfg.topology = "k_regular"
            cfg.sweep = {"topo_k": [4, 16, 64, 99]}
        elif cfg.experiment == "alpha_sweep":
            cfg.sweep = {"alpha": [0.1, 0.2, 0.3, 0.4]}
        elif cfg.experiment == "n_scaling":
            cfg.sweep = {"n_agents": [1, 10, 100, 1000]}
    cfg.validate()
    if not cfg.sweep:
        return [("single", replace(cfg, sweep={}))]
    (key, values), = cfg.sweep.items()
    out = []
    for value in values:
        sub = replace(cfg, sweep={}, **{key: value})
        out.append((f"{key}={value}", sub))
    return out


# ---------------------------------------------------------------------------
# Ensemble execution
# ---------------------------------------------------------------------------


@dataclass
class SeedResult:
    """Small per-run record returned by ensemble workers."""

    seed_index: int
    child_seed: int
    n_rounds: int
    episodes_completed: int
    conservative_episodes: int
    first_ucb_episode: int | None
    final_cum_regret: float
    final_est_error: float
    unsafe_rounds: int
    coverage_ok: bool
    min_coverage_slack: float
    safe_set_violations: int
    optimism_violations: int
    checked_ucb_episodes: int
    regret_bound: float
    cons_count_bound: float
    truncated: bool
    curves: dict | None = None


@dataclass
class EnsembleResult:
    config_id: str
    config: ExperimentConfig
    results: list[SeedResult]

    def mean_final_regret(self) -> float:
        return float(np.mean([r.final_cum_regret for r in self.results]))

    def stderr_final_regret(self) -> float:
        vals = [r.final_cum_regret for r in self.results]
        if len(vals) < 2:
            return 0.0
        return float(np.std(vals, ddof=1) / math.sqrt(len(vals)))

    def mean_final_est_error(self) -> float:
        return float(np.mean([r.final_est_error for r in self.results]))


def child_seed(master_seed: int, seed_index: int) -> int:
    ss = np.random.SeedSequence((master_seed, _SEED_TAG_RUN, seed_index))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def graph_seed(master_seed: int) -> int:
    ss = np.random.SeedSequence((master_seed, _SEED_TAG_GRAPH))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


_GRAPH_CACHE: dict = {}


def _build_graph(cfg: ExperimentConfig):
    """Graphs depend only on (topology, n, k, p, master seed); cache per
    process so ensemble workers build each one once."""
    key = (cfg.topology, cfg.n_agents, cfg.topo_k, cfg.topo_p, cfg.master_seed)
    graph = _GRAPH_CACHE.get(key)
    if graph is None:
        graph = build_topology(
            cfg.topology, cfg.n_agents, k=cfg.topo_k, p=cfg.topo_p,
            seed=graph_seed(cfg.master_seed),
        )
        if len(_GRAPH_CACHE) > 32:
            _GRAPH_CACHE.clear()
        _GRAPH_CACHE[key] = graph
    return graph


def run_one(
    cfg: ExperimentConfig,
    seed_index: int,
    keep_curves: bool = False,
    write_path: str | None = None,
    oracle_checks: bool = True,
) -> SeedResult:
    """Run a single seed of a concrete sub-configuration."""
    seed = child_seed(cfg.master_seed, seed_index)
    graph = _build_graph(cfg)
    instance = generate_instance(
        cfg.d, cfg.n_agents, cfg.action_count, cfg.alpha, cfg.noise_r,
        cfg.t_horizon, seed, bound_s=cfg.bound_s, bound_l=cfg.bound_l,
        baseline=cfg.baseline_schedule(),
    )
    trace = run(cfg, instance, graph, seed, oracle_checks=oracle_checks)
    if write_path is not None:
        write_trace_csv(trace, write_path)
    return _summarize(trace, seed_index, seed, keep_curves)


def _summarize(trace: RunTrace, seed_index: int, seed: int, keep_curves: bool) -> SeedResult:
    diag = trace.diagnostics
    curves = None
    if keep_curves:
        curves = {
            "cum_regret": trace.cum_regret,
            "expected_reward": trace.expected_reward,
            "safety_threshold": trace.safety_threshold,
            "est_error": trace.est_error,
        }
    return SeedResult(
        seed_index=seed_index,
        child_seed=seed,
        n_rounds=trace.n_rounds,
        episodes_completed=trace.episodes_completed,
        conservative_episodes=trace.conservative_episode_count,
        first_ucb_episode=None if diag is None else diag.first_ucb_episode,
        final_cum_regret=trace.final_cum_regret,
        final_est_error=float(trace.est_error[-1]),
        unsafe_rounds=0 if diag is None else diag.unsafe_rounds,
        coverage_ok=True if diag is None else diag.coverage_ok,
        min_coverage_slack=math.inf if diag is None else diag.min_coverage_slack,
        safe_set_violations=0 if diag is None else diag.safe_set_violations,
        optimism_violations=0 if diag is None else diag.optimism_violations,
        checked_ucb_episodes=0 if diag is None else diag.confidence_checked_ucb_episodes,
        regret_bound=math.nan if diag is None else diag.regret_bound,
        cons_count_bound=math.nan if diag is None else diag.cons_count_bound,
        truncated=trace.truncated,
        curves=curves,
    )


def _worker(payload) -> SeedResult:
    cfg_dict, seed_index, keep_curves, write_path, oracle = payload
    cfg = ExperimentConfig(**cfg_dict)
    return run_one(cfg, seed_index, keep_curves, write_path, oracle)


def run_ensemble(
    cfg: ExperimentConfig,
    n_seeds: int | None = None,
    jobs: int | None = None,
    keep_curves: bool = False,
    raw_dir: str | None = None,
    oracle_checks: bool = True,
    config_id: str = "single",
) -> EnsembleResult:
    """Run the seed ensemble of one concrete sub-configuration.

    Work is scheduled deterministically by seed index; with raw_dir set,
    each run's trace lands in raw_dir/run_<index>.csv.
    """
    n_seeds = cfg.n_seeds if n_seeds is None else n_seeds
    jobs = jobs or os.cpu_count() or 1
    payloads = []
    for i in range(n_seeds):
        path = None
        if raw_dir is not None:
            os.makedirs(raw_dir, exist_ok=True)
            path = os.path.join(raw_dir, f"run_{i:03d}.csv")
        payloads.append((dataclasses.asdict(cfg), i, keep_curves, path, oracle_checks))
    if jobs == 1 or n_seeds == 1:
        results = [_worker(p) for p in payloads]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, n_seeds)) as pool:
            results = list(pool.map(_worker, payloads))
    return EnsembleResult(config_id=config_id, config=cfg, results=results)


# ---------------------------------------------------------------------------
# Aggregation and experiment driver
# ---------------------------------------------------------------------------


def _mean_stderr(stack: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = stack.mean(axis=0)
    if stack.shape[0] < 2:
        return mean, np.zeros_like(mean)
    stderr = stack.std(axis=0, ddof=1) / math.sqrt(stack.shape[0])
    return mean, stderr


def write_aggregate_csv(config_id: str, results: list[SeedResult], path: str) -> None:
    """Per-round mean and standard-error curves over the seed ensemble."""
    curves = [r.curves for r in results]
    if any(c is None for c in curves):
        raise ConfigurationError("aggregation requires runs with keep_curves=True")
    lengths = {c["cum_regret"].shape[0] for c in curves}
    if len(lengths) != 1:
        raise ConfigurationError(f"trace lengths differ across seeds: {sorted(lengths)}")
    n_seeds = len(results)
    stats = {}
    for name in ("cum_regret", "expected_reward", "safety_threshold", "est_error"):
        stack = np.stack([c[name] for c in curves])
        stats[name] = _mean_stderr(stack)
    n_rounds = next(iter(lengths))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(AGGREGATE_COLUMNS) + "\n")
        for i in range(n_rounds):
            cells = [config_id, str(n_seeds), str(i + 1)]
            for name in ("cum_regret", "expected_reward", "safety_threshold", "est_error"):
                mean, stderr = stats[name]
                cells.append(repr(float(mean[i])))
                cells.append(repr(float(stderr[i])))
            fh.write(",".join(cells) + "\n")


_SUMMARY_COLUMNS = (
    "config_id",
    "n_seeds",
    "rounds",
    "episodes_completed",
    "final_cum_regret_mean",
    "final_cum_regret_stderr",
    "final_est_error_mean",
    "final_est_error_stderr",
    "conservative_episodes_mean",
    "ucb_runs",
    "first_ucb_episode_mean",
    "unsafe_rounds_total",
    "coverage_failures",
    "regret_bound_exceedances",
    "cons_bound_exceedances",
)


def write_summary_csv(ensembles: list[EnsembleResult], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(_SUMMARY_COLUMNS) + "\n")
        for ens in ensembles:
            res = ens.results
            finals = np.array([r.final_cum_regret for r in res])
            errors = np.array([r.final_est_error for r in res])
            firsts = [r.first_ucb_episode for r in res if r.first_ucb_episode is not None]
            stderr = 0.0 if len(res) < 2 else float(np.std(finals, ddof=1) / math.sqrt(len(res)))
            err_stderr = 0.0 if len(res) < 2 else float(np.std(errors, ddof=1) / math.sqrt(len(res)))
            row = [
                ens.config_id,
                str(len(res)),
                str(res[0].n_rounds),
                str(res[0].episodes_completed),
                repr(float(finals.mean())),
                repr(stderr),
                repr(float(errors.mean())),
                repr(err_stderr),
                repr(float(np.mean([r.conservative_episodes for r in res]))),
                str(len(firsts)),
                repr(float(np.mean(firsts)) if firsts else -1.0),
                str(sum(r.unsafe_rounds for r in res)),
                str(sum(0 if r.coverage_ok else 1 for r in res)),
                str(sum(1 for r in res if r.final_cum_regret > r.regret_bound)),
                str(sum(1 for r in res if r.conservative_episodes > r.cons_count_bound)),
            ]
            fh.write(",".join(row) + "\n")


def run_experiment(
    config: ExperimentConfig,
    jobs: int | None = None,
    quiet: bool = False,
) -> list[EnsembleResult]:
    """Run every sub-configuration's ensemble and write all output files."""
    subs = expand_config(config)
    os.makedirs(config.output_dir, exist_ok=True)
    ensembles = []
    for config_id, cfg in subs:
        sub_dir = os.path.join(config.output_dir, config_id.replace("=", "_"))
        ens = run_ensemble(
            cfg,
            jobs=jobs,
            keep_curves=True,
            raw_dir=sub_dir,
            config_id=config_id,
        )
        write_aggregate_csv(config_id, ens.results, os.path.join(sub_dir, "aggregate.csv"))
        ensembles.append(ens)
        if not quiet:
            print(
                f"[{config_id}] seeds={len(ens.results)} rounds={ens.results[0].n_rounds} "
                f"final_regret={ens.mean_final_regret():.2f} "
                f"est_error={ens.mean_final_est_error():.6f}"
            )
    write_summary_csv(ensembles, os.path.join(config.output_dir, "summary.csv"))
    return ensembles


# ---------------------------------------------------------------------------
# Bound evaluation for a config (nominal constants; no instance needed)
# ---------------------------------------------------------------------------


def evaluate_bounds(cfg: ExperimentConfig) -> dict:
    """Evaluate the closed-form bounds from config-level nominal constants."""
    graph = _build_graph(cfg)
    constants = BoundConstants(
        alpha=cfg.alpha,
        kappa_l=cfg.nominal_kappa_l,
        kappa_h=cfg.nominal_kappa_h,
        r_l=cfg.nominal_r_l,
        r_h=cfg.nominal_r_h,
        bound_s=cfg.bound_s,
        bound_l=cfg.bound_l,
    )
    # Episode count implied by the schedule within the horizon.
    m = 0
    t = 1
    while t <= cfg.t_horizon:
        q = comm_schedule(m + 1, cfg.n_agents, graph.lambda2_abs)
        if t + q > cfg.t_horizon:
            break
        t += 1 + q
        m += 1
    m = max(m, 1)
    beta_0 = confidence_radius(
        0, cfg.n_agents, cfg.noise_r, cfg.d, cfg.reg_lambda,
        cfg.bound_s, cfg.bound_l, cfg.delta,
    )
    beta_m = confidence_radius(
        m, cfg.n_agents, cfg.noise_r, cfg.d, cfg.reg_lambda,
        cfg.bound_s, cfg.bound_l, cfg.delta,
    )
    q_m = comm_schedule(m, cfg.n_agents, graph.lambda2_abs)
    regret_bound, cons_bound = theoretical_bounds(
        constants, cfg.d, cfg.reg_lambda, cfg.delta, beta_m, m, q_m
    )
    return {
        "lambda2_abs": graph.lambda2_abs,
        "episodes": m,
        "q_1": comm_schedule(1, cfg.n_agents, graph.lambda2_abs),
        "q_M": q_m,
        "beta_0": beta_0,
        "beta_M": beta_m,
        "rho": constants.rho,
        "h1": constants.h1(),
        "k_t1": excitation_threshold(
            beta_0, cfg.bound_l, cfg.nominal_kappa_l, cfg.alpha, cfg.nominal_r_l
        ),
        "regret_bound": regret_bound,
        "cons_count_bound": cons_bound,
    }
