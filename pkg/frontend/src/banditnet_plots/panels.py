"""The four figure panels plus the network-size summary table.

Every panel reads one or more aggregate CSVs (never raw traces or
simulator state) and writes a PNG or SVG decided by the output suffix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .schema import AggregateCurves, SchemaError, read_aggregate

PANELS = (
    "regret_connectivity",
    "reward_threshold",
    "est_error",
    "regret_alpha",
    "summary_table",
)


@dataclass
class PlotSpec:
    panel: str
    input_csvs: list[str]
    output_path: str
    title: str | None = None
    log_error_axis: bool = True
    band_stderr: float = field(default=2.0)  # shaded band half-width in stderrs


def _load_all(spec: PlotSpec) -> list[AggregateCurves]:
    if not spec.input_csvs:
        raise SchemaError("no input CSVs given")
    return [read_aggregate(path) for path in spec.input_csvs]


def _line_with_band(ax, curves: AggregateCurves, mean_col: str, stderr_col: str, band: float):
    (line,) = ax.plot(curves.rounds, curves[mean_col], label=curves.config_id, lw=1.4)
    if band > 0:
        ax.fill_between(
            curves.rounds,
            curves[mean_col] - band * curves[stderr_col],
            curves[mean_col] + band * curves[stderr_col],
            alpha=0.2,
            color=line.get_color(),
            linewidth=0,
        )
    return line


def _regret_panel(spec: PlotSpec, xlabel_note: str) -> None:
    all_curves = _load_all(spec)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for curves in all_curves:
        _line_with_band(ax, curves, "mean_cum_regret", "stderr_cum_regret", spec.band_stderr)
    ax.set_xlabel("round")
    ax.set_ylabel("cumulative regret")
    ax.set_title(spec.title or f"Cumulative regret vs. {xlabel_note}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(spec.output_path)
    plt.close(fig)


def render_regret_connectivity(spec: PlotSpec) -> None:
    _regret_panel(spec, "connectivity")


def render_regret_alpha(spec: PlotSpec) -> None:
    _regret_panel(spec, "conservatism level")


def render_reward_threshold(spec: PlotSpec) -> None:
    """Expected reward (solid) against the safety threshold (dashed).

    The dashed line is the CSV's mean_safety_threshold column verbatim;
    nothing is recomputed here.
    """
    all_curves = _load_all(spec)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for curves in all_curves:
        line = _line_with_band(
            ax, curves, "mean_expected_reward", "stderr_expected_reward", spec.band_stderr
        )
        ax.plot(
            curves.rounds,
            curves["mean_safety_threshold"],
            ls="--",
            lw=1.2,
            color=line.get_color(),
            label=f"{curves.config_id} threshold",
        )
    ax.set_xlabel("round")
    ax.set_ylabel("expected reward")
    ax.set_title(spec.title or "Expected reward and safety threshold")
    ax.legend()
    fig.tight_layout()
    fig.savefig(spec.output_path)
    plt.close(fig)


def render_est_error(spec: PlotSpec) -> None:
    all_curves = _load_all(spec)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for curves in all_curves:
        _line_with_band(ax, curves, "mean_est_error", "stderr_est_error", spec.band_stderr)
    ax.set_xlabel("round")
    ax.set_ylabel("parameter estimation error")
    if spec.log_error_axis:
        ax.set_yscale("log")
    ax.set_title(spec.title or "Parameter estimation convergence")
    ax.legend()
    fig.tight_layout()
    fig.savefig(spec.output_path)
    plt.close(fig)


def render_summary_table(spec: PlotSpec) -> None:
    """Final-round estimation errors per configuration, as a text table."""
    all_curves = _load_all(spec)
    rows = [
        (c.config_id, c.n_seeds, int(c.rounds[-1]), float(c["mean_est_error"][-1]))
        for c in all_curves
    ]
    width = max(len(r[0]) for r in rows)
    lines = [
        f"{'config':<{width}}  seeds  rounds  final_est_error",
        f"{'-' * width}  -----  ------  ---------------",
    ]
    for config_id, seeds, rounds, err in rows:
        lines.append(f"{config_id:<{width}}  {seeds:>5d}  {rounds:>6d}  {err:.6f}")
    with open(spec.output_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


_RENDERERS = {
    "regret_connectivity": render_regret_connectivity,
    "reward_threshold": render_reward_threshold,
    "est_error": render_est_error,
    "regret_alpha": render_regret_alpha,
    "summary_table": render_summary_table,
}


def render_panel(spec: PlotSpec) -> str:
    """Dispatch on the panel kind; returns the output path."""
    if spec.panel not in _RENDERERS:
        raise SchemaError(f"unknown panel {spec.panel!r}; valid: {PANELS}")
    if spec.panel != "summary_table" and not spec.output_path.endswith((".png", ".svg")):
        raise SchemaError(
            f"output must end in .png or .svg, got {spec.output_path!r}"
        )
    _RENDERERS[spec.panel](spec)
    return spec.output_path
