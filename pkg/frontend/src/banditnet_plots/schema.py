"""Strict reader for the harness aggregate CSV schema.

The aggregate schema is the wire format between the simulator harness and
this package; any deviation (missing/renamed column, unparsable cell)
aborts with the offending column or row named rather than being skipped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

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

_FLOAT_COLUMNS = AGGREGATE_COLUMNS[3:]


class SchemaError(ValueError):
    """Aggregate CSV does not conform to the documented schema."""


@dataclass
class AggregateCurves:
    """One sub-configuration's mean/stderr curves."""

    config_id: str
    n_seeds: int
    rounds: np.ndarray
    columns: dict  # name -> np.ndarray for every float column

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]


def read_aggregate(path: str) -> AggregateCurves:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        names = tuple(header.split(","))
        if names != AGGREGATE_COLUMNS:
            missing = [c for c in AGGREGATE_COLUMNS if c not in names]
            extra = [c for c in names if c not in AGGREGATE_COLUMNS]
            offender = (missing + extra + ["<column order>"])[0]
            raise SchemaError(
                f"{path}: aggregate schema mismatch at column {offender!r} "
                f"(expected exactly {','.join(AGGREGATE_COLUMNS)})"
            )
        config_id = None
        n_seeds = None
        rounds: list[int] = []
        series: dict[str, list[float]] = {name: [] for name in _FLOAT_COLUMNS}
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            cells = line.split(",")
            if len(cells) != len(AGGREGATE_COLUMNS):
                raise SchemaError(
                    f"{path}:{lineno}: expected {len(AGGREGATE_COLUMNS)} cells, "
                    f"got {len(cells)}"
                )
            row = dict(zip(AGGREGATE_COLUMNS, cells))
            if config_id is None:
                config_id = row["config_id"]
                try:
                    n_seeds = int(row["n_seeds"])
                except ValueError:
                    raise SchemaError(
                        f"{path}:{lineno}: column 'n_seeds' is not an integer"
                    ) from None
            try:
                rounds.append(int(row["round"]))
            except ValueError:
                raise SchemaError(
                    f"{path}:{lineno}: column 'round' is not an integer"
                ) from None
            for name in _FLOAT_COLUMNS:
                try:
                    series[name].append(float(row[name]))
                except ValueError:
                    raise SchemaError(
                        f"{path}:{lineno}: column {name!r} is not numeric "
                        f"(got {row[name]!r})"
                    ) from None
    if config_id is None:
        raise SchemaError(f"{path}: no data rows")
    return AggregateCurves(
        config_id=config_id,
        n_seeds=int(n_seeds),
        rounds=np.asarray(rounds, dtype=np.int64),
        columns={name: np.asarray(vals) for name, vals in series.items()},
    )
