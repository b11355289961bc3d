"""Figure panels and summary tables from banditnet aggregate CSVs."""

from .panels import PANELS, PlotSpec, render_panel
from .schema import AGGREGATE_COLUMNS, AggregateCurves, SchemaError, read_aggregate

__version__ = "0.1.0"

__all__ = [
    "AGGREGATE_COLUMNS",
    "AggregateCurves",
    "PANELS",
    "PlotSpec",
    "SchemaError",
    "read_aggregate",
    "render_panel",
]
