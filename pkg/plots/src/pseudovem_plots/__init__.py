"""Convergence figures for pseudostress-velocity experiment CSVs."""

from .figures import (
    COLOR_KEY,
    ERROR_COLUMNS,
    IMAGE_FORMATS,
    SCHEMA_COLUMNS,
    SERIES_LABELS,
    SLOPE_WINDOW,
    FigureReport,
    FigureSpec,
    MissingColumnError,
    PlotDataError,
    SeriesSummary,
    fit_slope,
    plot_convergence,
    read_series,
)
from .cli import main

__version__ = "0.1.0"

__all__ = [
    "COLOR_KEY",
    "ERROR_COLUMNS",
    "IMAGE_FORMATS",
    "SCHEMA_COLUMNS",
    "SERIES_LABELS",
    "SLOPE_WINDOW",
    "FigureReport",
    "FigureSpec",
    "MissingColumnError",
    "PlotDataError",
    "SeriesSummary",
    "fit_slope",
    "main",
    "plot_convergence",
    "read_series",
]
