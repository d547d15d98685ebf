"""Log-log convergence figures from refinement-sweep CSV files.

Consumes the solver's CSV schema (columns listed in SCHEMA_COLUMNS) and
renders the error columns as log-log curves against the mesh size, with
dashed reference-slope triangles and least-squares slope annotations.
The fitted slopes smooth the pairwise rates over the last few rows and
are display-only; the CSV rate columns remain the quantitative record.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

# Column layout of the solver's run CSVs, kept verbatim as the contract.
SCHEMA_COLUMNS = (
    "h", "e_u", "r_u", "e_sigma", "r_sigma", "e_p", "r_p", "e_star",
    "n_sigma_dofs", "n_u_dofs", "t_assemble_s", "t_solve_s",
)

# Plottable series and their fixed color key: u red, sigma blue, p yellow.
ERROR_COLUMNS = ("e_u", "e_sigma", "e_p", "e_star")
COLOR_KEY = {"e_u": "red", "e_sigma": "blue", "e_p": "gold", "e_star": "black"}
SERIES_LABELS = {"e_u": "$u$", "e_sigma": r"$\sigma$", "e_p": "$p$",
                 "e_star": "combined"}

# Rows entering the displayed least-squares slope (asymptotic tail).
SLOPE_WINDOW = 4

IMAGE_FORMATS = ("png", "svg")


class PlotDataError(ValueError):
    """Raised when a CSV cannot be turned into convergence curves."""


class MissingColumnError(PlotDataError):
    """Raised when a selected column is absent from a CSV header."""


@dataclass(frozen=True)
class FigureSpec:
    """One figure: which CSVs, which error columns, how to render.

    Multiple CSV paths are overlaid in a single set of axes (series labels
    then carry the file stem), which is how per-parameter sweep charts are
    produced: one spec per parameter value, listing the files to overlay.
    """

    csv_paths: tuple
    columns: tuple = ("e_u", "e_sigma", "e_p")
    reference_slopes: tuple = (1.0,)
    output: str = "convergence.png"
    image_format: str = "png"
    title: str = None

    def __post_init__(self):
        paths = (self.csv_paths,) if isinstance(self.csv_paths, (str, Path)) \
            else tuple(self.csv_paths)
        if not paths:
            raise ValueError("csv_paths must name at least one file")
        object.__setattr__(self, "csv_paths", tuple(str(p) for p in paths))
        cols = (self.columns,) if isinstance(self.columns, str) \
            else tuple(self.columns)
        if not cols:
            raise ValueError("columns must select at least one series")
        for col in cols:
            if col not in ERROR_COLUMNS:
                raise ValueError(
                    f"unknown series column {col!r}; plottable: {ERROR_COLUMNS}"
                )
        object.__setattr__(self, "columns", cols)
        slopes = tuple(float(s) for s in self.reference_slopes)
        if any(s <= 0 for s in slopes):
            raise ValueError(f"reference slopes must be positive, got {slopes}")
        object.__setattr__(self, "reference_slopes", slopes)
        if self.image_format not in IMAGE_FORMATS:
            raise ValueError(
                f"image_format must be one of {IMAGE_FORMATS}, "
                f"got {self.image_format!r}"
            )


@dataclass(frozen=True)
class SeriesSummary:
    """What one plotted curve ended up showing."""

    csv_path: str
    column: str
    label: str
    n_rows: int
    slope: float = None


@dataclass(frozen=True)
class FigureReport:
    """Return value of plot_convergence: the file plus per-series facts."""

    output: str
    series: tuple = field(default_factory=tuple)


def read_series(path, columns):
    """Mesh sizes and selected error columns of one run CSV.

    Returns `(h, values)` with `values[col]` a float array per selected
    column.  Raises MissingColumnError naming the absent column and file,
    and PlotDataError for unreadable, empty, non-numeric or nonpositive
    data (log axes cannot carry zeros or signs).
    """
    try:
        with open(path, newline="") as stream:
            reader = csv.DictReader(stream)
            header = reader.fieldnames
            rows = list(reader)
    except OSError as exc:
        raise PlotDataError(f"cannot read CSV {path}: {exc}") from exc
    if header is None or not rows:
        raise PlotDataError(f"{path} has no data rows")
    for col in ("h", *columns):
        if col not in header:
            raise MissingColumnError(
                f"column {col!r} not in {path} header {header}"
            )
    h = np.empty(len(rows))
    values = {col: np.empty(len(rows)) for col in columns}
    for i, row in enumerate(rows):
        for col, out in (("h", h), *((c, values[c]) for c in columns)):
            try:
                out[i] = float(row[col])
            except (TypeError, ValueError):
                raise PlotDataError(
                    f"{path} row {i + 1}: column {col!r} is not numeric "
                    f"({row[col]!r})"
                ) from None
            if out[i] <= 0.0:
                raise PlotDataError(
                    f"{path} row {i + 1}: column {col!r} must be positive "
                    f"on a log scale, got {out[i]!r}"
                )
    return h, values


def fit_slope(h, errors, window=SLOPE_WINDOW):
    """Least-squares slope of log(error) against log(h), last `window` rows."""
    h = np.asarray(h, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if h.size < 2:
        raise ValueError("slope fit needs at least two rows")
    tail = slice(-min(int(window), h.size), None)
    coeffs = np.polyfit(np.log(h[tail]), np.log(errors[tail]), 1)
    return float(coeffs[0])


def _draw_reference_triangle(ax, h_all, e_all, slope, position):
    """Dashed right triangle showing `slope` decades-per-decade."""
    lo, hi = np.log10(h_all.min()), np.log10(h_all.max())
    h0 = 10.0 ** (lo + 0.58 * (hi - lo))
    h1 = 10.0 ** (lo + 0.92 * (hi - lo))
    y0 = e_all.min() * 0.45 / 3.0**position
    y1 = y0 * (h1 / h0) ** slope
    ax.plot([h0, h1, h1, h0], [y0, y0, y1, y0],
            linestyle="--", color="0.45", linewidth=1.0)
    ax.text(np.sqrt(h0 * h1), y0 * 0.80, "1",
            ha="center", va="top", fontsize=8, color="0.30")
    ax.text(h1 * 1.08, np.sqrt(y0 * y1), f"{slope:g}",
            ha="left", va="center", fontsize=8, color="0.30")


def plot_convergence(spec):
    """Render the figure described by `spec`; returns a FigureReport.

    Log-log error-vs-h curves per CSV and selected column, least-squares
    slope annotations in the legend (only for series with at least two
    rows; single-row files are drawn as markers without slopes), and one
    dashed reference triangle per requested slope.
    """
    data = [(path, *read_series(path, spec.columns)) for path in spec.csv_paths]

    fig, ax = plt.subplots(figsize=(5.2, 4.2))
    summaries = []
    multi = len(spec.csv_paths) > 1
    for path, h, values in data:
        stem = Path(path).stem
        order = np.argsort(h)[::-1]
        for col in spec.columns:
            base = SERIES_LABELS[col] + (f" ({stem})" if multi else "")
            slope = None
            if h.size >= 2:
                slope = fit_slope(h, values[col])
                label = f"{base}, slope {slope:.2f}"
            else:
                label = base
            ax.plot(h[order], values[col][order],
                    marker="o", markersize=4,
                    linestyle="-" if h.size >= 2 else "none",
                    color=COLOR_KEY[col], alpha=0.75 if multi else 1.0,
                    label=label)
            summaries.append(SeriesSummary(
                csv_path=path, column=col, label=label,
                n_rows=int(h.size), slope=slope,
            ))

    h_all = np.concatenate([h for _, h, _ in data])
    e_all = np.concatenate([values[c] for _, _, values in data
                            for c in spec.columns])
    if h_all.size >= 2 and h_all.min() < h_all.max():
        for k, slope in enumerate(spec.reference_slopes):
            _draw_reference_triangle(ax, h_all, e_all, slope, k)

    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("mesh size $h$")
    ax.set_ylabel("relative error")
    if spec.title:
        ax.set_title(spec.title)
    ax.grid(True, which="both", alpha=0.25)
    ax.legend(fontsize=8)
    fig.savefig(spec.output, format=spec.image_format, dpi=150,
                bbox_inches="tight")
    plt.close(fig)
    return FigureReport(output=str(spec.output), series=tuple(summaries))
