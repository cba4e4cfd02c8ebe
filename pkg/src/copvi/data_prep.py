"""Panel loading, first differences, and KDE-based normal scores.

Margins are estimated with a Gaussian-kernel empirical CDF (Silverman
bandwidth); scores are Phi^{-1} of the clamped CDF values, ready for the
Gaussian copula likelihood.
"""

import csv
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from . import kernels
from .errors import DataError
from .targets import CopulaData

CDF_CLAMP = 1e-6


@dataclass(frozen=True)
class Panel:
    values: np.ndarray       # (T, r)
    column_labels: list
    row_labels: list


@dataclass(frozen=True)
class KdeMarginal:
    points: np.ndarray
    bandwidth: float


def read_panel_csv(path):
    """Read a labeled numeric panel; columns with any missing cell are dropped."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2 or len(rows[0]) < 2:
        raise DataError(f"{path}: need a header row plus data rows with at least one column")
    header = rows[0]
    labels = [h.strip() for h in header[1:]]
    width = len(header)
    row_labels = []
    raw = []
    for k, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise DataError(f"{path}: row {k} has {len(row)} cells, expected {width}")
        row_labels.append(row[0].strip())
        raw.append(row[1:])
    values = np.full((len(raw), len(labels)), np.nan)
    for i, row in enumerate(raw):
        for j, cell in enumerate(row):
            cell = cell.strip()
            if cell:
                try:
                    values[i, j] = float(cell)
                except ValueError as exc:
                    raise DataError(f"{path}: non-numeric cell {cell!r} "
                                    f"at row {i + 2}, column {labels[j]!r}") from exc
    keep = ~np.isnan(values).any(axis=0)
    if not keep.all():
        dropped = [labels[j] for j in range(len(labels)) if not keep[j]]
        warnings.warn(f"dropping columns with missing cells: {', '.join(dropped)}",
                      stacklevel=2)
    if not keep.any():
        raise DataError(f"{path}: every column has missing cells")
    return Panel(values=values[:, keep],
                 column_labels=[l for l, k in zip(labels, keep) if k],
                 row_labels=row_labels)


def difference_series(panel):
    """First differences down the rows; labels shift to the later period."""
    if panel.values.shape[0] < 2:
        raise DataError("need at least two rows to difference")
    return Panel(values=np.diff(panel.values, axis=0),
                 column_labels=list(panel.column_labels),
                 row_labels=list(panel.row_labels[1:]))


def fit_kde(values):
    """Gaussian-kernel marginal with the 1.06 sd n^{-1/5} bandwidth."""
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[0]
    if n < 2:
        raise DataError("need at least two observations to set a bandwidth")
    sd = float(np.std(values, ddof=1))
    if sd <= 0.0:
        raise DataError("column is constant; no marginal scale to estimate")
    return KdeMarginal(points=values.copy(), bandwidth=1.06 * sd * n ** (-0.2))


def kde_cdf(kde, y):
    """Smoothed empirical CDF, clamped away from 0 and 1."""
    y = np.asarray(y, dtype=np.float64)
    flat = np.ascontiguousarray(np.atleast_1d(y).reshape(-1))
    u = kernels.kde_cdf_kernel(flat, np.ascontiguousarray(kde.points), float(kde.bandwidth))
    u = np.clip(u, CDF_CLAMP, 1.0 - CDF_CLAMP)
    return float(u[0]) if y.ndim == 0 else u.reshape(y.shape)


def to_copula_scores(panel, min_obs=10):
    """KDE-CDF each column and map through the normal quantile."""
    T, r = panel.values.shape
    if T < min_obs:
        raise DataError(f"need at least {min_obs} rows, got {T}")
    x = np.empty((T, r))
    for j in range(r):
        col = panel.values[:, j]
        kde = fit_kde(col)
        x[:, j] = ndtri(kde_cdf(kde, col))
    return CopulaData(x=x)


def write_scores_csv(panel, data, path):
    """Normal scores with the panel's header and row labels."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["row"] + list(panel.column_labels))
        for label, row in zip(panel.row_labels, data.x):
            w.writerow([label] + [repr(float(v)) for v in row])
