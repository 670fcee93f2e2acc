"""Coverage and width metrics for interval panels.

Absent miscoverage cells (NaN, realisation not yet observed) are dropped
before any reduction, so rolling windows run over the realised origins only.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import IntervalPanel, format_float

WIDTH_STATS = ("mean", "median")
METRIC_HEADER = ("method", "horizon", "position", "metric", "value")


def _present(err) -> np.ndarray:
    e = np.asarray(err, dtype=np.float64).ravel()
    return e[~np.isnan(e)]


def _windows(a: np.ndarray, window: int) -> np.ndarray:
    return np.lib.stride_tricks.sliding_window_view(a, window)


def rolling_coverage(err, window: int) -> np.ndarray:
    """1 - mean(err) over each trailing window of realised entries.

    Returns an empty array when fewer than ``window`` entries are present.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    e = _present(err)
    if e.size < window:
        return np.empty(0)
    csum = np.concatenate(([0.0], np.cumsum(e)))
    return 1.0 - (csum[window:] - csum[:-window]) / window


class RollingWidth(NamedTuple):
    values: np.ndarray
    n_infinite: np.ndarray


def interval_widths(lower, upper) -> np.ndarray:
    """upper - lower; infinite bounds give +inf, collapsed (empty) sets give 0."""
    lo = np.asarray(lower, dtype=np.float64)
    up = np.asarray(upper, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        w = up - lo
    w[np.isinf(lo) | np.isinf(up)] = np.inf
    return np.maximum(w, 0.0)


def rolling_width(lower, upper, window: int, stat: str = "mean") -> RollingWidth:
    """Rolling mean or median width plus the count of infinite widths per window."""
    if window < 1:
        raise ValueError("window must be >= 1")
    if stat not in WIDTH_STATS:
        raise ValueError(f"stat must be one of {WIDTH_STATS}")
    w = interval_widths(lower, upper)
    w = w[~np.isnan(w)]
    if w.size < window:
        return RollingWidth(np.empty(0), np.empty(0, dtype=np.int64))
    win = _windows(w, window)
    n_inf = np.isinf(win).sum(axis=1).astype(np.int64)
    if stat == "median":
        vals = np.median(win, axis=1)
    else:
        finite = np.where(np.isinf(win), 0.0, win)
        vals = finite.mean(axis=1)
        vals[n_inf > 0] = np.inf
    return RollingWidth(vals, n_inf)


def coverage_gap(err, alpha: float) -> float:
    """Empirical minus nominal coverage, i.e. ``alpha - mean(err)``."""
    e = _present(err)
    if e.size == 0:
        raise ValueError("no realised miscoverage indicators")
    return float(alpha - e.mean())


@dataclass(frozen=True)
class BoxplotSummary:
    q1: float
    median: float
    q3: float
    whisker_low: float
    whisker_high: float
    n_outliers: int

    def as_dict(self) -> dict:
        return {
            "q1": self.q1, "median": self.median, "q3": self.q3,
            "whisker_low": self.whisker_low, "whisker_high": self.whisker_high,
            "n_outliers": float(self.n_outliers),
        }


def boxplot_summary(values) -> BoxplotSummary:
    """Tukey boxplot numbers; whiskers reach the furthest point within 1.5 IQR."""
    v = np.asarray(values, dtype=np.float64)
    v = v[~np.isnan(v)]
    if v.size == 0:
        raise ValueError("no values to summarise")
    q1, med, q3 = np.quantile(v, [0.25, 0.5, 0.75])
    iqr = q3 - q1
    if math.isfinite(iqr):
        lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    else:
        lo_fence, hi_fence = -np.inf, np.inf
    inside = v[(v >= lo_fence) & (v <= hi_fence)]
    return BoxplotSummary(float(q1), float(med), float(q3), float(inside.min()),
                          float(inside.max()), int(v.size - inside.size))


# ---------------------------------------------------------------------------
# panel-level evaluation
# ---------------------------------------------------------------------------

@dataclass
class MetricRow:
    method: str
    horizon: int
    position: str
    metric: str
    value: float


def evaluate_panel(method: str, panel: IntervalPanel, alpha: float, window: int,
                   boxplots: bool = False):
    """Aggregate and rolling metrics for one method.

    Returns ``(rows, rolling_skipped)``; rolling metrics are skipped when the
    window exceeds the number of realised origins at some horizon.
    """
    rows = []
    skipped = False
    for j in range(panel.H):
        h = j + 1
        err = panel.err[:, j]
        ok = ~np.isnan(err)
        widths = interval_widths(panel.lower[:, j], panel.upper[:, j])[ok]
        e = err[ok]
        n_inf = int(np.isinf(widths).sum())
        agg = {
            "coverage": 1.0 - float(e.mean()) if e.size else math.nan,
            "coverage_gap": coverage_gap(e, alpha) if e.size else math.nan,
            "mean_width": float(np.mean(widths)) if widths.size else math.nan,
            "median_width": float(np.median(widths)) if widths.size else math.nan,
            "n_infinite": float(n_inf),
            "n": float(e.size),
        }
        rows += [MetricRow(method, h, "all", k, v) for k, v in agg.items()]
        if boxplots and widths.size:
            for k, v in boxplot_summary(widths).as_dict().items():
                rows.append(MetricRow(method, h, "all", f"width_box_{k}", v))
        if e.size < window:
            skipped = True
            continue
        ends = panel.origins[ok][window - 1:]
        cov = rolling_coverage(e, window)
        mw = rolling_width(panel.lower[ok, j], panel.upper[ok, j], window, "mean")
        md = rolling_width(panel.lower[ok, j], panel.upper[ok, j], window, "median")
        for i, t in enumerate(ends):
            pos = str(int(t))
            rows.append(MetricRow(method, h, pos, "rolling_coverage", float(cov[i])))
            rows.append(MetricRow(method, h, pos, "rolling_mean_width", float(mw.values[i])))
            rows.append(MetricRow(method, h, pos, "rolling_median_width", float(md.values[i])))
            if mw.n_infinite[i]:
                rows.append(MetricRow(method, h, pos, "rolling_n_infinite", float(mw.n_infinite[i])))
    return rows, skipped


def metrics_to_csv_text(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRIC_HEADER)
    for r in rows:
        w.writerow([r.method, r.horizon, r.position, r.metric, format_float(r.value)])
    return buf.getvalue()
