"""Point forecasters and forecast-error models.

The base forecasters (autoregressive least squares, mean, Theta, external
CSV) share a two-call protocol: ``fit`` on a training window and
``predict`` from the current history. The error models used by AcMCP live
here too: a Hannan-Rissanen MA(q) fit on the origin-indexed h-step errors,
and a regression of the h-step error on the lower-horizon errors of the same
origin.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .core import ScorePanel

log = logging.getLogger(__name__)


class FitError(RuntimeError):
    """A model could not be fitted to the supplied data."""


class InsufficientData(ValueError):
    """Too few observations for the requested model."""


# ---------------------------------------------------------------------------
# least squares with ridge fallback
# ---------------------------------------------------------------------------

def ols(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least-squares coefficients; rank-deficient designs fall back to ridge.

    The ridge penalty is ``1e-8 * trace(X'X) / p``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise FitError("non-finite values in design")
    p = X.shape[1]
    beta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank == p:
        return beta
    xtx = X.T @ X
    lam = 1e-8 * np.trace(xtx) / p
    if not lam > 0:
        raise FitError("degenerate series")
    return np.linalg.solve(xtx + lam * np.eye(p), X.T @ y)


# ---------------------------------------------------------------------------
# autoregression
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ArFit:
    order: int
    coef: np.ndarray
    intercept: float
    sigma2: float
    exog_coef: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _ar_design(y: np.ndarray, d: int, x: Optional[np.ndarray]):
    n = y.shape[0]
    cols = [np.ones(n - d)]
    cols += [y[d - k: n - k] for k in range(1, d + 1)]
    if x is not None:
        cols += [x[d:, j] for j in range(x.shape[1])]
    return np.column_stack(cols), y[d:]


def fit_ar_ls(y, d: int, x=None) -> ArFit:
    """Conditional least-squares AR(d) with intercept and optional exogenous terms.

    The model is ``y_t = c + sum_k phi_k y_{t-k} + beta' x_t + e_t``.
    """
    y = np.asarray(y, dtype=np.float64)
    if d < 1:
        raise ValueError("AR order must be >= 1")
    if y.shape[0] < 10 * d:
        raise InsufficientData(f"AR({d}) needs at least {10 * d} observations, got {y.shape[0]}")
    if x is not None:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
    X, target = _ar_design(y, d, x)
    beta = ols(X, target)
    resid = target - X @ beta
    dof = max(target.shape[0] - X.shape[1], 1)
    return ArFit(
        order=d,
        coef=beta[1: d + 1].copy(),
        intercept=float(beta[0]),
        sigma2=float(resid @ resid / dof),
        exog_coef=beta[d + 1:].copy(),
    )


def forecast_recursive(fit: ArFit, history, H: int, x_future=None) -> np.ndarray:
    """h = 1..H forecasts, feeding earlier forecasts back into the recursion."""
    hist = list(np.asarray(history, dtype=np.float64)[-fit.order:])
    if len(hist) < fit.order:
        raise ValueError(f"history shorter than AR order {fit.order}")
    if fit.exog_coef.size:
        if x_future is None:
            raise ValueError("exogenous AR fit needs future predictor values")
        x_future = np.asarray(x_future, dtype=np.float64).reshape(H, -1)
    out = np.empty(H)
    for h in range(H):
        val = fit.intercept
        for k in range(fit.order):
            val += fit.coef[k] * hist[-1 - k]
        if fit.exog_coef.size:
            val += float(fit.exog_coef @ x_future[h])
        out[h] = val
        hist.append(val)
    return out


# ---------------------------------------------------------------------------
# MA(q) by Hannan-Rissanen
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MaFit:
    order: int
    theta: np.ndarray
    innovations: np.ndarray
    mean: float


def fit_ma_hr(errors, q: int) -> MaFit:
    """Two-stage Hannan-Rissanen MA(q) estimate.

    Stage one fits a long autoregression (order ``min(10, n // 10)``) to the
    demeaned series and keeps its residuals as innovation estimates; stage two
    regresses the series on the last ``q`` estimated innovations.
    """
    e = np.asarray(errors, dtype=np.float64)
    n = e.shape[0]
    if q < 0:
        raise ValueError("q must be >= 0")
    if n < max(30, 10 * q):
        raise InsufficientData(f"MA({q}) needs at least {max(30, 10 * q)} points, got {n}")
    mean = float(e.mean())
    z = e - mean
    if q == 0:
        return MaFit(0, np.zeros(0), z.copy(), mean)
    L = max(1, min(10, n // 10))
    X = np.column_stack([z[L - k: n - k] for k in range(1, L + 1)])
    phi = ols(X, z[L:])
    innov = z[L:] - X @ phi
    # innov[i] estimates the innovation at time L + i
    m = innov.shape[0]
    R = np.column_stack([innov[q - k: m - k] for k in range(1, q + 1)])
    theta = ols(R, z[L + q:])
    return MaFit(q, theta, innov, mean)


def ma_forecast(fit: MaFit, steps: int = 1) -> float:
    """Conditional-mean forecast ``steps`` ahead of the last fitted point."""
    val = fit.mean
    for i in range(steps, fit.order + 1):
        # theta_i multiplies the innovation i - steps places before the end
        val += fit.theta[i - 1] * fit.innovations[-1 - (i - steps)]
    return float(val)


def ma_forecast_one(fit: MaFit) -> float:
    return ma_forecast(fit, 1)


# ---------------------------------------------------------------------------
# lagged-error regression
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LagRegressionFit:
    """e_{t+h|t} ~ intercept + coef . (e_{t+h-1|t}, ..., e_{t+1|t})."""

    h: int
    coef: np.ndarray
    intercept: float
    n_rows: int = 0

    def predict(self, regressors) -> float:
        r = np.asarray(regressors, dtype=np.float64)
        return float(self.intercept + self.coef @ r)


def lag_regression_rows(score_panel: ScorePanel, h: int, window: int, upto_origin: Optional[int] = None):
    """Complete training rows (targets, regressors) from the last ``window`` origins."""
    cells = score_panel.cells
    stop = score_panel.n_origins
    if upto_origin is not None:
        stop = max(0, min(upto_origin - score_panel.first_origin + 1, stop))
    block = cells[:stop, :h]
    ok = ~np.isnan(block).any(axis=1)
    block = block[ok][-window:]
    target = block[:, h - 1]
    regs = block[:, h - 2::-1] if h >= 2 else block[:, :0]
    return target, regs


def fit_lag_regression(score_panel: ScorePanel, h: int, window: int, upto_origin: Optional[int] = None) -> LagRegressionFit:
    if h < 2:
        raise ValueError("lag regression needs h >= 2")
    target, regs = lag_regression_rows(score_panel, h, window, upto_origin)
    need = max(30, 10 * h)
    if target.shape[0] < need:
        raise InsufficientData(f"lag regression needs {need} complete rows, got {target.shape[0]}")
    X = np.column_stack([np.ones(target.shape[0]), regs])
    beta = ols(X, target)
    return LagRegressionFit(h, beta[1:].copy(), float(beta[0]), int(target.shape[0]))


def combine_error_forecast(ma: Optional[float], reg: Optional[float]) -> float:
    """Equal-weight combination; an unavailable input (None) is dropped."""
    if ma is None and reg is None:
        return 0.0
    if ma is None:
        return float(reg)
    if reg is None:
        return float(ma)
    return 0.5 * (ma + reg)


# ---------------------------------------------------------------------------
# Theta
# ---------------------------------------------------------------------------

def theta_forecast(scores, h: int) -> float:
    """Classic Theta forecast: SES level plus half the linear-trend drift.

    Returns ``level + 0.5 * slope * (h - 1 + 1 / alpha_ses)``.
    """
    y = np.ascontiguousarray(scores, dtype=np.float64)
    n = y.shape[0]
    if n < 10:
        raise InsufficientData(f"Theta needs at least 10 points, got {n}")
    t = np.arange(n, dtype=np.float64)
    tc = t - t.mean()
    slope = float(tc @ (y - y.mean()) / (tc @ tc))
    alpha, level = _kernels.ses_fit(y, 0.01, 0.99, 1e-6)
    return float(level + 0.5 * slope * (h - 1 + 1.0 / alpha))


# ---------------------------------------------------------------------------
# base forecasters
# ---------------------------------------------------------------------------

FORECASTER_KINDS = ("ar_ls", "mean", "theta", "external")


@dataclass(frozen=True)
class ForecasterSpec:
    kind: str = "ar_ls"
    order: int = 2
    exog: bool = False
    path: Optional[str] = None

    def __post_init__(self):
        if self.kind not in FORECASTER_KINDS:
            raise ValueError(f"unknown forecaster kind {self.kind!r}")
        if self.kind == "ar_ls" and self.order < 1:
            raise ValueError("ar_ls order must be >= 1")
        if self.kind == "external" and not self.path:
            raise ValueError("external forecaster needs a forecasts CSV path")


class ArLsForecaster:
    def __init__(self, order: int = 2, exog: bool = False):
        self.order = order
        self.exog = exog

    def fit(self, y, x=None):
        return fit_ar_ls(y, self.order, x if self.exog else None)

    def predict(self, state, y_hist, x_future, H, origin):
        return forecast_recursive(state, y_hist, H, x_future if self.exog else None)


class MeanForecaster:
    def fit(self, y, x=None):
        return float(np.mean(y))

    def predict(self, state, y_hist, x_future, H, origin):
        return np.full(H, state)


class ThetaForecaster:
    def fit(self, y, x=None):
        return np.asarray(y, dtype=np.float64).copy()

    def predict(self, state, y_hist, x_future, H, origin):
        # refit-free prediction reuses the stored window shifted by new history
        window = np.asarray(y_hist, dtype=np.float64)[-state.shape[0]:]
        return np.array([theta_forecast(window, h) for h in range(1, H + 1)])


class ExternalForecaster:
    """Precomputed forecasts from a CSV with header ``origin,horizon,yhat``."""

    def __init__(self, table: dict):
        self.table = table

    @classmethod
    def from_csv(cls, path) -> "ExternalForecaster":
        table = {}
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != ["origin", "horizon", "yhat"]:
                raise ValueError("external forecasts CSV header must be 'origin,horizon,yhat'")
            for row in reader:
                table[(int(row["origin"]), int(row["horizon"]))] = float(row["yhat"])
        return cls(table)

    def fit(self, y, x=None):
        return None

    def predict(self, state, y_hist, x_future, H, origin):
        try:
            return np.array([self.table[(origin, h)] for h in range(1, H + 1)])
        except KeyError as exc:
            raise FitError(f"no external forecast for (origin, horizon) = {exc.args[0]}") from None


def make_forecaster(spec: ForecasterSpec):
    if spec.kind == "ar_ls":
        return ArLsForecaster(spec.order, spec.exog)
    if spec.kind == "mean":
        return MeanForecaster()
    if spec.kind == "theta":
        return ThetaForecaster()
    return ExternalForecaster.from_csv(spec.path)


def min_training_length(spec: ForecasterSpec) -> int:
    if spec.kind == "ar_ls":
        return 10 * spec.order
    if spec.kind == "theta":
        return 10
    return 1
