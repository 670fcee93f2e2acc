"""Domain types, configuration and CSV serialisation shared across the package.

Time is a unit-step integer tick. A forecast origin ``t`` is the tick of the
last observation available when forecasts are made; ``(t, h)`` addresses the
h-step-ahead forecast issued at origin ``t`` for tick ``t + h``.

Absent panel cells are stored as NaN and written as ``NA``. Extended reals
(+/- infinity) are ordinary floats and written as ``inf`` / ``-inf``.
"""

from __future__ import annotations

import csv
import io
import math
from collections import deque
from dataclasses import dataclass, field, fields
from typing import Iterable, Optional

import numpy as np

SIDED_MODES = ("two_sided", "symmetric", "upper")
NA = "NA"


class PanelError(ValueError):
    """Raised on an illegal panel access (overwrite, out-of-range cell)."""


def format_float(value: float) -> str:
    """Shortest round-trip text for a float; NaN becomes ``NA``."""
    v = float(value)
    if math.isnan(v):
        return NA
    return repr(v)


def parse_float(text: str) -> float:
    text = text.strip()
    if text in (NA, "", "nan", "NaN"):
        return math.nan
    return float(text)


# ---------------------------------------------------------------------------
# series
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SeriesFrame:
    """A response series on unit-step ticks with optional exogenous columns."""

    ticks: np.ndarray
    y: np.ndarray
    x: Optional[np.ndarray] = None
    x_names: tuple = ()

    def __post_init__(self):
        ticks = np.asarray(self.ticks, dtype=np.int64).copy()
        y = np.asarray(self.y, dtype=np.float64).copy()
        if ticks.ndim != 1 or y.ndim != 1 or ticks.shape != y.shape:
            raise ValueError("ticks and y must be 1-d arrays of equal length")
        if ticks.size and np.any(np.diff(ticks) != 1):
            raise ValueError("ticks must be strictly increasing with unit step")
        if not np.all(np.isfinite(y)):
            raise ValueError("y contains missing or non-finite values")
        x = self.x
        names = tuple(self.x_names)
        if x is not None:
            x = np.asarray(x, dtype=np.float64).copy()
            if x.ndim == 1:
                x = x[:, None]
            if x.shape[0] != y.shape[0]:
                raise ValueError("x rows must align with y")
            if x.shape[1] == 0:
                x = None
            elif not np.all(np.isfinite(x)):
                raise ValueError("x contains missing or non-finite values")
        if x is not None:
            if not names:
                names = tuple(f"x{j + 1}" for j in range(x.shape[1]))
            if len(names) != x.shape[1]:
                raise ValueError("x_names length must match x columns")
            x.setflags(write=False)
        else:
            names = ()
        ticks.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "ticks", ticks)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "x_names", names)

    @classmethod
    def from_values(cls, y, x=None, start: int = 1, x_names=()) -> "SeriesFrame":
        y = np.asarray(y, dtype=np.float64)
        return cls(np.arange(start, start + y.shape[0]), y, x, x_names)

    def __len__(self) -> int:
        return int(self.y.shape[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, SeriesFrame):
            return NotImplemented
        if self.x is None or other.x is None:
            same_x = self.x is None and other.x is None
        else:
            same_x = np.array_equal(self.x, other.x)
        return (np.array_equal(self.ticks, other.ticks)
                and np.array_equal(self.y, other.y)
                and same_x and self.x_names == other.x_names)

    @property
    def first_tick(self) -> int:
        return int(self.ticks[0])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv_text())

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["tick", "y", *self.x_names])
        for i in range(len(self)):
            row = [str(int(self.ticks[i])), format_float(self.y[i])]
            if self.x is not None:
                row.extend(format_float(v) for v in self.x[i])
            w.writerow(row)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, path) -> "SeriesFrame":
        with open(path, newline="") as fh:
            return cls.from_csv_text(fh.read())

    @classmethod
    def from_csv_text(cls, text: str) -> "SeriesFrame":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise ValueError("empty series CSV")
        header = [c.strip() for c in rows[0]]
        if header[:2] != ["tick", "y"]:
            raise ValueError("series CSV header must start with 'tick,y'")
        body = [r for r in rows[1:] if r]
        ticks = [int(r[0]) for r in body]
        y = [parse_float(r[1]) for r in body]
        names = tuple(header[2:])
        x = None
        if names:
            x = np.array([[parse_float(v) for v in r[2:]] for r in body], dtype=np.float64)
            x = x.reshape(len(body), len(names))
        return cls(np.array(ticks, dtype=np.int64), np.array(y), x, names)


# ---------------------------------------------------------------------------
# panels
# ---------------------------------------------------------------------------

class _LongPanel:
    """Values indexed by (origin, horizon) for a fixed set of named fields."""

    FIELDS: tuple = ()

    def __init__(self, first_origin: int, last_origin: int, H: int, data=None):
        if last_origin < first_origin - 1:
            raise ValueError("last_origin precedes first_origin")
        if H < 1:
            raise ValueError("H must be >= 1")
        self.first_origin = int(first_origin)
        self.last_origin = int(last_origin)
        self.H = int(H)
        n = self.last_origin - self.first_origin + 1
        self.data = {}
        for name in self.FIELDS:
            arr = None if data is None else data.get(name)
            if arr is None:
                arr = np.full((n, self.H), np.nan)
            else:
                arr = np.array(arr, dtype=np.float64)
                if arr.shape != (n, self.H):
                    raise ValueError(f"field {name!r} has shape {arr.shape}, expected {(n, self.H)}")
            self.data[name] = arr

    @property
    def origins(self) -> np.ndarray:
        return np.arange(self.first_origin, self.last_origin + 1)

    @property
    def n_origins(self) -> int:
        return self.last_origin - self.first_origin + 1

    def _row(self, t: int) -> int:
        if not self.first_origin <= t <= self.last_origin:
            raise PanelError(f"origin {t} outside [{self.first_origin}, {self.last_origin}]")
        return t - self.first_origin

    def _col(self, h: int) -> int:
        if not 1 <= h <= self.H:
            raise PanelError(f"horizon {h} outside [1, {self.H}]")
        return h - 1

    def __eq__(self, other) -> bool:
        if type(other) is not type(self):
            return NotImplemented
        if (self.first_origin, self.last_origin, self.H) != (other.first_origin, other.last_origin, other.H):
            return False
        return all(np.array_equal(self.data[f], other.data[f], equal_nan=True) for f in self.FIELDS)

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["origin", "horizon", "field", "value"])
        origins = self.origins
        for i, t in enumerate(origins):
            for j in range(self.H):
                for name in self.FIELDS:
                    w.writerow([int(t), j + 1, name, format_float(self.data[name][i, j])])
        return buf.getvalue()

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv_text())

    @classmethod
    def from_csv_text(cls, text: str):
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != ["origin", "horizon", "field", "value"]:
            raise ValueError("panel CSV header must be 'origin,horizon,field,value'")
        body = [r for r in rows[1:] if r]
        if not body:
            raise ValueError("panel CSV has no rows")
        origins = [int(r[0]) for r in body]
        horizons = [int(r[1]) for r in body]
        first, last, H = min(origins), max(origins), max(horizons)
        panel = cls(first, last, H)
        for t, h, r in zip(origins, horizons, body):
            name = r[2]
            if name not in panel.data:
                raise ValueError(f"unknown field {name!r} for {cls.__name__}")
            panel.data[name][t - first, h - 1] = parse_float(r[3])
        return panel

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            return cls.from_csv_text(fh.read())


class ScorePanel(_LongPanel):
    """Signed nonconformity scores s_{t+h|t} = y_{t+h} - yhat_{t+h|t}.

    Append-only: a present cell can never be rewritten.
    """

    FIELDS = ("score",)

    @property
    def cells(self) -> np.ndarray:
        return self.data["score"]

    def get(self, t: int, h: int) -> float:
        return float(self.cells[self._row(t), self._col(h)])

    def set(self, t: int, h: int, value: float) -> None:
        i, j = self._row(t), self._col(h)
        if not np.isnan(self.cells[i, j]):
            raise PanelError(f"score cell ({t}, {h}) already written")
        if np.isnan(value):
            raise PanelError("a score cannot be NaN")
        self.cells[i, j] = value

    def horizon_scores(self, h: int, upto_origin: Optional[int] = None, window: Optional[int] = None) -> np.ndarray:
        """Present h-step scores for origins <= ``upto_origin``, oldest first."""
        j = self._col(h)
        stop = self.n_origins if upto_origin is None else max(0, min(upto_origin - self.first_origin + 1, self.n_origins))
        col = self.cells[:stop, j]
        col = col[~np.isnan(col)]
        if window is not None:
            col = col[-window:]
        return col


class ForecastPanel(_LongPanel):
    FIELDS = ("yhat",)


class IntervalPanel(_LongPanel):
    """Interval bounds in y-space and miscoverage indicators per (origin, horizon)."""

    FIELDS = ("lower", "upper", "err")

    @property
    def lower(self) -> np.ndarray:
        return self.data["lower"]

    @property
    def upper(self) -> np.ndarray:
        return self.data["upper"]

    @property
    def err(self) -> np.ndarray:
        return self.data["err"]

    def set_bounds(self, t: int, h: int, lower: float, upper: float) -> None:
        i, j = self._row(t), self._col(h)
        self.lower[i, j] = lower
        self.upper[i, j] = upper

    def record_realisation(self, t: int, h: int, y: float) -> int:
        i, j = self._row(t), self._col(h)
        e = miscovered(y, self.lower[i, j], self.upper[i, j])
        self.err[i, j] = e
        return e

    def recompute_err(self, series: SeriesFrame) -> np.ndarray:
        """err recomputed from realised values; NaN where y_{t+h} is unobserved."""
        out = np.full_like(self.err, np.nan)
        base = series.first_tick
        n = len(series)
        for j in range(self.H):
            ticks = self.origins + j + 1
            idx = ticks - base
            ok = (idx >= 0) & (idx < n)
            yv = series.y[idx[ok]]
            lo, up = self.lower[ok, j], self.upper[ok, j]
            out[ok, j] = ((yv < lo) | (yv > up)).astype(float)
        return out


def miscovered(y: float, lower: float, upper: float) -> int:
    return int(not (lower <= y <= upper))


# ---------------------------------------------------------------------------
# tracker state
# ---------------------------------------------------------------------------

@dataclass
class TrackerState:
    """Mutable online state of one (method, horizon, side) tracker."""

    method: str
    h: int
    side: str
    alpha_target: float
    alpha_hat: float = math.nan
    q_hat: float = 0.0
    integrator_sum: float = 0.0
    err_history: list = field(default_factory=list)
    score_window: deque = field(default_factory=deque)
    max_score_seen: float = -math.inf
    min_score_seen: float = math.inf
    k_i: Optional[float] = None

    def __post_init__(self):
        if math.isnan(self.alpha_hat):
            self.alpha_hat = self.alpha_target

    def record_score(self, score: float, delta: int) -> None:
        """Push a realised per-side score into the trailing window."""
        if self.score_window.maxlen != delta:
            self.score_window = deque(self.score_window, maxlen=delta)
        self.score_window.append(score)
        if math.isfinite(score):
            self.max_score_seen = max(self.max_score_seen, score)
            self.min_score_seen = min(self.min_score_seen, score)

    def record_err(self, err: int) -> None:
        self.err_history.append(int(err))
        self.integrator_sum += err - self.alpha_target

    @property
    def n_errs(self) -> int:
        return len(self.err_history)

    def b_hat(self) -> float:
        """Largest finite score in the trailing window; NaN if none."""
        finite = [s for s in self.score_window if math.isfinite(s)]
        return max(finite) if finite else math.nan


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    """Tuning constants of an online conformal run.

    ``C_sat``/``K_I``/``delta`` default to ``None`` and are resolved per run:
    ``delta`` to ``t_c``, ``C_sat`` so the saturation threshold after ``delta``
    recorded errors is 20, and ``K_I`` per tracker to ``eta_scale`` times the
    first available trailing-window maximum score.
    """

    alpha: float = 0.1
    H: int = 3
    t_r: int = 500
    t_c: int = 500
    gamma: float = 0.005
    decay_b: float = 0.99
    C_sat: Optional[float] = None
    K_I: Optional[float] = None
    eta_scale: float = 0.01
    delta: Optional[int] = None
    sided: str = "symmetric"
    seed: int = 0

    @property
    def window_delta(self) -> int:
        return int(self.delta) if self.delta is not None else int(self.t_c)

    @property
    def c_sat(self) -> float:
        if self.C_sat is not None:
            return float(self.C_sat)
        return default_c_sat(self.window_delta)

    @classmethod
    def field_names(cls) -> tuple:
        return tuple(f.name for f in fields(cls))


def default_c_sat(delta: int, excess: float = 20.0) -> float:
    """C_sat such that (pi/2) * C_sat * g(delta) == excess, g(t) = t / log t."""
    delta = max(int(delta), 3)
    return 2.0 * excess / (math.pi * delta / math.log(delta))


def _is_int(v) -> bool:
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool)


def validate_config(cfg: ExperimentConfig) -> list:
    """Every violated constraint of ``cfg``; an empty list means valid."""
    errors = []
    if not (isinstance(cfg.alpha, (int, float)) and 0.0 < cfg.alpha < 1.0):
        errors.append("alpha out of (0,1)")
    if not _is_int(cfg.H) or cfg.H < 1:
        errors.append("H must be an integer >= 1")
    if not _is_int(cfg.t_r) or cfg.t_r < 1:
        errors.append("t_r must be an integer >= 1")
    if not _is_int(cfg.t_c) or cfg.t_c < 1:
        errors.append("t_c must be an integer >= 1")
    if _is_int(cfg.t_c) and _is_int(cfg.H) and cfg.t_c < 10 * cfg.H:
        errors.append("t_c < 10*H")
    if not cfg.gamma > 0:
        errors.append("gamma must be > 0")
    if not 0.0 < cfg.decay_b < 1.0:
        errors.append("decay_b out of (0,1)")
    if cfg.C_sat is not None and not cfg.C_sat > 0:
        errors.append("C_sat must be > 0")
    if cfg.K_I is not None and not cfg.K_I > 0:
        errors.append("K_I must be > 0")
    if not cfg.eta_scale > 0:
        errors.append("eta_scale must be > 0")
    if cfg.delta is not None and (not _is_int(cfg.delta) or cfg.delta < 1):
        errors.append("delta must be an integer >= 1")
    if cfg.sided not in SIDED_MODES:
        errors.append(f"sided must be one of {', '.join(SIDED_MODES)}")
    if not _is_int(cfg.seed) or cfg.seed < 0:
        errors.append("seed must be a nonnegative integer")
    return errors


class ConfigError(ValueError):
    def __init__(self, problems: Iterable[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def check_config(cfg: ExperimentConfig) -> ExperimentConfig:
    problems = validate_config(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg
