"""Online learning with sequential splits.

Origins are processed in time order. At each tick the newly observed value
is scored against every forecast that targeted it, each tracker receives the
miscoverage of the interval it issued for that tick, and then, if the tick is
a forecast origin, the base forecaster is (re)fitted on the trailing
training window and every tracker emits its h-step interval.

Trackers start at the first forecast origin ``t_r`` so the calibration
period doubles as their burn-in; only origins from ``t_r + t_c`` onwards are
reported in the interval panels.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    ExperimentConfig,
    ForecastPanel,
    IntervalPanel,
    ScorePanel,
    SeriesFrame,
    _LongPanel,
    check_config,
)
from .cpmethods import (
    DEFAULT_METHODS,
    METHODS,
    StepContext,
    acmcp_error_forecast,
    make_tracker,
    theta_scorecast,
)
from .forecasters import FitError, ForecasterSpec, InsufficientData, make_forecaster

log = logging.getLogger(__name__)


class TracePanel(_LongPanel):
    """Tracker state per (origin, horizon); fields are ``<side>.<quantity>``."""

    def __init__(self, first_origin, last_origin, H, data=None, fields=()):
        if data is not None and not fields:
            fields = tuple(data)
        self.FIELDS = tuple(fields)
        super().__init__(first_origin, last_origin, H, data)

    @classmethod
    def from_csv_text(cls, text: str):
        import csv
        import io

        rows = [r for r in csv.reader(io.StringIO(text))][1:]
        names = tuple(dict.fromkeys(r[2] for r in rows if r))
        origins = [int(r[0]) for r in rows if r]
        horizons = [int(r[1]) for r in rows if r]
        panel = cls(min(origins), max(origins), max(horizons), fields=names)
        from .core import parse_float

        for r in rows:
            if r:
                panel.data[r[2]][int(r[0]) - panel.first_origin, int(r[1]) - 1] = parse_float(r[3])
        return panel


@dataclass
class RunPlan:
    series: SeriesFrame
    forecaster: ForecasterSpec = field(default_factory=ForecasterSpec)
    methods: tuple = DEFAULT_METHODS
    cfg: ExperimentConfig = field(default_factory=ExperimentConfig)
    refit_every: int = 1
    expanding: bool = False
    error_models: bool = True

    def validate(self) -> None:
        check_config(self.cfg)
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown methods: {', '.join(unknown)}")
        if not self.methods:
            raise ValueError("no methods requested")
        if self.refit_every < 1:
            raise ValueError("refit_every must be >= 1")
        need = self.cfg.t_r + self.cfg.t_c + self.cfg.H
        if need > len(self.series):
            raise ValueError(f"series length {len(self.series)} < t_r + t_c + H = {need}")


@dataclass
class RunResult:
    scores: ScorePanel
    forecasts: ForecastPanel
    intervals: dict
    traces: dict
    warnings: list
    max_read_at_emit: dict

    @property
    def test_origins(self) -> np.ndarray:
        return next(iter(self.intervals.values())).origins


class _ObservedSeries:
    """Gatekeeper for response reads; logs the latest tick index touched."""

    def __init__(self, y: np.ndarray):
        self._y = y
        self.max_read = 0

    def upto(self, c: int) -> np.ndarray:
        self.max_read = max(self.max_read, c)
        return self._y[:c]

    def at(self, c: int) -> float:
        self.max_read = max(self.max_read, c)
        return float(self._y[c - 1])


def score_update(panel: ScorePanel, t: int, h: int, y_realised: float, yhat: float) -> ScorePanel:
    """Write the signed score ``y - yhat`` into cell (t, h); cells are write-once."""
    if not (math.isfinite(yhat) and math.isfinite(y_realised)):
        raise ValueError(f"non-finite forecast or realisation at ({t}, {h})")
    panel.set(t, h, y_realised - yhat)
    return panel


def _crossed_to_empty(lo: float, up: float):
    if math.isfinite(lo) and math.isfinite(up) and lo > up:
        mid = 0.5 * (lo + up)
        return mid, mid
    return lo, up


def run(plan: RunPlan) -> RunResult:
    """Run every requested method over the series.

    Ticks are handled by count ``c`` (1-based number of observations); the
    reported origin tick is ``series.first_tick + c - 1``.
    """
    plan.validate()
    cfg = plan.cfg
    series = plan.series
    T = len(series)
    H, t_r, t_c = cfg.H, cfg.t_r, cfg.t_c
    tick0 = series.first_tick
    to_tick = lambda c: tick0 + c - 1  # noqa: E731

    first_c, last_c, test_c = t_r, T - H, t_r + t_c
    scores = ScorePanel(to_tick(first_c), to_tick(last_c), H)
    forecasts = ForecastPanel(to_tick(first_c), to_tick(last_c), H)
    intervals = {m: IntervalPanel(to_tick(test_c), to_tick(last_c), H) for m in plan.methods}
    trackers = {m: [make_tracker(m, h, cfg) for h in range(1, H + 1)] for m in plan.methods}
    trace_fields = {}
    for m, trs in trackers.items():
        trace_fields[m] = tuple(f"{side}.{q}" for side in trs[0].sides for q in trs[0].TRACE)
    traces = {m: TracePanel(to_tick(test_c), to_tick(last_c), H, fields=trace_fields[m]) for m in plan.methods}

    model = make_forecaster(plan.forecaster)
    obs = _ObservedSeries(series.y)
    x = series.x
    issued = {}  # (c, h) -> {method: (thr_lo, thr_up)}
    yhat_at = {}
    warnings = []
    max_read = {}
    fit_state = None
    want_scorecast = "mpid" in plan.methods
    want_etilde = "acmcp" in plan.methods and plan.error_models
    stateless = {"mscp", "mwcp"}

    for c in range(first_c, T + 1):
        # -- realisation of y_c ------------------------------------------------
        if c > first_c:
            y_c = obs.at(c)
            for h in range(1, H + 1):
                o = c - h
                if o < first_c or o > last_c:
                    continue
                score_update(scores, to_tick(o), h, y_c, yhat_at.pop((o, h)))
                s = scores.get(to_tick(o), h)
                thr_by_method = issued.pop((o, h), {})
                for m in plan.methods:
                    trackers[m][h - 1].observe(s, thr_by_method.get(m))
                    if o >= test_c:
                        intervals[m].record_realisation(to_tick(o), h, y_c)
        if c > last_c:
            continue

        # -- forecast origin c -------------------------------------------------
        if fit_state is None or (c - first_c) % plan.refit_every == 0:
            lo_c = 1 if plan.expanding else c - t_r + 1
            y_train = obs.upto(c)[lo_c - 1:]
            x_train = None if x is None else x[lo_c - 1: c]
            try:
                fit_state = model.fit(y_train, x_train)
            except (FitError, InsufficientData, np.linalg.LinAlgError) as exc:
                if fit_state is None:
                    raise FitError(f"forecaster fit failed at origin {to_tick(c)}: {exc}") from exc
                msg = f"fit failed at origin {to_tick(c)} ({exc}); reusing previous fit"
                log.warning(msg)
                warnings.append(msg)
        x_future = None if x is None else x[c: c + H]
        yhat = np.asarray(model.predict(fit_state, obs.upto(c), x_future, H, to_tick(c)), dtype=np.float64)
        if yhat.shape != (H,) or not np.all(np.isfinite(yhat)):
            raise FitError(f"forecaster returned invalid forecasts at origin {to_tick(c)}")
        for h in range(1, H + 1):
            yhat_at[(c, h)] = yhat[h - 1]
            forecasts.data["yhat"][c - first_c, h - 1] = yhat[h - 1]

        is_test = c >= test_c
        origin_tick = to_tick(c)
        etildes = []
        for h in range(1, H + 1):
            cal = scores.horizon_scores(h, upto_origin=origin_tick, window=t_c)
            ctx = StepContext(cal)
            if want_scorecast:
                ctx.scorecast = theta_scorecast(cal, h)
                if cfg.sided == "symmetric":
                    ctx.scorecast_abs = theta_scorecast(np.abs(cal), h)
            if want_etilde:
                e = acmcp_error_forecast(scores, origin_tick, h, t_c, etildes)
                etildes.append(e)
                ctx.e_tilde = e
            per_method = {}
            for m in plan.methods:
                if not is_test and m in stateless:
                    continue
                tr = trackers[m][h - 1]
                thr_lo, thr_up = tr.step(ctx)
                per_method[m] = (thr_lo, thr_up)
                if is_test:
                    lo, up = _crossed_to_empty(yhat[h - 1] - thr_lo, yhat[h - 1] + thr_up)
                    intervals[m].set_bounds(origin_tick, h, lo, up)
                    row = c - test_c
                    for side, vals in tr.last.items():
                        for q, v in vals.items():
                            traces[m].data[f"{side}.{q}"][row, h - 1] = v
            issued[(c, h)] = per_method
        if is_test:
            max_read[origin_tick] = tick0 + obs.max_read - 1

    return RunResult(scores, forecasts, intervals, traces, warnings, max_read)
