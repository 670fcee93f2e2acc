"""Online interval-construction methods for multi-step forecasting.

Every method runs one tracker per horizon and side. A side maps the signed
score ``s = y - yhat`` into its own score space (``s`` for the upper bound,
``-s`` for the lower bound, ``|s|`` in symmetric mode) and emits a threshold
there; the y-space bounds are ``yhat - thr_lower`` and ``yhat + thr_upper``.

Methods
-------
mscp        split conformal quantile over the last t_c h-step scores
mwcp        the same quantile with exponentially decaying weights
macp        adaptive miscoverage level alpha_hat driving the MSCP quantile
macp_clip   macp with infinite thresholds replaced by extreme seen scores
mpi         quantile tracking plus saturated integrator
mpid        mpi plus a Theta scorecaster
acmcp       mpi plus the combined forecast of the h-step error
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import ExperimentConfig, ScorePanel, TrackerState
from .forecasters import (
    FitError,
    InsufficientData,
    combine_error_forecast,
    fit_lag_regression,
    fit_ma_hr,
    ma_forecast_one,
    theta_forecast,
)
from .wquantile import AtomDistribution, mwcp_weights, quantile

METHODS = ("mscp", "mwcp", "macp", "macp_clip", "mpi", "mpid", "acmcp")
DEFAULT_METHODS = ("mscp", "mwcp", "macp", "mpi", "mpid", "acmcp")
PID_METHODS = ("mpi", "mpid", "acmcp")

HALF_PI = math.pi / 2.0


# ---------------------------------------------------------------------------
# side levels and saturation
# ---------------------------------------------------------------------------

def sided_levels(alpha: float, sided: str = "two_sided"):
    """Per-side target miscoverage ``(alpha_lower, alpha_upper)``.

    ``two_sided`` splits alpha evenly over two independent trackers.
    ``upper`` disables the lower side (``None``; lower bound fixed at -inf).
    ``symmetric`` runs one tracker on |s| at level alpha for both bounds.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if sided == "two_sided":
        return alpha / 2.0, alpha / 2.0
    if sided == "upper":
        return None, alpha
    if sided == "symmetric":
        return alpha, alpha
    raise ValueError(f"unknown sided mode {sided!r}")


@dataclass(frozen=True)
class SaturationFn:
    """r_t(x) = K_I * tan(x log t / (t C_sat)), +/-inf once |arg| >= pi/2."""

    C_sat: float
    K_I: float

    def __post_init__(self):
        if not (self.C_sat > 0 and self.K_I > 0):
            raise ValueError("C_sat and K_I must be positive")

    @property
    def c(self) -> float:
        """Constant c of the saturation condition, with g(t) = t / log t."""
        return HALF_PI * self.C_sat

    def __call__(self, t_eff: int, x: float) -> float:
        return saturation_eval(self, t_eff, x)


def saturation_eval(fn: SaturationFn, t_eff: int, x: float) -> float:
    if x == 0.0 or t_eff < 2:
        return 0.0
    arg = x * math.log(t_eff) / (t_eff * fn.C_sat)
    if arg >= HALF_PI:
        return math.inf
    if arg <= -HALF_PI:
        return -math.inf
    return fn.K_I * math.tan(arg)


# ---------------------------------------------------------------------------
# quantile thresholds
# ---------------------------------------------------------------------------

def mscp_threshold(scores, alpha_side: float) -> float:
    """Equal-weight conformal quantile with a +inf atom, at level 1 - alpha_side.

    Levels outside (0, 1) are allowed for MACP: alpha_side <= 0 gives +inf
    and alpha_side >= 1 gives -inf (an empty side).
    """
    if alpha_side <= 0.0:
        return math.inf
    if alpha_side >= 1.0:
        return -math.inf
    s = np.asarray(scores, dtype=np.float64)
    if s.size == 0:
        return math.inf
    # equal weights 1/(n+1) are scale-equivalent to unit weights
    dist = AtomDistribution.with_infinity(s, np.ones(s.size), 1.0)
    return quantile(dist, 1.0 - alpha_side)


def mwcp_threshold(scores, decay_b: float, alpha_side: float) -> float:
    """Weighted conformal quantile; ``scores`` ordered oldest first."""
    if alpha_side <= 0.0:
        return math.inf
    if alpha_side >= 1.0:
        return -math.inf
    s = np.asarray(scores, dtype=np.float64)
    if s.size == 0:
        return math.inf
    w, tail = mwcp_weights(s.size, decay_b)
    return weighted_threshold(s, w, tail, alpha_side)


def weighted_threshold(scores, weights, tail_weight: float, alpha_side: float) -> float:
    """Quantile at 1 - alpha_side of weighted scores plus a +inf atom of ``tail_weight``."""
    if alpha_side <= 0.0:
        return math.inf
    if alpha_side >= 1.0:
        return -math.inf
    dist = AtomDistribution.with_infinity(scores, weights, tail_weight)
    return quantile(dist, 1.0 - alpha_side)


# ---------------------------------------------------------------------------
# step functions (state is updated in place and returned)
# ---------------------------------------------------------------------------

def macp_step(state: TrackerState, err_prev: Optional[int], gamma: float, scores,
              clip: bool = False):
    """alpha_hat <- alpha_hat + gamma * (alpha - err), then the MSCP quantile at alpha_hat."""
    if err_prev is not None:
        state.alpha_hat = state.alpha_hat + gamma * (state.alpha_target - err_prev)
        state.record_err(err_prev)
    thr = mscp_threshold(scores, state.alpha_hat)
    if clip:
        if thr == math.inf and math.isfinite(state.max_score_seen):
            thr = state.max_score_seen
        elif thr == -math.inf and math.isfinite(state.min_score_seen):
            thr = state.min_score_seen
    return state, thr


def pid_step(state: TrackerState, err_prev: Optional[int], eta: float,
             sat: Optional[SaturationFn], scorecast: float = 0.0):
    """Quantile tracking + saturated integrator + additive forecast term.

    ``state.q_hat`` holds the tracking (P) component only:
    q_hat <- q_hat + eta * (err - alpha). The emitted threshold is
    q_hat + r_t(sum(err - alpha)) + scorecast, with r_t evaluated at
    t = (number of recorded errors) + 1. ``sat=None`` disables the integrator.
    """
    if err_prev is not None:
        state.q_hat = state.q_hat + eta * (err_prev - state.alpha_target)
        state.record_err(err_prev)
    integ = 0.0 if sat is None else saturation_eval(sat, state.n_errs + 1, state.integrator_sum)
    return state, state.q_hat + integ + scorecast


def acmcp_step(state: TrackerState, err_prev: Optional[int], eta: float,
               sat: Optional[SaturationFn], e_tilde: float = 0.0):
    """:func:`pid_step` with the error forecast as the additive term."""
    return pid_step(state, err_prev, eta, sat, e_tilde)


# ---------------------------------------------------------------------------
# AcMCP error forecast
# ---------------------------------------------------------------------------

def acmcp_error_forecast(score_panel: ScorePanel, origin: int, h: int, window: int,
                         lower_etilde: Sequence[float] = ()) -> float:
    """Forecast of e_{t+h|t} from the scores observed by origin ``origin``.

    h = 1 is the mean of the one-step errors (MA(0)). For h >= 2 it is the
    equal-weight combination of a one-step MA(h-1) forecast of the
    origin-indexed h-step error series and a regression of the h-step error
    on the lower-horizon errors of the same origin, whose regressors
    e_{t+j|t} are replaced by ``lower_etilde[j - 1]``. Branches lacking data
    are dropped; with none left the result is 0.
    """
    series = score_panel.horizon_scores(h, upto_origin=origin, window=window)
    try:
        ma = ma_forecast_one(fit_ma_hr(series, h - 1))
    except (InsufficientData, FitError):
        ma = None
    reg = None
    if h >= 2:
        if len(lower_etilde) < h - 1:
            raise ValueError("lower-horizon error forecasts must be supplied in ascending order")
        try:
            fit = fit_lag_regression(score_panel, h, window, upto_origin=origin)
            # regressors ordered e_{t+h-1|t}, ..., e_{t+1|t}
            reg = fit.predict(np.asarray(lower_etilde[: h - 1], dtype=np.float64)[::-1])
        except (InsufficientData, FitError):
            reg = None
    return combine_error_forecast(ma, reg)


def acmcp_error_forecasts(score_panel: ScorePanel, origin: int, H: int, window: int) -> np.ndarray:
    """e-tilde for h = 1..H at one origin, computed recursively in ascending h."""
    out = []
    for h in range(1, H + 1):
        out.append(acmcp_error_forecast(score_panel, origin, h, window, out))
    return np.array(out)


def theta_scorecast(scores, h: int) -> float:
    """Theta forecast of the h-step score series h origins ahead; 0 if too short."""
    try:
        return theta_forecast(scores, h)
    except (InsufficientData, FitError):
        return 0.0


# ---------------------------------------------------------------------------
# trackers driven by the engine
# ---------------------------------------------------------------------------

def _side_scores(side: str, scores: np.ndarray) -> np.ndarray:
    if side == "upper":
        return scores
    if side == "lower":
        return -scores
    return np.abs(scores)


def _side_value(side: str, s: float) -> float:
    if side == "upper":
        return s
    if side == "lower":
        return -s
    return abs(s)


@dataclass
class StepContext:
    """Per-origin, per-horizon inputs shared by all trackers.

    scores : signed h-step calibration scores, oldest first (last t_c)
    scorecast : Theta forecast of the signed (or absolute, symmetric mode) scores
    e_tilde : AcMCP error forecast of the signed h-step error
    """

    scores: np.ndarray
    scorecast: float = 0.0
    scorecast_abs: float = 0.0
    e_tilde: float = 0.0


class HorizonTracker:
    """All side trackers of one method at one horizon."""

    TRACE = ("threshold",)

    def __init__(self, method: str, h: int, cfg: ExperimentConfig):
        self.method = method
        self.h = h
        self.cfg = cfg
        lo, up = sided_levels(cfg.alpha, cfg.sided)
        if cfg.sided == "symmetric":
            self.sides = {"symmetric": TrackerState(method, h, "symmetric", cfg.alpha)}
        else:
            self.sides = {"upper": TrackerState(method, h, "upper", up)}
            if lo is not None:
                self.sides["lower"] = TrackerState(method, h, "lower", lo)
        self._pending = {}
        self.last = {}

    # -- realisations -------------------------------------------------------
    def observe(self, score: float, thresholds) -> dict:
        """Record a realised signed score for an interval issued h steps ago.

        ``thresholds`` are the raw (thr_lower, thr_upper) issued at that
        origin, or None if this tracker issued none. Returns per-side errs.
        """
        errs = {}
        for side, st in self.sides.items():
            st.record_score(_side_value(side, score), self.cfg.window_delta)
        if thresholds is None:
            return errs
        thr_lo, thr_up = thresholds
        if "symmetric" in self.sides:
            errs["symmetric"] = int(score > thr_up or -score > thr_lo)
        else:
            errs["upper"] = int(score > thr_up)
            if "lower" in self.sides:
                errs["lower"] = int(-score > thr_lo)
        self._pending = errs
        return errs

    # -- emission -----------------------------------------------------------
    def step(self, ctx: StepContext):
        """Consume pending errors and return (thr_lower, thr_upper)."""
        thr = {}
        for side, st in self.sides.items():
            thr[side] = self._side_step(side, st, self._pending.get(side), ctx)
        self._pending = {}
        if "symmetric" in thr:
            base, shift = thr["symmetric"]
            return base - shift, base + shift
        up = thr["upper"]
        lo = thr["lower"] if "lower" in thr else math.inf
        return lo, up

    def _side_step(self, side, st, err, ctx):
        raise NotImplementedError


class MSCPTracker(HorizonTracker):
    def _side_step(self, side, st, err, ctx):
        if err is not None:
            st.record_err(err)
        thr = mscp_threshold(_side_scores(side, ctx.scores), st.alpha_target)
        self.last[side] = {"threshold": thr}
        return thr if side != "symmetric" else (thr, 0.0)


class MWCPTracker(HorizonTracker):
    def _side_step(self, side, st, err, ctx):
        if err is not None:
            st.record_err(err)
        thr = mwcp_threshold(_side_scores(side, ctx.scores), self.cfg.decay_b, st.alpha_target)
        self.last[side] = {"threshold": thr}
        return thr if side != "symmetric" else (thr, 0.0)


class MACPTracker(HorizonTracker):
    TRACE = ("alpha_hat", "threshold")

    def __init__(self, method, h, cfg, clip=False):
        super().__init__(method, h, cfg)
        self.clip = clip

    def _side_step(self, side, st, err, ctx):
        _, thr = macp_step(st, err, self.cfg.gamma, _side_scores(side, ctx.scores), self.clip)
        self.last[side] = {"alpha_hat": st.alpha_hat, "threshold": thr}
        return thr if side != "symmetric" else (thr, 0.0)


class PIDTracker(HorizonTracker):
    """Shared machinery of mpi / mpid / acmcp."""

    TRACE = ("q_hat", "integrator", "eta", "d_term", "threshold")

    def __init__(self, method, h, cfg):
        super().__init__(method, h, cfg)
        self.c_sat = cfg.c_sat

    def eta(self, st: TrackerState) -> float:
        b = st.b_hat()
        if math.isfinite(b) and b > 0:
            return self.cfg.eta_scale * b
        return self.cfg.eta_scale

    def saturation(self, st: TrackerState) -> SaturationFn:
        if st.k_i is None:
            if self.cfg.K_I is not None:
                st.k_i = float(self.cfg.K_I)
            else:
                b = st.b_hat()
                if math.isfinite(b) and b > 0:
                    st.k_i = self.cfg.eta_scale * b
        k_i = st.k_i if st.k_i is not None else self.cfg.eta_scale
        return SaturationFn(self.c_sat, k_i)

    def d_term(self, side: str, ctx: StepContext) -> float:
        return 0.0

    def _side_step(self, side, st, err, ctx):
        eta = self.eta(st)
        sat = self.saturation(st)
        d = self.d_term(side, ctx)
        if side == "symmetric" and self.method == "acmcp":
            # the error forecast re-centres the symmetric interval
            _, base = acmcp_step(st, err, eta, sat, 0.0)
            shift = d
            thr_report = base
        else:
            _, base = pid_step(st, err, eta, sat, d)
            shift = 0.0
            thr_report = base
        self.last[side] = {
            "q_hat": st.q_hat,
            "integrator": st.integrator_sum,
            "eta": eta,
            "d_term": d,
            "threshold": thr_report,
        }
        return base if side != "symmetric" else (base, shift)


class MPITracker(PIDTracker):
    pass


class MPIDTracker(PIDTracker):
    def d_term(self, side, ctx):
        if side == "upper":
            return ctx.scorecast
        if side == "lower":
            return -ctx.scorecast
        return ctx.scorecast_abs


class AcMCPTracker(PIDTracker):
    def d_term(self, side, ctx):
        if side == "lower":
            return -ctx.e_tilde
        return ctx.e_tilde


def make_tracker(method: str, h: int, cfg: ExperimentConfig) -> HorizonTracker:
    if method == "mscp":
        return MSCPTracker(method, h, cfg)
    if method == "mwcp":
        return MWCPTracker(method, h, cfg)
    if method == "macp":
        return MACPTracker(method, h, cfg, clip=False)
    if method == "macp_clip":
        return MACPTracker(method, h, cfg, clip=True)
    if method == "mpi":
        return MPITracker(method, h, cfg)
    if method == "mpid":
        return MPIDTracker(method, h, cfg)
    if method == "acmcp":
        return AcMCPTracker(method, h, cfg)
    raise ValueError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
