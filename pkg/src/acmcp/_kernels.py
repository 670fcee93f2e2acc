"""Hot numeric kernels with a numba backend and a pure-numpy fallback.

Every kernel exists twice: ``<name>_np`` (numpy/scipy, always available) and
``<name>_nb`` (numba ``@njit``, compiled lazily on first call). The public
name ``<name>`` is bound to the numba variant unless numba is missing or the
environment variable ``ACMCP_DISABLE_NUMBA`` is set to a truthy value.

The two backends implement the same algorithm step for step; results agree
exactly on integer-valued weights and to rounding otherwise.
"""

from __future__ import annotations

import math
import os

import numpy as np
from scipy.signal import lfilter

_DISABLE = os.environ.get("ACMCP_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")

try:
    if _DISABLE:
        raise ImportError("numba disabled by ACMCP_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
HALF_PI = math.pi / 2.0


# ---------------------------------------------------------------------------
# weighted quantile scan
# ---------------------------------------------------------------------------

def quantile_scan_np(weights, tau):
    """Smallest k with fl(S_k / S) >= tau, where S_k = sum(weights[:k+1]).

    ``weights`` must be nonnegative with a positive total, ordered by atom
    value. Prefix sums are correctly rounded (``math.fsum``) and located by
    bisection, so no O(n) float drift enters the comparison.
    """
    w = np.asarray(weights, dtype=np.float64)
    n = w.shape[0]
    wl = w.tolist()
    total = math.fsum(wl)
    lo, hi = 0, n - 1
    # predicate is monotone in k; the last index always satisfies it
    while lo < hi:
        mid = (lo + hi) // 2
        if math.fsum(wl[: mid + 1]) / total >= tau:
            hi = mid
        else:
            lo = mid + 1
    return lo


# ---------------------------------------------------------------------------
# simple exponential smoothing (Theta scorecaster core)
# ---------------------------------------------------------------------------

def ses_sse_np(y, alpha):
    """Sum of squared one-step SES errors, level initialised at y[0]."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape[0] < 2:
        return 0.0
    zi = np.array([(1.0 - alpha) * y[0]])
    level, _ = lfilter([alpha], [1.0, -(1.0 - alpha)], y, zi=zi)
    resid = y[1:] - level[:-1]
    return float(resid @ resid)


def ses_level_np(y, alpha):
    y = np.asarray(y, dtype=np.float64)
    zi = np.array([(1.0 - alpha) * y[0]])
    level, _ = lfilter([alpha], [1.0, -(1.0 - alpha)], y, zi=zi)
    return float(level[-1])


def ses_fit_np(y, lo=0.01, hi=0.99, tol=1e-6):
    """Golden-section search for the SES smoothing parameter.

    Returns ``(alpha, final_level)``.
    """
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc = ses_sse_np(y, c)
    fd = ses_sse_np(y, d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = ses_sse_np(y, c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = ses_sse_np(y, d)
    alpha = 0.5 * (a + b)
    # the open-interval optimum can sit on a bound; compare against the ends
    best_a, best_f = alpha, ses_sse_np(y, alpha)
    for cand in (lo, hi):
        f = ses_sse_np(y, cand)
        if f < best_f:
            best_a, best_f = cand, f
    return best_a, ses_level_np(y, best_a)


# ---------------------------------------------------------------------------
# deterministic coverage-bound harnesses
# ---------------------------------------------------------------------------

def _saturation_np(x, t_eff, c_sat, k_i):
    """Vectorised tan saturation; ``x`` is an array, ``t_eff`` a scalar."""
    if t_eff < 2:
        return np.zeros_like(x)
    arg = x * math.log(t_eff) / (t_eff * c_sat)
    out = k_i * np.tan(arg)
    out = np.where(arg >= HALF_PI, np.inf, out)
    out = np.where(arg <= -HALF_PI, -np.inf, out)
    return out


def p_only_errs_np(scores, eta, alpha, h):
    """Miscoverage indicators of the quantile-tracking (P-only) iteration.

    ``scores`` has shape (n_seq, n). Error ``m`` is decided by the threshold
    eta * S, where S sums the first ``m + 1 - h`` errors (zero before then).
    """
    scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    n_seq, n = scores.shape
    errs = np.zeros((n_seq, n), dtype=np.int8)
    prefix = np.zeros((n_seq, n + 1))
    for m in range(n):
        count = m + 1 - h
        s_used = prefix[:, count] if count > 0 else np.zeros(n_seq)
        q = eta * s_used
        e = scores[:, m] > q
        errs[:, m] = e
        prefix[:, m + 1] = prefix[:, m] + (e - alpha)
    return errs


def integrator_only_errs_np(scores, alpha, h, c_sat, k_i):
    """Miscoverage indicators of the saturated-integrator (I-only) iteration.

    The integrator time argument is the number of recorded errors plus one.
    """
    scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    n_seq, n = scores.shape
    errs = np.zeros((n_seq, n), dtype=np.int8)
    prefix = np.zeros((n_seq, n + 1))
    for m in range(n):
        count = max(m + 1 - h, 0)
        q = _saturation_np(prefix[:, count], count + 1, c_sat, k_i)
        e = scores[:, m] > q
        errs[:, m] = e
        prefix[:, m + 1] = prefix[:, m] + (e - alpha)
    return errs


# ---------------------------------------------------------------------------
# nonlinear data generating process
# ---------------------------------------------------------------------------

def nonlinear_recursion_np(eps, x1, x2, y_init):
    n = eps.shape[0]
    y = np.empty(n + 2)
    y[0], y[1] = y_init[0], y_init[1]
    guard = 0
    for t in range(n):
        y1, y2 = y[t + 1], y[t]
        arg = y2 + 1.0
        if y2 <= -0.999:
            arg = 0.001
            guard += 1
        y[t + 2] = (math.sin(y1) + 0.5 * math.log(arg) + 0.1 * y1 * x1[t]
                    + 0.3 * x2[t] + eps[t])
    return y[2:], guard


# ---------------------------------------------------------------------------
# numba variants
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def quantile_scan_nb(weights, tau):
        n = weights.shape[0]
        # Neumaier-compensated total
        s = 0.0
        c = 0.0
        for i in range(n):
            w = weights[i]
            t = s + w
            if abs(s) >= abs(w):
                c += (s - t) + w
            else:
                c += (w - t) + s
            s = t
        total = s + c
        s = 0.0
        c = 0.0
        for i in range(n):
            w = weights[i]
            t = s + w
            if abs(s) >= abs(w):
                c += (s - t) + w
            else:
                c += (w - t) + s
            s = t
            if (s + c) / total >= tau:
                return i
        return n - 1

    @njit(cache=True)
    def ses_sse_nb(y, alpha):
        n = y.shape[0]
        level = y[0]
        sse = 0.0
        for t in range(1, n):
            r = y[t] - level
            sse += r * r
            level = alpha * y[t] + (1.0 - alpha) * level
        return sse

    @njit(cache=True)
    def _ses_level_nb(y, alpha):
        level = y[0]
        for t in range(1, y.shape[0]):
            level = alpha * y[t] + (1.0 - alpha) * level
        return level

    @njit(cache=True)
    def ses_fit_nb(y, lo=0.01, hi=0.99, tol=1e-6):
        g = (math.sqrt(5.0) - 1.0) / 2.0
        a = lo
        b = hi
        c = b - g * (b - a)
        d = a + g * (b - a)
        fc = ses_sse_nb(y, c)
        fd = ses_sse_nb(y, d)
        while b - a > tol:
            if fc <= fd:
                b = d
                d = c
                fd = fc
                c = b - g * (b - a)
                fc = ses_sse_nb(y, c)
            else:
                a = c
                c = d
                fc = fd
                d = a + g * (b - a)
                fd = ses_sse_nb(y, d)
        best_a = 0.5 * (a + b)
        best_f = ses_sse_nb(y, best_a)
        f = ses_sse_nb(y, lo)
        if f < best_f:
            best_a = lo
            best_f = f
        f = ses_sse_nb(y, hi)
        if f < best_f:
            best_a = hi
            best_f = f
        return best_a, _ses_level_nb(y, best_a)

    @njit(cache=True)
    def _saturation_scalar_nb(x, t_eff, c_sat, k_i):
        if t_eff < 2:
            return 0.0
        arg = x * math.log(t_eff) / (t_eff * c_sat)
        if arg >= HALF_PI:
            return np.inf
        if arg <= -HALF_PI:
            return -np.inf
        return k_i * math.tan(arg)

    @njit(cache=True)
    def p_only_errs_nb(scores, eta, alpha, h):
        n_seq, n = scores.shape
        errs = np.zeros((n_seq, n), dtype=np.int8)
        prefix = np.zeros(n + 1)
        for j in range(n_seq):
            prefix[0] = 0.0
            for m in range(n):
                count = m + 1 - h
                s_used = prefix[count] if count > 0 else 0.0
                e = 1 if scores[j, m] > eta * s_used else 0
                errs[j, m] = e
                prefix[m + 1] = prefix[m] + (e - alpha)
        return errs

    @njit(cache=True)
    def integrator_only_errs_nb(scores, alpha, h, c_sat, k_i):
        n_seq, n = scores.shape
        errs = np.zeros((n_seq, n), dtype=np.int8)
        prefix = np.zeros(n + 1)
        for j in range(n_seq):
            prefix[0] = 0.0
            for m in range(n):
                count = m + 1 - h
                if count < 0:
                    count = 0
                q = _saturation_scalar_nb(prefix[count], count + 1, c_sat, k_i)
                e = 1 if scores[j, m] > q else 0
                errs[j, m] = e
                prefix[m + 1] = prefix[m] + (e - alpha)
        return errs

    @njit(cache=True)
    def nonlinear_recursion_nb(eps, x1, x2, y_init):
        n = eps.shape[0]
        y = np.empty(n + 2)
        y[0] = y_init[0]
        y[1] = y_init[1]
        guard = 0
        for t in range(n):
            y1 = y[t + 1]
            y2 = y[t]
            arg = y2 + 1.0
            if y2 <= -0.999:
                arg = 0.001
                guard += 1
            y[t + 2] = (math.sin(y1) + 0.5 * math.log(arg) + 0.1 * y1 * x1[t]
                        + 0.3 * x2[t] + eps[t])
        return y[2:], guard

    quantile_scan = quantile_scan_nb
    ses_sse = ses_sse_nb
    ses_fit = ses_fit_nb
    p_only_errs = p_only_errs_nb
    integrator_only_errs = integrator_only_errs_nb
    nonlinear_recursion = nonlinear_recursion_nb
else:
    quantile_scan = quantile_scan_np
    ses_sse = ses_sse_np
    ses_fit = ses_fit_np
    p_only_errs = p_only_errs_np
    integrator_only_errs = integrator_only_errs_np
    nonlinear_recursion = nonlinear_recursion_np
