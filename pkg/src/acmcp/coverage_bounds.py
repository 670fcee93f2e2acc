"""Deterministic long-run coverage bounds and a harness to check them.

For any bounded score sequence, ``n`` realised h-step miscoverage indicators
satisfy

* quantile tracking ``q <- q + eta (err - alpha)``:
  ``|sum(err - alpha)| <= b / eta + h``
* saturated integrator ``q = r_t(sum(err - alpha))``:
  ``|sum(err - alpha)| <= (pi/2) C_sat g(n) + h`` with ``g(t) = t / log t``.

Dividing by ``n`` (the number of realised errors, ``T - h``) gives the
average-miscoverage form used by :func:`count_violations`.
"""

from __future__ import annotations

import math

import numpy as np

from . import _kernels

SCORE_KINDS = ("uniform", "constant", "alternating", "drifting", "signs")


def g_admissible(t) -> np.ndarray:
    """``t / log t`` for t >= 3, and 3 / log 3 below (kept nondecreasing)."""
    t = np.maximum(np.asarray(t, dtype=np.float64), 3.0)
    return t / np.log(t)


def p_only_bound(n, b: float, eta: float, h: int) -> np.ndarray:
    """Bound on |mean(err - alpha)| over ``n`` errors of quantile tracking."""
    n = np.asarray(n, dtype=np.float64)
    return (b + eta * h) / (eta * n)


def integrator_bound(n, c_sat: float, h: int) -> np.ndarray:
    """Bound on |mean(err - alpha)| over ``n`` errors of the saturated integrator."""
    n = np.asarray(n, dtype=np.float64)
    return ((math.pi / 2.0) * c_sat * g_admissible(n) + h) / n


def run_p_only(scores, eta: float, alpha: float, h: int) -> np.ndarray:
    """err matrix of shape (n_seq, n) for quantile tracking started at q = 0."""
    s = np.ascontiguousarray(np.atleast_2d(scores), dtype=np.float64)
    return _kernels.p_only_errs(s, float(eta), float(alpha), int(h))


def run_integrator_only(scores, alpha: float, h: int, c_sat: float, k_i: float = 1.0) -> np.ndarray:
    s = np.ascontiguousarray(np.atleast_2d(scores), dtype=np.float64)
    return _kernels.integrator_only_errs(s, float(alpha), int(h), float(c_sat), float(k_i))


def running_mean_gap(errs, alpha: float) -> np.ndarray:
    """|mean(err - alpha)| after each realised error, shape (n_seq, n)."""
    e = np.atleast_2d(errs).astype(np.float64)
    n = np.arange(1, e.shape[1] + 1)
    return np.abs(np.cumsum(e - alpha, axis=1)) / n


def count_violations(errs, alpha: float, bound: np.ndarray, rtol: float = 1e-12) -> int:
    """Number of (sequence, n) pairs whose running gap exceeds ``bound[n-1]``."""
    gap = running_mean_gap(errs, alpha)
    return int(np.count_nonzero(gap > bound[None, :] * (1 + rtol)))


def random_scores(kind: str, n_seq: int, n: int, b: float, rng: np.random.Generator) -> np.ndarray:
    """Score sequences in [-b, b] of shape (n_seq, n).

    ``uniform`` i.i.d. uniform; ``constant`` a random constant per sequence;
    ``alternating`` +-b; ``drifting`` a clipped random walk; ``signs`` random +-b.
    """
    if kind == "uniform":
        return rng.uniform(-b, b, (n_seq, n))
    if kind == "constant":
        return np.repeat(rng.uniform(-b, b, (n_seq, 1)), n, axis=1)
    if kind == "alternating":
        row = np.where(np.arange(n) % 2 == 0, b, -b)
        return np.tile(row, (n_seq, 1)).astype(np.float64)
    if kind == "drifting":
        steps = rng.normal(0.0, 0.05 * b, (n_seq, n))
        return np.clip(np.cumsum(steps, axis=1) + rng.uniform(-b, b, (n_seq, 1)), -b, b)
    if kind == "signs":
        return b * rng.choice([-1.0, 1.0], size=(n_seq, n))
    raise ValueError(f"unknown score kind {kind!r}")


def mixed_scores(n_seq: int, n: int, b: float, rng: np.random.Generator) -> np.ndarray:
    """Sequences drawn round-robin from every kind in :data:`SCORE_KINDS`."""
    out = np.empty((n_seq, n))
    for i in range(n_seq):
        kind = SCORE_KINDS[i % len(SCORE_KINDS)]
        out[i] = random_scores(kind, 1, n, b, rng)[0]
    return out
