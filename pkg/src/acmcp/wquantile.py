"""Quantiles of finite weighted point-mass distributions.

A distribution is a list of atoms ``(value, weight)``; values are extended
reals and at most one atom may sit at +inf. The tau-quantile is the smallest
atom value whose normalised cumulative weight reaches tau, with no
interpolation and no tolerance in the comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels


@dataclass(frozen=True, eq=False)
class AtomDistribution:
    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).ravel()
        w = np.asarray(self.weights, dtype=np.float64).ravel()
        if v.shape != w.shape:
            raise ValueError("values and weights differ in length")
        if v.size == 0:
            raise ValueError("empty distribution")
        if np.any(np.isnan(v)) or np.any(v == -np.inf):
            raise ValueError("atom values must be finite or +inf")
        if np.count_nonzero(v == np.inf) > 1:
            raise ValueError("at most one atom at +inf")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        if not w.sum() > 0:
            raise ValueError("total weight must be positive")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_atoms(cls, atoms) -> "AtomDistribution":
        atoms = list(atoms)
        if not atoms:
            raise ValueError("empty distribution")
        v, w = zip(*atoms)
        return cls(np.array(v, dtype=np.float64), np.array(w, dtype=np.float64))

    @classmethod
    def with_infinity(cls, values, weights, inf_weight: float) -> "AtomDistribution":
        """Finite atoms plus one atom of weight ``inf_weight`` at +inf."""
        v = np.append(np.asarray(values, dtype=np.float64), np.inf)
        w = np.append(np.asarray(weights, dtype=np.float64), inf_weight)
        return cls(v, w)


def _sorted(values: np.ndarray, weights: np.ndarray):
    order = np.argsort(values, kind="stable")
    return values[order], np.ascontiguousarray(weights[order])


def _reaches(wl: list, total: float, k: int, tau: float) -> bool:
    return math.fsum(wl[: k + 1]) / total >= tau


def _scan(w: np.ndarray, tau: float) -> int:
    """Smallest k with fl(S_k / S) >= tau for correctly rounded S_k and S.

    The fast kernel proposes ``k``; the proposal is confirmed with exact
    prefix sums and replaced by the exact bisection if it is off.
    """
    k = _kernels.quantile_scan(w, tau)
    if _kernels.BACKEND == "numpy":
        return k
    wl = w.tolist()
    total = math.fsum(wl)
    if _reaches(wl, total, k, tau) and (k == 0 or not _reaches(wl, total, k - 1, tau)):
        return k
    return _kernels.quantile_scan_np(w, tau)


def quantile(dist: AtomDistribution, tau: float) -> float:
    """inf{v : F(v) >= tau} over the atom values of ``dist``.

    Parameters
    ----------
    dist : AtomDistribution
    tau : float
        Level in (0, 1].

    Returns
    -------
    float
        An atom value; +inf when only the infinity atom reaches ``tau``.
    """
    if not 0.0 < tau <= 1.0:
        raise ValueError("tau must lie in (0, 1]")
    # ties need no merging: the first index reaching tau carries the answer
    v, w = _sorted(dist.values, dist.weights)
    return float(v[_scan(w, float(tau))])


def weighted_quantile(values, weights, tau: float) -> float:
    """Convenience wrapper over :func:`quantile` for raw arrays."""
    return quantile(AtomDistribution(values, weights), tau)


def mwcp_weights(n: int, decay_b: float):
    """Normalised exponentially decaying weights for ``n`` calibration scores.

    Raw weights are ``b**(n + 1 - i)`` for i = 1..n (oldest first) and the
    test point gets weight 1; all are divided by their sum.

    Returns
    -------
    weights : ndarray of shape (n,)
        Normalised weights, oldest score first.
    tail_weight : float
        Normalised weight of the +inf atom.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 < decay_b < 1.0:
        raise ValueError("decay_b must lie in (0, 1)")
    raw = decay_b ** np.arange(n, 0, -1, dtype=np.float64)
    denom = math.fsum(raw.tolist()) + 1.0
    return raw / denom, 1.0 / denom
