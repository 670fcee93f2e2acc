"""Seeded reference data generating processes.

All draws come from ``numpy.random.default_rng(seed)`` (PCG64) in a fixed
order: the innovations for burn-in plus sample first, then the predictor
columns. The first ``burn_in`` points are discarded.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.signal import lfilter

from . import _kernels
from .core import SeriesFrame

DGP_KINDS = ("ar2", "nonlinear", "custom_linear")
AR2_PHI = (0.8, -0.5)
NONLINEAR_SIGMA2 = 0.1


@dataclass(frozen=True)
class DgpSpec:
    kind: str = "ar2"
    n: int = 5000
    burn_in: int = 500
    seed: int = 0
    phi: tuple = ()
    sigma2: float = 1.0

    def __post_init__(self):
        if self.kind not in DGP_KINDS:
            raise ValueError(f"unknown dgp {self.kind!r}; expected one of {', '.join(DGP_KINDS)}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be an integer >= 1")
        if int(self.burn_in) != self.burn_in or self.burn_in < 100:
            raise ValueError("burn_in must be an integer >= 100")
        if self.kind == "custom_linear":
            if len(self.phi) == 0:
                raise ValueError("custom_linear needs at least one AR coefficient")
            if not (math.isfinite(self.sigma2) and self.sigma2 > 0):
                raise ValueError("sigma2 must be positive")
        object.__setattr__(self, "phi", tuple(float(p) for p in self.phi))

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form of the spec."""
        blob = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class Simulation:
    series: SeriesFrame
    innovations: np.ndarray
    guard_events: int = 0
    spec: Optional[DgpSpec] = None
    extra: dict = field(default_factory=dict)


def _linear(phi, sigma2, n, seed, burn_in) -> Simulation:
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal(n + burn_in) * math.sqrt(sigma2)
    a = np.concatenate(([1.0], -np.asarray(phi, dtype=np.float64)))
    y = lfilter([1.0], a, eps)
    return Simulation(SeriesFrame.from_values(y[burn_in:]), eps[burn_in:].copy())


def simulate_ar2(n: int, seed: int = 0, burn_in: int = 500) -> SeriesFrame:
    """``y_t = 0.8 y_{t-1} - 0.5 y_{t-2} + e_t`` with standard normal e_t."""
    return simulate(DgpSpec("ar2", n, burn_in, seed)).series


def simulate_nonlinear(n: int, seed: int = 0, burn_in: int = 500) -> SeriesFrame:
    """Nonlinear autoregression driven by two uniform predictors x1, x2."""
    return simulate(DgpSpec("nonlinear", n, burn_in, seed)).series


def _nonlinear(n, seed, burn_in) -> Simulation:
    rng = np.random.default_rng(seed)
    m = n + burn_in
    eps = rng.standard_normal(m) * math.sqrt(NONLINEAR_SIGMA2)
    x1 = rng.uniform(0.0, 1.0, m)
    x2 = rng.uniform(0.0, 1.0, m)
    y, guard = _kernels.nonlinear_recursion(eps, x1, x2, np.zeros(2))
    x = np.column_stack([x1[burn_in:], x2[burn_in:]])
    frame = SeriesFrame.from_values(y[burn_in:], x, x_names=("x1", "x2"))
    return Simulation(frame, eps[burn_in:].copy(), int(guard))


def simulate(spec: DgpSpec) -> Simulation:
    """Generate the series described by ``spec`` along with its innovations.

    For the nonlinear process ``guard_events`` counts steps where the log
    argument had to be clamped (lagged value at or below -0.999).
    """
    if spec.kind == "ar2":
        sim = _linear(AR2_PHI, 1.0, spec.n, spec.seed, spec.burn_in)
    elif spec.kind == "custom_linear":
        sim = _linear(spec.phi, spec.sigma2, spec.n, spec.seed, spec.burn_in)
    else:
        sim = _nonlinear(spec.n, spec.seed, spec.burn_in)
    sim.spec = spec
    return sim


def ar2_variance(phi1: float, phi2: float, sigma2: float = 1.0) -> float:
    """Stationary variance of an AR(2) process."""
    return (1 - phi2) * sigma2 / ((1 + phi2) * ((1 - phi2) ** 2 - phi1 ** 2))


def ar2_rho1(phi1: float, phi2: float) -> float:
    return phi1 / (1 - phi2)
