"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Every tolerance is pinned in the constants below. Lines are collected into
``conftest.ACCEPTANCE_LINES`` and echoed in the pytest terminal summary.
"""

import math
import subprocess
import sys

import numpy as np

from acmcp.core import ExperimentConfig
from acmcp.coverage_bounds import (
    count_violations,
    integrator_bound,
    mixed_scores,
    p_only_bound,
    run_integrator_only,
    run_p_only,
)
from acmcp.cpmethods import mscp_threshold, weighted_threshold
from acmcp.engine import RunPlan, run
from acmcp.evalkit import rolling_coverage
from acmcp.forecasters import ForecasterSpec, fit_ar_ls
from acmcp.simgen import ar2_variance, simulate_ar2, simulate_nonlinear
from acmcp.wquantile import AtomDistribution, quantile

from conftest import ACCEPTANCE_LINES
from oracles import acf, companion_forecast, direct_acp_online, quantile_scaled_int_oracle

ALPHA = 0.1
COVERAGE_TOL_LINEAR = 0.02
RUNTIME_BUDGET_S = 300.0
ROLLING_WINDOW = 500
BOUND_N_SEQ = 1000
BOUND_T = 2000
BOUND_SCORE_B = 1.0
BOUND_ETAS = (0.05, 0.1, 0.5)
BOUND_C_SATS = (ExperimentConfig().c_sat, 1.0)
BOUND_K_IS = (0.01, 1.0)
ACF_N = 20_000
ACF_MAX_LAG = 10
QUANTILE_CASES = 10_000
QUANTILE_MAX_ATOMS = 1000
IDENTITY_WINDOWS = 1000
COVERAGE_TOL_NONLINEAR = 0.03
NONLINEAR_N = 2000
NONLINEAR_WINDOW = 100
YW_VARIANCE = 1.8634
VARIANCE_TOL = 0.03
VARIANCE_N = 200_000
COEF_TOL = 0.05
COEF_N = 5000


def report(tag: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {tag}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def test_criterion_1_long_run_coverage(ar2_timed):
    result, seconds = ar2_timed
    parts, ok = [], seconds < RUNTIME_BUDGET_S
    for m in ("acmcp", "mpi", "mpid"):
        cov = 1.0 - np.nanmean(result.intervals[m].err, axis=0)
        ok &= bool(np.all(np.abs(cov - (1 - ALPHA)) <= COVERAGE_TOL_LINEAR))
        parts.append(f"{m}=" + "/".join(f"{c:.4f}" for c in cov))
    report("1", ok, f"{' '.join(parts)} (band 0.90+-{COVERAGE_TOL_LINEAR}); runtime {seconds:.1f}s")


def test_criterion_2_rolling_coverage_volatility(ar2_run):
    sd = {m: [float(np.std(rolling_coverage(ar2_run.intervals[m].err[:, j], ROLLING_WINDOW)))
              for j in range(3)] for m in ("acmcp", "mscp", "macp")}
    ok = all(sd["acmcp"][j] < min(sd["mscp"][j], sd["macp"][j]) for j in range(3))
    detail = " ".join(f"{m}=" + "/".join(f"{v:.4f}" for v in vals) for m, vals in sd.items())
    report("2", ok, f"std of {ROLLING_WINDOW}-window rolling coverage {detail}")


def test_criterion_3_quantile_tracking_bound():
    rng = np.random.default_rng(3)
    worst, violations = 0.0, 0
    for eta in BOUND_ETAS:
        for h in (1, 2, 3):
            n = BOUND_T - h
            scores = mixed_scores(BOUND_N_SEQ, n, BOUND_SCORE_B, rng)
            errs = run_p_only(scores, eta, ALPHA, h)
            bound = p_only_bound(np.arange(1, n + 1), BOUND_SCORE_B, eta, h)
            violations += count_violations(errs, ALPHA, bound)
            gap = np.abs(np.cumsum(errs - ALPHA, axis=1))
            worst = max(worst, float(np.max(gap / (bound * np.arange(1, n + 1)))))
    report("3", violations == 0,
           f"{violations} violations over {BOUND_N_SEQ} sequences x 9 (eta, h) cells; "
           f"max |sum| / bound = {worst:.3f}")


def test_criterion_4_integrator_bound():
    rng = np.random.default_rng(4)
    worst, violations, cells = 0.0, 0, 0
    for c_sat in BOUND_C_SATS:
        for k_i in BOUND_K_IS:
            for h in (1, 2, 3):
                n = BOUND_T - h
                scores = mixed_scores(BOUND_N_SEQ, n, BOUND_SCORE_B, rng)
                errs = run_integrator_only(scores, ALPHA, h, c_sat, k_i)
                bound = integrator_bound(np.arange(1, n + 1), c_sat, h)
                violations += count_violations(errs, ALPHA, bound)
                gap = np.abs(np.cumsum(errs - ALPHA, axis=1))
                worst = max(worst, float(np.max(gap / (bound * np.arange(1, n + 1)))))
                cells += 1
    report("4", violations == 0,
           f"{violations} violations over {BOUND_N_SEQ} sequences x {cells} (C_sat, K_I, h) cells; "
           f"max |sum| / bound = {worst:.3f}")


def _true_forecast_errors(y, h):
    out = []
    for t in range(2, len(y) - h):
        fc = companion_forecast([0.8, -0.5], 0.0, y[: t + 1], h)
        out.append(y[t + h] - fc[h - 1])
    return np.array(out)


def test_criterion_5_error_acf_cutoff():
    y = simulate_ar2(ACF_N, seed=1).y
    band = 2 / math.sqrt(ACF_N)
    e1 = _true_forecast_errors(y, 1)
    e3 = _true_forecast_errors(y, 3)
    r1 = [acf(e1, k) for k in range(1, ACF_MAX_LAG + 1)]
    r3 = [acf(e3, k) for k in range(1, ACF_MAX_LAG + 1)]
    ok = (all(abs(r) < band for r in r1) and abs(r3[0]) > band
          and all(abs(r) < band for r in r3[2:]))
    report("5", ok, f"band {band:.4f}; h=1 max|rho| {max(map(abs, r1)):.4f}; h=3 rho1 {r3[0]:.4f}, "
           f"max|rho(3..10)| {max(map(abs, r3[2:])):.4f}")


def _random_distribution(rng):
    n = int(rng.integers(1, QUANTILE_MAX_ATOMS + 1))
    kind = rng.integers(3)
    if kind == 0:
        values = rng.integers(-20, 21, n).astype(float)  # many ties
    elif kind == 1:
        values = rng.standard_normal(n)
    else:
        values = np.round(rng.standard_normal(n), 1)
    wkind = rng.integers(4)
    if wkind == 0:
        weights = np.ones(n)
    elif wkind == 1:
        weights = rng.exponential(1.0, n)
    elif wkind == 2:
        weights = rng.integers(0, 10, n).astype(float)
    else:
        weights = rng.uniform(0, 1, n) * 10.0 ** rng.integers(-8, 8, n)
    if rng.random() < 0.5:
        values = np.append(values, np.inf)
        weights = np.append(weights, rng.exponential(1.0))
    if weights.sum() == 0:
        weights[0] = 1.0
    if rng.random() < 0.5:
        tau = float(rng.uniform(0, 1)) or 1.0
    else:
        # levels landing exactly on cumulative steps of equal weights
        tau = int(rng.integers(1, len(values) + 1)) / len(values)
    return values, weights, tau


def test_criterion_6_weighted_quantile_oracle():
    rng = np.random.default_rng(6)
    mismatches = 0
    for _ in range(QUANTILE_CASES):
        values, weights, tau = _random_distribution(rng)
        got = quantile(AtomDistribution(values, weights), tau)
        if got != quantile_scaled_int_oracle(values, weights, tau):
            mismatches += 1
    report("6", mismatches == 0, f"{mismatches} mismatches in {QUANTILE_CASES} random distributions")


def test_criterion_7a_acmcp_without_error_forecast_is_mpi(ar2_series):
    r = run(RunPlan(ar2_series, methods=("mpi", "acmcp"), error_models=False))
    a, b = r.intervals["acmcp"], r.intervals["mpi"]
    ok = all(np.array_equal(a.data[f], b.data[f], equal_nan=True) for f in ("lower", "upper", "err"))
    report("7a", ok, f"AcMCP(e~=0) vs MPI panels bit-identical over {a.n_origins} origins x 3 horizons")


def test_criterion_7b_macp_matches_direct_acp(ar2_run):
    cfg = ExperimentConfig()
    first = ar2_run.scores.first_origin
    abs_scores = np.abs(ar2_run.scores.cells[:, 0])
    n_origins = ar2_run.scores.n_origins
    # at origin first + k the realised 1-step scores are those of origins < first + k
    windows = [abs_scores[:k][-cfg.t_c:] for k in range(n_origins)]
    want = np.array(direct_acp_online(windows, abs_scores, ALPHA, cfg.gamma))
    trace = ar2_run.traces["macp"]
    got = trace.data["symmetric.threshold"][:, 0]
    n_bad = int(np.count_nonzero(got != want[trace.origins - first]))
    report("7b", n_bad == 0, f"{n_bad} threshold mismatches over {got.size} test origins (h=1)")


def test_criterion_7c_mwcp_equal_weights_is_mscp():
    rng = np.random.default_rng(7)
    mismatches = 0
    for _ in range(IDENTITY_WINDOWS):
        n = int(rng.integers(1, 600))
        s = rng.standard_normal(n) * rng.exponential(2.0)
        if rng.random() < 0.3:
            s = np.round(s, 1)
        alpha = float(rng.uniform(0.01, 0.99))
        w = np.full(n, 1.0 / (n + 1))
        if weighted_threshold(s, w, 1.0 / (n + 1), alpha) != mscp_threshold(s, alpha):
            mismatches += 1
    report("7c", mismatches == 0, f"{mismatches} mismatches over {IDENTITY_WINDOWS} random windows")


def test_criterion_8_nonlinear_coverage():
    series = simulate_nonlinear(NONLINEAR_N, seed=1)
    plan = RunPlan(series, ForecasterSpec("ar_ls", 2, True), methods=("acmcp", "mpid"))
    r = run(plan)
    parts, ok = [], True
    for m in ("acmcp", "mpid"):
        err = r.intervals[m].err
        cov = 1.0 - np.nanmean(err, axis=0)
        ok &= bool(np.all(np.abs(cov - (1 - ALPHA)) <= COVERAGE_TOL_NONLINEAR))
        roll = [rolling_coverage(err[:, j], NONLINEAR_WINDOW) for j in range(3)]
        parts.append(f"{m}=" + "/".join(f"{c:.4f}" for c in cov)
                     + " (rolling-" + str(NONLINEAR_WINDOW) + " min "
                     + "/".join(f"{x.min():.2f}" for x in roll) + ")")
    report("8", ok, f"{' '.join(parts)} (band 0.90+-{COVERAGE_TOL_NONLINEAR})")


def test_criterion_9_simulator_fidelity():
    phi1, phi2 = 0.8, -0.5
    A = np.array([[1.0, -phi1, -phi2], [-phi1, 1.0 - phi2, 0.0], [-phi2, -phi1, 1.0]])
    gamma0 = float(np.linalg.solve(A, [1.0, 0.0, 0.0])[0])
    var = float(simulate_ar2(VARIANCE_N, seed=1).y.var())
    fit = fit_ar_ls(simulate_ar2(COEF_N, seed=1).y, 2)
    ok = (abs(gamma0 - YW_VARIANCE) < 5e-5 and abs(ar2_variance(phi1, phi2) - gamma0) < 1e-12
          and abs(var - YW_VARIANCE) <= VARIANCE_TOL
          and np.all(np.abs(fit.coef - [phi1, phi2]) <= COEF_TOL))
    report("9", ok, f"sample variance {var:.4f} vs {gamma0:.4f}; AR-LS coef "
           f"({fit.coef[0]:.4f}, {fit.coef[1]:.4f})")


def _pipeline(workdir):
    cli = [sys.executable, "-m", "acmcp"]
    series = workdir / "series.csv"
    run_dir = workdir / "run"
    subprocess.run(cli + ["simulate", "--dgp", "ar2", "--n", "5000", "--seed", "1", "--out", str(series)],
                   check=True, capture_output=True)
    subprocess.run(cli + ["run", "--series", str(series), "--out", str(run_dir)], check=True, capture_output=True)
    subprocess.run(cli + ["evaluate", "--run-dir", str(run_dir), "--window", "500", "--boxplot"],
                   check=True, capture_output=True)
    files = sorted(p for p in workdir.rglob("*") if p.is_file())
    return {p.relative_to(workdir): p.read_bytes() for p in files}


def test_criterion_10_end_to_end_determinism(tmp_path):
    a = _pipeline(tmp_path / "a")
    b = _pipeline(tmp_path / "b")
    csvs = [p for p in a if p.suffix == ".csv"]
    ok = a.keys() == b.keys() and all(a[p] == b[p] for p in a) and len(csvs) >= 14
    report("10", ok, f"{len(a)} files ({len(csvs)} CSVs) byte-identical across two invocations")
