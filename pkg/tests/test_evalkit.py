import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import binom

from acmcp.core import IntervalPanel
from acmcp.evalkit import (
    boxplot_summary,
    coverage_gap,
    evaluate_panel,
    interval_widths,
    metrics_to_csv_text,
    rolling_coverage,
    rolling_width,
)

err_lists = st.lists(st.sampled_from([0.0, 1.0, math.nan]), min_size=1, max_size=200)


def test_rolling_coverage_all_covered():
    np.testing.assert_array_equal(rolling_coverage(np.zeros(50), 10), np.ones(41))


def test_rolling_coverage_alternating():
    np.testing.assert_allclose(rolling_coverage(np.arange(40) % 2, 2), 0.5)


def test_rolling_coverage_bernoulli_band():
    # coverage leaves [0.85, 0.95] iff misses < 25 or > 75
    p_out = binom.cdf(24, 500, 0.1) + binom.sf(75, 500, 0.1)
    assert p_out < 0.01
    rng = np.random.default_rng(7)
    cov = rolling_coverage(rng.random(20_000) < 0.1, 500)
    assert np.mean(np.abs(cov - 0.9) <= 0.05) >= 0.99


def test_rolling_coverage_drops_absent_cells():
    err = np.array([0, np.nan, 1, 0, np.nan, 1])
    np.testing.assert_allclose(rolling_coverage(err, 2), [0.5, 0.5, 0.5])


def test_rolling_coverage_short_input_is_empty():
    assert rolling_coverage([0, 1, np.nan], 3).size == 0
    with pytest.raises(ValueError):
        rolling_coverage([0, 1], 0)


@settings(max_examples=200, deadline=None)
@given(err_lists, st.integers(1, 50))
def test_rolling_coverage_range_and_full_window(err, window):
    cov = rolling_coverage(err, window)
    assert np.all((cov >= 0) & (cov <= 1))
    present = [e for e in err if not math.isnan(e)]
    if present:
        full = rolling_coverage(err, len(present))
        assert full.size == 1
        assert full[0] == pytest.approx(1 - np.mean(present), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(err_lists, st.floats(0.001, 0.999))
def test_coverage_gap_range(err, alpha):
    present = [e for e in err if not math.isnan(e)]
    if not present:
        with pytest.raises(ValueError):
            coverage_gap(err, alpha)
        return
    gap = coverage_gap(err, alpha)
    assert alpha - 1 - 1e-12 <= gap <= alpha + 1e-12


def test_coverage_gap_examples():
    assert coverage_gap([1, 0, 0, 0, 0, 0, 0, 0, 0, 0], 0.1) == pytest.approx(0.0, abs=1e-15)
    assert coverage_gap(np.zeros(10), 0.1) == 0.1


def test_coverage_gap_bernoulli():
    rng = np.random.default_rng(8)
    n, a = 3000, 0.1
    gap = coverage_gap((rng.random(n) < a).astype(float), a)
    assert abs(gap) < 3 * math.sqrt(a * (1 - a) / n)


def test_constant_width():
    lo = np.full(30, -1.5)
    r = rolling_width(lo, lo + 2.0, 7, "mean")
    np.testing.assert_allclose(r.values, 2.0)
    np.testing.assert_allclose(rolling_width(lo, lo + 2.0, 7, "median").values, 2.0)


def test_infinite_width_median_is_finite():
    lo = np.zeros(11)
    up = np.ones(11)
    up[5] = np.inf
    r = rolling_width(lo, up, 11, "median")
    assert r.values[0] == 1.0 and r.n_infinite[0] == 1


def test_infinite_width_mean_is_flagged():
    lo = np.zeros(11)
    lo[3] = -np.inf
    r = rolling_width(lo, np.ones(11), 5, "mean")
    assert np.isinf(r.values[:4]).all()
    assert np.isfinite(r.values[4:]).all()
    np.testing.assert_array_equal(r.n_infinite, [1, 1, 1, 1, 0, 0, 0])


def test_interval_widths_edge_cases():
    w = interval_widths([0, -np.inf, 2.0], [1, 0, 2.0])
    np.testing.assert_array_equal(w, [1, np.inf, 0])
    with pytest.raises(ValueError):
        rolling_width([0], [1], 1, "mode")


def test_boxplot_summary_matches_tukey():
    v = np.concatenate([np.arange(1.0, 21.0), [100.0]])
    b = boxplot_summary(v)
    q1, q3 = np.quantile(v, [0.25, 0.75])
    assert (b.q1, b.q3, b.median) == (q1, q3, np.median(v))
    assert b.whisker_high == 20.0 and b.whisker_low == 1.0
    assert b.n_outliers == 1


def _panel():
    p = IntervalPanel(10, 19, 2)
    p.lower[:] = -1.0
    p.upper[:] = 1.0
    p.err[:, 0] = [0, 1, 0, 0, 0, 0, 0, 0, 0, 1]
    p.err[:9, 1] = [0, 0, 0, 1, 0, 0, 0, 0, 0]
    return p


def test_evaluate_panel_aggregates_and_rolling():
    rows, skipped = evaluate_panel("mscp", _panel(), 0.1, 5)
    assert not skipped
    agg = {(r.horizon, r.metric): r.value for r in rows if r.position == "all"}
    assert agg[(1, "coverage")] == pytest.approx(0.8)
    assert agg[(2, "coverage")] == pytest.approx(8 / 9)
    assert agg[(2, "n")] == 9
    assert agg[(1, "mean_width")] == 2.0
    roll = [r for r in rows if r.horizon == 1 and r.metric == "rolling_coverage"]
    assert [r.position for r in roll] == [str(t) for t in range(14, 20)]
    assert roll[0].value == pytest.approx(0.8)


def test_evaluate_panel_window_too_large():
    rows, skipped = evaluate_panel("mscp", _panel(), 0.1, 50, boxplots=True)
    assert skipped
    assert {r.position for r in rows} == {"all"}
    assert any(r.metric == "width_box_median" for r in rows)


def test_metrics_csv_header():
    rows, _ = evaluate_panel("mpi", _panel(), 0.1, 5)
    text = metrics_to_csv_text(rows)
    assert text.splitlines()[0] == "method,horizon,position,metric,value"
    assert len(text.splitlines()) == len(rows) + 1
