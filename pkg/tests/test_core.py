import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from acmcp.core import (
    ConfigError,
    ExperimentConfig,
    IntervalPanel,
    PanelError,
    ScorePanel,
    SeriesFrame,
    TrackerState,
    check_config,
    default_c_sat,
    format_float,
    miscovered,
    parse_float,
    validate_config,
)

finite = st.floats(min_value=-1e12, max_value=1e12, allow_nan=False, allow_infinity=False)


def test_validate_config_accepts_defaults():
    assert validate_config(ExperimentConfig()) == []


def test_validate_config_alpha_zero():
    assert "alpha out of (0,1)" in validate_config(ExperimentConfig(alpha=0.0))


def test_validate_config_short_calibration():
    assert "t_c < 10*H" in validate_config(ExperimentConfig(t_c=5, H=3))


def test_validate_config_reports_every_problem():
    probs = validate_config(ExperimentConfig(alpha=1.5, t_c=5, gamma=-1.0, decay_b=1.0, sided="both"))
    assert len(probs) == 5


def test_check_config_raises():
    with pytest.raises(ConfigError) as exc:
        check_config(ExperimentConfig(alpha=0.0))
    assert exc.value.problems == ["alpha out of (0,1)"]


def test_default_c_sat_hits_target_excess():
    c = default_c_sat(500)
    assert (math.pi / 2) * c * 500 / math.log(500) == pytest.approx(20.0, rel=1e-12)
    assert ExperimentConfig().c_sat == pytest.approx(40 * math.log(500) / (500 * math.pi), rel=1e-12)
    assert ExperimentConfig().c_sat == pytest.approx(0.158254, abs=1e-6)


def test_window_delta_defaults_to_t_c():
    assert ExperimentConfig(t_c=300).window_delta == 300
    assert ExperimentConfig(t_c=300, delta=50).window_delta == 50


def test_float_text_round_trip():
    for v in (0.1, -1e-300, 1e308, math.inf, -math.inf, 5e-324):
        assert parse_float(format_float(v)) == v
    assert math.isnan(parse_float(format_float(math.nan)))
    assert format_float(math.nan) == "NA"


@settings(max_examples=60, deadline=None)
@given(y=arrays(np.float64, st.integers(1, 40), elements=finite),
       start=st.integers(-1000, 1000), with_x=st.booleans())
def test_series_csv_round_trip(y, start, with_x):
    x = np.cos(np.arange(y.size * 2, dtype=float)).reshape(-1, 2) * 1e-7 if with_x else None
    s = SeriesFrame.from_values(y, x, start=start)
    assert SeriesFrame.from_csv_text(s.to_csv_text()) == s


def test_series_rejects_gaps_and_nan():
    with pytest.raises(ValueError):
        SeriesFrame(np.array([1, 2, 4]), np.zeros(3))
    with pytest.raises(ValueError):
        SeriesFrame.from_values([1.0, np.nan])


def test_series_is_read_only():
    s = SeriesFrame.from_values([1.0, 2.0])
    with pytest.raises(ValueError):
        s.y[0] = 3.0


@settings(max_examples=40, deadline=None)
@given(vals=arrays(np.float64, (6, 2), elements=st.one_of(finite, st.just(np.nan))))
def test_score_panel_round_trip(vals):
    p = ScorePanel(10, 15, 2, {"score": vals})
    q = ScorePanel.from_csv_text(p.to_csv_text())
    assert q == p
    assert np.array_equal(q.cells, vals, equal_nan=True)


def test_interval_panel_round_trip_with_infinities():
    p = IntervalPanel(1, 2, 1)
    p.set_bounds(1, 1, -math.inf, 2.5)
    p.set_bounds(2, 1, 0.1, math.inf)
    p.record_realisation(1, 1, 3.0)
    assert IntervalPanel.from_csv_text(p.to_csv_text()) == p


def test_score_panel_is_append_only():
    p = ScorePanel(1, 3, 2)
    p.set(2, 1, 2.0)
    with pytest.raises(PanelError):
        p.set(2, 1, 2.0)
    with pytest.raises(PanelError):
        p.set(4, 1, 1.0)
    with pytest.raises(PanelError):
        p.set(1, 1, float("nan"))


def test_horizon_scores_window_and_cutoff():
    p = ScorePanel(1, 6, 1)
    for t in range(1, 7):
        p.set(t, 1, float(t))
    assert p.horizon_scores(1, upto_origin=4, window=2).tolist() == [3.0, 4.0]
    assert p.horizon_scores(1).tolist() == [1, 2, 3, 4, 5, 6]


def test_miscovered_boundaries_are_covered():
    assert miscovered(1.0, 1.0, 2.0) == 0
    assert miscovered(2.0, 1.0, 2.0) == 0
    assert miscovered(2.0 + 1e-12, 1.0, 2.0) == 1
    assert miscovered(0.0, -math.inf, math.inf) == 0


def test_recompute_err_matches_recorded():
    s = SeriesFrame.from_values(np.arange(10.0))
    p = IntervalPanel(3, 8, 2)
    for t in range(3, 9):
        for h in (1, 2):
            p.set_bounds(t, h, t + 0.5, t + 1.5)
            if t + h <= 10:
                p.record_realisation(t, h, float(t + h - 1))
    assert np.array_equal(p.recompute_err(s), p.err, equal_nan=True)


@settings(max_examples=50, deadline=None)
@given(errs=st.lists(st.integers(0, 1), max_size=60), alpha=st.floats(0.01, 0.99))
def test_tracker_integrator_invariant(errs, alpha):
    st_ = TrackerState("mpi", 1, "upper", alpha)
    for e in errs:
        st_.record_err(e)
    assert st_.integrator_sum == pytest.approx(sum(e - alpha for e in errs), abs=1e-9)


def test_tracker_score_window_bounded():
    st_ = TrackerState("mpi", 1, "upper", 0.05)
    for i in range(20):
        st_.record_score(float(i), 5)
    assert list(st_.score_window) == [15.0, 16.0, 17.0, 18.0, 19.0]
    assert st_.b_hat() == 19.0
    assert math.isnan(TrackerState("mpi", 1, "upper", 0.05).b_hat())
