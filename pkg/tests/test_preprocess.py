import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.exceptions import NotFittedError

from finsurrogate.kinematics import KinematicSetting, generate_cycle
from finsurrogate.preprocess import (
    NormStats, binned_deviation, cell_index, cell_spread, fit_norm_stats, mean_tip_speed,
    thrust_coefficient, thrust_deviation,
)


def make_cycles(thrusts, setting=KinematicSetting(60, 15, 1.0, 400)):
    kin = generate_cycle(setting)
    return [SimpleNamespace(stroke_angle=kin.stroke_angle, stroke_state=kin.stroke_state,
                            thrust=np.asarray(y, float)) for y in thrusts]


BASE = np.sin(np.linspace(0, 4 * np.pi, 400, endpoint=False)) ** 2


# -- thrust coefficient -------------------------------------------------------------------


def test_thrust_coefficient_value():
    assert thrust_coefficient(10.0, 1000.0, 2.0, 0.01) == pytest.approx(10 / (0.5 * 1000 * 4 * 0.01))


@settings(max_examples=40)
@given(st.floats(-100, 100), st.floats(0.1, 3), st.floats(0.1, 10), st.floats(1e-4, 1))
def test_thrust_coefficient_is_linear_in_thrust_and_inverse_square_in_speed(t, k, v, a):
    base = thrust_coefficient(t, 1000.0, v, a)
    assert thrust_coefficient(k * t, 1000.0, v, a) == pytest.approx(k * base, rel=1e-12, abs=1e-12)
    assert thrust_coefficient(t, 1000.0, k * v, a) == pytest.approx(base / k**2, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("args", [(1.0, 0.0, 1.0, 1.0), (1.0, 1.0, 0.0, 1.0), (1.0, 1.0, 1.0, -1.0)])
def test_thrust_coefficient_rejects_nonpositive_reference(args):
    with pytest.raises(ValueError):
        thrust_coefficient(*args)


def test_mean_tip_speed_is_the_average_of_the_absolute_rate():
    a, f, r = 60.0, 1.5, 0.23
    t = np.linspace(0, 1 / f, 200_001)
    speed = np.abs(math.radians(a) * 2 * np.pi * f * np.cos(2 * np.pi * f * t)) * r
    assert mean_tip_speed(a, f, r) == pytest.approx(np.trapezoid(speed, t) * f, rel=1e-6)


# -- normalization --------------------------------------------------------------------------


def test_norm_stats_zscore_and_round_trip(tmp_path):
    X = np.random.default_rng(1).normal(3, 2, size=(50, 4))
    X[:, 2] = 7.0
    ns = NormStats().fit(X, thrust=np.arange(10.0))
    Z = ns.transform(X)
    assert np.allclose(Z[:, [0, 1, 3]].mean(axis=0), 0)
    assert np.allclose(Z[:, [0, 1, 3]].std(axis=0), 1)
    assert ns.constant_features_ == [2] and np.all(Z[:, 2] == 0)
    assert np.allclose(ns.inverse_transform(Z), X)
    assert ns.thrust_scale_ == pytest.approx(np.arange(10.0).std())
    ns.save(tmp_path / "n.json")
    back = NormStats.load(tmp_path / "n.json")
    assert np.array_equal(back.transform(X), Z)
    assert back.thrust_scale_ == ns.thrust_scale_


def test_norm_stats_errors():
    with pytest.raises(NotFittedError):
        NormStats().transform(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        fit_norm_stats(np.zeros((0, 3)))
    with pytest.raises(ValueError):
        NormStats().fit_thrust([])


# -- ThrustDev --------------------------------------------------------------------------------


def test_identical_cycles_have_zero_deviation():
    assert thrust_deviation(make_cycles([BASE] * 5)) == 0.0


def test_constant_offset_gives_half_the_offset():
    c = 0.37
    assert thrust_deviation(make_cycles([BASE, BASE + c])) == pytest.approx(c / 2, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 10))
def test_deviation_scales_linearly_and_ignores_cycle_order(seed, k):
    rng = np.random.default_rng(seed)
    ys = [BASE + rng.normal(0, 0.1, 400) for _ in range(4)]
    d = thrust_deviation(make_cycles(ys))
    assert d > 0
    assert thrust_deviation(make_cycles([k * y for y in ys])) == pytest.approx(k * d, rel=1e-9)
    assert thrust_deviation(make_cycles(ys[::-1])) == pytest.approx(d, rel=1e-12)
    # adding the same signal to every cycle changes nothing
    assert thrust_deviation(make_cycles([y + BASE for y in ys])) == pytest.approx(d, rel=1e-9)


def test_deviation_needs_two_cycles_and_matching_lengths():
    with pytest.raises(ValueError):
        thrust_deviation(make_cycles([BASE]))
    kin = generate_cycle(KinematicSetting(60, 15, 1.0, 400))
    with pytest.raises(ValueError):
        binned_deviation([kin.stroke_angle] * 2, [kin.stroke_state] * 2, [BASE, BASE[:-1]])


def test_cells_split_by_stroke_direction():
    idx = cell_index([-1.0, 1.0, 0.0, 0.0], [1, 1, 1, 0], n_bins=10)
    assert idx.tolist() == [0, 9, 5, 15]
    assert cell_index([2.0, 2.0], [1, 0], n_bins=3).tolist() == [0, 3]


def test_cell_spread_handles_sparse_columns():
    m = np.array([[1.0, np.nan, 2.0], [3.0, 5.0, 2.0]])
    assert cell_spread(m).tolist() == [1.0, 0.0, 0.0]
