import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finsurrogate.kinematics import (
    KINEMATIC_FIELDS, SHAPE_CODES, SKELETON_FIELDS, KinematicSetting, SchemaError, Variant,
    build_cycle_features, build_input_record, feature_names, format_record, generate_cycle,
    parse_record, stroke_state_from_rate,
)


def test_setting_validation():
    with pytest.raises(ValueError):
        KinematicSetting(60, 15, 0.0)
    with pytest.raises(ValueError):
        KinematicSetting(60, 15, 1.0, n_steps_per_cycle=4)
    with pytest.raises(ValueError):
        KinematicSetting(-1, 15, 1.0)
    assert KinematicSetting(60, 15, 2.0).period == 0.5


def test_cycle_samples_one_period_without_the_endpoint():
    s = KinematicSetting(60, 25, 2.0, n_steps_per_cycle=400)
    c = generate_cycle(s)
    assert len(c) == 400
    assert c.t[0] == 0.0 and c.t[-1] < s.period
    assert np.allclose(np.diff(c.t), s.period / 400)
    assert c.stroke_angle.max() == pytest.approx(60.0)
    # pitch leads stroke by a quarter period
    assert c.pitch_angle[0] == pytest.approx(25.0)
    assert c.stroke_angle[0] == 0.0


def test_stroke_state_follows_the_stroke_rate():
    c = generate_cycle(KinematicSetting(60, 15, 1.0, n_steps_per_cycle=400))
    rising = np.r_[np.diff(c.stroke_angle), c.stroke_angle[0] - c.stroke_angle[-1]] > 0
    # first sample of each half stroke is the extremum; compare elsewhere
    inner = np.ones(400, bool)
    inner[[0, 99, 100, 101, 299, 300, 301, 399]] = False
    assert np.array_equal(c.stroke_state[inner].astype(bool), rising[inner])
    assert c.stroke_state.sum() == pytest.approx(200, abs=2)


def test_ties_count_as_upstroke():
    assert stroke_state_from_rate([0.0, -1.0, 1.0]).tolist() == [1, 0, 1]
    c = generate_cycle(KinematicSetting(0, 15, 1.0))
    assert np.all(c.stroke_state == 1)


@pytest.mark.parametrize("variant, recurrent, width", [
    ("BASELINE", False, 7), ("FP", False, 36), ("RFP", False, 32), ("WFP", False, 10),
    ("BASELINE", True, 6), ("FP", True, 35), ("RFP", True, 32), ("WFP", True, 9),
])
def test_record_widths(variant, recurrent, width):
    assert len(feature_names(variant, recurrent)) == width


def test_record_layouts():
    assert feature_names("FP")[:6] == KINEMATIC_FIELDS
    assert feature_names("FP")[6:] == SKELETON_FIELDS
    assert feature_names("BASELINE")[-1] == "shape_code"
    assert feature_names("RFP", recurrent=True)[:2] == ("flap_freq", "stroke_state")
    assert feature_names("WFP", k=3)[-3:] == ("pc1", "pc2", "pc3")
    assert SHAPE_CODES == {"pt4": -1.0, "rect": 0.0, "bio": 1.0}


def test_missing_blocks_raise_schema_errors():
    s = KinematicSetting(60, 15, 1.0, 8)
    c = generate_cycle(s)
    for v in Variant:
        with pytest.raises(SchemaError):
            build_cycle_features(v, c, s)
    with pytest.raises(SchemaError):
        build_cycle_features("FP", c, s, skeleton30=np.zeros((8, 29)))


def test_cycle_features_match_single_records():
    s = KinematicSetting(45, 25, 1.5, 16)
    c = generate_cycle(s)
    skel = np.random.default_rng(0).normal(size=(16, 30))
    full = build_cycle_features("FP", c, s, skeleton30=skel)
    for i in (0, 5, 15):
        rec = build_input_record("FP", c[i], s, skeleton30=skel[i])
        assert np.array_equal(rec, full[i])
    assert full[3, 0] == 45 and full[3, 2] == 1.5


@settings(max_examples=50)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=40))
def test_record_text_round_trip_is_exact(values):
    rec = np.array(values)
    assert np.array_equal(parse_record(format_record(rec)), rec)


@settings(max_examples=30, deadline=None)
@given(st.floats(1, 90), st.floats(0, 60), st.floats(0.1, 5), st.integers(8, 500))
def test_cycle_amplitudes_are_bounded(a_s, a_p, f, n):
    c = generate_cycle(KinematicSetting(a_s, a_p, f, n))
    assert np.all(np.abs(c.stroke_angle) <= a_s + 1e-9)
    assert np.all(np.abs(c.pitch_angle) <= a_p + 1e-9)
    assert math.isclose(c.t[1] * n * f, 1.0)
