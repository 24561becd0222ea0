import json

import numpy as np
import pytest

from finsurrogate.geometry import builtin_shape, rotate_skeleton, segment_fin
from finsurrogate.kinematics import KinematicSetting, generate_cycle
from finsurrogate.synthdata import (
    CSV_COLUMNS, DatasetFormatError, DatasetGrid, NoiseConfig, check_uniform, generate_dataset,
    injected_noise_variance, load_dataset, meta_path, noise_summary, oracle_arrays, oracle_thrust,
    save_dataset, setting_label, shape_separation, shape_table,
)

SMALL = dict(runs_per_setting=3, cycles_per_run=2, n_steps_per_cycle=64)


@pytest.fixture(scope="module")
def full():
    return generate_dataset(seed=0)


@pytest.fixture(scope="module")
def small():
    return generate_dataset(DatasetGrid(**SMALL), seed=3)


def test_default_grid_has_24_settings_and_1920_cycles(full):
    settings = full.settings()
    assert len(settings) == 24
    assert len(full) == 24 * 16 * 5
    assert not any(s[0] == "pt4" and s[1] == 2.0 for s in settings)
    assert ("bio", 2.0, 25.0, 25.0) not in settings
    assert {s[2] for s in settings if s[1] == 1.0} == {60.0}
    assert {s[2] for s in settings if s[1] == 2.0} == {25.0}
    assert all(len(c) == 400 for c in full)


def test_generation_is_deterministic_per_seed(small):
    again = generate_dataset(DatasetGrid(**SMALL), seed=3)
    other = generate_dataset(DatasetGrid(**SMALL), seed=4)
    assert all(np.array_equal(a.thrust, b.thrust) for a, b in zip(small, again))
    assert not all(np.array_equal(a.thrust, b.thrust) for a, b in zip(small, other))


def test_calibrated_deviations_hit_their_targets(full):
    summary = noise_summary(full)
    cfg = NoiseConfig()
    assert summary["thrust_scale"] == full.meta["generator_thrust_scale"]
    for row in summary["settings"]:
        assert row["within_run_dev"] == pytest.approx(cfg.within_run_dev, rel=1e-6)
        assert row["across_run_dev"] == pytest.approx(cfg.across_run_dev, rel=1e-6)


def test_noiseless_data_has_exactly_zero_deviation():
    ds = generate_dataset(DatasetGrid(**SMALL), NoiseConfig.off(), seed=0)
    for row in noise_summary(ds)["settings"]:
        assert row["within_run_dev"] == 0.0
        assert row["across_run_dev"] == 0.0
    assert injected_noise_variance(ds) == 0.0


def test_shapes_are_separated_by_more_than_five_noise_floors(full):
    assert shape_separation(full.meta["settings"]) > 5.0


def test_injected_variance_matches_the_calibration(full):
    rows = full.meta["settings"]
    v = np.mean([r["sigma_bias"] ** 2 + r["sigma_white"] ** 2 for r in rows])
    assert injected_noise_variance(full) == pytest.approx(v)
    gen = full.meta["generator_thrust_scale"]
    assert injected_noise_variance(full, 2 * gen) == pytest.approx(v / 4)


def test_oracle_is_quadratic_in_frequency_and_signed_by_pitch():
    info = shape_table()["rect"]

    def mean_thrust(f, p):
        s = KinematicSetting(60, p, f, 200)
        k = generate_cycle(s)
        frames = [rotate_skeleton(info.flat, a, b) for a, b in zip(k.stroke_angle, k.pitch_angle)]
        return oracle_thrust(k.t, frames, info.flat, s).mean()

    assert mean_thrust(2.0, 25) == pytest.approx(4 * mean_thrust(1.0, 25), rel=1e-9)
    assert mean_thrust(1.0, 25) > 0
    assert mean_thrust(1.0, 0) == pytest.approx(0.0, abs=1e-12)


def test_oracle_requires_uniform_sampling():
    with pytest.raises(ValueError):
        check_uniform([0.0, 0.1, 0.3])
    with pytest.raises(ValueError):
        check_uniform([0.0, 0.1, 0.2], period=1.0)
    flat = segment_fin(builtin_shape("rect"))
    with pytest.raises(ValueError):
        oracle_arrays([0.0, 0.1, 0.3], np.zeros(3), np.zeros(3), np.zeros((3, 10, 3)), flat.strip_areas)


def test_grid_validation_and_round_trip():
    with pytest.raises(ValueError):
        DatasetGrid(frequencies=(3.0,))
    with pytest.raises(ValueError):
        DatasetGrid(runs_per_setting=0)
    g = DatasetGrid(**SMALL)
    assert DatasetGrid.from_dict(json.loads(json.dumps(g.to_dict()))) == g


def test_unknown_shape_in_grid():
    with pytest.raises(KeyError):
        generate_dataset(DatasetGrid(shapes=("rect", "ghost"), **SMALL))


def test_csv_round_trip_is_exact(tmp_path, small):
    path = tmp_path / "d.csv"
    save_dataset(small, path)
    assert meta_path(path).name == "d.csv.meta.json"
    back = load_dataset(path)
    assert back.meta == json.loads(json.dumps(small.meta))
    assert len(back) == len(small)
    for a, b in zip(small, back):
        assert a.key == b.key and (a.run, a.cycle) == (b.run, b.cycle)
        for f in ("t", "stroke_angle", "pitch_angle", "stroke_state", "thrust"):
            assert np.array_equal(getattr(a, f), getattr(b, f))


def test_groups_and_labels(small):
    groups = small.groups()
    assert len(groups) == 24
    assert all(len(v) == 6 for v in groups.values())
    assert setting_label(("rect", 1.0, 60.0, 0.0)) == "rect/1Hz/60deg/0deg"
    only_rect = small.select(lambda shape, f, p: shape == "rect")
    assert {c.shape for c in only_rect} == {"rect"}


def _write(path, rows, header=CSV_COLUMNS):
    path.write_text(",".join(header) + "\n" + "".join(",".join(map(str, r)) + "\n" for r in rows))


def _rows(n=8, state=1):
    return [["rect", 1, 60, 0, 0, 0, i / n, 0.0, 0.0, state, 0.1] for i in range(n)]


@pytest.mark.parametrize("mutate, match", [
    (lambda p: _write(p, _rows(), CSV_COLUMNS[:-1]), "missing column 'thrust_n'"),
    (lambda p: _write(p, _rows()[:-1] + [["rect", "x", 60, 0, 0, 0, 0.9, 0, 0, 1, 0.1]]), "line 9"),
    (lambda p: _write(p, _rows(state=2)), "stroke_state"),
    (lambda p: _write(p, _rows(5)), "samples"),
    (lambda p: p.write_text(""), "empty"),
])
def test_malformed_csv_files(tmp_path, mutate, match):
    p = tmp_path / "bad.csv"
    mutate(p)
    with pytest.raises(DatasetFormatError, match=match):
        load_dataset(p)


def test_missing_metadata_blocks_variance_lookup(tmp_path):
    p = tmp_path / "ok.csv"
    _write(p, _rows())
    with pytest.raises(DatasetFormatError):
        injected_noise_variance(load_dataset(p))
