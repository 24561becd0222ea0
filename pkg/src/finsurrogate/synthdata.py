"""Synthetic stand-in for the flapping-fin thrust measurements.

A quasi-steady blade-element model over the equal-area strips produces
noiseless thrust for every kinematic-shape setting of the grid; a run-level
offset plus white sample noise is then added in normalized-thrust units,
calibrated so the binned thrust deviation hits configured targets.

The oracle is a test bed for the learning pipeline, not a physical model.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .geometry import AxisFrame, builtin_shapes, rotate_points, segment_fin
from .kinematics import KinematicSeries, KinematicSetting, generate_cycle
from .preprocess import WATER_DENSITY, cell_index, mean_tip_speed, thrust_deviation
from .rng import substream

log = logging.getLogger(__name__)

# blade-element thrust slope: C_T(alpha) = THRUST_SLOPE * sin(2 alpha)
THRUST_SLOPE = 1.0

CSV_COLUMNS = ("shape", "freq_hz", "stroke_amp_deg", "pitch_amp_deg", "run", "cycle",
               "t_s", "stroke_deg", "pitch_deg", "stroke_state", "thrust_n")


class DatasetFormatError(ValueError):
    pass


# -- containers ------------------------------------------------------------------


@dataclass
class StrokeCycle:
    """One flapping cycle: kinematic samples plus measured thrust (N)."""

    shape: str
    setting: KinematicSetting
    run: int
    cycle: int
    t: np.ndarray
    stroke_angle: np.ndarray
    pitch_angle: np.ndarray
    stroke_state: np.ndarray
    thrust: np.ndarray

    @property
    def key(self):
        """Kinematic-shape setting identifier ``(shape, freq, stroke_amp, pitch_amp)``."""
        s = self.setting
        return (self.shape, s.flap_frequency, s.stroke_amplitude, s.pitch_amplitude)

    @property
    def kinematics(self):
        return KinematicSeries(self.t, self.stroke_angle, self.pitch_angle, self.stroke_state)

    @property
    def samples(self):
        return list(zip(self.kinematics, self.thrust.tolist()))

    def __len__(self):
        return len(self.t)

    def decimate(self, stride):
        if stride == 1:
            return self
        sl = slice(None, None, stride)
        n = len(self.t[sl])
        setting = KinematicSetting(self.setting.stroke_amplitude, self.setting.pitch_amplitude,
                                   self.setting.flap_frequency, max(n, 8))
        return StrokeCycle(self.shape, setting, self.run, self.cycle, self.t[sl], self.stroke_angle[sl],
                           self.pitch_angle[sl], self.stroke_state[sl], self.thrust[sl])


def setting_label(key):
    shape, f, a_s, a_p = key
    return f"{shape}/{f:g}Hz/{a_s:g}deg/{a_p:g}deg"


@dataclass
class Dataset:
    cycles: list
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.cycles)

    def __iter__(self):
        return iter(self.cycles)

    def settings(self):
        seen = {}
        for c in self.cycles:
            seen.setdefault(c.key, None)
        return list(seen)

    def groups(self):
        out = {}
        for c in self.cycles:
            out.setdefault(c.key, []).append(c)
        return out

    def select(self, predicate):
        """Cycles whose setting key satisfies ``predicate(shape, freq, pitch_amp)``."""
        return Dataset([c for c in self.cycles if predicate(c.shape, c.key[1], c.key[3])], dict(self.meta))

    def decimate(self, stride):
        return Dataset([c.decimate(stride) for c in self.cycles], dict(self.meta))


@dataclass
class DatasetGrid:
    """Kinematic-shape grid; defaults mirror the rig campaign."""

    frequencies: tuple = (1.0, 2.0)
    pitch_amplitudes: tuple = (0.0, 15.0, 25.0, 40.0, 55.0)
    stroke_amplitude_rule: dict = field(default_factory=lambda: {1.0: 60.0, 2.0: 25.0})
    shapes: tuple = ("rect", "bio", "pt4")
    runs_per_setting: int = 16
    cycles_per_run: int = 5
    # each entry matches on the keys it has: shape, freq, pitch
    exclusions: tuple = (
        {"shape": "pt4", "freq": 2.0},
        {"shape": "bio", "freq": 2.0, "pitch": 25.0},
    )
    n_steps_per_cycle: int = 400
    pitch_phase_deg: float = 90.0
    stroke_axis_offset: float = 3.175
    pitch_axis_offset: float = 1.25
    rho: float = WATER_DENSITY

    def __post_init__(self):
        self.stroke_amplitude_rule = {float(k): float(v) for k, v in self.stroke_amplitude_rule.items()}
        for f in self.frequencies:
            if float(f) not in self.stroke_amplitude_rule:
                raise ValueError(f"no stroke amplitude for {f} Hz")
        if self.runs_per_setting < 1 or self.cycles_per_run < 1:
            raise ValueError("runs_per_setting and cycles_per_run must be >= 1")

    @property
    def frame(self):
        return AxisFrame(self.stroke_axis_offset, self.pitch_axis_offset)

    def is_excluded(self, shape, freq, pitch):
        for ex in self.exclusions:
            if ("shape" not in ex or ex["shape"] == shape) and \
               ("freq" not in ex or float(ex["freq"]) == freq) and \
               ("pitch" not in ex or float(ex["pitch"]) == pitch):
                return True
        return False

    def settings(self):
        out = []
        for shape in self.shapes:
            for f in self.frequencies:
                for p in self.pitch_amplitudes:
                    if not self.is_excluded(shape, float(f), float(p)):
                        out.append((shape, KinematicSetting(self.stroke_amplitude_rule[float(f)], float(p),
                                                            float(f), self.n_steps_per_cycle)))
        return out

    def to_dict(self):
        d = asdict(self)
        d["stroke_amplitude_rule"] = {str(k): v for k, v in self.stroke_amplitude_rule.items()}
        d["exclusions"] = [dict(e) for e in self.exclusions]
        d["frequencies"] = list(self.frequencies)
        d["pitch_amplitudes"] = list(self.pitch_amplitudes)
        d["shapes"] = list(self.shapes)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for k in ("frequencies", "pitch_amplitudes", "shapes", "exclusions"):
            if k in d:
                d[k] = tuple(d[k])
        if "stroke_amplitude_rule" in d:
            d["stroke_amplitude_rule"] = {float(k): float(v) for k, v in d["stroke_amplitude_rule"].items()}
        return cls(**d)


@dataclass(frozen=True)
class NoiseConfig:
    """Target thrust deviations in normalized units; zeros give clean data."""

    across_run_dev: float = 0.2588
    within_run_dev: float = 0.103

    @classmethod
    def off(cls):
        return cls(0.0, 0.0)

    @property
    def enabled(self):
        return self.across_run_dev > 0 or self.within_run_dev > 0


# -- shape bookkeeping -----------------------------------------------------------


@dataclass(frozen=True)
class ShapeInfo:
    """Per-shape constants the pipeline needs: flat skeleton and SI area/tip radius."""

    name: str
    flat: object
    area_m2: float
    tip_radius_m: float


def shape_table(shapes=None, frame=None):
    shapes = builtin_shapes() if shapes is None else shapes
    frame = AxisFrame() if frame is None else frame
    out = {}
    for s in shapes:
        flat = segment_fin(s, frame)
        out[s.name] = ShapeInfo(s.name, flat, flat.total_area * 1e-4, flat.tip_radius * 1e-2)
    return out


def reference_denominator(info, setting, rho=WATER_DENSITY):
    """``0.5 rho v_ref^2 A`` with v_ref the mean tip speed of the setting."""
    v = mean_tip_speed(setting.stroke_amplitude, setting.flap_frequency, info.tip_radius_m)
    return 0.5 * rho * v**2 * info.area_m2


# -- oracle ----------------------------------------------------------------------


def _periodic_rate(values, dt):
    return (np.roll(values, -1) - np.roll(values, 1)) / (2.0 * dt)


def check_uniform(t, period=None):
    t = np.asarray(t, dtype=float)
    if len(t) < 3:
        raise ValueError("need at least three samples")
    d = np.diff(t)
    dt = float(np.mean(d))
    if dt <= 0 or np.max(np.abs(d - dt)) > 1e-9 * max(dt, 1e-300) + 1e-12:
        raise ValueError("samples are not uniformly spaced in time")
    if period is not None and abs(len(t) * dt - period) > 1e-9 * period:
        raise ValueError(f"samples do not span one period ({len(t) * dt} s vs {period} s)")
    return dt


def oracle_arrays(t, stroke_deg, pitch_deg, points_cm, strip_areas_cm2, rho=WATER_DENSITY,
                  thrust_slope=THRUST_SLOPE):
    """Blade-element thrust (N) for rotated strip centroids ``points_cm`` of shape (T, n, 3)."""
    dt = check_uniform(t)
    rate = _periodic_rate(np.deg2rad(np.asarray(stroke_deg, dtype=float)), dt)
    pitch = np.deg2rad(np.asarray(pitch_deg, dtype=float))
    pts = np.asarray(points_cm, dtype=float) * 1e-2
    r = np.hypot(pts[..., 1], pts[..., 2])
    v = np.abs(rate)[:, None] * r
    alpha = np.sign(rate * pitch) * (0.5 * math.pi - np.abs(pitch))
    ct = thrust_slope * np.sin(2.0 * alpha)
    area = np.asarray(strip_areas_cm2, dtype=float) * 1e-4
    return 0.5 * rho * ct * np.sum(area * v**2, axis=-1)


def oracle_thrust(times, frames, flat, setting, rho=WATER_DENSITY):
    """Quasi-steady thrust (N) for one cycle of skeleton frames.

    Each strip ``i`` moves normal to the fin at ``|d stroke/dt| * r_i`` and
    contributes ``0.5 rho A_i v_i^2 C_T(alpha)``, with
    ``alpha = sign(stroke rate * pitch) * (90deg - |pitch|)`` and
    ``C_T = THRUST_SLOPE * sin(2 alpha)``.
    """
    check_uniform(times, setting.period)
    stroke = np.array([f.stroke_angle for f in frames])
    pitch = np.array([f.pitch_angle for f in frames])
    pts = np.stack([f.points for f in frames])
    return oracle_arrays(times, stroke, pitch, pts, flat.strip_areas, rho)


def clean_cycle(info, setting, pitch_phase_deg=90.0, rho=WATER_DENSITY):
    kin = generate_cycle(setting, pitch_phase_deg)
    pts = rotate_points(info.flat.coms, kin.stroke_angle, kin.pitch_angle)
    thrust = oracle_arrays(kin.t, kin.stroke_angle, kin.pitch_angle, pts, info.flat.strip_areas, rho)
    return kin, thrust


# -- noise calibration -------------------------------------------------------------


def _solve_scale(fn, target, tol=1e-10):
    """Smallest-effort bisection for ``fn(s) == target`` on s >= 0."""
    if target <= 0:
        return 0.0
    if fn(0.0) >= target:
        return 0.0
    hi = 1.0
    while fn(hi) < target:
        hi *= 2.0
        if hi > 1e6:
            raise RuntimeError("noise calibration diverged")
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        v = fn(mid)
        if abs(v - target) <= tol * target:
            return mid
        if v < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def calibrate_noise(signal, kin, z_bias, z_white, noise, n_bins=100):
    """Scales ``(sigma_bias, sigma_white)`` meeting the deviation targets.

    ``signal`` is one clean normalized cycle (T,), ``z_bias`` has shape (runs,)
    and ``z_white`` (runs, cycles, T).
    """
    runs, cycles, T = z_white.shape
    cell = cell_index(kin.stroke_angle, kin.stroke_state, n_bins)
    ncell = 2 * n_bins
    # every cycle shares the clean cycle's cell layout, so per-cycle cell means are one matmul
    cnt = np.bincount(cell, minlength=ncell)
    avg = np.zeros((T, ncell))
    avg[np.arange(T), cell] = 1.0 / cnt[cell]
    occupied = cnt > 0

    def spread(m, axis):
        sd = m.std(axis=axis)
        return np.where(occupied & (np.ptp(m, axis=axis) > 0), sd, 0.0)

    def within(sw):
        m = (signal + sw * z_white) @ avg
        return float(np.mean(spread(m, 1).sum(axis=-1) / ncell))

    def across(sb, sw):
        m = (signal + sb * z_bias[:, None, None] + sw * z_white) @ avg
        return float(spread(m.reshape(runs * cycles, ncell), 0).sum() / ncell)

    sw = _solve_scale(within, noise.within_run_dev) if cycles >= 2 else 0.0
    if runs >= 2:
        sb = _solve_scale(lambda s: across(s, sw), noise.across_run_dev)
    else:
        sb = 0.0
    if cycles < 2 and runs >= 2 and sb == 0.0:
        sw = _solve_scale(lambda s: across(0.0, s), noise.across_run_dev)
    return sb, sw, (within(sw) if cycles >= 2 else None), (across(sb, sw) if runs * cycles >= 2 else None)


# -- generation --------------------------------------------------------------------


def generate_dataset(grid=None, noise=None, seed=0, shapes=None):
    """Build every (shape, setting) of ``grid`` with runs x cycles noisy copies.

    Noise is added to the normalized thrust coefficient (coefficient divided by
    the population std of the clean coefficients over the grid) and mapped
    back to newtons. Identical ``seed`` gives identical output.
    """
    grid = DatasetGrid() if grid is None else grid
    noise = NoiseConfig() if noise is None else noise
    table = shape_table(shapes, grid.frame)
    missing = [s for s in grid.shapes if s not in table]
    if missing:
        raise KeyError(f"unknown fin shapes {missing}")

    clean = []
    for shape, setting in grid.settings():
        info = table[shape]
        kin, thrust = clean_cycle(info, setting, grid.pitch_phase_deg, grid.rho)
        denom = reference_denominator(info, setting, grid.rho)
        clean.append((shape, setting, kin, thrust, denom))
    coeffs = np.concatenate([th / d for *_, th, d in clean])
    gen_scale = float(coeffs.std()) or 1.0

    cycles, per_setting = [], []
    R, C = grid.runs_per_setting, grid.cycles_per_run
    for shape, setting, kin, thrust, denom in clean:
        signal = thrust / denom / gen_scale
        T = len(signal)
        rng = substream(seed, "noise", shape, setting.flap_frequency, setting.pitch_amplitude)
        z_bias = rng.standard_normal(R)
        z_white = rng.standard_normal((R, C, T))
        if noise.enabled:
            sb, sw, dev_in, dev_across = calibrate_noise(signal, kin, z_bias, z_white, noise)
        else:
            sb = sw = 0.0
            dev_in = dev_across = 0.0
        noisy = signal + sb * z_bias[:, None, None] + sw * z_white
        newtons = noisy * (gen_scale * denom)
        for r in range(R):
            for c in range(C):
                cycles.append(StrokeCycle(shape, setting, r, c, kin.t, kin.stroke_angle, kin.pitch_angle,
                                          kin.stroke_state, newtons[r, c]))
        per_setting.append({
            "shape": shape, "freq_hz": setting.flap_frequency, "stroke_amp_deg": setting.stroke_amplitude,
            "pitch_amp_deg": setting.pitch_amplitude, "sigma_bias": sb, "sigma_white": sw,
            "thrust_dev_within": dev_in, "thrust_dev_across": dev_across,
            "clean_mean_thrust_n": float(np.mean(thrust)),
            "noise_floor_n": sw * gen_scale * denom / math.sqrt(T),
        })
    meta = {
        "grid": grid.to_dict(),
        "noise": asdict(noise),
        "seed": int(seed),
        "generator_thrust_scale": gen_scale,
        "settings": per_setting,
    }
    _check_shape_separation(per_setting)
    return Dataset(cycles, meta)


def shape_separation(per_setting):
    """Smallest cycle-mean thrust gap between shapes over shared kinematics, in noise floors."""
    by_kin = {}
    for s in per_setting:
        if s["pitch_amp_deg"] == 0:
            continue
        by_kin.setdefault((s["freq_hz"], s["pitch_amp_deg"]), []).append(s)
    worst = math.inf
    for group in by_kin.values():
        for i in range(len(group)):
            for j in range(i + 1, len(group)):
                a, b = group[i], group[j]
                floor = max(a["noise_floor_n"], b["noise_floor_n"])
                gap = abs(a["clean_mean_thrust_n"] - b["clean_mean_thrust_n"])
                worst = min(worst, gap / floor if floor > 0 else math.inf)
    return worst


def _check_shape_separation(per_setting):
    ratio = shape_separation(per_setting)
    if ratio <= 5.0:
        log.warning("shape separation only %.2f noise floors", ratio)


# -- CSV ---------------------------------------------------------------------------


def _g(v):
    return "%.17g" % v


def save_dataset(dataset, path, write_meta=True):
    """Write one CSV row per sample; floats carry 17 significant digits."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for c in dataset.cycles:
            s = c.setting
            head = f"{c.shape},{_g(s.flap_frequency)},{_g(s.stroke_amplitude)},{_g(s.pitch_amplitude)},{c.run},{c.cycle},"
            fh.write("".join(
                f"{head}{_g(t)},{_g(a)},{_g(p)},{int(st)},{_g(th)}\n"
                for t, a, p, st, th in zip(c.t.tolist(), c.stroke_angle.tolist(), c.pitch_angle.tolist(),
                                           c.stroke_state.tolist(), c.thrust.tolist())
            ))
    if write_meta and dataset.meta:
        meta_path(path).write_text(json.dumps(dataset.meta, indent=1, sort_keys=True) + "\n")
    return path


def meta_path(path):
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def load_dataset(path):
    """Parse a dataset CSV and regroup rows into cycles.

    Raises ``DatasetFormatError`` naming the missing column or the offending
    line number.
    """
    path = Path(path)
    groups = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetFormatError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        for col in CSV_COLUMNS:
            if col not in header:
                raise DatasetFormatError(f"{path}: missing column '{col}'")
        pos = [header.index(c) for c in CSV_COLUMNS]
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                vals = [row[i] for i in pos]
                key = (vals[0], float(vals[1]), float(vals[2]), float(vals[3]), int(vals[4]), int(vals[5]))
                rec = (float(vals[6]), float(vals[7]), float(vals[8]), int(vals[9]), float(vals[10]))
            except (IndexError, ValueError) as exc:
                raise DatasetFormatError(f"{path}: malformed row at line {lineno}: {exc}") from None
            if rec[3] not in (0, 1):
                raise DatasetFormatError(f"{path}: stroke_state must be 0 or 1 at line {lineno}")
            groups.setdefault(key, []).append(rec)

    cycles = []
    for (shape, f, a_s, a_p, run, cyc), rows in groups.items():
        arr = np.array(rows, dtype=float)
        if len(arr) < 8:
            raise DatasetFormatError(f"{path}: cycle {shape}/{f}/{a_p}/run{run}/cycle{cyc} has {len(arr)} samples")
        try:
            check_uniform(arr[:, 0])
        except ValueError as exc:
            raise DatasetFormatError(f"{path}: cycle {shape}/{f}/{a_p}/run{run}/cycle{cyc}: {exc}") from None
        setting = KinematicSetting(a_s, a_p, f, len(arr))
        cycles.append(StrokeCycle(shape, setting, run, cyc, arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].copy(),
                                  arr[:, 3].astype(np.int64), arr[:, 4].copy()))
    meta = {}
    mp = meta_path(path)
    if mp.exists():
        meta = json.loads(mp.read_text())
    return Dataset(cycles, meta)


def dataset_frame(dataset):
    """Axis frame recorded with the dataset (rig defaults if none)."""
    g = dataset.meta.get("grid", {})
    return AxisFrame(g.get("stroke_axis_offset", 3.175), g.get("pitch_axis_offset", 1.25))


def dataset_rho(dataset):
    return dataset.meta.get("grid", {}).get("rho", WATER_DENSITY)


def injected_noise_variance(dataset, thrust_scale=None):
    """Mean per-sample variance of the injected noise (run bias plus white).

    Expressed in units of ``thrust_scale`` (the generator's own scale when
    omitted), averaged over settings with equal weight.
    """
    meta = dataset.meta
    if "settings" not in meta or "generator_thrust_scale" not in meta:
        raise DatasetFormatError("dataset metadata carries no noise calibration")
    var = np.mean([s["sigma_bias"] ** 2 + s["sigma_white"] ** 2 for s in meta["settings"]])
    gen = meta["generator_thrust_scale"]
    ratio = 1.0 if thrust_scale is None else gen / thrust_scale
    return float(var * ratio**2)


def noise_summary(dataset, n_bins=100, shapes=None):
    """Within-run and across-run ThrustDev for every setting of ``dataset``.

    Thrust is expressed as coefficients divided by the generator scale stored
    in the metadata, or by the population std of all coefficients when the
    dataset carries none. Within-run is the mean over runs with at least two
    cycles; across-run pools every cycle of the setting.
    """
    table = shape_table(shapes, dataset_frame(dataset))
    rho = dataset_rho(dataset)
    coeff = {}
    for c in dataset.cycles:
        coeff[id(c)] = c.thrust / reference_denominator(table[c.shape], c.setting, rho)
    scale = dataset.meta.get("generator_thrust_scale")
    if not scale:
        scale = float(np.concatenate(list(coeff.values())).std()) or 1.0
    out = []
    for key, cycles in dataset.groups().items():
        runs = {}
        for c in cycles:
            runs.setdefault(c.run, []).append(c)
        within = [thrust_deviation(rc, [coeff[id(c)] / scale for c in rc], n_bins)
                  for rc in runs.values() if len(rc) >= 2]
        across = thrust_deviation(cycles, [coeff[id(c)] / scale for c in cycles], n_bins) \
            if len(cycles) >= 2 else None
        out.append({"setting": setting_label(key), "shape": key[0], "freq_hz": key[1],
                    "stroke_amp_deg": key[2], "pitch_amp_deg": key[3], "n_runs": len(runs),
                    "n_cycles": len(cycles), "within_run_dev": float(np.mean(within)) if within else None,
                    "across_run_dev": across})
    return {"thrust_scale": float(scale), "n_bins": n_bins, "settings": out}
