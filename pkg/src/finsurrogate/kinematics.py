"""Sinusoidal stroke/pitch kinematics and per-instant model input records."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

SHAPE_CODES = {"pt4": -1.0, "rect": 0.0, "bio": 1.0}

KINEMATIC_FIELDS = ("stroke_amp", "pitch_amp", "flap_freq", "stroke_angle", "pitch_angle", "stroke_state")
SKELETON_FIELDS = tuple(f"com{i}_{c}" for i in range(1, 11) for c in "xyz")


class SchemaError(ValueError):
    pass


class Variant(str, enum.Enum):
    BASELINE = "BASELINE"
    FP = "FP"
    RFP = "RFP"
    WFP = "WFP"


@dataclass(frozen=True)
class KinematicSetting:
    stroke_amplitude: float
    pitch_amplitude: float
    flap_frequency: float
    n_steps_per_cycle: int = 400

    def __post_init__(self):
        if not self.flap_frequency > 0:
            raise ValueError("flap_frequency must be > 0")
        if self.n_steps_per_cycle < 8:
            raise ValueError("n_steps_per_cycle must be >= 8")
        if self.stroke_amplitude < 0 or self.pitch_amplitude < 0:
            raise ValueError("amplitudes must be >= 0")

    @property
    def period(self):
        return 1.0 / self.flap_frequency


@dataclass(frozen=True)
class KinematicState:
    t: float
    stroke_angle: float
    pitch_angle: float
    stroke_state: int


@dataclass(frozen=True)
class KinematicSeries:
    """One cycle of kinematic states stored column-wise."""

    t: np.ndarray
    stroke_angle: np.ndarray
    pitch_angle: np.ndarray
    stroke_state: np.ndarray

    def __len__(self):
        return len(self.t)

    def __getitem__(self, i):
        return KinematicState(float(self.t[i]), float(self.stroke_angle[i]),
                              float(self.pitch_angle[i]), int(self.stroke_state[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))


def stroke_state_from_rate(rate, tol=1e-12):
    """1 while the stroke angle increases (ties count as upstroke), else 0."""
    rate = np.asarray(rate, dtype=float)
    scale = max(float(np.max(np.abs(rate))), 1e-300) if rate.size else 1.0
    return np.where(rate >= -tol * scale, 1, 0).astype(np.int64)


def generate_cycle(setting, pitch_phase_deg=90.0):
    """Sample one flapping period, endpoint excluded.

    stroke(t) = A_s sin(2 pi f t), pitch(t) = A_p sin(2 pi f t + phase).
    """
    n = setting.n_steps_per_cycle
    f = setting.flap_frequency
    t = np.arange(n) / (n * f)
    w = 2.0 * math.pi * f * t
    stroke = setting.stroke_amplitude * np.sin(w)
    pitch = setting.pitch_amplitude * np.sin(w + math.radians(pitch_phase_deg))
    rate = np.cos(w)
    if setting.stroke_amplitude == 0:
        rate = np.zeros_like(w)
    return KinematicSeries(t, stroke, pitch, stroke_state_from_rate(rate))


# -- input records -------------------------------------------------------------


def _kin_block(recurrent):
    return KINEMATIC_FIELDS[:-1] if recurrent else KINEMATIC_FIELDS


def feature_names(variant, recurrent=False, k=4):
    """Column names of the input record for ``variant``.

    The stroke-state flag is omitted from the kinematic block of recurrent
    models; RFP keeps it explicitly.
    """
    variant = Variant(variant)
    kin = _kin_block(recurrent)
    if variant is Variant.BASELINE:
        return kin + ("shape_code",)
    if variant is Variant.FP:
        return kin + SKELETON_FIELDS
    if variant is Variant.RFP:
        return ("flap_freq", "stroke_state") + SKELETON_FIELDS
    return kin + tuple(f"pc{i}" for i in range(1, k + 1))


def _require(variant, block, value):
    if value is None:
        raise SchemaError(f"variant {variant.value} requires the {block} block")


def build_cycle_features(variant, series, setting, skeleton30=None, reduced=None,
                         shape_code=None, recurrent=False):
    """Stack input records for every sample of a cycle, shape ``(T, d)``."""
    variant = Variant(variant)
    n = len(series)
    cols = {
        "stroke_amp": np.full(n, float(setting.stroke_amplitude)),
        "pitch_amp": np.full(n, float(setting.pitch_amplitude)),
        "flap_freq": np.full(n, float(setting.flap_frequency)),
        "stroke_angle": np.asarray(series.stroke_angle, dtype=float),
        "pitch_angle": np.asarray(series.pitch_angle, dtype=float),
        "stroke_state": np.asarray(series.stroke_state, dtype=float),
    }
    if variant is Variant.BASELINE:
        _require(variant, "shape_code", shape_code)
        blocks = [np.column_stack([cols[c] for c in _kin_block(recurrent)]), np.full((n, 1), float(shape_code))]
    elif variant is Variant.FP:
        _require(variant, "skeleton", skeleton30)
        blocks = [np.column_stack([cols[c] for c in _kin_block(recurrent)]), _as_2d(skeleton30, n, 30, variant)]
    elif variant is Variant.RFP:
        _require(variant, "skeleton", skeleton30)
        blocks = [np.column_stack([cols["flap_freq"], cols["stroke_state"]]), _as_2d(skeleton30, n, 30, variant)]
    else:
        _require(variant, "reduced", reduced)
        red = np.asarray(reduced, dtype=float)
        blocks = [np.column_stack([cols[c] for c in _kin_block(recurrent)]), _as_2d(red, n, red.shape[-1], variant)]
    return np.hstack(blocks)


def _as_2d(block, n, width, variant):
    b = np.asarray(block, dtype=float)
    if b.ndim == 1:
        b = np.broadcast_to(b, (n, b.shape[0]))
    if b.shape != (n, width):
        raise SchemaError(f"variant {variant.value}: block has shape {b.shape}, expected {(n, width)}")
    return b


def build_input_record(variant, state, setting, skeleton30=None, reduced=None,
                       shape_code=None, recurrent=False):
    """Feature vector for a single instant."""
    series = KinematicSeries(np.array([state.t]), np.array([state.stroke_angle]),
                             np.array([state.pitch_angle]), np.array([state.stroke_state]))
    skel = None if skeleton30 is None else np.asarray(skeleton30, dtype=float)[None, :]
    red = None if reduced is None else np.asarray(reduced, dtype=float)[None, :]
    return build_cycle_features(variant, series, setting, skel, red, shape_code, recurrent)[0]


def format_record(record):
    return ",".join(repr(float(v)) for v in record)


def parse_record(text):
    return np.array([float(v) for v in text.split(",")])
