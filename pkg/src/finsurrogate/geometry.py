"""Flat fin outlines, equal-area spanwise segmentation and 3D skeletons.

Coordinates follow the fin plane convention: ``x`` points downstream
(chordwise, leading edge first) and ``z`` runs spanwise from root to tip.
All lengths are in centimetres.

Axis frame
----------
The origin sits where the stroke axis (parallel to ``x``) meets the pitch
axis (parallel to ``z``). A fin is placed with its leading edge at
``x = -pitch_axis_offset`` and its root chord at ``z = stroke_axis_offset``.

Rotation convention
-------------------
Pitch is applied first (about the pitch axis), stroke second (about the
stroke axis). Positive stroke lifts the tip towards ``+y``; positive pitch
lifts the leading edge towards ``+y``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

N_STRIPS = 10


class InvalidShapeError(ValueError):
    """Raised when a fin outline violates a FinShape invariant."""


# -- polygon primitives ------------------------------------------------------


def signed_area(poly):
    """Shoelace area; positive for counter-clockwise vertex order."""
    p = np.asarray(poly, dtype=float)
    if len(p) < 3:
        return 0.0
    x, z = p[:, 0], p[:, 1]
    xn, zn = np.roll(x, -1), np.roll(z, -1)
    return 0.5 * float(np.sum(x * zn - xn * z))


def polygon_centroid(poly):
    """Area centroid of a simple polygon (either orientation)."""
    p = np.asarray(poly, dtype=float)
    x, z = p[:, 0], p[:, 1]
    xn, zn = np.roll(x, -1), np.roll(z, -1)
    cross = x * zn - xn * z
    a = 0.5 * np.sum(cross)
    if a == 0.0:
        raise InvalidShapeError("centroid of a zero-area polygon is undefined")
    cx = np.sum((x + xn) * cross) / (6.0 * a)
    cz = np.sum((z + zn) * cross) / (6.0 * a)
    return np.array([cx, cz])


def clip_half_plane(poly, level, keep_below):
    """Clip a polygon against ``z <= level`` (or ``z >= level``).

    Sutherland-Hodgman against a single half-plane. Non-convex input may
    produce degenerate zero-width bridges; those do not change the shoelace
    area or centroid.
    """
    out = []
    n = len(poly)
    if n == 0:
        return out

    def inside(q):
        return q[1] <= level if keep_below else q[1] >= level

    prev = poly[-1]
    prev_in = inside(prev)
    for cur in poly:
        cur_in = inside(cur)
        if cur_in != prev_in:
            t = (level - prev[1]) / (cur[1] - prev[1])
            out.append((prev[0] + t * (cur[0] - prev[0]), level))
        if cur_in:
            out.append((cur[0], cur[1]))
        prev, prev_in = cur, cur_in
    return out


def clip_band(poly, z_lo, z_hi):
    """Part of ``poly`` lying in the slab ``z_lo <= z <= z_hi``."""
    return clip_half_plane(clip_half_plane(poly, z_lo, keep_below=False), z_hi, keep_below=True)


def area_below(poly, level):
    return signed_area(clip_half_plane(poly, level, keep_below=True))


def _segments_intersect(p1, p2, q1, q2):
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return (v > 0) - (v < 0)

    def on_seg(a, b, c):
        return min(a[0], b[0]) <= c[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and on_seg(p1, p2, q1):
        return True
    if o2 == 0 and on_seg(p1, p2, q2):
        return True
    if o3 == 0 and on_seg(q1, q2, p1):
        return True
    if o4 == 0 and on_seg(q1, q2, p2):
        return True
    return False


def is_simple(poly):
    """True if no two non-adjacent edges of the closed polygon touch."""
    n = len(poly)
    edges = [(poly[i], poly[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if _segments_intersect(*edges[i], *edges[j]):
                return False
    return True


# -- domain types --------------------------------------------------------------


@dataclass(frozen=True)
class FinShape:
    """A flat fin outline in the fin plane (cm), stored counter-clockwise."""

    vertices: tuple
    name: str = "fin"

    def __post_init__(self):
        verts = [tuple(float(c) for c in v) for v in self.vertices]
        problem = _first_violation(verts)
        if problem:
            raise InvalidShapeError(f"{self.name}: {problem}")
        if signed_area(verts) < 0:
            verts = verts[::-1]
        object.__setattr__(self, "vertices", tuple(verts))

    @property
    def array(self):
        return np.array(self.vertices)

    @property
    def area(self):
        return signed_area(self.vertices)

    @property
    def centroid(self):
        return polygon_centroid(self.vertices)

    @property
    def span(self):
        z = self.array[:, 1]
        return float(z.max() - z.min())

    @property
    def chord_extent(self):
        x = self.array[:, 0]
        return float(x.max() - x.min())

    def to_dict(self):
        return {"name": self.name, "vertices": [list(v) for v in self.vertices]}


def _first_violation(verts):
    if len(verts) < 3:
        return f"needs at least 3 vertices, got {len(verts)}"
    if not all(len(v) == 2 for v in verts):
        return "every vertex must be an [x, z] pair"
    if not np.all(np.isfinite(np.asarray(verts))):
        return "vertex coordinates must be finite"
    z = [v[1] for v in verts]
    if max(z) - min(z) <= 0:
        return "spanwise extent must be positive"
    if len(set(verts)) != len(verts):
        return "duplicate vertices"
    if not is_simple(verts):
        return "polygon is self-intersecting"
    a = abs(signed_area(verts))
    scale = (max(z) - min(z)) * (max(v[0] for v in verts) - min(v[0] for v in verts))
    if a <= 1e-12 * max(scale, 1e-300):
        return "polygon area must be positive"
    return None


@dataclass(frozen=True)
class AxisFrame:
    """Placement of the stroke and pitch axes relative to the fin (cm)."""

    stroke_axis_offset: float = 3.175
    pitch_axis_offset: float = 1.25

    def __post_init__(self):
        for name in ("stroke_axis_offset", "pitch_axis_offset"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")

    def place(self, shape):
        """Fin vertices expressed in the axis frame."""
        p = shape.array.copy()
        p[:, 0] += -p[:, 0].min() - self.pitch_axis_offset
        p[:, 1] += -p[:, 1].min() + self.stroke_axis_offset
        return p


@dataclass(frozen=True)
class FlatSkeleton:
    """Strip centres of mass in the axis frame, ordered root to tip."""

    coms: np.ndarray
    strip_areas: np.ndarray
    cuts: np.ndarray = field(default=None)
    tip_radius: float = 0.0

    @property
    def n_strips(self):
        return len(self.coms)

    @property
    def total_area(self):
        return float(np.sum(self.strip_areas))


@dataclass(frozen=True)
class SkeletonFrame:
    points: np.ndarray
    stroke_angle: float
    pitch_angle: float


# -- operations ----------------------------------------------------------------


def _find_cut(poly, target, lo, hi, total):
    """Bisect the monotone cumulative-area function for ``area_below == target``."""
    a_lo, a_hi = area_below(poly, lo), area_below(poly, hi)
    if not (a_lo <= target <= a_hi):
        raise RuntimeError(f"cut search failed to bracket target area {target}")
    tol = 1e-12 * total
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        a_mid = area_below(poly, mid)
        if abs(a_mid - target) <= tol * 1e-3:
            return mid
        if a_mid < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def segment_fin(shape, frame=None, n_strips=N_STRIPS):
    """Split a fin into ``n_strips`` equal-area bands cut at constant ``z``.

    Parameters
    ----------
    shape : FinShape
    frame : AxisFrame, optional
        Defaults to the rig offsets (3.175 cm stroke, 1.25 cm pitch).
    n_strips : int

    Returns
    -------
    FlatSkeleton
        Strip centroids and areas in axis-frame coordinates.
    """
    if n_strips < 1:
        raise ValueError("n_strips must be >= 1")
    frame = AxisFrame() if frame is None else frame
    pts = frame.place(shape)
    poly = [tuple(p) for p in pts]
    total = signed_area(poly)
    if total <= 0:
        raise InvalidShapeError(f"{shape.name}: degenerate polygon")
    z_min, z_max = pts[:, 1].min(), pts[:, 1].max()

    cuts = [z_min]
    for k in range(1, n_strips):
        cuts.append(_find_cut(poly, k * total / n_strips, cuts[-1], z_max, total))
    cuts.append(z_max)

    coms, areas = [], []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi <= lo:
            raise InvalidShapeError(f"{shape.name}: zero-width strip at z={lo}")
        band = clip_band(poly, lo, hi)
        a = signed_area(band)
        if a <= 0:
            raise InvalidShapeError(f"{shape.name}: empty strip between z={lo} and z={hi}")
        areas.append(a)
        coms.append(polygon_centroid(band))
    tip = float(np.max(np.abs(pts[:, 1])))
    return FlatSkeleton(np.array(coms), np.array(areas), np.array(cuts), tip)


def rotate_points(xz, stroke_deg, pitch_deg):
    """Rotate flat points ``(n, 2)`` through stroke/pitch angle arrays.

    Returns an array of shape ``(*angles.shape, n, 3)``.
    """
    xz = np.asarray(xz, dtype=float)
    s = np.deg2rad(np.asarray(stroke_deg, dtype=float))[..., None]
    p = np.deg2rad(np.asarray(pitch_deg, dtype=float))[..., None]
    x, z = xz[:, 0], xz[:, 1]
    # pitch about z
    x1 = x * np.cos(p)
    y1 = -x * np.sin(p)
    # stroke about x
    y2 = y1 * np.cos(s) + z * np.sin(s)
    z2 = -y1 * np.sin(s) + z * np.cos(s)
    x2 = np.broadcast_to(x1, y2.shape)
    return np.stack([x2, y2, z2], axis=-1)


def rotate_skeleton(flat, stroke_deg, pitch_deg):
    if not (math.isfinite(stroke_deg) and math.isfinite(pitch_deg)):
        raise ValueError("angles must be finite")
    if stroke_deg == 0 and pitch_deg == 0:
        pts = np.column_stack([flat.coms[:, 0], np.zeros(flat.n_strips), flat.coms[:, 1]])
    else:
        pts = rotate_points(flat.coms, stroke_deg, pitch_deg)
    return SkeletonFrame(pts, float(stroke_deg), float(pitch_deg))


def skeleton_to_vector(frame):
    """Flatten as ``[x1, y1, z1, x2, y2, z2, ...]`` (root strip first)."""
    return np.asarray(frame.points, dtype=float).reshape(-1)


# -- shipped outlines ------------------------------------------------------------

# The bio and pt4 outlines are synthetic stand-ins shaped like a fish pectoral
# fin (narrow root, broad distal margin) and an insect wing (broad root,
# tapering). They were fitted so that each rect strip centroid sits close to
# 0.6 * bio + 0.4 * pt4, i.e. rect is an approximate interpolant of the other
# two in skeleton space. They are not measured geometries.
_RECT = [(0.0, 0.0), (10.0, 0.0), (10.0, 20.0), (0.0, 20.0)]

_BIO = [
    (5.73, 0.0), (5.82, 2.0), (5.98, 4.0), (6.14, 6.0), (6.5, 8.0), (6.9, 10.0),
    (7.52, 12.0), (8.84, 14.0), (10.44, 16.0), (11.83, 18.0), (9.2, 20.0),
    (5.07, 20.0), (0.42, 18.0), (1.22, 16.0), (1.41, 14.0), (1.34, 12.0),
    (1.09, 10.0), (0.83, 8.0), (0.67, 6.0), (0.52, 4.0), (0.45, 2.0), (0.42, 0.0),
]

_PT4 = [
    (14.39, 0.0), (13.92, 2.0), (12.84, 4.0), (11.33, 6.0), (9.47, 8.0), (7.81, 10.0),
    (6.66, 12.0), (6.11, 14.0), (6.22, 16.0), (6.55, 18.0), (4.97, 20.0),
    (-0.62, 20.0), (-0.62, 18.0), (0.77, 16.0), (1.13, 14.0), (1.1, 12.0),
    (1.17, 10.0), (1.32, 8.0), (1.41, 6.0), (1.45, 4.0), (1.44, 2.0), (1.44, 0.0),
]


def builtin_shapes():
    """The three shipped fins: ``rect``, ``bio`` and ``pt4`` (in that order)."""
    return [
        FinShape(_RECT, "rect"),
        FinShape(_BIO, "bio"),
        FinShape(_PT4, "pt4"),
    ]


def builtin_shape(name):
    for s in builtin_shapes():
        if s.name == name:
            return s
    raise KeyError(f"no builtin fin named {name!r}")


# -- file format -----------------------------------------------------------------


def load_shape(path):
    """Read a ``{"name": ..., "vertices": [[x, z], ...]}`` outline file."""
    path = Path(path)
    with path.open() as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidShapeError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict) or "vertices" not in doc:
        raise InvalidShapeError(f"{path}: expected an object with a 'vertices' list")
    verts = doc["vertices"]
    if not isinstance(verts, list) or not all(isinstance(v, (list, tuple)) for v in verts):
        raise InvalidShapeError(f"{path}: 'vertices' must be a list of [x, z] pairs")
    return FinShape(tuple(tuple(v) for v in verts), str(doc.get("name", path.stem)))


def save_shape(shape, path):
    Path(path).write_text(json.dumps(shape.to_dict(), indent=2) + "\n")
