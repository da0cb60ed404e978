"""Steady-cycle extraction and loop diagnostics: area, perimeter, form factor,
self-intersection and pinch at the origin.

Curves are closed polylines: the last point connects back to the first.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateCurveError, InsufficientDataError

# c is taken as collinear with a->b when its distance from that line is at most
# ORIENT_EPS * max(|ab|, |ac|).  Scale-free, so it also works on rescaled curves.
ORIENT_EPS = 1e-12
PINCH_TOL = 1e-3

# relation name -> (input device, output device), zero-based
RELATIONS = {
    "intra_1": (0, 0),
    "intra_2": (1, 1),
    "inter_21": (1, 0),
    "inter_12": (0, 1),
}
SINGLE_RELATIONS = ("intra_1",)
COUPLED_RELATIONS = ("intra_1", "intra_2", "inter_21", "inter_12")


@dataclass
class HysteresisCurve:
    points: np.ndarray
    relation: str = ""

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(self.points)):
            raise ValueError("curve contains non-finite coordinates")

    @property
    def x(self):
        return self.points[:, 0]

    @property
    def y(self):
        return self.points[:, 1]

    def __len__(self):
        return len(self.points)


@dataclass
class CurveDiagnostics:
    area: float
    perimeter: float
    form_factor: float
    self_intersecting: bool
    intersection_points: list = field(default_factory=list)
    pinched_at_origin: bool = False
    signed_area: float = 0.0


def _points(curve):
    if isinstance(curve, HysteresisCurve):
        return curve.points
    return np.asarray(curve, dtype=float).reshape(-1, 2)


def extract_steady_cycle(series, pair, period_bins, m=None):
    """Last complete drive period of ``(n_in[input], n_out[output])``.

    ``pair`` is either a relation name from :data:`RELATIONS` or an
    ``(input_device, output_device)`` tuple of zero-based indices.
    """
    name = ""
    if isinstance(pair, str):
        name = pair
        pair = RELATIONS[pair]
    i, j = pair
    if max(i, j) >= series.n_devices:
        raise InsufficientDataError(f"series has {series.n_devices} device(s), relation needs {max(i, j) + 1}")
    need = period_bins + (m or 0)
    if len(series) < need or len(series) < period_bins or period_bins < 1:
        raise InsufficientDataError(
            f"series has {len(series)} bins, need at least {need} for one steady period")
    x = series.n_in[-period_bins:, i]
    y = series.n_out[-period_bins:, j]
    return HysteresisCurve(np.column_stack([x, y]), name)


def shoelace(points):
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


def _orient(a, b, c):
    """Sign-cleaned orientation of c relative to a->b (broadcasting over leading axes)."""
    abx, aby = b[..., 0] - a[..., 0], b[..., 1] - a[..., 1]
    acx, acy = c[..., 0] - a[..., 0], c[..., 1] - a[..., 1]
    o = _cross(abx, aby, acx, acy)
    ab = np.hypot(abx, aby)
    scale = ab * np.maximum(ab, np.hypot(acx, acy))
    return np.where(np.abs(o) <= ORIENT_EPS * scale, 0.0, o)


def _crossing_pairs(points):
    """Index pairs (i, j), i < j, of segments that cross properly."""
    n = len(points)
    if n < 4:
        return np.empty((0, 2), dtype=int)
    a = points
    b = np.roll(points, -1, axis=0)
    A, B = a[:, None, :], b[:, None, :]
    C, D = a[None, :, :], b[None, :, :]
    o1 = _orient(A, B, C)
    o2 = _orient(A, B, D)
    o3 = _orient(C, D, A)
    o4 = _orient(C, D, B)
    hit = (o1 * o2 < 0) & (o3 * o4 < 0)
    ii, jj = np.nonzero(np.triu(hit, k=2))
    keep = ~((ii == 0) & (jj == n - 1))  # closing segment is adjacent to the first
    return np.column_stack([ii[keep], jj[keep]])


def _intersection(p, q, r, s):
    d1 = q - p
    d2 = s - r
    t = _cross(*(r - p), *d2) / _cross(*d1, *d2)
    return p + t * d1


def detect_self_intersection(curve):
    """All proper crossings between non-adjacent segments, closing segment included.

    Touching (a vertex on another segment, collinear overlap) is not a crossing.
    """
    pts = _points(curve)
    pairs = _crossing_pairs(pts)
    n = len(pts)
    found = [tuple(_intersection(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]))
             for i, j in pairs]
    return bool(found), found


def _repeated_vertex(pts):
    """First (i, j), j > i + 1, with pts[i] == pts[j] exactly, or None."""
    n = len(pts)
    if n < 4:
        return None
    same = np.all(pts[:, None, :] == pts[None, :, :], axis=-1)
    ii, jj = np.nonzero(np.triu(same, k=2))
    keep = ~((ii == 0) & (jj == n - 1))
    if not keep.any():
        return None
    return int(ii[keep][0]), int(jj[keep][0])


def _split_loops(pts, depth=0):
    if depth > 10 * len(pts):
        return [pts]
    pairs = _crossing_pairs(pts)
    if len(pairs) == 0:
        # A loop can also pass through one of its own vertices (figure-eight
        # drawn through a shared corner); cut there as well.
        rep = _repeated_vertex(pts)
        if rep is None:
            return [pts]
        i, j = rep
        return _split_loops(pts[i:j], depth + 1) + _split_loops(
            np.concatenate([pts[j:], pts[:i]]), depth + 1)
    n = len(pts)
    i, j = pairs[0]
    x = _intersection(pts[i], pts[i + 1], pts[j], pts[(j + 1) % n])[None, :]
    inner = np.concatenate([x, pts[i + 1:j + 1]])
    outer = np.concatenate([x, pts[j + 1:], pts[:i + 1]])
    return _split_loops(inner, depth + 1) + _split_loops(outer, depth + 1)


def split_loops(curve):
    """Cut a closed polyline at its crossings into simple closed loops."""
    return _split_loops(_points(curve))


def curve_area(curve):
    """Enclosed area, counting each lobe of a self-intersecting loop positively."""
    pts = _points(curve)
    if len(pts) < 3:
        raise DegenerateCurveError("area needs at least 3 points")
    return float(sum(abs(shoelace(loop)) for loop in _split_loops(pts)))


def signed_curve_area(curve):
    """Plain shoelace area; opposite-handed lobes cancel."""
    return shoelace(_points(curve))


def curve_perimeter(curve):
    pts = _points(curve)
    if len(pts) < 2:
        raise DegenerateCurveError("perimeter needs at least 2 points")
    d = np.roll(pts, -1, axis=0) - pts
    return float(np.hypot(d[:, 0], d[:, 1]).sum())


def form_factor(curve, signed=False):
    """``4 pi A / P^2``: 1 for a circle, 0 for a loop that encloses nothing."""
    p = curve_perimeter(curve)
    if p <= 0.0:
        raise DegenerateCurveError("zero perimeter")
    a = abs(signed_curve_area(curve)) if signed else curve_area(curve)
    return 4.0 * math.pi * a / (p * p)


def _point_segment_distance(p, a, b):
    ab = b - a
    denom = float(np.dot(ab, ab))
    t = 0.0 if denom == 0.0 else min(1.0, max(0.0, float(np.dot(p - a, ab)) / denom))
    return float(np.hypot(*(a + t * ab - p)))


def _arc_distance(pts, start, stop, target):
    n = len(pts)
    idx = [start]
    while idx[-1] != stop:
        idx.append((idx[-1] + 1) % n)
    if len(idx) == 1:
        return float(np.hypot(*(pts[start] - target)))
    return min(_point_segment_distance(target, pts[a], pts[b]) for a, b in zip(idx, idx[1:]))


def branch_split(curve):
    """Indices of minimum and maximum x, which separate the two branches."""
    pts = _points(curve)
    return int(np.argmin(pts[:, 0])), int(np.argmax(pts[:, 0]))


def detect_pinch(curve, tolerance=PINCH_TOL, split=None):
    """True if both branches pass within ``tolerance`` of the origin.

    Branches run between the extreme-x samples unless ``split`` gives the two
    indices explicitly (e.g. from the known drive phase).
    """
    pts = _points(curve)
    if len(pts) < 2:
        return False
    lo, hi = split if split is not None else branch_split(pts)
    origin = np.zeros(2)
    up = _arc_distance(pts, lo, hi, origin)
    down = _arc_distance(pts, hi, lo, origin)
    return up <= tolerance and down <= tolerance


def diagnose(curve, pinch_tolerance=PINCH_TOL):
    pts = _points(curve)
    crossing, where = detect_self_intersection(pts)
    return CurveDiagnostics(
        area=curve_area(pts),
        perimeter=curve_perimeter(pts),
        form_factor=form_factor(pts),
        self_intersecting=crossing,
        intersection_points=where,
        pinched_at_origin=detect_pinch(pts, pinch_tolerance),
        signed_area=signed_curve_area(pts),
    )
