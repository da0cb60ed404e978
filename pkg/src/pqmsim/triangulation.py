"""Relocate a point of interest after the sample moves, from its distances to
three reference marks.

Record the three radii in the old frame, read the marks again in the new
frame, then intersect the three circles.  Subtracting circle 1 from circles 2
and 3 gives a 2x2 linear system; the solution is then checked against the
circles themselves, so a point is only returned if it lies on all three
within the tolerance.  Distances are blind to reflections, so a mirrored
frame gives the mirrored point.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InconsistentRadiiError, SingularSystemError

DEFAULT_TOLERANCE = 1e-6  # micrometres
COLLINEAR_RTOL = 1e-12


@dataclass(frozen=True)
class ReferenceFrame:
    refs: tuple
    poi: tuple

    def __post_init__(self):
        refs = tuple(tuple(map(float, p)) for p in self.refs)
        if len(refs) != 3 or any(len(p) != 2 for p in refs):
            raise ConfigError("a frame needs exactly three planar reference points")
        object.__setattr__(self, "refs", refs)
        object.__setattr__(self, "poi", tuple(map(float, self.poi)))
        _check_references(refs)


def _check_references(refs):
    a, b, c = (np.asarray(p, dtype=float) for p in refs)
    if np.array_equal(a, b) or np.array_equal(a, c) or np.array_equal(b, c):
        raise SingularSystemError("reference points must be pairwise distinct")
    area2 = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    scale = max(np.dot(b - a, b - a), np.dot(c - a, c - a))
    if abs(area2) <= COLLINEAR_RTOL * scale:
        raise SingularSystemError("reference points are collinear; the circles do not fix a unique point")


def compute_radii(frame):
    px, py = frame.poi
    return tuple(math.hypot(x - px, y - py) for x, y in frame.refs)


def relocate(new_refs, radii, tolerance=DEFAULT_TOLERANCE):
    refs = [tuple(map(float, p)) for p in new_refs]
    if len(refs) != 3 or len(radii) != 3:
        raise ConfigError("need three reference points and three radii")
    if any(r < 0 for r in radii):
        raise ConfigError("radii must be non-negative")
    _check_references(refs)
    (x1, y1), (x2, y2), (x3, y3) = refs
    r1, r2, r3 = map(float, radii)
    # |p - c_i|^2 = r_i^2 ; subtract i=1 from i=2,3
    a = np.array([[2.0 * (x2 - x1), 2.0 * (y2 - y1)],
                  [2.0 * (x3 - x1), 2.0 * (y3 - y1)]])
    b = np.array([r1 ** 2 - r2 ** 2 + x2 ** 2 - x1 ** 2 + y2 ** 2 - y1 ** 2,
                  r1 ** 2 - r3 ** 2 + x3 ** 2 - x1 ** 2 + y3 ** 2 - y1 ** 2])
    try:
        p = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError("reference points are collinear") from exc
    residual = max(abs(math.hypot(p[0] - x, p[1] - y) - r)
                   for (x, y), r in zip(refs, (r1, r2, r3)))
    if residual > tolerance:
        raise InconsistentRadiiError(
            f"recovered point misses a reference circle by {residual:.3g} "
            f"(tolerance {tolerance:.3g}); the frames are not related by a rigid motion")
    return float(p[0]), float(p[1])
