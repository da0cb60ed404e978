import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pqmsim.dynamics import COUPLED, SINGLE, DriveConfig, TimeSeries, coupled_drives, run_trajectory
from pqmsim.errors import DegenerateCurveError, InsufficientDataError
from pqmsim.hysteresis import (curve_area, curve_perimeter, detect_pinch, detect_self_intersection,
                               diagnose, extract_steady_cycle, form_factor, signed_curve_area,
                               split_loops)

PERIOD = 100


def circle(n=PERIOD, r=0.3, c=(0.5, 0.5)):
    t = 2 * np.pi * np.arange(n) / n
    return np.column_stack([c[0] + r * np.cos(t), c[1] + r * np.sin(t)])


def lemniscate(n, a=1.0):
    # Bernoulli lemniscate; each lobe encloses a^2 / 2.
    t = 2 * np.pi * (np.arange(n) + 0.5) / n
    d = 1 + np.sin(t) ** 2
    return np.column_stack([a * np.cos(t) / d, a * np.sin(t) * np.cos(t) / d])


# -- exact oracles -------------------------------------------------------------

def _orient_exact(a, b, c):
    v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    return (v > 0) - (v < 0)


def crossings_exact(points):
    """All-pairs proper crossings of a closed polyline in rational arithmetic."""
    pts = [tuple(Fraction(v) for v in p) for p in points]
    n = len(pts)
    found = []
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            a, b, c, d = pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]
            if (_orient_exact(a, b, c) * _orient_exact(a, b, d) < 0
                    and _orient_exact(c, d, a) * _orient_exact(c, d, b) < 0):
                den = (b[0] - a[0]) * (d[1] - c[1]) - (b[1] - a[1]) * (d[0] - c[0])
                t = ((c[0] - a[0]) * (d[1] - c[1]) - (c[1] - a[1]) * (d[0] - c[0])) / den
                found.append((float(a[0] + t * (b[0] - a[0])), float(a[1] + t * (b[1] - a[1]))))
    return found


def raster_abs_winding_area(points, n=800):
    """Area of {winding != 0} by midpoint sampling; valid when |winding| <= 1 everywhere."""
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    xs = lo[0] + (np.arange(n) + 0.5) * (hi[0] - lo[0]) / n
    ys = lo[1] + (np.arange(n) + 0.5) * (hi[1] - lo[1]) / n
    X, Y = np.meshgrid(xs, ys)
    w = np.zeros_like(X)
    a = points
    b = np.roll(points, -1, axis=0)
    for (x0, y0), (x1, y1) in zip(a, b):
        up = (y0 <= Y) & (y1 > Y)
        down = (y1 <= Y) & (y0 > Y)
        side = (x1 - x0) * (Y - y0) - (X - x0) * (y1 - y0)
        w += np.where(up & (side > 0), 1, 0) - np.where(down & (side < 0), 1, 0)
    cell = (hi[0] - lo[0]) * (hi[1] - lo[1]) / n ** 2
    return float(np.count_nonzero(w) * cell)


# -- area, perimeter, form factor -------------------------------------------------

SQUARE = np.array([(0, 0), (1, 0), (1, 1), (0, 1)], float)


def test_square():
    assert curve_area(SQUARE) == 1.0
    assert curve_perimeter(SQUARE) == 4.0
    assert form_factor(SQUARE) == pytest.approx(math.pi / 4, abs=1e-15)


def test_out_and_back_has_no_area():
    t = np.linspace(0, 1, 50)
    pts = np.vstack([np.column_stack([t, t]), np.column_stack([t[::-1], t[::-1]])[1:-1]])
    assert curve_area(pts) == pytest.approx(0.0, abs=1e-15)
    assert form_factor(pts) == pytest.approx(0.0, abs=1e-15)


def test_figure_eight_of_two_tangent_squares():
    # Second lobe runs clockwise: the signed area cancels, the lobe sum does not.
    pts = np.array([(0, 0), (1, 0), (1, 1), (1, 2), (2, 2), (2, 1), (1, 1), (0, 1)], float)
    assert signed_curve_area(pts) == 0.0
    assert curve_area(pts) == 2.0
    same_way = np.array([(0, 0), (1, 0), (1, 1), (2, 1), (2, 2), (1, 2), (1, 1), (0, 1)], float)
    assert curve_area(same_way) == 2.0


def test_lemniscate_area_matches_analytic_value():
    pts = lemniscate(1500)
    assert detect_self_intersection(pts)[0]
    assert abs(signed_curve_area(pts)) < 1e-12
    assert curve_area(pts) == pytest.approx(1.0, rel=1e-4)
    assert len(split_loops(pts)) == 2


@pytest.mark.parametrize("pts", [lemniscate(300), np.array([(0, 0), (1, 1), (1, 0), (0, 1)], float),
                                 circle(97)])
def test_area_matches_raster_winding_oracle(pts):
    assert curve_area(pts) == pytest.approx(raster_abs_winding_area(pts), rel=1e-2)


def test_circle_form_factor():
    assert form_factor(circle()) == pytest.approx(1.0, abs=1e-3)
    n = 400
    assert curve_perimeter(circle(n, r=2.0)) == pytest.approx(4 * math.pi, rel=1.0 / n ** 2 * 10)


def test_degenerate_perimeter():
    pts = np.tile([[0.3, 0.3]], (5, 1))
    assert curve_perimeter(pts) == 0.0
    with pytest.raises(DegenerateCurveError):
        form_factor(pts)
    with pytest.raises(DegenerateCurveError):
        curve_area(pts[:2])


@st.composite
def star_polygon(draw):
    n = draw(st.integers(3, 40))
    angles = sorted(draw(st.lists(st.floats(0, 2 * math.pi, exclude_max=True),
                                  min_size=n, max_size=n, unique=True)))
    radii = draw(st.lists(st.floats(0.1, 1.0), min_size=n, max_size=n))
    return np.column_stack([np.cos(angles) * radii, np.sin(angles) * radii])


@given(star_polygon())
def test_isoperimetric_bound(pts):
    if not detect_self_intersection(pts)[0]:
        assert form_factor(pts) <= 1 + 1e-9


@given(star_polygon(), st.floats(1e-3, 1e3))
def test_scale_invariance(pts, k):
    f = form_factor(pts)
    assert abs(form_factor(pts * k) - f) <= 1e-12


@given(star_polygon())
def test_diagnostics_consistent(pts):
    d = diagnose(pts)
    assert d.form_factor == pytest.approx(4 * math.pi * d.area / d.perimeter ** 2, abs=1e-12)
    assert d.area >= abs(d.signed_area) - 1e-12


# -- self-intersection -------------------------------------------------------------

def test_bowtie():
    hit, where = detect_self_intersection(np.array([(0, 0), (1, 1), (1, 0), (0, 1)], float))
    assert hit
    assert where == [pytest.approx((0.5, 0.5))]


def test_ellipse_does_not_cross():
    t = 2 * np.pi * np.arange(100) / 100
    assert detect_self_intersection(np.column_stack([np.cos(t), 0.2 * np.sin(t)])) == (False, [])


def test_touching_is_not_crossing():
    # The path dips to (1, 0), touching the first segment from above without crossing it.
    pts = np.array([(0, 0), (2, 0), (2, 2), (1, 0), (0, 2)], float)
    assert not detect_self_intersection(pts)[0]


def test_near_touch_within_tolerance_is_touching():
    pts = np.array([(1.0, 1.0), (1e-300, 0.0), (0.0, 1.0), (0.0, 0.0)])
    assert not detect_self_intersection(pts)[0]


grid_points = st.lists(st.tuples(st.integers(0, 12), st.integers(0, 12)), min_size=4, max_size=50)
# Dyadic coordinates keep every orientation exact in floating point, far from the
# near-degenerate band that the tolerance deliberately treats as touching.
dyadic = st.integers(-1024, 1024).map(lambda k: k / 1024)
float_points = st.lists(st.tuples(dyadic, dyadic), min_size=4, max_size=50)


@settings(max_examples=150, deadline=None)
@given(st.one_of(grid_points, float_points))
def test_crossing_census_matches_rational_oracle(points):
    pts = np.asarray(points, dtype=float)
    exact = crossings_exact(pts)
    hit, found = detect_self_intersection(pts)
    assert hit == bool(exact)
    assert len(found) == len(exact)
    for p, q in zip(sorted(found), sorted(exact)):
        assert p == pytest.approx(q, abs=1e-9)


# -- pinch and extraction -------------------------------------------------------------

@pytest.mark.parametrize("m", [10, 30, 50, 70])
def test_single_device_is_pinched(m):
    s = run_trajectory(SINGLE, (DriveConfig(PERIOD),), m)
    assert detect_pinch(extract_steady_cycle(s, "intra_1", PERIOD, m), 1e-3)


def test_circle_is_not_pinched():
    assert not detect_pinch(circle())


def test_pinch_with_drive_phase_split():
    s = run_trajectory(SINGLE, (DriveConfig(PERIOD),), 30)
    curve = extract_steady_cycle(s, "intra_1", PERIOD, 30)
    # Drive period starts at x = 0; the peak is half a period later.
    start = int(np.argmin(curve.points[:, 0]))
    assert detect_pinch(curve, split=(start, (start + PERIOD // 2) % PERIOD))


@pytest.mark.parametrize("t, phi", [(0.2, 0.7), (0.3, 0.5), (0.4, 0.7)])
def test_coupled_inter_curves_not_pinched(t, phi):
    m = round(t * PERIOD)
    s = run_trajectory(COUPLED, coupled_drives(PERIOD, phi), m)
    for rel in ("inter_21", "inter_12"):
        assert not detect_pinch(extract_steady_cycle(s, rel, PERIOD, m))


def test_extract_endpoints():
    one = run_trajectory(SINGLE, (DriveConfig(PERIOD),), 1)
    c = extract_steady_cycle(one, "intra_1", PERIOD, 1)
    x, y = c.points.T
    assert len(c.points) == PERIOD
    assert np.max(np.abs(y - (1 - x) * x)) < 1e-12
    full = run_trajectory(SINGLE, (DriveConfig(PERIOD),), PERIOD)
    x, y = extract_steady_cycle(full, (0, 0), PERIOD, PERIOD).points.T
    assert np.max(np.abs(y - x / 2)) < 1e-12


def test_coupled_zero_phase_inter_equals_intra():
    s = run_trajectory(COUPLED, coupled_drives(PERIOD, 0.0), 30)
    intra = extract_steady_cycle(s, "intra_1", PERIOD, 30).points
    inter = extract_steady_cycle(s, "inter_21", PERIOD, 30).points
    assert np.array_equal(intra, inter)


def test_extract_errors():
    s = run_trajectory(SINGLE, (DriveConfig(PERIOD),), 30)
    with pytest.raises(InsufficientDataError):
        extract_steady_cycle(s, "inter_21", PERIOD)
    short = TimeSeries(s.bins[:90], s.n_in[:90], s.n_out[:90], s.r[:90])
    with pytest.raises(InsufficientDataError):
        extract_steady_cycle(short, "intra_1", PERIOD)
    with pytest.raises(InsufficientDataError):
        extract_steady_cycle(s, "intra_1", PERIOD, m=200)


def test_fig4_inter_curve_self_intersects():
    s = run_trajectory(COUPLED, coupled_drives(PERIOD, 0.5), 30)
    assert detect_self_intersection(extract_steady_cycle(s, "inter_21", PERIOD, 30))[0]
