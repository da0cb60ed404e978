import math

import numpy as np
import pytest

from pqmsim import sweep as sweep_mod
from pqmsim.errors import ConfigError, DegenerateCurveError
from pqmsim.sweep import (FORM_FACTOR, SELF_INTERSECTION, buffer_length, default_axes,
                          evaluate_cell, sweep_map)

PHIS = np.array([0.0, 0.5, 0.7, 2.4])
TS = np.array([0.02, 0.3, 0.5])


def test_default_axes():
    phis, ts = default_axes()
    assert len(phis) == len(ts) == 60
    assert (phis[0], phis[-1]) == (0.0, math.pi)
    assert (ts[0], ts[-1]) == (0.01, 1.0)


@pytest.mark.parametrize("t, m", [(0.01, 1), (0.004, 1), (0.35, 35), (1.0, 100), (0.305, 30)])
def test_buffer_length(t, m):
    assert buffer_length(t, 100) == m


def test_shape_and_layout():
    res = sweep_map("coupled", PHIS, TS)
    assert res.relations == ("intra_1", "intra_2", "inter_21", "inter_12")
    for grid in res.values.values():
        assert grid.shape == (len(TS), len(PHIS))
    cell = evaluate_cell("coupled", 0.7, 0.5, FORM_FACTOR)
    for rel, v in cell.items():
        assert res.values[rel][2, 2] == v


def test_parallel_assembly_matches_serial():
    a = sweep_map("coupled", PHIS, TS, SELF_INTERSECTION)
    b = sweep_map("coupled", PHIS, TS, SELF_INTERSECTION, workers=2)
    for rel in a.values:
        assert np.array_equal(a.values[rel], b.values[rel])


def test_zero_phase_inter_equals_intra():
    res = sweep_map("coupled", [0.0], TS)
    assert np.array_equal(res.values["inter_21"], res.values["intra_1"])
    assert np.array_equal(res.values["inter_12"], res.values["intra_2"])


def test_label_swap_symmetry():
    # Phases on the bin grid, so swapping devices is an exact time shift.
    s = np.array([7, 30, 65, 81])
    phis = np.pi * s / 100
    mirrored = np.pi * (100 - s) / 100
    for metric in (FORM_FACTOR, SELF_INTERSECTION):
        a = sweep_map("coupled", phis, TS, metric)
        b = sweep_map("coupled", mirrored, TS, metric)
        for r1, r2 in (("inter_21", "inter_12"), ("intra_1", "intra_2")):
            assert np.allclose(a.values[r1], b.values[r2], atol=1e-9, rtol=0)


def test_mutual_exclusion_small_grid():
    phis = np.linspace(0, math.pi, 13)
    ts = np.linspace(0.05, 0.95, 10)
    res = sweep_map("coupled", phis, ts, SELF_INTERSECTION)
    both = (res.values["inter_21"] == 1) & (res.values["inter_12"] == 1)
    assert not both.any()
    assert not res.values["intra_1"].any()
    assert not res.values["intra_2"].any()


def test_single_scenario_sweep():
    res = sweep_map("single", [0.0], [0.1, 0.35, 1.0])
    assert res.relations == ("intra_1",)
    f = res.values["intra_1"][:, 0]
    assert 0 < f[0] < f[1]
    assert f[2] == pytest.approx(0.0, abs=1e-12)
    value, t, phi = res.argmax("intra_1")
    assert (t, phi) == (0.35, 0.0)


def test_degenerate_cells_do_not_abort(monkeypatch):
    real = sweep_mod.form_factor

    def flaky(curve, signed=False):
        if curve.relation == "inter_12":
            raise DegenerateCurveError("zero perimeter")
        return real(curve, signed=signed)

    monkeypatch.setattr(sweep_mod, "form_factor", flaky)
    res = sweep_map("coupled", [0.5], [0.3])
    assert math.isnan(res.values["inter_12"][0, 0])
    assert res.degenerate == [("inter_12", 0.3, 0.5)]
    assert not math.isnan(res.values["inter_21"][0, 0])
    assert res.argmax("intra_1")[0] == res.values["intra_1"][0, 0]


def test_signed_area_option():
    plain = evaluate_cell("coupled", 0.5, 0.3, FORM_FACTOR)
    signed = evaluate_cell("coupled", 0.5, 0.3, FORM_FACTOR, signed=True)
    # inter_21 crosses itself here, so cancelling lobes lowers its signed value
    assert signed["inter_21"] < plain["inter_21"]
    assert signed["intra_1"] == pytest.approx(plain["intra_1"], abs=1e-12)


def test_validation():
    with pytest.raises(ConfigError):
        sweep_map("coupled", [], TS)
    with pytest.raises(ConfigError):
        sweep_map("coupled", PHIS, [0.0])
    with pytest.raises(ConfigError):
        sweep_map("coupled", PHIS, TS, metric="area")
    with pytest.raises(ConfigError):
        sweep_map("triple", PHIS, TS)
