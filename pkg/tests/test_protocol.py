import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pqmsim.dynamics import (COUPLED, SINGLE, DriveConfig, coupled_drives, run_trajectory,
                             windowed_reflectance)
from pqmsim.errors import ConfigError, EstimationError
from pqmsim.optics import MziModel
from pqmsim.protocol import (COMPLEMENTARY, THETA, THETA_SHIFTED, CountingConfig, DetectionRecord,
                             estimate_coupled, estimate_single, replay_records, sample_counts,
                             simulate_experiment)

PERIOD = 100
ONE = (DriveConfig(PERIOD),)


def _rec(counts, k=0):
    return DetectionRecord(k, counts)


def test_zero_probability_zero_counts():
    rng = np.random.default_rng(1)
    cfg = CountingConfig(mean_photons_per_substep=1e6)
    for _ in range(20):
        assert sample_counts({(2, THETA): 0.0}, cfg, rng) == {(2, THETA): 0}


def test_counts_law_of_large_numbers():
    cfg = CountingConfig(mean_photons_per_substep=1e6, detector_efficiency=0.8)
    counts = sample_counts({(2, THETA): 0.3, (8, THETA): 0.6}, cfg, np.random.default_rng(3))
    assert counts[(2, THETA)] / 1e6 == pytest.approx(0.8 * 0.3, rel=0.01)
    assert counts[(8, THETA)] / 1e6 == pytest.approx(0.8 * 0.6, rel=0.01)


def test_counts_deterministic_given_seed():
    probs = {(2, THETA): 0.2, (8, THETA): 0.5, (2, THETA_SHIFTED): 0.1}
    cfg = CountingConfig(mean_photons_per_substep=500, dark_counts_per_substep=3)
    a = sample_counts(probs, cfg, np.random.default_rng(11))
    b = sample_counts(probs, cfg, np.random.default_rng(11))
    assert a == b


def test_single_estimator_examples():
    assert estimate_single(_rec({(2, THETA): 0, (2, THETA_SHIFTED): 0, (8, THETA): 100})) == (0, 0)
    assert estimate_single(_rec({(2, THETA): 50, (2, THETA_SHIFTED): 50, (8, THETA): 0})) == (1, 0.5)
    with pytest.raises(EstimationError) as err:
        estimate_single(_rec({}, k=4))
    assert err.value.bin_index == 4


def test_coupled_estimator_examples():
    counts = {}
    for ch in (2, 8):
        counts.update({(ch, THETA): 30, (ch, THETA_SHIFTED): 20, (ch, COMPLEMENTARY): 50})
    e1, e2 = estimate_coupled(_rec(counts))
    assert e1 == e2 == (0.5, 0.2)
    counts = {(2, THETA): 5, (2, THETA_SHIFTED): 5, (8, THETA): 7, (8, THETA_SHIFTED): 1}
    e1, e2 = estimate_coupled(_rec(counts))
    assert e1[0] == 1.0 and e2[0] == 1.0


def test_record_validation():
    with pytest.raises(ConfigError):
        _rec({(3, THETA): 1})
    with pytest.raises(ConfigError):
        _rec({(2, THETA): -1})
    with pytest.raises(ConfigError):
        _rec({(2, THETA): 1.5})


@pytest.mark.parametrize("scenario, drives", [(SINGLE, ONE), (COUPLED, coupled_drives(PERIOD, 0.7))])
@pytest.mark.parametrize("m", [1, 30, 100])
def test_infinite_count_limit_is_reference(scenario, drives, m):
    ref = run_trajectory(scenario, drives, m, include_current=False)
    res = simulate_experiment(scenario, drives, m, counts="expected")
    assert res.records == []
    for a, b in ((ref.n_in, res.series.n_in), (ref.n_out, res.series.n_out), (ref.r, res.series.r)):
        assert np.max(np.abs(a - b)) < 1e-12


@pytest.mark.parametrize("scenario, drives", [(SINGLE, ONE), (COUPLED, coupled_drives(PERIOD, 0.5))])
def test_high_counts_track_reference(scenario, drives):
    ref = run_trajectory(scenario, drives, 30, include_current=False)
    res = simulate_experiment(scenario, drives, 30, counting=CountingConfig(1e7, seed=5))
    assert np.max(np.abs(res.series.n_in - ref.n_in)) < 0.002
    assert np.max(np.abs(res.series.n_out - ref.n_out)) < 0.002


def test_zero_photons_aborts():
    with pytest.raises(EstimationError) as err:
        simulate_experiment(SINGLE, ONE, 10, counting=CountingConfig(0.0))
    assert err.value.bin_index == 0


def test_zero_count_bins_are_redrawn():
    res = simulate_experiment(SINGLE, ONE, 10, counting=CountingConfig(3.0, seed=2))
    attempts = [r.attempts for r in res.records]
    assert max(attempts) > 1
    assert max(attempts) <= 4
    replay = replay_records(SINGLE, 10, res.records)
    assert replay == res.series


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32), st.floats(20, 2000), st.floats(0.3, 1.0), st.floats(0, 5),
       st.sampled_from([0.0, 0.02]), st.sampled_from([SINGLE, COUPLED]))
def test_consistency_and_feedback_closure(seed, photons, eta, dark, xi, scenario):
    period, m = 20, 6
    drives = (DriveConfig(period),) if scenario == SINGLE else coupled_drives(period, 0.9)
    cfg = CountingConfig(photons, eta, dark, xi, seed)
    models = {"MZI-M1": MziModel(0.9, 0.05, 0.02)}
    res = simulate_experiment(scenario, drives, m, counting=cfg, mzi_models=models)
    s = res.series
    if xi == 0:
        assert np.all(s.n_out <= s.n_in)
    # R follows the feedback law applied to the estimated inputs (crossed when coupled).
    feeds = [s.n_in[:, 0]] if scenario == SINGLE else [s.n_in[:, 1], s.n_in[:, 0]]
    for d, feed in enumerate(feeds):
        expected = windowed_reflectance(feed, m, include_current=False)
        assert np.max(np.abs(s.r[:, d] - expected)) <= 1e-12


def test_determinism_and_replay():
    cfg = CountingConfig(800, 0.9, 1.5, 0.01, seed=42)
    models = {"MZI-0": MziModel(0.95, 0.02, 0.05), "MZI-M2": MziModel(0.9, -0.1, 0.03)}
    drives = coupled_drives(PERIOD, 0.5)
    a = simulate_experiment(COUPLED, drives, 30, counting=cfg, mzi_models=models)
    b = simulate_experiment(COUPLED, drives, 30, counting=cfg, mzi_models=models)
    assert a.series == b.series
    assert [r.counts for r in a.records] == [r.counts for r in b.records]
    assert replay_records(COUPLED, 30, a.records) == a.series
    c = simulate_experiment(COUPLED, drives, 30, counting=CountingConfig(800, 0.9, 1.5, 0.01, seed=43),
                            mzi_models=models)
    assert c.series != a.series


def test_replay_causality():
    res = simulate_experiment(SINGLE, ONE, 30, counting=CountingConfig(2000, seed=9))
    records = res.records
    edited = list(records)
    rec = records[5]
    counts = dict(rec.counts)
    counts[(2, THETA)] += 500
    edited[5] = DetectionRecord(rec.bin, counts, rec.estimator_noise, rec.attempts)
    out = replay_records(SINGLE, 30, edited)
    assert np.array_equal(out.n_in[:5], res.series.n_in[:5])
    assert np.array_equal(out.r[:6], res.series.r[:6])
    assert out.n_in[5, 0] != res.series.n_in[5, 0]
    # bin 5 sits in the buffer for bins 6..35, then drops out
    assert np.all(out.r[6:36, 0] != res.series.r[6:36, 0])
    assert np.array_equal(out.r[36:], res.series.r[36:])


def test_estimator_noise_is_clamped():
    cfg = CountingConfig(1e4, estimator_noise_sigma=0.5, seed=1)
    s = simulate_experiment(SINGLE, ONE, 30, counting=cfg).series
    assert np.all((s.n_out >= 0) & (s.n_out <= 1))


def test_static_offsets_cancel_between_settings():
    # A detuned memristor MZI still gives n_in exactly in the expected limit.
    models = {"MZI-M1": MziModel(0.8, 0.2)}
    res = simulate_experiment(SINGLE, ONE, 30, mzi_models=models, counts="expected")
    ref = run_trajectory(SINGLE, ONE, 30, include_current=False)
    assert np.max(np.abs(res.series.n_in - ref.n_in)) < 1e-12


def test_table_row_curve_departs_from_ideal():
    models = {"MZI-0": MziModel(1.00, 0.03), "MZI-M1": MziModel(0.92, 0.09)}
    res = simulate_experiment(SINGLE, ONE, 30, mzi_models=models,
                              counting=CountingConfig(1e7, seed=0))
    ideal = simulate_experiment(SINGLE, ONE, 30, counts="expected").series
    s = res.series
    assert np.all(s.n_out <= s.n_in)
    diff = np.max(np.abs(s.n_out - ideal.n_out))
    assert 0.005 < diff < 0.2


def test_config_validation():
    with pytest.raises(ConfigError):
        CountingConfig(-1.0)
    with pytest.raises(ConfigError):
        CountingConfig(detector_efficiency=0.0)
    with pytest.raises(ConfigError):
        simulate_experiment(SINGLE, ONE, 30, mzi_models={"MZI-9": MziModel()})
    with pytest.raises(ConfigError):
        simulate_experiment(SINGLE, ONE, 30, counts="magic")
