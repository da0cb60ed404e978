"""Count-level simulation of the per-bin measurement loop.

Chip layout (five interferometers): MZI-0, MZI-1, MZI-2 prepare the input,
MZI-M1 and MZI-M2 are the memristors (or, in the single-device run, the
memristor plus a fixed router).  Two detectors watch output channels 2 and 8.

Each phase setting of the memristor is applied twice per bin: once at the
feedback value ``theta`` (detector sees the reflected fraction ``R``) and once
at the complementary setting, which adds pi to the MZI phase so the detector
sees ``1 - R``.  The coupled run adds a third window in which the
modulators are complemented and the memristors route everything to the
detectors, which gives the per-device normalisation.

Random draw order within a bin (one ``numpy.random.Generator`` per run):

1. phase-noise normals for the modulation MZIs, in layout order
   (MZI-0, MZI-1, MZI-2), each MZI's settings in the order they are applied;
2. phase-noise normals for the memristor MZIs (MZI-M1 then MZI-M2), same rule;
3. Poisson counts in window order, channel 2 before channel 8 in each window;
4. estimator-noise normals, device 1 then device 2.

Step 3 is repeated (up to :data:`MAX_REDRAWS` extra times) if a device ends
up with zero total counts.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (COUPLED, SINGLE, MemristorState, TimeSeries, check_run_length,
                       default_n_bins, drive_value, normalize_drives)
from .errors import ConfigError, EstimationError
from .optics import IDEAL_MZI, MziModel, clamp_unit, effective_reflectance, phase_for_reflectance

MZI_LABELS = ("MZI-0", "MZI-1", "MZI-2", "MZI-M1", "MZI-M2")

THETA = "theta"
THETA_SHIFTED = "theta+pi/2"
COMPLEMENTARY = "complementary"
SETTINGS = (THETA, THETA_SHIFTED, COMPLEMENTARY)
CHANNELS = (2, 8)

SINGLE_WINDOWS = (THETA, THETA_SHIFTED)
COUPLED_WINDOWS = (THETA, THETA_SHIFTED, COMPLEMENTARY)

MAX_REDRAWS = 3
DEFAULT_MEAN_PHOTONS = 20000.0


@dataclass(frozen=True)
class CountingConfig:
    mean_photons_per_substep: float = DEFAULT_MEAN_PHOTONS
    detector_efficiency: float = 1.0
    dark_counts_per_substep: float = 0.0
    estimator_noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("mean_photons_per_substep", "dark_counts_per_substep", "estimator_noise_sigma"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0.0):
                raise ConfigError(f"{name} must be finite and >= 0, got {v!r}")
        if not (0.0 < self.detector_efficiency <= 1.0):
            raise ConfigError(f"detector efficiency must lie in (0, 1], got {self.detector_efficiency!r}")
        if int(self.seed) != self.seed:
            raise ConfigError("seed must be an integer")


@dataclass
class DetectionRecord:
    """Counts of one bin keyed by ``(channel, setting)``."""

    bin: int
    counts: dict
    estimator_noise: tuple = (0.0,)
    attempts: int = 1

    def __post_init__(self):
        for key, n in self.counts.items():
            channel, setting = key
            if channel not in CHANNELS or setting not in SETTINGS:
                raise ConfigError(f"unknown count key {key!r}")
            if int(n) != n or n < 0:
                raise ConfigError(f"count {n!r} for {key!r} is not a non-negative integer")

    def __getitem__(self, key):
        return self.counts.get(key, 0)


def sample_counts(probabilities, cfg, rng):
    """Poisson counts with mean ``eta * p * mean_photons + dark`` per key, in key order."""
    counts = {}
    for key, p in probabilities.items():
        if not (-1e-12 <= p <= 1.0 + 1e-12):
            raise ConfigError(f"probability {p!r} for {key!r} outside [0, 1]")
        lam = cfg.detector_efficiency * max(p, 0.0) * cfg.mean_photons_per_substep
        counts[key] = int(rng.poisson(lam + cfg.dark_counts_per_substep))
    return counts


def expected_counts(probabilities, cfg):
    """Infinite-count stand-in for :func:`sample_counts`: the Poisson means themselves."""
    return {key: cfg.detector_efficiency * max(p, 0.0) * cfg.mean_photons_per_substep
            + cfg.dark_counts_per_substep
            for key, p in probabilities.items()}


def _ratio(num, total, bin_index):
    if total <= 0:
        raise EstimationError("zero total counts", bin_index)
    return num / total


def estimate_single(record):
    a = record[(2, THETA)]
    b = record[(2, THETA_SHIFTED)]
    total = a + b + record[(8, THETA)]
    return _ratio(a + b, total, record.bin), _ratio(b, total, record.bin)


def estimate_coupled(record):
    out = []
    for ch in CHANNELS:
        a = record[(ch, THETA)]
        b = record[(ch, THETA_SHIFTED)]
        total = a + b + record[(ch, COMPLEMENTARY)]
        out.append((_ratio(a + b, total, record.bin), _ratio(b, total, record.bin)))
    return tuple(out)


def resolve_models(mzi_models):
    models = dict(mzi_models or {})
    unknown = set(models) - set(MZI_LABELS)
    if unknown:
        raise ConfigError(f"unknown MZI label(s): {sorted(unknown)}")
    for label, m in models.items():
        if not isinstance(m, MziModel):
            raise ConfigError(f"{label}: expected MziModel, got {type(m).__name__}")
    return {label: models.get(label, IDEAL_MZI) for label in MZI_LABELS}


class _PhaseSetter:
    """Applies a target transmission to an MZI, consuming one noise draw per setting."""

    def __init__(self, models, rng):
        self.models = models
        self.rng = rng

    def set(self, label, target, complement=False):
        model = self.models[label]
        noise = model.phase_noise_sigma * self.rng.standard_normal()
        phase = phase_for_reflectance(clamp_unit(target))
        if complement:
            phase += math.pi
        return effective_reflectance(model, phase, noise)


def single_probabilities(x_target, r_theo, setter):
    x = setter.set("MZI-0", x_target)
    up = setter.set("MZI-1", 1.0)
    down = setter.set("MZI-2", 1.0)
    r_theta = setter.set("MZI-M1", r_theo)
    r_shift = setter.set("MZI-M1", r_theo, complement=True)
    to8 = setter.set("MZI-M2", 1.0)
    lower = (1.0 - x) * down * to8
    return {
        (2, THETA): x * up * r_theta,
        (8, THETA): lower,
        (2, THETA_SHIFTED): x * up * r_shift,
        (8, THETA_SHIFTED): lower,
    }


def coupled_probabilities(x_targets, r_theo, setter):
    split = setter.set("MZI-0", 0.5)
    x1 = setter.set("MZI-1", x_targets[0])
    x1c = setter.set("MZI-1", x_targets[0], complement=True)
    x2 = setter.set("MZI-2", x_targets[1])
    x2c = setter.set("MZI-2", x_targets[1], complement=True)
    r1 = setter.set("MZI-M1", r_theo[0])
    r1s = setter.set("MZI-M1", r_theo[0], complement=True)
    f1 = setter.set("MZI-M1", 1.0)
    r2 = setter.set("MZI-M2", r_theo[1])
    r2s = setter.set("MZI-M2", r_theo[1], complement=True)
    f2 = setter.set("MZI-M2", 1.0)
    s1, s2 = split, 1.0 - split
    return {
        (2, THETA): s1 * x1 * r1,
        (8, THETA): s2 * x2 * r2,
        (2, THETA_SHIFTED): s1 * x1 * r1s,
        (8, THETA_SHIFTED): s2 * x2 * r2s,
        (2, COMPLEMENTARY): s1 * x1c * f1,
        (8, COMPLEMENTARY): s2 * x2c * f2,
    }


def _estimate(scenario, record):
    if scenario == SINGLE:
        return (estimate_single(record),)
    return estimate_coupled(record)


def _apply_estimator_noise(estimates, xi):
    return tuple((n_in, clamp_unit(n_out + e)) for (n_in, n_out), e in zip(estimates, xi))


def _feed(scenario, states, n_ins):
    if scenario == SINGLE:
        return [states[0].fed(n_ins[0])]
    return [states[0].fed(n_ins[1]), states[1].fed(n_ins[0])]


@dataclass
class ExperimentResult:
    series: TimeSeries
    records: list
    header: dict = field(default_factory=dict)


def simulate_experiment(scenario, drives, m, n_bins=None, counting=None, mzi_models=None,
                        counts="poisson"):
    """Run the closed measurement loop.

    ``counts="poisson"`` samples shot noise; ``counts="expected"`` replaces
    every count by its Poisson mean, giving the infinite-count limit (still
    subject to phase noise if any model has ``phase_noise_sigma > 0``).
    The feedback buffers are always fed with the *estimated* inputs.
    """
    drives = normalize_drives(scenario, drives)
    if int(m) != m or m < 1:
        raise ConfigError(f"buffer length M must be a positive integer, got {m!r}")
    m = int(m)
    if n_bins is None:
        n_bins = default_n_bins(m, drives)
    check_run_length(m, drives, n_bins)
    if counts not in ("poisson", "expected"):
        raise ConfigError(f"counts mode must be 'poisson' or 'expected', got {counts!r}")
    counting = counting or CountingConfig()
    models = resolve_models(mzi_models)
    rng = np.random.default_rng(counting.seed)
    setter = _PhaseSetter(models, rng)
    n_dev = len(drives)

    states = [MemristorState.fresh(m) for _ in range(n_dev)]
    n_in = np.zeros((n_bins, n_dev))
    n_out = np.zeros_like(n_in)
    r = np.zeros_like(n_in)
    records = []
    for k in range(n_bins):
        targets = [drive_value(k, d) for d in drives]
        r_theo = [s.reflectance for s in states]
        if scenario == SINGLE:
            probs = single_probabilities(targets[0], r_theo[0], setter)
        else:
            probs = coupled_probabilities(targets, r_theo, setter)

        attempts = 0
        while True:
            attempts += 1
            if counts == "poisson":
                record = DetectionRecord(k, sample_counts(probs, counting, rng), attempts=attempts)
            else:
                record = _FloatRecord(k, expected_counts(probs, counting))
            try:
                est = _estimate(scenario, record)
                break
            except EstimationError:
                if attempts > MAX_REDRAWS:
                    raise EstimationError(
                        f"bin {k}: zero total counts after {attempts} draws; "
                        "check mean_photons_per_substep and the modulation settings", k)

        xi = tuple(counting.estimator_noise_sigma * rng.standard_normal() for _ in range(n_dev))
        est = _apply_estimator_noise(est, xi)
        if counts == "poisson":
            record.estimator_noise = xi
            records.append(record)

        for i, (a, b) in enumerate(est):
            n_in[k, i] = a
            n_out[k, i] = b
            r[k, i] = r_theo[i]
        states = _feed(scenario, states, [e[0] for e in est])

    header = {
        "type": "header",
        "scenario": scenario,
        "m": m,
        "n_bins": n_bins,
        "period_bins": [d.period_bins for d in drives],
        "phase_offset": [d.phase_offset for d in drives],
        "seed": int(counting.seed),
    }
    return ExperimentResult(TimeSeries(np.arange(n_bins), n_in, n_out, r), records, header)


class _FloatRecord:
    """Record-like view over non-integer expected counts."""

    def __init__(self, bin_index, counts):
        self.bin = bin_index
        self.counts = counts

    def __getitem__(self, key):
        return self.counts.get(key, 0.0)


def replay_records(scenario, m, records, n_bins=None):
    """Rebuild the time series from stored counts: estimators and feedback only, no sampling."""
    if scenario not in (SINGLE, COUPLED):
        raise ConfigError(f"unknown scenario {scenario!r}")
    if not records:
        raise EstimationError("detection log contains no bins")
    n_dev = 1 if scenario == SINGLE else 2
    states = [MemristorState.fresh(m) for _ in range(n_dev)]
    rows = len(records)
    n_in = np.zeros((rows, n_dev))
    n_out = np.zeros_like(n_in)
    r = np.zeros_like(n_in)
    bins = []
    for i, rec in enumerate(records):
        r_theo = [s.reflectance for s in states]
        xi = tuple(rec.estimator_noise) + (0.0,) * (n_dev - len(rec.estimator_noise))
        est = _apply_estimator_noise(_estimate(scenario, rec), xi[:n_dev])
        for d, (a, b) in enumerate(est):
            n_in[i, d] = a
            n_out[i, d] = b
            r[i, d] = r_theo[d]
        states = _feed(scenario, states, [e[0] for e in est])
        bins.append(rec.bin)
    return TimeSeries(np.asarray(bins), n_in, n_out, r)
