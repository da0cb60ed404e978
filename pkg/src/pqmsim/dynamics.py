"""Drive signals and discrete feedback laws for single and crossed-feedback memristors.

The feedback law averages the last ``M`` input populations::

    R(t_k) = 1/2 + (1/M) * sum_j (N_in(t_j) - 1/2)

Two orderings of that window are supported:

``include_current=True``
    The window ends at the current bin ``k`` (the law as usually written).
    Used for the noise-free reference dynamics and the parameter sweeps.
``include_current=False``
    The window ends at ``k - 1``: the device is measured with the current
    ``R`` and only then does the new input enter the buffer.  This is the
    only causal choice when the input itself comes from the measurement, so
    the count-level protocol always runs this way.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError
from .optics import clamp_unit

SINGLE = "single"
COUPLED = "coupled"
SCENARIOS = (SINGLE, COUPLED)


@dataclass(frozen=True)
class DriveConfig:
    period_bins: int = 100
    phase_offset: float = 0.0

    def __post_init__(self):
        if int(self.period_bins) != self.period_bins or self.period_bins < 2:
            raise ConfigError(f"period_bins must be an integer >= 2, got {self.period_bins!r}")
        if not math.isfinite(self.phase_offset):
            raise ConfigError("drive phase offset must be finite")


def drive_value(bin_index, cfg):
    return math.sin(math.pi * bin_index / cfg.period_bins + cfg.phase_offset) ** 2


def drive_array(n_bins, cfg):
    k = np.arange(n_bins, dtype=float)
    return np.sin(np.pi * k / cfg.period_bins + cfg.phase_offset) ** 2


@dataclass(frozen=True)
class FeedbackBuffer:
    """Fixed-length window of the most recent inputs, oldest first."""

    capacity: int
    entries: tuple = None

    def __post_init__(self):
        if int(self.capacity) != self.capacity or self.capacity < 1:
            raise ConfigError(f"buffer capacity must be a positive integer, got {self.capacity!r}")
        if self.entries is None:
            object.__setattr__(self, "entries", (0.0,) * self.capacity)
        elif len(self.entries) != self.capacity:
            raise ConfigError("buffer length does not match its capacity")

    def push(self, value):
        return FeedbackBuffer(self.capacity, self.entries[1:] + (float(value),))


def update_reflectance(buffer):
    m = buffer.capacity
    return clamp_unit(0.5 + math.fsum(e - 0.5 for e in buffer.entries) / m)


@dataclass(frozen=True)
class MemristorState:
    buffer: FeedbackBuffer
    reflectance: float = field(default=None)

    def __post_init__(self):
        if self.reflectance is None:
            object.__setattr__(self, "reflectance", update_reflectance(self.buffer))

    @classmethod
    def fresh(cls, m):
        """All-zero buffer, hence R = 0."""
        return cls(FeedbackBuffer(m))

    def fed(self, value):
        return MemristorState(self.buffer.push(value))


def step_single(state, x, include_current=True):
    """Advance one bin. Returns ``(new_state, output)``."""
    if include_current:
        state = state.fed(x)
        return state, (1.0 - state.reflectance) * x
    y = (1.0 - state.reflectance) * x
    return state.fed(x), y


def step_coupled(state1, state2, x1, x2, include_current=True):
    """Crossed feedback: device 1 remembers device 2's inputs and vice versa.

    Returns ``(new_state1, new_state2, y1, y2)``.
    """
    if include_current:
        state1, state2 = state1.fed(x2), state2.fed(x1)
        return state1, state2, (1.0 - state1.reflectance) * x1, (1.0 - state2.reflectance) * x2
    y1 = (1.0 - state1.reflectance) * x1
    y2 = (1.0 - state2.reflectance) * x2
    return state1.fed(x2), state2.fed(x1), y1, y2


@dataclass
class TimeSeries:
    """Per-bin record. Arrays have shape ``(n_bins, n_devices)``."""

    bins: np.ndarray
    n_in: np.ndarray
    n_out: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        self.bins = np.asarray(self.bins, dtype=np.int64).reshape(-1)
        n = len(self.bins)
        for name in ("n_in", "n_out", "r"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim == 1:
                arr = arr.reshape(n, -1) if n else arr.reshape(0, 1)
            if arr.shape[0] != n:
                raise ConfigError(f"{name} has {arr.shape[0]} rows, expected {n}")
            setattr(self, name, arr)
        if n > 1 and np.any(np.diff(self.bins) <= 0):
            raise ConfigError("bin indices must be strictly increasing")

    @property
    def n_devices(self):
        return self.n_in.shape[1]

    def __len__(self):
        return len(self.bins)

    def __eq__(self, other):
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return (np.array_equal(self.bins, other.bins) and np.array_equal(self.n_in, other.n_in)
                and np.array_equal(self.n_out, other.n_out) and np.array_equal(self.r, other.r))


def default_n_bins(m, drives):
    return m + 2 * max(d.period_bins for d in drives)


def check_run_length(m, drives, n_bins):
    period = max(d.period_bins for d in drives)
    if n_bins < m + period:
        raise ConfigError(
            f"n_bins={n_bins} cannot hold one steady period after the buffer fills "
            f"(need at least M + period = {m + period})")


def normalize_drives(scenario, drives):
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}")
    if isinstance(drives, DriveConfig):
        drives = (drives,)
    drives = tuple(drives)
    want = 1 if scenario == SINGLE else 2
    if len(drives) != want:
        raise ConfigError(f"{scenario} scenario needs {want} drive config(s), got {len(drives)}")
    return drives


def coupled_drives(period_bins, phase_offset):
    """Device 1 unshifted, device 2 shifted by ``phase_offset``."""
    return (DriveConfig(period_bins, 0.0), DriveConfig(period_bins, phase_offset))


def windowed_reflectance(feed, m, include_current=True):
    """Vectorised feedback law over a known input sequence (zero-initialised buffer)."""
    n = len(feed)
    padded = np.concatenate([np.zeros(m), np.asarray(feed, dtype=float)]) - 0.5
    sums = sliding_window_view(padded, m).sum(axis=1)
    # sums[i] covers padded[i:i+m], i.e. inputs k-m+1..k for i = k + 1.
    window = sums[1:n + 1] if include_current else sums[:n]
    return np.clip(0.5 + window / m, 0.0, 1.0)


def run_trajectory(scenario, drives, m, n_bins=None, include_current=True):
    """Noise-free trajectory with ideal optics."""
    drives = normalize_drives(scenario, drives)
    if int(m) != m or m < 1:
        raise ConfigError(f"buffer length M must be a positive integer, got {m!r}")
    m = int(m)
    if n_bins is None:
        n_bins = default_n_bins(m, drives)
    check_run_length(m, drives, n_bins)
    xs = [drive_array(n_bins, d) for d in drives]
    if scenario == SINGLE:
        feeds = xs
    else:
        feeds = [xs[1], xs[0]]
    rs = [windowed_reflectance(f, m, include_current) for f in feeds]
    ys = [(1.0 - r) * x for r, x in zip(rs, xs)]
    return TimeSeries(np.arange(n_bins), np.column_stack(xs), np.column_stack(ys), np.column_stack(rs))


def run_trajectory_stepwise(scenario, drives, m, n_bins=None, include_current=True):
    """Same as :func:`run_trajectory` but through the per-bin step functions."""
    drives = normalize_drives(scenario, drives)
    if n_bins is None:
        n_bins = default_n_bins(m, drives)
    check_run_length(m, drives, n_bins)
    states = [MemristorState.fresh(m) for _ in drives]
    n_in = np.zeros((n_bins, len(drives)))
    n_out = np.zeros_like(n_in)
    r = np.zeros_like(n_in)
    for k in range(n_bins):
        xs = [drive_value(k, d) for d in drives]
        if scenario == SINGLE:
            (old,) = states
            new, y = step_single(old, xs[0], include_current)
            r[k, 0] = new.reflectance if include_current else old.reflectance
            states = [new]
            n_out[k, 0] = y
        else:
            s1, s2 = states
            if not include_current:
                r[k] = (s1.reflectance, s2.reflectance)
            s1, s2, y1, y2 = step_coupled(s1, s2, xs[0], xs[1], include_current)
            if include_current:
                r[k] = (s1.reflectance, s2.reflectance)
            states = [s1, s2]
            n_out[k] = (y1, y2)
        n_in[k] = xs
    return TimeSeries(np.arange(n_bins), n_in, n_out, r)
