"""Dual-rail Mach-Zehnder channel: phase/reflectance maps and the memristor map.

A single photon sits in path modes A and B.  The interferometer acts on
mode B and an empty auxiliary mode C; tracing out C leaves the output
state whose mode-B population is the memristor output.
"""

import math
from dataclasses import dataclass

from .errors import ConfigError, DomainError

NORM_TOL = 1e-12


@dataclass(frozen=True)
class DualRailState:
    alpha: complex
    beta: complex

    def __post_init__(self):
        norm = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if not math.isfinite(norm) or abs(norm - 1.0) > NORM_TOL:
            raise DomainError(f"dual-rail state not normalized: |a|^2+|b|^2 = {norm!r}")

    @classmethod
    def from_input_population(cls, n_in):
        """Real-amplitude state with ``|beta|^2 = n_in``."""
        if not 0.0 <= n_in <= 1.0:
            raise DomainError(f"input population {n_in!r} outside [0, 1]")
        return cls(complex(math.sqrt(1.0 - n_in)), complex(math.sqrt(n_in)))

    @property
    def n_in(self):
        return abs(self.beta) ** 2


@dataclass(frozen=True)
class MziModel:
    """Non-ideal interferometer: fringe visibility, static phase offset, phase-noise scale."""

    visibility: float = 1.0
    static_phase_offset: float = 0.0
    phase_noise_sigma: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.visibility <= 1.0:
            raise ConfigError(f"visibility {self.visibility!r} outside [0, 1]")
        if not math.isfinite(self.static_phase_offset):
            raise ConfigError("static phase offset must be finite")
        if not (self.phase_noise_sigma >= 0.0 and math.isfinite(self.phase_noise_sigma)):
            raise ConfigError(f"phase noise sigma {self.phase_noise_sigma!r} must be >= 0")

    @property
    def is_ideal(self):
        return (self.visibility == 1.0 and self.static_phase_offset == 0.0
                and self.phase_noise_sigma == 0.0)


IDEAL_MZI = MziModel()


@dataclass(frozen=True)
class ChannelOutput:
    p_A: float
    p_B: float
    p_C: float
    coherence: complex
    reflectance: float

    @property
    def n_out(self):
        return self.p_B


def ideal_reflectance(phase):
    if not math.isfinite(phase):
        raise DomainError(f"phase must be finite, got {phase!r}")
    return math.sin(0.5 * phase) ** 2


def phase_for_reflectance(r):
    """Inverse of :func:`ideal_reflectance` on [0, pi]."""
    if not (0.0 <= r <= 1.0):
        raise DomainError(f"reflectance {r!r} outside [0, 1]")
    return 2.0 * math.asin(math.sqrt(r))


def clamp_unit(r):
    return min(1.0, max(0.0, r))


def effective_reflectance(model, phase_theo, noise_draw=0.0):
    """Reflectance actually realised by a non-ideal MZI.

    ``noise_draw`` is the stochastic phase error for this setting; the caller
    draws it so the function stays pure.
    """
    phase_real = phase_theo + model.static_phase_offset + noise_draw
    return 0.5 * (1.0 - model.visibility * math.cos(phase_real))


def apply_memristor_channel(state, r):
    if not (0.0 <= r <= 1.0):
        raise DomainError(f"reflectance {r!r} outside [0, 1]")
    pa = abs(state.alpha) ** 2
    pb_in = abs(state.beta) ** 2
    t = math.sqrt(1.0 - r)
    return ChannelOutput(
        p_A=pa,
        p_B=pb_in * (1.0 - r),
        p_C=pb_in * r,
        coherence=state.alpha * state.beta.conjugate() * t,
        reflectance=r,
    )
