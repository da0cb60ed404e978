"""Simulator for photonic quantum memristors, alone and in crossed-feedback pairs."""

from .dynamics import (COUPLED, SINGLE, DriveConfig, MemristorState, TimeSeries, coupled_drives,
                       run_trajectory, step_coupled, step_single)
from .errors import (ConfigError, DegenerateCurveError, DomainError, EstimationError,
                     InconsistentRadiiError, InsufficientDataError, ParseError, PqmError,
                     SingularSystemError, TruncatedLogError)
from .fit import FitBounds, FitParameters, FitScenario, fit_parameters
from .hysteresis import (HysteresisCurve, detect_pinch, detect_self_intersection, diagnose,
                         extract_steady_cycle, form_factor)
from .optics import (IDEAL_MZI, DualRailState, MziModel, apply_memristor_channel,
                     effective_reflectance, ideal_reflectance)
from .protocol import CountingConfig, replay_records, simulate_experiment
from .sweep import sweep_map
from .triangulation import ReferenceFrame, compute_radii, relocate

__version__ = "0.1.0"
