"""Form-factor and self-intersection maps over (phase offset, memory ratio) grids."""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import COUPLED, SINGLE, DriveConfig, coupled_drives, run_trajectory
from .errors import ConfigError, DegenerateCurveError
from .hysteresis import (COUPLED_RELATIONS, SINGLE_RELATIONS, detect_self_intersection,
                         extract_steady_cycle, form_factor)

FORM_FACTOR = "form_factor"
SELF_INTERSECTION = "self_intersection"
METRICS = (FORM_FACTOR, SELF_INTERSECTION)

DEFAULT_PERIOD = 100
DEFAULT_GRID = 60
PHI_RANGE = (0.0, math.pi)
T_RATIO_RANGE = (0.01, 1.0)


def default_axes(n_phi=DEFAULT_GRID, n_t=DEFAULT_GRID):
    return np.linspace(*PHI_RANGE, n_phi), np.linspace(*T_RATIO_RANGE, n_t)


def buffer_length(t_ratio, period_bins=DEFAULT_PERIOD):
    """Memory ratio T/T_osc -> integer buffer length, at least one bin."""
    return max(1, int(round(t_ratio * period_bins)))


@dataclass
class SweepResult:
    scenario: str
    metric: str
    phis: np.ndarray
    t_ratios: np.ndarray
    # relation -> array of shape (len(t_ratios), len(phis))
    values: dict
    degenerate: list = field(default_factory=list)
    period_bins: int = DEFAULT_PERIOD

    @property
    def relations(self):
        return tuple(self.values)

    def argmax(self, relation):
        """``(value, t_ratio, phi)`` at the largest finite entry."""
        grid = self.values[relation]
        flat = int(np.nanargmax(grid))
        it, ip = np.unravel_index(flat, grid.shape)
        return float(grid[it, ip]), float(self.t_ratios[it]), float(self.phis[ip])


def relations_for(scenario):
    return SINGLE_RELATIONS if scenario == SINGLE else COUPLED_RELATIONS


def evaluate_cell(scenario, phi, t_ratio, metric, period_bins=DEFAULT_PERIOD,
                  relations=None, include_current=True, signed=False):
    """Metric per relation for one grid cell. Degenerate curves give NaN."""
    m = buffer_length(t_ratio, period_bins)
    if scenario == SINGLE:
        drives = (DriveConfig(period_bins, phi),)
    else:
        drives = coupled_drives(period_bins, phi)
    series = run_trajectory(scenario, drives, m, include_current=include_current)
    out = {}
    for rel in relations or relations_for(scenario):
        curve = extract_steady_cycle(series, rel, period_bins, m)
        if metric == FORM_FACTOR:
            try:
                out[rel] = form_factor(curve, signed=signed)
            except DegenerateCurveError:
                out[rel] = math.nan
        else:
            out[rel] = 1.0 if detect_self_intersection(curve)[0] else 0.0
    return out


def _cell_job(args):
    return evaluate_cell(*args)


def sweep_map(scenario, phis=None, t_ratios=None, metric=FORM_FACTOR, relations=None,
              period_bins=DEFAULT_PERIOD, workers=1, include_current=True, signed=False):
    """Evaluate ``metric`` on every (t_ratio, phi) cell using noise-free dynamics.

    Cells are independent; with ``workers > 1`` they run in a process pool and
    are written back by cell index, so the result does not depend on
    completion order.
    """
    if scenario not in (SINGLE, COUPLED):
        raise ConfigError(f"unknown scenario {scenario!r}")
    if metric not in METRICS:
        raise ConfigError(f"unknown metric {metric!r}; choose from {METRICS}")
    d_phi, d_t = default_axes()
    phis = d_phi if phis is None else np.asarray(phis, dtype=float)
    t_ratios = d_t if t_ratios is None else np.asarray(t_ratios, dtype=float)
    if phis.size == 0 or t_ratios.size == 0:
        raise ConfigError("sweep grid is empty")
    if np.any(t_ratios <= 0):
        raise ConfigError("memory ratios must be positive")
    relations = tuple(relations or relations_for(scenario))

    jobs = [(scenario, float(p), float(t), metric, period_bins, relations, include_current, signed)
            for t in t_ratios for p in phis]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_cell_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        cells = [_cell_job(j) for j in jobs]

    shape = (len(t_ratios), len(phis))
    values = {rel: np.empty(shape) for rel in relations}
    degenerate = []
    for idx, cell in enumerate(cells):
        it, ip = divmod(idx, len(phis))
        for rel, v in cell.items():
            values[rel][it, ip] = v
            if math.isnan(v):
                degenerate.append((rel, float(t_ratios[it]), float(phis[ip])))
    return SweepResult(scenario, metric, phis, t_ratios, values, degenerate, period_bins)
