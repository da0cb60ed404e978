"""Recover per-MZI visibilities and static phase offsets from measured curves.

The forward model is the closed measurement loop in its infinite-count limit
(``counts="expected"``) with phase noise switched off; the loss is the summed
squared distance between simulated and target ``(n_in, n_out)`` points on the
same bin grid.  Minimisation uses a box-constrained Nelder-Mead simplex whose
trial points are projected onto the bounds, restarted from seeded random
points.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .optics import MziModel
from .protocol import MZI_LABELS, CountingConfig, simulate_experiment

DEFAULT_PHASE_BOUND = 0.25
DEFAULT_VISIBILITY_BOUNDS = (0.7, 1.0)
DEFAULT_RESTARTS = 3


@dataclass(frozen=True)
class FitScenario:
    """Everything the forward model needs besides the fitted MZI parameters."""

    scenario: str
    drives: tuple
    m: int
    n_bins: int = None
    counting: CountingConfig = field(default_factory=CountingConfig)
    fixed_models: dict = field(default_factory=dict)


@dataclass
class FitParameters:
    """Visibility and static phase offset for each fitted MZI, in ``labels`` order."""

    labels: tuple
    visibility: np.ndarray
    static_phase_offset: np.ndarray

    def __post_init__(self):
        self.labels = tuple(self.labels)
        unknown = set(self.labels) - set(MZI_LABELS)
        if unknown:
            raise ConfigError(f"unknown MZI label(s): {sorted(unknown)}")
        self.visibility = np.asarray(self.visibility, dtype=float).reshape(-1)
        self.static_phase_offset = np.asarray(self.static_phase_offset, dtype=float).reshape(-1)
        if not (len(self.labels) == len(self.visibility) == len(self.static_phase_offset)):
            raise ConfigError("parameter arrays do not match the label list")

    @classmethod
    def from_vector(cls, labels, vec):
        vec = np.asarray(vec, dtype=float)
        return cls(labels, vec[0::2], vec[1::2])

    def to_vector(self):
        out = np.empty(2 * len(self.labels))
        out[0::2] = self.visibility
        out[1::2] = self.static_phase_offset
        return out

    def models(self):
        return {lab: MziModel(float(v), float(d))
                for lab, v, d in zip(self.labels, self.visibility, self.static_phase_offset)}

    def rounded(self, digits=2):
        return {lab: (round(float(v), digits), round(float(d), digits))
                for lab, v, d in zip(self.labels, self.visibility, self.static_phase_offset)}


@dataclass(frozen=True)
class FitBounds:
    visibility: tuple = DEFAULT_VISIBILITY_BOUNDS
    phase: float = DEFAULT_PHASE_BOUND

    def arrays(self, n_mzi):
        lo = np.tile([self.visibility[0], -self.phase], n_mzi)
        hi = np.tile([self.visibility[1], self.phase], n_mzi)
        if np.any(lo > hi) or self.visibility[0] < 0 or self.visibility[1] > 1:
            raise ConfigError(f"empty or invalid feasible region: visibility {self.visibility}, phase +/-{self.phase}")
        return lo, hi


@dataclass
class FitReport:
    parameters: FitParameters
    loss: float
    initial_loss: float
    iterations: int
    converged: bool
    residuals: list
    history: list = field(default_factory=list)
    restart_losses: list = field(default_factory=list)


def simulate_target(params, scenario_cfg):
    models = dict(scenario_cfg.fixed_models)
    models.update(params.models())
    res = simulate_experiment(scenario_cfg.scenario, scenario_cfg.drives, scenario_cfg.m,
                              scenario_cfg.n_bins, scenario_cfg.counting, models, counts="expected")
    return res.series


def _residuals(sim, target):
    if sim.n_in.shape != target.n_in.shape or sim.n_out.shape != target.n_out.shape:
        raise ConfigError(
            f"target grid {target.n_in.shape} does not match simulated grid {sim.n_in.shape}")
    return float(np.sum((sim.n_in - target.n_in) ** 2) + np.sum((sim.n_out - target.n_out) ** 2))


def curve_loss(params, targets, scenarios):
    """Summed squared point distance over all target curves and bins."""
    if len(targets) != len(scenarios):
        raise ConfigError("need one scenario config per target curve")
    return math.fsum(_residuals(simulate_target(params, sc), t) for t, sc in zip(targets, scenarios))


class _Objective:
    def __init__(self, labels, targets, scenarios):
        self.labels = labels
        self.targets = targets
        self.scenarios = scenarios

    def __call__(self, vec):
        return curve_loss(FitParameters.from_vector(self.labels, vec), self.targets, self.scenarios)


def bounded_simplex(func, x0, lower, upper, budget, initial_step=0.1, ftol=1e-16, xtol=1e-10):
    """Nelder-Mead on a box. Every evaluated point is clipped into ``[lower, upper]``.

    Returns ``(x_best, f_best, iterations, converged, history)`` where
    ``history[i]`` is the best value after iteration ``i`` (non-increasing).
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    x0 = np.clip(np.asarray(x0, dtype=float), lower, upper)
    n = len(x0)
    f0 = func(x0)
    if budget <= 0:
        return x0, f0, 0, False, [f0]

    span = upper - lower
    simplex = [x0]
    for i in range(n):
        v = x0.copy()
        step = initial_step * (span[i] if span[i] > 0 else 1.0)
        # Step away from whichever bound is nearer.
        v[i] = v[i] + step if x0[i] + step <= upper[i] else v[i] - step
        simplex.append(np.clip(v, lower, upper))
    simplex = np.array(simplex)
    fvals = np.array([f0] + [func(v) for v in simplex[1:]])

    def project(v):
        return np.clip(v, lower, upper)

    history = []
    converged = False
    it = 0
    for it in range(1, budget + 1):
        order = np.argsort(fvals, kind="stable")
        simplex, fvals = simplex[order], fvals[order]
        if (fvals[-1] - fvals[0] <= ftol
                and np.max(np.abs(simplex[1:] - simplex[0])) <= xtol):
            converged = True
            history.append(float(fvals[0]))
            break
        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = project(centroid + (centroid - worst))
        fr = func(xr)
        if fr < fvals[0]:
            xe = project(centroid + 2.0 * (centroid - worst))
            fe = func(xe)
            simplex[-1], fvals[-1] = (xe, fe) if fe < fr else (xr, fr)
        elif fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
        else:
            if fr < fvals[-1]:
                xc = project(centroid + 0.5 * (xr - centroid))
            else:
                xc = project(centroid + 0.5 * (worst - centroid))
            fc = func(xc)
            if fc < min(fr, fvals[-1]):
                simplex[-1], fvals[-1] = xc, fc
            else:
                best = simplex[0]
                simplex[1:] = project(best + 0.5 * (simplex[1:] - best))
                fvals[1:] = [func(v) for v in simplex[1:]]
        history.append(float(np.min(fvals)))
    i_best = int(np.argmin(fvals))
    return simplex[i_best].copy(), float(fvals[i_best]), it, converged, history


def _run_restart(args):
    objective, x0, lo, hi, budget = args
    x, f, it, conv, hist = bounded_simplex(objective, x0, lo, hi, budget)
    # A simplex pressed against a bound can collapse and report convergence
    # early; rebuilding it at full size from the best vertex frees it.
    x2, f2, it2, conv, hist2 = bounded_simplex(objective, x, lo, hi, budget)
    if f2 <= f:
        x, f = x2, f2
    it += it2
    hist += [min(hist[-1], h) for h in hist2]
    return x, f, it, conv, hist


def fit_parameters(targets, scenarios, init, bounds=None, budget=400, restarts=DEFAULT_RESTARTS,
                   seed=0, workers=1):
    """Fit ``init.labels`` to the target series.

    Runs one simplex from ``init`` plus ``restarts`` more from seeded uniform
    points inside the bounds; the lowest loss wins, ties going to the earlier
    start.
    """
    bounds = bounds or FitBounds()
    labels = init.labels
    lo, hi = bounds.arrays(len(labels))
    if budget < 0:
        raise ConfigError("budget must be >= 0")
    objective = _Objective(labels, list(targets), list(scenarios))
    x_init = np.clip(init.to_vector(), lo, hi)
    initial_loss = objective(x_init)
    if budget == 0:
        params = FitParameters.from_vector(labels, x_init)
        return FitReport(params, initial_loss, initial_loss, 0, False,
                         _per_curve(params, targets, scenarios), [initial_loss], [initial_loss])

    rng = np.random.default_rng(seed)
    starts = [x_init] + [lo + rng.random(len(lo)) * (hi - lo) for _ in range(restarts)]
    jobs = [(objective, s, lo, hi, budget) for s in starts]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_restart, jobs))
    else:
        results = [_run_restart(j) for j in jobs]

    losses = [r[1] for r in results]
    best = min(range(len(results)), key=lambda i: (losses[i], i))
    x, f, _, conv, _ = results[best]
    # Report the best-so-far sequence across restarts, run in start order.
    history = [initial_loss]
    for r in results:
        for h in r[4]:
            history.append(min(history[-1], h))
    params = FitParameters.from_vector(labels, x)
    return FitReport(params, f, initial_loss, sum(r[2] for r in results), conv,
                     _per_curve(params, targets, scenarios), history, losses)


def _per_curve(params, targets, scenarios):
    return [_residuals(simulate_target(params, sc), t) for t, sc in zip(targets, scenarios)]
