"""Command-line front end.

Exit status: 0 on success, 1 on configuration/usage errors, 2 on runtime or
degenerate-data errors.  Every artifact gets a ``<output>.config`` echo of
the parameters that produced it.
"""

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import fileio
from .dynamics import COUPLED, SINGLE, DriveConfig, coupled_drives, run_trajectory
from .errors import ConfigError, ParseError, PqmError
from .fit import FitBounds, FitParameters, FitScenario, fit_parameters
from .hysteresis import COUPLED_RELATIONS, SINGLE_RELATIONS, diagnose, extract_steady_cycle
from .optics import MziModel
from .protocol import MZI_LABELS, CountingConfig, replay_records, simulate_experiment
from .sweep import FORM_FACTOR, SELF_INTERSECTION, sweep_map
from .triangulation import DEFAULT_TOLERANCE, ReferenceFrame, compute_radii, relocate


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _floats(text, count=None, what="values"):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse {what} {text!r}") from None
    if count is not None and len(vals) not in (count if isinstance(count, tuple) else (count,)):
        raise ConfigError(f"expected {count} comma-separated {what}, got {len(vals)}")
    return vals


def _mzi_arg(text):
    label, sep, rest = text.partition("=")
    if not sep or label not in MZI_LABELS:
        raise ConfigError(f"--mzi expects LABEL=V,OFFSET[,SIGMA] with LABEL in {', '.join(MZI_LABELS)}")
    vals = _floats(rest, (2, 3), "MZI parameters")
    return label, MziModel(*vals)


def _stem(path):
    p = Path(path)
    return p.with_suffix("")


# -- simulate -------------------------------------------------------------------

def _add_simulate_args(p, coupled):
    p.add_argument("--config", help="flat key = value run config; flags given explicitly override it")
    p.add_argument("--period", type=int, help="drive period in bins, M_osc (default 100)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--m", type=int, help="buffer length in bins")
    g.add_argument("--m-ratio", type=float, help="buffer length as a fraction of the period, T/T_osc")
    p.add_argument("--bins", type=int, help="number of bins (default M + 2 * period)")
    if coupled:
        p.add_argument("--phi", type=float, help="drive phase offset of device 2, radians")
    p.add_argument("--seed", type=int, help="RNG seed (default 0); always echoed to the config file")
    p.add_argument("--reference", action="store_true",
                   help="noise-free ideal dynamics instead of the count-level experiment")
    p.add_argument("--ideal", action="store_true", help="ideal interferometers (V=1, no offsets, no noise)")
    p.add_argument("--mzi", action="append", default=[], metavar="LABEL=V,OFFSET[,SIGMA]",
                   help="non-ideal interferometer model; repeatable")
    p.add_argument("--mean-photons", type=float, help="mean detected photons per measurement window")
    p.add_argument("--efficiency", type=float, help="detector efficiency in (0, 1]")
    p.add_argument("--dark", type=float, help="dark counts per measurement window")
    p.add_argument("--xi-sigma", type=float, help="additive Gaussian noise on the output estimate")
    p.add_argument("-o", "--output", help="CSV path (log, figure and config are written beside it)")
    p.add_argument("--no-plot", action="store_true", help="skip the figure")


def _run_config(args, scenario):
    if args.config:
        try:
            cfg = fileio.RunConfig.from_text(Path(args.config).read_text(encoding="utf-8"))
        except (ParseError, OSError) as exc:
            raise ConfigError(f"{args.config}: {exc}") from None
        if cfg.scenario != scenario:
            raise ConfigError(f"config is for scenario {cfg.scenario!r}, not {scenario!r}")
        kw = {f: getattr(cfg, f) for f in cfg.__dataclass_fields__}
        kw["n_bins"] = cfg.n_bins
    else:
        kw = {"scenario": scenario}
    period = args.period if args.period is not None else kw.get("period_bins", 100)
    kw["period_bins"] = period
    if args.m is not None:
        kw["m"] = args.m
    elif args.m_ratio is not None:
        if not 0 < args.m_ratio <= 1:
            raise ConfigError("--m-ratio must lie in (0, 1]")
        kw["m"] = max(1, int(round(args.m_ratio * period)))
    if args.bins is not None:
        kw["n_bins"] = args.bins
    elif not args.config or args.m is not None or args.m_ratio is not None or args.period is not None:
        kw["n_bins"] = 0
    if getattr(args, "phi", None) is not None:
        kw["phase_offset"] = args.phi
    for flag, key in (("seed", "seed"), ("mean_photons", "mean_photons_per_substep"),
                      ("efficiency", "detector_efficiency"), ("dark", "dark_counts_per_substep"),
                      ("xi_sigma", "estimator_noise_sigma")):
        if getattr(args, flag) is not None:
            kw[key] = getattr(args, flag)
    if args.reference:
        kw["mode"] = "reference"
    mzi = dict(kw.get("mzi", {}))
    for text in args.mzi:
        label, model = _mzi_arg(text)
        mzi[label] = model
    if args.ideal:
        mzi = {}
    kw["mzi"] = mzi
    default_out = f"simulate_{scenario}.csv"
    kw["output"] = args.output or kw.get("output") or default_out
    return fileio.RunConfig(**kw)


def _drives(cfg):
    if cfg.scenario == SINGLE:
        return (DriveConfig(cfg.period_bins, 0.0),)
    return coupled_drives(cfg.period_bins, cfg.phase_offset)


def cmd_simulate(args, scenario):
    cfg = _run_config(args, scenario)
    out = Path(cfg.output)
    drives = _drives(cfg)
    if cfg.mode == "reference":
        series = run_trajectory(cfg.scenario, drives, cfg.m, cfg.n_bins)
    else:
        res = simulate_experiment(cfg.scenario, drives, cfg.m, cfg.n_bins, cfg.counting(), cfg.mzi)
        series = res.series
        log_path = _stem(out).with_suffix(".jsonl")
        fileio.write_detection_log(log_path, res.header, res.records)
        fileio.write_config_echo(log_path, cfg.to_text())
    fileio.export_timeseries(series, out)
    fileio.write_config_echo(out, cfg.to_text())
    if not args.no_plot:
        rels = SINGLE_RELATIONS if scenario == SINGLE else COUPLED_RELATIONS
        title = f"M = {cfg.m}, M_osc = {cfg.period_bins}"
        if scenario == COUPLED:
            title += f", phi = {cfg.phase_offset:g} rad"
        fig = _stem(out).with_suffix(".png")
        from .plotting import plot_hysteresis
        plot_hysteresis(series, rels, cfg.period_bins, fig, m=cfg.m, title=title)
    print(f"wrote {out} ({len(series)} bins)")
    return 0


# -- sweep ----------------------------------------------------------------------

def _grid(text):
    try:
        a, b = text.lower().split("x")
        n_phi, n_t = int(a), int(b)
    except ValueError:
        raise ConfigError(f"--grid expects NPHIxNT, e.g. 60x60, got {text!r}") from None
    if n_phi < 1 or n_t < 1:
        raise ConfigError("grid dimensions must be positive")
    return n_phi, n_t


def cmd_sweep(args):
    n_phi, n_t = _grid(args.grid)
    phis = np.linspace(args.phi_min, args.phi_max, n_phi)
    t = np.linspace(args.t_min, args.t_max, n_t)
    metric = {"form-factor": FORM_FACTOR, "self-intersection": SELF_INTERSECTION}[args.metric]
    result = sweep_map(args.scenario, phis, t, metric, period_bins=args.period,
                       workers=args.workers, signed=args.signed_area)
    out = Path(args.output)
    out.write_text(fileio.sweep_to_csv(result), encoding="utf-8", newline="\n")
    json_path = _stem(out).with_suffix(".json")
    json_path.write_text(fileio.sweep_to_json(result), encoding="utf-8", newline="\n")
    echo = fileio.format_flat([
        ("schema_version", fileio.SCHEMA_VERSION), ("command", "sweep"), ("scenario", args.scenario),
        ("metric", metric), ("grid", f"{n_phi}x{n_t}"), ("phi_min", float(args.phi_min)),
        ("phi_max", float(args.phi_max)), ("t_min", float(args.t_min)), ("t_max", float(args.t_max)),
        ("period_bins", args.period), ("signed_area", bool(args.signed_area)),
        ("output", str(out)),
    ])
    fileio.write_config_echo(out, echo)
    if not args.no_plot:
        from .plotting import plot_sweep
        plot_sweep(result, _stem(out).with_suffix(".png"))
    for rel in result.relations:
        v, tr, ph = result.argmax(rel)
        print(f"{rel}: max {v:.4f} at t_ratio={tr:.4f}, phi={ph:.4f}")
    if result.degenerate:
        print(f"{len(result.degenerate)} degenerate cell(s) reported as NaN", file=sys.stderr)
    return 0


# -- analyze --------------------------------------------------------------------

def cmd_analyze(args):
    series = fileio.import_curve(args.curve)
    rels = args.relation or (SINGLE_RELATIONS if series.n_devices == 1 else COUPLED_RELATIONS)
    pairs = [("schema_version", fileio.SCHEMA_VERSION), ("source", str(args.curve)),
             ("period_bins", args.period)]
    curves = {}
    for rel in rels:
        curve = extract_steady_cycle(series, rel, args.period, args.m)
        d = diagnose(curve, args.pinch_tol)
        curves[rel] = (curve, d)
        pts = ";".join(f"{float(x)!r}:{float(y)!r}" for x, y in d.intersection_points)
        pairs += [(f"{rel}.form_factor", d.form_factor), (f"{rel}.area", d.area),
                  (f"{rel}.signed_area", d.signed_area), (f"{rel}.perimeter", d.perimeter),
                  (f"{rel}.self_intersecting", d.self_intersecting),
                  (f"{rel}.intersection_points", pts or "none"),
                  (f"{rel}.pinched_at_origin", d.pinched_at_origin)]
    report = fileio.format_flat(pairs)
    if args.output:
        out = Path(args.output)
        out.write_text(report, encoding="utf-8", newline="\n")
        fileio.write_config_echo(out, fileio.format_flat(pairs[:3] + [
            ("command", "analyze"), ("m", args.m or 0), ("pinch_tol", args.pinch_tol)]))
        if not args.no_plot:
            from .plotting import plot_curve
            for rel, (curve, d) in curves.items():
                plot_curve(curve.points, f"{_stem(out)}_{rel}.png", d, title=rel)
    sys.stdout.write(report)
    return 0


# -- fit --------------------------------------------------------------------------

def cmd_fit(args):
    labels = tuple(s.strip() for s in args.labels.split(","))
    targets = [fileio.import_curve(p) for p in args.targets]
    scenario = SINGLE if targets[0].n_devices == 1 else COUPLED
    if args.m is None and args.m_ratio is None:
        raise ConfigError("fit needs --m or --m-ratio, one per target")
    ms = ([int(v) for v in _floats(args.m, None, "buffer lengths")] if args.m is not None
          else [max(1, int(round(r * args.period))) for r in _floats(args.m_ratio, None, "ratios")])
    if len(ms) == 1:
        ms = ms * len(targets)
    if len(ms) != len(targets):
        raise ConfigError("give one buffer length per target (or a single shared one)")
    phis = _floats(args.phi, None, "phases") if args.phi else [0.0]
    if len(phis) == 1:
        phis = phis * len(targets)
    counting = CountingConfig(detector_efficiency=args.efficiency, dark_counts_per_substep=args.dark)
    scen = []
    for t, m, phi in zip(targets, ms, phis):
        drives = (DriveConfig(args.period),) if scenario == SINGLE else coupled_drives(args.period, phi)
        scen.append(FitScenario(scenario, drives, m, len(t), counting))
    v_lo, v_hi = _floats(args.v_bounds, 2, "visibility bounds")
    bounds = FitBounds((v_lo, v_hi), args.phase_bound)
    n = len(labels)
    init = FitParameters(labels, [args.v_init] * n, [0.0] * n)
    rep = fit_parameters(targets, scen, init, bounds, budget=args.budget, restarts=args.restarts,
                         seed=args.seed, workers=args.workers)
    pairs = [("schema_version", fileio.SCHEMA_VERSION), ("scenario", scenario),
             ("targets", ",".join(map(str, args.targets))), ("seed", args.seed),
             ("budget", args.budget), ("restarts", args.restarts),
             ("loss", rep.loss), ("initial_loss", rep.initial_loss),
             ("iterations", rep.iterations), ("converged", rep.converged)]
    for lab, (v, d) in rep.parameters.rounded(2).items():
        pairs += [(f"{lab}.visibility", v), (f"{lab}.static_phase_offset", d)]
    for i, r in enumerate(rep.residuals, start=1):
        pairs.append((f"residual.{i}", r))
    report = fileio.format_flat(pairs)
    if args.output:
        out = Path(args.output)
        out.write_text(report, encoding="utf-8", newline="\n")
        fileio.write_config_echo(out, fileio.format_flat(pairs[:6] + [
            ("labels", ",".join(labels)), ("v_bounds", args.v_bounds),
            ("phase_bound", args.phase_bound), ("period_bins", args.period)]))
    sys.stdout.write(report)
    return 0


# -- triangulate ----------------------------------------------------------------

def _frame_file(path):
    try:
        raw = fileio.parse_flat(Path(path).read_text(encoding="utf-8"))
    except (ParseError, OSError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return {k: v for k, (v, _) in raw.items()}


def cmd_triangulate(args):
    if args.frame:
        vals = _frame_file(args.frame)
        old = vals.get("old")
        new = vals.get("new")
        radii_text = vals.get("radii")
        tol = float(vals.get("tolerance", args.tolerance))
    else:
        old, new, radii_text, tol = args.old, args.new, args.radii, args.tolerance
    if new is None:
        raise ConfigError("need the new reference coordinates (--new or 'new' in the frame file)")
    new_pts = _floats(new, 6, "new reference coordinates")
    new_refs = [tuple(new_pts[i:i + 2]) for i in range(0, 6, 2)]
    if radii_text is not None:
        radii = _floats(radii_text, 3, "radii")
    elif old is not None:
        vals = _floats(old, 8, "old frame coordinates (x1,y1,x2,y2,x3,y3,xp,yp)")
        frame = ReferenceFrame([tuple(vals[i:i + 2]) for i in range(0, 6, 2)], tuple(vals[6:8]))
        radii = compute_radii(frame)
    else:
        raise ConfigError("need the old frame (--old, eight values) or --radii")
    x, y = relocate(new_refs, radii, tol)
    sys.stdout.write(fileio.format_flat([
        ("radii", ",".join(repr(float(r)) for r in radii)), ("x", x), ("y", y)]))
    return 0


# -- replay -----------------------------------------------------------------------

def cmd_replay(args):
    header, records = fileio.read_detection_log(args.log)
    series = replay_records(header["scenario"], int(header["m"]), records)
    out = Path(args.output) if args.output else _stem(Path(args.log)).with_name(
        _stem(Path(args.log)).name + "_replay.csv")
    fileio.export_timeseries(series, out)
    fileio.write_config_echo(out, fileio.format_flat([
        ("schema_version", fileio.SCHEMA_VERSION), ("command", "replay"), ("log", str(args.log)),
        ("scenario", header["scenario"]), ("m", int(header["m"])), ("seed", int(header.get("seed", 0))),
        ("output", str(out))]))
    print(f"wrote {out} ({len(series)} bins)")
    return 0


def build_parser():
    parser = _Parser(prog="pqmsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("simulate-single", help="single memristor run")
    _add_simulate_args(p, coupled=False)
    p = sub.add_parser("simulate-coupled", help="two memristors with crossed feedback")
    _add_simulate_args(p, coupled=True)

    p = sub.add_parser("sweep", help="form-factor / self-intersection map over (phi, T/T_osc)")
    p.add_argument("--scenario", choices=(SINGLE, COUPLED), default=COUPLED)
    p.add_argument("--metric", choices=("form-factor", "self-intersection"), default="form-factor")
    p.add_argument("--grid", default="60x60", help="NPHIxNT cells (default 60x60)")
    p.add_argument("--phi-min", type=float, default=0.0)
    p.add_argument("--phi-max", type=float, default=math.pi)
    p.add_argument("--t-min", type=float, default=0.01, help="smallest T/T_osc")
    p.add_argument("--t-max", type=float, default=1.0, help="largest T/T_osc")
    p.add_argument("--period", type=int, default=100, help="drive period in bins")
    p.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    p.add_argument("--signed-area", action="store_true",
                   help="plain shoelace area instead of summing the lobes of self-intersecting loops")
    p.add_argument("-o", "--output", default="sweep.csv")
    p.add_argument("--no-plot", action="store_true")

    p = sub.add_parser("analyze", help="diagnostics of the steady cycle in a time-series CSV")
    p.add_argument("curve", help="time-series CSV (bin,n_in_1,n_out_1,r_1[,...])")
    p.add_argument("--period", type=int, default=100, help="drive period in bins")
    p.add_argument("--m", type=int, help="buffer length; requires M + period rows")
    p.add_argument("--relation", action="append", choices=COUPLED_RELATIONS,
                   help="relation(s) to analyse (default: all available)")
    p.add_argument("--pinch-tol", type=float, default=1e-3)
    p.add_argument("-o", "--output", help="also write the report (and figures) here")
    p.add_argument("--no-plot", action="store_true")

    p = sub.add_parser("fit", help="fit MZI visibilities and static offsets to target curves")
    p.add_argument("targets", nargs="+", help="time-series CSV(s) to match")
    p.add_argument("--labels", default="MZI-0,MZI-M1", help="MZIs to fit, comma-separated")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--m", help="buffer length(s), comma-separated, one per target")
    g.add_argument("--m-ratio", help="T/T_osc value(s), comma-separated, one per target")
    p.add_argument("--phi", help="coupled drive phase offset(s), comma-separated")
    p.add_argument("--period", type=int, default=100)
    p.add_argument("--v-bounds", default="0.7,1.0", help="visibility bounds LO,HI")
    p.add_argument("--phase-bound", type=float, default=0.25, help="|static offset| bound, rad")
    p.add_argument("--v-init", type=float, default=0.9)
    p.add_argument("--efficiency", type=float, default=1.0)
    p.add_argument("--dark", type=float, default=0.0)
    p.add_argument("--budget", type=int, default=400, help="simplex iterations per start")
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-o", "--output")

    p = sub.add_parser("triangulate", help="relocate a point from three reference marks")
    p.add_argument("--old", help="x1,y1,x2,y2,x3,y3,xp,yp in the old frame")
    p.add_argument("--radii", help="r1,r2,r3 recorded earlier (instead of --old)")
    p.add_argument("--new", help="x1,y1,x2,y2,x3,y3 of the same marks in the new frame")
    p.add_argument("--frame", help="key = value file with old/new/radii/tolerance entries")
    p.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE,
                   help="allowed miss on any circle, micrometres")

    p = sub.add_parser("replay", help="rebuild a time series from a detection log")
    p.add_argument("log", help="JSON-lines detection log written by simulate-*")
    p.add_argument("-o", "--output")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise ConfigError("missing subcommand")
        handler = {
            "simulate-single": lambda a: cmd_simulate(a, SINGLE),
            "simulate-coupled": lambda a: cmd_simulate(a, COUPLED),
            "sweep": cmd_sweep,
            "analyze": cmd_analyze,
            "fit": cmd_fit,
            "triangulate": cmd_triangulate,
            "replay": cmd_replay,
        }[args.command]
        return handler(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except (PqmError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
