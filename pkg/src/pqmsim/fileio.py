"""On-disk formats.

* Time series CSV: header ``bin,n_in_1,n_out_1,r_1[,n_in_2,n_out_2,r_2]``,
  UTF-8, ``\\n`` line endings, floats written with ``repr`` so a read-back is
  bit-exact.
* Detection log: JSON lines.  The first line is a header object, then one
  object per bin with its counts keyed ``"<channel>|<setting>"``.
* Run config / reports: flat ``key = value`` text with a ``schema_version`` key.
* Sweep matrices: long-format CSV (one row per cell) and a plot-ready JSON.
"""

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .dynamics import COUPLED, SCENARIOS, SINGLE, TimeSeries
from .errors import ConfigError, ParseError, TruncatedLogError
from .optics import MziModel
from .protocol import MZI_LABELS, CountingConfig, DetectionRecord

SCHEMA_VERSION = 1
LOG_SCHEMA_VERSION = 1

SINGLE_COLUMNS = ("bin", "n_in_1", "n_out_1", "r_1")
COUPLED_COLUMNS = SINGLE_COLUMNS + ("n_in_2", "n_out_2", "r_2")


def _fmt(v):
    return repr(float(v))


# -- time series ---------------------------------------------------------------

def timeseries_to_csv(series):
    cols = SINGLE_COLUMNS if series.n_devices == 1 else COUPLED_COLUMNS
    lines = [",".join(cols)]
    for k in range(len(series)):
        row = [str(int(series.bins[k]))]
        for d in range(series.n_devices):
            row += [_fmt(series.n_in[k, d]), _fmt(series.n_out[k, d]), _fmt(series.r[k, d])]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def export_timeseries(series, path):
    Path(path).write_text(timeseries_to_csv(series), encoding="utf-8", newline="\n")


def parse_timeseries(text):
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ParseError("empty file: missing header", line=1)
    header = tuple(h.strip() for h in lines[0].split(","))
    if header == SINGLE_COLUMNS:
        n_dev = 1
    elif header == COUPLED_COLUMNS:
        n_dev = 2
    else:
        for col, (got, want) in enumerate(zip(header, COUPLED_COLUMNS), start=1):
            if got != want:
                raise ParseError(f"unexpected header field {got!r}, expected {want!r}", line=1, column=col)
        raise ParseError(f"header has {len(header)} fields; expected 4 or 7", line=1)
    ncol = len(header)
    bins, data = [], []
    for ln, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != ncol:
            raise ParseError(f"expected {ncol} fields, found {len(parts)}", line=ln,
                             column=min(len(parts), ncol) + 1)
        try:
            bins.append(int(parts[0]))
        except ValueError:
            raise ParseError(f"bin index {parts[0]!r} is not an integer", line=ln, column=1) from None
        row = []
        for col, p in enumerate(parts[1:], start=2):
            try:
                v = float(p)
            except ValueError:
                raise ParseError(f"value {p!r} is not a number", line=ln, column=col) from None
            if not math.isfinite(v):
                raise ParseError(f"non-finite value {p!r}", line=ln, column=col)
            row.append(v)
        data.append(row)
    arr = np.asarray(data, dtype=float).reshape(len(data), ncol - 1)
    n_in = arr[:, 0::3].reshape(-1, n_dev)
    n_out = arr[:, 1::3].reshape(-1, n_dev)
    r = arr[:, 2::3].reshape(-1, n_dev)
    try:
        return TimeSeries(np.asarray(bins, dtype=np.int64), n_in, n_out, r)
    except ConfigError as exc:
        raise ParseError(str(exc)) from None


def import_curve(path):
    """Read a time-series CSV back (the same schema :func:`export_timeseries` writes)."""
    return parse_timeseries(Path(path).read_text(encoding="utf-8"))


# -- detection log ---------------------------------------------------------------

def _count_key(channel, setting):
    return f"{channel}|{setting}"


def _parse_count_key(key):
    ch, _, setting = key.partition("|")
    return int(ch), setting


def log_lines(header, records):
    head = dict(header)
    head["schema_version"] = LOG_SCHEMA_VERSION
    out = [json.dumps(head, sort_keys=True)]
    for rec in records:
        out.append(json.dumps({
            "type": "bin",
            "bin": int(rec.bin),
            "attempts": int(rec.attempts),
            "counts": {_count_key(*k): int(v) for k, v in rec.counts.items()},
            "xi": [float(x) for x in rec.estimator_noise],
        }, sort_keys=True))
    return "\n".join(out) + "\n"


def write_detection_log(path, header, records):
    Path(path).write_text(log_lines(header, records), encoding="utf-8", newline="\n")


def read_detection_log(path):
    """Return ``(header, records)``; raise on empty or truncated logs."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ParseError("detection log is empty", line=1)
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad header: {exc.msg}", line=1, column=exc.colno) from None
    if header.get("type") != "header" or header.get("scenario") not in SCENARIOS:
        raise ParseError("first line is not a detection-log header", line=1)
    records = []
    last = None
    for ln, line in enumerate(lines[1:], start=2):
        is_last_line = ln == len(lines)
        try:
            obj = json.loads(line)
            rec = DetectionRecord(
                int(obj["bin"]),
                {_parse_count_key(k): int(v) for k, v in obj["counts"].items()},
                tuple(float(x) for x in obj.get("xi", ())),
                int(obj.get("attempts", 1)),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            if is_last_line:
                raise TruncatedLogError(f"incomplete record on line {ln}", last) from None
            raise ParseError(f"bad bin record: {exc}", line=ln) from None
        records.append(rec)
        last = rec.bin
    if not records:
        raise TruncatedLogError("detection log has a header but no bins", None)
    declared = header.get("n_bins")
    if declared is not None and len(records) < declared:
        raise TruncatedLogError(f"log declares {declared} bins but holds {len(records)}", last)
    return header, records


# -- flat key/value text ---------------------------------------------------------

def format_flat(pairs):
    lines = []
    for key, value in pairs:
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def parse_flat(text):
    out = {}
    for ln, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ParseError("expected 'key = value'", line=ln, column=1)
        key = key.strip()
        if key in out:
            raise ParseError(f"duplicate key {key!r}", line=ln, column=1)
        out[key] = (value.strip(), ln)
    return out


@dataclass
class RunConfig:
    """Everything needed to reproduce one simulate run."""

    scenario: str = SINGLE
    mode: str = "experiment"  # or "reference" for noise-free ideal dynamics
    period_bins: int = 100
    m: int = 30
    phase_offset: float = 0.0
    n_bins: int = 0  # 0 -> M + 2 * period
    seed: int = 0
    mean_photons_per_substep: float = 20000.0
    detector_efficiency: float = 1.0
    dark_counts_per_substep: float = 0.0
    estimator_noise_sigma: float = 0.0
    output: str = ""
    mzi: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.mode not in ("experiment", "reference"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        bad = set(self.mzi) - set(MZI_LABELS)
        if bad:
            raise ConfigError(f"unknown MZI label(s) {sorted(bad)}; allowed: {', '.join(MZI_LABELS)}")
        if self.m < 1 or self.period_bins < 2:
            raise ConfigError("need M >= 1 and period_bins >= 2")
        if self.n_bins == 0:
            self.n_bins = self.m + 2 * self.period_bins

    def counting(self):
        return CountingConfig(self.mean_photons_per_substep, self.detector_efficiency,
                              self.dark_counts_per_substep, self.estimator_noise_sigma, self.seed)

    def pairs(self):
        out = [("schema_version", SCHEMA_VERSION)]
        for f in fields(self):
            if f.name != "mzi":
                out.append((f.name, getattr(self, f.name)))
        for label in MZI_LABELS:
            model = self.mzi.get(label)
            if model is None:
                continue
            out += [(f"mzi.{label}.visibility", float(model.visibility)),
                    (f"mzi.{label}.static_phase_offset", float(model.static_phase_offset)),
                    (f"mzi.{label}.phase_noise_sigma", float(model.phase_noise_sigma))]
        return out

    def to_text(self):
        return format_flat(self.pairs())

    @classmethod
    def from_text(cls, text):
        raw = parse_flat(text)
        version = raw.pop("schema_version", (None, 0))
        if version[0] != str(SCHEMA_VERSION):
            raise ConfigError(f"unsupported or missing schema_version {version[0]!r}")
        kwargs = {}
        mzi = {}
        types = {f.name: f.type for f in fields(cls)}
        for key, (value, ln) in raw.items():
            if key.startswith("mzi."):
                _, label, attr = key.split(".", 2) if key.count(".") >= 2 else (None, None, None)
                if label not in MZI_LABELS or attr not in ("visibility", "static_phase_offset",
                                                            "phase_noise_sigma"):
                    raise ParseError(f"unknown MZI key {key!r}", line=ln, column=1)
                mzi.setdefault(label, {})[attr] = _convert(value, float, key, ln)
            elif key in types and key != "mzi":
                kwargs[key] = _convert(value, types[key], key, ln)
            else:
                raise ParseError(f"unknown config key {key!r}", line=ln, column=1)
        kwargs["mzi"] = {label: MziModel(**vals) for label, vals in mzi.items()}
        return cls(**kwargs)


def _convert(value, typ, key, ln):
    if typ in (str, "str"):
        return value
    try:
        if typ in (int, "int"):
            return int(value)
        if typ in (float, "float"):
            return float(value)
    except ValueError:
        raise ParseError(f"{key}: cannot parse {value!r}", line=ln,
                         column=1) from None
    raise ParseError(f"{key}: unsupported type", line=ln, column=1)


def write_config_echo(output_path, config_text):
    """Write ``<output>.config`` next to an artifact."""
    echo = Path(str(output_path) + ".config")
    echo.write_text(config_text, encoding="utf-8", newline="\n")
    return echo


# -- sweeps --------------------------------------------------------------------

def sweep_to_csv(result):
    rels = result.relations
    lines = [",".join(("phi", "t_ratio") + rels)]
    for it, t in enumerate(result.t_ratios):
        for ip, p in enumerate(result.phis):
            lines.append(",".join([_fmt(p), _fmt(t)] + [_fmt(result.values[r][it, ip]) for r in rels]))
    return "\n".join(lines) + "\n"


def sweep_to_json(result):
    def clean(a):
        return [[None if math.isnan(v) else float(v) for v in row] for row in a]

    return json.dumps({
        "scenario": result.scenario,
        "metric": result.metric,
        "period_bins": result.period_bins,
        "phi": [float(p) for p in result.phis],
        "t_ratio": [float(t) for t in result.t_ratios],
        "relations": {r: clean(result.values[r]) for r in result.relations},
        "degenerate": [list(d) for d in result.degenerate],
    }, sort_keys=True, indent=1)


def read_sweep_csv(path):
    text = Path(path).read_text(encoding="utf-8").strip().split("\n")
    header = text[0].split(",")
    if header[:2] != ["phi", "t_ratio"]:
        raise ParseError("sweep CSV must start with phi,t_ratio", line=1, column=1)
    rows = np.array([[float(v) for v in line.split(",")] for line in text[1:]])
    return header, rows
