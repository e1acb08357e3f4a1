"""Run configuration, file formats, and the validation comparator.

File formats
------------
Map files (FTMAP1): one ASCII header line ``FTMAP1 <ntm> <npm> <nr>\\n``
followed by ntm*npm*nr IEEE-754 binary64 little-endian values in j-major,
then k, then i order.  Round trips are bit exact.

History files: text, one ``#`` header line naming the columns, then one
line per record holding sim_time and per-realization min, max, signed,
positive, and negative flux, printed with 17 significant digits so binary64
values survive a parse round trip exactly.

Timing CSV: ``label,advection,diffusion,analysis,io,other,total`` with one
row per run.
"""

import math
import os
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigSyntaxError,
    ConfigUnknownKeyError,
    ConfigValueError,
    HistoryFormatError,
    MapBadMagicError,
    MapDimensionOverflowError,
    MapTruncatedError,
    ValidationStructureError,
)
from .grid import MapField

MAP_MAGIC = b"FTMAP1"
MAX_MAP_VALUES = 2 ** 40
VALIDATE_FLOOR = 1e-12


# -- run configuration ----------------------------------------------------

@dataclass
class RunConfig:
    """Inputs for a simulation run; field names double as config keys."""

    n_theta: int = 128
    n_phi: int = 256
    duration_hours: float = 672.0
    flow_num_method: int = 2
    diffusion_levels: list = field(default_factory=lambda: [1.0, 2.0, 4.0,
                                                            8.0])
    attenuation_set: list = field(default_factory=lambda: [False, True])
    d0: float = 0.18
    d2: float = -2.36
    d4: float = -1.787
    m1: float = 22.0
    m2: float = 11.0
    b0: float = 500.0
    analysis_cadence_hours: float = 1.0
    output_cadence_hours: float = 24.0
    n_workers: int = 0          # 0 selects the auto/env default
    deterministic: bool = True
    output_dir: str = "output"
    initial_map: str = "blob"
    base_nu_km2s: float = 300.0
    max_step_hours: float = 1.0


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_float_list(text):
    items = [s.strip() for s in text.split(",")]
    return [float(s) for s in items if s]


def _parse_bool_list(text):
    items = [s.strip() for s in text.split(",")]
    return [_parse_bool(s) for s in items if s]


_PARSERS = {
    int: lambda s: int(s.strip(), 10),
    float: lambda s: float(s.strip()),
    bool: _parse_bool,
    str: lambda s: s.strip(),
}

_LIST_KEYS = {
    "diffusion_levels": _parse_float_list,
    "attenuation_set": _parse_bool_list,
}

_KEY_LINE = re.compile(r"^(\s*)([A-Za-z_][A-Za-z0-9_]*)(\s*)")

_KEY_TYPES = {
    "n_theta": int,
    "n_phi": int,
    "duration_hours": float,
    "flow_num_method": int,
    "diffusion_levels": list,
    "attenuation_set": list,
    "d0": float,
    "d2": float,
    "d4": float,
    "m1": float,
    "m2": float,
    "b0": float,
    "analysis_cadence_hours": float,
    "output_cadence_hours": float,
    "n_workers": int,
    "deterministic": bool,
    "output_dir": str,
    "initial_map": str,
    "base_nu_km2s": float,
    "max_step_hours": float,
}


def parse_config(text):
    """Parse line-oriented ``key = value`` text into a RunConfig.

    ``#`` starts a comment, lists are comma separated, unknown keys are
    rejected with their line number, and missing keys take the documented
    defaults.  Every input either parses completely or raises a located
    ConfigError; no partial configs escape.
    """
    config = RunConfig()
    types = _KEY_TYPES
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        m = _KEY_LINE.match(line)
        if m is None:
            col = len(line) - len(line.lstrip()) + 1
            raise ConfigSyntaxError(lineno, col, "expected 'key = value'")
        rest = line[m.end():]
        if not rest.startswith("="):
            raise ConfigSyntaxError(lineno, m.end() + 1, "expected '='")
        key = m.group(2)
        value = rest[1:]
        if key not in types:
            raise ConfigUnknownKeyError(lineno, key)
        try:
            if key in _LIST_KEYS:
                parsed = _LIST_KEYS[key](value)
            else:
                parsed = _PARSERS[types[key]](value)
        except ValueError as exc:
            raise ConfigValueError(lineno, key, str(exc)) from None
        setattr(config, key, parsed)
    _check_config(config)
    return config


def _check_config(config):
    numeric = ["duration_hours", "d0", "d2", "d4", "m1", "m2", "b0",
               "analysis_cadence_hours", "output_cadence_hours",
               "base_nu_km2s", "max_step_hours"]
    for name in numeric:
        v = getattr(config, name)
        if not math.isfinite(v):
            raise ConfigValueError(0, name, f"must be finite, got {v}")
    if config.duration_hours < 0:
        raise ConfigValueError(0, "duration_hours", "must be >= 0")
    for name in ("analysis_cadence_hours", "output_cadence_hours",
                 "max_step_hours"):
        if getattr(config, name) <= 0:
            raise ConfigValueError(0, name, "must be > 0")
    if config.flow_num_method not in (1, 2):
        raise ConfigValueError(0, "flow_num_method",
                               f"must be 1 (upwind) or 2 (weno3), "
                               f"got {config.flow_num_method}")
    if config.n_workers < 0:
        raise ConfigValueError(0, "n_workers", "must be >= 0")
    if any(not math.isfinite(v) or v <= 0 for v in config.diffusion_levels):
        raise ConfigValueError(0, "diffusion_levels",
                               "levels must be positive and finite")


def load_config(path):
    with open(path, "r", encoding="utf-8") as f:
        return parse_config(f.read())


# -- map files ------------------------------------------------------------

def write_map(path, field_or_values):
    """Write an ensemble (or single slab) in the FTMAP1 format."""
    values = getattr(field_or_values, "values", field_or_values)
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 2:
        values = values[None, :, :]
    nr, ntm, npm = values.shape
    header = f"FTMAP1 {ntm} {npm} {nr}\n".encode("ascii")
    payload = np.ascontiguousarray(
        np.transpose(values, (1, 2, 0)).astype("<f8", copy=False)
    ).tobytes()
    with open(path, "wb") as f:
        f.write(header)
        f.write(payload)


def read_map(path):
    """Read an FTMAP1 file back into a MapField (bit exact)."""
    with open(path, "rb") as f:
        data = f.read()
    nl = data.find(b"\n")
    if nl < 0 or not data.startswith(MAP_MAGIC + b" "):
        raise MapBadMagicError(f"{path}: not an FTMAP1 file")
    parts = data[:nl].split()
    if len(parts) != 4:
        raise MapBadMagicError(f"{path}: malformed FTMAP1 header")
    try:
        ntm, npm, nr = (int(p) for p in parts[1:])
    except ValueError:
        raise MapBadMagicError(f"{path}: malformed FTMAP1 header") from None
    if ntm <= 0 or npm <= 0 or nr <= 0 or ntm * npm * nr > MAX_MAP_VALUES:
        raise MapDimensionOverflowError(
            f"{path}: dimensions {ntm}x{npm}x{nr} out of range"
        )
    expected = ntm * npm * nr
    payload = data[nl + 1:]
    if len(payload) != 8 * expected:
        raise MapTruncatedError(expected, len(payload) // 8)
    arr = np.frombuffer(payload, dtype="<f8").reshape(ntm, npm, nr)
    return MapField(np.ascontiguousarray(np.transpose(arr, (2, 0, 1))))


# -- history files --------------------------------------------------------

def history_columns(nr):
    names = ["sim_time"]
    for i in range(1, nr + 1):
        names += [f"r{i:02d}_{q}" for q in
                  ("min", "max", "signed", "pos", "neg")]
    return names


def append_history(path, record):
    """Append one record; writes the column header line on first write."""
    fresh = not os.path.exists(path) or os.path.getsize(path) == 0
    nr = len(record.mins)
    fields_ = [record.sim_time]
    for i in range(nr):
        fields_ += [record.mins[i], record.maxs[i], record.signed[i],
                    record.positive[i], record.negative[i]]
    with open(path, "a", encoding="utf-8") as f:
        if fresh:
            f.write("# " + " ".join(history_columns(nr)) + "\n")
        f.write(" ".join(f"{v:.17g}" for v in fields_) + "\n")


def read_history(path):
    """Return (column names, records array of shape (n_records, n_cols))."""
    names = None
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                if names is None:
                    names = line[1:].split()
                continue
            try:
                rows.append([float(v) for v in line.split()])
            except ValueError:
                raise HistoryFormatError(
                    f"{path}:{lineno}: unparsable record"
                ) from None
    if names is None:
        raise HistoryFormatError(f"{path}: missing column header")
    data = np.asarray(rows, dtype=np.float64)
    if data.size and data.shape[1] != len(names):
        raise HistoryFormatError(
            f"{path}: {data.shape[1]} columns, header names {len(names)}"
        )
    return names, data


# -- validation -----------------------------------------------------------

@dataclass
class ColumnWorst:
    column: str
    rel_error: float
    record: int
    candidate: float
    reference: float


@dataclass
class ValidationReport:
    passed: bool
    tol: float
    worst: list

    def worst_overall(self):
        return max(self.worst, key=lambda w: w.rel_error)

    def format_table(self):
        lines = [f"{'column':>12} {'worst rel err':>14} {'record':>7}"]
        for w in sorted(self.worst, key=lambda w: -w.rel_error):
            lines.append(f"{w.column:>12} {w.rel_error:>14.6e} "
                         f"{w.record:>7d}")
        return "\n".join(lines)


def validate(candidate_path, reference_path, tol=1e-5):
    """Compare two history files column by column.

    Each value passes when |c - r| <= tol * max(|r|, floor) with a 1e-12
    absolute floor guarding near-zero references.  The report carries the
    worst offender per column.
    """
    names_c, data_c = read_history(candidate_path)
    names_r, data_r = read_history(reference_path)
    if names_c != names_r:
        raise ValidationStructureError(
            f"column mismatch: {names_c} vs {names_r}"
        )
    if data_c.shape != data_r.shape:
        raise ValidationStructureError(
            f"record mismatch: {data_c.shape[0]} vs {data_r.shape[0]} records"
        )
    worst = []
    passed = True
    for j, name in enumerate(names_c):
        c = data_c[:, j]
        r = data_r[:, j]
        denom = np.maximum(np.abs(r), VALIDATE_FLOOR)
        rel = np.abs(c - r) / denom
        idx = int(np.argmax(rel)) if rel.size else 0
        err = float(rel[idx]) if rel.size else 0.0
        worst.append(ColumnWorst(name, err, idx,
                                 float(c[idx]) if rel.size else 0.0,
                                 float(r[idx]) if rel.size else 0.0))
        if err > tol:
            passed = False
    return ValidationReport(passed, tol, worst)


# -- timing ---------------------------------------------------------------

TIMING_BUCKETS = ("advection", "diffusion", "analysis", "io", "other")


@dataclass
class TimingReport:
    advection: float
    diffusion: float
    analysis: float
    io: float
    other: float
    total: float

    @classmethod
    def from_measured(cls, advection, diffusion, analysis, io, total):
        other = total - (advection + diffusion + analysis + io)
        return cls(advection, diffusion, analysis, io, other, total)

    def well_formed(self):
        named = (self.advection, self.diffusion, self.analysis, self.io)
        if any(b < 0.0 for b in named):
            return False
        return self.other >= -0.05 * self.total

    def format_breakdown(self):
        lines = []
        for name in TIMING_BUCKETS:
            lines.append(f"  {name:<10} {getattr(self, name):10.3f} s")
        lines.append(f"  {'total':<10} {self.total:10.3f} s")
        return "\n".join(lines)


def write_timing_csv(path, report, label):
    fresh = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", encoding="utf-8") as f:
        if fresh:
            f.write("label," + ",".join(TIMING_BUCKETS) + ",total\n")
        vals = [getattr(report, b) for b in TIMING_BUCKETS] + [report.total]
        f.write(label + "," + ",".join(f"{v:.17g}" for v in vals) + "\n")


def read_timing_csv(path):
    """Return (bucket names, list of (label, values dict)) rows."""
    with open(path, "r", encoding="utf-8") as f:
        lines = [ln.strip() for ln in f if ln.strip()]
    header = lines[0].split(",")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        label = parts[0]
        rows.append((label, {name: float(v) for name, v
                             in zip(header[1:], parts[1:])}))
    return header[1:], rows
