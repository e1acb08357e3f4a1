"""Readers for the simulator's CSV schemas.

Parsing is strict: a missing column is a SchemaError naming it, so plot
scripts fail clearly instead of rendering nonsense.  Input files are never
modified.
"""

from dataclasses import dataclass

import numpy as np

TIMING_COLUMNS = ("advection", "diffusion", "analysis", "io", "other",
                  "total")
ROOFLINE_COLUMNS = ("ai", "flops_roof", "bw_min_roof", "bw_max_roof")


class SchemaError(ValueError):
    """A CSV does not match the documented schema."""


@dataclass
class TimingRow:
    label: str
    seconds: dict

    @property
    def total(self):
        return self.seconds["total"]


def read_timing_csv(path):
    """Parse a timing CSV into TimingRow entries (one per data line)."""
    with open(path, "r", encoding="utf-8") as f:
        lines = [ln.strip() for ln in f if ln.strip()]
    if not lines:
        raise SchemaError(f"{path}: empty timing CSV")
    header = lines[0].split(",")
    if header[0] != "label":
        raise SchemaError(f"{path}: first column must be 'label'")
    for name in TIMING_COLUMNS:
        if name not in header:
            raise SchemaError(f"{path}: missing column '{name}'")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != len(header):
            raise SchemaError(f"{path}: ragged row: {ln!r}")
        values = dict(zip(header[1:], (float(v) for v in parts[1:])))
        if any(values[b] < 0 for b in TIMING_COLUMNS[:4]):
            raise SchemaError(f"{path}: negative bucket in {ln!r}")
        rows.append(TimingRow(parts[0], values))
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


@dataclass
class RooflineData:
    ai: np.ndarray
    flops_roof: np.ndarray
    bw_min_roof: np.ndarray
    bw_max_roof: np.ndarray
    kernel_ai_low: float
    kernel_ai_high: float
    metadata: dict


def read_roofline_csv(path):
    """Parse a roofline CSV, including the '#' annotation lines."""
    metadata = {}
    header = None
    data = []
    with open(path, "r", encoding="utf-8") as f:
        for raw in f:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].strip().split(",")
                if len(parts) == 2:
                    try:
                        metadata[parts[0].strip()] = float(parts[1])
                    except ValueError:
                        pass
                continue
            if header is None:
                header = line.split(",")
                continue
            data.append([float(v) for v in line.split(",")])
    if header is None or not data:
        raise SchemaError(f"{path}: no roofline data")
    for name in ROOFLINE_COLUMNS:
        if name not in header:
            raise SchemaError(f"{path}: missing column '{name}'")
    arr = np.asarray(data)
    cols = {name: arr[:, header.index(name)] for name in ROOFLINE_COLUMNS}
    lo = metadata.get("kernel_ai_low")
    hi = metadata.get("kernel_ai_high")
    if lo is None or hi is None:
        raise SchemaError(
            f"{path}: missing kernel_ai_low/kernel_ai_high annotations"
        )
    return RooflineData(cols["ai"], cols["flops_roof"],
                        cols["bw_min_roof"], cols["bw_max_roof"],
                        lo, hi, metadata)
