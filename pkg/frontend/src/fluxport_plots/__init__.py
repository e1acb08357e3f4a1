"""Figure rendering for fluxport output CSVs.

Consumes the simulator's timing CSV (label,advection,diffusion,analysis,
io,other,total) and roofline CSV (ai,flops_roof,bw_min_roof,bw_max_roof
plus kernel-AI comment annotations); produces stacked-bar timing charts
and roofline plots.  No simulator computation is duplicated here.
"""

from .csvio import RooflineData, SchemaError, TimingRow, read_roofline_csv, \
    read_timing_csv
from .roofline import plot_roofline
from .timing import BUCKETS, plot_timing

__version__ = "0.1.0"

__all__ = [
    "BUCKETS",
    "RooflineData",
    "SchemaError",
    "TimingRow",
    "plot_roofline",
    "plot_timing",
    "read_roofline_csv",
    "read_timing_csv",
]
