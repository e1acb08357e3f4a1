"""Roofline plots with bandwidth min/max shading and the kernel-AI band."""

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .csvio import read_roofline_csv  # noqa: E402


def plot_roofline(csv_paths, output="roofline.png"):
    """Log-log roof curves; accepts several CSVs for an overlay.

    The band between the min- and max-bandwidth roofs is shaded per curve;
    arithmetic intensities outside the kernel band (taken from the first
    CSV's annotations) are washed out in gray, so the band of interest is
    the non-gray region.  Returns the matplotlib figure after saving.
    """
    if isinstance(csv_paths, (str, os.PathLike)):
        csv_paths = [csv_paths]
    datasets = [(os.path.basename(str(p)), read_roofline_csv(p))
                for p in csv_paths]

    fig, ax = plt.subplots(figsize=(6.5, 4.8))
    for label, data in datasets:
        ax.fill_between(data.ai, data.bw_min_roof, data.bw_max_roof,
                        alpha=0.25)
        ax.plot(data.ai, data.flops_roof, label=label, linewidth=2)
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("arithmetic intensity (FLOP/byte)")
    ax.set_ylabel("GFLOP/s")

    first = datasets[0][1]
    lo, hi = first.kernel_ai_low, first.kernel_ai_high
    ax.axvspan(float(first.ai[0]), lo, color="gray", alpha=0.35, lw=0)
    ax.axvspan(hi, float(first.ai[-1]), color="gray", alpha=0.35, lw=0)
    ax.set_xlim(float(first.ai[0]), float(first.ai[-1]))
    ax.set_title("roofline (kernel AI range unshaded)")
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(output, dpi=130)
    return fig
