"""Stacked-bar timing breakdown charts."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .csvio import read_timing_csv  # noqa: E402

BUCKETS = ("advection", "diffusion", "analysis", "io", "other")

BUCKET_COLORS = {
    "advection": "#1f77b4",
    "diffusion": "#ff7f0e",
    "analysis": "#2ca02c",
    "io": "#9467bd",
    "other": "gray",
}


def plot_timing(csv_paths, labels=None, output="timing.png"):
    """One stacked bar per timing-CSV row; 'other' is rendered gray.

    Labels default to the rows' own labels; passing one label per CSV
    overrides them.  Returns the matplotlib figure after saving.
    """
    bars = []
    for idx, path in enumerate(csv_paths):
        for row in read_timing_csv(path):
            label = row.label
            if labels is not None and idx < len(labels):
                label = labels[idx]
            bars.append((label, row))

    fig, ax = plt.subplots(figsize=(1.6 + 1.1 * len(bars), 4.5))
    xs = range(len(bars))
    bottoms = [0.0] * len(bars)
    for bucket in BUCKETS:
        heights = [row.seconds[bucket] for _, row in bars]
        ax.bar(xs, heights, bottom=bottoms, label=bucket,
               color=BUCKET_COLORS[bucket], width=0.6)
        bottoms = [b + h for b, h in zip(bottoms, heights)]
    ax.set_xticks(list(xs))
    ax.set_xticklabels([label for label, _ in bars], rotation=20,
                       ha="right")
    ax.set_ylabel("seconds")
    ax.set_title("run time breakdown (less is better)")
    ax.legend(loc="upper right")
    fig.tight_layout()
    fig.savefig(output, dpi=130)
    return fig
