"""Figures written next to the text reports (headless Agg backend)."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.titlesize": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
}

METRICS = (("ssim", "SSIM ↑"), ("lpips", "LPIPS ↓"), ("kid", "KID ×1e3 ↓"), ("fid", "FID ↓"))


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_loss_curves(records, path, keys=("loss",), x="step", title=None):
    """Line plot of logged scalar terms against ``x``; one panel per phase."""
    phases = sorted({r.get("phase", "") for r in records})
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(phases), figsize=(3.6 * len(phases), 2.6), squeeze=False)
        for ax, phase in zip(axes[0], phases):
            rows = [r for r in records if r.get("phase", "") == phase]
            for key in keys:
                pts = [(r[x], r[key]) for r in rows if key in r]
                if pts:
                    xs, ys = zip(*pts)
                    ax.plot(xs, ys, lw=1.0, label=key)
            ax.set_xlabel(x)
            ax.set_yscale("log")
            ax.set_title(phase or (title or ""))
            ax.legend(frameon=False)
        return _save(fig, path)


def plot_metric_bars(rows, path, title=None):
    """One bar panel per metric for a list of ``(label, MetricReport)``."""
    labels = [name for name, _ in rows]
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(METRICS), figsize=(2.4 * len(METRICS), 2.8))
        pos = np.arange(len(rows))
        for ax, (key, label) in zip(axes, METRICS):
            vals = [getattr(rep, key) for _, rep in rows]
            vals = [np.nan if v is None else v * (1e3 if key == "kid" else 1.0) for v in vals]
            ax.bar(pos, vals, color="0.55", edgecolor="0.2", lw=0.6)
            ax.set_xticks(pos)
            ax.set_xticklabels(labels, rotation=35, ha="right")
            ax.set_title(label)
        if title:
            fig.suptitle(title)
        fig.tight_layout()
        return _save(fig, path)
