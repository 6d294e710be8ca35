"""Matplotlib figures for evaluation reports, written to files next to the report."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "svg.hashsalt": "goalforge",
}


def _figure(width=4.5, height=None):
    golden = (np.sqrt(5.0) - 1.0) / 2.0
    return plt.subplots(figsize=(width, height or width * golden))


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None} if path.suffix == ".png" else None)
    plt.close(fig)
    return path


def plot_diversity(report, path):
    with plt.rc_context(STYLE):
        fig, ax = _figure()
        counts = np.asarray(report["counts"], dtype=float)
        pmf = counts / counts.sum()
        x = np.arange(len(counts))
        ax.bar(x, pmf, color="#4477aa", label="empirical")
        ax.axhline(1.0 / len(counts), color="#cc6677", ls="--", lw=1, label="uniform")
        ax.set_xticks(x, [str(s) for s in report["support"]], rotation=30, ha="right")
        ax.set_ylabel("initiator frequency")
        ax.set_title(f"diversity score {report['score']:.4f}")
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_accuracy(report, path):
    with plt.rc_context(STYLE):
        rows = report["rows"]
        fig, ax = _figure(width=max(4.5, 0.5 * len(rows) + 2))
        x = np.arange(len(rows))
        ax.bar(x, [r["accuracy"] for r in rows], color="#228833")
        ax.axhline(100.0 / 3.0, color="#888888", ls=":", lw=1, label="random baseline bound")
        ax.set_xticks(x, [r["scene"] for r in rows], rotation=45, ha="right")
        ax.set_ylim(0, 105)
        ax.set_ylabel("accuracy (%)")
        ax.legend(frameon=False, loc="lower right")
        return _save(fig, path)


def plot_speeds(report, path):
    with plt.rc_context(STYLE):
        fig, ax = _figure()
        groups = report["groups"]
        x = np.arange(len(groups))
        ax.bar(x, [g["mean_speed"] for g in groups], color="#ddaa33")
        ax.set_xticks(x, [g["group"] for g in groups], rotation=30, ha="right")
        ax.set_ylabel("mean projectile speed")
        ok = sum(r["satisfied"] for r in report["relationships"])
        ax.set_title(f"{ok}/{len(report['relationships'])} orderings satisfied")
        return _save(fig, path)


PLOTTERS = {"diversity": plot_diversity, "accuracy": plot_accuracy, "speed": plot_speeds}


def save_report_figure(report, directory, stem=None):
    """Render the figure matching ``report['metric']`` into ``directory``."""
    metric = report["metric"]
    return PLOTTERS[metric](report, Path(directory) / f"{stem or metric}.png")
