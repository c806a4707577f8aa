"""PNG report figures, written next to the CSV they summarize."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def plot_training(reports, path):
    epochs = [r.epoch for r in reports]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax1.plot(epochs, [r.mean_e_pos for r in reports], "o-", label="E+ (data)")
    ax1.plot(epochs, [r.mean_e_neg for r in reports], "s-", label="E- (samples)")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("mean energy")
    ax1.legend()
    ax2.plot(epochs, [r.total for r in reports], "o-", color="k")
    ax2.set_xlabel("epoch")
    ax2.set_ylabel("loss")
    _save(fig, path)


def plot_histograms(series: dict, path, xlabel="property"):
    """``series`` maps a label to ``(low, high, count)`` rows."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for label, rows in series.items():
        lows = [r[0] for r in rows]
        widths = [r[1] - r[0] for r in rows]
        total = sum(r[2] for r in rows) or 1
        ax.bar(lows, [r[2] / total for r in rows], width=widths, align="edge", alpha=0.55, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("fraction")
    if len(series) > 1:
        ax.legend()
    _save(fig, path)


def plot_traces(traces, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for tr in traces:
        ax.plot(range(1, len(tr) + 1), tr, lw=1)
    ax.set_xlabel("Langevin step")
    ax.set_ylabel("energy")
    _save(fig, path)


def plot_constrained(reports, path):
    deltas = [r.delta for r in reports]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax1.plot(deltas, [r.success_rate for r in reports], "o-")
    ax1.set_xlabel("similarity threshold")
    ax1.set_ylabel("success rate")
    ax1.set_ylim(0, 1.05)
    imp = [0.0 if math.isnan(r.improvement) else r.improvement for r in reports]
    ax2.bar([str(d) for d in deltas], imp)
    ax2.set_xlabel("similarity threshold")
    ax2.set_ylabel("mean improvement (successes)")
    _save(fig, path)
