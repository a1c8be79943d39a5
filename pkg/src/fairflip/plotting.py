"""Figures for sweep tables (written to files, Agg backend)."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_sweep(reports, path: str | Path, title: str | None = None) -> Path:
    """Bias against ``m`` on log-log axes, one line per (protocol, adversary)."""
    series = defaultdict(list)
    for r in reports:
        series[(r.protocol, r.adversary)].append((r.m, r.bias, *r.bias_ci))
    fig, ax = plt.subplots(figsize=(6, 4))
    for (proto, adv), pts in sorted(series.items()):
        pts.sort()
        ms_ = [p[0] for p in pts]
        ax.plot(ms_, [p[1] for p in pts], marker="o", label=f"{proto} / {adv}")
        if any(p[2] != p[3] for p in pts):
            lo = [max(p[2], 1e-6) for p in pts]
            hi = [max(p[3], 1e-6) for p in pts]
            ax.fill_between(ms_, lo, hi, alpha=0.2)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("m (rounds)")
    ax.set_ylabel("bias")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
