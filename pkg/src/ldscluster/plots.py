"""Benchmark figure rendering (headless Agg backend).

Two summary figures accompany the delimited output of a benchmark run:
mean F1 with 95% confidence bars per (method, cell), and mean runtime per
(method, cell).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["render_figures"]


def _cell_label(row) -> str:
    return f"{row['dataset']}\nn={row['n']}, T={row['T']}"


def _grouped_bars(ax, cells, methods, heights, errors=None, ylabel=""):
    x = np.arange(len(cells))
    width = 0.8 / max(len(methods), 1)
    for mi, method in enumerate(methods):
        offs = x + (mi - (len(methods) - 1) / 2) * width
        yerr = errors[mi] if errors is not None else None
        ax.bar(offs, heights[mi], width * 0.92, yerr=yerr, capsize=3, label=method)
    ax.set_xticks(x)
    ax.set_xticklabels(cells, fontsize=8)
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=8)
    ax.grid(axis="y", alpha=0.3)
    ax.set_axisbelow(True)


def render_figures(out_dir, summary_rows, records) -> list:
    """Write f1.png and runtime.png into out_dir; returns the paths."""
    out_dir = Path(out_dir)
    written = []
    if not summary_rows:
        return written

    methods = []
    cell_keys = []
    for row in summary_rows:
        if row["method"] not in methods:
            methods.append(row["method"])
        key = (row["dataset"], row["n"], row["T"])
        if key not in cell_keys:
            cell_keys.append(key)
    cells = [f"{d}\nn={n}, T={t}" for d, n, t in cell_keys]
    by_key = {(r["method"], r["dataset"], r["n"], r["T"]): r for r in summary_rows}

    heights = np.zeros((len(methods), len(cells)))
    errs = np.zeros_like(heights)
    for mi, method in enumerate(methods):
        for ci, (d, n, t) in enumerate(cell_keys):
            row = by_key.get((method, d, n, t))
            if row is not None:
                heights[mi, ci] = row["f1_mean"]
                errs[mi, ci] = row["f1_ci95"]
    fig, ax = plt.subplots(figsize=(1.8 + 1.6 * len(cells), 3.6))
    _grouped_bars(ax, cells, methods, heights, errs, ylabel="F1 (mean, 95% CI)")
    ax.set_ylim(0, 1.05)
    fig.tight_layout()
    f1_path = out_dir / "f1.png"
    fig.savefig(f1_path, dpi=150)
    plt.close(fig)
    written.append(f1_path)

    runtimes = np.zeros((len(methods), len(cells)))
    counts = np.zeros_like(runtimes)
    for rec in records:
        if rec.f1 is None:
            continue
        key = (rec.dataset, rec.n, rec.t_len)
        if rec.method in methods and key in cell_keys:
            mi = methods.index(rec.method)
            ci = cell_keys.index(key)
            runtimes[mi, ci] += rec.runtime_ms
            counts[mi, ci] += 1
    with np.errstate(invalid="ignore"):
        mean_rt = np.where(counts > 0, runtimes / np.maximum(counts, 1), 0.0)
    fig, ax = plt.subplots(figsize=(1.8 + 1.6 * len(cells), 3.6))
    _grouped_bars(ax, cells, methods, mean_rt, ylabel="runtime (ms, mean)")
    fig.tight_layout()
    rt_path = out_dir / "runtime.png"
    fig.savefig(rt_path, dpi=150)
    plt.close(fig)
    written.append(rt_path)
    return written
