"""Figure rendering for the report paths; every plot lands next to its CSV.

Matplotlib is imported lazily with the Agg backend so headless runs and
plain library use never touch a display.
"""
from __future__ import annotations

import math
from typing import Sequence


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    return plt


def render_overlap_figure(naive_rows, layer_rows, path) -> None:
    """Semilog decay of the naive product overlap against the per-level minimum."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ps = [r.p for r in naive_rows]
    sizes = [2**p for p in ps]
    ax.semilogy(sizes, [r.naive_overlap for r in naive_rows], "o-", label="naive product")
    by_p = {r.p: r for r in layer_rows}
    ax.semilogy(sizes, [by_p[p].min_overlap for p in ps], "s--", label="level minimum")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("chain length")
    ax.set_ylabel("ground-state overlap")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_gap_figure(rows, path) -> None:
    """Gap closing with size against the constant root-coupling norm."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    sizes = [2**r.p for r in rows]
    ax.plot(sizes, [r.gamma_root for r in rows], "o-", label="spectral gap")
    ax.plot(sizes, [r.interaction_norm_root for r in rows], "s--", label="root coupling norm")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("chain length")
    ax.set_ylabel("energy")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_attempts_figure(stats, path) -> None:
    """Per-node merge-attempt histograms from a Monte Carlo aggregate."""
    plt = _pyplot()
    hist = stats.node_attempt_histogram
    labels = sorted(hist) or ["*"]
    cols = min(3, len(labels))
    rows = math.ceil(len(labels) / cols)
    fig, axes = plt.subplots(rows, cols, figsize=(4.0 * cols, 3.0 * rows), squeeze=False)
    for i, label in enumerate(labels):
        ax = axes[i // cols][i % cols]
        counts = hist.get(label, {})
        if counts:
            xs = sorted(counts)
            ax.bar(xs, [counts[x] for x in xs], width=0.8)
        ax.set_title(f"node {label}")
        ax.set_xlabel("attempts per run")
        ax.set_ylabel("runs")
    for i in range(len(labels), rows * cols):
        axes[i // cols][i % cols].axis("off")
    fig.suptitle(
        f"depth {stats.p}, delta {stats.delta:g}, {stats.n_runs} runs, "
        f"failure rate {stats.failure_rate:.4f}"
    )
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_sweep_figure(rows: Sequence[tuple], path) -> None:
    """Bound-vs-measured scatter per sweep suite."""
    plt = _pyplot()
    suites = sorted({r[0] for r in rows})
    cols = min(3, len(suites)) or 1
    nrows = math.ceil(len(suites) / cols) or 1
    fig, axes = plt.subplots(nrows, cols, figsize=(4.0 * cols, 3.5 * nrows), squeeze=False)
    for i, suite in enumerate(suites):
        ax = axes[i // cols][i % cols]
        pts = [(r[2], r[3]) for r in rows if r[0] == suite]
        ax.scatter([b for b, _ in pts], [m for _, m in pts], s=12, alpha=0.6)
        finite = [v for pair in pts for v in pair if math.isfinite(v)]
        if finite:
            lo, hi = min(finite), max(finite)
            pad = 0.05 * (hi - lo or 1.0)
            ax.plot([lo - pad, hi + pad], [lo - pad, hi + pad], "k--", linewidth=0.8)
        ax.set_title(suite)
        ax.set_xlabel("bound")
        ax.set_ylabel("measured")
    for i in range(len(suites), nrows * cols):
        axes[i // cols][i % cols].axis("off")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_entropy_figure(dim_a: int, samples: Sequence[tuple], measured=None, path=None) -> None:
    """The max-overlap-versus-entropy frontier with an optional measured point.

    samples holds (entropy_nats, r_squared) pairs; measured, when given, is
    an (entropy_nats, overlap_squared) pair from an actual state.
    """
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot([e for e, _ in samples], [r for _, r in samples], "-", label="frontier")
    if measured is not None:
        ax.plot([measured[0]], [measured[1]], "r*", markersize=12, label="measured state")
    ax.axhline(1.0 / dim_a, color="gray", linewidth=0.8, linestyle=":")
    ax.set_xlabel("entropy (nats)")
    ax.set_ylabel("largest overlap squared")
    ax.set_ylim(0.0, 1.05)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
