"""Static SVG figures rendered with matplotlib.

Output is byte-stable: the SVG id salt is fixed, text is kept as text
and the date stamp is dropped, so the same records always give the same
file.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
import numpy as np
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

from .records import NETWORKS, OutputError, complete

METRIC_COLORS = {"x": "tab:blue", "c": "tab:orange", "s": "maroon"}
METRIC_LABELS = {"x": "expressivity x", "c": "compositionality c", "s": "stability s"}
NETWORK_LABELS = {"dec": "decoder", "enc": "encoder", "auto": "autoencoder"}

_RC = {
    "svg.hashsalt": "iterlearn",
    "svg.fonttype": "none",
    "font.family": "DejaVu Sans",
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        FigureCanvasSVG(fig)
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    except OSError as exc:
        raise OutputError(f"{path}: {exc.strerror}") from None
    return path


def metric_series(records) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Generations and per-metric ``(replicates, generations)`` arrays (NaN where missing)."""
    recs = complete(records)
    reps = sorted({r.replicate for r in recs})
    gens = sorted({r.generation for r in recs})
    ri = {r: i for i, r in enumerate(reps)}
    gi = {g: i for i, g in enumerate(gens)}
    out = {k: np.full((len(reps), len(gens)), np.nan) for k in METRIC_COLORS}
    for r in recs:
        for k in out:
            out[k][ri[r.replicate], gi[r.generation]] = getattr(r.metrics, k)
    return np.array(gens), out


def plot_metrics(records, path, title: str | None = None) -> Path:
    """One panel per corrected metric: thin replicate lines under a thick mean."""
    gens, series = metric_series(records)
    if len(gens) == 0:
        raise ValueError("no complete records to plot")
    with matplotlib.rc_context(_RC):
        fig = Figure(figsize=(11, 3.4))
        axes = fig.subplots(1, 3)
        for ax, (key, data) in zip(axes, series.items()):
            color = METRIC_COLORS[key]
            for row in data:
                ax.plot(gens, row, color=color, lw=0.6, alpha=0.35)
            ax.plot(gens, np.nanmean(data, axis=0), color=color, lw=2.4)
            ax.set_ylim(0, 1)
            ax.set_xlim(gens[0], gens[-1] if len(gens) > 1 else gens[0] + 1)
            ax.set_xlabel("generation")
            ax.set_ylabel(METRIC_LABELS[key])
        if title:
            fig.suptitle(title)
        fig.tight_layout()
        return _save(fig, path)


def loss_curves(records, divisor: float = 1.0) -> dict[str, dict[int, np.ndarray]]:
    """``{network: {generation: mean per-epoch loss over replicates}}``.

    The autoencoder loss is divided by ``divisor``.
    """
    acc: dict[str, dict[int, list[np.ndarray]]] = {}
    for rec in complete(records):
        for name in NETWORKS:
            losses = getattr(rec, f"loss_{name}")
            if losses is None:
                continue
            acc.setdefault(name, {}).setdefault(rec.generation, []).append(np.asarray(losses, float))
    out = {}
    for name, by_gen in acc.items():
        scale = 1.0 / divisor if name == "auto" else 1.0
        out[name] = {g: np.mean(np.stack(v), axis=0) * scale for g, v in sorted(by_gen.items())}
    return out


def plot_losses(records, path, divisor: float = 1.0, title: str | None = None) -> Path:
    """Loss against epoch, one curve per generation, cold to warm.

    Panels appear only for networks the agents have.
    """
    curves = loss_curves(records, divisor)
    if not curves:
        raise ValueError("records carry no losses")
    names = [n for n in NETWORKS if n in curves]
    cmap = matplotlib.colormaps["coolwarm"]
    with matplotlib.rc_context(_RC):
        fig = Figure(figsize=(3.7 * len(names), 3.4))
        axes = np.atleast_1d(fig.subplots(1, len(names)))
        for ax, name in zip(axes, names):
            by_gen = curves[name]
            gens = list(by_gen)
            span = max(gens[-1] - gens[0], 1)
            for g, y in by_gen.items():
                ax.plot(np.arange(1, len(y) + 1), y, color=cmap((g - gens[0]) / span), lw=1.0)
            ax.set_xlabel("epoch")
            label = NETWORK_LABELS[name] + " loss"
            if name == "auto" and divisor != 1.0:
                label += f" / {divisor:g}"
            ax.set_ylabel(label)
        if title:
            fig.suptitle(title)
        fig.tight_layout()
        return _save(fig, path)


def plot_sweep(best: dict[int, int], slope: float, intercept: float, path) -> Path:
    """Best bottleneck against n with the least-squares line."""
    ns = np.array(sorted(best))
    with matplotlib.rc_context(_RC):
        fig = Figure(figsize=(4.2, 3.4))
        ax = fig.subplots()
        ax.plot(ns, [best[n] for n in ns], "o", color="tab:blue")
        if np.isfinite(slope) and len(ns):
            xs = np.array([ns.min(), ns.max()], dtype=float)
            ax.plot(xs, slope * xs + intercept, color="maroon", lw=1.2,
                    label=f"slope {slope:.3g}, intercept {intercept:.3g}")
            ax.legend(frameon=False, fontsize="small")
        ax.set_xlabel("n")
        ax.set_ylabel("best bottleneck size")
        fig.tight_layout()
        return _save(fig, path)
