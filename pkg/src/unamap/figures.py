"""Figure renderers for experiment tables, written as PNG files next to the CSVs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")  # file output only; no display server assumed

import matplotlib.pyplot as plt

from .evaluation import ExperimentKind, ExperimentResult


def _scored(rows):
    return [r for r in rows if r[-1] == ""]


def _fraction_curve(ax, rows) -> None:
    modes = sorted({r[1] for r in rows})
    for mode in modes:
        cells = [r for r in rows if r[1] == mode]
        ax.plot([r[0] for r in cells], [r[3] for r in cells], marker="o", label=f"recall ({mode})")
    first = rows and rows[0][1]
    precision = [r for r in rows if r[1] == first]
    ax.plot(
        [r[0] for r in precision],
        [r[2] for r in precision],
        linestyle="--",
        color="black",
        label="precision (all)",
    )
    ax.set_xlabel("fraction of training data")


def _noise_curve(ax, rows) -> None:
    ax.plot([r[0] for r in rows], [r[2] for r in rows], marker="s", label="recall")
    ax.plot([r[0] for r in rows], [r[1] for r in rows], linestyle="--", color="black", label="precision")
    ax.set_xlabel("noise budget")


def _adversarial(ax, rows) -> None:
    fractions = sorted({r[0] for r in rows})
    for f in fractions:
        sweep = [r for r in rows if r[0] == f and r[1] == "point-estimate"]
        ax.plot([r[4] for r in sweep], [r[3] for r in sweep], marker=".", label=f"point estimate (f={f})")
        for r in rows:
            if r[0] == f and r[1] == "unanimous":
                ax.plot([r[4]], [r[3]], marker="*", markersize=12, linestyle="", label=f"unanimous (f={f})")
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")


def _active_vs_passive(ax, rows) -> None:
    for strategy in ("active", "passive"):
        cells = [r for r in rows if r[1] == strategy]
        ax.plot([r[0] for r in cells], [r[3] for r in cells], marker="o", label=strategy)
    ax.set_xlabel("labeled examples")


_PANELS = {
    ExperimentKind.FRACTION_CURVE: _fraction_curve,
    ExperimentKind.NOISE_CURVE: _noise_curve,
    ExperimentKind.ADVERSARIAL: _adversarial,
    ExperimentKind.ACTIVE_VS_PASSIVE: _active_vs_passive,
}


def render_figure(result: ExperimentResult, path) -> Path:
    """One PNG summarizing the sweep; faulted cells are left out of the lines."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    try:
        _PANELS[result.kind](ax, _scored(result.rows))
        if result.kind is not ExperimentKind.ADVERSARIAL:
            ax.set_ylabel("precision / recall")
            ax.set_ylim(-0.05, 1.05)
        ax.legend(fontsize=8)
        ax.set_title(result.kind.value.replace("_", " "))
        fig.tight_layout()
        path = Path(path)
        fig.savefig(path, dpi=150)
    finally:
        plt.close(fig)
    return path
