"""Figure rendering for the CLI report path.

Every command that writes delimited output can also drop the matching
figures next to it: reaction-statistic histograms after labeling,
coefficient ranges after fitting, and confusion/timeline plots after
evaluation.  All figures go straight to files (Agg backend, no display).
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import ConfusionMatrix, SituationTimeline
from .labeling import CLASS_ORDER
from .mnl import ALTERNATIVES, FittedModel

_CLASS_COLORS = {"no_reaction": "tab:gray", "prudent": "tab:blue", "aggressive": "tab:red"}

_DPI = 120


def save_k_histogram(path, k_values, threshold: float, kind: str) -> None:
    """Distribution of the reaction statistic with the class thresholds."""
    k_values = np.asarray(k_values, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    if len(k_values):
        lim = max(2.0, float(np.percentile(np.abs(k_values), 98)))
        bins = np.linspace(-lim, lim, 41)
        ax.hist(np.clip(k_values, -lim, lim), bins=bins, color="tab:blue", edgecolor="white")
    ax.axvline(-threshold, color="tab:red", linestyle="--", label=f"±{threshold} s")
    ax.axvline(threshold, color="tab:red", linestyle="--")
    ax.set_xlabel("k [s]")
    ax.set_ylabel("conflict instants")
    ax.set_title(f"Reaction statistic, {kind}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_coefficient_figure(path, model: FittedModel) -> None:
    """Coefficients with 95% intervals, one panel per alternative."""
    names = ("Intercept", *model.spec.predictor_names)
    pos = np.arange(len(names))
    fig, axes = plt.subplots(1, 2, figsize=(9, 0.6 + 0.42 * len(names)), sharey=True)
    for a, (alt, ax) in enumerate(zip(ALTERNATIVES, axes)):
        est = model.params[a]
        err = 1.96 * model.se[a] if model.se is not None else np.zeros_like(est)
        ax.errorbar(est, pos, xerr=err, fmt="o", color="tab:blue", capsize=3)
        ax.axvline(0.0, color="0.6", linewidth=0.8)
        ax.set_title(f"{model.spec.baseline.value} -> {alt.value}")
        ax.set_xlabel("coefficient")
    axes[0].set_yticks(pos)
    axes[0].set_yticklabels(names)
    axes[0].invert_yaxis()
    fig.suptitle(f"Reaction-choice model: {model.spec.user_kind.value}")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_confusion_figure(path, cm: ConfusionMatrix, kind: str) -> None:
    names = [c.value for c in CLASS_ORDER]
    fig, ax = plt.subplots(figsize=(5, 4.5))
    im = ax.imshow(cm.counts, cmap="Blues")
    for i in range(len(names)):
        for j in range(len(names)):
            count = int(cm.counts[i, j])
            color = "white" if count > cm.counts.max() / 2 else "black"
            ax.text(j, i, str(count), ha="center", va="center", color=color)
    ax.set_xticks(range(len(names)), names, rotation=30, ha="right")
    ax.set_yticks(range(len(names)), names)
    ax.set_xlabel("predicted")
    ax.set_ylabel("observed")
    ax.set_title(f"Confusion matrix ({kind})")
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_timeline_figure(path, tl: SituationTimeline, step: float, kind: str) -> None:
    """Predicted class probabilities over one conflict situation."""
    t = tl.steps * step
    fig, ax = plt.subplots(figsize=(7, 4))
    for idx, cls in enumerate(CLASS_ORDER):
        ax.plot(t, tl.probabilities[:, idx], marker="o", markersize=3,
                label=f"p({cls.value})", color=_CLASS_COLORS[cls.value])
    for i, cls in enumerate(tl.observed):
        ax.axvspan(t[i] - step / 2, t[i] + step / 2, ymin=0.97, ymax=1.0,
                   color=_CLASS_COLORS[cls.value], alpha=0.9)
    ax.set_ylim(0.0, 1.05)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("predicted probability")
    ax.set_title(
        f"{kind} reaction probabilities, pair {tl.ped_id}/{tl.veh_id} "
        "(top strip: observed class)"
    )
    ax.legend(loc="center left", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
