"""Figure emission for the report stage.

Heatmaps go to PNG, line and scatter plots to SVG.  Every figure has a
CSV twin written by the pipeline, so nothing downstream ever needs to
read pixels back; the figures are conveniences for humans.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from texgram.stats import BRAINSCORE_METRICS

# monotone-luminance colormap so distance ordering survives grayscale
HEATMAP_CMAP = "viridis"

_SVG_META = {"Date": None}  # keep SVG output reproducible


def save_heatmap_png(path, matrix, title="", boundaries=None):
    """Distance-matrix heatmap scaled to this matrix's own min/max.

    ``boundaries`` (optional) draws separator lines after the given row
    indices, used to outline class blocks in sorted matrices.
    """
    matrix = np.asarray(matrix)
    fig, ax = plt.subplots(figsize=(5.2, 4.4))
    im = ax.imshow(
        matrix,
        cmap=HEATMAP_CMAP,
        vmin=float(matrix.min()),
        vmax=float(matrix.max()),
        interpolation="nearest",
    )
    if boundaries is not None:
        for b in boundaries:
            ax.axhline(b - 0.5, color="white", linewidth=0.4, alpha=0.6)
            ax.axvline(b - 0.5, color="white", linewidth=0.4, alpha=0.6)
    ax.set_title(title)
    ax.set_xlabel("image (class-sorted)")
    ax.set_ylabel("image (class-sorted)")
    fig.colorbar(im, ax=ax, label="Euclidean distance")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_mi_lines_svg(path, per_model: dict, ylabel="MI (bits)", ceiling=None):
    """One line per model across tap indices 1..n.

    ``per_model`` maps model name -> sequence of MI values in tap order.
    """
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for name in sorted(per_model):
        values = per_model[name]
        ax.plot(range(1, len(values) + 1), values, marker="o", label=name)
    if ceiling is not None:
        ax.axhline(ceiling, color="gray", linestyle="--", linewidth=1,
                   label="ceiling")
    ax.set_xlabel("tap index")
    ax.set_ylabel(ylabel)
    ax.set_xticks(range(1, 1 + max(len(v) for v in per_model.values())))
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(path, metadata=_SVG_META)
    plt.close(fig)


def save_correlation_grid_svg(path, best_mi: dict, records, results):
    """Seven-panel scatter: best MI per model vs each benchmark metric."""
    by_model = {rec.model: rec for rec in records}
    models = sorted(best_mi)
    by_metric = {res.metric: res for res in results}
    fig, axes = plt.subplots(2, 4, figsize=(14, 6.5))
    axes = axes.ravel()
    cmap = plt.get_cmap("tab20")
    for panel, metric in enumerate(BRAINSCORE_METRICS):
        ax = axes[panel]
        for i, model in enumerate(models):
            ax.scatter(
                best_mi[model],
                by_model[model].metric(metric),
                color=cmap(i % 20),
                label=model if panel == 0 else None,
                s=28,
            )
        res = by_metric.get(metric)
        if res is not None and not res.undefined_variance:
            ax.set_title(f"{metric}: r={res.r:.3f}, p={res.p:.2f}")
        else:
            ax.set_title(f"{metric}: undefined")
        ax.set_xlabel("best MI (bits)")
        ax.set_ylabel(metric)
    axes[-1].axis("off")
    handles, labels = axes[0].get_legend_handles_labels()
    axes[-1].legend(handles, labels, fontsize=7, loc="center", ncol=2)
    fig.tight_layout()
    fig.savefig(path, metadata=_SVG_META)
    plt.close(fig)


def save_trace_svg(path, trace, title=""):
    """Loss-vs-iteration curve for a synthesis run."""
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    ax.semilogy(range(len(trace)), trace)
    ax.set_xlabel("accepted iteration")
    ax.set_ylabel("total loss")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, metadata=_SVG_META)
    plt.close(fig)
