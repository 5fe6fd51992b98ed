"""SVG figure emission for runs, sweeps, and the consensus graph.

All output is SVG with text kept as text and a fixed hash salt, so repeated
runs produce byte-identical files; tests assert on structure (labels,
element counts), never pixels.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from scipy.cluster import hierarchy  # noqa: E402
import numpy as np  # noqa: E402

from .exceptions import DomainError  # noqa: E402
from .lifetable import MortalityPanel, PanelIndex, transform  # noqa: E402
from .pipelines import ConsensusGraph, PipelineName, PipelineResult  # noqa: E402
from .validity import LOWER_IS_BETTER, ValiditySweep  # noqa: E402

matplotlib.rcParams["svg.fonttype"] = "none"
matplotlib.rcParams["svg.hashsalt"] = "mortclust"

#: Cluster color cycle (colorblind-friendly Okabe-Ito subset).
PALETTE = ("#0072B2", "#D55E00", "#009E73", "#CC79A7", "#E69F00", "#56B4E9")

TREND_AGE_LABELS = ("0", "15-19", "45-49", "75-79")


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _color(cluster: int) -> str:
    return PALETTE[cluster % len(PALETTE)]


def save_dendrogram(result: PipelineResult, path: str | Path) -> Path:
    """Merge tree with entity labels; height axis is the Ward criterion."""
    if result.dendrogram is None:
        raise DomainError("result carries no dendrogram")
    d = result.dendrogram
    linkage = np.array(
        [[m.a, m.b, m.height, m.size] for m in d.merges], dtype=float
    )
    fig, ax = plt.subplots(figsize=(10, 5))
    hierarchy.dendrogram(
        linkage,
        labels=list(result.entity_ids),
        ax=ax,
        color_threshold=0.0,
        above_threshold_color="#444444",
        leaf_rotation=90,
    )
    ax.set_ylabel("Ward criterion")
    ax.set_title("Agglomeration of countries")
    fig.tight_layout()
    return _save(fig, path)


def save_dstar_bands(
    panel: MortalityPanel, result: PipelineResult, path: str | Path
) -> Path:
    """Per-cluster quantile bands (10/50/90) of death distributions by age."""
    dstar = transform(panel, PanelIndex.DSTAR)
    k = result.partition.k
    fig, axes = plt.subplots(1, k, figsize=(4 * k, 3.5), sharey=True)
    if k == 1:
        axes = [axes]
    x = np.arange(len(panel.grid))
    for g, ax in enumerate(axes):
        members = result.partition.members(g)
        pooled = dstar[list(members)].reshape(-1, len(panel.grid))
        lo, mid, hi = np.quantile(pooled, [0.1, 0.5, 0.9], axis=0)
        ax.fill_between(x, lo, hi, color=_color(g), alpha=0.3)
        ax.plot(x, mid, color=_color(g))
        ax.set_title(f"Cluster {g + 1} (n={len(members)})")
        ax.set_xticks(x[::4])
        ax.set_xticklabels([panel.grid.labels[i] for i in x[::4]], rotation=45)
        ax.set_xlabel("age group")
    axes[0].set_ylabel("share of deaths")
    fig.tight_layout()
    return _save(fig, path)


def save_beta_curves(result: PipelineResult, labels: Sequence[str], path: str | Path) -> Path:
    """Unit-drift age effects per country, colored by cluster."""
    if result.lc_fits is None:
        raise DomainError("result carries no age-effect fits")
    fig, ax = plt.subplots(figsize=(8, 4.5))
    x = np.arange(len(labels))
    for i, country in enumerate(result.entity_ids):
        cluster = int(result.partition.labels[i])
        ax.plot(
            x,
            result.lc_fits[country].beta,
            color=_color(cluster),
            alpha=0.7,
            linewidth=1.0,
        )
    for g in range(result.partition.k):
        ax.plot([], [], color=_color(g), label=f"Cluster {g + 1}")
    ax.set_xticks(x[::4])
    ax.set_xticklabels([labels[i] for i in x[::4]], rotation=45)
    ax.set_xlabel("age group")
    ax.set_ylabel("age effect (unit drift)")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def save_logmx_trends(
    panel: MortalityPanel,
    result: PipelineResult,
    path: str | Path,
    age_labels: Sequence[str] = TREND_AGE_LABELS,
) -> Path:
    """Cluster-mean log death rates over time for selected age groups."""
    logm = transform(panel, PanelIndex.LOG_MX)
    years = list(panel.years)
    fig, axes = plt.subplots(
        1, len(age_labels), figsize=(3.5 * len(age_labels), 3.2), sharex=True
    )
    if len(age_labels) == 1:
        axes = [axes]
    for ax, label in zip(axes, age_labels):
        ai = panel.grid.index_of(label)
        for g in range(result.partition.k):
            members = list(result.partition.members(g))
            ax.plot(
                years,
                logm[members, :, ai].mean(axis=0),
                color=_color(g),
                label=f"Cluster {g + 1}",
            )
        ax.set_title(f"ages {label}")
        ax.set_xlabel("year")
    axes[0].set_ylabel("log death rate")
    axes[-1].legend()
    fig.tight_layout()
    return _save(fig, path)


def save_membership_bars(result: PipelineResult, path: str | Path) -> Path:
    """Membership in the first cluster, one bar per country."""
    if result.fuzzy is None:
        raise DomainError("result carries no fuzzy memberships")
    values = result.fuzzy.memberships[:, 0]
    order = np.argsort(-values, kind="stable")
    fig, ax = plt.subplots(figsize=(6, 0.3 * len(order) + 1.2))
    y = np.arange(len(order))
    colors = [_color(int(result.partition.labels[i])) for i in order]
    ax.barh(y, values[order], color=colors)
    ax.set_yticks(y)
    ax.set_yticklabels([result.entity_ids[i] for i in order], fontsize=7)
    ax.invert_yaxis()
    ax.set_xlabel("membership in cluster 1")
    ax.set_xlim(0, 1)
    fig.tight_layout()
    return _save(fig, path)


def save_e0_curves(
    panel: MortalityPanel, result: PipelineResult, path: str | Path
) -> Path:
    """Life expectancy at birth over time, colored by cluster."""
    e0 = transform(panel, PanelIndex.E0)
    years = list(panel.years)
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for i in range(len(result.entity_ids)):
        cluster = int(result.partition.labels[i])
        ax.plot(years, e0[i], color=_color(cluster), alpha=0.7, linewidth=1.0)
    for g in range(result.partition.k):
        ax.plot([], [], color=_color(g), label=f"Cluster {g + 1}")
    ax.set_xlabel("year")
    ax.set_ylabel("life expectancy at birth")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def save_sweep_curves(sweep: ValiditySweep, out_dir: str | Path) -> list[Path]:
    """One SVG per index: score against k, preferred k marked."""
    out_dir = Path(out_dir)
    paths = []
    for name in sweep.index_names:
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.plot(sweep.k_values, sweep.scores[name], marker="o", color=PALETTE[0])
        chosen = sweep.selected_k[name]
        chosen_value = sweep.scores[name][sweep.k_values.index(chosen)]
        ax.scatter([chosen], [chosen_value], color=PALETTE[1], zorder=3)
        direction = "min" if name in LOWER_IS_BETTER else "max"
        ax.set_title(f"{name} ({direction} at k={chosen})")
        ax.set_xlabel("number of clusters")
        ax.set_ylabel("score")
        ax.set_xticks(list(sweep.k_values))
        fig.tight_layout()
        paths.append(_save(fig, out_dir / f"sweep_{name}.svg"))
    return paths


def save_consensus(graph: ConsensusGraph, path: str | Path) -> Path:
    """Force-directed drawing: edge width by weight, labeled nodes."""
    laid = graph if graph.layout is not None else graph.with_layout()
    pos = laid.layout
    fig, ax = plt.subplots(figsize=(8, 8))
    max_w = max((w for _, _, w in laid.edges()), default=1)
    for i, j, w in laid.edges():
        ax.plot(
            [pos[i, 0], pos[j, 0]],
            [pos[i, 1], pos[j, 1]],
            color="#888888",
            linewidth=2.0 * w / max_w,
            alpha=0.25 + 0.7 * (w / max_w),
            zorder=1,
        )
    ax.scatter(pos[:, 0], pos[:, 1], s=60, color=PALETTE[0], zorder=2)
    for idx, node in enumerate(laid.nodes):
        ax.annotate(
            node,
            (pos[idx, 0], pos[idx, 1]),
            textcoords="offset points",
            xytext=(4, 4),
            fontsize=8,
        )
    ax.set_xticks([])
    ax.set_yticks([])
    ax.set_title("Co-clustering consensus")
    fig.tight_layout()
    return _save(fig, path)


def figures_for_result(
    panel: MortalityPanel, result: PipelineResult, out_dir: str | Path
) -> list[Path]:
    """Emit the figure set appropriate to the pipeline that produced
    ``result``; returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    name = result.spec.name
    paths = []
    if name is PipelineName.HELLINGER_WARD:
        paths.append(save_dendrogram(result, out_dir / "dendrogram.svg"))
        paths.append(save_dstar_bands(panel, result, out_dir / "dstar_bands.svg"))
        paths.append(save_logmx_trends(panel, result, out_dir / "logmx_trends.svg"))
    elif name is PipelineName.ILC_KMEANS:
        paths.append(
            save_beta_curves(
                result, panel.grid.labels, out_dir / "beta_by_age.svg"
            )
        )
        paths.append(save_logmx_trends(panel, result, out_dir / "logmx_trends.svg"))
    elif name is PipelineName.PCA_FUZZY:
        paths.append(
            save_membership_bars(result, out_dir / "membership_bars.svg")
        )
    elif name is PipelineName.FUNC_KMEANS:
        paths.append(save_e0_curves(panel, result, out_dir / "e0_curves.svg"))
    return paths
