"""End-to-end clustering pipelines and the cross-method consensus graph.

Four routes over the same panel: Hellinger distances with Ward linkage,
k-means on unit-drift age effects, fuzzy c-means on principal components of
logit death probabilities, and k-means on B-spline coefficients of life
expectancy at birth.  Partitions are canonicalized so cluster numbering
follows the alphabetically first member, making reports directly diffable.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence
from xml.sax.saxutils import quoteattr

import numpy as np

from .clustering import (
    FCM_RESTARTS,
    KMEANS_RESTARTS,
    KMEANS_SEED,
    Dendrogram,
    DistanceMatrix,
    FuzzyPartition,
    HardPartition,
    cut_dendrogram,
    euclidean_distance_matrix,
    fuzzy_cmeans,
    harden,
    hellinger_distance_matrix,
    kmeans,
    ward_agglomerate,
)
from .exceptions import (
    DegenerateDriftError,
    DegenerateFitError,
    DomainError,
    PipelineError,
)
from .features import (
    PcaResult,
    SplineFit,
    fit_bspline,
    pca,
    standardize_columns,
)
from .leecarter import LeeCarterFit, fit_lee_carter, rescale_unit_drift
from .lifetable import MortalityPanel, PanelIndex, transform
from .validity import (
    SweepPoint,
    ValiditySweep,
    calinski_harabasz,
    calinski_harabasz_from_distances,
    fuzzy_silhouette,
    partition_coefficient,
    point_biserial,
    silhouette,
    sweep,
    xie_beni,
)


class PipelineName(enum.Enum):
    HELLINGER_WARD = "hellinger_ward"
    ILC_KMEANS = "ilc_kmeans"
    PCA_FUZZY = "pca_fuzzy"
    FUNC_KMEANS = "func_kmeans"

    @classmethod
    def parse(cls, text: str) -> "PipelineName":
        cleaned = text.strip().lower().replace("-", "_")
        for member in cls:
            if member.value == cleaned:
                return member
        raise DomainError(
            f"unknown pipeline {text!r}; choose from "
            + ", ".join(m.value for m in cls)
        )


DEFAULT_K: Mapping[PipelineName, int] = {
    PipelineName.HELLINGER_WARD: 3,
    PipelineName.ILC_KMEANS: 2,
    PipelineName.PCA_FUZZY: 2,
    PipelineName.FUNC_KMEANS: 2,
}


@dataclass(frozen=True)
class PipelineSpec:
    """One pipeline run's identity: route, k, hyperparameters, seed."""

    name: PipelineName
    k: int
    n_components: int = 6
    n_basis: int = 25
    degree: int = 3
    m: float = 2.0
    restarts: int | None = None
    seed: int = KMEANS_SEED

    def __post_init__(self):
        if self.k < 1:
            raise DomainError(f"k must be positive, got {self.k}")
        if self.n_components < 1:
            raise DomainError("n_components must be positive")
        if self.n_basis < self.degree + 1:
            raise DomainError("n_basis must be at least degree + 1")
        if self.m <= 1:
            raise DomainError(f"fuzziness m must exceed 1, got {self.m}")
        if self.restarts is not None and self.restarts < 1:
            raise DomainError("restarts must be >= 1")

    @property
    def effective_restarts(self) -> int:
        if self.restarts is not None:
            return self.restarts
        if self.name is PipelineName.PCA_FUZZY:
            return FCM_RESTARTS
        return KMEANS_RESTARTS

    @classmethod
    def default(cls, name: PipelineName, **overrides) -> "PipelineSpec":
        overrides.setdefault("k", DEFAULT_K[name])
        return cls(name=name, **overrides)


@dataclass(frozen=True)
class PipelineResult:
    """A finished run: canonical partition plus route-specific products."""

    spec: PipelineSpec
    entity_ids: tuple[str, ...]
    partition: HardPartition
    features: np.ndarray | None = None
    distance: DistanceMatrix | None = None
    dendrogram: Dendrogram | None = None
    fuzzy: FuzzyPartition | None = None
    centers: np.ndarray | None = None
    pca_result: PcaResult | None = None
    lc_fits: Mapping[str, LeeCarterFit] | None = None
    splines: Mapping[str, SplineFit] | None = None
    wss: float | None = None
    objective: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "entity_ids", tuple(self.entity_ids))
        if len(self.entity_ids) != self.partition.n:
            raise DomainError("entity ids do not match partition size")

    def cluster_members(self) -> dict[int, tuple[str, ...]]:
        """1-based cluster id -> member entities, in entity order."""
        out: dict[int, tuple[str, ...]] = {}
        for g in range(self.partition.k):
            out[g + 1] = tuple(
                self.entity_ids[i] for i in self.partition.members(g)
            )
        return out


def _first_seen_order(labels: np.ndarray, k: int) -> np.ndarray:
    """Cluster ids in order of first appearance along the entity axis."""
    order: list[int] = []
    for lab in labels:
        if int(lab) not in order:
            order.append(int(lab))
    if len(order) != k:
        raise DomainError("partition does not use all cluster ids")
    return np.array(order)


# ---------------------------------------------------------------------------
# feature builders


def dstar_array(panel: MortalityPanel) -> np.ndarray:
    """Normalized death distributions, countries x years x ages."""
    return transform(panel, PanelIndex.DSTAR)


def ilc_beta_matrix(
    panel: MortalityPanel,
) -> tuple[np.ndarray, dict[str, LeeCarterFit]]:
    """Per-country unit-drift age effects stacked into countries x ages."""
    logm = transform(panel, PanelIndex.LOG_MX)
    fits: dict[str, LeeCarterFit] = {}
    rows = []
    for ci, country in enumerate(panel.countries):
        try:
            fit = rescale_unit_drift(fit_lee_carter(logm[ci].T))
        except (DegenerateFitError, DegenerateDriftError) as exc:
            raise PipelineError(f"{country}: {exc}") from exc
        fits[country] = fit
        rows.append(fit.beta)
    return np.array(rows), fits


def logit_qx_matrix(panel: MortalityPanel) -> np.ndarray:
    """Flatten logit qx (open group dropped) to countries x (ages * years).

    Columns are age-major: column a * n_years + y holds age group a in
    year y.  Column order is a serialization convention only; it does not
    affect PCA spectra or the clustering.
    """
    logit = transform(panel, PanelIndex.LOGIT_QX, drop_open=True)
    n_countries, n_years, n_ages = logit.shape
    return logit.transpose(0, 2, 1).reshape(n_countries, n_ages * n_years)


def e0_spline_matrix(
    panel: MortalityPanel, n_basis: int = 25, degree: int = 3
) -> tuple[np.ndarray, dict[str, SplineFit]]:
    """Per-country B-spline coefficients of e0 over time, stacked."""
    e0 = transform(panel, PanelIndex.E0)
    years = np.asarray(panel.years, dtype=float)
    fits: dict[str, SplineFit] = {}
    rows = []
    for ci, country in enumerate(panel.countries):
        fit = fit_bspline(years, e0[ci], n_basis=n_basis, degree=degree)
        fits[country] = fit
        rows.append(fit.coefficients)
    return np.array(rows), fits


# ---------------------------------------------------------------------------
# the four pipelines


def run_hellinger_ward(
    panel: MortalityPanel, k: int = 3, spec: PipelineSpec | None = None
) -> PipelineResult:
    """Hellinger distances on death distributions, Ward linkage, cut at k."""
    if spec is None:
        spec = PipelineSpec(name=PipelineName.HELLINGER_WARD, k=k)
    distance = hellinger_distance_matrix(dstar_array(panel), panel.countries)
    dendrogram = ward_agglomerate(distance)
    partition = cut_dendrogram(dendrogram, spec.k)
    return PipelineResult(
        spec=spec,
        entity_ids=panel.countries,
        partition=partition,
        distance=distance,
        dendrogram=dendrogram,
    )


def run_ilc_kmeans(
    panel: MortalityPanel, k: int = 2, spec: PipelineSpec | None = None
) -> PipelineResult:
    """k-means over the unit-drift age effects of per-country fits."""
    if spec is None:
        spec = PipelineSpec(name=PipelineName.ILC_KMEANS, k=k)
    X, fits = ilc_beta_matrix(panel)
    km = kmeans(X, spec.k, restarts=spec.effective_restarts, seed=spec.seed)
    order = _first_seen_order(km.partition.labels, km.partition.k)
    return PipelineResult(
        spec=spec,
        entity_ids=panel.countries,
        partition=km.partition.relabel_by_first_entity(),
        features=X,
        centers=km.centroids[order],
        lc_fits=fits,
        wss=km.wss,
    )


def run_pca_fuzzy(
    panel: MortalityPanel,
    k: int = 2,
    n_components: int = 6,
    spec: PipelineSpec | None = None,
) -> PipelineResult:
    """Fuzzy c-means on leading principal components of logit qx."""
    if spec is None:
        spec = PipelineSpec(
            name=PipelineName.PCA_FUZZY, k=k, n_components=n_components
        )
    M = logit_qx_matrix(panel)
    standardized, _, _ = standardize_columns(M)
    pca_result = pca(standardized, spec.n_components)
    fc = fuzzy_cmeans(
        pca_result.scores,
        spec.k,
        m=spec.m,
        restarts=spec.effective_restarts,
        seed=spec.seed,
    )
    hard = harden(fc.partition)
    if hard.k == fc.partition.k:
        order = _first_seen_order(hard.labels, hard.k)
        fuzzy = FuzzyPartition(
            memberships=fc.partition.memberships[:, order], m=fc.partition.m
        )
        centers = fc.centers[order]
        partition = harden(fuzzy)
    else:
        # hardening dropped a cluster; keep raw column order
        fuzzy, centers, partition = fc.partition, fc.centers, hard
    return PipelineResult(
        spec=spec,
        entity_ids=panel.countries,
        partition=partition,
        features=pca_result.scores,
        fuzzy=fuzzy,
        centers=centers,
        pca_result=pca_result,
        objective=fc.objective,
    )


def run_func_kmeans(
    panel: MortalityPanel,
    k: int = 2,
    n_basis: int = 25,
    spec: PipelineSpec | None = None,
) -> PipelineResult:
    """k-means over B-spline coefficient vectors of e0 trajectories."""
    if spec is None:
        spec = PipelineSpec(name=PipelineName.FUNC_KMEANS, k=k, n_basis=n_basis)
    X, fits = e0_spline_matrix(panel, n_basis=spec.n_basis, degree=spec.degree)
    km = kmeans(X, spec.k, restarts=spec.effective_restarts, seed=spec.seed)
    order = _first_seen_order(km.partition.labels, km.partition.k)
    return PipelineResult(
        spec=spec,
        entity_ids=panel.countries,
        partition=km.partition.relabel_by_first_entity(),
        features=X,
        centers=km.centroids[order],
        splines=fits,
        wss=km.wss,
    )


_RUNNERS = {
    PipelineName.HELLINGER_WARD: run_hellinger_ward,
    PipelineName.ILC_KMEANS: run_ilc_kmeans,
    PipelineName.PCA_FUZZY: run_pca_fuzzy,
    PipelineName.FUNC_KMEANS: run_func_kmeans,
}


def run_pipeline(panel: MortalityPanel, spec: PipelineSpec) -> PipelineResult:
    """Dispatch a run by its spec."""
    return _RUNNERS[spec.name](panel, spec=spec)


# ---------------------------------------------------------------------------
# k-selection sweeps


def sweep_pipeline(
    panel: MortalityPanel,
    name: PipelineName,
    k_min: int = 2,
    k_max: int = 8,
    seed: int = KMEANS_SEED,
) -> ValiditySweep:
    """Score one pipeline across k in [k_min, k_max].

    Hard routes report silhouette, Calinski-Harabasz and point-biserial;
    the fuzzy route reports partition coefficient, fuzzy silhouette and
    Xie-Beni.  Features (and the Ward tree) are computed once and shared
    across k so scores differ only through the partition.
    """
    n = len(panel.countries)
    if k_max > n - 1:
        raise DomainError(f"k_max must be at most n-1 = {n - 1}, got {k_max}")

    if name is PipelineName.HELLINGER_WARD:
        distance = hellinger_distance_matrix(dstar_array(panel), panel.countries)
        dendrogram = ward_agglomerate(distance)

        def point(k: int) -> SweepPoint:
            part = cut_dendrogram(dendrogram, k)
            return SweepPoint(
                k=k,
                scores={
                    "silhouette": silhouette(distance, part),
                    "calinski_harabasz": calinski_harabasz_from_distances(
                        distance, part
                    ),
                    "point_biserial": point_biserial(distance, part),
                },
            )

    elif name in (PipelineName.ILC_KMEANS, PipelineName.FUNC_KMEANS):
        if name is PipelineName.ILC_KMEANS:
            X, _ = ilc_beta_matrix(panel)
        else:
            X, _ = e0_spline_matrix(panel)
        distance = euclidean_distance_matrix(X, panel.countries)

        def point(k: int) -> SweepPoint:
            km = kmeans(X, k, restarts=KMEANS_RESTARTS, seed=seed)
            return SweepPoint(
                k=k,
                scores={
                    "silhouette": silhouette(distance, km.partition),
                    "calinski_harabasz": calinski_harabasz(X, km.partition),
                    "point_biserial": point_biserial(distance, km.partition),
                },
            )

    elif name is PipelineName.PCA_FUZZY:
        M = logit_qx_matrix(panel)
        standardized, _, _ = standardize_columns(M)
        scores_matrix = pca(standardized, 6).scores

        def point(k: int) -> SweepPoint:
            fc = fuzzy_cmeans(
                scores_matrix, k, m=2.0, restarts=FCM_RESTARTS, seed=seed
            )
            return SweepPoint(
                k=k,
                scores={
                    "partition_coefficient": partition_coefficient(fc.partition),
                    "fuzzy_silhouette": fuzzy_silhouette(
                        scores_matrix, fc.partition
                    ),
                    "xie_beni": xie_beni(scores_matrix, fc.partition, fc.centers),
                },
            )

    else:
        raise DomainError(f"no sweep defined for {name}")

    return sweep(point, k_min, k_max)


# ---------------------------------------------------------------------------
# consensus graph


@dataclass(frozen=True)
class ConsensusGraph:
    """Countries as nodes; edge weight = number of methods co-clustering
    the pair.  Zero-weight pairs carry no edge."""

    nodes: tuple[str, ...]
    weights: np.ndarray
    n_methods: int
    layout: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        weights = np.asarray(self.weights, dtype=int)
        n = len(self.nodes)
        if weights.shape != (n, n):
            raise DomainError(f"weights shape {weights.shape} for {n} nodes")
        if np.any(weights != weights.T):
            raise DomainError("weights must be symmetric")
        if np.any(np.diagonal(weights) != 0):
            raise DomainError("self-edges are not allowed")
        if weights.min(initial=0) < 0 or weights.max(initial=0) > self.n_methods:
            raise DomainError(
                f"weights must lie in [0, {self.n_methods}]"
            )
        weights = weights.copy()
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        if self.layout is not None:
            layout = np.asarray(self.layout, dtype=float)
            if layout.shape != (n, 2):
                raise DomainError(f"layout shape {layout.shape} for {n} nodes")
            layout = layout.copy()
            layout.setflags(write=False)
            object.__setattr__(self, "layout", layout)

    @property
    def n(self) -> int:
        return len(self.nodes)

    def edges(self) -> list[tuple[int, int, int]]:
        out = []
        for i in range(self.n):
            for j in range(i + 1, self.n):
                w = int(self.weights[i, j])
                if w > 0:
                    out.append((i, j, w))
        return out

    def weight_between(self, a: str, b: str) -> int:
        i, j = self.nodes.index(a), self.nodes.index(b)
        return int(self.weights[i, j])

    def with_layout(self, seed: int = 7, iterations: int = 500) -> "ConsensusGraph":
        return replace(
            self, layout=fr_layout(self.weights, iterations=iterations, seed=seed)
        )

    def to_json(self) -> str:
        payload: dict = {
            "n_methods": self.n_methods,
            "nodes": list(self.nodes),
            "edges": [
                {"source": self.nodes[i], "target": self.nodes[j], "weight": w}
                for i, j, w in self.edges()
            ],
        }
        if self.layout is not None:
            payload["layout"] = {
                node: [float(x), float(y)]
                for node, (x, y) in zip(self.nodes, self.layout)
            }
        return json.dumps(payload, indent=2, sort_keys=True)

    def to_graphml(self) -> str:
        lines = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            '<graphml xmlns="http://graphml.graphdrawing.org/xmlns">',
            '  <key id="weight" for="edge" attr.name="weight" attr.type="int"/>',
            '  <key id="x" for="node" attr.name="x" attr.type="double"/>',
            '  <key id="y" for="node" attr.name="y" attr.type="double"/>',
            '  <graph id="consensus" edgedefault="undirected">',
        ]
        for i, node in enumerate(self.nodes):
            if self.layout is None:
                lines.append(f"    <node id={quoteattr(node)}/>")
            else:
                x, y = self.layout[i]
                lines.append(
                    f"    <node id={quoteattr(node)}>"
                    f'<data key="x">{x!r}</data>'
                    f'<data key="y">{y!r}</data></node>'
                )
        for i, j, w in self.edges():
            lines.append(
                f"    <edge source={quoteattr(self.nodes[i])} "
                f"target={quoteattr(self.nodes[j])}>"
                f'<data key="weight">{w}</data></edge>'
            )
        lines += ["  </graph>", "</graphml>", ""]
        return "\n".join(lines)


def consensus(
    parts: Sequence[tuple[Sequence[str], HardPartition]]
) -> ConsensusGraph:
    """Co-clustering counts across partitions over the same entity set.

    Each element pairs an entity-id sequence with its partition; sets must
    coincide (order may differ and is realigned to the first).
    """
    if not parts:
        raise DomainError("consensus needs at least one partition")
    ref_ids = tuple(parts[0][0])
    if len(set(ref_ids)) != len(ref_ids):
        raise DomainError("duplicate entity ids")
    n = len(ref_ids)
    weights = np.zeros((n, n), dtype=int)
    for ids, part in parts:
        ids = tuple(ids)
        if part.n != len(ids):
            raise DomainError("entity ids do not match partition size")
        if set(ids) != set(ref_ids):
            raise DomainError("partitions cover different entity sets")
        pos = {e: i for i, e in enumerate(ids)}
        labels = np.array([part.labels[pos[e]] for e in ref_ids])
        weights += (labels[:, None] == labels[None, :]).astype(int)
    np.fill_diagonal(weights, 0)
    return ConsensusGraph(nodes=ref_ids, weights=weights, n_methods=len(parts))


def fr_layout(
    weights: np.ndarray, iterations: int = 500, seed: int = 7
) -> np.ndarray:
    """Force-directed layout with linear cooling, normalized to the unit
    square.

    Repulsion acts between all pairs, attraction along edges scaled by
    weight.  Deterministic given the seed; a single node sits at the
    center, and a degenerate axis collapses to 0.5.
    """
    weights = np.asarray(weights, dtype=float)
    n = weights.shape[0]
    if n == 0:
        raise DomainError("layout needs at least one node")
    if n == 1:
        return np.array([[0.5, 0.5]])
    rng = np.random.default_rng(seed)
    pos = rng.random((n, 2))
    k = math.sqrt(1.0 / n)
    t0 = 0.1
    for it in range(iterations):
        delta = pos[:, None, :] - pos[None, :, :]
        dist = np.maximum(np.sqrt((delta**2).sum(axis=2)), 1e-9)
        inv = 1.0 / dist
        np.fill_diagonal(inv, 0.0)
        repulsion = k * k * inv
        attraction = weights * dist**2 / k
        coef = (repulsion - attraction) * inv
        disp = (coef[:, :, None] * delta).sum(axis=1)
        length = np.maximum(np.sqrt((disp**2).sum(axis=1)), 1e-12)
        t = t0 * (1.0 - it / iterations)
        pos += disp * (np.minimum(length, t) / length)[:, None]
        np.clip(pos, 0.0, 1.0, out=pos)
    mins, maxs = pos.min(axis=0), pos.max(axis=0)
    out = np.empty_like(pos)
    for axis in (0, 1):
        span = maxs[axis] - mins[axis]
        if span <= 1e-12:
            out[:, axis] = 0.5
        else:
            out[:, axis] = (pos[:, axis] - mins[axis]) / span
    return out


# ---------------------------------------------------------------------------
# run reports


def write_run_report(
    result: PipelineResult,
    path: str | Path,
    panel_sha256: str | None = None,
) -> None:
    """JSON record of one run: spec, partition, metrics, input checksum.

    Cluster ids are 1-based in all external artifacts.
    """
    spec = result.spec
    report: dict = {
        "pipeline": spec.name.value,
        "n_clusters": result.partition.k,
        "hyperparameters": {
            "requested_k": spec.k,
            "n_components": spec.n_components,
            "n_basis": spec.n_basis,
            "degree": spec.degree,
            "m": spec.m,
            "restarts": spec.effective_restarts,
            "seed": spec.seed,
        },
        "entities": list(result.entity_ids),
        "clusters": [int(lab) + 1 for lab in result.partition.labels],
        "cluster_members": {
            str(g): list(members)
            for g, members in result.cluster_members().items()
        },
    }
    if result.fuzzy is not None:
        report["memberships"] = [
            [float(v) for v in row] for row in result.fuzzy.memberships
        ]
    if result.wss is not None:
        report["wss"] = result.wss
    if result.objective is not None:
        report["objective"] = result.objective
    if panel_sha256 is not None:
        report["panel_sha256"] = panel_sha256
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")


def read_run_report(
    path: str | Path,
) -> tuple[PipelineName, tuple[str, ...], HardPartition]:
    """Load (pipeline name, entity ids, partition) back from a run report."""
    data = json.loads(Path(path).read_text())
    entities = tuple(data["entities"])
    labels = np.asarray(data["clusters"], dtype=int) - 1
    partition = HardPartition(labels=labels, k=int(data["n_clusters"]))
    return PipelineName.parse(data["pipeline"]), entities, partition
