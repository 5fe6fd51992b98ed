"""Clustering kernels shared by the four pipelines.

Contains the Hellinger distance matrix over normalized death distributions,
Ward agglomeration via Lance-Williams updates, Lloyd k-means with k-means++
seeding and restarts, fuzzy c-means, and the partition containers the
validity indices and reports consume.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .exceptions import DomainError, ReducedKError

KMEANS_SEED = 20100
KMEANS_RESTARTS = 50
FCM_RESTARTS = 20


# ---------------------------------------------------------------------------
# distance matrices


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric pairwise distances in condensed upper-triangular storage."""

    entity_ids: tuple[str, ...]
    condensed: np.ndarray

    def __post_init__(self):
        ids = tuple(self.entity_ids)
        object.__setattr__(self, "entity_ids", ids)
        cond = np.asarray(self.condensed, dtype=float)
        n = len(ids)
        expected = n * (n - 1) // 2
        if cond.shape != (expected,):
            raise DomainError(
                f"{n} entities need {expected} condensed entries, got {cond.shape}"
            )
        if not np.all(np.isfinite(cond)):
            raise DomainError("distances contain non-finite values")
        if np.any(cond < 0):
            raise DomainError("distances must be nonnegative")
        cond = cond.copy()
        cond.setflags(write=False)
        object.__setattr__(self, "condensed", cond)

    @property
    def n(self) -> int:
        return len(self.entity_ids)

    def _index(self, i: int, j: int) -> int:
        if i > j:
            i, j = j, i
        return i * (2 * self.n - i - 1) // 2 + (j - i - 1)

    def value(self, i: int, j: int) -> float:
        if i == j:
            return 0.0
        return float(self.condensed[self._index(i, j)])

    def as_square(self) -> np.ndarray:
        square = np.zeros((self.n, self.n))
        k = 0
        for i in range(self.n):
            for j in range(i + 1, self.n):
                square[i, j] = square[j, i] = self.condensed[k]
                k += 1
        return square

    @classmethod
    def from_square(cls, square: np.ndarray, entity_ids: Sequence[str]) -> "DistanceMatrix":
        square = np.asarray(square, dtype=float)
        n = square.shape[0]
        if square.shape != (n, n):
            raise DomainError(f"square matrix required, got {square.shape}")
        if np.abs(np.diagonal(square)).max(initial=0.0) > 1e-12:
            raise DomainError("diagonal must be zero")
        if np.abs(square - square.T).max(initial=0.0) > 1e-12:
            raise DomainError("matrix must be symmetric")
        idx = np.triu_indices(n, k=1)
        return cls(entity_ids=tuple(entity_ids), condensed=square[idx])


def euclidean_distance_matrix(
    X: np.ndarray, entity_ids: Sequence[str]
) -> DistanceMatrix:
    """Pairwise Euclidean distances between feature rows."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DomainError(f"expected entities x features, got ndim={X.ndim}")
    diff = X[:, None, :] - X[None, :, :]
    square = np.sqrt((diff**2).sum(axis=2))
    np.fill_diagonal(square, 0.0)
    square = (square + square.T) / 2
    return DistanceMatrix.from_square(square, entity_ids)


def hellinger_distance_matrix(
    dstar: np.ndarray, entity_ids: Sequence[str]
) -> DistanceMatrix:
    """Time-averaged Hellinger distance between death distributions.

    ``dstar`` is entities x years x ages with each (entity, year) slice a
    probability vector.  The distance for a pair is the mean over years of
    sqrt(0.5 * sum_ages (sqrt(p) - sqrt(q))^2), which lies in [0, 1].
    """
    dstar = np.asarray(dstar, dtype=float)
    if dstar.ndim != 3:
        raise DomainError(f"expected entities x years x ages, got ndim={dstar.ndim}")
    if dstar.shape[0] != len(entity_ids):
        raise DomainError(
            f"{len(entity_ids)} ids for {dstar.shape[0]} entities"
        )
    if np.any(dstar < 0):
        c, y, a = map(int, np.argwhere(dstar < 0)[0])
        raise DomainError(f"negative death share at entity {c}, year {y}, age {a}")
    sums = dstar.sum(axis=2)
    off = np.abs(sums - 1.0)
    if off.max(initial=0.0) > 1e-6:
        c, y = map(int, np.unravel_index(np.argmax(off), off.shape))
        raise DomainError(
            f"death distribution for entity {c}, year {y} sums to {sums[c, y]!r}"
        )
    roots = np.sqrt(dstar)
    n = dstar.shape[0]
    condensed = np.empty(n * (n - 1) // 2)
    k = 0
    for i in range(n):
        for j in range(i + 1, n):
            per_year = np.sqrt(0.5 * ((roots[i] - roots[j]) ** 2).sum(axis=1))
            condensed[k] = per_year.mean()
            k += 1
    return DistanceMatrix(entity_ids=tuple(entity_ids), condensed=condensed)


# ---------------------------------------------------------------------------
# Ward agglomeration


@dataclass(frozen=True)
class Merge:
    """One agglomeration step: clusters a < b joined at the given height."""

    a: int
    b: int
    height: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    """Full merge history of an agglomerative run.

    Leaves are 0..n-1; the merge at step s creates cluster id n+s, matching
    the usual linkage numbering.  Heights are the Ward criterion values on
    the squared-distance scale and are non-decreasing.
    """

    n_leaves: int
    merges: tuple[Merge, ...]

    def __post_init__(self):
        object.__setattr__(self, "merges", tuple(self.merges))
        if len(self.merges) != self.n_leaves - 1:
            raise DomainError(
                f"{self.n_leaves} leaves require {self.n_leaves - 1} merges, "
                f"got {len(self.merges)}"
            )
        heights = [m.height for m in self.merges]
        for prev, cur in zip(heights, heights[1:]):
            if cur < prev - 1e-9 * max(1.0, abs(prev)):
                raise DomainError(
                    f"merge heights decrease: {prev!r} -> {cur!r}"
                )

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_leaves": self.n_leaves,
                "height_scale": "ward criterion (squared-distance scale)",
                "merges": [
                    {"a": m.a, "b": m.b, "height": m.height, "size": m.size}
                    for m in self.merges
                ],
            },
            indent=2,
        )

    def to_newick(self, leaf_names: Sequence[str]) -> str:
        """Newick text with branch lengths from merge-height differences."""
        if len(leaf_names) != self.n_leaves:
            raise DomainError(
                f"{len(leaf_names)} names for {self.n_leaves} leaves"
            )
        shapes = {i: (str(name), 0.0) for i, name in enumerate(leaf_names)}
        node = self.n_leaves
        for m in self.merges:
            text_a, h_a = shapes.pop(m.a)
            text_b, h_b = shapes.pop(m.b)
            shapes[node] = (
                f"({text_a}:{max(m.height - h_a, 0.0):.10g},"
                f"{text_b}:{max(m.height - h_b, 0.0):.10g})",
                m.height,
            )
            node += 1
        (text, _), = shapes.values()
        return text + ";"


def ward_agglomerate(D: DistanceMatrix) -> Dendrogram:
    """Agglomerate with Lance-Williams Ward updates on squared distances.

    Tie-break between equal-cost pairs: lexicographically smallest
    (min_id, max_id).  Heights are the Ward criterion values at each merge.
    """
    n = D.n
    if n < 2:
        raise DomainError("agglomeration needs at least 2 entities")
    total = 2 * n - 1
    W = np.full((total, total), np.inf)
    square = D.as_square() ** 2
    W[:n, :n] = square
    sizes = np.zeros(total, dtype=int)
    sizes[:n] = 1
    active = list(range(n))
    merges = []
    for step in range(n - 1):
        best_w, best_pair = np.inf, None
        for ia in range(len(active)):
            for ib in range(ia + 1, len(active)):
                a, b = active[ia], active[ib]
                if W[a, b] < best_w:
                    best_w, best_pair = W[a, b], (a, b)
        a, b = best_pair
        new = n + step
        sizes[new] = sizes[a] + sizes[b]
        for c in active:
            if c == a or c == b:
                continue
            W[new, c] = W[c, new] = (
                (sizes[a] + sizes[c]) * W[a, c]
                + (sizes[b] + sizes[c]) * W[b, c]
                - sizes[c] * W[a, b]
            ) / (sizes[a] + sizes[b] + sizes[c])
        active = [c for c in active if c != a and c != b] + [new]
        merges.append(Merge(a=a, b=b, height=float(best_w), size=int(sizes[new])))
    return Dendrogram(n_leaves=n, merges=tuple(merges))


# ---------------------------------------------------------------------------
# partitions


@dataclass(frozen=True)
class HardPartition:
    """Crisp assignment of n entities to k non-empty clusters."""

    labels: np.ndarray
    k: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=int)
        if labels.ndim != 1:
            raise DomainError("labels must be a vector")
        if self.k < 1:
            raise DomainError(f"k must be positive, got {self.k}")
        if labels.size and (labels.min() < 0 or labels.max() >= self.k):
            raise DomainError(f"labels outside [0, {self.k})")
        present = np.unique(labels)
        if present.size != self.k:
            missing = sorted(set(range(self.k)) - set(present.tolist()))
            raise DomainError(f"empty cluster(s): {missing}")
        labels = labels.copy()
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.labels.size

    def sizes(self) -> tuple[int, ...]:
        return tuple(int(np.sum(self.labels == g)) for g in range(self.k))

    def members(self, g: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.labels == g))

    def relabel_by_first_entity(self) -> "HardPartition":
        """Canonical form: cluster 0 contains entity 0, labels then appear in
        entity order."""
        mapping: dict[int, int] = {}
        for lab in self.labels:
            if int(lab) not in mapping:
                mapping[int(lab)] = len(mapping)
        return HardPartition(
            labels=np.array([mapping[int(lab)] for lab in self.labels]), k=self.k
        )


def cut_dendrogram(d: Dendrogram, k: int) -> HardPartition:
    """The k clusters present after n-k merges, labeled in first-entity order."""
    n = d.n_leaves
    if not 1 <= k <= n:
        raise DomainError(f"k must be in [1, {n}], got {k}")
    cluster_of = list(range(n))
    members: dict[int, list[int]] = {i: [i] for i in range(n)}
    for step in range(n - k):
        m = d.merges[step]
        new = n + step
        members[new] = members.pop(m.a) + members.pop(m.b)
        for leaf in members[new]:
            cluster_of[leaf] = new
    mapping: dict[int, int] = {}
    labels = np.empty(n, dtype=int)
    for leaf in range(n):
        cid = cluster_of[leaf]
        if cid not in mapping:
            mapping[cid] = len(mapping)
        labels[leaf] = mapping[cid]
    return HardPartition(labels=labels, k=k)


@dataclass(frozen=True)
class FuzzyPartition:
    """Row-stochastic membership matrix with fuzziness exponent m."""

    memberships: np.ndarray
    m: float

    def __post_init__(self):
        u = np.asarray(self.memberships, dtype=float)
        if u.ndim != 2:
            raise DomainError("memberships must be entities x clusters")
        if self.m <= 1:
            raise DomainError(f"fuzziness m must exceed 1, got {self.m}")
        if np.any(u < 0) or np.any(u > 1):
            raise DomainError("memberships must lie in [0, 1]")
        rows = u.sum(axis=1)
        worst = np.abs(rows - 1.0).max(initial=0.0)
        if worst > 1e-9:
            raise DomainError(f"membership rows must sum to 1 (off by {worst!r})")
        u = u.copy()
        u.setflags(write=False)
        object.__setattr__(self, "memberships", u)
        object.__setattr__(self, "m", float(self.m))

    @property
    def n(self) -> int:
        return self.memberships.shape[0]

    @property
    def k(self) -> int:
        return self.memberships.shape[1]


def harden(F: FuzzyPartition) -> HardPartition:
    """Argmax per row; ties go to the lowest cluster index.

    If hardening leaves a cluster with no members it is dropped (with a
    warning) so the result is a valid partition; labels keep the ascending
    order of the surviving cluster indices.
    """
    labels = np.argmax(F.memberships, axis=1)
    present = np.unique(labels)
    if present.size < F.k:
        warnings.warn(
            f"hardening dropped {F.k - present.size} empty cluster(s)",
            stacklevel=2,
        )
        remap = {int(old): new for new, old in enumerate(present)}
        labels = np.array([remap[int(lab)] for lab in labels])
        return HardPartition(labels=labels, k=present.size)
    return HardPartition(labels=labels, k=F.k)


# ---------------------------------------------------------------------------
# k-means


def _kmeanspp_centers(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[int(rng.integers(n))]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))
        centers[j] = X[idx]
        d2 = np.minimum(d2, ((X - centers[j]) ** 2).sum(axis=1))
    return centers


def _lloyd(
    X: np.ndarray, centers: np.ndarray, max_iter: int = 300
) -> tuple[np.ndarray, np.ndarray, float, list[float]]:
    n, k = X.shape[0], centers.shape[0]
    labels = None
    history: list[float] = []
    for _ in range(max_iter):
        dist2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = dist2.argmin(axis=1)
        point_cost = dist2[np.arange(n), new_labels]
        for g in range(k):
            if not np.any(new_labels == g):
                # empty cluster: reseed from the farthest point
                far = int(np.argmax(point_cost))
                centers[g] = X[far]
                new_labels[far] = g
                point_cost[far] = 0.0
        converged = labels is not None and np.array_equal(new_labels, labels)
        labels = new_labels
        for g in range(k):
            centers[g] = X[labels == g].mean(axis=0)
        wss = float(((X - centers[labels]) ** 2).sum())
        history.append(wss)
        if converged:
            break
    return labels, centers, history[-1], history


@dataclass(frozen=True)
class KMeansResult:
    partition: HardPartition
    centroids: np.ndarray
    wss: float
    restart_index: int
    objective_history: tuple[float, ...] = field(repr=False)


def kmeans(
    X: np.ndarray,
    k: int,
    restarts: int = KMEANS_RESTARTS,
    seed: int = KMEANS_SEED,
) -> KMeansResult:
    """Best-of-restarts Lloyd iterations from k-means++ seeding.

    Restart r draws from ``default_rng([seed, r])``, so results do not
    depend on scheduling; the best run is the smallest WSS with ties going
    to the earlier restart.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DomainError(f"expected entities x features, got ndim={X.ndim}")
    if not np.all(np.isfinite(X)):
        raise DomainError("features contain non-finite values")
    n = X.shape[0]
    if not 1 <= k <= n:
        raise DomainError(f"k must be in [1, {n}], got {k}")
    if restarts < 1:
        raise DomainError(f"restarts must be >= 1, got {restarts}")
    n_distinct = np.unique(X, axis=0).shape[0]
    if n_distinct < k:
        raise ReducedKError(
            f"only {n_distinct} distinct rows for k={k}"
        )
    best = None
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        centers = _kmeanspp_centers(X, k, rng)
        labels, centers, wss, history = _lloyd(X, centers.copy())
        if best is None or wss < best[0]:
            best = (wss, r, labels, centers, history)
    wss, r, labels, centers, history = best
    return KMeansResult(
        partition=HardPartition(labels=labels, k=k),
        centroids=centers,
        wss=wss,
        restart_index=r,
        objective_history=tuple(history),
    )


# ---------------------------------------------------------------------------
# fuzzy c-means


def _fcm_memberships(X: np.ndarray, centers: np.ndarray, m: float) -> np.ndarray:
    dist2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    n, k = dist2.shape
    u = np.zeros((n, k))
    zero_rows = np.flatnonzero((dist2 == 0).any(axis=1))
    for i in zero_rows:
        hits = dist2[i] == 0
        u[i, hits] = 1.0 / hits.sum()
    regular = np.setdiff1d(np.arange(n), zero_rows)
    if regular.size:
        inv = dist2[regular] ** (-1.0 / (m - 1.0))
        u[regular] = inv / inv.sum(axis=1, keepdims=True)
    return u


@dataclass(frozen=True)
class FuzzyCMeansResult:
    partition: FuzzyPartition
    centers: np.ndarray
    objective: float
    restart_index: int
    objective_history: tuple[float, ...] = field(repr=False)


def fuzzy_cmeans(
    X: np.ndarray,
    k: int,
    m: float = 2.0,
    restarts: int = FCM_RESTARTS,
    seed: int = KMEANS_SEED,
    tol: float = 1e-8,
    max_iter: int = 500,
) -> FuzzyCMeansResult:
    """Alternating center/membership updates for the fuzzy c-means objective.

    Initialized from k-means++ centers per restart; converged when the
    largest membership change drops below ``tol``.  A point coinciding with
    a center takes membership 1 there (split uniformly when several centers
    coincide with it).
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DomainError(f"expected entities x features, got ndim={X.ndim}")
    if not np.all(np.isfinite(X)):
        raise DomainError("features contain non-finite values")
    n = X.shape[0]
    if not 1 <= k <= n:
        raise DomainError(f"k must be in [1, {n}], got {k}")
    if m <= 1:
        raise DomainError(f"fuzziness m must exceed 1, got {m}")
    best = None
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        centers = _kmeanspp_centers(X, k, rng).copy()
        u = _fcm_memberships(X, centers, m)
        history: list[float] = []
        for _ in range(max_iter):
            um = u**m
            weights = um.sum(axis=0)
            for g in range(k):
                if weights[g] > 0:
                    centers[g] = um[:, g] @ X / weights[g]
            u_new = _fcm_memberships(X, centers, m)
            dist2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            history.append(float((u_new**m * dist2).sum()))
            delta = float(np.abs(u_new - u).max())
            u = u_new
            if delta < tol:
                break
        objective = history[-1]
        if best is None or objective < best[0]:
            best = (objective, r, u, centers, history)
    objective, r, u, centers, history = best
    return FuzzyCMeansResult(
        partition=FuzzyPartition(memberships=u, m=m),
        centers=centers,
        objective=objective,
        restart_index=r,
        objective_history=tuple(history),
    )


# ---------------------------------------------------------------------------
# exports


def write_partition_csv(
    entity_ids: Sequence[str],
    partition: HardPartition,
    path: str | Path,
    memberships: FuzzyPartition | None = None,
) -> None:
    """Partition CSV with 1-based cluster ids; optional membership columns."""
    if len(entity_ids) != partition.n:
        raise DomainError("entity count does not match partition size")
    if memberships is not None and memberships.n != partition.n:
        raise DomainError("membership rows do not match partition size")
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        header = ["entity", "cluster"]
        if memberships is not None:
            header += [f"membership_{g + 1}" for g in range(memberships.k)]
        writer.writerow(header)
        for i, eid in enumerate(entity_ids):
            row = [eid, int(partition.labels[i]) + 1]
            if memberships is not None:
                row += [
                    repr(float(v)) for v in memberships.memberships[i]
                ]
            writer.writerow(row)
