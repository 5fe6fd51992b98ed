"""Internal cluster-quality indices and the k-selection sweep container.

Hard-partition indices: silhouette, Calinski-Harabasz, point-biserial
correlation.  Fuzzy indices: partition coefficient, Xie-Beni, fuzzy
silhouette.  Higher is better everywhere except Xie-Beni.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .clustering import DistanceMatrix, FuzzyPartition, HardPartition, harden
from .exceptions import DomainError, UndefinedScoreError

#: Indices where smaller scores are preferred.
LOWER_IS_BETTER = frozenset({"xie_beni"})


def _silhouette_values(square: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    n = labels.size
    values = np.zeros(n)
    counts = np.array([(labels == g).sum() for g in range(k)])
    for i in range(n):
        own = labels[i]
        if counts[own] == 1:
            continue
        row = square[i]
        a = row[labels == own].sum() / (counts[own] - 1)
        b = math.inf
        for g in range(k):
            if g == own:
                continue
            b = min(b, row[labels == g].mean())
        denom = max(a, b)
        if denom > 0:
            values[i] = (b - a) / denom
    return values


def silhouette(D: DistanceMatrix, P: HardPartition) -> float:
    """Mean of (b - a)/max(a, b) over entities; singleton entities score 0."""
    if P.k < 2:
        raise DomainError(f"silhouette needs k >= 2, got k={P.k}")
    if D.n != P.n:
        raise DomainError("distance matrix and partition disagree on n")
    return float(_silhouette_values(D.as_square(), P.labels, P.k).mean())


def calinski_harabasz(X: np.ndarray, P: HardPartition) -> float:
    """Between/within variance ratio [tr(B)/(k-1)] / [tr(W)/(n-k)].

    All points sitting exactly on their centroids gives a zero within
    scatter; the index is reported as +inf with a warning.
    """
    X = np.asarray(X, dtype=float)
    n, k = P.n, P.k
    if X.shape[0] != n:
        raise DomainError("features and partition disagree on n")
    if k < 2:
        raise DomainError(f"Calinski-Harabasz needs k >= 2, got k={k}")
    if n <= k:
        raise DomainError(f"Calinski-Harabasz needs n > k, got n={n}, k={k}")
    grand = X.mean(axis=0)
    within = 0.0
    between = 0.0
    for g in range(P.k):
        members = X[P.labels == g]
        center = members.mean(axis=0)
        within += float(((members - center) ** 2).sum())
        between += members.shape[0] * float(((center - grand) ** 2).sum())
    if within == 0.0:
        warnings.warn("zero within-cluster scatter; index is +inf", stacklevel=2)
        return math.inf
    return (between / (k - 1)) / (within / (n - k))


def calinski_harabasz_from_distances(D: DistanceMatrix, P: HardPartition) -> float:
    """Distance-only Calinski-Harabasz for pipelines without a feature space.

    Uses the identity that within-cluster scatter about the centroid equals
    the mean of squared pairwise distances inside the cluster; total scatter
    comes from all pairs, and between = total - within.
    """
    n, k = P.n, P.k
    if D.n != n:
        raise DomainError("distance matrix and partition disagree on n")
    if k < 2:
        raise DomainError(f"Calinski-Harabasz needs k >= 2, got k={k}")
    if n <= k:
        raise DomainError(f"Calinski-Harabasz needs n > k, got n={n}, k={k}")
    square2 = D.as_square() ** 2
    total = square2[np.triu_indices(n, k=1)].sum() / n
    within = 0.0
    for g in range(k):
        idx = np.flatnonzero(P.labels == g)
        if idx.size > 1:
            sub = square2[np.ix_(idx, idx)]
            within += sub[np.triu_indices(idx.size, k=1)].sum() / idx.size
    between = total - within
    if within == 0.0:
        warnings.warn("zero within-cluster scatter; index is +inf", stacklevel=2)
        return math.inf
    return (between / (k - 1)) / (within / (n - k))


def point_biserial(D: DistanceMatrix, P: HardPartition) -> float:
    """Pearson correlation of pairwise distances with the between-cluster
    indicator (1 = between), so separated clusterings score positive."""
    if D.n != P.n:
        raise DomainError("distance matrix and partition disagree on n")
    labels = P.labels
    indicator = []
    for i in range(D.n):
        for j in range(i + 1, D.n):
            indicator.append(0.0 if labels[i] == labels[j] else 1.0)
    indicator_arr = np.array(indicator)
    if not np.any(indicator_arr == 0.0):
        raise DomainError("no within-cluster pairs; point-biserial undefined")
    if not np.any(indicator_arr == 1.0):
        raise DomainError("no between-cluster pairs; point-biserial undefined")
    dist = D.condensed
    if np.std(dist) == 0.0:
        raise UndefinedScoreError("all pairwise distances equal")
    return float(np.corrcoef(dist, indicator_arr)[0, 1])


def partition_coefficient(F: FuzzyPartition) -> float:
    """Mean squared membership (1/n) sum_i sum_g u_ig^2, in [1/k, 1]."""
    return float((F.memberships**2).sum() / F.n)


def xie_beni(
    X: np.ndarray, F: FuzzyPartition, centers: np.ndarray, m: float | None = None
) -> float:
    """Compactness over separation; lower is better.

    [sum_i sum_g u_ig^m |x_i - c_g|^2] / [n * min_{g != h} |c_g - c_h|^2].
    """
    X = np.asarray(X, dtype=float)
    centers = np.asarray(centers, dtype=float)
    if m is None:
        m = F.m
    if F.k < 2:
        raise DomainError(f"Xie-Beni needs k >= 2, got k={F.k}")
    if X.shape[0] != F.n or centers.shape[0] != F.k:
        raise DomainError("shapes of X, memberships, centers disagree")
    dist2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    numerator = float((F.memberships**m * dist2).sum())
    sep = math.inf
    for g in range(F.k):
        for h in range(g + 1, F.k):
            sep = min(sep, float(((centers[g] - centers[h]) ** 2).sum()))
    if sep == 0.0:
        raise UndefinedScoreError("coincident centers; separation is zero")
    return numerator / (F.n * sep)


def fuzzy_silhouette(
    D: DistanceMatrix | np.ndarray, F: FuzzyPartition, alpha: float = 1.0
) -> float:
    """Membership-weighted crisp silhouette.

    Weights are (u_first - u_second)^alpha from each entity's two largest
    memberships; crisp values come from the hardened partition.  Features
    may be passed instead of a DistanceMatrix, in which case Euclidean
    distances are used.
    """
    if F.k < 2:
        raise DomainError(f"fuzzy silhouette needs k >= 2, got k={F.k}")
    if isinstance(D, DistanceMatrix):
        square = D.as_square()
    else:
        X = np.asarray(D, dtype=float)
        square = np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2))
    if square.shape[0] != F.n:
        raise DomainError("distances and memberships disagree on n")
    hard = harden(F)
    if hard.k < 2:
        raise DomainError("hardened partition collapsed to one cluster")
    values = _silhouette_values(square, hard.labels, hard.k)
    ranked = np.sort(F.memberships, axis=1)
    weights = (ranked[:, -1] - ranked[:, -2]) ** alpha
    total = float(weights.sum())
    if total == 0.0:
        raise UndefinedScoreError("all entities tie their top two memberships")
    return float((weights * values).sum() / total)


# ---------------------------------------------------------------------------
# k-selection sweeps


@dataclass(frozen=True)
class SweepPoint:
    """Scores of every applicable index at one value of k."""

    k: int
    scores: Mapping[str, float]

    def __post_init__(self):
        object.__setattr__(self, "scores", dict(self.scores))
        for name, value in self.scores.items():
            if not math.isfinite(value):
                raise DomainError(f"non-finite {name} score at k={self.k}")


@dataclass(frozen=True)
class ValiditySweep:
    """Per-index score curves over k and each index's preferred k.

    Preference is the maximizer for every index except Xie-Beni (minimizer);
    ties go to the smaller k.
    """

    k_values: tuple[int, ...]
    scores: Mapping[str, tuple[float, ...]]
    selected_k: Mapping[str, int]

    def __post_init__(self):
        object.__setattr__(self, "k_values", tuple(self.k_values))
        object.__setattr__(
            self, "scores", {n: tuple(v) for n, v in self.scores.items()}
        )
        object.__setattr__(self, "selected_k", dict(self.selected_k))
        for name, curve in self.scores.items():
            if len(curve) != len(self.k_values):
                raise DomainError(f"{name}: {len(curve)} scores for "
                                  f"{len(self.k_values)} k values")
        for name, k in self.selected_k.items():
            if k not in self.k_values:
                raise DomainError(f"{name}: selected k={k} not in sweep")

    @property
    def index_names(self) -> tuple[str, ...]:
        return tuple(self.scores)


def build_sweep(points: Sequence[SweepPoint]) -> ValiditySweep:
    """Assemble sweep points (one per k) into curves and per-index choices."""
    if not points:
        raise DomainError("sweep needs at least one point")
    k_values = tuple(p.k for p in points)
    if len(set(k_values)) != len(k_values) or list(k_values) != sorted(k_values):
        raise DomainError(f"k values must be strictly increasing, got {k_values}")
    names = list(points[0].scores)
    for p in points:
        if list(p.scores) != names:
            raise DomainError("sweep points disagree on index set")
    scores = {name: tuple(p.scores[name] for p in points) for name in names}
    selected = {}
    for name, curve in scores.items():
        sign = -1.0 if name in LOWER_IS_BETTER else 1.0
        best_i = 0
        for i in range(1, len(curve)):
            if sign * curve[i] > sign * curve[best_i]:
                best_i = i
        selected[name] = k_values[best_i]
    return ValiditySweep(k_values=k_values, scores=scores, selected_k=selected)


def sweep(
    run_for_k: Callable[[int], SweepPoint], k_min: int, k_max: int
) -> ValiditySweep:
    """Run a pipeline closure at each k in [k_min, k_max] and assemble."""
    if k_min < 2:
        raise DomainError(f"sweeps start at k=2, got k_min={k_min}")
    if k_max < k_min:
        raise DomainError(f"k_max {k_max} below k_min {k_min}")
    return build_sweep([run_for_k(k) for k in range(k_min, k_max + 1)])


def write_sweep_csv(sweep_result: ValiditySweep, path: str | Path) -> None:
    """Long-format CSV: one (k, index, value) row per score."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(("k", "index", "value"))
        for name in sweep_result.index_names:
            for k, value in zip(sweep_result.k_values, sweep_result.scores[name]):
                writer.writerow((k, name, repr(float(value))))
