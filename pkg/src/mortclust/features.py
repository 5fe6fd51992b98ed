"""Dimension reduction and smoothing for the feature-based clustering routes.

Column standardization feeds SVD-based PCA (the logit-qx route); per-country
cubic B-spline least-squares fits summarize life-expectancy trajectories
(the functional route).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.interpolate import BSpline

from .exceptions import DomainError


def standardize_columns(M: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Center and scale each column to sample mean 0 and sample sd 1.

    Uses the n-1 divisor.  Returns (standardized, means, sds).
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise DomainError(f"expected entities x variables matrix, got ndim={M.ndim}")
    if M.shape[0] < 2:
        raise DomainError("standardization needs at least 2 rows")
    if not np.all(np.isfinite(M)):
        raise DomainError("matrix contains non-finite values")
    means = M.mean(axis=0)
    sds = M.std(axis=0, ddof=1)
    dead = np.flatnonzero(sds == 0.0)
    if dead.size:
        raise DomainError(
            f"zero-variance column(s): {', '.join(map(str, dead[:10]))}"
        )
    return (M - means) / sds, means, sds


@dataclass(frozen=True)
class PcaResult:
    """Principal components of a standardized matrix.

    ``scores`` are entity coordinates (U Sigma), ``loadings`` hold one unit
    vector per component column, ``explained_ratio`` the per-component share
    of total variance over all min(n-1, p) components.
    """

    scores: np.ndarray
    loadings: np.ndarray
    explained_ratio: np.ndarray

    def __post_init__(self):
        for name in ("scores", "loadings", "explained_ratio"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.scores.shape[1] != self.loadings.shape[1]:
            raise DomainError("scores and loadings disagree on component count")
        if np.any(np.diff(self.explained_ratio) > 1e-12):
            raise DomainError("explained_ratio must be non-increasing")

    @property
    def n_components(self) -> int:
        return self.scores.shape[1]


def pca(M: np.ndarray, n_components: int) -> PcaResult:
    """PCA via SVD of the (already standardized) matrix.

    Scores are U Sigma for the leading components; explained ratios use all
    singular values so they sum to 1 over the full rank.  Sign convention:
    the largest-magnitude entry of each loading column is positive.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise DomainError(f"expected entities x variables matrix, got ndim={M.ndim}")
    n, p = M.shape
    limit = min(n - 1, p)
    if not 1 <= n_components <= limit:
        raise DomainError(
            f"n_components must be in [1, {limit}] for a {n} x {p} matrix, "
            f"got {n_components}"
        )
    centered = M - M.mean(axis=0)
    u, s, vt = np.linalg.svd(centered, full_matrices=False)
    total = float(np.sum(s**2))
    if total == 0.0:
        raise DomainError("matrix has no variance; PCA undefined")
    explained = (s[:limit] ** 2) / total
    loadings = vt[:n_components].T.copy()
    scores = u[:, :n_components] * s[:n_components]
    for j in range(n_components):
        pivot = int(np.argmax(np.abs(loadings[:, j])))
        if loadings[pivot, j] < 0:
            loadings[:, j] = -loadings[:, j]
            scores[:, j] = -scores[:, j]
    return PcaResult(scores=scores, loadings=loadings, explained_ratio=explained)


@dataclass(frozen=True)
class SplineFit:
    """Least-squares cubic B-spline representation of one series."""

    coefficients: np.ndarray
    domain: tuple[float, float]
    degree: int
    n_basis: int

    def __post_init__(self):
        coef = np.asarray(self.coefficients, dtype=float)
        if coef.size != self.n_basis:
            raise DomainError(
                f"{coef.size} coefficients for n_basis={self.n_basis}"
            )
        if self.n_basis < self.degree + 1:
            raise DomainError("n_basis must be at least degree + 1")
        coef.setflags(write=False)
        object.__setattr__(self, "coefficients", coef)
        object.__setattr__(self, "domain", (float(self.domain[0]), float(self.domain[1])))

    @property
    def knots(self) -> np.ndarray:
        return _clamped_knots(self.domain[0], self.domain[1], self.n_basis, self.degree)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        lo, hi = self.domain
        if np.any(x < lo) or np.any(x > hi):
            raise DomainError(f"evaluation points outside domain [{lo}, {hi}]")
        basis = bspline_design_matrix(x, self.domain, self.n_basis, self.degree)
        return basis @ self.coefficients


def _clamped_knots(lo: float, hi: float, n_basis: int, degree: int) -> np.ndarray:
    """Clamped uniform knot vector: degree+1 copies of each endpoint,
    n_basis - degree - 1 equispaced interior knots."""
    n_interior = n_basis - degree - 1
    interior = np.linspace(lo, hi, n_interior + 2)[1:-1]
    return np.concatenate(
        [np.full(degree + 1, lo), interior, np.full(degree + 1, hi)]
    )


def bspline_design_matrix(
    x: np.ndarray,
    domain: tuple[float, float],
    n_basis: int,
    degree: int = 3,
) -> np.ndarray:
    """Evaluate the clamped B-spline basis at points x (rows sum to 1)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    knots = _clamped_knots(domain[0], domain[1], n_basis, degree)
    try:
        return BSpline.design_matrix(x, knots, degree, extrapolate=False).toarray()
    except ValueError as err:
        raise DomainError(f"evaluation outside domain {domain}: {err}") from None


def fit_bspline(
    years: Sequence[float],
    values: Sequence[float],
    n_basis: int = 25,
    degree: int = 3,
) -> SplineFit:
    """Least-squares B-spline fit of values over years.

    Knots are clamped uniform over [min(years), max(years)].
    """
    years_arr = np.asarray(years, dtype=float)
    values_arr = np.asarray(values, dtype=float)
    if years_arr.ndim != 1 or years_arr.shape != values_arr.shape:
        raise DomainError("years and values must be matching vectors")
    if np.any(np.diff(years_arr) <= 0):
        raise DomainError("years must be strictly increasing")
    if not (np.all(np.isfinite(years_arr)) and np.all(np.isfinite(values_arr))):
        raise DomainError("series contains non-finite values")
    if years_arr.size < n_basis:
        raise DomainError(
            f"underdetermined fit: {years_arr.size} points for {n_basis} "
            "basis functions"
        )
    domain = (float(years_arr[0]), float(years_arr[-1]))
    design = bspline_design_matrix(years_arr, domain, n_basis, degree)
    coef, *_ = np.linalg.lstsq(design, values_arr, rcond=None)
    return SplineFit(coefficients=coef, domain=domain, degree=degree, n_basis=n_basis)


def write_scores_csv(
    entity_ids: Sequence[str], result: PcaResult, path: str | Path
) -> None:
    """Export PCA scores and the explained-variance ratios."""
    if len(entity_ids) != result.scores.shape[0]:
        raise DomainError("entity count does not match score rows")
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        header = ["entity"] + [f"pc{j + 1}" for j in range(result.n_components)]
        writer.writerow(header)
        for eid, row in zip(entity_ids, result.scores):
            writer.writerow([eid] + [repr(float(v)) for v in row])
        writer.writerow(
            ["explained_ratio"]
            + [repr(float(v)) for v in result.explained_ratio[: result.n_components]]
        )


def write_spline_csv(
    fits: Mapping[str, SplineFit], path: str | Path
) -> None:
    """Export spline coefficient vectors, one row per entity."""
    sizes = {fit.n_basis for fit in fits.values()}
    if len(sizes) > 1:
        raise DomainError("fits disagree on n_basis")
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        n_basis = sizes.pop() if sizes else 0
        writer.writerow(["entity"] + [f"c{j + 1}" for j in range(n_basis)])
        for eid in sorted(fits):
            writer.writerow(
                [eid] + [repr(float(v)) for v in fits[eid].coefficients]
            )
