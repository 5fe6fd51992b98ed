"""Synthetic life tables for offline tests and demos.

Builds internally consistent tables from chosen central death rates, a
planted-cluster panel generator whose ground truth every pipeline should
recover, and a writer that emits the same byte format the ingest parser
reads.  Rounded mode mimics the published precision (5-decimal rates,
integer person counts) so serialized fixtures survive a parse round trip.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .exceptions import DomainError
from .hmd import DataSelection, build_panel, serialize_lifetable
from .lifetable import RADIX, AgeGrid, LifeTableRow, MortalityPanel, qx_from_mx

PLANTED_SEED = 20100

#: Per-cluster generator settings: level shift of log rates, kappa drift,
#: and the age profile family of the period effect.
_CLUSTER_SHIFTS = (0.0, 0.4, 0.8)
_CLUSTER_DRIFTS = (-0.3, -0.5, -0.8)


def lifetable_columns_from_mx(
    mx: np.ndarray, grid: AgeGrid, rounded: bool = True
) -> dict[str, np.ndarray]:
    """Complete life-table columns implied by central death rates.

    Interior separation factors: ax = width/2 (0.30 for the infant group);
    the open group closes with qx = 1 and ax = 1/mx.  With ``rounded`` the
    person-count columns are integers and rates keep 5 decimals, matching
    the published file precision while preserving the accounting
    identities exactly.
    """
    mx = np.asarray(mx, dtype=float)
    n_ages = len(grid)
    if mx.shape != (n_ages,):
        raise DomainError(f"mx has shape {mx.shape}, grid has {n_ages} groups")
    if np.any(mx <= 0):
        raise DomainError("mx must be positive")
    widths = np.array(grid.widths[:-1])
    ax = np.empty(n_ages)
    ax[0] = 0.30
    ax[1:-1] = widths[1:] / 2.0
    ax[-1] = 1.0 / mx[-1]
    qx = np.empty(n_ages)
    qx[:-1] = qx_from_mx(mx[:-1], widths, ax[:-1])
    qx[-1] = 1.0
    if np.any(qx[:-1] >= 1.0):
        raise DomainError("interior qx reached 1; lower the requested mx")
    if rounded:
        mx = np.round(mx, 5)
        qx = np.round(qx, 5)
        ax = np.round(ax, 2)

    lx = np.empty(n_ages)
    dx = np.empty(n_ages)
    Lx = np.empty(n_ages)
    lx[0] = RADIX
    for i in range(n_ages - 1):
        dx[i] = lx[i] * qx[i]
        if rounded:
            dx[i] = np.round(dx[i])
        lx[i + 1] = lx[i] - dx[i]
        Lx[i] = grid.widths[i] * lx[i + 1] + ax[i] * dx[i]
    dx[-1] = lx[-1]
    Lx[-1] = lx[-1] * ax[-1]
    if rounded:
        Lx = np.round(Lx)
    Tx = np.cumsum(Lx[::-1])[::-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        ex = np.where(lx > 0, Tx / np.maximum(lx, 1e-300), 0.0)
    if rounded:
        ex = np.round(ex, 2)
    return {
        "mx": mx, "qx": qx, "ax": ax, "lx": lx,
        "dx": dx, "Lx": Lx, "Tx": Tx, "ex": ex,
    }


def rows_from_surface(
    country: str,
    years: Sequence[int],
    mx_surface: np.ndarray,
    grid: AgeGrid | None = None,
    rounded: bool = True,
) -> list[LifeTableRow]:
    """Life-table rows for one country from a years x ages rate surface."""
    if grid is None:
        grid = AgeGrid.abridged_5x1()
    mx_surface = np.asarray(mx_surface, dtype=float)
    if mx_surface.shape != (len(years), len(grid)):
        raise DomainError(
            f"surface shape {mx_surface.shape}, expected "
            f"({len(years)}, {len(grid)})"
        )
    rows = []
    for yi, year in enumerate(years):
        cols = lifetable_columns_from_mx(mx_surface[yi], grid, rounded=rounded)
        for ai in range(len(grid)):
            rows.append(
                LifeTableRow(
                    country=country,
                    year=int(year),
                    age_index=ai,
                    **{name: float(cols[name][ai]) for name in cols},
                )
            )
    return rows


def _age_midpoints(grid: AgeGrid) -> np.ndarray:
    mids = []
    for lower, width in zip(grid.lowers, grid.widths):
        mids.append(lower + (2.5 if width == float("inf") else width / 2.0))
    return np.array(mids)


def _cluster_beta(cluster: int, mids: np.ndarray) -> np.ndarray:
    if cluster == 0:
        shape = np.exp(-mids / 30.0)
    elif cluster == 1:
        shape = np.ones_like(mids)
    else:
        shape = np.exp(-((mids - 60.0) ** 2) / 800.0)
    return shape / shape.sum()


def planted_surfaces(
    n_per_cluster: int = 4,
    year_min: int = 1980,
    year_max: int = 2010,
    seed: int = PLANTED_SEED,
) -> tuple[dict[str, np.ndarray], tuple[int, ...], tuple[int, ...]]:
    """Rate surfaces for 3 planted clusters of countries.

    Clusters differ in mortality level, in the age profile of change, and
    in the pace of decline, so every route (death distributions, age
    effects, logit-qx components, e0 curves) separates the same ground
    truth.  Within-cluster jitter keeps all feature rows distinct.
    Returns (surfaces by country code, years, true labels in code order).
    """
    grid = AgeGrid.abridged_5x1()
    mids = _age_midpoints(grid)
    years = tuple(range(year_min, year_max + 1))
    t = np.arange(len(years), dtype=float)
    t_centered = t - t.mean()
    base_alpha = -8.2 + 0.065 * np.minimum(mids, 80.0)

    surfaces: dict[str, np.ndarray] = {}
    labels = []
    index = 0
    for cluster in range(3):
        beta_c = _cluster_beta(cluster, mids)
        for _ in range(n_per_cluster):
            rng = np.random.default_rng([seed, index])
            alpha = (
                base_alpha
                + _CLUSTER_SHIFTS[cluster]
                + rng.normal(0.0, 0.05)
                + rng.normal(0.0, 0.01, size=mids.size)
            )
            beta = beta_c + rng.normal(0.0, 0.003, size=mids.size)
            beta = beta / beta.sum()
            drift = _CLUSTER_DRIFTS[cluster] * (1.0 + rng.normal(0.0, 0.02))
            kappa = drift * t_centered
            logm = alpha[None, :] + kappa[:, None] * beta[None, :]
            surfaces[f"SYN{index:02d}"] = np.exp(logm)
            labels.append(cluster)
            index += 1
    codes = tuple(sorted(surfaces))
    ordered_labels = tuple(labels[int(code[3:])] for code in codes)
    return surfaces, years, ordered_labels


def planted_panel(
    n_per_cluster: int = 4,
    year_min: int = 1980,
    year_max: int = 2010,
    seed: int = PLANTED_SEED,
    rounded: bool = False,
) -> tuple[MortalityPanel, np.ndarray]:
    """Assembled planted panel plus the true labels (entity order)."""
    surfaces, years, labels = planted_surfaces(
        n_per_cluster, year_min, year_max, seed
    )
    files = {
        code: rows_from_surface(code, years, surface, rounded=rounded)
        for code, surface in surfaces.items()
    }
    sel = DataSelection(tuple(surfaces), years[0], years[-1])
    return build_panel(files, sel), np.array(labels)


def write_hmd_corpus(
    out_dir: str | Path,
    rows_by_code: Mapping[str, Sequence[LifeTableRow]],
    names: Mapping[str, str] | None = None,
) -> list[Path]:
    """Write one ``<CODE>.bltper_5x1.txt`` per country in the parser's
    byte format; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = AgeGrid.abridged_5x1()
    paths = []
    for code in sorted(rows_by_code):
        name = (names or {}).get(code, code)
        text = serialize_lifetable(rows_by_code[code], grid, name)
        path = out_dir / f"{code}.bltper_5x1.txt"
        path.write_text(text)
        paths.append(path)
    return paths


def write_planted_corpus(
    out_dir: str | Path,
    n_per_cluster: int = 4,
    year_min: int = 1980,
    year_max: int = 2010,
    seed: int = PLANTED_SEED,
) -> tuple[tuple[str, ...], tuple[int, ...]]:
    """Planted clusters serialized as an on-disk corpus (rounded values).

    Returns (country codes, true labels) in alphabetical code order.
    """
    surfaces, years, labels = planted_surfaces(
        n_per_cluster, year_min, year_max, seed
    )
    rows = {
        code: rows_from_surface(code, years, surface, rounded=True)
        for code, surface in surfaces.items()
    }
    write_hmd_corpus(out_dir, rows)
    return tuple(sorted(surfaces)), labels
