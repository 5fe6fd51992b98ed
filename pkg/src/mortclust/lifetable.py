"""Life-table quantities and index transforms.

Everything downstream consumes the types defined here: an age grid with one
open-ended final interval, parsed life-table rows, and the dense
country x year x age panel of life-table columns.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .exceptions import DomainError, PanelLookupError, TransformDomainError

RADIX = 100_000.0

#: Life-table columns stored per (country, year, age) cell, in file order.
COLUMNS = ("mx", "qx", "ax", "lx", "dx", "Lx", "Tx", "ex")

#: Width marker for the open-ended final age interval.
OPEN = math.inf


def _parse_age_label(label: str) -> int:
    """Lower age bound for one HMD age token ("0", "1-4", "110+")."""
    token = label.strip()
    if token.endswith("+"):
        body = token[:-1]
    elif "-" in token:
        body = token.split("-", 1)[0]
    else:
        body = token
    try:
        return int(body)
    except ValueError:
        raise DomainError(f"unparseable age label {label!r}") from None


@dataclass(frozen=True)
class AgeGrid:
    """Ordered, contiguous age intervals; exactly one open interval, last."""

    lowers: tuple[int, ...]
    widths: tuple[float, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        n = len(self.lowers)
        if not (n == len(self.widths) == len(self.labels)):
            raise DomainError("age grid fields must have equal length")
        if n < 2:
            raise DomainError("age grid needs at least two intervals")
        if self.lowers[0] != 0 or self.widths[0] != 1:
            raise DomainError("first age interval must be [0, 1)")
        open_count = sum(1 for w in self.widths if math.isinf(w))
        if open_count != 1 or not math.isinf(self.widths[-1]):
            raise DomainError("exactly one open interval is allowed and it must be last")
        for i in range(n - 1):
            w = self.widths[i]
            if not (w > 0 and math.isfinite(w)):
                raise DomainError(f"interval {i} has invalid width {w}")
            if self.lowers[i] + w != self.lowers[i + 1]:
                raise DomainError(
                    f"age intervals not contiguous at index {i}: "
                    f"{self.lowers[i]} + {w} != {self.lowers[i + 1]}"
                )

    @classmethod
    def from_labels(cls, labels) -> "AgeGrid":
        """Build a grid from HMD age tokens; widths derive from the tokens."""
        labels = tuple(str(s).strip() for s in labels)
        if not labels or not labels[-1].endswith("+"):
            raise DomainError("last age label must be open-ended (suffix '+')")
        lowers = tuple(_parse_age_label(s) for s in labels)
        widths = tuple(
            float(lowers[i + 1] - lowers[i]) for i in range(len(labels) - 1)
        ) + (OPEN,)
        return cls(lowers=lowers, widths=widths, labels=labels)

    @classmethod
    def abridged_5x1(cls) -> "AgeGrid":
        """The 24-group abridged grid: 0, 1-4, 5-9, ..., 105-109, 110+."""
        labels = ["0", "1-4"] + [f"{a}-{a + 4}" for a in range(5, 110, 5)] + ["110+"]
        return cls.from_labels(labels)

    def __len__(self) -> int:
        return len(self.lowers)

    @property
    def open_index(self) -> int:
        return len(self.lowers) - 1

    def index_of(self, label: str) -> int:
        try:
            return self.labels.index(label.strip())
        except ValueError:
            raise DomainError(f"unknown age label {label!r}") from None


@dataclass(frozen=True)
class LifeTableRow:
    """One parsed life-table line for a (country, year, age group) cell."""

    country: str
    year: int
    age_index: int
    mx: float
    qx: float
    ax: float
    lx: float
    dx: float
    Lx: float
    Tx: float
    ex: float


def qx_from_mx(mx, n, ax):
    """Death probability from the central rate over an interval of width ``n``.

    Uses the constant-rate conversion n*mx / (1 + (n - ax)*mx).  Values that
    would exceed 1 (possible for extreme rates when ax > 0) are capped at 1.0
    with a RuntimeWarning; the open interval is not allowed here.
    Accepts scalars or broadcastable arrays.
    """
    mx = np.asarray(mx, dtype=float)
    n_arr = np.asarray(n, dtype=float)
    ax_arr = np.asarray(ax, dtype=float)
    if np.any(~np.isfinite(n_arr)) or np.any(n_arr <= 0):
        raise DomainError("interval width must be finite and positive (open interval not allowed)")
    if np.any(mx < 0):
        raise DomainError("central death rate must be nonnegative")
    if np.any(ax_arr < 0) or np.any(ax_arr > n_arr):
        raise DomainError("average years lived must satisfy 0 <= ax <= n")
    q = n_arr * mx / (1.0 + (n_arr - ax_arr) * mx)
    capped = q > 1.0
    if np.any(capped):
        warnings.warn(
            "death probability capped at 1.0 for extreme central rates",
            RuntimeWarning,
            stacklevel=2,
        )
        q = np.where(capped, 1.0, q)
    if q.ndim == 0:
        return float(q)
    return q


@dataclass(frozen=True)
class MortalityPanel:
    """Dense, rectangular country x year x age array of life-table columns.

    Immutable after construction: the backing arrays are copied and marked
    read-only, so panels are safe to share across threads.
    """

    countries: tuple[str, ...]
    years: tuple[int, ...]
    grid: AgeGrid
    data: Mapping[str, np.ndarray] = field(repr=False)

    def __post_init__(self):
        shape = (len(self.countries), len(self.years), len(self.grid))
        if len(set(self.countries)) != len(self.countries):
            raise DomainError("duplicate country codes in panel")
        if tuple(sorted(self.years)) != self.years:
            raise DomainError("panel years must be ascending")
        frozen = {}
        for col in COLUMNS:
            if col not in self.data:
                raise DomainError(f"panel missing column {col!r}")
            arr = np.array(self.data[col], dtype=float)
            if arr.shape != shape:
                raise DomainError(
                    f"column {col!r} has shape {arr.shape}, expected {shape}"
                )
            if np.isnan(arr).any():
                c, y, a = map(int, np.argwhere(np.isnan(arr))[0])
                raise DomainError(
                    f"panel has a missing value at "
                    f"({self.countries[c]}, {self.years[y]}, {self.grid.labels[a]})"
                )
            arr.setflags(write=False)
            frozen[col] = arr
        object.__setattr__(self, "data", MappingProxyType(frozen))

    @property
    def shape(self) -> tuple[int, int, int]:
        return (len(self.countries), len(self.years), len(self.grid))

    def column(self, name: str) -> np.ndarray:
        """Read-only (country, year, age) array for one life-table column."""
        if name not in self.data:
            raise DomainError(f"unknown life-table column {name!r}")
        return self.data[name]

    def country_index(self, country: str) -> int:
        try:
            return self.countries.index(country)
        except ValueError:
            raise PanelLookupError(f"unknown country {country!r}") from None

    def year_index(self, year: int) -> int:
        try:
            return self.years.index(int(year))
        except ValueError:
            raise PanelLookupError(f"year {year} not in panel") from None


def normalized_death_distribution(panel: MortalityPanel, country: str, year: int) -> np.ndarray:
    """Relative death counts dx / l0 per age group for one (country, year)."""
    c = panel.country_index(country)
    y = panel.year_index(year)
    dx = panel.column("dx")[c, y]
    l0 = panel.column("lx")[c, y, 0]
    if l0 <= 0:
        raise DomainError(f"nonpositive radix for ({country}, {year})")
    out = dx / l0
    if np.any(out < 0):
        raise DomainError(f"negative death count for ({country}, {year})")
    return out


class PanelIndex(enum.Enum):
    """Feature transforms of the panel consumed by the clustering pipelines."""

    LOG_MX = "log_mx"
    LOGIT_QX = "logit_qx"
    DSTAR = "dstar"
    E0 = "e0"


def transform(panel: MortalityPanel, index: PanelIndex, drop_open: bool = True) -> np.ndarray:
    """Feature array for one panel index.

    LOG_MX and DSTAR return (country, year, age); LOGIT_QX returns
    (country, year, age) with the open age group dropped first when
    ``drop_open`` is set (its death probability is identically 1); E0 returns
    the (country, year) series of life expectancy at birth.  Boundary values
    raise rather than being clamped.
    """
    index = PanelIndex(index)
    if index is PanelIndex.E0:
        return panel.column("ex")[:, :, 0].copy()
    if index is PanelIndex.DSTAR:
        dx = panel.column("dx")
        l0 = panel.column("lx")[:, :, :1]
        if np.any(l0 <= 0):
            raise TransformDomainError("nonpositive radix in panel")
        return dx / l0
    if index is PanelIndex.LOG_MX:
        mx = panel.column("mx")
        bad = mx <= 0
        if bad.any():
            c, y, a = map(int, np.argwhere(bad)[0])
            raise TransformDomainError(
                f"log_mx undefined: mx <= 0 at "
                f"({panel.countries[c]}, {panel.years[y]}, {panel.grid.labels[a]})"
            )
        return np.log(mx)
    # LOGIT_QX
    qx = panel.column("qx")
    if drop_open:
        qx = qx[:, :, : panel.grid.open_index]
    bad = (qx <= 0) | (qx >= 1)
    if bad.any():
        c, y, a = map(int, np.argwhere(bad)[0])
        raise TransformDomainError(
            f"logit_qx undefined: qx outside (0, 1) at "
            f"({panel.countries[c]}, {panel.years[y]}, {panel.grid.labels[a]})"
        )
    return np.log(qx / (1.0 - qx))


def lifetable_identity_report(
    panel: MortalityPanel,
    dx_tol: float = 1e-6 * RADIX,
    tx_tol: float = 1e-6 * RADIX,
    ex_tol: float = 1e-2,
) -> list[str]:
    """Check the internal life-table identities; returns a list of violations.

    Tolerances default to what rounded HMD columns satisfy: lx/dx/Lx/Tx are
    published as integers and ex to two decimals.
    """
    problems = []
    lx = panel.column("lx")
    dx = panel.column("dx")
    Lx = panel.column("Lx")
    Tx = panel.column("Tx")
    ex = panel.column("ex")
    qx = panel.column("qx")
    mx = panel.column("mx")

    if np.any(np.abs(lx[:, :, 0] - RADIX) > 1e-9):
        problems.append("radix l0 != 100000 for some (country, year)")
    if np.any(np.diff(lx, axis=2) > 1e-9):
        problems.append("lx increasing in age for some (country, year)")
    step = lx[:, :, :-1] - lx[:, :, 1:]
    if np.max(np.abs(dx[:, :, :-1] - step)) > dx_tol:
        problems.append(f"dx != lx - l(x+n) beyond tolerance {dx_tol}")
    if np.max(np.abs(dx[:, :, -1] - lx[:, :, -1])) > dx_tol:
        problems.append("open-interval dx != lx beyond tolerance")
    suffix = np.flip(np.cumsum(np.flip(Lx, axis=2), axis=2), axis=2)
    if np.max(np.abs(Tx - suffix)) > tx_tol * panel.shape[2]:
        problems.append("Tx != suffix sum of Lx beyond tolerance")
    with np.errstate(divide="ignore", invalid="ignore"):
        ex_check = np.where(lx > 0, Tx / np.where(lx > 0, lx, 1.0), ex)
    if np.max(np.abs(ex_check - ex)) > ex_tol:
        problems.append(f"ex != Tx/lx beyond tolerance {ex_tol}")
    if np.any(np.abs(qx[:, :, -1] - 1.0) > 1e-9):
        problems.append("open-interval qx != 1")
    if np.any((qx < 0) | (qx > 1)):
        problems.append("qx outside [0, 1]")
    if np.any(mx < 0):
        problems.append("negative mx")
    if np.any(ex < 0):
        problems.append("negative ex")
    return problems
