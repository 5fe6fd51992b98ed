"""HMD period life-table ingestion.

Parses the combined-sex 5x1 "bltper" text distribution format and assembles
the rectangular mortality panel.  The expected file layout is: a title line
naming the population and containing "Life tables", a blank line, the column
header ``Year Age mx qx ax lx dx Lx Tx ex``, then whitespace-separated data
rows with HMD age tokens and "." for missing values.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import warnings
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .exceptions import (
    DataFormatError,
    DomainError,
    MissingDataError,
    PanelAssemblyError,
)
from .lifetable import COLUMNS, AgeGrid, LifeTableRow, MortalityPanel

HEADER_TOKENS = ("Year", "Age", "mx", "qx", "ax", "lx", "dx", "Lx", "Tx", "ex")

#: HMD codes for the 30-country replication selection, with display names.
#: Countries with multiple population series use the total-population variant
#: (FRATNP, GBR_NP, NZL_NP); the choice is recorded in the ingest manifest.
COUNTRY_NAMES: Mapping[str, str] = {
    "AUS": "Australia",
    "AUT": "Austria",
    "BEL": "Belgium",
    "BGR": "Bulgaria",
    "BLR": "Belarus",
    "CAN": "Canada",
    "CHE": "Switzerland",
    "CZE": "Czechia",
    "DNK": "Denmark",
    "ESP": "Spain",
    "EST": "Estonia",
    "FIN": "Finland",
    "FRATNP": "France",
    "GBR_NP": "United Kingdom",
    "HUN": "Hungary",
    "IRL": "Ireland",
    "ITA": "Italy",
    "JPN": "Japan",
    "LTU": "Lithuania",
    "LVA": "Latvia",
    "NLD": "Netherlands",
    "NOR": "Norway",
    "NZL_NP": "New Zealand",
    "POL": "Poland",
    "PRT": "Portugal",
    "RUS": "Russia",
    "SVK": "Slovakia",
    "SWE": "Sweden",
    "UKR": "Ukraine",
    "USA": "United States",
}

REPLICATION_CODES = tuple(sorted(COUNTRY_NAMES))
REPLICATION_YEARS = (1960, 2010)


def display_name(code: str) -> str:
    """Human-readable country name; falls back to the code itself."""
    return COUNTRY_NAMES.get(code, code)


@dataclass(frozen=True)
class DataSelection:
    """Which countries and years to assemble into a panel."""

    country_codes: tuple[str, ...]
    year_min: int
    year_max: int
    require_complete: bool = True

    def __post_init__(self):
        if self.year_min > self.year_max:
            raise DomainError(
                f"year_min {self.year_min} exceeds year_max {self.year_max}"
            )
        object.__setattr__(self, "country_codes", tuple(self.country_codes))

    @property
    def years(self) -> range:
        return range(self.year_min, self.year_max + 1)

    @classmethod
    def replication(cls) -> "DataSelection":
        """The 30 countries, 1960-2010."""
        return cls(REPLICATION_CODES, *REPLICATION_YEARS)


def _parse_number(token: str, line_no: int, what: str) -> float:
    if token == ".":
        return math.nan
    try:
        return float(token)
    except ValueError:
        raise DataFormatError(f"unparseable {what} value {token!r}", line_no) from None


def parse_lifetable_text(text: str | bytes, country: str) -> list[LifeTableRow]:
    """Parse one HMD life-table file into rows in file order.

    Missing values (".") become NaN fields; whether they are fatal is decided
    at panel assembly where the selection is known.  Non-monotone lx within a
    year block raises an integrity warning, not an error.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8-sig")
    lines = text.splitlines()
    if len(lines) < 4:
        raise DataFormatError("file too short to be an HMD life table", len(lines))
    if "Life tables" not in lines[0]:
        raise DataFormatError("title line does not contain 'Life tables'", 1)
    if lines[1].strip():
        raise DataFormatError("expected a blank separator line", 2)
    if tuple(lines[2].split()) != HEADER_TOKENS:
        raise DataFormatError(
            f"column header must be {' '.join(HEADER_TOKENS)!r}, "
            f"got {lines[2].strip()!r}",
            3,
        )

    rows: list[LifeTableRow] = []
    block_year = None
    block_ages: list[str] = []
    prev_lx = math.inf
    for line_no, line in enumerate(lines[3:], start=4):
        if not line.strip():
            continue
        tokens = line.split()
        if len(tokens) != 10:
            raise DataFormatError(
                f"expected 10 columns, got {len(tokens)}", line_no
            )
        try:
            year = int(tokens[0])
        except ValueError:
            raise DataFormatError(f"unparseable year {tokens[0]!r}", line_no) from None
        age_label = tokens[1]
        if year != block_year:
            block_year = year
            block_ages = []
            prev_lx = math.inf
        block_ages.append(age_label)
        values = [
            _parse_number(tok, line_no, name)
            for tok, name in zip(tokens[2:], HEADER_TOKENS[2:])
        ]
        lx = values[3]
        if not math.isnan(lx):
            if lx > prev_lx + 1e-9:
                warnings.warn(
                    f"{country} {year}: lx increases at age {age_label} "
                    f"({prev_lx} -> {lx})",
                    stacklevel=2,
                )
            prev_lx = lx
        rows.append(
            LifeTableRow(
                country=country,
                year=year,
                age_index=len(block_ages) - 1,
                mx=values[0],
                qx=values[1],
                ax=values[2],
                lx=values[3],
                dx=values[4],
                Lx=values[5],
                Tx=values[6],
                ex=values[7],
            )
        )
        # validate the age progression lazily: it must form a proper grid
        if age_label.endswith("+"):
            AgeGrid.from_labels(block_ages)
    return rows


def parse_lifetable_file(path: str | Path, country: str | None = None) -> list[LifeTableRow]:
    """Parse an HMD life-table file from disk.

    The country code defaults to the filename prefix, following the HMD
    download convention ``<CODE>.bltper_5x1.txt``.
    """
    path = Path(path)
    if country is None:
        country = path.name.split(".", 1)[0]
    return parse_lifetable_text(path.read_bytes(), country)


def serialize_lifetable(rows: Sequence[LifeTableRow], grid: AgeGrid, population: str) -> str:
    """Render rows back to the HMD text layout (the parse fixed point)."""
    out = io.StringIO()
    out.write(f"{population}, Life tables (period 5x1), Total\n")
    out.write("\n")
    out.write(
        "  Year          Age         mx       qx    ax      lx      dx      Lx       Tx     ex\n"
    )

    def fmt(value: float, spec: str) -> str:
        return "." if math.isnan(value) else format(value, spec)

    for row in rows:
        out.write(
            f"  {row.year:<10d}{grid.labels[row.age_index]:>9s}"
            f"{fmt(row.mx, '.5f'):>11s}{fmt(row.qx, '.5f'):>9s}"
            f"{fmt(row.ax, '.2f'):>6s}{fmt(row.lx, '.0f'):>8s}"
            f"{fmt(row.dx, '.0f'):>8s}{fmt(row.Lx, '.0f'):>8s}"
            f"{fmt(row.Tx, '.0f'):>9s}{fmt(row.ex, '.2f'):>7s}\n"
        )
    return out.getvalue()


def build_panel(files: Mapping[str, Sequence[LifeTableRow]], sel: DataSelection) -> MortalityPanel:
    """Assemble parsed per-country rows into the rectangular panel.

    Countries are ordered alphabetically by code, years ascending.  Every
    selected (country, year) must be present on the 24-group abridged grid
    and free of missing values; gaps raise with the cell list.  With
    ``require_complete`` off, countries with gaps are dropped with a warning
    instead, keeping the panel rectangular.
    """
    codes = tuple(sorted(sel.country_codes))
    years = tuple(sel.years)
    missing_files = [c for c in codes if c not in files]
    if missing_files:
        raise PanelAssemblyError("no parsed rows for: " + ", ".join(missing_files))

    grid = AgeGrid.abridged_5x1()
    cells: dict[tuple[str, int], list[LifeTableRow]] = {}
    for code in codes:
        for row in files[code]:
            if row.year in sel.years:
                cells.setdefault((code, row.year), []).append(row)

    gaps = [(c, y) for c in codes for y in years if (c, y) not in cells]
    if gaps:
        if sel.require_complete:
            listing = ", ".join(f"{c}:{y}" for c, y in gaps[:20])
            more = "" if len(gaps) <= 20 else f" (+{len(gaps) - 20} more)"
            raise PanelAssemblyError(f"missing (country, year) cells: {listing}{more}")
        dropped = sorted({c for c, _ in gaps})
        warnings.warn(
            "dropping countries with incomplete coverage: " + ", ".join(dropped),
            stacklevel=2,
        )
        codes = tuple(c for c in codes if c not in dropped)
        if not codes:
            raise PanelAssemblyError("no country covers the selected years")

    shape = (len(codes), len(years), len(grid))
    arrays = {col: np.full(shape, np.nan) for col in COLUMNS}
    for ci, code in enumerate(codes):
        for yi, year in enumerate(years):
            block = cells[(code, year)]
            if len(block) != len(grid):
                raise PanelAssemblyError(
                    f"{code} {year}: {len(block)} age rows, "
                    f"expected the {len(grid)}-group abridged grid"
                )
            for row in block:
                for col in COLUMNS:
                    arrays[col][ci, yi, row.age_index] = getattr(row, col)

    for col in COLUMNS:
        nan_cells = np.argwhere(np.isnan(arrays[col]))
        if nan_cells.size:
            c, y, a = map(int, nan_cells[0])
            raise MissingDataError(
                f"missing {col} ('.') inside selection at "
                f"({codes[c]}, {years[y]}, {grid.labels[a]})"
            )

    panel = MortalityPanel(countries=codes, years=years, grid=grid, data=arrays)
    from .lifetable import lifetable_identity_report

    for problem in lifetable_identity_report(panel):
        warnings.warn(f"life-table identity check: {problem}", stacklevel=2)
    return panel


def load_data_dir(data_dir: str | Path, sel: DataSelection) -> MortalityPanel:
    """Parse ``<CODE>.bltper_5x1.txt`` for every selected country and assemble."""
    data_dir = Path(data_dir)
    missing, files = [], {}
    for code in sel.country_codes:
        path = data_dir / f"{code}.bltper_5x1.txt"
        if not path.is_file():
            missing.append(code)
            continue
        files[code] = parse_lifetable_file(path, code)
    if missing:
        raise PanelAssemblyError(
            "missing life-table files for: " + ", ".join(sorted(missing))
        )
    return build_panel(files, sel)


# ---------------------------------------------------------------------------
# canonical panel serialization: CSV + JSON manifest

PANEL_CSV_HEADER = ("country", "year", "age_label") + COLUMNS


def write_panel_csv(panel: MortalityPanel, path: str | Path) -> str:
    """Write the canonical panel CSV; returns its sha256 checksum."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(PANEL_CSV_HEADER)
    for ci, code in enumerate(panel.countries):
        for yi, year in enumerate(panel.years):
            for ai, label in enumerate(panel.grid.labels):
                writer.writerow(
                    [code, year, label]
                    + [repr(float(panel.column(col)[ci, yi, ai])) for col in COLUMNS]
                )
    data = buf.getvalue().encode()
    Path(path).write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def read_panel_csv(path: str | Path) -> MortalityPanel:
    """Read a canonical panel CSV back into a MortalityPanel."""
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = tuple(next(reader))
        if header != PANEL_CSV_HEADER:
            raise DataFormatError(
                f"panel CSV header mismatch: {header}", line_no=1
            )
        records = list(reader)
    if not records:
        raise DataFormatError("panel CSV has no data rows")
    countries = tuple(sorted({r[0] for r in records}))
    years = tuple(sorted({int(r[1]) for r in records}))
    labels_in_order: list[str] = []
    for rec in records:
        if rec[0] == records[0][0] and int(rec[1]) == int(records[0][1]):
            labels_in_order.append(rec[2])
    grid = AgeGrid.from_labels(labels_in_order)
    cidx = {c: i for i, c in enumerate(countries)}
    yidx = {y: i for i, y in enumerate(years)}
    aidx = {a: i for i, a in enumerate(grid.labels)}
    shape = (len(countries), len(years), len(grid))
    arrays = {col: np.full(shape, np.nan) for col in COLUMNS}
    for rec in records:
        ci, yi, ai = cidx[rec[0]], yidx[int(rec[1])], aidx[rec[2]]
        for k, col in enumerate(COLUMNS):
            arrays[col][ci, yi, ai] = float(rec[3 + k])
    return MortalityPanel(countries=countries, years=years, grid=grid, data=arrays)


def panel_checksum(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(
    panel: MortalityPanel,
    sel: DataSelection,
    checksum: str,
    path: str | Path,
    extra: Mapping[str, object] | None = None,
) -> None:
    """JSON manifest describing the selection behind a panel CSV.

    The manifest is the only artifact carrying a timestamp; everything else
    is byte-reproducible.
    """
    manifest = {
        "countries": {c: display_name(c) for c in panel.countries},
        "year_min": sel.year_min,
        "year_max": sel.year_max,
        "n_countries": len(panel.countries),
        "n_years": len(panel.years),
        "age_labels": list(panel.grid.labels),
        "population_variant": "total population series for multi-series countries",
        "panel_sha256": checksum,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    if extra:
        manifest.update(extra)
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def rows_from_panel(panel: MortalityPanel, country: str) -> list[LifeTableRow]:
    """Materialize one country's panel slice back into rows (file order)."""
    ci = panel.country_index(country)
    rows = []
    for yi, year in enumerate(panel.years):
        for ai in range(len(panel.grid)):
            rows.append(
                LifeTableRow(
                    country=country,
                    year=year,
                    age_index=ai,
                    **{col: float(panel.column(col)[ci, yi, ai]) for col in COLUMNS},
                )
            )
    return rows
