"""Ingest: parser, serializer fixed point, panel assembly, CSV artifacts."""

import json

import numpy as np
import pytest

from mortclust import (
    DataFormatError,
    DataSelection,
    MissingDataError,
    PanelAssemblyError,
    build_panel,
    load_data_dir,
    parse_lifetable_file,
    parse_lifetable_text,
    read_panel_csv,
    serialize_lifetable,
    write_panel_csv,
)
from mortclust.hmd import (
    COUNTRY_NAMES,
    REPLICATION_CODES,
    REPLICATION_YEARS,
    display_name,
    panel_checksum,
    rows_from_panel,
    write_manifest,
)
from mortclust.synthdata import planted_surfaces, rows_from_surface


@pytest.fixture(scope="module")
def synthetic_rows():
    surfaces, years, _ = planted_surfaces(n_per_cluster=1)
    code = next(iter(surfaces))
    return code, rows_from_surface(code, years, surfaces[code])


class TestParser:
    def test_round_trip_is_fixed_point(self, synthetic_rows):
        code, rows = synthetic_rows
        grid = rows and None
        from mortclust import AgeGrid

        grid = AgeGrid.abridged_5x1()
        text = serialize_lifetable(rows, grid, display_name(code) or code)
        parsed = parse_lifetable_text(text, code)
        text2 = serialize_lifetable(parsed, grid, display_name(code) or code)
        assert text2 == text
        assert parsed == rows

    def test_title_must_mention_life_tables(self):
        text = "Deaths, period 5x1\n\nYear Age mx qx ax lx dx Lx Tx ex\n  1980 0 . . . . . . . .\n"
        with pytest.raises(DataFormatError, match="line 1"):
            parse_lifetable_text(text, "XXX")

    def test_header_tokens_checked(self, synthetic_rows):
        code, rows = synthetic_rows
        from mortclust import AgeGrid

        text = serialize_lifetable(rows, AgeGrid.abridged_5x1(), "Testland")
        broken = text.replace(" ex\n", " zz\n", 1)
        with pytest.raises(DataFormatError, match="header"):
            parse_lifetable_text(broken, code)

    def test_bad_token_count_names_line(self, synthetic_rows):
        code, rows = synthetic_rows
        from mortclust import AgeGrid

        text = serialize_lifetable(rows, AgeGrid.abridged_5x1(), "Testland")
        lines = text.splitlines(keepends=True)
        lines[3] = "  1980 0 0.001\n"
        with pytest.raises(DataFormatError, match="line 4"):
            parse_lifetable_text("".join(lines), code)

    def test_dot_becomes_nan(self, synthetic_rows):
        code, rows = synthetic_rows
        from mortclust import AgeGrid

        text = serialize_lifetable(rows, AgeGrid.abridged_5x1(), "Testland")
        first_data = text.splitlines()[3]
        patched = text.replace(first_data, first_data[:-7] + "      .", 1)
        parsed = parse_lifetable_text(patched, code)
        assert np.isnan(parsed[0].ex)

    def test_utf8_sig_and_bytes_accepted(self, synthetic_rows):
        code, rows = synthetic_rows
        from mortclust import AgeGrid

        text = serialize_lifetable(rows, AgeGrid.abridged_5x1(), "Testland")
        parsed = parse_lifetable_text(b"\xef\xbb\xbf" + text.encode(), code)
        assert parsed == rows

    def test_parse_file_takes_country_from_name(self, tmp_path, synthetic_rows):
        code, rows = synthetic_rows
        from mortclust import AgeGrid

        text = serialize_lifetable(rows, AgeGrid.abridged_5x1(), "Testland")
        path = tmp_path / "ZZA.bltper_5x1.txt"
        path.write_text(text)
        parsed = parse_lifetable_file(path)
        assert parsed[0].country == "ZZA"


class TestPanelAssembly:
    def test_corpus_loads_into_panel(self, corpus_dir):
        path, codes, _ = corpus_dir
        sel = DataSelection(country_codes=codes, year_min=1980, year_max=2010)
        panel = load_data_dir(path, sel)
        assert panel.countries == tuple(sorted(codes))
        assert panel.years == tuple(range(1980, 2011))
        assert panel.shape == (12, 31, 24)

    def test_missing_file_raises(self, corpus_dir):
        path, codes, _ = corpus_dir
        sel = DataSelection(
            country_codes=codes + ("QQQ",), year_min=1980, year_max=2010
        )
        with pytest.raises(PanelAssemblyError, match="QQQ"):
            load_data_dir(path, sel)

    def test_year_gap_raises_with_cells(self, corpus_dir):
        path, codes, _ = corpus_dir
        code = codes[0]
        rows = parse_lifetable_file(path / f"{code}.bltper_5x1.txt")
        kept = [r for r in rows if r.year != 1999]
        sel = DataSelection(country_codes=(code,), year_min=1980, year_max=2010)
        with pytest.raises(PanelAssemblyError, match="1999"):
            build_panel({code: kept}, sel)

    def test_incomplete_country_dropped_when_not_required(self, corpus_dir):
        path, codes, _ = corpus_dir
        files = {
            c: parse_lifetable_file(path / f"{c}.bltper_5x1.txt") for c in codes[:3]
        }
        files[codes[0]] = [r for r in files[codes[0]] if r.year != 1999]
        sel = DataSelection(
            country_codes=codes[:3],
            year_min=1980,
            year_max=2010,
            require_complete=False,
        )
        with pytest.warns(UserWarning, match=codes[0]):
            panel = build_panel(files, sel)
        assert panel.countries == tuple(sorted(codes[1:3]))

    def test_missing_value_raises_with_cell(self, corpus_dir):
        path, codes, _ = corpus_dir
        code = codes[1]
        rows = parse_lifetable_file(path / f"{code}.bltper_5x1.txt")
        victim = rows[40]
        rows[40] = type(victim)(
            country=victim.country,
            year=victim.year,
            age_index=victim.age_index,
            mx=victim.mx,
            qx=victim.qx,
            ax=victim.ax,
            lx=victim.lx,
            dx=victim.dx,
            Lx=float("nan"),
            Tx=victim.Tx,
            ex=victim.ex,
        )
        sel = DataSelection(country_codes=(code,), year_min=1980, year_max=2010)
        with pytest.raises(MissingDataError, match=str(victim.year)):
            build_panel({code: rows}, sel)

    def test_selection_validates_year_order(self):
        with pytest.raises(Exception):
            DataSelection(country_codes=("AUS",), year_min=2010, year_max=1960)

    def test_replication_selection(self):
        sel = DataSelection.replication()
        assert sel.country_codes == REPLICATION_CODES
        assert len(sel.country_codes) == 30
        assert (sel.year_min, sel.year_max) == REPLICATION_YEARS == (1960, 2010)
        assert len(COUNTRY_NAMES) == 30
        assert display_name("FRATNP").startswith("France")


class TestCsvArtifacts:
    def test_round_trip(self, planted, tmp_path):
        panel, _ = planted
        path = tmp_path / "panel.csv"
        checksum = write_panel_csv(panel, path)
        assert checksum == panel_checksum(path)
        back = read_panel_csv(path)
        assert back.countries == panel.countries
        assert back.years == panel.years
        assert back.grid.labels == panel.grid.labels
        for name in panel.data:
            assert back.data[name] == pytest.approx(panel.data[name], abs=0)

    def test_checksum_stable_across_writes(self, planted, tmp_path):
        panel, _ = planted
        c1 = write_panel_csv(panel, tmp_path / "a.csv")
        c2 = write_panel_csv(panel, tmp_path / "b.csv")
        assert c1 == c2

    def test_manifest_contents(self, planted, tmp_path):
        panel, _ = planted
        csv_path = tmp_path / "panel.csv"
        checksum = write_panel_csv(panel, csv_path)
        sel = DataSelection(
            country_codes=panel.countries, year_min=1980, year_max=2010
        )
        manifest_path = tmp_path / "manifest.json"
        write_manifest(panel, sel, checksum, manifest_path)
        doc = json.loads(manifest_path.read_text())
        assert sorted(doc["countries"]) == list(panel.countries)
        assert doc["panel_sha256"] == checksum
        assert (doc["year_min"], doc["year_max"]) == (1980, 2010)
        assert "created" in doc

    def test_rows_from_panel_round_trip(self, planted):
        panel, _ = planted
        code = panel.countries[0]
        rows = rows_from_panel(panel, code)
        sel = DataSelection(country_codes=(code,), year_min=1980, year_max=2010)
        single = build_panel({code: rows}, sel)
        assert single.column("mx")[0] == pytest.approx(
            panel.column("mx")[0], abs=0
        )
