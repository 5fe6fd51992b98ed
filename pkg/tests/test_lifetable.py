"""Life-table data model: grids, conversions, panel access, transforms."""

import math

import numpy as np
import pytest

from mortclust import (
    AgeGrid,
    DomainError,
    MortalityPanel,
    PanelIndex,
    PanelLookupError,
    TransformDomainError,
    lifetable_identity_report,
    normalized_death_distribution,
    qx_from_mx,
    transform,
)
from mortclust.lifetable import OPEN, RADIX


class TestAgeGrid:
    def test_abridged_grid_shape(self):
        grid = AgeGrid.abridged_5x1()
        assert len(grid) == 24
        assert grid.labels[0] == "0"
        assert grid.labels[1] == "1-4"
        assert grid.labels[2] == "5-9"
        assert grid.labels[-1] == "110+"
        assert grid.open_index == 23
        assert grid.widths[0] == 1
        assert grid.widths[1] == 4
        assert all(w == 5 for w in grid.widths[2:-1])
        assert math.isinf(grid.widths[-1])

    def test_lowers_are_contiguous(self):
        grid = AgeGrid.abridged_5x1()
        assert grid.lowers[:4] == (0, 1, 5, 10)
        assert grid.lowers[-1] == 110

    def test_index_of(self):
        grid = AgeGrid.abridged_5x1()
        assert grid.index_of("45-49") == 10
        assert grid.index_of(" 110+ ") == 23
        with pytest.raises(DomainError):
            grid.index_of("200-204")

    def test_from_labels_requires_open_end(self):
        with pytest.raises(DomainError):
            AgeGrid.from_labels(["0", "1-4", "5-9"])

    def test_from_labels_rejects_gap(self):
        with pytest.raises(DomainError):
            AgeGrid.from_labels(["0", "5-9", "10+"])

    def test_first_interval_must_be_infant(self):
        with pytest.raises(DomainError):
            AgeGrid.from_labels(["0-4", "5-9", "10+"])


class TestQxFromMx:
    def test_small_rate(self):
        q = qx_from_mx(0.01, 1.0, 0.3)
        assert q == pytest.approx(0.01 / (1.0 + 0.7 * 0.01), abs=1e-15)

    def test_five_year_interval(self):
        q = qx_from_mx(0.02, 5.0, 2.5)
        assert q == pytest.approx(0.1 / (1.0 + 2.5 * 0.02), abs=1e-15)

    def test_zero_rate(self):
        assert qx_from_mx(0.0, 5.0, 2.5) == 0.0

    def test_cap_warns_and_returns_one(self):
        with pytest.warns(RuntimeWarning, match="capped at 1.0"):
            q = qx_from_mx(3.0, 5.0, 4.0)
        assert q == 1.0

    def test_array_input(self):
        q = qx_from_mx(np.array([0.0, 0.01]), 5.0, 2.5)
        assert q.shape == (2,)
        assert q[0] == 0.0

    def test_open_interval_rejected(self):
        with pytest.raises(DomainError):
            qx_from_mx(0.1, math.inf, 2.5)

    def test_negative_rate_rejected(self):
        with pytest.raises(DomainError):
            qx_from_mx(-0.1, 5.0, 2.5)

    def test_ax_outside_interval_rejected(self):
        with pytest.raises(DomainError):
            qx_from_mx(0.1, 5.0, 6.0)


class TestMortalityPanel:
    def test_shape_and_lookup(self, planted):
        panel, _ = planted
        n_c, n_y, n_a = panel.shape
        assert n_c == 12 and n_y == 31 and n_a == 24
        assert panel.column("mx").shape == (12, 31, 24)
        assert panel.country_index(panel.countries[3]) == 3
        assert panel.year_index(1980) == 0

    def test_unknown_country_raises(self, planted):
        panel, _ = planted
        with pytest.raises(PanelLookupError):
            panel.country_index("XXX")

    def test_unknown_year_raises(self, planted):
        panel, _ = planted
        with pytest.raises(PanelLookupError):
            panel.year_index(1875)

    def test_unknown_column_raises(self, planted):
        panel, _ = planted
        with pytest.raises(DomainError):
            panel.column("vx")

    def test_identities_hold_on_synthetic_panel(self, planted):
        panel, _ = planted
        assert lifetable_identity_report(panel) == []

    def test_identity_report_flags_broken_radix(self, planted):
        panel, _ = planted
        data = {k: v.copy() for k, v in panel.data.items()}
        data["lx"][0, 0, 0] = 90_000.0
        broken = MortalityPanel(
            countries=panel.countries,
            years=panel.years,
            grid=panel.grid,
            data=data,
        )
        report = lifetable_identity_report(broken)
        assert any("radix" in line for line in report)


class TestDeathDistribution:
    def test_sums_to_one(self, planted):
        panel, _ = planted
        p = normalized_death_distribution(panel, panel.countries[0], 1990)
        assert p.shape == (24,)
        assert np.all(p >= 0)
        assert p.sum() == pytest.approx(1.0, abs=1e-12)

    def test_matches_dx_over_radix(self, planted):
        panel, _ = planted
        ci = 2
        yi = panel.year_index(2000)
        p = normalized_death_distribution(panel, panel.countries[ci], 2000)
        dx = panel.column("dx")[ci, yi]
        assert p == pytest.approx(dx / dx.sum(), abs=1e-12)


class TestTransform:
    def test_e0_matches_ex_at_age_zero(self, planted):
        panel, _ = planted
        e0 = transform(panel, PanelIndex.E0)
        assert e0.shape == (12, 31)
        assert e0 == pytest.approx(panel.column("ex")[:, :, 0])

    def test_dstar_rows_sum_to_one(self, planted):
        panel, _ = planted
        d = transform(panel, PanelIndex.DSTAR)
        assert d.shape == (12, 31, 24)
        assert d.sum(axis=2) == pytest.approx(np.ones((12, 31)), abs=1e-9)

    def test_log_mx_shape_and_values(self, planted):
        panel, _ = planted
        lm = transform(panel, PanelIndex.LOG_MX, drop_open=False)
        assert lm.shape == (12, 31, 24)
        assert lm == pytest.approx(np.log(panel.column("mx")))

    def test_log_mx_keeps_open_interval(self, planted):
        panel, _ = planted
        lm = transform(panel, PanelIndex.LOG_MX)
        assert lm.shape == (12, 31, 24)

    def test_log_mx_rejects_zero_rate(self, planted):
        panel, _ = planted
        data = {k: v.copy() for k, v in panel.data.items()}
        data["mx"][1, 2, 3] = 0.0
        broken = MortalityPanel(
            countries=panel.countries,
            years=panel.years,
            grid=panel.grid,
            data=data,
        )
        with pytest.raises(TransformDomainError) as err:
            transform(broken, PanelIndex.LOG_MX)
        message = str(err.value)
        assert broken.countries[1] in message
        assert str(broken.years[2]) in message

    def test_logit_qx_drops_open_interval(self, planted):
        panel, _ = planted
        lq = transform(panel, PanelIndex.LOGIT_QX)
        assert lq.shape == (12, 31, 23)
        qx = panel.column("qx")[:, :, :-1]
        assert lq == pytest.approx(np.log(qx / (1.0 - qx)))

    def test_logit_qx_rejects_boundary(self, planted):
        panel, _ = planted
        data = {k: v.copy() for k, v in panel.data.items()}
        data["qx"][0, 0, 5] = 1.0
        broken = MortalityPanel(
            countries=panel.countries,
            years=panel.years,
            grid=panel.grid,
            data=data,
        )
        with pytest.raises(TransformDomainError):
            transform(broken, PanelIndex.LOGIT_QX)


def test_radix_and_open_constants():
    assert RADIX == 100_000.0
    assert math.isinf(OPEN)
