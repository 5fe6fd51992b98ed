"""Feature construction: standardization, principal components, splines."""

import numpy as np
import pytest

from mortclust import (
    DomainError,
    bspline_design_matrix,
    fit_bspline,
    pca,
    standardize_columns,
)
from mortclust.features import write_scores_csv, write_spline_csv


class TestStandardize:
    def test_zero_mean_unit_sd(self):
        rng = np.random.default_rng(5)
        M = rng.normal(3.0, 2.5, size=(40, 7))
        Z, means, sds = standardize_columns(M)
        assert Z.shape == M.shape
        assert Z.mean(axis=0) == pytest.approx(np.zeros(7), abs=1e-12)
        assert Z.std(axis=0, ddof=1) == pytest.approx(np.ones(7), abs=1e-12)
        assert means == pytest.approx(M.mean(axis=0))
        assert sds == pytest.approx(M.std(axis=0, ddof=1))

    def test_reconstruction(self):
        rng = np.random.default_rng(6)
        M = rng.normal(size=(10, 3))
        Z, means, sds = standardize_columns(M)
        assert Z * sds + means == pytest.approx(M, abs=1e-12)

    def test_constant_column_rejected(self):
        M = np.ones((5, 2))
        M[:, 0] = np.arange(5)
        with pytest.raises(DomainError, match="1"):
            standardize_columns(M)


class TestPca:
    def test_rank1_explained(self):
        rng = np.random.default_rng(7)
        u = rng.normal(size=20)
        v = rng.normal(size=6)
        M = np.outer(u, v)
        M -= M.mean(axis=0)
        res = pca(M, 1)
        assert res.explained_ratio[0] == pytest.approx(1.0, abs=1e-12)

    def test_scores_are_projections(self):
        rng = np.random.default_rng(8)
        M = rng.normal(size=(15, 5))
        Z, _, _ = standardize_columns(M)
        res = pca(Z, 3)
        assert res.scores == pytest.approx(Z @ res.loadings, abs=1e-10)

    def test_loadings_orthonormal(self):
        rng = np.random.default_rng(9)
        Z, _, _ = standardize_columns(rng.normal(size=(30, 8)))
        res = pca(Z, 4)
        gram = res.loadings.T @ res.loadings
        assert gram == pytest.approx(np.eye(4), abs=1e-10)

    def test_sign_convention_deterministic(self):
        rng = np.random.default_rng(10)
        Z, _, _ = standardize_columns(rng.normal(size=(30, 8)))
        res = pca(Z, 4)
        for j in range(4):
            col = res.loadings[:, j]
            assert col[np.argmax(np.abs(col))] > 0

    def test_explained_ratio_sums_to_one_over_full_rank(self):
        rng = np.random.default_rng(11)
        Z, _, _ = standardize_columns(rng.normal(size=(10, 4)))
        res = pca(Z, 4)
        assert res.explained_ratio.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(np.diff(res.explained_ratio) <= 1e-12)

    def test_component_bounds(self):
        rng = np.random.default_rng(12)
        Z, _, _ = standardize_columns(rng.normal(size=(10, 4)))
        with pytest.raises(DomainError):
            pca(Z, 0)
        with pytest.raises(DomainError):
            pca(Z, 5)

    def test_variance_ordering_matches_singular_values(self):
        rng = np.random.default_rng(13)
        Z, _, _ = standardize_columns(rng.normal(size=(25, 6)))
        res = pca(Z, 6)
        score_var = res.scores.var(axis=0, ddof=1)
        assert np.all(np.diff(score_var) <= 1e-10)


class TestBsplineBasis:
    def test_partition_of_unity(self):
        x = np.linspace(1960.0, 2010.0, 401)
        B = bspline_design_matrix(x, (1960.0, 2010.0), 25)
        assert B.shape == (401, 25)
        assert np.abs(B.sum(axis=1) - 1.0).max() <= 1e-9
        assert B.min() >= -1e-12

    def test_local_support(self):
        x = np.linspace(0.0, 1.0, 101)
        B = bspline_design_matrix(x, (0.0, 1.0), 10, degree=3)
        # cubic basis: at most degree+1 nonzero functions per point
        assert (np.abs(B) > 1e-12).sum(axis=1).max() <= 4

    def test_out_of_domain_rejected(self):
        with pytest.raises(DomainError):
            bspline_design_matrix(np.array([2011.0]), (1960.0, 2010.0), 10)


class TestFitBspline:
    def test_cubic_reproduction(self):
        years = np.linspace(1960.0, 2010.0, 51)
        t = (years - 1985.0) / 25.0
        values = 2.0 + 0.5 * t - 1.5 * t**2 + 0.75 * t**3
        sf = fit_bspline(years, values, n_basis=25)
        assert np.abs(sf(years) - values).max() <= 1e-8
        dense = np.linspace(1960.0, 2010.0, 307)
        td = (dense - 1985.0) / 25.0
        expected = 2.0 + 0.5 * td - 1.5 * td**2 + 0.75 * td**3
        assert np.abs(sf(dense) - expected).max() <= 1e-8

    def test_constant_reproduction(self):
        years = np.linspace(0.0, 10.0, 30)
        sf = fit_bspline(years, np.full(30, 4.2), n_basis=12)
        assert sf(years) == pytest.approx(np.full(30, 4.2), abs=1e-10)
        assert sf.coefficients == pytest.approx(np.full(12, 4.2), abs=1e-8)

    def test_coefficient_count(self):
        years = np.linspace(1960.0, 2010.0, 51)
        sf = fit_bspline(years, np.sin(years / 5.0), n_basis=25)
        assert sf.n_basis == 25
        assert sf.coefficients.shape == (25,)
        assert sf.degree == 3
        assert sf.domain == (1960.0, 2010.0)

    def test_underdetermined_rejected(self):
        years = np.linspace(0.0, 1.0, 10)
        with pytest.raises(DomainError, match="underdetermined"):
            fit_bspline(years, np.zeros(10), n_basis=12)

    def test_non_increasing_years_rejected(self):
        years = np.array([1.0, 2.0, 2.0, 3.0])
        with pytest.raises(DomainError):
            fit_bspline(years, np.zeros(4), n_basis=4, degree=1)

    def test_knots_are_clamped(self):
        years = np.linspace(0.0, 1.0, 40)
        sf = fit_bspline(years, np.cos(years), n_basis=10)
        knots = sf.knots
        assert np.all(knots[:4] == 0.0)
        assert np.all(knots[-4:] == 1.0)


def test_write_scores_csv(tmp_path):
    rng = np.random.default_rng(14)
    Z, _, _ = standardize_columns(rng.normal(size=(6, 4)))
    res = pca(Z, 2)
    path = tmp_path / "scores.csv"
    ids = [f"C{i}" for i in range(6)]
    write_scores_csv(ids, res, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "entity,pc1,pc2"
    assert len(lines) == 1 + 6 + 1
    assert lines[-1].startswith("explained_ratio,")


def test_write_spline_csv(tmp_path):
    years = np.linspace(0.0, 1.0, 30)
    fits = {
        "AAA": fit_bspline(years, np.cos(years), n_basis=8),
        "BBB": fit_bspline(years, np.sin(years), n_basis=8),
    }
    path = tmp_path / "spline.csv"
    write_spline_csv(fits, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "entity," + ",".join(f"c{j + 1}" for j in range(8))
    assert len(lines) == 1 + 2
    assert lines[1].startswith("AAA,")
