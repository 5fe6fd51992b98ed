"""Figure generation: per-pipeline routing and reproducible SVG bytes."""

import pytest

from mortclust import (
    PipelineName,
    run_func_kmeans,
    run_hellinger_ward,
    run_ilc_kmeans,
    run_pca_fuzzy,
    sweep_pipeline,
)
from mortclust.figures import figures_for_result, save_consensus, save_sweep_curves
from mortclust.pipelines import consensus

EXPECTED_FILES = {
    PipelineName.HELLINGER_WARD: {
        "dendrogram.svg",
        "dstar_bands.svg",
        "logmx_trends.svg",
    },
    PipelineName.ILC_KMEANS: {"beta_by_age.svg", "logmx_trends.svg"},
    PipelineName.PCA_FUZZY: {"membership_bars.svg"},
    PipelineName.FUNC_KMEANS: {"e0_curves.svg"},
}

RUNNERS = {
    PipelineName.HELLINGER_WARD: run_hellinger_ward,
    PipelineName.ILC_KMEANS: run_ilc_kmeans,
    PipelineName.PCA_FUZZY: run_pca_fuzzy,
    PipelineName.FUNC_KMEANS: run_func_kmeans,
}


@pytest.mark.parametrize("name", list(PipelineName))
def test_pipeline_figures_written(planted, tmp_path, name):
    panel, _ = planted
    result = RUNNERS[name](panel, k=3)
    paths = figures_for_result(panel, result, tmp_path)
    assert {p.name for p in paths} == EXPECTED_FILES[name]
    for p in paths:
        assert p.stat().st_size > 0
        assert p.read_bytes().lstrip().startswith(b"<?xml")


def test_svg_bytes_reproducible(planted, tmp_path):
    panel, _ = planted
    result = RUNNERS[PipelineName.ILC_KMEANS](panel, k=3)
    a = figures_for_result(panel, result, tmp_path / "a")
    b = figures_for_result(panel, result, tmp_path / "b")
    for pa, pb in zip(sorted(a), sorted(b)):
        assert pa.read_bytes() == pb.read_bytes()


def test_sweep_curves_one_file_per_index(planted, tmp_path):
    panel, _ = planted
    sw = sweep_pipeline(panel, PipelineName.FUNC_KMEANS, k_min=2, k_max=4)
    paths = save_sweep_curves(sw, tmp_path)
    assert {p.name for p in paths} == {
        "sweep_silhouette.svg",
        "sweep_calinski_harabasz.svg",
        "sweep_point_biserial.svg",
    }


def test_consensus_figure(planted, tmp_path):
    panel, _ = planted
    parts = []
    for name in PipelineName:
        result = RUNNERS[name](panel, k=3)
        parts.append((result.entity_ids, result.partition))
    graph = consensus(parts).with_layout()
    path = tmp_path / "consensus.svg"
    save_consensus(graph, path)
    assert path.stat().st_size > 0
