"""Clustering toolkit for country-level all-cause mortality.

Ingests period life tables in the published 5x1 text format, derives the
feature spaces used by four clustering routes (death-distribution
distances, age effects of per-country log-bilinear fits, principal
components of logit death probabilities, B-spline summaries of life
expectancy), scores partitions with internal validity indices, and merges
the methods into a co-clustering consensus graph.
"""

from .clustering import (
    DistanceMatrix,
    Dendrogram,
    FuzzyPartition,
    HardPartition,
    cut_dendrogram,
    euclidean_distance_matrix,
    fuzzy_cmeans,
    harden,
    hellinger_distance_matrix,
    kmeans,
    ward_agglomerate,
)
from .exceptions import (
    ConfigError,
    DataFormatError,
    DegenerateDriftError,
    DegenerateFitError,
    DomainError,
    MissingDataError,
    MortclustError,
    PanelAssemblyError,
    PanelLookupError,
    PipelineError,
    ReducedKError,
    TransformDomainError,
    UndefinedScoreError,
)
from .features import (
    PcaResult,
    SplineFit,
    bspline_design_matrix,
    fit_bspline,
    pca,
    standardize_columns,
)
from .hmd import (
    COUNTRY_NAMES,
    REPLICATION_CODES,
    DataSelection,
    build_panel,
    load_data_dir,
    parse_lifetable_file,
    parse_lifetable_text,
    read_panel_csv,
    serialize_lifetable,
    write_panel_csv,
)
from .leecarter import (
    LeeCarterFit,
    Normalization,
    fit_lee_carter,
    rescale_unit_drift,
)
from .lifetable import (
    RADIX,
    AgeGrid,
    LifeTableRow,
    MortalityPanel,
    PanelIndex,
    lifetable_identity_report,
    normalized_death_distribution,
    qx_from_mx,
    transform,
)
from .pipelines import (
    ConsensusGraph,
    PipelineName,
    PipelineResult,
    PipelineSpec,
    consensus,
    fr_layout,
    run_func_kmeans,
    run_hellinger_ward,
    run_ilc_kmeans,
    run_pca_fuzzy,
    run_pipeline,
    sweep_pipeline,
)
from .validity import (
    SweepPoint,
    ValiditySweep,
    build_sweep,
    calinski_harabasz,
    calinski_harabasz_from_distances,
    fuzzy_silhouette,
    partition_coefficient,
    point_biserial,
    silhouette,
    sweep,
    xie_beni,
)

__version__ = "0.1.0"

__all__ = [
    "AgeGrid",
    "ConfigError",
    "ConsensusGraph",
    "COUNTRY_NAMES",
    "DataFormatError",
    "DataSelection",
    "DegenerateDriftError",
    "DegenerateFitError",
    "Dendrogram",
    "DistanceMatrix",
    "DomainError",
    "FuzzyPartition",
    "HardPartition",
    "LeeCarterFit",
    "LifeTableRow",
    "MissingDataError",
    "MortalityPanel",
    "MortclustError",
    "Normalization",
    "PanelAssemblyError",
    "PanelIndex",
    "PanelLookupError",
    "PcaResult",
    "PipelineError",
    "PipelineName",
    "PipelineResult",
    "PipelineSpec",
    "RADIX",
    "REPLICATION_CODES",
    "ReducedKError",
    "SplineFit",
    "TransformDomainError",
    "UndefinedScoreError",
    "ValiditySweep",
    "build_sweep",
    "SweepPoint",
    "bspline_design_matrix",
    "build_panel",
    "calinski_harabasz",
    "calinski_harabasz_from_distances",
    "consensus",
    "cut_dendrogram",
    "euclidean_distance_matrix",
    "fit_bspline",
    "fit_lee_carter",
    "fr_layout",
    "fuzzy_cmeans",
    "fuzzy_silhouette",
    "harden",
    "hellinger_distance_matrix",
    "kmeans",
    "lifetable_identity_report",
    "load_data_dir",
    "normalized_death_distribution",
    "parse_lifetable_file",
    "parse_lifetable_text",
    "partition_coefficient",
    "pca",
    "point_biserial",
    "qx_from_mx",
    "read_panel_csv",
    "rescale_unit_drift",
    "run_func_kmeans",
    "run_hellinger_ward",
    "run_ilc_kmeans",
    "run_pca_fuzzy",
    "run_pipeline",
    "serialize_lifetable",
    "silhouette",
    "standardize_columns",
    "sweep",
    "sweep_pipeline",
    "transform",
    "ward_agglomerate",
    "write_panel_csv",
    "xie_beni",
]
