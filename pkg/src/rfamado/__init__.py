"""RFA-madogram clustering of gridded extreme-value series.

Submodules
----------
dataset     long-CSV ingestion, hemisphere split, rescaling, temporal shuffling
madogram    F-madogram, RFA-madogram estimator, c* search, dissimilarity matrices
gevtheory   closed-form / quadrature values for logistic bivariate GEV pairs
simulate    logistic max-stable samplers (pairs and clustered grids)
cluster     PAM, silhouette, shuffle ablation, hemispheric pipeline
ensemble    partition alignment, central partitions, factual/counterfactual comparison
cli         ``rfamado`` command line entry point
"""
from .errors import ConfigError, DataError, NumericError, RfaMadoError
from .dataset import Dataset, GridSeries, load_dataset, save_dataset
from .madogram import (
    CStarConfig,
    DissimilarityMatrix,
    EmpiricalCdf,
    dissimilarity_matrix,
    fmadogram,
    optimal_c,
    rfa_madogram_at,
)
from .gevtheory import BivariateGevSpec, GevMargin, QuadratureConfig
from .cluster import Partition, pam, run_pipeline, shuffle_ablation, silhouette
from .ensemble import CentralPartition, align_partitions, central_partition, compare_central

__version__ = "0.1.0"

__all__ = [
    "BivariateGevSpec",
    "CStarConfig",
    "CentralPartition",
    "ConfigError",
    "DataError",
    "Dataset",
    "DissimilarityMatrix",
    "EmpiricalCdf",
    "GevMargin",
    "GridSeries",
    "NumericError",
    "Partition",
    "QuadratureConfig",
    "RfaMadoError",
    "align_partitions",
    "central_partition",
    "compare_central",
    "dissimilarity_matrix",
    "fmadogram",
    "load_dataset",
    "optimal_c",
    "pam",
    "rfa_madogram_at",
    "run_pipeline",
    "save_dataset",
    "shuffle_ablation",
    "silhouette",
]
