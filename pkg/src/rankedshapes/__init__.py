"""Ranked tree shapes: encodings, distances, models, Fréchet means and summaries."""

from .core import (
    FMatrix,
    HeteroCode,
    balanced_fmatrix,
    code_to_fmatrix,
    enumerate_codes,
    enumerate_shapes,
    fmatrix_to_code,
    unbalanced_fmatrix,
    validate_code,
    validate_fmatrix,
    zigzag,
)
from .frechet import frechet_mean_exact, frechet_mean_genealogy, frechet_mean_sa, frechet_variance, medoid
from .metrics import HeteroGenealogy, RankedGenealogy, d_genealogy, d_hetero, d_shape, pairwise_distance_matrix
from .models import blum_francois_pmf, sample_blum_francois, sample_coalescent_genealogy, sample_yule, yule_pmf
from .newick import parse_newick, to_newick, to_ranked
from .order import credible_ball, entropy, signed_distance, total_compare

__all__ = [
    "FMatrix",
    "HeteroCode",
    "HeteroGenealogy",
    "RankedGenealogy",
    "balanced_fmatrix",
    "blum_francois_pmf",
    "code_to_fmatrix",
    "credible_ball",
    "d_genealogy",
    "d_hetero",
    "d_shape",
    "entropy",
    "enumerate_codes",
    "enumerate_shapes",
    "fmatrix_to_code",
    "frechet_mean_exact",
    "frechet_mean_genealogy",
    "frechet_mean_sa",
    "frechet_variance",
    "medoid",
    "pairwise_distance_matrix",
    "parse_newick",
    "sample_blum_francois",
    "sample_coalescent_genealogy",
    "sample_yule",
    "signed_distance",
    "to_newick",
    "to_ranked",
    "total_compare",
    "unbalanced_fmatrix",
    "validate_code",
    "validate_fmatrix",
    "yule_pmf",
    "zigzag",
]

__version__ = "0.1.0"
