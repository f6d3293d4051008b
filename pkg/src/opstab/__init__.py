"""Opcode-distribution stability measurement for candidate solution sets."""

from .divergence import (
    DivergenceConfig,
    DivergenceError,
    StabilityScores,
    bef,
    compute_scores,
    dctd_jsd,
    dctd_tau,
    jsd,
    mean_pairwise_jsd,
    sctd_jsd,
    sctd_tau,
    tau,
)
from .pmf import (
    AlignedPmfSet,
    DynamicTensor,
    PmfError,
    PmfVector,
    Vocabulary,
    WeightTable,
    align_vocabulary,
    build_dynamic_tensors,
    build_static_tensors,
    to_structural_pmf,
    to_weighted_pmf,
)

__version__ = "0.1.0"

__all__ = [
    "AlignedPmfSet",
    "DivergenceConfig",
    "DivergenceError",
    "DynamicTensor",
    "PmfError",
    "PmfVector",
    "StabilityScores",
    "Vocabulary",
    "WeightTable",
    "align_vocabulary",
    "bef",
    "build_dynamic_tensors",
    "build_static_tensors",
    "compute_scores",
    "dctd_jsd",
    "dctd_tau",
    "jsd",
    "mean_pairwise_jsd",
    "sctd_jsd",
    "sctd_tau",
    "tau",
    "to_structural_pmf",
    "to_weighted_pmf",
    "__version__",
]
