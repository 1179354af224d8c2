"""Structural model fitting, causal effects, paths and counterfactual repairs."""

from .counterfactual import counterfactual_outcome_probability, latent_posteriors, twin_distribution
from .effects import (
    CausalPath,
    PathConfig,
    ace,
    extract_paths,
    interventional_distribution,
    interventional_expectation,
    path_ace,
    rank_paths,
    score_paths,
)
from .factors import Factor, eliminate
from .model import DistrictLatent, FittedModel, fit_cpts, model_from_cpts
from .repair import (
    DiagnosisReport,
    Repair,
    RepairSet,
    best_repair,
    generate_repair_set,
    ite,
    outcome_masks,
)

__all__ = [
    "CausalPath",
    "DiagnosisReport",
    "DistrictLatent",
    "Factor",
    "FittedModel",
    "PathConfig",
    "Repair",
    "RepairSet",
    "ace",
    "best_repair",
    "counterfactual_outcome_probability",
    "eliminate",
    "extract_paths",
    "fit_cpts",
    "generate_repair_set",
    "interventional_distribution",
    "interventional_expectation",
    "ite",
    "latent_posteriors",
    "model_from_cpts",
    "outcome_masks",
    "path_ace",
    "rank_paths",
    "score_paths",
    "twin_distribution",
]
