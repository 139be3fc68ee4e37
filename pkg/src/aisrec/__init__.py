"""Neighbourhood-based collaborative filtering with an idiotypic immune network."""

from .baseline import Neighbourhood, Provenance, simple_pearson_neighbourhood
from .dataset import DataError, RatingsTable, VoteScale, generate_synthetic, load_ratings, parse_ratings, split_target
from .evaluation import kendall_tau, mae, neighbourhood_stats, wilcoxon_signed_rank
from .experiment import ExperimentConfig, run_experiment, run_trial, sweep_stimulation
from .immune import AisParams, ImmuneSystem, build_neighbourhood
from .matching import MatchIndex, pearson, significance_weighted_match
from .predictor import predict, recommend

__version__ = "0.1.0"

__all__ = [
    "AisParams", "DataError", "ExperimentConfig", "ImmuneSystem", "MatchIndex", "Neighbourhood", "Provenance",
    "RatingsTable", "VoteScale", "build_neighbourhood", "generate_synthetic", "kendall_tau", "load_ratings", "mae",
    "neighbourhood_stats", "parse_ratings", "pearson", "predict", "recommend", "run_experiment", "run_trial",
    "significance_weighted_match", "simple_pearson_neighbourhood", "split_target", "sweep_stimulation",
    "wilcoxon_signed_rank",
]
