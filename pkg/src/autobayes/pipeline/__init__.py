"""Turning model specs into trained networks and sweeping a catalog."""

from .config import HyperParams
from .explore import ExploreResult, ResultRow, ResultsTable, explore, model_rng
from .network import Batch, FactorNetwork, LossBreakdown
from .train import (Metrics, TrainedModel, TrainingError, evaluate, load_model, save_model, train_model,
                    train_semi_supervised)

__all__ = [
    "Batch", "ExploreResult", "FactorNetwork", "HyperParams", "LossBreakdown", "Metrics", "ResultRow",
    "ResultsTable", "TrainedModel", "TrainingError", "evaluate", "explore", "load_model", "model_rng",
    "save_model", "train_model", "train_semi_supervised",
]
