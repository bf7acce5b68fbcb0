from fragfix.models.base import PartialFragment, PredictionList, Predictor
from fragfix.models.exhaustive import ExhaustiveModel, exhaustive_train
from fragfix.models.neural import NeuralConfig, NeuralModel, train_neural

__all__ = [
    "ExhaustiveModel",
    "NeuralConfig",
    "NeuralModel",
    "PartialFragment",
    "PredictionList",
    "Predictor",
    "exhaustive_train",
    "train_neural",
]
