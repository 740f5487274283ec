"""MNRL fine-tuning harness for triplet training files."""

from .data import Triplet, load_triplets, split_triplets
from .encoder import EncoderSpec, TinyEncoder
from .loss import mnrl_loss, mnrl_loss_and_grad
from .train import OptimizerConfig, TrainProtocol, TrainResult, evaluate_loss, train

__version__ = "0.1.0"

__all__ = [
    "EncoderSpec",
    "OptimizerConfig",
    "TinyEncoder",
    "TrainProtocol",
    "TrainResult",
    "Triplet",
    "evaluate_loss",
    "load_triplets",
    "mnrl_loss",
    "mnrl_loss_and_grad",
    "split_triplets",
    "train",
]
