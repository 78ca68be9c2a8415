"""Tiny seq2seq trainer that consumes forge sample files and emits
prediction files the forge evaluator scores."""

from .data import Sample, SampleError, read_samples
from .decode import or_exact_match, predict, write_predictions
from .train import (TrainRun, Trained, evaluate_loss, load_checkpoint,
                    save_checkpoint, train)
from .vocab import Vocab, build_vocab

__version__ = "0.1.0"

__all__ = [
    "Sample", "SampleError", "read_samples",
    "or_exact_match", "predict", "write_predictions",
    "TrainRun", "Trained", "evaluate_loss", "load_checkpoint",
    "save_checkpoint", "train",
    "Vocab", "build_vocab",
    "__version__",
]
