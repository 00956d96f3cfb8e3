"""Fingerprint-conditioned SMILES decoding: model, training, beam search, storage."""

from .beam import Candidate, beam_search, greedy_decode, rescore
from .model import DecoderModel, TableModel, ToyTransformer, ToyTransformerParams, score_next
from .serialize import ModelFormatError, load_model, save_model
from .training import TrainConfig, TrainingError, teacher_forced_loss, train

__all__ = [
    "Candidate",
    "DecoderModel",
    "ModelFormatError",
    "TableModel",
    "ToyTransformer",
    "ToyTransformerParams",
    "TrainConfig",
    "TrainingError",
    "beam_search",
    "greedy_decode",
    "load_model",
    "rescore",
    "save_model",
    "score_next",
    "teacher_forced_loss",
    "train",
]
