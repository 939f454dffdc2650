from .config import FULL_SCALE_RECIPE, PRESETS, ArchConfig, TrainingRecipe, preset
from .models import GuidedBTModel, MaskedLmModel, Seq2SeqModel, pad_batch
from .search import Hypothesis, beam_search, greedy_decode
from .train import (
    NoCandidateError,
    TrainingDivergedError,
    TrainResult,
    mask_tokens,
    predict_masked,
    predict_masked_batch,
    token_accuracy,
    train_guided_bt,
    train_masked_lm,
    train_seq2seq,
)
from .io import load_model, save_model

__all__ = [
    "FULL_SCALE_RECIPE", "PRESETS", "ArchConfig", "TrainingRecipe", "preset",
    "GuidedBTModel", "MaskedLmModel", "Seq2SeqModel", "pad_batch",
    "Hypothesis", "beam_search", "greedy_decode",
    "NoCandidateError", "TrainingDivergedError", "TrainResult", "mask_tokens",
    "predict_masked", "predict_masked_batch", "token_accuracy",
    "train_guided_bt", "train_masked_lm", "train_seq2seq",
    "load_model", "save_model",
]
