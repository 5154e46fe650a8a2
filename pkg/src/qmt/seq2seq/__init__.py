from .layers import lstm_backward, lstm_forward
from .models import ModelConfig, Seq2Seq, build_model, param_count
from .optim import SGD, Adam, RMSprop, make_optimizer
from .train import (Dataset, TrainHistory, Translation, TranslationError, evaluate,
                    load_checkpoint, predict_tokens, save_checkpoint, train, translate)

__all__ = [
    "lstm_backward", "lstm_forward", "ModelConfig", "Seq2Seq", "build_model", "param_count",
    "SGD", "Adam", "RMSprop", "make_optimizer", "Dataset", "TrainHistory", "Translation",
    "TranslationError", "evaluate", "load_checkpoint", "predict_tokens", "save_checkpoint",
    "train", "translate",
]
