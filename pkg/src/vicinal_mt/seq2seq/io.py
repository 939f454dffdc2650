from __future__ import annotations

from pathlib import Path

from ..autodiff import load_checkpoint, save_checkpoint
from .config import ArchConfig
from .models import GuidedBTModel, MaskedLmModel, Seq2SeqModel


def save_model(model, path: str | Path) -> None:
    save_checkpoint(path, model.state_dict(), model.config_dict())


def load_model(path: str | Path):
    state, config = load_checkpoint(path)
    arch = ArchConfig.from_dict(config["arch"])
    kind = config.get("kind")
    if kind == "seq2seq":
        model = Seq2SeqModel(arch, config["vocab_size"], direction=tuple(config["direction"]))
    elif kind == "guided":
        model = GuidedBTModel(arch, config["vocab_size"], lam=config["lam"],
                              direction=tuple(config["direction"]))
    elif kind == "mlm":
        model = MaskedLmModel(arch, config["vocab_size"])
    else:
        raise ValueError(f"{path}: unknown model kind {kind!r}")
    model.load_state_dict(state)
    if kind == "mlm":
        model.freeze()
    else:
        model.eval()
    return model
