"""Encoder-decoder, masked-LM and guided back-translation transformers.

All three share one embedding table per model; for the translation models it
is also the (bias-free) output projection.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .. import autodiff as ad
from ..autodiff import Embedding, Module, Tensor
from ..vocab import BOS, EOS, PAD
from .config import ArchConfig
from .layers import (
    DecoderLayer,
    Encoder,
    causal_mask,
    decoder_layer_params,
    embed_tokens,
    encoder_layer_params,
    key_padding_mask,
)


def pad_batch(seqs: Sequence[Sequence[int]], bos: bool = False, eos: bool = True) -> np.ndarray:
    """Right-pad id lists into a (B, T) int64 array, optionally adding BOS/EOS."""
    rows = [([BOS] if bos else []) + list(s) + ([EOS] if eos else []) for s in seqs]
    width = max((len(r) for r in rows), default=0)
    out = np.full((len(rows), max(width, 1)), PAD, dtype=np.int64)
    for i, r in enumerate(rows):
        out[i, : len(r)] = r
    return out


def _take_rows(value, idx: np.ndarray):
    if isinstance(value, Tensor):
        return Tensor(value.data[idx])
    if isinstance(value, np.ndarray):
        return value[idx]
    return value


class Decoder(Module):
    def __init__(self, cfg: ArchConfig, rng: np.random.Generator, num_layers: int):
        self.layers = [DecoderLayer(cfg, rng) for _ in range(num_layers)]

    def __call__(self, x: Tensor, memory: Tensor, memory_mask, rng=None) -> Tensor:
        self_mask = causal_mask(x.shape[1])
        for layer in self.layers:
            x = layer(x, memory, memory_mask, self_mask, rng)
        return x


class _TranslationBase(Module):
    cfg: ArchConfig
    embed: Embedding

    def project(self, h: Tensor) -> Tensor:
        return ad.matmul(h, ad.transpose(self.embed.weight, (1, 0)))

    def _embed(self, ids: np.ndarray, rng=None) -> Tensor:
        return embed_tokens(self.embed, ids, self.cfg, rng, self.training)

    def _encode(self, encoder: Encoder, ids: np.ndarray, rng=None) -> tuple[Tensor, np.ndarray]:
        mask = key_padding_mask(ids, PAD)
        return encoder(self._embed(ids, rng), mask, rng), mask

    def next_logprobs(self, state: dict, prefix: np.ndarray) -> np.ndarray:
        """Log-probabilities of the next token for every row of ``prefix``."""
        with ad.no_grad():
            logits = self.decode(state, prefix).data[:, -1, :].astype(np.float64)
        return ad.tensor.log_softmax_np(logits)

    @staticmethod
    def reorder_state(state: dict, idx: np.ndarray) -> dict:
        return {k: _take_rows(v, idx) for k, v in state.items()}


class Seq2SeqModel(_TranslationBase):
    """Standard transformer encoder-decoder with all embeddings shared."""

    def __init__(self, cfg: ArchConfig, vocab_size: int, seed: int = 0,
                 direction: tuple[str, str] = ("src", "tgt")):
        rng = np.random.default_rng(seed)
        self.cfg = cfg
        self.vocab_size = vocab_size
        self.direction = tuple(direction)
        self.embed = Embedding(vocab_size, cfg.emb_dim, rng)
        self.encoder = Encoder(cfg, rng)
        self.decoder = Decoder(cfg, rng, cfg.layers)

    @staticmethod
    def expected_num_parameters(cfg: ArchConfig, vocab_size: int) -> int:
        return vocab_size * cfg.emb_dim + cfg.layers * (encoder_layer_params(cfg) + decoder_layer_params(cfg))

    def encode(self, src: np.ndarray, rng=None) -> dict:
        memory, mask = self._encode(self.encoder, src, rng)
        return {"memory": memory, "memory_mask": mask}

    def decode(self, state: dict, prev: np.ndarray, rng=None) -> Tensor:
        h = self.decoder(self._embed(prev, rng), state["memory"], state["memory_mask"], rng)
        return self.project(h)

    def forward(self, src: np.ndarray, prev: np.ndarray, rng=None) -> Tensor:
        return self.decode(self.encode(src, rng), prev, rng)

    def search_state(self, inputs: Sequence[Sequence[int]]) -> dict:
        with ad.no_grad():
            return self.encode(pad_batch(inputs))

    def config_dict(self) -> dict:
        return {"kind": "seq2seq", "arch": self.cfg.to_dict(), "vocab_size": self.vocab_size,
                "direction": list(self.direction)}


class GuidedBTModel(_TranslationBase):
    """Dual-encoder back-translation model.

    Encoder E reads the sentence to translate, E' reads the guide.  Decoder
    layers 1..L cross-attend E only; layer L+1 is stacked on layer L's output
    and cross-attends E' only.  The two decoder states are mixed as
    ``lam * h_L + (1 - lam) * h_{L+1}`` right before the output projection.
    """

    def __init__(self, cfg: ArchConfig, vocab_size: int, lam: float = 0.7, seed: int = 0,
                 direction: tuple[str, str] = ("tgt", "src")):
        if not 0.0 <= lam <= 1.0:
            raise ValueError(f"lam must lie in [0, 1], got {lam}")
        rng = np.random.default_rng(seed)
        self.cfg = cfg
        self.vocab_size = vocab_size
        self.lam = float(lam)
        self.direction = tuple(direction)
        self.embed = Embedding(vocab_size, cfg.emb_dim, rng)
        self.encoder = Encoder(cfg, rng)
        self.guide_encoder = Encoder(cfg, rng)
        self.decoder = Decoder(cfg, rng, cfg.layers)
        self.guide_layer = DecoderLayer(cfg, rng)

    @staticmethod
    def expected_num_parameters(cfg: ArchConfig, vocab_size: int) -> int:
        return (vocab_size * cfg.emb_dim + 2 * cfg.layers * encoder_layer_params(cfg)
                + (cfg.layers + 1) * decoder_layer_params(cfg))

    def encode(self, src: np.ndarray, guide: np.ndarray, rng=None) -> dict:
        memory, mask = self._encode(self.encoder, src, rng)
        guide_memory, guide_mask = self._encode(self.guide_encoder, guide, rng)
        return {"memory": memory, "memory_mask": mask,
                "guide_memory": guide_memory, "guide_mask": guide_mask}

    def decoder_states(self, state: dict, prev: np.ndarray, rng=None) -> tuple[Tensor, Tensor]:
        h_l = self.decoder(self._embed(prev, rng), state["memory"], state["memory_mask"], rng)
        h_g = self.guide_layer(h_l, state["guide_memory"], state["guide_mask"],
                               causal_mask(prev.shape[1]), rng)
        return h_l, h_g

    def decode(self, state: dict, prev: np.ndarray, rng=None, lam: float | None = None) -> Tensor:
        lam = self.lam if lam is None else lam
        h_l, h_g = self.decoder_states(state, prev, rng)
        if lam == 1.0:
            mixed = h_l
        elif lam == 0.0:
            mixed = h_g
        else:
            mixed = ad.scale(h_l, lam) + ad.scale(h_g, 1.0 - lam)
        return self.project(mixed)

    def forward(self, src: np.ndarray, guide: np.ndarray, prev: np.ndarray, rng=None,
                lam: float | None = None) -> Tensor:
        return self.decode(self.encode(src, guide, rng), prev, rng, lam)

    def search_state(self, inputs: Sequence[tuple[Sequence[int], Sequence[int]]]) -> dict:
        with ad.no_grad():
            return self.encode(pad_batch([s for s, _ in inputs]), pad_batch([g for _, g in inputs]))

    def config_dict(self) -> dict:
        return {"kind": "guided", "arch": self.cfg.to_dict(), "vocab_size": self.vocab_size,
                "lam": self.lam, "direction": list(self.direction)}


class MaskedLmModel(Module):
    """Bidirectional encoder with a tied output projection."""

    def __init__(self, cfg: ArchConfig, vocab_size: int, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.cfg = cfg
        self.vocab_size = vocab_size
        self.embed = Embedding(vocab_size, cfg.emb_dim, rng)
        self.encoder = Encoder(cfg, rng)
        self.frozen = False

    def forward(self, ids: np.ndarray, rng=None, positions: tuple[np.ndarray, np.ndarray] | None = None) -> Tensor:
        """Logits (B, T, V), or (K, V) at the ``(rows, cols)`` in ``positions``."""
        mask = key_padding_mask(ids, PAD)
        x = embed_tokens(self.embed, ids, self.cfg, rng, self.training)
        h = self.encoder(x, mask, rng)
        if positions is not None:
            h = ad.slice_(h, positions)
        return ad.matmul(h, ad.transpose(self.embed.weight, (1, 0)))

    def freeze(self) -> "MaskedLmModel":
        self.eval()
        for p in self.parameters():
            p.requires_grad = False
        self.frozen = True
        return self

    def config_dict(self) -> dict:
        return {"kind": "mlm", "arch": self.cfg.to_dict(), "vocab_size": self.vocab_size}

