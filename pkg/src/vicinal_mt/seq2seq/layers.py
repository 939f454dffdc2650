"""Post-norm transformer blocks (fairseq layout: no final layer norm)."""

from __future__ import annotations

import math

import numpy as np

from .. import autodiff as ad
from ..autodiff import LayerNorm, Linear, Module, Tensor
from .config import ArchConfig

NEG_INF = -1e9

_pos_cache: dict[tuple[int, int], np.ndarray] = {}


def sinusoidal_positions(n: int, dim: int) -> np.ndarray:
    key = (n, dim)
    if key not in _pos_cache:
        half = dim // 2
        freqs = np.exp(-math.log(10000.0) * np.arange(half) / max(half - 1, 1))
        angles = np.arange(n)[:, None] * freqs[None, :]
        table = np.zeros((n, dim))
        table[:, :half] = np.sin(angles)
        table[:, half : 2 * half] = np.cos(angles)
        _pos_cache[key] = table
    return _pos_cache[key]


def causal_mask(t: int) -> np.ndarray:
    return np.triu(np.ones((t, t), dtype=bool), k=1)[None, None]


def key_padding_mask(ids: np.ndarray, pad: int) -> np.ndarray:
    """(B, 1, 1, T) boolean, True where the key is padding."""
    return (ids == pad)[:, None, None, :]


class MultiHeadAttention(Module):
    def __init__(self, dim: int, heads: int, rng: np.random.Generator):
        self.heads = heads
        self.q_proj = Linear(dim, dim, rng)
        self.k_proj = Linear(dim, dim, rng)
        self.v_proj = Linear(dim, dim, rng)
        self.out_proj = Linear(dim, dim, rng)

    def __call__(self, x: Tensor, memory: Tensor, mask: np.ndarray | None) -> Tensor:
        b, tq, d = x.shape
        tk = memory.shape[1]
        h = self.heads
        dh = d // h
        q = self.q_proj(x).reshape(b, tq, h, dh).transpose(0, 2, 1, 3)
        k = self.k_proj(memory).reshape(b, tk, h, dh).transpose(0, 2, 3, 1)
        v = self.v_proj(memory).reshape(b, tk, h, dh).transpose(0, 2, 1, 3)
        scores = ad.scale(ad.matmul(q, k), 1.0 / math.sqrt(dh))
        if mask is not None:
            scores = ad.masked_fill(scores, mask, NEG_INF)
        attn = ad.softmax(scores)
        ctx = ad.matmul(attn, v).transpose(0, 2, 1, 3).reshape(b, tq, d)
        return self.out_proj(ctx)


class FeedForward(Module):
    def __init__(self, dim: int, hidden: int, rng: np.random.Generator):
        self.fc1 = Linear(dim, hidden, rng)
        self.fc2 = Linear(hidden, dim, rng)

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(ad.relu(self.fc1(x)))


class EncoderLayer(Module):
    def __init__(self, cfg: ArchConfig, rng: np.random.Generator):
        self.p = cfg.dropout
        self.self_attn = MultiHeadAttention(cfg.emb_dim, cfg.heads, rng)
        self.attn_norm = LayerNorm(cfg.emb_dim)
        self.ffn = FeedForward(cfg.emb_dim, cfg.ffn_dim, rng)
        self.ffn_norm = LayerNorm(cfg.emb_dim)

    def __call__(self, x: Tensor, pad_mask: np.ndarray | None, rng=None) -> Tensor:
        train = self.training and rng is not None
        x = self.attn_norm(x + ad.dropout(self.self_attn(x, x, pad_mask), self.p, rng, train))
        return self.ffn_norm(x + ad.dropout(self.ffn(x), self.p, rng, train))


class DecoderLayer(Module):
    def __init__(self, cfg: ArchConfig, rng: np.random.Generator):
        self.p = cfg.dropout
        self.self_attn = MultiHeadAttention(cfg.emb_dim, cfg.heads, rng)
        self.self_norm = LayerNorm(cfg.emb_dim)
        self.cross_attn = MultiHeadAttention(cfg.emb_dim, cfg.heads, rng)
        self.cross_norm = LayerNorm(cfg.emb_dim)
        self.ffn = FeedForward(cfg.emb_dim, cfg.ffn_dim, rng)
        self.ffn_norm = LayerNorm(cfg.emb_dim)

    def __call__(self, x: Tensor, memory: Tensor, memory_mask: np.ndarray | None,
                 self_mask: np.ndarray | None, rng=None) -> Tensor:
        train = self.training and rng is not None
        x = self.self_norm(x + ad.dropout(self.self_attn(x, x, self_mask), self.p, rng, train))
        x = self.cross_norm(x + ad.dropout(self.cross_attn(x, memory, memory_mask), self.p, rng, train))
        return self.ffn_norm(x + ad.dropout(self.ffn(x), self.p, rng, train))


class Encoder(Module):
    def __init__(self, cfg: ArchConfig, rng: np.random.Generator, num_layers: int | None = None):
        self.layers = [EncoderLayer(cfg, rng) for _ in range(num_layers or cfg.layers)]

    def __call__(self, x: Tensor, pad_mask: np.ndarray | None, rng=None) -> Tensor:
        for layer in self.layers:
            x = layer(x, pad_mask, rng)
        return x


def embed_tokens(embedding: ad.Embedding, ids: np.ndarray, cfg: ArchConfig, rng=None,
                 train: bool = False) -> Tensor:
    t = ids.shape[1]
    if t > cfg.max_positions:
        raise ValueError(f"sequence length {t} exceeds max_positions {cfg.max_positions}")
    x = embedding(ids)
    pos = sinusoidal_positions(cfg.max_positions, cfg.emb_dim)[:t].astype(x.dtype)
    x = ad.scale(x, math.sqrt(cfg.emb_dim)) + Tensor(pos)
    return ad.dropout(x, cfg.dropout, rng, train and rng is not None)


def encoder_layer_params(cfg: ArchConfig) -> int:
    d, f = cfg.emb_dim, cfg.ffn_dim
    return 4 * (d * d + d) + (d * f + f) + (f * d + d) + 2 * (2 * d)


def decoder_layer_params(cfg: ArchConfig) -> int:
    d, f = cfg.emb_dim, cfg.ffn_dim
    return 8 * (d * d + d) + (d * f + f) + (f * d + d) + 3 * (2 * d)
