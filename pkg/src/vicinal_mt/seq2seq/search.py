"""Batched beam search over any model exposing ``search_state`` / ``next_logprobs``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..vocab import BOS, EOS, MASK, PAD
from .models import GuidedBTModel, Seq2SeqModel

_BANNED = (PAD, BOS, MASK)


@dataclass
class Hypothesis:
    tokens: list[int]  # without BOS / EOS
    score: float  # length-normalised log-probability
    logprob: float


def _input_len(item) -> int:
    return len(item[0]) if isinstance(item, tuple) else len(item)


def default_max_len(item, a: float = 1.5, b: int = 5) -> int:
    return int(a * _input_len(item)) + b


def _finalize(logprob: float, length: int, length_penalty: float) -> float:
    return logprob / (length**length_penalty)


def beam_search(
    model: Seq2SeqModel | GuidedBTModel,
    inputs: Sequence,
    beam: int = 5,
    max_len: int | None = None,
    length_penalty: float = 1.0,
    batch_size: int = 64,
) -> list[Hypothesis]:
    """Decode every input; returns the best finished hypothesis per input, in order.

    A sentence stops once ``beam`` hypotheses have emitted EOS from within the
    top-``beam`` candidates.  With ``beam == 1`` this is greedy decoding.
    """
    if beam < 1:
        raise ValueError("beam must be >= 1")
    model.eval()
    results: list[Hypothesis] = []
    order = sorted(range(len(inputs)), key=lambda i: (_input_len(inputs[i]), i))
    out: dict[int, Hypothesis] = {}
    for start in range(0, len(order), batch_size):
        idx = order[start : start + batch_size]
        chunk = [inputs[i] for i in idx]
        limits = [max_len if max_len is not None else default_max_len(x) for x in chunk]
        for i, hyp in zip(idx, _search_batch(model, chunk, beam, limits, length_penalty)):
            out[i] = hyp
    results = [out[i] for i in range(len(inputs))]
    return results


def _search_batch(model, chunk, beam, limits, length_penalty) -> list[Hypothesis]:
    n = len(chunk)
    state = model.search_state(chunk)
    state = model.reorder_state(state, np.repeat(np.arange(n), beam))
    tokens = np.full((n * beam, 1), BOS, dtype=np.int64)
    scores = np.full((n, beam), -np.inf)
    scores[:, 0] = 0.0
    finished: list[list[Hypothesis]] = [[] for _ in range(n)]
    done = np.zeros(n, dtype=bool)
    limits = np.asarray(limits)

    for step in range(int(limits.max()) + 1):
        lp = model.next_logprobs(state, tokens)
        lp[:, list(_BANNED)] = -np.inf
        v = lp.shape[1]
        lp = lp.reshape(n, beam, v)
        force = step >= limits
        if force.any():
            eos_col = lp[force, :, EOS].copy()
            lp[force] = -np.inf
            lp[force, :, EOS] = eos_col
        cand = (scores[:, :, None] + lp).reshape(n, beam * v)
        k = min(2 * beam, beam * v)
        top = np.argsort(-cand, axis=1, kind="stable")[:, :k]

        next_rows = np.zeros((n, beam), dtype=np.int64)
        next_tok = np.full((n, beam), EOS, dtype=np.int64)
        next_scores = np.full((n, beam), -np.inf)
        for i in range(n):
            base = i * beam
            if done[i]:
                next_rows[i] = base
                continue
            filled = 0
            for rank, c in enumerate(top[i]):
                s = cand[i, c]
                if not np.isfinite(s):
                    break
                b, tok = divmod(int(c), v)
                if tok == EOS:
                    if rank < beam:
                        seq = tokens[base + b, 1:].tolist()
                        finished[i].append(Hypothesis(seq, _finalize(s, len(seq) + 1, length_penalty), float(s)))
                    continue
                if filled < beam:
                    next_rows[i, filled] = base + b
                    next_tok[i, filled] = tok
                    next_scores[i, filled] = s
                    filled += 1
            if len(finished[i]) >= beam or filled == 0:
                done[i] = True
                next_rows[i] = base
                next_scores[i] = -np.inf
            elif filled < beam:
                next_rows[i, filled:] = next_rows[i, 0]
        if done.all():
            break
        rows = next_rows.reshape(-1)
        tokens = np.concatenate([tokens[rows], next_tok.reshape(-1, 1)], axis=1)
        scores = next_scores
        state = model.reorder_state(state, rows)

    best = []
    for hyps in finished:
        if not hyps:
            best.append(Hypothesis([], -np.inf, -np.inf))
            continue
        best.append(max(hyps, key=lambda h: h.score))
    return best


def greedy_decode(model: Seq2SeqModel | GuidedBTModel, item, max_len: int | None = None) -> list[int]:
    """Argmax decoding of a single input, written independently of beam_search."""
    model.eval()
    max_len = default_max_len(item) if max_len is None else max_len
    state = model.search_state([item])
    prefix = [BOS]
    for step in range(max_len + 1):
        lp = model.next_logprobs(state, np.asarray([prefix]))[0]
        lp[list(_BANNED)] = -np.inf
        tok = EOS if step >= max_len else int(np.argmax(lp))
        if tok == EOS:
            break
        prefix.append(tok)
    return prefix[1:]
