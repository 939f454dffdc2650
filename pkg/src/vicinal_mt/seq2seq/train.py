"""Training loops: seq2seq, guided back-translation and masked LM.

All three share :func:`fit`, which batches by token budget, follows the
inverse square-root schedule, and keeps the parameters with the lowest dev
loss (early stopping on dev loss).
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .. import autodiff as ad
from ..autodiff import AdamState, Module, Tensor
from ..vocab import MASK, PAD, SPECIAL_IDS
from .config import TrainingRecipe
from .models import GuidedBTModel, MaskedLmModel, Seq2SeqModel, pad_batch

log = logging.getLogger(__name__)


class TrainingDivergedError(RuntimeError):
    """Raised on a non-finite loss; the model holds the last good parameters."""

    def __init__(self, message: str, state: dict[str, np.ndarray], history: list[dict]):
        super().__init__(message)
        self.state = state
        self.history = history


@dataclass
class TrainResult:
    model: Module
    history: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    best_dev_loss: float = math.inf
    steps: int = 0
    seconds: float = 0.0


def make_batches(lengths: Sequence[int], batch_tokens: int, rng: np.random.Generator | None) -> list[np.ndarray]:
    """Group example indices of similar length so ``max_len * count <= batch_tokens``."""
    lengths = np.asarray(lengths)
    order = np.lexsort((np.arange(len(lengths)), lengths))
    batches: list[np.ndarray] = []
    start = 0
    while start < len(order):
        end = start + 1
        while end < len(order) and lengths[order[end]] * (end - start + 1) <= batch_tokens:
            end += 1
        batches.append(order[start:end])
        start = end
    if rng is not None:
        perm = rng.permutation(len(batches))
        batches = [batches[i] for i in perm]
    return batches


def _snapshot(model: Module) -> dict[str, np.ndarray]:
    return {k: v.copy() for k, v in model.state_dict().items()}


def fit(
    model: Module,
    train: Sequence,
    dev: Sequence,
    recipe: TrainingRecipe,
    length_of: Callable[[object], int],
    loss_fn: Callable[[Module, list, np.random.Generator | None], Tensor],
    dev_loss_fn: Callable[[Module, list], tuple[float, int]],
    label: str = "model",
) -> TrainResult:
    if len(train) == 0:
        raise ValueError("training set is empty")
    if len(dev) == 0:
        raise ValueError("dev set is empty")
    t0 = time.perf_counter()
    params = [p for p in model.parameters() if p.requires_grad]
    state = AdamState()
    train_lengths = [length_of(ex) for ex in train]
    dev_batches = make_batches([length_of(ex) for ex in dev], recipe.batch_tokens, None)
    best_state = _snapshot(model)
    best = TrainResult(model=model)
    since_best = 0
    step = 0
    history: list[dict] = []

    for epoch in range(1, recipe.max_epochs + 1):
        rng = np.random.default_rng([recipe.seed, epoch])
        model.train()
        total, n_batches = 0.0, 0
        lr = recipe.init_lr
        for idx in make_batches(train_lengths, recipe.batch_tokens, rng):
            step += 1
            lr = ad.inverse_sqrt_lr(step, recipe.peak_lr, recipe.warmup, recipe.init_lr)
            model.zero_grad()
            loss = loss_fn(model, [train[i] for i in idx], rng)
            value = float(loss.data)
            if not math.isfinite(value):
                model.load_state_dict(best_state)
                raise TrainingDivergedError(
                    f"{label}: non-finite loss at epoch {epoch} step {step}", best_state, history
                )
            ad.backward(loss)
            grads = [p.grad for p in params]
            ad.clip_grad_norm(grads, recipe.clip_norm)
            ad.adam_step(params, grads, state, lr, recipe.betas, recipe.adam_eps)
            total += value
            n_batches += 1

        model.eval()
        nll, count = 0.0, 0
        with ad.no_grad():
            for idx in dev_batches:
                s, c = dev_loss_fn(model, [dev[i] for i in idx])
                nll += s
                count += c
        dev_loss = nll / max(count, 1)
        history.append({"epoch": epoch, "train_loss": total / max(n_batches, 1),
                        "dev_loss": dev_loss, "lr": lr, "steps": step})
        log.info("%s epoch %d train %.4f dev %.4f lr %.2e", label, epoch,
                 history[-1]["train_loss"], dev_loss, lr)
        if not math.isfinite(dev_loss):
            model.load_state_dict(best_state)
            raise TrainingDivergedError(f"{label}: non-finite dev loss at epoch {epoch}", best_state, history)
        if dev_loss < best.best_dev_loss:
            best.best_dev_loss = dev_loss
            best.best_epoch = epoch
            best_state = _snapshot(model)
            since_best = 0
        else:
            since_best += 1
            if since_best >= recipe.patience:
                break

    model.load_state_dict(best_state)
    model.eval()
    best.history = history
    best.steps = step
    best.seconds = time.perf_counter() - t0
    return best


def _nll_sum(logits: Tensor, targets: np.ndarray) -> tuple[float, int]:
    v = logits.shape[-1]
    flat = logits.data.reshape(-1, v)
    tgt = targets.reshape(-1)
    rows = np.flatnonzero(tgt != PAD)
    logp = ad.tensor.log_softmax_np(flat[rows])
    return float(-logp[np.arange(rows.size), tgt[rows]].astype(np.float64).sum()), int(rows.size)


# ---------------------------------------------------------------- seq2seq


def _s2s_arrays(batch):
    src = pad_batch([s for s, _ in batch])
    prev = pad_batch([t for _, t in batch], bos=True, eos=False)
    out = pad_batch([t for _, t in batch])
    return src, prev, out


def train_seq2seq(
    model: Seq2SeqModel,
    train: Sequence[tuple[Sequence[int], Sequence[int]]],
    dev: Sequence[tuple[Sequence[int], Sequence[int]]],
    recipe: TrainingRecipe,
) -> TrainResult:
    """Train on encoded (source ids, target ids) pairs."""
    ls = model.cfg.label_smoothing

    def loss_fn(m, batch, rng):
        src, prev, out = _s2s_arrays(batch)
        return ad.cross_entropy(m.forward(src, prev, rng), out, ls, PAD)

    def dev_fn(m, batch):
        src, prev, out = _s2s_arrays(batch)
        return _nll_sum(m.forward(src, prev), out)

    return fit(model, train, dev, recipe, lambda ex: max(len(ex[0]), len(ex[1])) + 1,
               loss_fn, dev_fn, label="seq2seq")


def token_accuracy(model: Seq2SeqModel | GuidedBTModel, examples: Sequence) -> float:
    """Teacher-forced next-token accuracy (EOS included)."""
    correct = total = 0
    model.eval()
    with ad.no_grad():
        for idx in make_batches([len(ex[-1]) + 1 for ex in examples], 4096, None):
            batch = [examples[i] for i in idx]
            if isinstance(model, GuidedBTModel):
                src, guide, prev, out = _guided_arrays(batch)
                logits = model.forward(src, guide, prev)
            else:
                src, prev, out = _s2s_arrays(batch)
                logits = model.forward(src, prev)
            pred = logits.data.argmax(axis=-1)
            keep = out != PAD
            correct += int(((pred == out) & keep).sum())
            total += int(keep.sum())
    return correct / max(total, 1)


# ---------------------------------------------------------------- guided BT


def _guided_arrays(batch):
    src = pad_batch([y for y, _, _ in batch])
    guide = pad_batch([g for _, g, _ in batch])
    prev = pad_batch([x for _, _, x in batch], bos=True, eos=False)
    out = pad_batch([x for _, _, x in batch])
    return src, guide, prev, out


def train_guided_bt(
    model: GuidedBTModel,
    triplets: Sequence[tuple[Sequence[int], Sequence[int], Sequence[int]]],
    dev: Sequence[tuple[Sequence[int], Sequence[int], Sequence[int]]],
    recipe: TrainingRecipe,
) -> TrainResult:
    """Teacher-forced training of x from (y -> E, guide x~ -> E').

    Each triplet is ``(y, x_tilde, x)``.
    """
    if len(triplets) == 0:
        raise ValueError("no training triplets")
    ls = model.cfg.label_smoothing

    def loss_fn(m, batch, rng):
        src, guide, prev, out = _guided_arrays(batch)
        return ad.cross_entropy(m.forward(src, guide, prev, rng), out, ls, PAD)

    def dev_fn(m, batch):
        src, guide, prev, out = _guided_arrays(batch)
        return _nll_sum(m.forward(src, guide, prev), out)

    return fit(model, triplets, dev, recipe, lambda ex: max(len(ex[0]), len(ex[1]), len(ex[2])) + 1,
               loss_fn, dev_fn, label="guided")


# ---------------------------------------------------------------- masked LM


def mask_tokens(ids: np.ndarray, mask_prob: float, vocab_size: int, rng: np.random.Generator):
    """BERT-style corruption: of the selected positions 80% -> MASK, 10% random, 10% kept.

    Every non-empty row gets at least one selected position.
    """
    real = ids != PAD
    special = np.isin(ids, list(SPECIAL_IDS))
    candidates = real & ~special
    selected = (rng.random(ids.shape) < mask_prob) & candidates
    for row in np.flatnonzero(~selected.any(axis=1) & candidates.any(axis=1)):
        selected[row, rng.choice(np.flatnonzero(candidates[row]))] = True
    targets = np.where(selected, ids, PAD)
    roll = rng.random(ids.shape)
    corrupted = ids.copy()
    corrupted[selected & (roll < 0.8)] = MASK
    swap = selected & (roll >= 0.8) & (roll < 0.9)
    corrupted[swap] = rng.integers(len(SPECIAL_IDS), vocab_size, size=int(swap.sum()))
    return corrupted, targets


def _mlm_loss(model: MaskedLmModel, ids: np.ndarray, targets: np.ndarray, rng) -> Tensor:
    rows, cols = np.nonzero(targets != PAD)
    logits = model.forward(ids, rng, positions=(rows, cols))
    return ad.cross_entropy(logits, targets[rows, cols], 0.0)


def train_masked_lm(
    model: MaskedLmModel,
    mono: Sequence[Sequence[int]],
    recipe: TrainingRecipe,
    mask_prob: float = 0.15,
    dev: Sequence[Sequence[int]] | None = None,
) -> TrainResult:
    """Standard MLM training; the returned model is frozen."""
    if not 0.0 < mask_prob < 1.0:
        raise ValueError(f"mask_prob must lie in (0, 1), got {mask_prob}")
    if len(mono) == 0:
        raise ValueError("monolingual training set is empty")
    if dev is None:
        cut = max(1, len(mono) // 20)
        mono, dev = mono[cut:], mono[:cut]
        if len(mono) == 0:
            mono = dev
    dev_rng = np.random.default_rng([recipe.seed, 7919])
    dev_arrays = {}

    def loss_fn(m, batch, rng):
        ids = pad_batch(batch, eos=False)
        corrupted, targets = mask_tokens(ids, mask_prob, m.vocab_size, rng)
        return _mlm_loss(m, corrupted, targets, rng)

    def dev_fn(m, batch):
        key = id(batch[0]), len(batch)
        if key not in dev_arrays:
            ids = pad_batch(batch, eos=False)
            dev_arrays[key] = mask_tokens(ids, mask_prob, m.vocab_size, dev_rng)
        corrupted, targets = dev_arrays[key]
        rows, cols = np.nonzero(targets != PAD)
        logits = m.forward(corrupted, positions=(rows, cols))
        return _nll_sum(logits, targets[rows, cols])

    result = fit(model, list(mono), list(dev), recipe, len, loss_fn, dev_fn, label="mlm")
    model.freeze()
    return result


def predict_masked(model: MaskedLmModel, tokens: Sequence[int], position: int, exclusions) -> int:
    """Argmax at ``position`` (replaced by MASK) over the vocabulary minus ``exclusions``."""
    return int(predict_masked_batch(model, np.asarray([tokens]), np.asarray([position]), [exclusions])[0])


class NoCandidateError(ValueError):
    pass


def predict_masked_batch(model: MaskedLmModel, ids: np.ndarray, positions: np.ndarray,
                         exclusions: Sequence) -> np.ndarray:
    ids = np.array(ids, dtype=np.int64, copy=True)
    rows = np.arange(len(ids))
    if np.any(positions < 0) or np.any(positions >= ids.shape[1]):
        raise IndexError("masked position out of range")
    ids[rows, positions] = MASK
    with ad.no_grad():
        was_training = model.training
        model.eval()
        logits = model.forward(ids, positions=(rows, positions)).data.astype(np.float64)
        model.train(was_training)
    for r, excl in enumerate(exclusions):
        excl = [i for i in set(excl) if 0 <= i < model.vocab_size]
        if len(excl) >= model.vocab_size:
            raise NoCandidateError("exclusions cover the whole vocabulary")
        logits[r, excl] = -np.inf
    return logits.argmax(axis=-1)
