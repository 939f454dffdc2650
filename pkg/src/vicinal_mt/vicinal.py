"""Vicinal samples: perturb a sentence by successively replacing tokens with a frozen masked LM.

For a sentence of length l a budget of t positions is chosen (fixed ratio or
the length-dependent rule in :func:`mask_budget`), an ordering of t distinct
positions is drawn uniformly, and each position is masked in turn and filled
with the LM's best token other than the original one.  Later predictions see
the earlier replacements.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Literal, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from .corpus import MonoCorpus, Sentence, write_lines
from .seq2seq import ArchConfig, MaskedLmModel, TrainingRecipe, load_model, predict_masked_batch, save_model
from .seq2seq.models import pad_batch
from .seq2seq.train import train_masked_lm
from .vocab import SPECIAL_IDS, UNK, WordVocab

CHUNK_SIZE = 256  # sentences per work unit; fixed so results never depend on the worker count


@dataclass(frozen=True)
class DiversityPolicy:
    mode: Literal["fixed", "dynamic"] = "dynamic"
    rho: float = 0.3
    a: float = 0.5
    b: float = 2.5
    h: float = 10.0
    t_min: int = 1
    t_max: int = 20
    k: int = 1
    n_prime: int = 2
    min_len: int = 3
    max_len: int = 100
    short_len: int = 20  # lengths up to this use the proportional branch

    def __post_init__(self):
        if self.mode not in ("fixed", "dynamic"):
            raise ValueError(f"mode must be 'fixed' or 'dynamic', got {self.mode!r}")
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (0, 1), got {self.rho}")
        if min(self.a, self.b, self.h) <= 0:
            raise ValueError("a, b and h must be positive")
        if self.t_min < 1 or self.t_max < self.t_min:
            raise ValueError("need 1 <= t_min <= t_max")
        if self.k != 1:
            raise ValueError("only k=1 (argmax replacement) is supported")
        if self.n_prime < 1:
            raise ValueError("n_prime must be >= 1")
        if self.min_len < 1 or self.max_len < self.min_len:
            raise ValueError("need 1 <= min_len <= max_len")

    def eligible(self, length: int) -> bool:
        return self.min_len <= length <= self.max_len

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DiversityPolicy":
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown policy keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path) -> "DiversityPolicy":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def replace(self, **kw) -> "DiversityPolicy":
        return DiversityPolicy.from_dict({**self.to_dict(), **kw})


@dataclass(frozen=True)
class MaskPlan:
    length: int
    budget: int
    positions: tuple[int, ...]
    orderings_total: int

    def __post_init__(self):
        if not 1 <= self.budget <= self.length or len(self.positions) != self.budget:
            raise ValueError("inconsistent mask plan")
        if len(set(self.positions)) != self.budget or not all(0 <= p < self.length for p in self.positions):
            raise ValueError("mask positions must be distinct and in range")


def mask_budget(length: int, policy: DiversityPolicy) -> int:
    """Number of tokens to replace in a sentence of ``length`` words."""
    if length < 1:
        raise ValueError("length must be >= 1")
    if policy.mode == "fixed":
        t = math.floor(length * policy.rho)
    elif length <= policy.short_len:
        # t_max also caps the short branch; with the default constants it never binds there
        t = min(max(math.floor(length * policy.a), policy.t_min), policy.t_max)
    else:
        t = min(math.floor(length / policy.h * policy.b), policy.t_max)
    return min(max(t, 1), length)


def orderings_total(n: int, t: int) -> int:
    return math.comb(n, t) * math.factorial(t)


def sample_mask_plan(length: int, t: int, rng: np.random.Generator,
                     maskable: Sequence[int] | None = None) -> MaskPlan:
    """Uniform draw over ordered t-subsets of ``maskable`` (default: every position)."""
    pool = np.arange(length) if maskable is None else np.asarray(maskable, dtype=np.int64)
    if not 1 <= t <= len(pool):
        raise ValueError(f"budget t={t} not in [1, {len(pool)}]")
    positions = tuple(int(p) for p in rng.permutation(pool)[:t])
    return MaskPlan(length, t, positions, orderings_total(len(pool), t))


# ---------------------------------------------------------------- the LM side


@dataclass
class VicinalLm:
    """A frozen masked LM paired with the word vocabulary it was trained on."""

    model: MaskedLmModel
    vocab: WordVocab

    def __post_init__(self):
        if not getattr(self.model, "frozen", False):
            raise ValueError("the vicinal LM must be frozen")

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return self.vocab.encode(tokens)

    def predict(self, ids: np.ndarray, positions: np.ndarray, exclusions: Sequence) -> np.ndarray:
        return predict_masked_batch(self.model, ids, positions, exclusions)

    def save(self, directory: str | Path) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        save_model(self.model, d / "mlm.ckpt")
        self.vocab.save(d / "mlm.vocab.json")

    @classmethod
    def load(cls, directory: str | Path) -> "VicinalLm":
        d = Path(directory)
        return cls(load_model(d / "mlm.ckpt"), WordVocab.load(d / "mlm.vocab.json"))


def train_vicinal_lm(mono: MonoCorpus, arch: ArchConfig, recipe: TrainingRecipe,
                     min_count: int = 1, mask_prob: float = 0.15):
    """Train a word-level masked LM on ``mono``; returns (VicinalLm, TrainResult)."""
    vocab = WordVocab.build((s.tokens for s in mono.sentences), min_count)
    ids = [vocab.encode(s.tokens) for s in mono.sentences]
    model = MaskedLmModel(arch, len(vocab), seed=recipe.seed)
    result = train_masked_lm(model, ids, recipe, mask_prob)
    return VicinalLm(model, vocab), result


def masked_accuracy(lm: VicinalLm, sentences: Sequence[Sentence], rng: np.random.Generator) -> tuple[float, float]:
    """Top-1 accuracy at one random position per sentence, and the majority-token baseline."""
    rows = [lm.encode(s.tokens) for s in sentences if len(s) > 0]
    positions = np.array([rng.integers(len(r)) for r in rows])
    truth = np.array([r[p] for r, p in zip(rows, positions)])
    preds = np.concatenate([
        lm.predict(pad_batch(rows[i : i + CHUNK_SIZE], eos=False), positions[i : i + CHUNK_SIZE],
                   [SPECIAL_IDS] * len(rows[i : i + CHUNK_SIZE]))
        for i in range(0, len(rows), CHUNK_SIZE)
    ])
    counts = np.bincount([i for r in rows for i in r], minlength=len(lm.vocab))
    counts[list(SPECIAL_IDS)] = 0
    majority = int(counts.argmax())
    return float(np.mean(preds == truth)), float(np.mean(truth == majority))


# ---------------------------------------------------------------- generation


@dataclass
class AugmentStats:
    sentences: int = 0
    ineligible: int = 0
    no_maskable: int = 0
    duplicates: int = 0
    samples: int = 0

    def merge(self, other: "AugmentStats") -> None:
        for f in fields(self):
            setattr(self, f.name, getattr(self, f.name) + getattr(other, f.name))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class _Job:
    origin: int
    tokens: tuple[str, ...]
    ids: np.ndarray
    plans: list[MaskPlan] = field(default_factory=list)


def _plan_sentence(origin: int, sentence: Sentence, policy: DiversityPolicy, lm: VicinalLm,
                   rng: np.random.Generator, stats: AugmentStats) -> _Job | None:
    stats.sentences += 1
    length = len(sentence)
    if not policy.eligible(length):
        stats.ineligible += 1
        return None
    ids = np.asarray(lm.encode(sentence.tokens), dtype=np.int64)
    maskable = np.flatnonzero(ids != UNK)
    if len(maskable) == 0:
        stats.no_maskable += 1
        return None
    t = min(mask_budget(length, policy), len(maskable))
    job = _Job(origin, sentence.tokens, ids)
    job.plans = [sample_mask_plan(length, t, rng, maskable) for _ in range(policy.n_prime)]
    return job


def _fill(jobs: list[_Job], lm: VicinalLm, stats: AugmentStats) -> list[tuple[int, Sentence]]:
    """Run every plan of every job, one replacement step at a time across the whole batch."""
    rows = [(job, plan, job.ids.copy()) for job in jobs for plan in job.plans]
    steps = max((plan.budget for _, plan, _ in rows), default=0)
    for step in range(steps):
        active = [r for r in rows if step < r[1].budget]
        ids = pad_batch([cur for _, _, cur in active], eos=False)
        positions = np.array([plan.positions[step] for _, plan, _ in active])
        exclusions = [SPECIAL_IDS | {int(job.ids[p])} for (job, _, _), p in zip(active, positions)]
        preds = lm.predict(ids, positions, exclusions)
        for (_, _, cur), p, new in zip(active, positions, preds):
            cur[p] = new

    out: list[tuple[int, Sentence]] = []
    by_job: dict[int, set[tuple[str, ...]]] = {}
    for job, plan, cur in rows:
        tokens = list(job.tokens)
        for p in plan.positions:
            tokens[p] = lm.vocab.itos[int(cur[p])]
        key = tuple(tokens)
        seen = by_job.setdefault(id(job), {job.tokens})
        if key in seen:
            stats.duplicates += 1
            continue
        seen.add(key)
        out.append((job.origin, Sentence.from_tokens(tokens)))
    stats.samples += len(out)
    return out


def generate_vicinal(sentence: Sentence, policy: DiversityPolicy, lm: VicinalLm, rng: np.random.Generator,
                     stats: AugmentStats | None = None) -> list[Sentence]:
    """Up to ``n_prime`` distinct perturbations of ``sentence``; [] if it is ineligible."""
    stats = stats if stats is not None else AugmentStats()
    job = _plan_sentence(0, sentence, policy, lm, rng, stats)
    if job is None:
        return []
    return [s for _, s in _fill([job], lm, stats)]


def augment_corpus(sentences: Sequence[Sentence], policy: DiversityPolicy, lm: VicinalLm, global_seed: int,
                   threads: int = 1, lang: str = "tgt", stats: AugmentStats | None = None) -> MonoCorpus:
    """Vicinal samples of every eligible sentence, tagged with the index of their origin.

    Sentence i draws its plans from ``default_rng([global_seed, i])`` and work is cut
    into fixed chunks, so the output is identical for any ``threads``.
    """
    stats = stats if stats is not None else AugmentStats()

    def work(start: int) -> tuple[list[tuple[int, Sentence]], AugmentStats]:
        local = AugmentStats()
        jobs = []
        for i in range(start, min(start + CHUNK_SIZE, len(sentences))):
            job = _plan_sentence(i, sentences[i], policy, lm, np.random.default_rng([global_seed, i]), local)
            if job is not None:
                jobs.append(job)
        return _fill(jobs, lm, local), local

    starts = range(0, len(sentences), CHUNK_SIZE)
    if threads > 1:
        with threadpool_limits(1), ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(work, starts))
    else:
        results = [work(s) for s in starts]

    samples: list[Sentence] = []
    origins: list[int] = []
    for out, local in results:
        stats.merge(local)
        for origin, s in out:
            origins.append(origin)
            samples.append(s)
    return MonoCorpus(tuple(samples), lang, tuple(origins))


def write_augmented(corpus: MonoCorpus, text_path: str | Path, index_path: str | Path) -> None:
    """Samples one per line, plus a sidecar with the zero-based origin line of each."""
    if corpus.origin_index is None:
        raise ValueError("corpus carries no origin index")
    write_lines(text_path, corpus.sentences)
    Path(index_path).write_text("".join(f"{i}\n" for i in corpus.origin_index), encoding="utf-8")


def read_augmented(text_path: str | Path, index_path: str | Path, lang: str = "tgt") -> MonoCorpus:
    lines = Path(text_path).read_text(encoding="utf-8").splitlines()
    origins = tuple(int(x) for x in Path(index_path).read_text(encoding="utf-8").split())
    if len(lines) != len(origins):
        raise ValueError(f"{text_path} has {len(lines)} lines but {index_path} has {len(origins)} indices")
    return MonoCorpus(tuple(Sentence.from_text(line) for line in lines), lang, origins)
