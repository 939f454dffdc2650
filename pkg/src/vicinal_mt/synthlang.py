"""Deterministic synthetic language pairs.

Source sentences come from a unigram+bigram model over a closed vocabulary.
The target side is a word-for-word bijection followed by reversing the words
inside consecutive windows of ``reorder_window`` words (window 2 swaps
adjacent words, window 1 is pure substitution).  Because the mapping is known,
reference translations and oracle BLEU come for free.

Monolingual target text can be drawn from the same distribution
(``relevant``) or from a ``distant`` domain with re-ranked unigram mass, a
weaker bigram signal and a share of words that never occur in the bitext.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from functools import cached_property
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from .corpus import BitextCorpus, MonoCorpus, Sentence, write_lines, write_parallel

Domain = Literal["relevant", "distant"]

_SRC_ONSETS = list("ptkbdgmn") + ["pr", "tr", "kl"]
_SRC_VOWELS = list("aeiou")
_TGT_ONSETS = list("szfvlrhjw") + ["sh", "zh"]
_TGT_VOWELS = list("aoyei")


@dataclass(frozen=True)
class SynthSpec:
    vocab_size: int = 240  # per language; the word map is a bijection
    extra_vocab: int = 60  # distant-domain words absent from the bitext
    min_len: int = 4
    max_len: int = 10
    reorder_window: int = 2
    zipf_exponent: float = 0.7
    bigram_weight: float = 0.8
    successors: int = 4
    distant_oov_rate: float = 0.2
    distant_bigram_weight: float = 0.4
    lang_seed: int = 0
    seed: int = 0
    train_size: int = 2000
    dev_size: int = 300
    test_size: int = 500
    src_lang: str = "sx"
    tgt_lang: str = "ty"

    def __post_init__(self):
        if self.vocab_size < 2 or self.extra_vocab < 0:
            raise ValueError("vocab_size must be >= 2 and extra_vocab >= 0")
        if not 1 <= self.min_len <= self.max_len:
            raise ValueError("need 1 <= min_len <= max_len")
        if self.reorder_window < 1:
            raise ValueError("reorder_window must be >= 1")
        if not 0.0 <= self.bigram_weight <= 1.0 or not 0.0 <= self.distant_bigram_weight <= 1.0:
            raise ValueError("bigram weights must lie in [0, 1]")
        if not 0.0 <= self.distant_oov_rate < 1.0:
            raise ValueError("distant_oov_rate must lie in [0, 1)")
        if self.distant_oov_rate > 0 and self.extra_vocab == 0:
            raise ValueError("distant_oov_rate > 0 needs extra_vocab > 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown SynthSpec keys: {sorted(unknown)}")
        return cls(**d)

    def replace(self, **kw) -> "SynthSpec":
        return SynthSpec.from_dict({**self.to_dict(), **kw})


def _make_words(rng: np.random.Generator, n: int, onsets: list[str], vowels: list[str]) -> list[str]:
    words: list[str] = []
    seen: set[str] = set()
    while len(words) < n:
        syllables = int(rng.integers(1, 4))
        w = "".join(onsets[rng.integers(len(onsets))] + vowels[rng.integers(len(vowels))]
                    for _ in range(syllables))
        if w not in seen:
            seen.add(w)
            words.append(w)
    return words


def reorder(tokens: Sequence[str], window: int) -> list[str]:
    """Reverse each consecutive window; an involution, so it is its own inverse."""
    out: list[str] = []
    for i in range(0, len(tokens), window):
        out.extend(reversed(tokens[i : i + window]))
    return out


class SynthLanguage:
    """The language pair defined by a spec's ``lang_seed`` and shape parameters."""

    def __init__(self, spec: SynthSpec):
        self.spec = spec
        rng = np.random.default_rng([spec.lang_seed, 1])
        total = spec.vocab_size + spec.extra_vocab
        self.src_words = _make_words(rng, total, _SRC_ONSETS, _SRC_VOWELS)
        self.tgt_words = _make_words(rng, total, _TGT_ONSETS, _TGT_VOWELS)
        self.src_to_tgt = dict(zip(self.src_words, self.tgt_words))
        self.tgt_to_src = dict(zip(self.tgt_words, self.src_words))

        v = spec.vocab_size
        ranks = np.arange(1, v + 1, dtype=np.float64)
        zipf = ranks ** (-spec.zipf_exponent)
        self.unigram = zipf / zipf.sum()
        shifted = np.roll(rng.permutation(v), v // 3)
        self.distant_unigram = self.unigram[np.argsort(shifted)]

        weights = 0.5 ** np.arange(spec.successors)
        weights /= weights.sum()
        self.successors = np.stack([rng.choice(v, size=spec.successors, replace=False) for _ in range(v)])
        self.successor_weights = weights
        extra = spec.extra_vocab
        self.extra_unigram = np.full(extra, 1.0 / extra) if extra else np.zeros(0)

    def _next_probs(self, prev: int | None, domain: Domain) -> np.ndarray:
        spec = self.spec
        uni = self.unigram if domain == "relevant" else self.distant_unigram
        if prev is None:
            return uni
        beta = spec.bigram_weight if domain == "relevant" else spec.distant_bigram_weight
        probs = (1.0 - beta) * uni
        probs = probs.copy()
        probs[self.successors[prev]] += beta * self.successor_weights
        return probs

    def sample_source(self, rng: np.random.Generator, domain: Domain = "relevant") -> list[str]:
        spec = self.spec
        length = int(rng.integers(spec.min_len, spec.max_len + 1))
        ids: list[int] = []
        prev = None
        for _ in range(length):
            prev = int(rng.choice(spec.vocab_size, p=self._next_probs(prev, domain)))
            ids.append(prev)
        words = [self.src_words[i] for i in ids]
        if domain == "distant" and spec.extra_vocab:
            swap = rng.random(length) < spec.distant_oov_rate
            for pos in np.flatnonzero(swap):
                words[pos] = self.src_words[spec.vocab_size + int(rng.integers(spec.extra_vocab))]
        return words

    def translate(self, src_tokens: Sequence[str]) -> list[str]:
        return reorder([self.src_to_tgt[w] for w in src_tokens], self.spec.reorder_window)

    def inverse(self, tgt_tokens: Sequence[str]) -> list[str]:
        return [self.tgt_to_src[w] for w in reorder(list(tgt_tokens), self.spec.reorder_window)]

    @cached_property
    def core_target_vocab(self) -> frozenset[str]:
        return frozenset(self.tgt_words[: self.spec.vocab_size])


def _unique_sentences(lang: SynthLanguage, rng, n: int, domain: Domain, exclude: set[tuple[str, ...]]):
    out: list[list[str]] = []
    seen = set(exclude)
    attempts = 0
    while len(out) < n:
        attempts += 1
        if attempts > 50 * n + 1000:
            raise RuntimeError("could not draw enough distinct sentences; enlarge the vocabulary")
        s = lang.sample_source(rng, domain)
        key = tuple(s)
        if key in seen:
            continue
        seen.add(key)
        out.append(s)
    return out


def generate_pair_corpus(spec: SynthSpec) -> tuple[BitextCorpus, BitextCorpus, BitextCorpus]:
    """Disjoint (train, dev, test) bitexts drawn from the relevant domain."""
    lang = SynthLanguage(spec)
    rng = np.random.default_rng([spec.seed, 2])
    n = spec.train_size + spec.dev_size + spec.test_size
    sources = _unique_sentences(lang, rng, n, "relevant", set())
    langs = (spec.src_lang, spec.tgt_lang)

    def corpus(chunk):
        return BitextCorpus.from_pairs(
            ((Sentence.from_tokens(s), Sentence.from_tokens(lang.translate(s))) for s in chunk), langs
        )

    a = spec.train_size
    b = a + spec.dev_size
    return corpus(sources[:a]), corpus(sources[a:b]), corpus(sources[b:])


def generate_mono(spec: SynthSpec, domain: Domain, size: int, seed: int,
                  exclude: Sequence[BitextCorpus] = (), side: Literal["source", "target"] = "target") -> MonoCorpus:
    """Monolingual text in one language; sentences that occur in any ``exclude`` bitext are skipped."""
    if side not in ("source", "target"):
        raise ValueError(f"side must be 'source' or 'target', got {side!r}")
    lang = SynthLanguage(spec)
    rng = np.random.default_rng([spec.seed, 3, seed, 0 if domain == "relevant" else 1, side == "source"])
    banned = {tuple(s.tokens) for c in exclude for s in c.sources}
    sources = _unique_sentences(lang, rng, size, domain, banned)
    if side == "source":
        return MonoCorpus(tuple(Sentence.from_tokens(s) for s in sources), spec.src_lang)
    return MonoCorpus(tuple(Sentence.from_tokens(lang.translate(s)) for s in sources), spec.tgt_lang)


def oov_rate(mono: MonoCorpus, reference: BitextCorpus) -> float:
    vocab = {w for t in reference.targets for w in t.tokens}
    total = sum(len(s) for s in mono.sentences)
    oov = sum(1 for s in mono.sentences for w in s.tokens if w not in vocab)
    return oov / max(total, 1)


def oracle_translations(spec: SynthSpec, corpus: BitextCorpus) -> list[Sentence]:
    lang = SynthLanguage(spec)
    return [Sentence.from_tokens(lang.translate(s.tokens)) for s in corpus.sources]


def write_synthetic(spec: SynthSpec, out_dir: str | Path, mono_sizes: dict[str, int] | None = None) -> dict:
    """Write train/dev/test bitexts (+ optional mono corpora) and a JSON spec record."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train, dev, test = generate_pair_corpus(spec)
    s, t = spec.src_lang, spec.tgt_lang
    files = {}
    for name, corpus in (("train", train), ("dev", dev), ("test", test)):
        write_parallel(corpus, out / f"{name}.{s}", out / f"{name}.{t}")
        files[name] = [f"{name}.{s}", f"{name}.{t}"]
    for domain, size in (mono_sizes or {}).items():
        mono = generate_mono(spec, domain, size, seed=0, exclude=(dev, test))  # type: ignore[arg-type]
        write_lines(out / f"mono.{domain}.{t}", mono.sentences)
        files[f"mono_{domain}"] = f"mono.{domain}.{t}"
    record = {"spec": spec.to_dict(), "files": files}
    (out / "synth.json").write_text(json.dumps(record, indent=2, sort_keys=True), encoding="utf-8")
    return record
