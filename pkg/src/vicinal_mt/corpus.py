"""Parallel and monolingual corpora: loading, dedup, upsampling and splitting.

Corpora are plain UTF-8 text, one sentence per line.  A parallel corpus is two
line-aligned files (``<name>.<src>`` / ``<name>.<tgt>``).  Lines are NFC
normalised on load and tokenised by Unicode whitespace.
"""

from __future__ import annotations

import hashlib
import logging
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Sequence

import numpy as np

log = logging.getLogger(__name__)

Provenance = Literal["pure-bt", "guided-bt", "bt-mono"]


class AlignmentError(ValueError):
    """Source and target files have different line counts."""


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[str, ...]
    raw: str

    def __post_init__(self):
        if "\n" in self.raw:
            raise ValueError("sentence text may not contain a newline")

    @classmethod
    def from_text(cls, line: str) -> "Sentence":
        raw = unicodedata.normalize("NFC", line.rstrip("\n"))
        return cls(tuple(raw.split()), raw)

    @classmethod
    def from_tokens(cls, tokens: Iterable[str]) -> "Sentence":
        tokens = tuple(tokens)
        return cls(tokens, " ".join(tokens))

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class BitextCorpus:
    pairs: tuple[tuple[Sentence, Sentence], ...]
    langs: tuple[str, str] = ("src", "tgt")
    dropped_malformed: int = 0

    @property
    def size(self) -> int:
        return len(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def sources(self) -> list[Sentence]:
        return [s for s, _ in self.pairs]

    @property
    def targets(self) -> list[Sentence]:
        return [t for _, t in self.pairs]

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[Sentence, Sentence]], langs=("src", "tgt")) -> "BitextCorpus":
        return cls(tuple((s, t) for s, t in pairs), tuple(langs))

    @classmethod
    def from_text_pairs(cls, pairs: Iterable[tuple[str, str]], langs=("src", "tgt")) -> "BitextCorpus":
        return cls.from_pairs(((Sentence.from_text(s), Sentence.from_text(t)) for s, t in pairs), langs)

    def subset(self, indices: Sequence[int]) -> "BitextCorpus":
        return BitextCorpus(tuple(self.pairs[i] for i in indices), self.langs)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for s, t in self.pairs:
            h.update(s.raw.encode("utf-8") + b"\t" + t.raw.encode("utf-8") + b"\n")
        return h.hexdigest()


@dataclass(frozen=True)
class MonoCorpus:
    sentences: tuple[Sentence, ...]
    lang: str = "tgt"
    origin_index: tuple[int, ...] | None = None

    @property
    def size(self) -> int:
        return len(self.sentences)

    def __len__(self) -> int:
        return len(self.sentences)

    @classmethod
    def from_lines(cls, lines: Iterable[str], lang: str = "tgt") -> "MonoCorpus":
        seen: set[str] = set()
        out = []
        for line in lines:
            s = Sentence.from_text(line)
            if not s.tokens or s.raw in seen:
                continue
            seen.add(s.raw)
            out.append(s)
        return cls(tuple(out), lang)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for s in self.sentences:
            h.update(s.raw.encode("utf-8") + b"\n")
        return h.hexdigest()


@dataclass(frozen=True)
class SyntheticBitext:
    pairs: tuple[tuple[Sentence, Sentence], ...]
    provenance: Provenance
    origin_index: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.provenance not in ("pure-bt", "guided-bt", "bt-mono"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        has_origin = self.origin_index is not None
        if has_origin != (self.provenance != "bt-mono"):
            raise ValueError("origin_index must be given exactly when provenance is not bt-mono")
        if has_origin and len(self.origin_index) != len(self.pairs):
            raise ValueError("origin_index length differs from pair count")

    def __len__(self) -> int:
        return len(self.pairs)

    def as_bitext(self, langs=("src", "tgt")) -> BitextCorpus:
        return BitextCorpus(self.pairs, tuple(langs))


@dataclass
class LoadStats:
    blank: int = 0
    malformed: int = 0
    malformed_lines: list[int] = field(default_factory=list)


def _read_lines(path: str | Path) -> list[str]:
    text = Path(path).read_bytes().decode("utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def load_parallel(src_path: str | Path, tgt_path: str | Path, langs: tuple[str, str] | None = None) -> BitextCorpus:
    """Load two line-aligned files; drops blank-blank lines, counts and drops half-blank ones."""
    src_lines = _read_lines(src_path)
    tgt_lines = _read_lines(tgt_path)
    if len(src_lines) != len(tgt_lines):
        raise AlignmentError(f"{src_path} has {len(src_lines)} lines but {tgt_path} has {len(tgt_lines)}")
    if langs is None:
        langs = (Path(src_path).suffix.lstrip(".") or "src", Path(tgt_path).suffix.lstrip(".") or "tgt")
    pairs = []
    malformed = 0
    for lineno, (a, b) in enumerate(zip(src_lines, tgt_lines), start=1):
        s, t = Sentence.from_text(a), Sentence.from_text(b)
        if not s.tokens and not t.tokens:
            continue
        if not s.tokens or not t.tokens:
            malformed += 1
            log.warning("dropping malformed pair at line %d of %s", lineno, src_path)
            continue
        pairs.append((s, t))
    return BitextCorpus(tuple(pairs), tuple(langs), malformed)


def load_mono(path: str | Path, lang: str | None = None) -> MonoCorpus:
    return MonoCorpus.from_lines(_read_lines(path), lang or Path(path).suffix.lstrip(".") or "tgt")


def write_lines(path: str | Path, sentences: Iterable[Sentence]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in sentences:
            fh.write(s.raw + "\n")


def write_parallel(corpus: BitextCorpus, src_path: str | Path, tgt_path: str | Path) -> None:
    write_lines(src_path, corpus.sources)
    write_lines(tgt_path, corpus.targets)


def deduplicate(corpus: BitextCorpus) -> BitextCorpus:
    """Drop exact repeats of a (source, target) pair, keeping the first occurrence."""
    seen: set[tuple[str, str]] = set()
    kept = []
    for s, t in corpus.pairs:
        key = (s.raw, t.raw)
        if key in seen:
            continue
        seen.add(key)
        kept.append((s, t))
    return BitextCorpus(tuple(kept), corpus.langs, corpus.dropped_malformed)


def upsample(corpus: BitextCorpus, target_size: int, rng_seed: int) -> BitextCorpus:
    """Repeat the corpus ``target_size // N`` times, then add a sample without replacement."""
    n = len(corpus)
    if n == 0 or target_size < n:
        raise ValueError(f"target_size {target_size} must be >= corpus size {n} (> 0)")
    copies, rest = divmod(target_size, n)
    pairs = list(corpus.pairs) * copies
    if rest:
        pick = np.random.default_rng(rng_seed).choice(n, size=rest, replace=False)
        pairs.extend(corpus.pairs[i] for i in pick)
    return BitextCorpus(tuple(pairs), corpus.langs, corpus.dropped_malformed)


def split(corpus: BitextCorpus, fractions: tuple[float, float, float], rng_seed: int
          ) -> tuple[BitextCorpus, BitextCorpus, BitextCorpus]:
    if len(fractions) != 3 or any(f <= 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must be three positive numbers summing to 1, got {fractions}")
    n = len(corpus)
    perm = np.random.default_rng(rng_seed).permutation(n)
    n_train = int(round(fractions[0] * n))
    n_dev = int(round(fractions[1] * n))
    n_dev = min(n_dev, n - n_train)
    parts = (perm[:n_train], perm[n_train : n_train + n_dev], perm[n_train + n_dev :])
    return tuple(corpus.subset(sorted(p.tolist())) for p in parts)  # type: ignore[return-value]
