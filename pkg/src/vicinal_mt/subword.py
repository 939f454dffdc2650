"""Joint byte-pair encoding with an end-of-word suffix marker.

A word ``lower`` starts as ``l o w e r</w>``; merges are learned greedily by
pair frequency (ties go to the lexicographically smallest pair) and applied
in learning order.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Sentence
from .vocab import BOS, EOS, PAD, SPECIAL_TOKENS, UNK

EOW = "</w>"
_HEADER = "#vicinal-mt-bpe v1"


def _word_symbols(word: str) -> tuple[str, ...]:
    return tuple(word[:-1]) + (word[-1] + EOW,)


@dataclass
class BpeModel:
    merges: list[tuple[str, str]]
    symbols: list[str]  # id -> symbol, specials first
    vocab: dict[str, int] = field(init=False)
    _ranks: dict[tuple[str, str], int] = field(init=False, repr=False)
    _cache: dict[str, tuple[int, ...]] = field(init=False, repr=False)

    def __post_init__(self):
        if tuple(self.symbols[: len(SPECIAL_TOKENS)]) != SPECIAL_TOKENS:
            raise ValueError("the first symbols must be the reserved specials")
        self.vocab = {s: i for i, s in enumerate(self.symbols)}
        self._ranks = {m: i for i, m in enumerate(self.merges)}
        self._cache = {}

    def __len__(self) -> int:
        return len(self.symbols)

    @property
    def specials(self) -> dict[str, int]:
        return {tok: i for i, tok in enumerate(SPECIAL_TOKENS)}

    def segment(self, word: str) -> tuple[str, ...]:
        symbols = list(_word_symbols(word))
        while len(symbols) > 1:
            best = None
            for i in range(len(symbols) - 1):
                r = self._ranks.get((symbols[i], symbols[i + 1]))
                if r is not None and (best is None or r < best[0]):
                    best = (r, i)
            if best is None:
                break
            pair = (symbols[best[1]], symbols[best[1] + 1])
            merged = []
            i = 0
            while i < len(symbols):
                if i < len(symbols) - 1 and (symbols[i], symbols[i + 1]) == pair:
                    merged.append(symbols[i] + symbols[i + 1])
                    i += 2
                else:
                    merged.append(symbols[i])
                    i += 1
            symbols = merged
        return tuple(symbols)

    def encode_word(self, word: str) -> tuple[int, ...]:
        ids = self._cache.get(word)
        if ids is None:
            ids = tuple(self.vocab.get(s, UNK) for s in self.segment(word))
            self._cache[word] = ids
        return ids

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    def dumps(self) -> str:
        lines = [f"{_HEADER} merges={len(self.merges)} vocab={len(self.symbols)}"]
        lines += [f"{a} {b}" for a, b in self.merges]
        lines += self.symbols
        return "\n".join(lines) + "\n"

    @classmethod
    def load(cls, path: str | Path) -> "BpeModel":
        lines = Path(path).read_text(encoding="utf-8").split("\n")
        head = lines[0].split()
        if " ".join(head[:2]) != _HEADER:
            raise ValueError(f"{path}: not a BPE model file")
        counts = dict(kv.split("=") for kv in head[2:])
        n_merges, n_vocab = int(counts["merges"]), int(counts["vocab"])
        merges = [tuple(line.split(" ")) for line in lines[1 : 1 + n_merges]]
        symbols = lines[1 + n_merges : 1 + n_merges + n_vocab]
        return cls([(a, b) for a, b in merges], symbols)


def learn_bpe(texts: Iterable[Sentence], vocab_size: int) -> BpeModel:
    """Learn merges until ``vocab_size`` symbols exist or no pair occurs twice."""
    word_freq = Counter(tok for s in texts for tok in s.tokens)
    chars = sorted({c for w in word_freq for c in w})
    if vocab_size <= len(chars) + len(SPECIAL_TOKENS):
        raise ValueError(
            f"vocab_size {vocab_size} too small for {len(chars)} characters + {len(SPECIAL_TOKENS)} specials"
        )
    words = sorted(word_freq)
    segs = [list(_word_symbols(w)) for w in words]
    freqs = [word_freq[w] for w in words]

    base = sorted({sym for seg in segs for sym in seg})
    symbols = list(SPECIAL_TOKENS) + base
    known = set(symbols)

    pair_counts: Counter = Counter()
    where: dict[tuple[str, str], set[int]] = defaultdict(set)
    for wi, seg in enumerate(segs):
        for a, b in zip(seg, seg[1:]):
            pair_counts[(a, b)] += freqs[wi]
            where[(a, b)].add(wi)

    merges: list[tuple[str, str]] = []
    while len(symbols) < vocab_size and pair_counts:
        top = max(pair_counts.values())
        if top < 2:
            break
        pair = min(p for p, c in pair_counts.items() if c == top)
        merges.append(pair)
        new_sym = pair[0] + pair[1]
        if new_sym not in known:
            known.add(new_sym)
            symbols.append(new_sym)
        for wi in sorted(where.pop(pair, ())):
            seg = segs[wi]
            f = freqs[wi]
            for a, b in zip(seg, seg[1:]):
                pair_counts[(a, b)] -= f
                if pair_counts[(a, b)] <= 0:
                    del pair_counts[(a, b)]
                where[(a, b)].discard(wi)
            merged = []
            i = 0
            while i < len(seg):
                if i < len(seg) - 1 and seg[i] == pair[0] and seg[i + 1] == pair[1]:
                    merged.append(new_sym)
                    i += 2
                else:
                    merged.append(seg[i])
                    i += 1
            segs[wi] = merged
            for a, b in zip(merged, merged[1:]):
                pair_counts[(a, b)] += f
                where[(a, b)].add(wi)
        pair_counts.pop(pair, None)
    return BpeModel(merges, symbols)


def apply_bpe(model: BpeModel, sentence: Sentence | Sequence[str]) -> list[int]:
    tokens = sentence.tokens if isinstance(sentence, Sentence) else sentence
    out: list[int] = []
    for tok in tokens:
        out.extend(model.encode_word(tok))
    return out


def detokenize(model: BpeModel, ids: Sequence[int]) -> Sentence:
    words: list[str] = []
    current = ""
    n = len(model.symbols)
    for i in ids:
        i = int(i)
        if not 0 <= i < n:
            raise ValueError(f"subword id {i} out of range [0, {n})")
        if i in (PAD, BOS, EOS):
            continue
        sym = model.symbols[i]
        if sym.endswith(EOW):
            words.append(current + sym[: -len(EOW)])
            current = ""
        else:
            current += sym
    if current:
        words.append(current)
    return Sentence.from_tokens(words)
