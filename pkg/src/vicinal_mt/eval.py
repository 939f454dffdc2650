"""Corpus BLEU (4-gram, brevity penalty, no smoothing) and comparison tables.

``tokenized`` mode scores the tokens it is given.  ``detokenized`` mode
re-tokenises raw text with the international tokenisation rules::

    1. a punctuation char is split from a following non-digit
    2. a punctuation char is split from a preceding non-digit
    3. every symbol char (Unicode category S*) becomes its own token

so ``3.5`` and ``1,000`` stay whole while ``end.`` becomes ``end .``.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Literal, Mapping, Sequence

import regex

from .corpus import Sentence

Mode = Literal["tokenized", "detokenized"]
MAX_ORDER = 4

_INTL_RULES = (
    (regex.compile(r"(\P{N})(\p{P})"), r"\1 \2 "),
    (regex.compile(r"(\p{P})(\P{N})"), r" \1 \2"),
    (regex.compile(r"(\p{S})"), r" \1 "),
)


def intl_tokenize(text: str) -> list[str]:
    for pattern, repl in _INTL_RULES:
        text = pattern.sub(repl, text)
    return text.split()


@dataclass(frozen=True)
class BleuReport:
    score: float
    precisions: tuple[float, ...]
    brevity_penalty: float
    hyp_len: int
    ref_len: int
    mode: str
    matches: tuple[int, ...] = ()
    totals: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["precisions"] = list(self.precisions)
        d["matches"] = list(self.matches)
        d["totals"] = list(self.totals)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BleuReport":
        return cls(d["score"], tuple(d["precisions"]), d["brevity_penalty"], d["hyp_len"], d["ref_len"],
                   d["mode"], tuple(d.get("matches", ())), tuple(d.get("totals", ())))


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _tokens(s: Sentence | Sequence[str] | str, mode: Mode) -> list[str]:
    if mode == "detokenized":
        raw = s if isinstance(s, str) else (s.raw if isinstance(s, Sentence) else " ".join(s))
        return intl_tokenize(raw)
    if isinstance(s, Sentence):
        return list(s.tokens)
    if isinstance(s, str):
        return s.split()
    return list(s)


def bleu(hyps: Sequence, refs: Sequence, mode: Mode = "tokenized") -> BleuReport:
    """Single-reference corpus BLEU; any zero n-gram precision gives a score of 0."""
    if mode not in ("tokenized", "detokenized"):
        raise ValueError(f"unknown BLEU mode {mode!r}")
    if len(hyps) != len(refs):
        raise ValueError(f"{len(hyps)} hypotheses but {len(refs)} references")
    if not hyps:
        raise ValueError("BLEU needs at least one sentence")
    matches = [0] * MAX_ORDER
    totals = [0] * MAX_ORDER
    hyp_len = ref_len = 0
    for h, r in zip(hyps, refs):
        ht, rt = _tokens(h, mode), _tokens(r, mode)
        hyp_len += len(ht)
        ref_len += len(rt)
        for n in range(1, MAX_ORDER + 1):
            hc, rc = _ngrams(ht, n), _ngrams(rt, n)
            matches[n - 1] += sum(min(c, rc[g]) for g, c in hc.items())
            totals[n - 1] += max(len(ht) - n + 1, 0)
    precisions = tuple(m / t if t else 0.0 for m, t in zip(matches, totals))
    if hyp_len == 0:
        bp = 0.0
    elif hyp_len > ref_len:
        bp = 1.0
    else:
        bp = math.exp(1.0 - ref_len / hyp_len)
    if min(precisions) == 0.0:
        score = 0.0
    else:
        score = 100.0 * bp * math.exp(sum(math.log(p) for p in precisions) / MAX_ORDER)
    return BleuReport(score, precisions, bp, hyp_len, ref_len, mode, tuple(matches), tuple(totals))


def compare(reports: Mapping[str, BleuReport], baseline: str) -> dict:
    """Rows in the given order with the BLEU delta against ``baseline``."""
    if not reports:
        raise ValueError("compare() needs at least one report")
    if baseline not in reports:
        raise ValueError(f"baseline {baseline!r} not among reports {list(reports)}")
    base = reports[baseline].score
    rows = [{"name": name, "bleu": round(rep.score, 4), "delta": round(rep.score - base, 4), "mode": rep.mode}
            for name, rep in reports.items()]
    return {"baseline": baseline, "rows": rows}


def format_table(table: dict) -> str:
    rows = table["rows"]
    width = max(len("system"), *(len(r["name"]) for r in rows))
    lines = [f"{'system':<{width}}  {'BLEU':>8}  {'delta':>8}", "-" * (width + 20)]
    for r in rows:
        lines.append(f"{r['name']:<{width}}  {r['bleu']:>8.2f}  {r['delta']:>+8.2f}")
    return "\n".join(lines)


def dumps(table: dict) -> str:
    return json.dumps(table, indent=2, sort_keys=True)
