from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vicinal_mt.corpus import (
    AlignmentError,
    BitextCorpus,
    MonoCorpus,
    Sentence,
    SyntheticBitext,
    deduplicate,
    load_mono,
    load_parallel,
    split,
    upsample,
    write_parallel,
)


def corpus(*pairs):
    return BitextCorpus.from_text_pairs(pairs)


words = st.text(alphabet="abcdé", min_size=1, max_size=4)
lines = st.lists(words, min_size=1, max_size=5).map(" ".join)
pair_lists = st.lists(st.tuples(lines, lines), min_size=1, max_size=30)


def test_load_three_aligned_lines(tmp_path):
    (tmp_path / "a.sx").write_text("x y\nz\nw w\n", encoding="utf-8")
    (tmp_path / "a.ty").write_text("1\n2 3\n4\n", encoding="utf-8")
    c = load_parallel(tmp_path / "a.sx", tmp_path / "a.ty")
    assert c.size == 3 and c.langs == ("sx", "ty")
    assert c.pairs[1][1].tokens == ("2", "3")


def test_load_mismatched_counts(tmp_path):
    (tmp_path / "a.s").write_text("1\n2\n3\n", encoding="utf-8")
    (tmp_path / "a.t").write_text("1\n2\n3\n4\n", encoding="utf-8")
    with pytest.raises(AlignmentError):
        load_parallel(tmp_path / "a.s", tmp_path / "a.t")


def test_load_drops_blank_and_counts_malformed(tmp_path):
    (tmp_path / "a.s").write_text("a\n\n\nb\n", encoding="utf-8")
    (tmp_path / "a.t").write_text("x\n\ny\nz\n", encoding="utf-8")
    c = load_parallel(tmp_path / "a.s", tmp_path / "a.t")
    assert [(s.raw, t.raw) for s, t in c.pairs] == [("a", "x"), ("b", "z")]
    assert c.dropped_malformed == 1


def test_load_normalises_to_nfc(tmp_path):
    (tmp_path / "a.s").write_text("café\n", encoding="utf-8")
    (tmp_path / "a.t").write_text("x\n", encoding="utf-8")
    assert load_parallel(tmp_path / "a.s", tmp_path / "a.t").pairs[0][0].raw == "café"


def test_duplicate_pair_removed_by_dedup(tmp_path):
    (tmp_path / "a.s").write_text("a\na\n", encoding="utf-8")
    (tmp_path / "a.t").write_text("b\nb\n", encoding="utf-8")
    c = load_parallel(tmp_path / "a.s", tmp_path / "a.t")
    assert c.size == 2 and deduplicate(c).size == 1


def test_dedup_examples():
    kept = deduplicate(corpus(("a", "b"), ("a", "b"), ("c", "d")))
    assert [(s.raw, t.raw) for s, t in kept.pairs] == [("a", "b"), ("c", "d")]
    same = corpus(("a", "b"), ("a", "e"))
    assert deduplicate(same) == same


@settings(max_examples=100, deadline=None)
@given(pair_lists)
def test_dedup_idempotent_and_keeps_first(pairs):
    c = corpus(*pairs)
    once = deduplicate(c)
    assert deduplicate(once) == once
    assert [(s.raw, t.raw) for s, t in once.pairs] == list(dict.fromkeys((s.raw, t.raw) for s, t in c.pairs))


@settings(max_examples=100, deadline=None)
@given(pair_lists)
def test_write_then_load_round_trips_bytes(tmp_path_factory, pairs):
    d = tmp_path_factory.mktemp("rt")
    c = corpus(*pairs)
    write_parallel(c, d / "x.s", d / "x.t")
    again = load_parallel(d / "x.s", d / "x.t")
    write_parallel(again, d / "y.s", d / "y.t")
    assert (d / "x.s").read_bytes() == (d / "y.s").read_bytes()
    assert (d / "x.t").read_bytes() == (d / "y.t").read_bytes()
    assert again.pairs == c.pairs


def test_upsample_examples():
    base = corpus(*[(f"s{i}", f"t{i}") for i in range(100)])
    up = upsample(base, 230, rng_seed=0)
    counts = Counter(up.pairs)
    assert up.size == 230
    assert sorted(Counter(counts.values()).items()) == [(2, 70), (3, 30)]
    five = corpus(*[(f"s{i}", f"t{i}") for i in range(5)])
    assert upsample(five, 5, rng_seed=1) == five
    with pytest.raises(ValueError):
        upsample(corpus(("a", "b"), ("c", "d"), ("e", "f")), 2, rng_seed=0)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 20), st.integers(1, 5), st.integers(0, 10**6))
def test_upsample_integer_multiple(n, k, seed):
    base = corpus(*[(f"s{i}", f"t{i}") for i in range(n)])
    up = upsample(base, k * n, seed)
    assert all(c == k for c in Counter(up.pairs).values()) and len(Counter(up.pairs)) == n


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 20), st.integers(0, 40), st.integers(0, 10**6))
def test_upsample_deterministic(n, extra, seed):
    base = corpus(*[(f"s{i}", f"t{i}") for i in range(n)])
    assert upsample(base, n + extra, seed) == upsample(base, n + extra, seed)


def test_split_examples():
    c = corpus(*[(f"s{i}", f"t{i}") for i in range(10)])
    assert tuple(p.size for p in split(c, (0.8, 0.1, 0.1), 0)) == (8, 1, 1)
    with pytest.raises(ValueError):
        split(c, (1.0, 0.0, 0.0), 0)
    with pytest.raises(ValueError):
        split(c, (0.5, 0.2, 0.2), 0)
    assert split(c, (0.8, 0.1, 0.1), 3) == split(c, (0.8, 0.1, 0.1), 3)


@settings(max_examples=100, deadline=None)
@given(st.integers(3, 60), st.integers(1, 8), st.integers(1, 8), st.integers(1, 8), st.integers(0, 10**6))
def test_split_partitions(n, a, b, c, seed):
    total = a + b + c
    fr = (a / total, b / total, 1.0 - a / total - b / total)
    data = corpus(*[(f"s{i}", f"t{i}") for i in range(n)])
    parts = split(data, fr, seed)
    sets = [set(p.pairs) for p in parts]
    assert sum(len(s) for s in sets) == n
    assert set().union(*sets) == set(data.pairs)
    for part, f in zip(parts, fr):
        assert abs(part.size - f * n) <= 1 + 1e-9


def test_sentence_rules():
    s = Sentence.from_text("  a\tb  c ")
    assert s.tokens == ("a", "b", "c")
    with pytest.raises(ValueError):
        Sentence(("a",), "a\nb")


def test_mono_drops_blank_and_duplicate_lines(tmp_path):
    (tmp_path / "m.ty").write_text("a b\n\na b\nc\n", encoding="utf-8")
    m = load_mono(tmp_path / "m.ty")
    assert [s.raw for s in m.sentences] == ["a b", "c"] and m.lang == "ty"
    assert MonoCorpus.from_lines(["x", "x"]).size == 1


def test_synthetic_bitext_origin_rules():
    pairs = ((Sentence.from_text("a"), Sentence.from_text("b")),)
    SyntheticBitext(pairs, "pure-bt", (0,))
    SyntheticBitext(pairs, "bt-mono")
    with pytest.raises(ValueError):
        SyntheticBitext(pairs, "bt-mono", (0,))
    with pytest.raises(ValueError):
        SyntheticBitext(pairs, "guided-bt")
    with pytest.raises(ValueError):
        SyntheticBitext(pairs, "pure-bt", (0, 1))
