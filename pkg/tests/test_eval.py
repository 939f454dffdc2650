import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vicinal_mt.corpus import Sentence
from vicinal_mt.eval import BleuReport, bleu, compare, format_table, intl_tokenize

REFS = ["the cat sat on the mat", "a dog runs", "it is raining today"]
HYPS = ["the cat sat on mat", "a dog runs fast", "it rains today"]

# hand count: matches/totals per order
#   1-grams 5/5 + 3/4 + 2/3 = 10/12
#   2-grams 3/4 + 2/3 + 0/2 = 5/9
#   3-grams 2/3 + 1/2 + 0/1 = 3/6
#   4-grams 1/2 + 0/1 + 0/0 = 1/3
#   lengths hyp 12, ref 13 -> BP = exp(1 - 13/12)
FIXTURE_PRECISIONS = (10 / 12, 5 / 9, 3 / 6, 1 / 3)
FIXTURE_BP = math.exp(-1 / 12)
FIXTURE_SCORE = 100 * FIXTURE_BP * math.sqrt(5 / 18)


def test_identity_scores_100():
    r = bleu(REFS, REFS)
    assert r.score == pytest.approx(100.0, abs=1e-12) and r.brevity_penalty == 1.0


def test_hand_computed_fixture():
    r = bleu(HYPS, REFS)
    assert r.matches == (10, 5, 3, 1) and r.totals == (12, 9, 6, 3)
    assert r.precisions == pytest.approx(FIXTURE_PRECISIONS, abs=1e-12)
    assert abs(r.brevity_penalty - FIXTURE_BP) < 1e-12
    assert abs(r.score - FIXTURE_SCORE) < 1e-6


def test_half_length_brevity_penalty():
    r = bleu(["b a"], ["a x b y"])
    assert r.precisions[0] == 1.0 and r.precisions[1] == 0.0
    assert r.brevity_penalty == math.exp(-1.0)
    assert r.score == 0.0


def test_argument_errors():
    with pytest.raises(ValueError):
        bleu(["a"], ["a", "b"])
    with pytest.raises(ValueError):
        bleu([], [])
    with pytest.raises(ValueError):
        bleu(["a"], ["a"], mode="sacre")


def test_accepts_sentences_and_token_lists():
    as_sent = bleu([Sentence.from_text(h) for h in HYPS], [Sentence.from_text(r) for r in REFS])
    as_list = bleu([h.split() for h in HYPS], [r.split() for r in REFS])
    assert as_sent.score == as_list.score == bleu(HYPS, REFS).score


def test_modes_agree_without_punctuation():
    assert bleu(HYPS, REFS, "detokenized").score == bleu(HYPS, REFS, "tokenized").score


def test_intl_tokenizer_rules():
    assert intl_tokenize("the end.") == ["the", "end", "."]
    assert intl_tokenize("pay 3.5 or 1,000 now!") == ["pay", "3.5", "or", "1,000", "now", "!"]
    assert intl_tokenize("a+b=c") == ["a", "+", "b", "=", "c"]
    assert intl_tokenize("(quoted)") == ["(", "quoted", ")"]


def test_detokenized_mode_splits_punctuation():
    hyp, ref = ["we saw it at the end."], ["we saw it at the end ."]
    tok = bleu(hyp, ref, "tokenized")
    detok = bleu(hyp, ref, "detokenized")
    assert detok.score == pytest.approx(100.0) and tok.score < 100.0


def test_report_round_trip():
    r = bleu(HYPS, REFS)
    assert BleuReport.from_dict(r.to_dict()) == r


def test_compare_table():
    a = BleuReport(10.0, (0.5,) * 4, 1.0, 5, 5, "tokenized")
    b = BleuReport(12.0, (0.5,) * 4, 1.0, 5, 5, "tokenized")
    table = compare({"A": a, "B": b}, baseline="A")
    assert [r["delta"] for r in table["rows"]] == [0.0, 2.0]
    assert compare({"A": a}, "A")["rows"][0]["delta"] == 0.0
    with pytest.raises(ValueError):
        compare({"A": a}, "B")
    assert "+2.00" in format_table(table)


word = st.sampled_from(list("abcdef"))
sent = st.lists(word, min_size=1, max_size=9).map(" ".join)
pairs = st.lists(st.tuples(sent, sent), min_size=1, max_size=12)


@settings(max_examples=200, deadline=None)
@given(pairs)
def test_components_consistent(ps):
    r = bleu([h for h, _ in ps], [x for _, x in ps])
    assert all(0.0 <= p <= 1.0 for p in r.precisions)
    assert 0.0 <= r.score <= 100.0 + 1e-9
    if min(r.precisions) > 0:
        expected = 100 * r.brevity_penalty * math.exp(sum(math.log(p) for p in r.precisions) / 4)
        assert abs(r.score - expected) < 1e-9


@settings(max_examples=200, deadline=None)
@given(pairs, st.randoms(use_true_random=False))
def test_permutation_invariant(ps, rnd):
    shuffled = list(ps)
    rnd.shuffle(shuffled)
    a = bleu([h for h, _ in ps], [x for _, x in ps])
    b = bleu([h for h, _ in shuffled], [x for _, x in shuffled])
    assert a.matches == b.matches and a.totals == b.totals and a.score == b.score


@settings(max_examples=300, deadline=None)
@given(pairs, st.integers(0, 11))
def test_replacing_hypothesis_with_reference_never_lowers_precision(ps, i):
    i %= len(ps)
    hyps, refs = [h for h, _ in ps], [x for _, x in ps]
    before = bleu(hyps, refs)
    hyps[i] = refs[i]
    after = bleu(hyps, refs)
    for b, a in zip(before.precisions, after.precisions):
        assert a >= b - 1e-12


@settings(max_examples=300, deadline=None)
@given(pairs, st.integers(0, 11))
def test_replacing_short_hypothesis_with_reference_never_hurts(ps, i):
    i %= len(ps)
    hyps, refs = [h for h, _ in ps], [x for _, x in ps]
    if len(hyps[i].split()) > len(refs[i].split()):
        hyps[i] = " ".join(hyps[i].split()[: len(refs[i].split())])
    before = bleu(hyps, refs).score
    hyps[i] = refs[i]
    assert bleu(hyps, refs).score >= before - 1e-9


def test_replacing_long_hypothesis_can_lower_brevity_penalty():
    # shrinking the corpus hypothesis length below the reference length costs more than the precision gain
    hyps = ["a", "a", "a a", "a a a a"]
    refs = ["a", "a a", "a", "a a a a"]
    before = bleu(hyps, refs)
    after = bleu(hyps[:2] + [refs[2]] + hyps[3:], refs)
    assert all(a >= b for a, b in zip(after.precisions, before.precisions))
    assert after.brevity_penalty < before.brevity_penalty
    assert after.score < before.score
