import itertools
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vicinal_mt.corpus import Sentence
from vicinal_mt.seq2seq import ArchConfig, MaskedLmModel, TrainingRecipe, preset
from vicinal_mt.synthlang import SynthSpec, generate_mono
from vicinal_mt.vicinal import (
    AugmentStats,
    DiversityPolicy,
    MaskPlan,
    VicinalLm,
    augment_corpus,
    generate_vicinal,
    mask_budget,
    masked_accuracy,
    orderings_total,
    read_augmented,
    sample_mask_plan,
    train_vicinal_lm,
    write_augmented,
)
from vicinal_mt.vocab import WordVocab

TINY = ArchConfig(layers=1, emb_dim=32, ffn_dim=64, heads=2, dropout=0.0, label_smoothing=0.0, max_positions=128)
DYNAMIC = DiversityPolicy()


def hamming(a, b):
    assert len(a) == len(b)
    return sum(x != y for x, y in zip(a, b))


# ---------------------------------------------------------------- budgets


@pytest.mark.parametrize("length,t", [(3, 1), (5, 2), (10, 5), (20, 10), (21, 5), (40, 10), (100, 20)])
def test_dynamic_budget_table(length, t):
    assert mask_budget(length, DYNAMIC) == t


def test_fixed_budget():
    assert mask_budget(10, DYNAMIC.replace(mode="fixed", rho=0.3)) == 3
    assert mask_budget(2, DYNAMIC.replace(mode="fixed", rho=0.1)) == 1


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 300), st.sampled_from(["fixed", "dynamic"]), st.floats(0.01, 0.99),
       st.integers(1, 10), st.integers(0, 30))
def test_budget_bounds(length, mode, rho, t_min, extra):
    policy = DiversityPolicy(mode=mode, rho=rho, t_min=t_min, t_max=t_min + extra)
    t = mask_budget(length, policy)
    assert 1 <= t <= length
    if mode == "dynamic":
        assert t <= policy.t_max


def test_budget_rejects_empty():
    with pytest.raises(ValueError):
        mask_budget(0, DYNAMIC)


@pytest.mark.parametrize("kw", [{"rho": 0.0}, {"rho": 1.0}, {"t_min": 0}, {"t_min": 5, "t_max": 4},
                                {"n_prime": 0}, {"min_len": 0}, {"k": 2}, {"mode": "static"}, {"a": 0.0}])
def test_policy_validation(kw):
    with pytest.raises(ValueError):
        DiversityPolicy(**kw)


def test_policy_strict_json(tmp_path):
    path = tmp_path / "p.json"
    path.write_text('{"mode": "fixed", "rho": 0.5}', encoding="utf-8")
    assert DiversityPolicy.load(path) == DiversityPolicy(mode="fixed", rho=0.5)
    with pytest.raises(ValueError):
        DiversityPolicy.from_dict({"rho": 0.5, "beta": 1})


# ---------------------------------------------------------------- orderings


def test_ordering_sampler_matches_enumeration():
    oracle = list(itertools.permutations(range(4), 2))
    assert len(oracle) == 12 == orderings_total(4, 2)
    rng = np.random.default_rng(0)
    draws = Counter(sample_mask_plan(4, 2, rng).positions for _ in range(12_000))
    assert set(draws) == set(oracle)
    for ordering in oracle:
        assert abs(draws[ordering] / 12_000 - 1 / 12) < 0.02
    expected = 12_000 / 12
    chi2 = sum((draws[o] - expected) ** 2 / expected for o in oracle)
    assert chi2 < 31.3  # 99.9th percentile of chi-square with 11 dof


@pytest.mark.parametrize("n,t", [(1, 1), (3, 2), (5, 3), (6, 6)])
def test_orderings_total_matches_enumeration(n, t):
    assert orderings_total(n, t) == sum(1 for _ in itertools.permutations(range(n), t))


def test_full_budget_is_permutation():
    plan = sample_mask_plan(3, 3, np.random.default_rng(1))
    assert sorted(plan.positions) == [0, 1, 2] and plan.orderings_total == 6


def test_plan_errors():
    with pytest.raises(ValueError):
        sample_mask_plan(2, 3, np.random.default_rng(0))
    with pytest.raises(ValueError):
        MaskPlan(4, 2, (1, 1), 12)


def test_plan_respects_maskable_pool():
    rng = np.random.default_rng(0)
    for _ in range(200):
        plan = sample_mask_plan(8, 3, rng, maskable=[0, 2, 5, 7])
        assert set(plan.positions) <= {0, 2, 5, 7}
        assert plan.orderings_total == orderings_total(4, 3)


def test_plan_deterministic():
    a = [sample_mask_plan(10, 4, np.random.default_rng(5)).positions for _ in range(3)]
    assert len(set(a)) == 1


# ---------------------------------------------------------------- generation


@pytest.fixture(scope="module")
def synth_lm():
    spec = SynthSpec()
    mono = generate_mono(spec, "relevant", 3000, seed=11)
    lm, _ = train_vicinal_lm(mono, preset("desk"), TrainingRecipe(max_epochs=2, batch_tokens=2048, warmup=50))
    return spec, lm


def degenerate_lm():
    vocab = WordVocab(["a", "b"])
    model = MaskedLmModel(TINY, len(vocab), seed=0).freeze()
    return VicinalLm(model, vocab)


def test_lm_must_be_frozen():
    with pytest.raises(ValueError):
        VicinalLm(MaskedLmModel(TINY, 7), WordVocab(["a", "b"]))


def test_forced_replacement_at_planned_positions():
    lm = degenerate_lm()
    sentence = Sentence.from_text("a a a a a a")
    policy = DYNAMIC.replace(n_prime=1)
    for seed in range(20):
        out = generate_vicinal(sentence, policy, lm, np.random.default_rng(seed))
        plan = sample_mask_plan(6, mask_budget(6, policy), np.random.default_rng(seed))
        assert len(out) == 1
        changed = {i for i, w in enumerate(out[0].tokens) if w != "a"}
        assert changed == set(plan.positions)
        assert all(out[0].tokens[i] == "b" for i in changed)


def test_short_and_long_sentences_skipped():
    lm = degenerate_lm()
    stats = AugmentStats()
    assert generate_vicinal(Sentence.from_text("a b"), DYNAMIC, lm, np.random.default_rng(0), stats) == []
    long = Sentence.from_tokens(["a"] * 101)
    assert generate_vicinal(long, DYNAMIC, lm, np.random.default_rng(0), stats) == []
    assert stats.ineligible == 2 and stats.samples == 0


def test_unknown_words_never_masked():
    lm = degenerate_lm()
    sentence = Sentence.from_text("a zz a qq a")
    policy = DYNAMIC.replace(mode="fixed", rho=0.9, n_prime=1)
    for seed in range(20):
        (out,) = generate_vicinal(sentence, policy, lm, np.random.default_rng(seed))
        assert out.tokens[1] == "zz" and out.tokens[3] == "qq"
        assert hamming(out.tokens, sentence.tokens) == 3  # budget 4 clamped to 3 maskable words


def test_all_unknown_sentence_yields_nothing():
    lm = degenerate_lm()
    stats = AugmentStats()
    assert generate_vicinal(Sentence.from_text("x y z"), DYNAMIC, lm, np.random.default_rng(0), stats) == []
    assert stats.no_maskable == 1


def test_invariants_over_thousand_samples(synth_lm):
    spec, lm = synth_lm
    source = generate_mono(spec, "relevant", 700, seed=12).sentences
    policy = DYNAMIC.replace(n_prime=2)
    violations = Counter()
    total = 0
    for i, s in enumerate(source):
        out = generate_vicinal(s, policy, lm, np.random.default_rng([3, i]))
        t = mask_budget(len(s), policy)
        if not policy.eligible(len(s)):
            violations["eligibility"] += bool(out)
        if len(out) > policy.n_prime:
            violations["count"] += 1
        if len({x.tokens for x in out}) != len(out):
            violations["dedup"] += 1
        for x in out:
            total += 1
            violations["length"] += len(x) != len(s)
            violations["original"] += x.tokens == s.tokens
            violations["hamming"] += len(x) == len(s) and hamming(x.tokens, s.tokens) != t
    assert total >= 1000
    assert sum(violations.values()) == 0, violations


def test_augment_independent_of_thread_count(synth_lm):
    spec, lm = synth_lm
    sentences = generate_mono(spec, "relevant", 600, seed=13).sentences
    runs = [augment_corpus(sentences, DYNAMIC, lm, global_seed=9, threads=n) for n in (1, 3)]
    assert runs[0] == runs[1]
    assert runs[0].content_hash() == runs[1].content_hash()


def test_augment_seeded_per_sentence(synth_lm):
    spec, lm = synth_lm
    sentences = generate_mono(spec, "relevant", 40, seed=14).sentences
    full = augment_corpus(sentences, DYNAMIC, lm, global_seed=4)
    tail = augment_corpus(sentences[20:], DYNAMIC, lm, global_seed=4)
    # a sentence's samples depend on its index, so the tail alone draws different plans
    by_origin = {}
    for s, o in zip(full.sentences, full.origin_index):
        by_origin.setdefault(o, []).append(s)
    for i, s in enumerate(sentences):
        assert by_origin.get(i, []) == generate_vicinal(s, DYNAMIC, lm, np.random.default_rng([4, i]))
    assert tail.size > 0


def test_augment_counts_and_origins(synth_lm):
    spec, lm = synth_lm
    sentences = list(generate_mono(spec, "relevant", 300, seed=15).sentences)
    sentences += [Sentence.from_text("ta sho")]
    stats = AugmentStats()
    out = augment_corpus(sentences, DYNAMIC, lm, global_seed=0, stats=stats)
    per_origin = Counter(out.origin_index)
    assert max(per_origin.values()) <= 2
    assert len(sentences) - 1 not in per_origin
    assert stats.sentences == len(sentences) and stats.ineligible == 1
    assert stats.samples == out.size
    for s, o in zip(out.sentences, out.origin_index):
        assert len(s) == len(sentences[o]) and s != sentences[o]


def test_all_short_corpus_gives_empty_augmentation():
    lm = degenerate_lm()
    out = augment_corpus([Sentence.from_text("a b")] * 10, DYNAMIC, lm, global_seed=0)
    assert out.size == 0 and out.origin_index == ()


def test_augmented_round_trip(tmp_path, synth_lm):
    spec, lm = synth_lm
    out = augment_corpus(generate_mono(spec, "relevant", 50, seed=16).sentences, DYNAMIC, lm, global_seed=1)
    write_augmented(out, tmp_path / "vic.ty", tmp_path / "vic.idx")
    back = read_augmented(tmp_path / "vic.ty", tmp_path / "vic.idx")
    assert back.sentences == out.sentences and back.origin_index == out.origin_index


def test_lm_save_load(tmp_path, synth_lm):
    spec, lm = synth_lm
    lm.save(tmp_path / "lm")
    again = VicinalLm.load(tmp_path / "lm")
    sentences = generate_mono(spec, "relevant", 30, seed=17).sentences
    assert augment_corpus(sentences, DYNAMIC, again, 2) == augment_corpus(sentences, DYNAMIC, lm, 2)


def test_masked_lm_beats_majority_baseline_fivefold():
    spec = SynthSpec()
    mono = generate_mono(spec, "relevant", 20_000, seed=0)
    held_out = generate_mono(spec, "relevant", 1000, seed=1).sentences
    lm, _ = train_vicinal_lm(mono, preset("desk"), TrainingRecipe(max_epochs=8, batch_tokens=2048))
    acc, majority = masked_accuracy(lm, held_out, np.random.default_rng(0))
    assert acc > 5 * majority
