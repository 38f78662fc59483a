# tests/test_metrics.py
"""
BLEU / ROUGE oracles, savings and the paired evaluation table.

Usage:
  pytest tests/test_metrics.py -q
"""

import functools
import itertools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.datatypes import CompressionResult, Level, LexicalUnit
from app.errors import InvalidArgumentError
from app.metrics import (bleu, evaluate_pairs, lcs_length, metric_tokens, overlap_report, rouge_l, rouge_n,
                         savings)

words = st.lists(st.sampled_from(["the", "cat", "sat", "on", "a", "mat", "dog", "ran"]), min_size=1, max_size=15)


def test_metric_tokens_lowercase_and_split_punctuation():
    assert metric_tokens("The Cat, sat.") == ["the", "cat", ",", "sat", "."]


# ---------------------------
# BLEU
# ---------------------------
def test_clipped_unigram_precision():
    assert bleu(["the"] * 4, [["the", "cat"]], max_n=1) == pytest.approx(0.25)


def test_brevity_penalty_for_short_candidate():
    assert bleu(["the", "cat"], [["the", "cat", "sat"]], max_n=2) == pytest.approx(math.exp(-0.5))


def test_multi_reference_clipping_uses_max_count():
    assert bleu(["the", "the"], [["the", "a"], ["the", "the", "b"]], max_n=1) == pytest.approx(1.0)


def test_closest_reference_length_ties_go_to_the_shorter():
    assert bleu(["a", "b", "c"], [["a", "b"], ["a", "b", "c", "d"]], max_n=1) == pytest.approx(1.0)
    assert bleu(["a", "b", "c"], [["a", "b", "c", "d"]], max_n=1) == pytest.approx(math.exp(1 - 4 / 3))


def test_four_gram_precisions():
    cand = "the cat sat on the mat today".split()
    ref = "the cat sat on the mat".split()
    expected = (6 / 7 * 5 / 6 * 4 / 5 * 3 / 4) ** 0.25
    assert bleu(cand, [ref]) == pytest.approx(expected)


def test_smoothing_only_affects_higher_orders():
    assert bleu(["a", "b"], [["b", "a"]], max_n=2) == 0.0
    assert bleu(["a", "b"], [["b", "a"]], max_n=2, smooth=True) == pytest.approx(math.sqrt(0.5))
    assert bleu(["x"], [["y"]], max_n=2, smooth=True) == 0.0


@settings(max_examples=100, deadline=None)
@given(candidate=words)
def test_candidate_equal_to_reference_scores_one(candidate):
    assert bleu(candidate, [candidate]) == pytest.approx(1.0)
    assert rouge_l(candidate, candidate).f1 == pytest.approx(1.0)


@settings(max_examples=100, deadline=None)
@given(candidate=words, reference=words)
def test_scores_are_bounded(candidate, reference):
    report = overlap_report(candidate, [reference])
    for value in (report.bleu, report.rouge1.f1, report.rouge2.precision, report.rougeL.recall):
        assert 0.0 <= value <= 1.0 + 1e-12


@settings(max_examples=100, deadline=None)
@given(candidate=words, reference=words)
def test_relabeling_tokens_does_not_change_scores(candidate, reference):
    relabel = {w: w.upper() + "_" for w in set(candidate) | set(reference)}
    a = overlap_report(candidate, [reference])
    b = overlap_report([relabel[w] for w in candidate], [[relabel[w] for w in reference]])
    assert a == b


def test_disjoint_vocabularies_score_zero():
    report = overlap_report(["a", "b"], [["c", "d"]])
    assert report.bleu == 0.0
    assert report.rouge1.f1 == 0.0 and report.rougeL.f1 == 0.0


def test_empty_inputs_rejected():
    with pytest.raises(InvalidArgumentError):
        bleu([], [["a"]])
    with pytest.raises(InvalidArgumentError):
        bleu(["a"], [])
    with pytest.raises(InvalidArgumentError):
        rouge_n(["a"], [])


def test_nltk_sentence_bleu_agrees():
    nltk_bleu = pytest.importorskip("nltk.translate.bleu_score")
    cand = "the quick brown fox jumps over the lazy dog".split()
    refs = ["the quick brown fox jumped over the lazy dog".split(), "a fast brown fox leaps over a dog".split()]
    assert bleu(cand, refs) == pytest.approx(nltk_bleu.sentence_bleu(refs, cand), rel=1e-9)


# ---------------------------
# ROUGE
# ---------------------------
def test_rouge1_precision_recall_f1():
    prf = rouge_n(["the", "cat"], ["the", "cat", "sat"], n=1)
    assert prf.precision == pytest.approx(1.0)
    assert prf.recall == pytest.approx(2 / 3)
    assert prf.f1 == pytest.approx(0.8)


def test_rouge2_counts_bigrams():
    prf = rouge_n(["the", "cat", "sat"], ["the", "cat", "ran"], n=2)
    assert (prf.precision, prf.recall) == (0.5, 0.5)


def test_rouge_l_uses_longest_common_subsequence():
    assert lcs_length("a b c d".split(), "a c d e".split()) == 3
    prf = rouge_l("a b c d".split(), "a c d e".split())
    assert prf.precision == pytest.approx(0.75) and prf.recall == pytest.approx(0.75)


@functools.lru_cache(maxsize=None)
def _subsequences(seq):
    return frozenset(tuple(seq[i] for i in idx)
                     for r in range(len(seq) + 1) for idx in itertools.combinations(range(len(seq)), r))


def _brute_lcs(a, b):
    return max(len(s) for s in _subsequences(a) & _subsequences(b))


def _sequences(max_len):
    return [seq for n in range(1, max_len + 1) for seq in itertools.product("abc", repeat=n)]


def test_lcs_matches_exhaustive_search_for_short_sequences():
    seqs = _sequences(4)
    for a in seqs:
        for b in seqs:
            assert lcs_length(a, b) == _brute_lcs(a, b)


@pytest.mark.parametrize("reference", ["abcabca", "aaabbbc", "cbacbac", "ccccccc"])
def test_rouge_l_matches_exhaustive_search_up_to_seven_tokens(reference):
    ref = tuple(reference)
    for cand in _sequences(7):
        lcs = _brute_lcs(cand, ref)
        prf = rouge_l(list(cand), list(ref))
        assert prf.precision == lcs / len(cand)
        assert prf.recall == lcs / len(ref)


@settings(max_examples=200, deadline=None)
@given(candidate=words, reference=words)
def test_rouge_l_swaps_precision_and_recall(candidate, reference):
    forward, backward = rouge_l(candidate, reference), rouge_l(reference, candidate)
    assert forward.recall == backward.precision
    assert forward.precision == backward.recall
    assert lcs_length(candidate, reference) == lcs_length(reference, candidate)


@settings(max_examples=100, deadline=None)
@given(candidate=words, reference=words)
def test_f1_is_harmonic_mean(candidate, reference):
    for prf in (rouge_n(candidate, reference, 1), rouge_n(candidate, reference, 2), rouge_l(candidate, reference)):
        if prf.precision + prf.recall == 0:
            assert prf.f1 == 0.0
        else:
            assert prf.f1 == pytest.approx(2 * prf.precision * prf.recall / (prf.precision + prf.recall))


def test_rouge_is_max_pooled_over_references():
    report = overlap_report(["the", "cat"], [["a", "dog"], ["the", "cat"]])
    assert report.rouge1.f1 == 1.0


# ---------------------------
# Savings
# ---------------------------
def _result(lengths, mask):
    units, pos = [], 0
    for i, n in enumerate(lengths):
        units.append(LexicalUnit(Level.PHRASE, (pos, pos + n), f"u{i}", float(i)))
        pos += n
    return CompressionResult(units=tuple(units), retained_mask=tuple(mask), threshold=0.0,
                             requested_ratio=0.5, level=Level.PHRASE)


def test_savings_counts_tokens_and_units():
    report = savings(_result([400, 572, 28], [False, True, False]))
    assert report.original_tokens == 1000
    assert report.retained_tokens == 572
    assert report.token_savings == pytest.approx(0.428)
    assert report.unit_savings == pytest.approx(2 / 3)


def test_retain_all_saves_nothing():
    report = savings(_result([3, 4], [True, True]))
    assert report.token_savings == 0.0 and report.unit_savings == 0.0


# ---------------------------
# Paired evaluation
# ---------------------------
def test_identical_pairs_score_one():
    df, aggregate = evaluate_pairs(["The cat sat.", "A dog ran home."], [["The cat sat."], ["A dog ran home."]])
    assert list(df["pair"]) == [1, 2]
    for key, value in aggregate.items():
        if key.endswith(("f1", "precision", "recall")) or key == "bleu":
            assert value == pytest.approx(1.0), key


def test_aggregate_is_arithmetic_mean():
    df, aggregate = evaluate_pairs(["the cat", "a dog"], [["the cat sat"], ["a dog"]], max_n=1)
    assert aggregate["rouge1_recall"] == pytest.approx((2 / 3 + 1.0) / 2)
    assert aggregate["bleu"] == pytest.approx(df["bleu"].mean())


def test_pair_error_names_the_pair():
    with pytest.raises(InvalidArgumentError, match="pair 2"):
        evaluate_pairs(["ok", ""], [["ok"], ["ref"]])
