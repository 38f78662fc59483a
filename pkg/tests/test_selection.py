# tests/test_selection.py
"""
Percentile filtering, the random baseline, the end-to-end pipeline and rendering.

Usage:
  pytest tests/test_selection.py -q
"""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.datatypes import Baseline, CompressionConfig, CompressionResult, Level, LexicalUnit
from app.errors import InvalidArgumentError
from app.scoring import NgramBackend, ScorerBackend, UniformBackend
from app.segmentation import tokenize
from app.selection import (RATIO_GRID, compress, filter_units, percentile_threshold, random_compress,
                           removal_indices, render_retained, select_units, sweep_ratios)


def _units(values, texts=None, kind=Level.TOKEN):
    texts = texts or [f"w{i}" for i in range(len(values))]
    return [LexicalUnit(kind, (i, i + 1), t, float(v)) for i, (t, v) in enumerate(zip(texts, values))]


finite_values = st.lists(st.floats(min_value=0.0, max_value=1e6, allow_nan=False), min_size=1, max_size=40)
# normal floats only, so power-of-two scaling is exact
normal_values = st.lists(st.just(0.0) | st.floats(min_value=1e-6, max_value=1e6), min_size=1, max_size=40)


# ---------------------------
# Percentile filter
# ---------------------------
def test_linear_interpolation_percentile():
    assert percentile_threshold([1, 2, 3, 4], 50) == 2.5
    assert percentile_threshold([4, 1, 3, 2], 0) == 1.0
    assert percentile_threshold([4, 1, 3, 2], 100) == 4.0
    assert percentile_threshold([10.0, 20.0, 30.0, 40.0, 50.0], 25) == 20.0


def _reference_percentile(values, p):
    s = sorted(values)
    r = p / 100.0 * (len(s) - 1)
    lo, hi = math.floor(r), math.ceil(r)
    return s[lo] + (r - lo) * (s[hi] - s[lo])


@settings(max_examples=1000, deadline=None)
@given(values=st.lists(st.floats(min_value=0.0, max_value=1e6, allow_nan=False), min_size=1, max_size=50),
       p=st.floats(min_value=0, max_value=100))
def test_percentile_matches_sorted_rank_interpolation(values, p):
    expected = _reference_percentile(values, p)
    assert percentile_threshold(values, p) == pytest.approx(expected, rel=1e-12, abs=1e-12)


@settings(max_examples=1000, deadline=None)
@given(values=st.lists(st.integers(0, 200).map(lambda i: i / 4), min_size=1, max_size=50),
       p=st.integers(0, 400).map(lambda i: i / 4))
def test_filter_membership_matches_exhaustive_scan(values, p):
    expected = _reference_percentile(values, p)
    result = filter_units(_units(values), p)
    # values within rounding distance of the threshold may fall either way
    for v, kept in zip(values, result.retained_mask):
        if abs(v - expected) > 1e-9:
            assert kept == (v > expected)
    assert max(values) in [u.self_info for u in result.retained]


@pytest.mark.parametrize("values,p", [([], 50), ([1.0], -1), ([1.0], 100.5), ([1.0], float("nan")),
                                      ([1.0, float("nan")], 50), ([1.0, float("inf")], 50),
                                      ([float("-inf"), 2.0], 50)])
def test_percentile_rejects_bad_input(values, p):
    with pytest.raises(InvalidArgumentError):
        percentile_threshold(values, p)


def test_filter_keeps_units_at_or_above_threshold():
    result = filter_units(_units([1, 2, 3, 4]), 50)
    assert result.threshold == 2.5
    assert result.retained_mask == (False, False, True, True)
    assert result.achieved_unit_ratio == 0.5


def test_ties_are_all_kept():
    result = filter_units(_units([5, 5, 5, 5]), 50)
    assert all(result.retained_mask)
    assert result.achieved_unit_ratio == 0.0


def test_ratio_zero_keeps_everything_and_one_keeps_the_maximum():
    units = _units([3, 1, 4, 1, 5])
    assert all(filter_units(units, 0).retained_mask)
    assert [u.self_info for u in filter_units(units, 100).retained] == [5.0]


@settings(max_examples=100, deadline=None)
@given(values=finite_values, p1=st.floats(0, 100), p2=st.floats(0, 100))
def test_retained_set_shrinks_as_percentile_grows(values, p1, p2):
    lo, hi = sorted((p1, p2))
    units = _units(values)
    kept_lo = {i for i, k in enumerate(filter_units(units, lo).retained_mask) if k}
    kept_hi = {i for i, k in enumerate(filter_units(units, hi).retained_mask) if k}
    assert kept_hi <= kept_lo


@settings(max_examples=100, deadline=None)
@given(values=normal_values, p=st.integers(0, 1000).map(lambda i: i / 10), shift=st.integers(-4, 4))
def test_power_of_two_scaling_preserves_selection(values, p, shift):
    units = _units(values)
    scaled = _units([v * 2.0 ** shift for v in values])
    assert filter_units(units, p).retained_mask == filter_units(scaled, p).retained_mask


@settings(max_examples=100, deadline=None)
@given(values=st.lists(st.integers(-1000, 1000), min_size=1, max_size=50, unique=True),
       ratio=st.floats(0, 1))
def test_distinct_values_hit_requested_ratio_within_one_unit(values, ratio):
    result = filter_units(_units(values), 100.0 * ratio)
    n = len(values)
    assert abs(result.achieved_unit_ratio - ratio) <= 1.0 / n + 1e-9


@pytest.mark.parametrize("ratio", RATIO_GRID)
@pytest.mark.parametrize("n", [5, 20, 100])
def test_grid_ratios_within_one_unit(n, ratio):
    # 37 is coprime with 101, so the values are distinct
    values = [(i * 37) % 101 for i in range(n)]
    result = filter_units(_units(values), 100.0 * ratio)
    assert abs(result.achieved_unit_ratio - ratio) <= 1.0 / n + 1e-9


def test_token_ratio_counts_unit_lengths():
    units = [LexicalUnit(Level.PHRASE, (0, 3), "a b c", 1.0), LexicalUnit(Level.PHRASE, (3, 4), "d", 9.0)]
    result = filter_units(units, 50)
    assert result.achieved_unit_ratio == 0.5
    assert result.achieved_token_ratio == 0.75


# ---------------------------
# Random baseline
# ---------------------------
@pytest.mark.parametrize("n,ratio,k", [(10, 0.25, 3), (4, 0.125, 1), (4, 0.375, 2), (5, 0.0, 0), (5, 1.0, 5)])
def test_random_baseline_removes_round_half_up(n, ratio, k):
    result = random_compress(_units(range(n)), ratio, seed=7)
    assert len(result.removed) == k
    assert result.threshold is None
    assert result.baseline is Baseline.RANDOM


def test_random_baseline_depends_only_on_n_k_seed():
    a = random_compress(_units(range(12)), 0.5, seed=42)
    b = random_compress(_units([9.0] * 12, texts=[f"x{i}" for i in range(12)]), 0.5, seed=42)
    assert a.retained_mask == b.retained_mask
    c = random_compress(_units(range(12)), 0.5, seed=42)
    assert a.retained_mask == c.retained_mask


def test_random_baseline_seeds_differ():
    masks = {random_compress(_units(range(30)), 0.5, seed=s).retained_mask for s in range(5)}
    assert len(masks) > 1


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 60), data=st.data(), seed=st.integers(0, 2 ** 64 - 1))
def test_removal_indices_are_distinct_and_in_range(n, data, seed):
    k = data.draw(st.integers(0, n))
    idx = removal_indices(n, k, seed)
    assert len(idx) == k == len(set(idx))
    assert idx == sorted(idx)
    assert all(0 <= i < n for i in idx)


def test_random_baseline_rejects_bad_seed():
    with pytest.raises(InvalidArgumentError):
        random_compress(_units([1, 2]), 0.5, seed=2 ** 64)


def test_select_units_dispatches_on_baseline():
    units = _units([1, 2, 3, 4])
    assert select_units(units, CompressionConfig(ratio=0.5)).threshold == 2.5
    random = select_units(units, CompressionConfig(ratio=0.5, baseline="random", seed=3))
    assert random.threshold is None and len(random.removed) == 2


def test_config_validation():
    with pytest.raises(InvalidArgumentError):
        CompressionConfig(ratio=1.5)
    with pytest.raises(ValueError):
        CompressionConfig(level="paragraph")
    assert CompressionConfig(ratio=0.35).percentile == pytest.approx(35.0)


# ---------------------------
# Pipeline
# ---------------------------
def test_uniform_scorer_keeps_everything_at_token_level():
    result = compress("a b c d", UniformBackend(16), CompressionConfig(ratio=0.5, level="token"))
    assert all(result.retained_mask)
    assert result.threshold == pytest.approx(4.0)


def test_ratio_zero_reproduces_input_tokens(intro_text, trigram_model):
    for level in Level:
        result = compress(intro_text, NgramBackend(trigram_model), CompressionConfig(ratio=0.0, level=level))
        rendered = render_retained(result)
        assert [t.text for t in tokenize(rendered)] == [t.text for t in tokenize(intro_text)]


def test_intro_paragraph_phrase_level_half(intro_text, trigram_model):
    result = compress(intro_text, NgramBackend(trigram_model), CompressionConfig(ratio=0.5, level="phrase"))
    assert result.level is Level.PHRASE
    assert 0 < len(result.retained) < len(result.units)
    assert 0.0 < result.achieved_token_ratio < 1.0
    assert abs(result.achieved_unit_ratio - 0.5) <= 0.25
    assert result.document is not None and result.document.text == intro_text


def test_compress_is_deterministic(intro_text, trigram_model):
    config = CompressionConfig(ratio=0.35, level="sentence")
    a = compress(intro_text, NgramBackend(trigram_model), config)
    b = compress(intro_text, NgramBackend(trigram_model), config)
    assert a == b


def test_compress_rejects_blank_text():
    with pytest.raises(InvalidArgumentError):
        compress("   \n ", UniformBackend(4))


class _TableBackend(ScorerBackend):
    kind = "table"

    def __init__(self, table):
        self._table = table

    def context_logprobs(self, requests):
        return [[self._table[t.text] for t in req.tokens] for req in requests]


def test_single_token_sentences_keep_the_surprising_half():
    table = {"Alpha": -1.0, "Beta": -4.0, "Gamma": -2.0, "Delta": -3.0, ".": -0.1}
    result = compress("Alpha. Beta. Gamma. Delta.", _TableBackend(table),
                      CompressionConfig(ratio=0.5, level="sentence"))
    assert [u.text for u in result.units] == ["Alpha.", "Beta.", "Gamma.", "Delta."]
    assert [u.text for u in result.retained] == ["Beta.", "Delta."]
    assert render_retained(result) == "Beta. Delta."


sentence_words = st.lists(st.sampled_from(["model", "learns", "the", "old", "new", "tasks", "stream",
                                           "forgetting", "continual", "learning", "of", "a"]),
                          min_size=1, max_size=8)
documents = st.lists(sentence_words, min_size=1, max_size=5).map(
    lambda sents: " ".join(" ".join(ws).capitalize() + "." for ws in sents))


@settings(max_examples=50, deadline=None)
@given(text=documents)
def test_pipeline_is_monotone_and_order_preserving(trigram_model, text):
    backend = NgramBackend(trigram_model)
    for level in Level:
        previous_kept, previous_tokens = None, None
        for ratio in sorted(RATIO_GRID):
            result = compress(text, backend, CompressionConfig(ratio=ratio, level=level))
            kept = {i for i, k in enumerate(result.retained_mask) if k}
            assert result.retained == [result.units[i] for i in sorted(kept)]
            starts = [u.token_range[0] for u in result.retained]
            assert starts == sorted(set(starts))
            if previous_kept is not None:
                assert kept <= previous_kept
                assert result.retained_tokens <= previous_tokens
            previous_kept, previous_tokens = kept, result.retained_tokens


def test_sweep_ratios_grid(intro_text, trigram_model):
    rows = sweep_ratios(intro_text, NgramBackend(trigram_model), levels=[Level.TOKEN, Level.PHRASE],
                        ratios=[0.2, 0.5])
    assert [(r["level"], r["requested_ratio"]) for r in rows] == [
        ("token", 0.2), ("token", 0.5), ("phrase", 0.2), ("phrase", 0.5)]
    assert rows[0]["tokens"] == rows[2]["tokens"]
    assert rows[0]["retained_tokens"] >= rows[1]["retained_tokens"]


# ---------------------------
# Rendering
# ---------------------------
def _result(texts, mask):
    units = _units([1.0] * len(texts), texts=texts, kind=Level.PHRASE)
    return CompressionResult(units=tuple(units), retained_mask=tuple(mask), threshold=1.0,
                             requested_ratio=0.5, level=Level.PHRASE)


def test_render_joins_with_single_spaces():
    result = _result(["INTRODUCTION Continual Learning", "(", "CL", "),", "is a promising"],
                     [True, True, False, False, True])
    assert render_retained(result) == "INTRODUCTION Continual Learning ( is a promising"


def test_render_glues_closing_punctuation():
    result = _result(["models", ",", "that", ")", "."], [True] * 5)
    assert render_retained(result) == "models, that)."


def test_render_empty_selection():
    assert render_retained(_result(["a", "b"], [False, False])) == ""


def test_render_checks_original_text(trigram_model):
    result = compress("The model learns.", NgramBackend(trigram_model), CompressionConfig(ratio=0.0))
    assert render_retained(result, "The model learns.") == "The model learns."
    with pytest.raises(InvalidArgumentError):
        render_retained(result, "Something else.")

