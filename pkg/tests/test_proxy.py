import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qrisk.corpus import Query, RiskCategory, Scenario
from qrisk.llmio import mock_provider
from qrisk.perturb import Neighborhood, Paraphrase
from qrisk.proxy import (JudgeError, ProxyError, ProxyScore, ProxyWeights, bleu1,
                         bleu1_dissimilarity, fuzz_dissimilarity, judge_answer, label_query,
                         roc_auc, save_sweep_csv, score_paraphrase, simplex_grid,
                         simplex_sweep)
from qrisk.synthetic import simulated_judge

import oracles

JUDGE = mock_provider(simulated_judge)


def _query(gold):
    return Query("q", "Question?", Scenario.ABSTRACTIVE, "d", gold=tuple(gold))


def test_fuzz_identity_disjoint_and_golden():
    assert fuzz_dissimilarity("Paris", ["Paris"]) == 0.0
    assert fuzz_dissimilarity("xyz", ["abc"]) == 1.0
    # one deletion out of 11 characters: similarity 10/11
    assert fuzz_dissimilarity("color", ["colour"]) == pytest.approx(1 / 11, abs=1e-15)


@settings(max_examples=200)
@given(st.text(alphabet="abc XY", max_size=12), st.lists(st.text(alphabet="abc XY",
                                                                   max_size=12), min_size=1,
                                                           max_size=3))
def test_fuzz_matches_lcs_oracle(answer, gold):
    expected = 1.0 - max(oracles.indel_similarity(answer, g) for g in gold)
    assert fuzz_dissimilarity(answer, gold) == pytest.approx(expected, abs=1e-12)


def test_bleu_cases():
    assert bleu1_dissimilarity("Cormac McCarthy", ["Cormac McCarthy"]) == 0.0
    assert bleu1_dissimilarity("red fox", ["blue whale"]) == 1.0
    assert bleu1_dissimilarity("the cat sat", ["the cat sat down"]) == pytest.approx(
        1 - math.exp(1 - 4 / 3), abs=1e-12)
    assert bleu1("", "anything") == 0.0


@settings(max_examples=200)
@given(st.lists(st.sampled_from("a b c d the".split()), max_size=8).map(" ".join),
       st.lists(st.sampled_from("a b c d the".split()), min_size=1, max_size=8).map(" ".join))
def test_bleu_matches_oracle(cand, ref):
    assert bleu1(cand, ref) == pytest.approx(oracles.bleu1(cand, ref), abs=1e-12)
    assert 0.0 <= bleu1_dissimilarity(cand, [ref]) <= 1.0


def test_missing_gold_is_an_error():
    with pytest.raises(ProxyError):
        fuzz_dissimilarity("a", [])
    with pytest.raises(ProxyError):
        judge_answer(Query("q", "Why?", Scenario.ABSTRACTIVE, "d"), "a", JUDGE)


@pytest.mark.parametrize("answer, gold, correct", [
    ("Cormac McCarthy", ["Cormac McCarthy"], True),
    ("90°C", ["100°C"], False),
    ("13", ["11", "13", "17", "19", "..."], True),
])
def test_judge_examples(answer, gold, correct):
    assert judge_answer(_query(gold), answer, JUDGE)["correct"] is correct


def test_judge_repair_and_failure():
    replies = iter(["hmm", 'correct=true; rationale="Matches."'])
    assert judge_answer(_query(["x"]), "x", mock_provider(lambda p: next(replies))) == {
        "correct": True, "rationale": "Matches."}
    with pytest.raises(JudgeError):
        judge_answer(_query(["x"]), "x", mock_provider(lambda p: "unsure"))


def test_proxy_constants():
    assert ProxyWeights().as_tuple() == (0.6, 0.3, 0.1)
    with pytest.raises(ProxyError):
        ProxyWeights(0.5, 0.5, 0.5)


@pytest.mark.parametrize("s_llm, fuzz, bleu, h, flag", [
    (1, 1.0, 1.0, 1.0, True), (0, 0.0, 0.0, 0.0, False), (1, 0.0, 0.0, 0.6, True),
    (0, 1.0, 1.0, 0.4, False)])
def test_combine(s_llm, fuzz, bleu, h, flag):
    s = ProxyScore.combine(s_llm, fuzz, bleu)
    assert s.h_hat == pytest.approx(h) and s.hallucinated is flag


def test_score_paraphrase_all_wrong_and_all_right():
    q = _query(["abc"])
    wrong = score_paraphrase(q, "xyz", ProxyWeights(), JUDGE)
    assert wrong.h_hat == pytest.approx(1.0) and wrong.hallucinated
    right = score_paraphrase(q, "abc", ProxyWeights(), JUDGE)
    assert right.h_hat == 0.0 and not right.hallucinated


@pytest.mark.parametrize("wrong, category", [(0, RiskCategory.SAFE),
                                             (2, RiskCategory.BORDERLINE),
                                             (6, RiskCategory.RISKY)])
def test_label_query(wrong, category):
    q = _query(["Paris"])
    hood = Neighborhood("q", [Paraphrase("q", f"Question {i}?", 1.0, True) for i in range(6)])
    answers = ["Lyon"] * wrong + ["Paris"] * (6 - wrong)
    label, scores = label_query(q, hood, answers, ProxyWeights(), JUDGE)
    assert label.tally == wrong and label.category is category and len(scores) == 6


def test_label_query_rejects_empty_and_mismatch():
    q = _query(["Paris"])
    with pytest.raises(ProxyError):
        label_query(q, Neighborhood("q"), [], ProxyWeights(), JUDGE)
    hood = Neighborhood("q", [Paraphrase("q", "Q?", 1.0, True)])
    with pytest.raises(ProxyError):
        label_query(q, hood, ["a", "b"], ProxyWeights(), JUDGE)


@given(st.lists(st.tuples(st.integers(0, 5), st.booleans()), min_size=2, max_size=40))
def test_auc_matches_pairwise_oracle(rows):
    s, y = zip(*rows)
    if len(set(y)) < 2:
        with pytest.raises(ProxyError):
            roc_auc(s, y)
    else:
        assert roc_auc(s, y) == pytest.approx(oracles.auc(s, y), abs=1e-12)


@pytest.mark.parametrize("step, n", [(0.1, 66), (0.5, 6), (0.25, 15), (1.0, 3)])
def test_grid_size(step, n):
    grid = simplex_grid(step)
    assert len(grid) == n == math.comb(round(1 / step) + 2, 2)
    assert all(min(w) >= 0 and abs(sum(w) - 1) < 1e-12 for w in grid)


def test_grid_step_must_divide_one():
    with pytest.raises(ProxyError):
        simplex_grid(0.3)


def test_sweep_perfect_llm_component(tmp_path):
    rng = np.random.default_rng(0)
    y = rng.integers(0, 2, 100)
    comps = np.column_stack([y, rng.uniform(size=100), rng.uniform(size=100)])
    pts = simplex_sweep(comps, y, 0.1)
    assert pts[0].auc == 1.0
    (pure,) = [p for p in pts if (p.w_llm, p.w_fuzz, p.w_bleu) == (1.0, 0.0, 0.0)]
    assert pure.auc == 1.0
    assert [p.auc for p in pts] == sorted((p.auc for p in pts), reverse=True)
    save_sweep_csv(pts, tmp_path / "s.csv")
    assert len((tmp_path / "s.csv").read_text().splitlines()) == 67


def test_sweep_null_fixture():
    rng = np.random.default_rng(42)
    comps = rng.uniform(size=(200, 3))
    y = rng.integers(0, 2, 200)
    assert all(abs(p.auc - 0.5) <= 0.1 for p in simplex_sweep(comps, y, 0.1))


def test_sweep_one_class():
    with pytest.raises(ProxyError):
        simplex_sweep(np.ones((4, 3)), [1, 1, 1, 1])
