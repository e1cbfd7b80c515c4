import math

import numpy as np
import pytest

from qrisk.corpus import Query, Scenario
from qrisk.llmio import mock_provider
from qrisk.perturb import (Neighborhood, PerturbError, SimilarityConfig, build_neighborhood,
                           cosine, hybrid_similarity, load_neighborhoods, save_neighborhoods)

Q = Query("q", "Who wrote The Road?", Scenario.ABSTRACTIVE, "d", gold=("Cormac McCarthy",))


def _vectors(table):
    return mock_provider(embed_fn=lambda t: np.asarray(table[t], float))


def test_identity_similarity_is_one():
    bi, cross = mock_provider(), mock_provider()
    assert hybrid_similarity("same words", "same words", bi, cross) == pytest.approx(1.0)


def test_hand_arithmetic_similarity():
    bi = _vectors({"a": [1.0, 0.0], "b": [0.9, math.sqrt(1 - 0.81)]})
    cross = mock_provider(cross_fn=lambda x, y: 0.8)
    assert hybrid_similarity("a", "b", bi, cross) == pytest.approx(0.86, abs=1e-12)


def test_orthogonal_zero_similarity():
    bi = _vectors({"a": [1.0, 0.0], "b": [0.0, 1.0]})
    cross = mock_provider(cross_fn=lambda x, y: 0.0)
    assert hybrid_similarity("a", "b", bi, cross) == 0.0


def test_cross_score_is_symmetrized():
    bi = _vectors({"a": [1.0, 0.0], "b": [1.0, 0.0]})
    cross = mock_provider(cross_fn=lambda x, y: 1.0 if x == "a" else 0.0)
    cfg = SimilarityConfig(0.0, 1.0)
    assert hybrid_similarity("a", "b", bi, cross, cfg) == 0.5


def test_zero_vector_is_an_error():
    with pytest.raises(PerturbError):
        cosine(np.zeros(3), np.ones(3))


def test_config_validation():
    with pytest.raises(PerturbError):
        SimilarityConfig(0.5, 0.4)
    with pytest.raises(PerturbError):
        SimilarityConfig(threshold=1.5)


def test_verbatim_generator_fills_neighborhood():
    gen = mock_provider(lambda p: Q.text)
    hood = build_neighborhood(Q, gen, mock_provider(), mock_provider())
    assert hood.size == 6 and not hood.partial and hood.error is None
    assert all(p.similarity == pytest.approx(1.0) for p in hood.paraphrases)
    assert hood.generation_attempts == 6


def test_unrelated_generator_records_error(caplog):
    gen = mock_provider(lambda p: "bananas are yellow")
    bi = _vectors({Q.text: [1.0, 0.0], "bananas are yellow": [0.1, math.sqrt(0.99)]})
    cross = mock_provider(cross_fn=lambda a, b: 0.1)
    hood = build_neighborhood(Q, gen, bi, cross)
    assert hood.size == 0 and hood.error and hood.generation_attempts == 18
    assert "no paraphrase" in caplog.text


def test_mixed_candidates_keep_generation_order():
    # candidates are numbered 1..8; numbers 2 and 5 fall below the threshold
    good = {f"cand {i}" for i in (1, 3, 4, 6, 7, 8)}
    gen = mock_provider(lambda p, salt: f"cand {salt + 1}", sampled=True)
    bi = mock_provider(embed_fn=lambda t: np.array([1.0, 0.0]) if t == Q.text or t in good
                       else np.array([0.0, 1.0]))
    cross = mock_provider(cross_fn=lambda a, b: 1.0 if {a, b} <= good | {Q.text} else 0.0)
    hood = build_neighborhood(Q, gen, bi, cross, budget=8)
    assert [p.text for p in hood.paraphrases] == [f"cand {i}" for i in (1, 3, 4, 6, 7, 8)]
    assert hood.generation_attempts == 8


def test_partial_neighborhood():
    gen = mock_provider(lambda p, salt: Q.text if salt < 2 else "x y z", sampled=True)
    hood = build_neighborhood(Q, gen, mock_provider(), mock_provider(), budget=6)
    assert hood.size == 2 and hood.partial


def test_generator_never_sees_gold():
    seen = []
    gen = mock_provider(lambda p: seen.append(p) or Q.text)
    build_neighborhood(Q, gen, mock_provider(), mock_provider())
    assert seen and all("Cormac" not in p for p in seen)


def test_budget_below_target():
    with pytest.raises(PerturbError):
        build_neighborhood(Q, mock_provider(lambda p: Q.text), mock_provider(),
                           mock_provider(), budget=3)


def test_neighborhood_roundtrip(tmp_path):
    hood = build_neighborhood(Q, mock_provider(lambda p: Q.text), mock_provider(),
                              mock_provider())
    empty = Neighborhood("e", error="nothing accepted")
    save_neighborhoods([hood, empty], tmp_path / "n.jsonl")
    back = load_neighborhoods(tmp_path / "n.jsonl")
    assert back[0].to_json() == hood.to_json()
    assert back[1].error == "nothing accepted"
