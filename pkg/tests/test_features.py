from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qrisk.corpus import Query, Scenario
from qrisk.features import (ALL_FEATURES, BINARY_FEATURES, NUMERIC_FEATURES, DetectorError,
                            FeatureVector, LlmJudge, NumericScaler, RuleBased,
                            detector_accuracy, extract_features, load_features,
                            load_goldens, parse_structured, render_feature_prompt,
                            save_features, scale_numeric)
from qrisk.features.syntax import count_clauses, count_tokens, parse_depths, set_tokenizer
from qrisk.features.templates import FEATURE_TEMPLATES, JUDGE
from qrisk.llmio import Transcript, mock_provider

TRANSCRIPT = Path(__file__).parent / "fixtures" / "detector_transcript"


def _vec(qid="q", **numeric):
    raw = {f: numeric.get(f, 1) for f in NUMERIC_FEATURES}
    return FeatureVector(qid, {f: 0 for f in BINARY_FEATURES}, raw, {})


def test_feature_inventory():
    assert len(BINARY_FEATURES) == 17 and len(NUMERIC_FEATURES) == 4
    assert ALL_FEATURES[:17] == BINARY_FEATURES
    assert set(FEATURE_TEMPLATES) == set(BINARY_FEATURES)


@pytest.mark.parametrize("text, feature, expected", [
    ("Why didn't the test run?", "NegationUsage", 1),
    ("Tell me about Tesla.", "LackOfSpecificity", 1),
    ("Who founded Apple?", "AnaphoraUsage", 0),
    ("What is the fastest marine mammal?", "SuperlativeUsage", 1),
])
def test_rule_based_examples(text, feature, expected):
    vec = extract_features(Query("q", text, Scenario.ABSTRACTIVE, "d"), RuleBased())
    assert vec.binary[feature] == expected
    assert vec.rationales[feature]


@pytest.mark.parametrize("text, n", [("", 0), ("How does reinforcement learning work?", 5),
                                     ("a b  c", 3)])
def test_count_tokens(text, n):
    assert count_tokens(text) == n


def test_pluggable_tokenizer():
    try:
        set_tokenizer(lambda s: list(s.replace(" ", "")))
        assert count_tokens("ab c") == 3
    finally:
        set_tokenizer(None)
    assert count_tokens("ab c") == 2


@pytest.mark.parametrize("text, n", [("Who wrote Hamlet?", 1),
                                     ("Although sales fell, margins improved.", 2), ("", 0)])
def test_count_clauses(text, n):
    assert count_clauses(text) == n


def test_parse_depth_edges_and_golden():
    assert parse_depths("") == (0, 0)
    assert parse_depths("Hello") == (1, 1)
    # frozen output of the bundled heuristic provider
    assert parse_depths("Describe the structure of a sentence that contains multiple "
                        "levels of embedding.") == (5, 7)


@given(st.text(max_size=200))
def test_parse_depths_bounds(text):
    d, h = parse_depths(text)
    assert d >= 0 and h >= 0
    if d:
        assert 1 <= d <= h


def test_corpus_columns_override_numeric():
    q = Query("q", "Who wrote Hamlet?", Scenario.ABSTRACTIVE, "d", n_tokens=9, dep_depth=4)
    vec = extract_features(q, RuleBased())
    assert vec.numeric_raw["QueryTokenLength"] == 9
    assert vec.numeric_raw["DependencyDepth"] == 4
    assert vec.numeric_raw["NumberOfClauses"] == 1


def test_scaling_cases():
    assert all(v.numeric_scaled[f] == 0 for v in scale_numeric([_vec("a"), _vec("b")])
               for f in NUMERIC_FEATURES)
    out = scale_numeric([_vec("a", QueryTokenLength=1), _vec("b", QueryTokenLength=3)])
    assert [v.numeric_scaled["QueryTokenLength"] for v in out] == [-1.0, 1.0]
    assert scale_numeric([_vec("a", QueryTokenLength=7)])[0].numeric_scaled[
        "QueryTokenLength"] == 0


@given(st.lists(st.integers(0, 60), min_size=2, max_size=40))
def test_scaled_column_is_standardized(values):
    out = scale_numeric([_vec(str(i), QueryTokenLength=v) for i, v in enumerate(values)])
    z = np.array([v.numeric_scaled["QueryTokenLength"] for v in out])
    if len(set(values)) == 1:
        assert np.all(z == 0)
    else:
        assert abs(z.mean()) < 1e-9 and abs(z.std() - 1) < 1e-9


def test_scaler_roundtrip_and_row():
    s = NumericScaler.fit([_vec("a", NumberOfClauses=1), _vec("b", NumberOfClauses=3)])
    again = NumericScaler.from_json(s.to_json())
    row = again.transform(_vec("c", NumberOfClauses=3)).row()
    assert row.shape == (21,) and row[18] == 1.0
    with pytest.raises(ValueError, match="not scaled"):
        _vec().row()


def test_features_roundtrip(tmp_path):
    vecs = [extract_features(Query("a", "Tell me about Tesla.", Scenario.ABSTRACTIVE, "d"),
                             RuleBased())]
    save_features(vecs, tmp_path / "f.jsonl")
    assert load_features(tmp_path / "f.jsonl") == vecs


def test_vector_validation():
    with pytest.raises(ValueError):
        FeatureVector("q", {"NegationUsage": 1}, {f: 0 for f in NUMERIC_FEATURES}, {})


@pytest.mark.parametrize("raw, expected", [
    ('label=true; rationale="Negated auxiliary."', (True, "Negated auxiliary.")),
    ("LABEL = False; rationale=none", (False, "none")),
    ("label=true label=false", None),
    ("I think so", None),
])
def test_parse_structured(raw, expected):
    assert parse_structured(raw) == expected


def test_llm_judge_repairs_once_then_fails():
    replies = iter(["maybe?", 'label=false; rationale="Plain."'])
    judge = LlmJudge(mock_provider(lambda p: next(replies)))
    assert judge.detect("NegationUsage", "Who wrote Hamlet?", "Abstractive") == (False, "Plain.")
    stubborn = LlmJudge(mock_provider(lambda p: "no idea"))
    with pytest.raises(DetectorError) as err:
        stubborn.detect("NegationUsage", "Who wrote Hamlet?", "Abstractive")
    assert err.value.feature == "NegationUsage"


def test_prompt_rendering_fills_placeholders():
    p = render_feature_prompt("QueryScenarioMismatch", "Pick one.", "MultipleChoice")
    assert "{{" not in p and "Pick one." in p and "Multiple-Choice" in p
    assert "{{query}}" in JUDGE


def test_goldens_cover_every_feature():
    cases = load_goldens()
    assert len(cases) >= 34
    assert {c["feature"] for c in cases} == set(BINARY_FEATURES)
    assert {c["label"] for c in cases} == {True, False}


def test_goldens_replay_through_llm_judge():
    judge = LlmJudge(mock_provider(transcript=Transcript(TRANSCRIPT, "replay-strict")))
    report = detector_accuracy(judge, load_goldens())
    assert report.misses == []
    assert report.accuracy == 1.0


def test_rule_based_golden_accuracy_is_reported():
    # the heuristic backend is not tuned to the goldens; it must stay well above chance
    report = detector_accuracy(RuleBased(), load_goldens())
    assert report.accuracy >= 0.85
