import json

import pytest
from hypothesis import given, strategies as st

from qrisk.corpus import (Corpus, CorpusError, Query, RiskCategory, RiskLabel, Scenario,
                          categorize, load_corpus, load_labels, save_corpus, save_labels)

from conftest import write_lines


def _q(i, scenario="Abstractive", **extra):
    return {"id": f"q{i}", "text": f"question {i}?", "scenario": scenario, "dataset": "d",
            **extra}


def test_load_preserves_order(tmp_path):
    path = write_lines(tmp_path / "c.jsonl", [_q(3), _q(1), _q(2)])
    corpus = load_corpus(path)
    assert [q.id for q in corpus] == ["q3", "q1", "q2"]


def test_scenarios_are_a_set(tmp_path):
    path = write_lines(tmp_path / "c.jsonl",
                       [_q(1, "Extractive", context="c"), _q(2, "Extractive", context="c"),
                        _q(3)])
    assert load_corpus(path).scenarios == {Scenario.EXTRACTIVE, Scenario.ABSTRACTIVE}


def test_duplicate_id_names_both_lines(tmp_path):
    path = write_lines(tmp_path / "c.jsonl", [_q(1), _q(2), _q(1)])
    with pytest.raises(CorpusError, match=r"'q1'.*lines 1 and 3"):
        load_corpus(path)


@pytest.mark.parametrize("bad, msg", [
    ({"id": "x", "text": "t", "dataset": "d"}, "missing"),
    ({**_q(1), "scenario": "Essay"}, "scenario"),
    ({**_q(1), "text": ""}, "text"),
    ({**_q(1), "colour": 1}, "unknown field"),
    ({**_q(1), "choices": ["a", "b"]}, "choices"),
    ({**_q(1), "n_tokens": -1}, "n_tokens"),
])
def test_invalid_lines_report_line_number(tmp_path, bad, msg):
    path = write_lines(tmp_path / "c.jsonl", [_q(0), bad])
    with pytest.raises(CorpusError, match=msg) as err:
        load_corpus(path)
    assert ":2:" in str(err.value)


def test_malformed_json(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text('{"id": \n', encoding="utf-8")
    with pytest.raises(CorpusError, match="malformed JSON"):
        load_corpus(path)


def test_corpus_roundtrip(tmp_path):
    qs = [Query("a", "Pick one.", Scenario.MULTIPLE_CHOICE, "mc", choices=("x", "y"),
                gold=("x",)),
          Query("b", "Where?", Scenario.EXTRACTIVE, "ex", context="Here.", gold=("here",)),
          Query("c", "Why?", Scenario.ABSTRACTIVE, "ab")]
    save_corpus(qs, tmp_path / "c.jsonl")
    assert list(load_corpus(tmp_path / "c.jsonl")) == qs


def test_gold_less_queries_are_skipped(caplog):
    corpus = Corpus((Query("a", "Why?", Scenario.ABSTRACTIVE, "d"),
                     Query("b", "Who?", Scenario.ABSTRACTIVE, "d", gold=("me",))))
    assert [q.id for q in corpus.labelable()] == ["b"]
    assert "without gold" in caplog.text


@pytest.mark.parametrize("tally, expected", [
    (0, RiskCategory.SAFE), (1, RiskCategory.BORDERLINE), (2, RiskCategory.BORDERLINE),
    (3, RiskCategory.BORDERLINE), (4, RiskCategory.RISKY), (5, RiskCategory.RISKY),
    (6, RiskCategory.RISKY)])
def test_six_paraphrase_mapping(tally, expected):
    assert categorize(tally, 6) is expected


@given(st.integers(1, 40).flatmap(lambda m: st.tuples(st.integers(0, m), st.just(m))))
def test_categorize_matches_fraction_rule(case):
    tally, m = case
    cat = categorize(tally, m)
    if tally == 0:
        assert cat is RiskCategory.SAFE
    elif tally / m >= 2 / 3:
        assert cat is RiskCategory.RISKY
    else:
        assert cat is RiskCategory.BORDERLINE


@given(st.integers(1, 30))
def test_categorize_is_monotone_in_tally(m):
    cats = [categorize(t, m) for t in range(m + 1)]
    assert cats == sorted(cats)


def test_tally_out_of_range():
    with pytest.raises(ValueError):
        categorize(7, 6)
    with pytest.raises(ValueError):
        RiskLabel("q", -1)


def test_save_labels_empty(tmp_path):
    save_labels([], tmp_path / "l.jsonl")
    assert (tmp_path / "l.jsonl").read_text() == ""


@pytest.mark.parametrize("tally, label", [(0, "Safe"), (4, "Risky")])
def test_save_labels_category(tmp_path, tally, label):
    save_labels([RiskLabel("q", tally, 6)], tmp_path / "l.jsonl")
    lines = (tmp_path / "l.jsonl").read_text().splitlines()
    assert len(lines) == 1 and json.loads(lines[0])["category"] == label


def test_labels_roundtrip_and_partial(tmp_path):
    labs = [RiskLabel("a", 2, 6), RiskLabel("b", 3, 4, partial=True)]
    save_labels(labs, tmp_path / "l.jsonl")
    assert load_labels(tmp_path / "l.jsonl") == labs


def test_inconsistent_category_rejected(tmp_path):
    write_lines(tmp_path / "l.jsonl", [{"query_id": "a", "tally": 0, "m": 6,
                                        "category": "Risky"}])
    with pytest.raises(CorpusError, match="inconsistent"):
        load_labels(tmp_path / "l.jsonl")


def test_save_labels_unwritable(tmp_path):
    with pytest.raises(CorpusError):
        save_labels([RiskLabel("a", 0)], tmp_path / "missing" / "l.jsonl")
