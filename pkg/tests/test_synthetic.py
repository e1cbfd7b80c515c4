import numpy as np

from qrisk.features import RuleBased, extract_features
from qrisk.features.templates import ANSWER_TEMPLATE, render
from qrisk.perturb import paraphrase_prompt
from qrisk.proxy import judge_prompt
from qrisk.synthetic import (SimulatedAnswerer, confusion_logit, make_demo_corpus,
                             simulated_judge, simulated_paraphrase)


def test_corpus_is_seeded():
    a, fa = make_demo_corpus(seed=3, n_per_dataset=20)
    b, fb = make_demo_corpus(seed=3, n_per_dataset=20)
    assert list(a) == list(b) and fa == fb
    assert list(a) != list(make_demo_corpus(seed=4, n_per_dataset=20)[0])


def test_every_query_has_gold_and_scenario_payload():
    corpus, _ = make_demo_corpus(n_per_dataset=30)
    for q in corpus:
        assert q.has_gold
        if q.scenario.value == "MultipleChoice":
            assert q.gold[0] in q.choices
        if q.scenario.value == "Extractive":
            assert q.gold[0] in q.context


def test_factors_drive_confusion():
    base = confusion_logit("What is the capital of Zanor?", "demo_mc")
    assert confusion_logit("What is the capital of Zanor in general?", "demo_mc") > base
    assert confusion_logit("What is the capital of Zanor, because the maps disagree?",
                           "demo_mc") > base
    assert confusion_logit("Name the capital of Zanor.", "demo_mc") < base


def test_rule_features_track_generating_factors():
    corpus, factors = make_demo_corpus()
    det = RuleBased()
    agree = {"vague": [], "speculative": []}
    for q in corpus:
        v = extract_features(q, det)
        agree["vague"].append(v.binary["LackOfSpecificity"] == factors[q.id].vague)
        agree["speculative"].append(v.binary["Answerability"] != factors[q.id].speculative)
    assert all(np.mean(a) > 0.9 for a in agree.values())


def test_answerer_recovers_source_and_gold():
    corpus, _ = make_demo_corpus(n_per_dataset=20)
    answerer = SimulatedAnswerer(corpus)
    q = list(corpus)[5]
    assert answerer.source(q.text.lower()).id == q.id
    prompt = render(ANSWER_TEMPLATE, query=q.text, extra="")
    assert answerer(prompt) == answerer(prompt)


def test_judge_reads_the_grading_block():
    yes = simulated_judge(judge_prompt("Q?", "It is Paris.", ["Paris"]))
    no = simulated_judge(judge_prompt("Q?", "Lyon", ["Paris"]))
    assert yes.startswith("correct=true") and no.startswith("correct=false")


def test_paraphrases_vary_by_draw():
    prompt = paraphrase_prompt("What is the capital of Zanor?")
    draws = {simulated_paraphrase(prompt, k) for k in range(12)}
    assert len(draws) >= 5
    assert all("zanor" in d.lower() for d in draws)
