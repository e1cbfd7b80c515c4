"""Synthetic demo corpus and deterministic stand-ins for the model endpoints.

The demo corpus describes a fictional world, so gold answers are known by
construction.  Each query is assembled from independent factors:

* ``directive``: a leading operation verb ("Name ...") instead of a question
* ``vague``: a scope-widening tail ("... in general")
* ``complex``: one or two subordinate or relative clauses
* ``speculative``: a question about the future

plus nuisance factors (named vs generic subject, constraints, superlatives,
longer subject descriptions).  Clause count and token length vary within
each factor level, so they are not stand-ins for the factors themselves.
The simulated answerer reads its own cues from whatever wording it is given
and errs more often on vague, complex and speculative wording and less often
on directive wording.  Nothing here consults the feature detectors.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .corpus import Corpus, Query, Scenario
from .llmio import hashed_embedding, jaccard_overlap, mock_provider, mock_tokens

DATASETS = {"demo_trivia": Scenario.ABSTRACTIVE, "demo_science": Scenario.EXTRACTIVE,
            "demo_mc": Scenario.MULTIPLE_CHOICE}
DATASET_OFFSET = {"demo_trivia": 0.3, "demo_science": -0.5, "demo_mc": 0.0}

# (plain question, directive, future question, future directive); {s} is the subject
RELATIONS = {
    "capital": ("What is the capital of {s}{m}?", "Name the capital of {s}{m}.",
                "What will the capital of {s} be next year{m}?",
                "Name the capital {s} will have next year{m}."),
    "founder": ("Who founded the guild of {s}{m}?", "Identify the founder of the guild of {s}{m}.",
                "Who will lead the guild of {s} next year{m}?",
                "Identify who will lead the guild of {s} next year{m}."),
    "river": ("Which river crosses {s}{m}?", "Name the river crossing {s}{m}.",
              "Which river will flood {s} next year{m}?",
              "Name the river {s} will see flooding next year{m}."),
    "year": ("In what year was the bridge of {s} completed{m}?",
             "State the year the bridge of {s} was completed{m}.",
             "In what year will the bridge of {s} be rebuilt next{m}?",
             "State the year the bridge of {s} will be rebuilt next{m}."),
    "mineral": ("What mineral is mined near {s}{m}?", "Identify the mineral mined near {s}{m}.",
                "What mineral will be mined near {s} next year{m}?",
                "Identify the mineral miners will extract near {s} next year{m}."),
    "author": ("Who wrote the chronicle of {s}{m}?", "Name the author of the chronicle of {s}{m}.",
               "Who will write the next chronicle of {s}{m}?",
               "Name the author who will write the next chronicle of {s}{m}."),
}

VAGUE_TAILS = (" in general", " or something", " and stuff")
CLAUSES = (", although the records are incomplete", ", which the old survey described",
           " if the archive is correct", ", because the maps disagree")
GENERIC_SUBJECTS = ("the northern province", "the eastern valley", "the coastal region",
                    "the high plateau", "the river delta", "the southern marches")
PADDED_SUBJECTS = ("the small market town of {}", "the walled hill town on the edge of {}",
                   "the quiet fishing village near {}")
CONSTRAINT_TAILS = (" as of 1850", " only", " during the old kingdom")

_SYL = ("ar", "bel", "cor", "dun", "el", "fen", "gal", "hol", "is", "jor", "kel", "lun", "mar",
        "nor", "or", "pel", "quil", "ros", "sal", "tor", "ul", "ven", "wyr", "zan")


def _name(rng, syllables=(2, 3)) -> str:
    k = rng.integers(syllables[0], syllables[1] + 1)
    return "".join(rng.choice(_SYL, size=k)).capitalize()


def _gold(rng, relation: str) -> str:
    if relation == "year":
        return str(int(rng.integers(1700, 1900)))
    if relation == "mineral":
        return _name(rng, (2, 2)).lower() + "ite"
    if relation in ("founder", "author"):
        return f"{_name(rng)} {_name(rng)}"
    if relation == "river":
        return f"the {_name(rng)}"
    return _name(rng)


@dataclass(frozen=True)
class DemoFactors:
    directive: bool
    vague: bool
    complex: bool
    speculative: bool
    named: bool


def make_demo_corpus(seed: int = 7, n_per_dataset: int = 100) -> tuple[Corpus, dict]:
    """Build the demo corpus; returns it with the generating factors per query id."""
    rng = np.random.default_rng(seed)
    queries, factors = [], {}
    for dataset, scenario in DATASETS.items():
        for i in range(n_per_dataset):
            f = DemoFactors(*(bool(rng.uniform() < p) for p in (0.5, 0.35, 0.35, 0.25, 0.6)))
            relation = rng.choice(sorted(RELATIONS))
            plain, directive, fut, fut_directive = RELATIONS[relation]
            form = (fut_directive if f.directive else fut) if f.speculative else \
                (directive if f.directive else plain)
            subject = _name(rng) if f.named else str(rng.choice(GENERIC_SUBJECTS))
            if rng.uniform() < 0.2:
                subject = f"the oldest district of {subject}"
            elif rng.uniform() < 0.3:
                subject = str(rng.choice(PADDED_SUBJECTS)).format(subject)
            mod = ""
            if f.complex:
                k = 2 if rng.uniform() < 0.4 else 1
                mod += "".join(CLAUSES[j] for j in sorted(rng.choice(len(CLAUSES), k, False)))
            if rng.uniform() < 0.2:
                mod += str(rng.choice(CONSTRAINT_TAILS))
            if f.vague:
                mod += str(rng.choice(VAGUE_TAILS))
            text = form.format(s=subject, m=mod)
            text = text[0].upper() + text[1:]
            gold = _gold(rng, relation)
            qid = f"{dataset}-{i:03d}"
            context = choices = None
            if scenario is Scenario.EXTRACTIVE:
                context = f"Records of {subject} list {gold} in connection with its {relation}."
            elif scenario is Scenario.MULTIPLE_CHOICE:
                opts = [gold] + [_gold(rng, relation) for _ in range(3)]
                choices = tuple(opts[j] for j in rng.permutation(4))
            queries.append(Query(qid, text, scenario, dataset, context=context,
                                 choices=choices, gold=(gold,)))
            factors[qid] = f
    return Corpus(tuple(queries)), factors


def bundled_corpus_path():
    from importlib.resources import files
    return files("qrisk").joinpath("data/demo_corpus.jsonl")


# ---------------------------------------------------------------------------
# stand-in endpoints


def _unit(*parts) -> float:
    h = hashlib.sha256("\x1f".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(h[:8], "little") / 2.0 ** 64


_QUESTION = re.compile(r"Question: (.*?)\n", re.DOTALL)
_GRADE = re.compile(r"Now grade the following example\..*?model_answer: (.*?)\ngold: (.*?)\n",
                    re.DOTALL)
_PARA_QUERY = re.compile(r"Query: (.*?)\n\nParaphrase:", re.DOTALL)

_DIRECTIVES = {"name", "identify", "state", "list"}
_VAGUE = ("in general", "or something", "and stuff")
_COMPLEX = ("although", "which the", "if the archive", "because")


def confusion_logit(text: str, dataset: str) -> float:
    """The simulated answerer's log-odds of answering wrongly."""
    low = text.lower()
    toks = mock_tokens(text)
    z = -1.6 + DATASET_OFFSET.get(dataset, 0.0)
    if any(c in low for c in _VAGUE):
        z += 1.8
    if any(c in low for c in _COMPLEX):
        z += 1.3
    if "will" in toks and "next" in toks:
        z += 2.0
    if _DIRECTIVES & set(toks[:3]):
        z -= 1.2
    return z


class SimulatedAnswerer:
    """Answers questions about the demo world, sometimes wrongly.

    The source query is recovered by token overlap with the corpus; each
    distinct wording gets its own hash-seeded draw.
    """

    def __init__(self, corpus: Corpus):
        self.queries = list(corpus)
        self._tokens = [set(mock_tokens(q.text)) for q in self.queries]

    def source(self, text: str) -> Query:
        toks = set(mock_tokens(text))
        scores = [len(toks & t) / len(toks | t) if toks | t else 0.0 for t in self._tokens]
        return self.queries[int(np.argmax(scores))]

    def __call__(self, prompt: str) -> str:
        m = _QUESTION.search(prompt)
        text = m.group(1) if m else prompt
        q = self.source(text)
        gold = q.gold[0]
        p_wrong = 1.0 / (1.0 + np.exp(-confusion_logit(text, q.dataset)))
        if _unit("wrong", q.id, text) < p_wrong:
            if q.choices:
                pool = [c for c in q.choices if c != gold]
            else:
                pool = [o.gold[0] for o in self.queries
                        if o.id != q.id and o.gold and o.gold[0] != gold]
            return pool[int(_unit("pick", q.id, text) * len(pool))]
        if _unit("style", q.id, text) < 0.3:
            return f"It is {gold}."
        return gold


def _norm(s: str) -> str:
    return " ".join(mock_tokens(s))


def simulated_judge(prompt: str) -> str:
    m = _GRADE.search(prompt)
    if not m:
        return 'correct=false; rationale="No gradable example found."'
    answer, gold = m.group(1), m.group(2).strip()
    members = [g.strip() for g in gold[1:-1].split(",")] if gold.startswith("{") else [gold]
    a = f" {_norm(answer)} "
    ok = any(_norm(g) and f" {_norm(g)} " in a for g in members if g != "...")
    verdict = "true" if ok else "false"
    why = "The answer names a gold reference." if ok else "The answer names no gold reference."
    return f'correct={verdict}; rationale="{why}"'


_SWAPS = (("What", "Which"), ("Who", "Which person"), ("near", "close to"),
          ("crosses", "runs through"), ("Name", "Give"), ("completed", "finished"),
          ("wrote", "authored"), ("capital", "chief city"), ("Identify", "Name"))
_FILLERS = ("Quick question: ", "Please, ", "Kindly ", "I wonder: ")


def simulated_paraphrase(prompt: str, salt=None) -> str:
    """Draw ``salt`` of a lexical perturbation of the query in the prompt."""
    m = _PARA_QUERY.search(prompt)
    text = m.group(1) if m else prompt
    k = int(salt or 0)
    op = k % 6
    if op == 0:
        return text.lower()
    if op == 1:
        return text.rstrip("?.") + (" ?" if text.endswith("?") else " .")
    if op == 2:
        return _FILLERS[(k // 6) % len(_FILLERS)] + text[0].lower() + text[1:]
    swaps = [s for s in _SWAPS if re.search(rf"\b{s[0]}\b", text)]
    if not swaps:
        return text.upper() if op == 3 else text.replace(" ", "  ")
    n = 1 if op in (3, 4) else 2
    out = text
    for a, b in swaps[(k // 6) % len(swaps):][:n] or swaps[:n]:
        out = re.sub(rf"\b{a}\b", b, out, count=1)
    return out


@dataclass
class OfflineProviders:
    paraphraser: object
    answerer: object
    judge: object
    bi: object
    cross: object


def offline_providers(corpus: Corpus, transcript=None) -> OfflineProviders:
    """Mock endpoints for the demo world, optionally recording to a transcript."""
    return OfflineProviders(
        paraphraser=mock_provider(simulated_paraphrase, model_name="mock-paraphraser",
                                  transcript=transcript, sampled=True),
        answerer=mock_provider(SimulatedAnswerer(corpus), model_name="mock-answerer",
                               transcript=transcript),
        judge=mock_provider(simulated_judge, model_name="mock-judge", transcript=transcript),
        bi=mock_provider(embed_fn=hashed_embedding, model_name="mock-bi",
                         transcript=transcript),
        cross=mock_provider(cross_fn=jaccard_overlap, model_name="mock-cross",
                            transcript=transcript),
    )
