"""Convex hallucination proxy, query-level risk labels and the weight sweep.

All three proxy components grow with wrongness: ``s_llm`` is 1 when the
judge rejects the answer, and the fuzzy and BLEU-1 terms are
dissimilarities to the closest gold reference.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from rapidfuzz.distance import Indel
from scipy.stats import rankdata

from .corpus import Query, RiskLabel
from .features.templates import JUDGE, format_gold, render
from .llmio import ProviderError

HALLUCINATION_THRESHOLD = 0.5


class ProxyError(ValueError):
    """Invalid proxy input (missing gold, empty neighborhood, one-class sweep)."""


class JudgeError(ProviderError):
    def __init__(self, raw: str):
        super().__init__(f"unparseable judge verdict: {raw!r}")
        self.raw = raw


@dataclass(frozen=True)
class ProxyWeights:
    w_llm: float = 0.6
    w_fuzz: float = 0.3
    w_bleu: float = 0.1

    def __post_init__(self):
        w = (self.w_llm, self.w_fuzz, self.w_bleu)
        if min(w) < 0 or abs(sum(w) - 1.0) > 1e-9:
            raise ProxyError(f"proxy weights must be non-negative and sum to 1, got {w}")

    def as_tuple(self) -> tuple[float, float, float]:
        return self.w_llm, self.w_fuzz, self.w_bleu


@dataclass(frozen=True)
class ProxyScore:
    s_llm: int
    s_fuzz: float
    s_bleu: float
    h_hat: float
    hallucinated: bool

    @classmethod
    def combine(cls, s_llm: int, s_fuzz: float, s_bleu: float,
                weights: ProxyWeights = ProxyWeights()) -> "ProxyScore":
        h = weights.w_llm * s_llm + weights.w_fuzz * s_fuzz + weights.w_bleu * s_bleu
        return cls(int(s_llm), s_fuzz, s_bleu, h, h > HALLUCINATION_THRESHOLD)

    def components(self) -> tuple[float, float, float]:
        return float(self.s_llm), self.s_fuzz, self.s_bleu


def _normalize(text: str) -> str:
    return " ".join(text.casefold().split())


def fuzz_dissimilarity(answer: str, gold: Sequence[str]) -> float:
    """1 minus the best normalized indel similarity against any gold string."""
    if not gold:
        raise ProxyError("gold must be non-empty")
    a = _normalize(answer)
    best = max(Indel.normalized_similarity(a, _normalize(g)) for g in gold)
    return 1.0 - best


_WORD = re.compile(r"\w+", re.UNICODE)


def _unigrams(text: str) -> list[str]:
    return _WORD.findall(text.casefold())


def bleu1(candidate: str, reference: str) -> float:
    """Clipped unigram precision times brevity penalty, no smoothing."""
    cand, ref = _unigrams(candidate), _unigrams(reference)
    c, r = len(cand), len(ref)
    if c == 0:
        return 0.0
    ref_counts = Counter(ref)
    overlap = sum(min(n, ref_counts[w]) for w, n in Counter(cand).items())
    bp = 1.0 if c > r else math.exp(1.0 - r / c)
    return overlap / c * bp


def bleu1_dissimilarity(answer: str, gold: Sequence[str]) -> float:
    if not gold:
        raise ProxyError("gold must be non-empty")
    return 1.0 - max(bleu1(answer, g) for g in gold)


_VERDICT = re.compile(r"\bcorrect\s*=\s*(true|false)\b", re.IGNORECASE)
_WHY = re.compile(r"rationale\s*=\s*\"?(.*?)\"?\s*$", re.IGNORECASE | re.DOTALL)

JUDGE_REPAIR = ("Your previous reply could not be parsed:\n{raw}\n\n"
                "Reply with exactly one line of the form\n"
                "correct=<true|false>; rationale=\"<two short sentences>\"")


def judge_prompt(question: str, answer: str, gold: Sequence[str]) -> str:
    return render(JUDGE, query=question, answer=answer, gold=format_gold(gold))


def parse_verdict(raw: str) -> tuple[bool, str] | None:
    found = {v.lower() for v in _VERDICT.findall(raw)}
    if len(found) != 1:
        return None
    m = _WHY.search(raw)
    return found.pop() == "true", (m.group(1).strip() if m else "")


def judge_answer(query: Query, answer: str, judge, question: str | None = None) -> dict:
    """Ask the judge whether ``answer`` matches the query's gold set.

    ``question`` is the wording the answer responded to (a paraphrase), and
    defaults to the original query text.
    """
    if not query.has_gold:
        raise ProxyError(f"query {query.id!r} has no gold answers")
    prompt = judge_prompt(question or query.text, answer, query.gold)
    raw = judge.complete(prompt)
    parsed = parse_verdict(raw)
    if parsed is None:
        raw = judge.complete(JUDGE_REPAIR.format(raw=raw), salt=prompt)
        parsed = parse_verdict(raw)
    if parsed is None:
        raise JudgeError(raw)
    return {"correct": parsed[0], "rationale": parsed[1]}


def score_paraphrase(query: Query, answer: str, weights: ProxyWeights, judge,
                     question: str | None = None) -> ProxyScore:
    verdict = judge_answer(query, answer, judge, question)
    return ProxyScore.combine(0 if verdict["correct"] else 1,
                              fuzz_dissimilarity(answer, query.gold),
                              bleu1_dissimilarity(answer, query.gold), weights)


def label_from_scores(query_id: str, scores: Sequence[ProxyScore],
                      max_accepted: int = 6) -> RiskLabel:
    if not scores:
        raise ProxyError(f"query {query_id!r}: empty neighborhood cannot be labeled")
    tally = sum(s.hallucinated for s in scores)
    return RiskLabel(query_id, tally, len(scores), partial=len(scores) < max_accepted)


def label_query(query: Query, neighborhood, answers: Sequence[str],
                weights: ProxyWeights, judge) -> tuple[RiskLabel, list[ProxyScore]]:
    """Score each paraphrase's answer and tally hallucinations into a risk label."""
    paras = neighborhood.paraphrases
    if not paras:
        raise ProxyError(f"query {query.id!r}: empty neighborhood cannot be labeled")
    if len(answers) != len(paras):
        raise ProxyError(f"query {query.id!r}: {len(answers)} answers for "
                         f"{len(paras)} paraphrases")
    scores = [score_paraphrase(query, a, weights, judge, question=p.text)
              for p, a in zip(paras, answers)]
    return label_from_scores(query.id, scores, neighborhood.max_accepted), scores


def roc_auc(scores, labels) -> float:
    """Mann-Whitney AUC; tied scores across classes count one half."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(bool)
    n1, n0 = int(y.sum()), int((~y).sum())
    if n1 == 0 or n0 == 0:
        raise ProxyError("ROC-AUC needs both classes present")
    r = rankdata(s)
    return float((r[y].sum() - n1 * (n1 + 1) / 2) / (n1 * n0))


@dataclass(frozen=True)
class SweepPoint:
    w_llm: float
    w_fuzz: float
    w_bleu: float
    auc: float


def simplex_grid(step: float) -> list[tuple[float, float, float]]:
    k = round(1.0 / step)
    if k < 1 or abs(k * step - 1.0) > 1e-9:
        raise ProxyError(f"grid step {step} does not divide 1")
    return [(i / k, j / k, (k - i - j) / k) for i in range(k + 1) for j in range(k + 1 - i)]


def simplex_sweep(components, labels, grid_step: float = 0.1) -> list[SweepPoint]:
    """ROC-AUC of the raw proxy score at every weight triple on the simplex grid.

    ``components`` is an (n, 3) array of (s_llm, s_fuzz, s_bleu) or a list of
    ProxyScore; ``labels`` are human hallucination labels (1 = hallucinated).
    """
    comps = [c.components() if isinstance(c, ProxyScore) else c for c in components]
    x = np.asarray(comps, dtype=float)
    if x.ndim != 2 or x.shape[1] != 3 or len(x) == 0:
        raise ProxyError("components must be a non-empty (n, 3) array")
    if len(x) != len(labels):
        raise ProxyError("components and labels differ in length")
    out = [SweepPoint(*w, roc_auc(x @ np.array(w), labels)) for w in simplex_grid(grid_step)]
    out.sort(key=lambda p: (-p.auc, p.w_llm, p.w_fuzz, p.w_bleu))
    return out


def save_sweep_csv(points: Iterable[SweepPoint], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("w_llm,w_fuzz,w_bleu,auc\n")
        for p in points:
            fh.write(f"{p.w_llm:.6g},{p.w_fuzz:.6g},{p.w_bleu:.6g},{p.auc:.12g}\n")
