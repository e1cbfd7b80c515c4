"""Paraphrase neighborhoods gated by a hybrid bi-encoder/cross-encoder similarity."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .corpus import Query, read_jsonl, write_jsonl
from .features.templates import PARAPHRASE_INSTRUCTION, render

log = logging.getLogger(__name__)


class PerturbError(ValueError):
    """Similarity undefined or neighborhood construction misconfigured."""


@dataclass(frozen=True)
class SimilarityConfig:
    lambda_bi: float = 0.6
    lambda_cross: float = 0.4
    threshold: float = 0.85
    max_accepted: int = 6

    def __post_init__(self):
        if self.lambda_bi < 0 or self.lambda_cross < 0:
            raise PerturbError("similarity weights must be non-negative")
        if abs(self.lambda_bi + self.lambda_cross - 1.0) > 1e-12:
            raise PerturbError("lambda_bi + lambda_cross must equal 1")
        if not 0.0 <= self.threshold <= 1.0:
            raise PerturbError("threshold must lie in [0, 1]")
        if self.max_accepted < 1:
            raise PerturbError("max_accepted must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "SimilarityConfig":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


@dataclass(frozen=True)
class Paraphrase:
    source_id: str
    text: str
    similarity: float
    accepted: bool


@dataclass
class Neighborhood:
    source_id: str
    paraphrases: list = field(default_factory=list)
    generation_attempts: int = 0
    max_accepted: int = 6
    error: Optional[str] = None

    @property
    def size(self) -> int:
        return len(self.paraphrases)

    @property
    def partial(self) -> bool:
        return 0 < self.size < self.max_accepted

    def to_json(self) -> dict:
        out = {"source_id": self.source_id,
               "paraphrases": [{"text": p.text, "similarity": p.similarity}
                               for p in self.paraphrases],
               "partial": self.partial, "generation_attempts": self.generation_attempts,
               "max_accepted": self.max_accepted}
        if self.error:
            out["error"] = self.error
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "Neighborhood":
        paras = [Paraphrase(obj["source_id"], p["text"], float(p["similarity"]), True)
                 for p in obj["paraphrases"]]
        return cls(obj["source_id"], paras, int(obj.get("generation_attempts", 0)),
                   int(obj.get("max_accepted", 6)), obj.get("error"))


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise PerturbError("zero-vector embedding; cosine similarity undefined")
    return float(np.dot(u, v) / (nu * nv))


def hybrid_similarity(a: str, b: str, bi, cross, cfg: SimilarityConfig = SimilarityConfig()
                      ) -> float:
    """lambda_bi * cos(e(a), e(b)) + lambda_cross * mean(P(a,b), P(b,a)), clamped to [0, 1]."""
    cos = cosine(bi.embed(a), bi.embed(b))
    p = 0.5 * (cross.cross_score(a, b) + cross.cross_score(b, a))
    s = cfg.lambda_bi * cos + cfg.lambda_cross * p
    return min(1.0, max(0.0, s))


def paraphrase_prompt(text: str) -> str:
    return render(PARAPHRASE_INSTRUCTION, query=text)


def build_neighborhood(query: Query, generator, bi, cross,
                       cfg: SimilarityConfig = SimilarityConfig(),
                       budget: Optional[int] = None) -> Neighborhood:
    """Sample paraphrases until ``max_accepted`` pass the threshold or the budget runs out.

    Only the query text reaches the generator; gold answers are never read.
    Each draw is cached under its attempt index so a replayed run sees the
    same candidate stream.
    """
    budget = 3 * cfg.max_accepted if budget is None else budget
    if budget < cfg.max_accepted:
        raise PerturbError(f"budget {budget} is below max_accepted {cfg.max_accepted}")
    text = query.text
    prompt = paraphrase_prompt(text)
    hood = Neighborhood(query.id, max_accepted=cfg.max_accepted)
    for attempt in range(budget):
        cand = generator.complete(prompt, salt=attempt).strip()
        hood.generation_attempts = attempt + 1
        sim = hybrid_similarity(text, cand, bi, cross, cfg) if cand else 0.0
        if sim >= cfg.threshold:
            hood.paraphrases.append(Paraphrase(query.id, cand, sim, True))
            if hood.size == cfg.max_accepted:
                break
    if hood.size == 0:
        hood.error = f"no paraphrase reached similarity {cfg.threshold} in {budget} draws"
        log.warning("query %s: %s", query.id, hood.error)
    return hood


def save_neighborhoods(hoods, path) -> None:
    write_jsonl((h.to_json() for h in hoods), path)


def load_neighborhoods(path) -> list[Neighborhood]:
    return [Neighborhood.from_json(obj) for obj in read_jsonl(path)]
