"""Queries, corpora and observed-risk labels, with JSONL persistence."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from pathlib import Path
from typing import Iterable, Optional

log = logging.getLogger(__name__)

DEFAULT_NEIGHBORHOOD = 6
_RISKY_FRACTION = 4 / 6

# optional per-query columns that override the baseline syntactic provider
ANNOTATION_COLUMNS = ("n_tokens", "n_clauses", "dep_depth", "parse_height")


class CorpusError(ValueError):
    """Raised for malformed or inconsistent corpus input."""


class Scenario(str, Enum):
    EXTRACTIVE = "Extractive"
    MULTIPLE_CHOICE = "MultipleChoice"
    ABSTRACTIVE = "Abstractive"

    @classmethod
    def parse(cls, value) -> "Scenario":
        if isinstance(value, Scenario):
            return value
        for member in cls:
            if value == member.value:
                return member
        raise CorpusError(f"unknown scenario {value!r}; expected one of "
                          f"{[m.value for m in cls]}")


class RiskCategory(IntEnum):
    SAFE = 0
    BORDERLINE = 1
    RISKY = 2

    @property
    def label(self) -> str:
        return self.name.capitalize()


def categorize(tally: int, m: int = DEFAULT_NEIGHBORHOOD) -> RiskCategory:
    """Map a hallucination tally out of ``m`` paraphrases to a risk category.

    Safe iff no paraphrase hallucinated, Risky iff at least 4/6 of them did,
    Borderline otherwise. For m = 6 this is 0 / 1-3 / 4-6.
    """
    if m < 1:
        raise ValueError(f"neighborhood size must be >= 1, got {m}")
    if not 0 <= tally <= m:
        raise ValueError(f"tally {tally} outside [0, {m}]")
    if tally == 0:
        return RiskCategory.SAFE
    # integer comparison keeps the 4/6 boundary exact: tally/m >= 4/6
    if 6 * tally >= 4 * m:
        return RiskCategory.RISKY
    return RiskCategory.BORDERLINE


@dataclass(frozen=True)
class Query:
    id: str
    text: str
    scenario: Scenario
    dataset: str
    context: Optional[str] = None
    choices: Optional[tuple[str, ...]] = None
    gold: Optional[tuple[str, ...]] = None
    n_tokens: Optional[int] = None
    n_clauses: Optional[int] = None
    dep_depth: Optional[int] = None
    parse_height: Optional[int] = None

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise CorpusError("query id must be a non-empty string")
        if not isinstance(self.text, str) or not self.text.strip():
            raise CorpusError(f"query {self.id!r}: text must be non-empty")
        object.__setattr__(self, "scenario", Scenario.parse(self.scenario))
        if not isinstance(self.dataset, str) or not self.dataset:
            raise CorpusError(f"query {self.id!r}: dataset must be a non-empty string")
        if self.choices is not None:
            if self.scenario is not Scenario.MULTIPLE_CHOICE:
                raise CorpusError(f"query {self.id!r}: choices given for "
                                  f"non-MultipleChoice scenario {self.scenario.value}")
            object.__setattr__(self, "choices", tuple(self.choices))
        if self.gold is not None:
            object.__setattr__(self, "gold", tuple(self.gold))
        for col in ANNOTATION_COLUMNS:
            v = getattr(self, col)
            if v is not None and (not isinstance(v, int) or isinstance(v, bool) or v < 0):
                raise CorpusError(f"query {self.id!r}: {col} must be a non-negative integer")

    @property
    def has_gold(self) -> bool:
        return bool(self.gold)

    def to_json(self) -> dict:
        out = {"id": self.id, "text": self.text, "scenario": self.scenario.value,
               "dataset": self.dataset}
        if self.context is not None:
            out["context"] = self.context
        if self.choices is not None:
            out["choices"] = list(self.choices)
        if self.gold is not None:
            out["gold"] = list(self.gold)
        for col in ANNOTATION_COLUMNS:
            v = getattr(self, col)
            if v is not None:
                out[col] = v
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "Query":
        if not isinstance(obj, dict):
            raise CorpusError("expected a JSON object")
        missing = [k for k in ("id", "text", "scenario", "dataset") if k not in obj]
        if missing:
            raise CorpusError(f"missing required field(s): {', '.join(missing)}")
        known = {"id", "text", "scenario", "dataset", "context", "choices", "gold",
                 *ANNOTATION_COLUMNS}
        extra = set(obj) - known
        if extra:
            raise CorpusError(f"unknown field(s): {', '.join(sorted(extra))}")
        for key in ("choices", "gold"):
            val = obj.get(key)
            if val is not None and not (isinstance(val, list)
                                        and all(isinstance(s, str) for s in val)):
                raise CorpusError(f"{key} must be a list of strings")
        return cls(**obj)


@dataclass(frozen=True)
class Corpus:
    queries: tuple[Query, ...]
    datasets: frozenset = field(init=False)
    scenarios: frozenset = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "queries", tuple(self.queries))
        seen: dict[str, int] = {}
        for i, q in enumerate(self.queries):
            if q.id in seen:
                raise CorpusError(f"duplicate id {q.id!r} at positions {seen[q.id]} and {i}")
            seen[q.id] = i
        object.__setattr__(self, "datasets", frozenset(q.dataset for q in self.queries))
        object.__setattr__(self, "scenarios", frozenset(q.scenario for q in self.queries))

    def __len__(self) -> int:
        return len(self.queries)

    def __iter__(self):
        return iter(self.queries)

    def by_id(self) -> dict[str, Query]:
        return {q.id: q for q in self.queries}

    def labelable(self) -> list[Query]:
        """Queries with gold answers; the rest are skipped with a warning."""
        out = [q for q in self.queries if q.has_gold]
        skipped = len(self.queries) - len(out)
        if skipped:
            log.warning("%d queries without gold answers cannot be labeled; skipping", skipped)
        return out


def load_corpus(path, format: str = "jsonl") -> Corpus:
    """Read a JSONL corpus, one query object per line, preserving order."""
    if format != "jsonl":
        raise CorpusError(f"unsupported corpus format {format!r}")
    queries: list[Query] = []
    first_line: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
                q = Query.from_json(obj)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None
            except CorpusError as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from None
            except TypeError as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from None
            if q.id in first_line:
                raise CorpusError(f"{path}: duplicate id {q.id!r} on lines "
                                  f"{first_line[q.id]} and {lineno}")
            first_line[q.id] = lineno
            queries.append(q)
    return Corpus(tuple(queries))


def _dump_line(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=False, separators=(", ", ": "))


def save_corpus(corpus: Corpus | Iterable[Query], path) -> None:
    queries = corpus.queries if isinstance(corpus, Corpus) else list(corpus)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for q in queries:
            fh.write(_dump_line(q.to_json()) + "\n")


@dataclass(frozen=True)
class RiskLabel:
    query_id: str
    tally: int
    m: int = DEFAULT_NEIGHBORHOOD
    partial: bool = False

    def __post_init__(self):
        # validates the range as a side effect
        categorize(self.tally, self.m)

    @property
    def category(self) -> RiskCategory:
        return categorize(self.tally, self.m)

    def to_json(self) -> dict:
        out = {"query_id": self.query_id, "tally": self.tally, "m": self.m,
               "category": self.category.label}
        if self.partial:
            out["partial"] = True
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "RiskLabel":
        label = cls(obj["query_id"], int(obj["tally"]), int(obj["m"]),
                    bool(obj.get("partial", False)))
        if "category" in obj and obj["category"] != label.category.label:
            raise CorpusError(f"label {label.query_id!r}: category {obj['category']!r} "
                              f"inconsistent with tally {label.tally}/{label.m}")
        return label


def save_labels(labels: Iterable[RiskLabel], path) -> None:
    try:
        fh = open(path, "w", encoding="utf-8", newline="\n")
    except OSError as exc:
        raise CorpusError(f"cannot write labels to {path}: {exc}") from exc
    with fh:
        for lab in labels:
            fh.write(_dump_line(lab.to_json()) + "\n")


def load_labels(path) -> list[RiskLabel]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if raw.strip():
                try:
                    out.append(RiskLabel.from_json(json.loads(raw)))
                except (KeyError, ValueError) as exc:
                    raise CorpusError(f"{path}:{lineno}: {exc}") from None
    return out


def write_jsonl(rows: Iterable[dict], path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(_dump_line(row) + "\n")


def read_jsonl(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
