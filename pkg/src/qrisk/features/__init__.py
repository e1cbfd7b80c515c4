"""Per-query linguistic feature vectors: 17 binary indicators and 4 counts."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Optional, Protocol

import numpy as np

from ..corpus import Query, read_jsonl, write_jsonl
from . import rules, syntax
from .llm import DetectorError, LlmJudge, parse_structured, render_feature_prompt
from .syntax import count_clauses, count_tokens, parse_depths, set_tokenizer


class FeatureName(str, Enum):
    LackOfSpecificity = "LackOfSpecificity"
    ClauseComplexity = "ClauseComplexity"
    NegationUsage = "NegationUsage"
    ExcessiveDetails = "ExcessiveDetails"
    AnaphoraUsage = "AnaphoraUsage"
    PolysemousWords = "PolysemousWords"
    RareWordUsage = "RareWordUsage"
    PragmaticFeatures = "PragmaticFeatures"
    Presupposition = "Presupposition"
    ContextualConstraints = "ContextualConstraints"
    NamedEntitiesPresent = "NamedEntitiesPresent"
    DomainSpecificity = "DomainSpecificity"
    QueryScenarioMismatch = "QueryScenarioMismatch"
    SuperlativeUsage = "SuperlativeUsage"
    IntentionGrounding = "IntentionGrounding"
    Subjectivity = "Subjectivity"
    Answerability = "Answerability"
    QueryTokenLength = "QueryTokenLength"
    NumberOfClauses = "NumberOfClauses"
    DependencyDepth = "DependencyDepth"
    ParseTreeHeight = "ParseTreeHeight"


BINARY_FEATURES: tuple[str, ...] = tuple(f.value for f in FeatureName)[:17]
NUMERIC_FEATURES: tuple[str, ...] = tuple(f.value for f in FeatureName)[17:]
ALL_FEATURES = BINARY_FEATURES + NUMERIC_FEATURES

# query columns that override the baseline counters
_NUMERIC_COLUMN = {"QueryTokenLength": "n_tokens", "NumberOfClauses": "n_clauses",
                   "DependencyDepth": "dep_depth", "ParseTreeHeight": "parse_height"}


class DetectorBackend(Protocol):
    kind: str

    def detect(self, feature: str, text: str, scenario: str) -> tuple[bool, str]: ...


class RuleBased:
    kind = "RuleBased"

    def detect(self, feature: str, text: str, scenario: str) -> tuple[bool, str]:
        return rules.detect(feature, text, scenario)


@dataclass(frozen=True)
class FeatureVector:
    query_id: str
    binary: dict
    numeric_raw: dict
    rationales: dict
    numeric_scaled: Optional[dict] = None

    def __post_init__(self):
        if set(self.binary) != set(BINARY_FEATURES):
            raise ValueError(f"{self.query_id}: binary features must cover all 17 names")
        if any(v not in (0, 1) for v in self.binary.values()):
            raise ValueError(f"{self.query_id}: binary values must be 0 or 1")
        if set(self.numeric_raw) != set(NUMERIC_FEATURES):
            raise ValueError(f"{self.query_id}: numeric features must cover all 4 names")
        if any(v < 0 for v in self.numeric_raw.values()):
            raise ValueError(f"{self.query_id}: numeric counts must be non-negative")

    def row(self) -> np.ndarray:
        """The 21-column model row (binary then scaled numeric)."""
        if self.numeric_scaled is None:
            raise ValueError(f"{self.query_id}: numeric features not scaled yet")
        return np.array([self.binary[f] for f in BINARY_FEATURES]
                        + [self.numeric_scaled[f] for f in NUMERIC_FEATURES], dtype=float)

    def to_json(self) -> dict:
        out = {"query_id": self.query_id, "binary": dict(self.binary),
               "numeric_raw": dict(self.numeric_raw), "rationales": dict(self.rationales)}
        if self.numeric_scaled is not None:
            out["numeric_scaled"] = dict(self.numeric_scaled)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "FeatureVector":
        return cls(obj["query_id"], obj["binary"], obj["numeric_raw"], obj["rationales"],
                   obj.get("numeric_scaled"))


def numeric_counts(query: Query) -> dict:
    """The four structure counts, honoring precomputed corpus columns."""
    depth, height = parse_depths(query.text)
    out = {"QueryTokenLength": count_tokens(query.text),
           "NumberOfClauses": count_clauses(query.text),
           "DependencyDepth": depth, "ParseTreeHeight": height}
    for name, col in _NUMERIC_COLUMN.items():
        v = getattr(query, col)
        if v is not None:
            out[name] = v
    return out


def extract_features(query: Query, backend: DetectorBackend) -> FeatureVector:
    binary, why = {}, {}
    scenario = query.scenario.value
    for name in BINARY_FEATURES:
        label, rationale = backend.detect(name, query.text, scenario)
        binary[name] = int(label)
        why[name] = rationale
    raw = numeric_counts(query)
    for name, v in raw.items():
        why[name] = f"{name} = {v}"
    return FeatureVector(query.id, binary, raw, why)


@dataclass(frozen=True)
class NumericScaler:
    """Per-feature mean and population standard deviation of the raw counts."""
    mean: dict
    std: dict

    @classmethod
    def fit(cls, vectors: Iterable[FeatureVector]) -> "NumericScaler":
        vectors = list(vectors)
        if not vectors:
            raise ValueError("cannot fit numeric scaling on an empty list")
        m = np.array([[v.numeric_raw[f] for f in NUMERIC_FEATURES] for v in vectors], float)
        mu, sd = m.mean(axis=0), m.std(axis=0)
        return cls(dict(zip(NUMERIC_FEATURES, mu.tolist())),
                   dict(zip(NUMERIC_FEATURES, sd.tolist())))

    def transform(self, vec: FeatureVector) -> FeatureVector:
        scaled = {}
        for f in NUMERIC_FEATURES:
            sd = self.std[f]
            scaled[f] = 0.0 if sd == 0 else (vec.numeric_raw[f] - self.mean[f]) / sd
        return replace(vec, numeric_scaled=scaled)

    def to_json(self) -> dict:
        return {"mean": dict(self.mean), "std": dict(self.std)}

    @classmethod
    def from_json(cls, obj: dict) -> "NumericScaler":
        return cls(dict(obj["mean"]), dict(obj["std"]))


def scale_numeric(vectors: list[FeatureVector]) -> list[FeatureVector]:
    """Standardize the numeric counts over this list; zero spread maps to 0."""
    scaler = NumericScaler.fit(vectors)
    return [scaler.transform(v) for v in vectors]


def save_features(vectors: Iterable[FeatureVector], path) -> None:
    write_jsonl((v.to_json() for v in vectors), path)


def load_features(path) -> list[FeatureVector]:
    return [FeatureVector.from_json(obj) for obj in read_jsonl(path)]


@dataclass
class DetectorReport:
    per_feature: dict = field(default_factory=dict)   # feature -> (correct, total)
    misses: list = field(default_factory=list)

    @property
    def accuracy(self) -> float:
        c = sum(a for a, _ in self.per_feature.values())
        n = sum(b for _, b in self.per_feature.values())
        return c / n if n else float("nan")


def detector_accuracy(backend: DetectorBackend, cases: Iterable[dict]) -> DetectorReport:
    """Score a backend on labeled cases ``{feature, text, scenario, label}``."""
    report = DetectorReport()
    for case in cases:
        got, _ = backend.detect(case["feature"], case["text"], case.get("scenario", "Extractive"))
        ok = got == bool(case["label"])
        c, n = report.per_feature.get(case["feature"], (0, 0))
        report.per_feature[case["feature"]] = (c + ok, n + 1)
        if not ok:
            report.misses.append(case)
    return report


def load_goldens() -> list[dict]:
    from importlib.resources import files
    return json.loads(files("qrisk").joinpath("data/detector_goldens.json").read_text("utf-8"))


__all__ = [
    "FeatureName", "BINARY_FEATURES", "NUMERIC_FEATURES", "ALL_FEATURES", "FeatureVector",
    "RuleBased", "LlmJudge", "DetectorError", "DetectorBackend", "extract_features",
    "count_tokens", "count_clauses", "parse_depths", "set_tokenizer", "scale_numeric",
    "NumericScaler", "save_features", "load_features", "detector_accuracy", "load_goldens",
    "parse_structured", "render_feature_prompt", "numeric_counts", "syntax",
]
