"""Detector backend that asks a completion provider, one prompt per feature."""

from __future__ import annotations

import re

from ..llmio import Provider, ProviderError
from . import templates

_LABEL = re.compile(r"\blabel\s*=\s*(true|false)\b", re.IGNORECASE)
_RATIONALE = re.compile(r"rationale\s*=\s*\"?(.*?)\"?\s*$", re.IGNORECASE | re.DOTALL)

REPAIR = ("Your previous reply could not be parsed:\n{raw}\n\n"
          "Reply with exactly one line of the form\n"
          "label=<true|false>; rationale=\"<two short sentences>\"")

SCENARIO_DISPLAY = {"Extractive": "Extractive", "MultipleChoice": "Multiple-Choice",
                    "Abstractive": "Abstractive"}


class DetectorError(ProviderError):
    """Structured output could not be parsed, even after a repair prompt."""

    def __init__(self, feature: str, raw: str):
        super().__init__(f"{feature}: unparseable detector output: {raw!r}")
        self.feature = feature
        self.raw = raw


def parse_structured(raw: str) -> tuple[bool, str] | None:
    """Parse ``label=<true|false>; rationale="..."``; ``None`` if no single label."""
    labels = _LABEL.findall(raw)
    if len({lab.lower() for lab in labels}) != 1:
        return None
    m = _RATIONALE.search(raw)
    why = m.group(1).strip() if m else ""
    return labels[0].lower() == "true", why


def render_feature_prompt(feature: str, text: str, scenario: str) -> str:
    return templates.render(templates.FEATURE_TEMPLATES[feature], query=text,
                            scenario=SCENARIO_DISPLAY.get(scenario, scenario))


class LlmJudge:
    """Feature detector backed by per-feature few-shot prompt templates."""

    kind = "LlmJudge"

    def __init__(self, provider: Provider):
        self.provider = provider

    def detect(self, feature: str, text: str, scenario: str) -> tuple[bool, str]:
        prompt = render_feature_prompt(feature, text, scenario)
        raw = self.provider.complete(prompt)
        parsed = parse_structured(raw)
        if parsed is None:
            raw = self.provider.complete(REPAIR.format(raw=raw), salt=prompt)
            parsed = parse_structured(raw)
        if parsed is None:
            raise DetectorError(feature, raw)
        return parsed
