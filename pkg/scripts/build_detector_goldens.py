"""Collect labeled detector examples into src/qrisk/data/detector_goldens.json.

Two sources: the five in-context examples embedded in each feature prompt
template, and a hand-entered table of one present and one absent question
per feature.  Table questions carry no scenario, so they are filed under
Extractive.
"""

import json
import re
from pathlib import Path

from qrisk.features.templates import FEATURE_TEMPLATES

OUT = Path(__file__).resolve().parents[1] / "src" / "qrisk" / "data" / "detector_goldens.json"

EXAMPLE = re.compile(r"^\[E\d\] (?:SCENARIO=([\w-]+); )?INPUT: (.*?)\s+→.*?label=(true|false)",
                     re.MULTILINE)
SCENARIOS = {"Multiple-Choice": "MultipleChoice"}

TABLE = [
    ("AnaphoraUsage", True, "Who was the guitarist for the English Rock band who Terry Kirkbride performed live in the studio with?"),
    ("AnaphoraUsage", False, "Isotopes are named for their number of protons plus what?"),
    ("ClauseComplexity", True, "During evolution, something happened to increase the size of what organ in humans, relative to that of the chimpanzee?"),
    ("ClauseComplexity", False, "What do some animals do to adjust to hot temperatures?"),
    ("QueryScenarioMismatch", True, "What type of forested areas can be found on the highest terrace?"),
    ("QueryScenarioMismatch", False, "What date in 2009 saw the heaviest UK snowfall since 1991?"),
    ("Presupposition", True, "Central America's Panama seceded from which country in 1903?"),
    ("Presupposition", False, "What is the scientific name of the true creature featured in \"Creature from the Black Lagoon\"?"),
    ("PragmaticFeatures", True, "Where did this pattern come from?"),
    ("PragmaticFeatures", False, "What is the name of plant-like protists?"),
    ("RareWordUsage", True, "Where in the human body can you find the Trapezium bone?"),
    ("RareWordUsage", False, "What is an organism at the top of the food chain called?"),
    ("NegationUsage", True, "Which is not an inherited trait in humans?"),
    ("NegationUsage", False, "Along with Walt Disney, who created Oswald the Lucky Rabbit?"),
    ("SuperlativeUsage", True, "What is the first stage of cellular respiration?"),
    ("SuperlativeUsage", False, "Which river forms a natural border between Argentina and Uruguay?"),
    ("NamedEntitiesPresent", True, "What borough are the neighborhood of Chelsea and the office building, 10 Hudson Yards, both a part of?"),
    ("NamedEntitiesPresent", False, "Some plants can detect increased levels of what when reflected from leaves of encroaching neighbors?"),
    ("PolysemousWords", True, "Who supervised the sting operation that implicated Evelyn Dawn Knight?"),
    ("PolysemousWords", False, "Which string instrument often played the basso continuo parts?"),
    ("Subjectivity", True, "What is a criticism of other streaming services?"),
    ("Subjectivity", False, "What is the second book in the Harry Potter series?"),
    ("Answerability", True, "How long was Warsaw occupied by Germany?"),
    ("Answerability", False, "Beyoncé would take a break from music in which year?"),
    ("ExcessiveDetails", True, "SkyWest Airlines is a North American airline owned by SkyWest, Inc. and headquartered in which city in Utah, U.S., it flies as SkyWest Airlines in a partnership with Alaska Airlines?"),
    ("ExcessiveDetails", False, "What is giving birth to dogs called?"),
    ("DomainSpecificity", True, "What is the term for a series of biochemical reactions by which an organism converts a given reactant to a specific end product?"),
    ("DomainSpecificity", False, "Fado is a type of folk music found in which country?"),
    ("LackOfSpecificity", True, "What division is the Canadian Army Doctrine of?"),
    ("LackOfSpecificity", False, "Winchester was the capital of which Anglo Saxon kingdom?"),
    ("IntentionGrounding", True, "Which of the two mines, Discovery Mine or Big Dan Mine, produced more gold?"),
    ("IntentionGrounding", False, "What are the two blocks of Catalan?"),
    ("ContextualConstraints", True, "Which is the least densely populated county of England?"),
    ("ContextualConstraints", False, "Who was the lyricist partner of Richard Rogers prior to Oscar Hammerstein?"),
]


def main():
    cases = []
    for feature, tmpl in FEATURE_TEMPLATES.items():
        found = EXAMPLE.findall(tmpl)
        assert len(found) == 5, (feature, len(found))
        for i, (scen, text, label) in enumerate(found, 1):
            cases.append({"id": f"{feature}-E{i}", "source": "template", "feature": feature,
                          "scenario": SCENARIOS.get(scen, scen or "Extractive"),
                          "text": text, "label": label == "true"})
    for feature, label, text in TABLE:
        tag = "pos" if label else "neg"
        cases.append({"id": f"{feature}-table-{tag}", "source": "table", "feature": feature,
                      "scenario": "Extractive", "text": text, "label": label})
    OUT.write_text(json.dumps(cases, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")
    print(f"wrote {len(cases)} cases to {OUT}")


if __name__ == "__main__":
    main()
