"""Write the recorded detector transcript used by the golden tests.

Each golden case's rendered prompt is stored with a verdict in the
structured-output format.  The verdicts are the reference labels, so the
transcript plays the part of a model that agrees with the annotations;
replaying it checks prompt rendering, cache addressing and output parsing.
"""

import shutil
from pathlib import Path

from qrisk.features import load_goldens, render_feature_prompt
from qrisk.llmio import Transcript, mock_provider

OUT = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "detector_transcript"


def main():
    verdicts = {}
    for case in load_goldens():
        prompt = render_feature_prompt(case["feature"], case["text"], case["scenario"])
        label = "true" if case["label"] else "false"
        verdicts[prompt] = f'label={label}; rationale="Recorded verdict for {case["id"]}."'
    if OUT.exists():
        shutil.rmtree(OUT)
    provider = mock_provider(table=verdicts, transcript=Transcript(OUT, "record"))
    for prompt in verdicts:
        provider.complete(prompt)
    print(f"recorded {len(verdicts)} prompts under {OUT}")


if __name__ == "__main__":
    main()
