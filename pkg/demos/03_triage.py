"""Score new queries with the fitted model and route them before answering.

    python demos/03_triage.py [workdir]
"""

import sys
from pathlib import Path

from qrisk.ordmodel import OrdinalModel
from qrisk.pipeline import triage

work = Path(sys.argv[1] if len(sys.argv) > 1 else "demo-work")
model = OrdinalModel.load(work / "model.json")

queries = [
    ("Name the capital of Quilmar.", "demo_trivia"),
    ("What is the capital of Quilmar?", "demo_trivia"),
    ("What is the capital of Quilmar or something?", "demo_trivia"),
    ("Who will lead the guild of Quilmar next year?", "demo_trivia"),
    ("Which river crosses the eastern valley, although the records are incomplete "
     "and stuff?", "demo_trivia"),
    ("Identify the mineral mined near Quilmar, because the maps disagree.", "demo_science"),
]
print(f"{'P(Risky)':>9}  {'route':<8} query")
for text, dataset in queries:
    res = triage(text, "Abstractive", model, threshold=0.3, dataset=dataset)
    print(f"{res.p_risky:>9.3f}  {res.route:<8} {text}")
print("""
Queries under the threshold go straight to the model.  Above it, an
unclear request (vague scope, no clear instruction) is routed to a
clarifying question, and the rest to a grounded or tool-assisted path.""")
