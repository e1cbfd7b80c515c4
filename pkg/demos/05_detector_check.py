"""How the offline rule-based detectors fare on the labeled template examples.

    python demos/05_detector_check.py
"""

from qrisk.features import RuleBased, detector_accuracy, load_goldens

cases = load_goldens()
report = detector_accuracy(RuleBased(), cases)
print(f"{len(cases)} labeled examples, rule-based accuracy {report.accuracy:.3f}\n")
for feature, (ok, n) in sorted(report.per_feature.items()):
    print(f"  {feature:<24} {ok:>2}/{n}")
print("\nMissed examples:")
for c in report.misses:
    print(f"  [{c['feature']}] expected {c['label']}: {c['text']}")
print("""
The rules are deliberately simple word-list and pattern detectors.  They
were not tuned to these examples; the misses show where a prompted model
backend (LlmJudge) earns its cost, e.g. resolving anaphora or spotting a
presupposition.""")
