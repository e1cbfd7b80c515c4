"""A walk through the diagnostic bundle produced by 01_label_and_fit.py.

    python demos/02_diagnostics_tour.py [workdir]
"""

import csv
import sys
from pathlib import Path

work = Path(sys.argv[1] if len(sys.argv) > 1 else "demo-work")
report = work / "report"
if not report.exists():
    sys.exit(f"{report} not found; run demos/01_label_and_fit.py first")


def rows(name):
    with open(report / name, newline="") as fh:
        return list(csv.DictReader(fh))


print("Separation of predicted P(Risky) between feature-present and -absent queries")
for r in rows("separations.csv")[:6]:
    print(f"  {r['feature']:<24} KS={float(r['ks']):.3f}  median shift="
          f"{float(r['delta_median']):+.3f}  ({r['direction']}, n={r['n_present']}"
          f"/{r['n_absent']})")

print("\nRank correlation with the ordinal label (BH-adjusted Spearman p)")
live = [r for r in rows("correlations.csv") if r["defined"] == "true"]
for r in sorted(live, key=lambda r: -abs(float(r["spearman_rho"])))[:6]:
    print(f"  {r['feature']:<24} rho={float(r['spearman_rho']):+.3f}  "
          f"tau_b={float(r['kendall_tau']):+.3f}  p_adj={float(r['p_adjusted']):.2g}")
dead = [r["feature"] for r in rows("correlations.csv") if r["defined"] == "false"]
print(f"  constant on this corpus (undefined): {', '.join(dead)}")

cal = [r for r in rows("calibration.csv") if r["stratum"] == "all"]
print(f"\nCalibration: expected calibration error {float(cal[0]['ece']):.3f} over "
      f"{len(cal)} equal-mass bins")
for r in cal:
    print(f"  predicted {float(r['mean_predicted']):.2f}  observed {float(r['observed']):.2f}")

print("\nPropensity-adjusted uplift in the Risky rate (reported when overlap >= 0.45)")
for r in rows("propensity.csv"):
    if r["ate_ipw"]:
        print(f"  {r['feature']:<24} overlap={float(r['overlap']):.2f}  IPW="
              f"{float(r['ate_ipw']):+.3f}  stratified={float(r['ate_strat']):+.3f}")
    else:
        print(f"  {r['feature']:<24} overlap={float(r['overlap']):.2f}  not reported")

lodo = rows("lodo.csv")
print("\nLeave-one-dataset-out stability of the headline coefficients")
for r in lodo:
    if r["feature"] in ("LackOfSpecificity", "ClauseComplexity", "Answerability",
                        "IntentionGrounding"):
        holds = [float(v) for k, v in r.items() if k.startswith("beta_without_")]
        print(f"  {r['feature']:<24} pooled={float(r['pooled']):+.2f}  mean="
              f"{float(r['mean']):+.2f} sd={float(r['std']):.2f}  holds="
              + " ".join(f"{h:+.2f}" for h in holds))
print("\nClauseComplexity shows no uplift because clause count, among its covariates,"
      "\nalmost determines it; the overlap gate withholds the estimate.")
