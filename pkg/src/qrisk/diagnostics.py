"""Separation, correlation, calibration, length and propensity diagnostics.

Every function is a pure computation over arrays; the CSV writers at the
bottom produce the report bundle files.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, log_expit
from scipy.stats import binomtest, false_discovery_control, kendalltau, spearmanr

from .ordmodel import DesignMatrix, one_hot

RISK_UP, RISK_DOWN = "risk_up", "risk_down"
CLIP = 1e-3
OVERLAP_ALPHA = 0.05
OVERLAP_THRESHOLD = 0.45


class DiagnosticError(ValueError):
    pass


def _two_groups(values, presence):
    x = np.asarray(values, dtype=float)
    t = np.asarray(presence).astype(bool)
    if x.shape != t.shape:
        raise DiagnosticError("values and presence differ in length")
    if t.all() or not t.any():
        raise DiagnosticError("both present and absent groups must be non-empty")
    return x[t], x[~t]


# ---------------------------------------------------------------------------
# ECDF separation


def ks_distance(a, b) -> float:
    """Sup-norm distance between two empirical CDFs on the merged support."""
    a, b = np.sort(np.asarray(a, float)), np.sort(np.asarray(b, float))
    grid = np.union1d(a, b)
    fa = np.searchsorted(a, grid, side="right") / len(a)
    fb = np.searchsorted(b, grid, side="right") / len(b)
    return float(np.max(np.abs(fa - fb)))


@dataclass(frozen=True)
class EcdfSeparation:
    feature: str
    ks: float
    delta_median: float
    n_present: int
    n_absent: int
    direction: str
    tie: bool


def ecdf_separation(predictions, presence, feature: str = "") -> EcdfSeparation:
    """KS distance and median shift of P(Risky) between present and absent items.

    A zero median shift is reported as ``risk_down`` with ``tie=True``.
    """
    present, absent = _two_groups(predictions, presence)
    dm = float(np.median(present) - np.median(absent))
    return EcdfSeparation(feature, ks_distance(present, absent), dm, len(present), len(absent),
                          RISK_UP if dm > 0 else RISK_DOWN, dm == 0)


# ---------------------------------------------------------------------------
# rank correlations


@dataclass(frozen=True)
class Correlation:
    feature: str
    spearman: float
    spearman_p: float
    kendall: float
    kendall_p: float
    p_adjusted: float = math.nan
    defined: bool = True


def rank_correlation(x, y, feature: str = "") -> Correlation:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) != len(y):
        raise DiagnosticError("feature and outcome differ in length")
    if len(x) < 3:
        raise DiagnosticError("rank correlations need n >= 3")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return Correlation(feature, math.nan, math.nan, math.nan, math.nan, math.nan, False)
    rho, p_rho = spearmanr(x, y)
    tau, p_tau = kendalltau(x, y, variant="b")
    return Correlation(feature, float(rho), float(p_rho), float(tau), float(p_tau))


def rank_correlations(columns: dict, outcome) -> list[Correlation]:
    """Spearman rho and Kendall tau-b per feature, Spearman p adjusted by BH over the family."""
    rows = [rank_correlation(v, outcome, name) for name, v in columns.items()]
    ok = [i for i, r in enumerate(rows) if r.defined]
    if ok:
        adj = false_discovery_control([rows[i].spearman_p for i in ok], method="bh")
        for i, p in zip(ok, adj):
            r = rows[i]
            rows[i] = Correlation(r.feature, r.spearman, r.spearman_p, r.kendall, r.kendall_p,
                                  float(p), True)
    return rows


def correlation_matrix(columns: dict) -> tuple[list[str], np.ndarray]:
    """Pairwise Spearman matrix over features; constant columns give NaN rows."""
    names = list(columns)
    X = np.column_stack([np.asarray(columns[n], float) for n in names])
    k = len(names)
    out = np.full((k, k), np.nan)
    live = [j for j in range(k) if np.ptp(X[:, j]) > 0]
    if len(live) >= 2:
        rho = spearmanr(X[:, live]).statistic
        out[np.ix_(live, live)] = rho
    elif len(live) == 1:
        out[live[0], live[0]] = 1.0
    return names, out


# ---------------------------------------------------------------------------
# calibration


@dataclass(frozen=True)
class ReliabilityPoint:
    mean_predicted: float
    observed: float
    n: int


def equal_mass_bins(values, bins: int) -> list[np.ndarray]:
    """Index groups of (nearly) equal size after a stable sort of ``values``."""
    order = np.argsort(np.asarray(values, float), kind="stable")
    return [g for g in np.array_split(order, bins) if len(g)]


def reliability(predictions, outcomes, bins: int = 10) -> tuple[list[ReliabilityPoint], float]:
    """Equal-mass reliability curve and expected calibration error."""
    p = np.asarray(predictions, dtype=float)
    o = np.asarray(outcomes, dtype=float)
    if len(p) != len(o):
        raise DiagnosticError("predictions and outcomes differ in length")
    if len(p) < bins:
        raise DiagnosticError(f"need at least {bins} items for {bins} bins")
    points, ece = [], 0.0
    for g in equal_mass_bins(p, bins):
        pt = ReliabilityPoint(float(p[g].mean()), float(o[g].mean()), len(g))
        points.append(pt)
        ece += len(g) * abs(pt.observed - pt.mean_predicted)
    return points, float(ece / len(p))


# ---------------------------------------------------------------------------
# risk versus length


def wilson_interval(k: int, n: int) -> tuple[float, float]:
    ci = binomtest(k, n).proportion_ci(confidence_level=0.95, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class LengthBin:
    index: int
    center: float
    lo: float
    hi: float
    n_present: int
    rate_present: float
    ci_present: tuple
    n_absent: int
    rate_absent: float
    ci_absent: tuple


def risk_vs_length(lengths, risky, presence, bins: int = 30, min_bin: int = 50
                   ) -> list[LengthBin]:
    """Risky rate per equal-mass token-length bin, split by feature presence.

    A stratum with fewer than ``min_bin`` items in a bin is suppressed (NaN
    rate); bins where both strata are suppressed are dropped.
    """
    L = np.asarray(lengths, dtype=float)
    r = np.asarray(risky).astype(bool)
    t = np.asarray(presence).astype(bool)
    nan2 = (math.nan, math.nan)
    out = []
    for i, g in enumerate(equal_mass_bins(L, bins)):
        stats = []
        for mask in (t[g], ~t[g]):
            n = int(mask.sum())
            if n < min_bin:
                stats.append((n, math.nan, nan2))
            else:
                k = int(r[g][mask].sum())
                stats.append((n, k / n, wilson_interval(k, n)))
        if all(math.isnan(s[1]) for s in stats):
            continue
        (n1, r1, c1), (n0, r0, c0) = stats
        out.append(LengthBin(i, float(L[g].mean()), float(L[g].min()), float(L[g].max()),
                             n1, r1, c1, n0, r0, c0))
    return out


# ---------------------------------------------------------------------------
# propensity and uplift


def fit_logistic(Z: np.ndarray, t: np.ndarray, ridge: float = 1e-6) -> tuple[float, np.ndarray]:
    """Maximum-likelihood logistic regression with a tiny ridge for separable data."""
    Z = np.asarray(Z, float)
    t = np.asarray(t, float)
    n, k = Z.shape

    def f(w):
        s = w[0] + Z @ w[1:]
        val = -(t * log_expit(s) + (1 - t) * log_expit(-s)).mean()
        r = t - expit(s)
        g = np.concatenate([[-r.mean()], -(Z.T @ r) / n])
        val += ridge * float(w[1:] @ w[1:])
        g[1:] += 2 * ridge * w[1:]
        return val, g

    res = minimize(f, np.zeros(k + 1), jac=True, method="L-BFGS-B",
                   options={"maxiter": 2000, "gtol": 1e-10, "ftol": 1e-15})
    return float(res.x[0]), res.x[1:]


@dataclass(frozen=True)
class PropensityResult:
    feature: str
    scores: np.ndarray
    overlap_share: float
    n_present: int
    n_absent: int
    intercept: float
    coef: np.ndarray
    covariates: tuple
    ate_ipw: Optional[float] = None
    ate_strat: Optional[float] = None


def overlap_share(scores, alpha: float = OVERLAP_ALPHA) -> float:
    s = np.asarray(scores, float)
    return float(np.mean((s >= alpha) & (s <= 1 - alpha)))


def propensity_covariates(feature: str, design: DesignMatrix) -> tuple[np.ndarray, tuple]:
    """All other feature columns plus dataset and scenario indicators (reference dropped)."""
    names = list(design.feature_names)
    j = names.index(feature)
    keep = [i for i in range(len(names)) if i != j]
    d_levels = sorted(set(design.dataset.tolist()))[1:]
    s_levels = sorted(set(design.scenario.tolist()))[1:]
    Z = np.column_stack([design.X[:, keep], one_hot(design.dataset, d_levels),
                         one_hot(design.scenario, s_levels)])
    cols = tuple([names[i] for i in keep] + [f"dataset={d}" for d in d_levels]
                 + [f"scenario={s}" for s in s_levels])
    return Z, cols


def propensity_fit(feature: str, design: DesignMatrix) -> PropensityResult:
    """Logistic propensity of one binary feature given everything else, clipped."""
    if feature not in design.feature_names:
        raise DiagnosticError(f"unknown feature {feature!r}")
    t = design.X[:, design.feature_names.index(feature)]
    if not np.all(np.isin(t, (0.0, 1.0))):
        raise DiagnosticError(f"{feature} is not binary")
    n1 = int(t.sum())
    if n1 == 0 or n1 == len(t):
        raise DiagnosticError(f"{feature}: only one treatment group present")
    Z, cols = propensity_covariates(feature, design)
    b0, b = fit_logistic(Z, t)
    scores = np.clip(expit(b0 + Z @ b), CLIP, 1 - CLIP)
    return PropensityResult(feature, scores, overlap_share(scores), n1, len(t) - n1, b0, b, cols)


def ate_ipw(outcome, treatment, scores) -> float:
    """Hajek-normalized inverse-probability-weighted contrast of group means."""
    o = np.asarray(outcome, float)
    t = np.asarray(treatment).astype(bool)
    s = np.asarray(scores, float)
    if t.all() or not t.any():
        raise DiagnosticError("both treatment groups must be non-empty")
    w1 = 1.0 / s[t]
    w0 = 1.0 / (1.0 - s[~t])
    for w, name in ((w1, "treated"), (w0, "control")):
        if w.max() / w.sum() > 0.99:
            warnings.warn(f"IPW: one {name} item carries >99% of its group's weight",
                          stacklevel=2)
    return float((w1 @ o[t]) / w1.sum() - (w0 @ o[~t]) / w0.sum())


def ate_stratified(outcome, treatment, scores, strata: int = 10) -> float:
    """Size-weighted within-stratum mean differences over propensity quantile bins.

    Strata lacking either group are dropped and the weights renormalized.
    """
    o = np.asarray(outcome, float)
    t = np.asarray(treatment).astype(bool)
    s = np.asarray(scores, float)
    edges = np.unique(np.quantile(s, np.linspace(0, 1, strata + 1)))
    idx = np.searchsorted(edges[1:-1], s, side="right")
    num = den = 0.0
    for b in np.unique(idx):
        m = idx == b
        m1, m0 = m & t, m & ~t
        if not m1.any() or not m0.any():
            continue
        nb = int(m.sum())
        num += nb * (o[m1].mean() - o[m0].mean())
        den += nb
    if den == 0:
        raise DiagnosticError("no stratum contains both groups")
    return float(num / den)


def propensity_uplift(feature: str, design: DesignMatrix, outcome,
                      threshold: float = OVERLAP_THRESHOLD, strata: int = 10) -> PropensityResult:
    """Propensity fit plus uplifts, reported only when overlap clears ``threshold``."""
    res = propensity_fit(feature, design)
    if res.overlap_share < threshold:
        return res
    t = design.X[:, design.feature_names.index(feature)]
    ipw = ate_ipw(outcome, t, res.scores)
    return PropensityResult(res.feature, res.scores, res.overlap_share, res.n_present,
                            res.n_absent, res.intercept, res.coef, res.covariates, ipw,
                            ate_stratified(outcome, t, res.scores, strata))


# ---------------------------------------------------------------------------
# CSV writers (fixed float formatting keeps the bundle byte-stable)


def _f(x) -> str:
    if x is None:
        return ""
    x = float(x)
    return "" if math.isnan(x) else f"{x:.10f}"


def _write(path, header: Sequence[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def write_separations(path, seps: Sequence[EcdfSeparation]) -> None:
    _write(path, ["feature", "ks", "delta_median", "n_present", "n_absent", "direction", "tie"],
           ([s.feature, _f(s.ks), _f(s.delta_median), str(s.n_present), str(s.n_absent),
             s.direction, str(s.tie).lower()] for s in seps))


def write_correlations(path, rows: Sequence[Correlation]) -> None:
    _write(path, ["feature", "spearman_rho", "spearman_p", "kendall_tau", "kendall_p",
                  "p_adjusted", "defined"],
           ([r.feature, _f(r.spearman), _f(r.spearman_p), _f(r.kendall), _f(r.kendall_p),
             _f(r.p_adjusted), str(r.defined).lower()] for r in rows))


def write_calibration(path, curves: dict) -> None:
    """``curves`` maps a stratum name to (points, ece)."""
    rows = []
    for stratum, (points, ece) in curves.items():
        for i, p in enumerate(points):
            rows.append([stratum, str(i), _f(p.mean_predicted), _f(p.observed), str(p.n),
                         _f(ece)])
    _write(path, ["stratum", "bin", "mean_predicted", "observed", "n", "ece"], rows)


def write_length_curves(path, curves: dict) -> None:
    rows = []
    for feature, bins in curves.items():
        for b in bins:
            rows.append([feature, str(b.index), _f(b.center), _f(b.lo), _f(b.hi),
                         str(b.n_present), _f(b.rate_present), _f(b.ci_present[0]),
                         _f(b.ci_present[1]), str(b.n_absent), _f(b.rate_absent),
                         _f(b.ci_absent[0]), _f(b.ci_absent[1])])
    _write(path, ["feature", "bin", "center", "lo", "hi", "n_present", "rate_present",
                  "ci_present_lo", "ci_present_hi", "n_absent", "rate_absent", "ci_absent_lo",
                  "ci_absent_hi"], rows)


def write_propensity(path, results: Sequence[PropensityResult]) -> None:
    _write(path, ["feature", "n_present", "n_absent", "overlap", "ate_ipw", "ate_strat"],
           ([r.feature, str(r.n_present), str(r.n_absent), _f(r.overlap_share),
             _f(r.ate_ipw), _f(r.ate_strat)] for r in results))
