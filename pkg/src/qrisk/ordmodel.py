"""Proportional-odds (cumulative logit) model for Safe < Borderline < Risky.

    logit P(Y <= k) = tau_k - eta,    eta = x @ beta + alpha[dataset] + gamma[scenario]

The cutpoints are parameterized as ``tau1 = tau0 + exp(delta)`` so the
ordering holds for every parameter value.  Fitting minimizes the mean
negative log-likelihood plus ``lambda_reg * ||beta||^2`` with full-batch
Adam and early stopping on a validation split.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit
from scipy.stats import norm

log = logging.getLogger(__name__)

FEATURE_ONLY, FULL = "FeatureOnly", "Full"
SPECS = (FEATURE_ONLY, FULL)


class ModelError(ValueError):
    """Degenerate data, bad specification or dimension mismatch."""


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class DesignMatrix:
    """Feature rows, group memberships and ordinal outcomes.

    ``dataset`` and ``scenario`` hold one level name per row; indicator
    columns are built at fit time so the reference level can be dropped.
    """
    X: np.ndarray
    feature_names: tuple
    dataset: np.ndarray
    scenario: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2:
            raise ModelError("X must be two-dimensional")
        n = X.shape[0]
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "dataset", np.asarray(self.dataset, dtype=str).reshape(n))
        object.__setattr__(self, "scenario", np.asarray(self.scenario, dtype=str).reshape(n))
        y = np.asarray(self.y)
        if y.shape != (n,):
            raise ModelError("y must have one entry per row")
        if n and (not np.all(np.isin(y, (0, 1, 2)))):
            raise ModelError("outcomes must be 0, 1 or 2")
        object.__setattr__(self, "y", y.astype(int))
        if X.shape[1] != len(self.feature_names):
            raise ModelError("feature_names do not match X columns")
        if not np.all(np.isfinite(X)):
            raise ModelError("X contains missing or non-finite cells")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def subset(self, mask) -> "DesignMatrix":
        return DesignMatrix(self.X[mask], self.feature_names, self.dataset[mask],
                            self.scenario[mask], self.y[mask])


def one_hot(values: np.ndarray, levels: Sequence[str]) -> np.ndarray:
    """Indicator columns for ``levels``; values outside ``levels`` are all-zero rows."""
    values = np.asarray(values, dtype=str)
    return (values[:, None] == np.asarray(levels, dtype=str)[None, :]).astype(float)


# ---------------------------------------------------------------------------
# likelihood


def softplus(x):
    return np.logaddexp(0.0, x)


def _row_terms(eta, tau0, delta, y):
    """Per-row loss and derivatives with respect to a = tau0 - eta and b = tau1 - eta."""
    gap = math.exp(delta)
    a = tau0 - eta
    b = a + gap
    loss = np.empty_like(eta)
    ga = np.zeros_like(eta)
    gb = np.zeros_like(eta)
    m0, m1, m2 = y == 0, y == 1, y == 2
    loss[m0] = softplus(-a[m0])
    ga[m0] = -expit(-a[m0])
    loss[m2] = softplus(b[m2])
    gb[m2] = expit(b[m2])
    a1, b1 = a[m1], b[m1]
    # -log(sigma(b) - sigma(a)) without cancellation
    loss[m1] = -b1 + softplus(b1) + softplus(a1) - np.log(-np.expm1(-gap))
    inv = 1.0 / math.expm1(gap)
    ga[m1] = expit(a1) + inv
    gb[m1] = -expit(-b1) - inv
    return loss, ga, gb, gap


class _Layout:
    """Parameter vector layout: [beta | alpha | gamma | tau0 | delta]."""

    def __init__(self, p: int, nd: int, ns: int):
        self.p, self.nd, self.ns = p, nd, ns
        self.size = p + nd + ns + 2

    def split(self, theta):
        p, nd, ns = self.p, self.nd, self.ns
        return (theta[:p], theta[p:p + nd], theta[p + nd:p + nd + ns],
                theta[p + nd + ns], theta[p + nd + ns + 1])


def _eta(theta, lay, X, A, G):
    beta, alpha, gamma, _, _ = lay.split(theta)
    eta = X @ beta
    if lay.nd:
        eta = eta + A @ alpha
    if lay.ns:
        eta = eta + G @ gamma
    return eta


def nll_and_grad(theta, lay, X, A, G, y, lambda_reg: float = 0.0, reduce: str = "mean"):
    """Objective and its analytic gradient in the flat parameterization."""
    beta, _, _, tau0, delta = lay.split(theta)
    eta = _eta(theta, lay, X, A, G)
    loss, ga, gb, gap = _row_terms(eta, tau0, delta, y)
    scale = 1.0 / len(y) if reduce == "mean" else 1.0
    d_eta = -(ga + gb) * scale
    grad = np.empty(lay.size)
    p, nd, ns = lay.p, lay.nd, lay.ns
    grad[:p] = X.T @ d_eta + 2.0 * lambda_reg * beta
    grad[p:p + nd] = A.T @ d_eta if nd else 0.0
    grad[p + nd:p + nd + ns] = G.T @ d_eta if ns else 0.0
    grad[-2] = (ga.sum() + gb.sum()) * scale
    grad[-1] = gb.sum() * gap * scale
    value = loss.sum() * scale + lambda_reg * float(beta @ beta)
    return value, grad


# ---------------------------------------------------------------------------
# model


@dataclass(frozen=True)
class ClassProbabilities:
    p_safe: float
    p_borderline: float
    p_risky: float


def class_probabilities(eta, tau0: float, tau1: float) -> np.ndarray:
    """(n, 3) array of P(Safe), P(Borderline), P(Risky)."""
    eta = np.asarray(eta, dtype=float)
    c0 = expit(tau0 - eta)
    c1 = expit(tau1 - eta)
    # middle class from the upper tails keeps precision when both cdfs are near 1
    p1 = expit(eta - tau0) - expit(eta - tau1)
    p2 = expit(eta - tau1)
    p1 = np.where(c1 < 0.5, c1 - c0, p1)
    return np.stack([c0, p1, p2], axis=-1)


@dataclass(frozen=True)
class OrdinalModel:
    spec: str
    feature_names: tuple
    beta: np.ndarray
    dataset_levels: tuple = ()
    alpha: np.ndarray = field(default_factory=lambda: np.zeros(0))
    scenario_levels: tuple = ()
    gamma: np.ndarray = field(default_factory=lambda: np.zeros(0))
    tau0: float = 0.0
    tau1: float = 1.0
    lambda_reg: float = 1e-4
    seed: int = 0
    converged: bool = True
    iterations: int = 0
    numeric_scaling: Optional[dict] = None

    def __post_init__(self):
        if self.spec not in SPECS:
            raise ModelError(f"spec must be one of {SPECS}")
        if not self.tau0 < self.tau1:
            raise ModelError("cutpoints must satisfy tau0 < tau1")
        beta = np.asarray(self.beta, dtype=float)
        alpha = np.asarray(self.alpha, dtype=float)
        gamma = np.asarray(self.gamma, dtype=float)
        if beta.shape != (len(self.feature_names),):
            raise ModelError("beta does not match feature_names")
        if self.spec == FEATURE_ONLY and (alpha.size or gamma.size):
            raise ModelError("FeatureOnly models carry no fixed effects")
        # levels list every level; the first is the dropped reference
        if alpha.size != max(len(self.dataset_levels) - 1, 0):
            raise ModelError("alpha must have one entry per non-reference dataset level")
        if gamma.size != max(len(self.scenario_levels) - 1, 0):
            raise ModelError("gamma must have one entry per non-reference scenario level")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "dataset_levels", tuple(self.dataset_levels))
        object.__setattr__(self, "scenario_levels", tuple(self.scenario_levels))

    @property
    def delta(self) -> float:
        return math.log(self.tau1 - self.tau0)

    def theta(self) -> np.ndarray:
        return np.concatenate([self.beta, self.alpha, self.gamma, [self.tau0, self.delta]])

    def layout(self) -> _Layout:
        return _Layout(len(self.beta), self.alpha.size, self.gamma.size)

    def indicators(self, dataset, scenario) -> tuple[np.ndarray, np.ndarray]:
        n = len(dataset)
        A = one_hot(dataset, self.dataset_levels[1:]) if self.alpha.size else np.zeros((n, 0))
        G = one_hot(scenario, self.scenario_levels[1:]) if self.gamma.size else np.zeros((n, 0))
        return A, G

    def linear_predictor(self, X, dataset=None, scenario=None) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != len(self.beta):
            raise ModelError(f"expected {len(self.beta)} feature columns, got {X.shape[1]}")
        eta = X @ self.beta
        if self.spec == FULL:
            n = X.shape[0]
            ds = np.broadcast_to(np.asarray(dataset if dataset is not None else "", str), (n,))
            sc = np.broadcast_to(np.asarray(scenario if scenario is not None else "", str), (n,))
            A, G = self.indicators(ds, sc)
            eta = eta + A @ self.alpha + G @ self.gamma
        return eta

    def predict_proba(self, X, dataset=None, scenario=None) -> np.ndarray:
        return class_probabilities(self.linear_predictor(X, dataset, scenario),
                                   self.tau0, self.tau1)

    def predict(self, row, dataset=None, scenario=None) -> ClassProbabilities:
        row = np.asarray(row, dtype=float)
        if row.ndim != 1:
            raise ModelError("predict expects a single feature row")
        p = self.predict_proba(row[None, :], dataset, scenario)[0]
        return ClassProbabilities(float(p[0]), float(p[1]), float(p[2]))

    def to_json(self) -> dict:
        return {"spec": self.spec, "feature_names": list(self.feature_names),
                "beta": self.beta.tolist(), "dataset_levels": list(self.dataset_levels),
                "alpha": self.alpha.tolist(), "scenario_levels": list(self.scenario_levels),
                "gamma": self.gamma.tolist(), "tau0": self.tau0, "tau1": self.tau1,
                "lambda_reg": self.lambda_reg, "seed": self.seed, "converged": self.converged,
                "iterations": self.iterations, "numeric_scaling": self.numeric_scaling}

    @classmethod
    def from_json(cls, obj: dict) -> "OrdinalModel":
        return cls(obj["spec"], tuple(obj["feature_names"]), np.array(obj["beta"], float),
                   tuple(obj["dataset_levels"]), np.array(obj["alpha"], float),
                   tuple(obj["scenario_levels"]), np.array(obj["gamma"], float),
                   float(obj["tau0"]), float(obj["tau1"]), float(obj["lambda_reg"]),
                   int(obj.get("seed", 0)), bool(obj.get("converged", True)),
                   int(obj.get("iterations", 0)), obj.get("numeric_scaling"))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_json(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "OrdinalModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def _matrices(model: OrdinalModel, data: DesignMatrix):
    if data.X.shape[1] != len(model.beta):
        raise ModelError(f"model has {len(model.beta)} features, data has {data.X.shape[1]}")
    A, G = model.indicators(data.dataset, data.scenario)
    return model.layout(), data.X, A, G


def nll(model: OrdinalModel, data: DesignMatrix) -> float:
    """Mean negative log-likelihood plus the ridge penalty on beta."""
    lay, X, A, G = _matrices(model, data)
    return nll_and_grad(model.theta(), lay, X, A, G, data.y, model.lambda_reg)[0]


# ---------------------------------------------------------------------------
# fitting


@dataclass(frozen=True)
class FitConfig:
    lambda_reg: float = 1e-4
    learning_rate: float = 0.05
    max_iter: int = 10_000
    eval_every: int = 10
    patience: int = 20
    tol: float = 1e-7
    val_fraction: float = 0.1

    @classmethod
    def from_dict(cls, d: dict) -> "FitConfig":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


def _levels(values) -> tuple:
    return tuple(sorted(set(np.asarray(values, dtype=str).tolist())))


def split_validation(data: DesignMatrix, fraction: float, seed: int):
    """Seeded shuffle split into (train, validation)."""
    idx = np.random.default_rng(seed).permutation(data.n)
    n_val = max(1, int(round(fraction * data.n)))
    val = np.zeros(data.n, bool)
    val[idx[:n_val]] = True
    return data.subset(~val), data.subset(val)


def _init_cutpoints(y: np.ndarray) -> tuple[float, float]:
    n = len(y)
    # smoothed cumulative frequencies keep empty classes finite
    c0 = (np.sum(y == 0) + 0.5) / (n + 1.5)
    c1 = (np.sum(y <= 1) + 1.0) / (n + 1.5)
    t0 = math.log(c0 / (1 - c0))
    t1 = math.log(c1 / (1 - c1))
    return t0, math.log(max(t1 - t0, 1e-2))


def fit(data: DesignMatrix, spec: str = FULL, lambda_reg: float | None = None, seed: int = 0,
        validation: DesignMatrix | None = None, config: FitConfig = FitConfig(),
        numeric_scaling: dict | None = None) -> OrdinalModel:
    """Minimize the penalized NLL with Adam, keeping the best validation iterate."""
    if spec not in SPECS:
        raise ModelError(f"spec must be one of {SPECS}")
    lam = config.lambda_reg if lambda_reg is None else lambda_reg
    if lam < 0:
        raise ModelError("lambda_reg must be non-negative")
    if len(np.unique(data.y)) < 2:
        raise ModelError("need at least two outcome classes to fit")
    if validation is None:
        train, validation = split_validation(data, config.val_fraction, seed)
        if len(np.unique(train.y)) < 2:
            train = data
    else:
        train = data
    if spec == FULL:
        d_levels, s_levels = _levels(train.dataset), _levels(train.scenario)
    else:
        d_levels, s_levels = (), ()
    lay = _Layout(train.X.shape[1], max(len(d_levels) - 1, 0), max(len(s_levels) - 1, 0))

    def mats(d: DesignMatrix):
        A = one_hot(d.dataset, d_levels[1:]) if lay.nd else np.zeros((d.n, 0))
        G = one_hot(d.scenario, s_levels[1:]) if lay.ns else np.zeros((d.n, 0))
        return d.X, A, G

    Xt, At, Gt = mats(train)
    Xv, Av, Gv = mats(validation)
    # Centering the columns decorrelates slopes from the cutpoints; the
    # model is unchanged and the shift is folded back into tau at the end.
    mx, ma, mg = Xt.mean(axis=0), At.mean(axis=0), Gt.mean(axis=0)
    Xt, At, Gt = Xt - mx, At - ma, Gt - mg
    Xv, Av, Gv = Xv - mx, Av - ma, Gv - mg
    theta = np.zeros(lay.size)
    theta[-2], theta[-1] = _init_cutpoints(train.y)

    b1, b2, eps = 0.9, 0.999, 1e-8
    m = np.zeros(lay.size)
    v = np.zeros(lay.size)
    best = theta.copy()
    best_val = nll_and_grad(theta, lay, Xv, Av, Gv, validation.y)[0]
    stale, converged, it = 0, False, 0
    for it in range(1, config.max_iter + 1):
        _, g = nll_and_grad(theta, lay, Xt, At, Gt, train.y, lam)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1 ** it)
        vhat = v / (1 - b2 ** it)
        theta = theta - config.learning_rate * mhat / (np.sqrt(vhat) + eps)
        if it % config.eval_every == 0:
            val = nll_and_grad(theta, lay, Xv, Av, Gv, validation.y)[0]
            if val < best_val - config.tol:
                best_val, best, stale = val, theta.copy(), 0
            else:
                stale += 1
                if stale >= config.patience:
                    # validation has stopped improving; keep the current
                    # iterate, which sits closer to the training optimum
                    converged = True
                    best = theta
                    break
    if not converged:
        warnings.warn(f"no early stop within {config.max_iter} iterations; "
                      "returning best validation iterate", ConvergenceWarning, stacklevel=2)
    beta, alpha, gamma, tau0, delta = lay.split(best)
    tau0 = tau0 + mx @ beta + ma @ alpha + mg @ gamma
    return OrdinalModel(spec, train.feature_names, beta.copy(), d_levels, alpha.copy(),
                        s_levels, gamma.copy(), float(tau0), float(tau0 + math.exp(delta)),
                        lam, seed, converged, it, numeric_scaling)


# ---------------------------------------------------------------------------
# inference


def numerical_hessian(model: OrdinalModel, data: DesignMatrix, step: float = 1e-5) -> np.ndarray:
    """Central differences of the analytic gradient of the unpenalized summed NLL."""
    lay, X, A, G = _matrices(model, data)
    theta = model.theta()
    H = np.empty((lay.size, lay.size))
    for j in range(lay.size):
        e = np.zeros(lay.size)
        e[j] = step
        gp = nll_and_grad(theta + e, lay, X, A, G, data.y, 0.0, reduce="sum")[1]
        gm = nll_and_grad(theta - e, lay, X, A, G, data.y, 0.0, reduce="sum")[1]
        H[:, j] = (gp - gm) / (2 * step)
    return 0.5 * (H + H.T)


def standard_errors(H: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """sqrt(diag(H^-1)); coordinates touched by a null direction of H get NaN."""
    w, V = np.linalg.eigh(H)
    scale = max(abs(w).max(), 1.0)
    null = w <= rtol * scale
    var = (V[:, ~null] ** 2) @ (1.0 / w[~null])
    se = np.sqrt(var)
    if null.any():
        touched = np.any(np.abs(V[:, null]) > 1e-6, axis=1)
        se[touched] = np.nan
    return se


def odds_ratio(coef):
    return np.exp(coef)


@dataclass(frozen=True)
class CoefRow:
    term: str
    kind: str
    coef: float
    se: float
    z: float
    p: float
    odds_ratio: float


def coefficient_row(term: str, kind: str, coef: float, se: float) -> CoefRow:
    if math.isfinite(se) and se > 0:
        z = coef / se
        p = float(2 * norm.sf(abs(z)))
    elif coef == 0 and math.isfinite(se):
        z, p = 0.0, 1.0
    else:
        z, p = float("nan"), float("nan")
    return CoefRow(term, kind, float(coef), float(se), float(z), p, float(odds_ratio(coef)))


def report_table(model: OrdinalModel, data: DesignMatrix) -> list[CoefRow]:
    """Coefficient, SE, z, two-sided p and odds ratio for every linear term."""
    se = standard_errors(numerical_hessian(model, data))
    rows = []
    k = 0
    for name, c in zip(model.feature_names, model.beta):
        rows.append(coefficient_row(name, "feature", c, se[k]))
        k += 1
    for name, c in zip(model.dataset_levels[1:], model.alpha):
        rows.append(coefficient_row(name, "dataset", c, se[k]))
        k += 1
    for name, c in zip(model.scenario_levels[1:], model.gamma):
        rows.append(coefficient_row(name, "scenario", c, se[k]))
        k += 1
    return rows


def _fmt(x: float) -> str:
    return "" if not math.isfinite(x) else f"{x:.6f}"


def save_table_csv(rows: Sequence[CoefRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("term,kind,coef,se,z,p,odds_ratio\n")
        for r in rows:
            fh.write(",".join([r.term, r.kind, _fmt(r.coef), _fmt(r.se), _fmt(r.z),
                               _fmt(r.p), _fmt(r.odds_ratio)]) + "\n")


# ---------------------------------------------------------------------------
# leave-one-dataset-out


@dataclass(frozen=True)
class LodoResult:
    feature_names: tuple
    holds: dict          # held-out dataset -> beta fitted without it
    mean: np.ndarray
    std: np.ndarray
    pooled: np.ndarray
    skipped: tuple = ()


def lodo(data: DesignMatrix, spec: str = FULL, lambda_reg: float | None = None, seed: int = 0,
         config: FitConfig = FitConfig()) -> LodoResult:
    """Refit once per held-out dataset and summarize the feature coefficients."""
    levels = _levels(data.dataset)
    if len(levels) < 2:
        raise ModelError("leave-one-dataset-out needs at least two datasets")
    pooled = fit(data, spec, lambda_reg, seed, config=config).beta
    holds, skipped = {}, []
    for level in levels:
        rest = data.subset(data.dataset != level)
        if len(np.unique(rest.y)) < 2:
            warnings.warn(f"holding out {level!r} leaves a single outcome class; skipped",
                          stacklevel=2)
            skipped.append(level)
            continue
        holds[level] = fit(rest, spec, lambda_reg, seed, config=config).beta
    if not holds:
        raise ModelError("every hold was degenerate")
    B = np.vstack(list(holds.values()))
    std = B.std(axis=0, ddof=1) if len(B) > 1 else np.zeros(B.shape[1])
    return LodoResult(data.feature_names, holds, B.mean(axis=0), std, pooled, tuple(skipped))


def save_lodo_csv(res: LodoResult, path) -> None:
    held = list(res.holds)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(["feature", "pooled", "mean", "std"]
                          + [f"beta_without_{h}" for h in held]) + "\n")
        for j, name in enumerate(res.feature_names):
            vals = [res.pooled[j], res.mean[j], res.std[j]] + [res.holds[h][j] for h in held]
            fh.write(",".join([name] + [_fmt(float(v)) for v in vals]) + "\n")
