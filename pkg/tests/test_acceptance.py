"""Acceptance suite: one test per headline criterion, each with its runtime budget.

Every test records a ``criterion`` property; the terminal summary prints one
PASS/FAIL line per criterion (see conftest.py).
"""

import filecmp
import math
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest
from scipy.special import expit

from qrisk import diagnostics as dx
from qrisk.corpus import RiskCategory, categorize
from qrisk.features import BINARY_FEATURES, LlmJudge, detector_accuracy, load_goldens
from qrisk.llmio import Transcript, mock_provider
from qrisk.ordmodel import (DesignMatrix, OrdinalModel, _Layout, fit, lodo, nll_and_grad,
                            one_hot, report_table)
from qrisk.perturb import SimilarityConfig
from qrisk.pipeline import STAGES, load_config, run_all, run_stage
from qrisk.proxy import HALLUCINATION_THRESHOLD, ProxyScore, ProxyWeights, roc_auc

import oracles

TRANSCRIPT = Path(__file__).parent / "fixtures" / "detector_transcript"


@pytest.fixture
def criterion(record_property):
    @contextmanager
    def run(name, budget):
        record_property("criterion", name)
        t0 = time.perf_counter()
        yield
        elapsed = time.perf_counter() - t0
        record_property("elapsed", f"{elapsed:.2f}s of {budget:g}s")
        assert elapsed < budget, f"{name}: {elapsed:.2f}s exceeds the {budget}s budget"
    return run


def test_proxy_constants(criterion):
    with criterion("proxy constants and tally mapping", 1.0):
        assert ProxyWeights().as_tuple() == (0.6, 0.3, 0.1)
        sim = SimilarityConfig()
        assert (sim.lambda_bi, sim.lambda_cross, sim.threshold, sim.max_accepted) == \
            (0.6, 0.4, 0.85, 6)
        assert HALLUCINATION_THRESHOLD == 0.5
        assert not ProxyScore.combine(0, 1.0, 1.0).hallucinated       # 0.4
        assert ProxyScore.combine(1, 0.0, 0.0).hallucinated           # 0.6
        expected = ["Safe"] + ["Borderline"] * 3 + ["Risky"] * 3
        assert [categorize(t, 6).label for t in range(7)] == expected


def test_odds_ratio_consistency(criterion):
    with criterion("odds ratio = exp(coef) to 3 decimals", 1.0):
        rng = np.random.default_rng(0)
        X = rng.integers(0, 2, (200, 2)).astype(float)
        data = DesignMatrix(X, ["LackOfSpecificity", "Answerability"], ["d"] * 200,
                            ["Abstractive"] * 200, rng.integers(0, 3, 200))
        model = OrdinalModel("FeatureOnly", data.feature_names, np.array([0.868, -1.106]),
                             tau0=-1.0, tau1=1.0)
        rows = report_table(model, data)
        assert [round(r.odds_ratio, 3) for r in rows] == [2.382, 0.331]
        assert all(r.odds_ratio == math.exp(r.coef) for r in rows)


def _fixture_matrices(rng, n=60, p=5):
    X = rng.normal(size=(n, p))
    A = one_hot(rng.choice(["a", "b", "c"], n), ["b", "c"])
    G = one_hot(rng.choice(["x", "y", "z"], n), ["y", "z"])
    return X, A, G, rng.integers(0, 3, n)


def test_gradient_fidelity(criterion):
    with criterion("analytic gradient vs central differences", 10.0):
        rng = np.random.default_rng(1)
        lay = _Layout(5, 2, 2)
        worst = 0.0
        for _ in range(100):
            X, A, G, y = _fixture_matrices(rng)
            theta = np.concatenate([rng.normal(0, 1, 9), [rng.normal(-0.5, 1),
                                                          rng.normal(0, 0.7)]])
            lam = float(rng.choice([0.0, 1e-4, 0.1]))
            _, g = nll_and_grad(theta, lay, X, A, G, y, lam)
            h = 1e-6
            fd = np.empty_like(theta)
            for j in range(theta.size):
                e = np.zeros_like(theta)
                e[j] = h
                fp = nll_and_grad(theta + e, lay, X, A, G, y, lam)[0]
                fm = nll_and_grad(theta - e, lay, X, A, G, y, lam)[0]
                fd[j] = (fp - fm) / (2 * h)
            rel = np.linalg.norm(g - fd) / max(np.linalg.norm(g), np.linalg.norm(fd))
            worst = max(worst, rel)
        assert worst <= 1e-5, worst


def test_probability_normalization(criterion):
    with criterion("class probabilities sum to one", 5.0):
        rng = np.random.default_rng(2)
        worst = 0.0
        for _ in range(100):
            tau0 = rng.normal(0, 3)
            model = OrdinalModel("Full", [f"f{i}" for i in range(4)], rng.normal(0, 3, 4),
                                 ("a", "b"), rng.normal(0, 2, 1), ("x", "y"),
                                 rng.normal(0, 2, 1), tau0, tau0 + math.exp(rng.normal(0, 2)))
            rows = rng.normal(0, 5, (100, 4)) * rng.choice([1, 10], (100, 1))
            p = model.predict_proba(rows, rng.choice(["a", "b"], 100), rng.choice(["x", "y"],
                                                                                  100))
            assert np.all((p >= 0) & (p <= 1))
            worst = max(worst, float(np.abs(p.sum(axis=1) - 1).max()))
        assert worst <= 1e-12, worst


BETA_STAR = np.array([0.8, -0.9, 0.5, -0.5, 0.4, -0.4, 0.3, -0.3, 0.6, -0.6, 0.35, -0.35, 0.45,
                      -0.45, 0.25, -0.25, 0.7, 0.3, -0.3, 0.2, -0.2])
TAU_STAR = (-1.0, 1.0)


def generate(rng, n, datasets=("d0",), offsets=None):
    """Draw from the proportional-odds model: 17 binary columns then 4 standardized ones."""
    prevalence = np.linspace(0.15, 0.6, 17)
    X = np.column_stack([(rng.uniform(size=(n, 17)) < prevalence).astype(float),
                         rng.normal(size=(n, 4))])
    ds = rng.choice(datasets, n)
    eta = X @ BETA_STAR + (np.array([offsets[d] for d in ds]) if offsets else 0.0)
    u = rng.uniform(size=n)
    y = (u > expit(TAU_STAR[0] - eta)).astype(int) + (u > expit(TAU_STAR[1] - eta)).astype(int)
    return DesignMatrix(X, [f"f{i}" for i in range(21)], ds, ["Abstractive"] * n, y)


def test_synthetic_recovery(criterion):
    with criterion("coefficient recovery and LODO sign stability", 120.0):
        rng = np.random.default_rng(0)
        train, val = generate(rng, 20_000), generate(rng, 2_000)
        model = fit(train, "FeatureOnly", seed=0, validation=val)
        err = np.abs(model.beta - BETA_STAR)
        assert err.max() <= 0.1, err.max()
        assert np.all(np.sign(model.beta) == np.sign(BETA_STAR))
        assert abs(model.tau0 - TAU_STAR[0]) < 0.1 and abs(model.tau1 - TAU_STAR[1]) < 0.1

        multi = generate(rng, 20_000, ("d0", "d1", "d2"), {"d0": 0.0, "d1": 0.4, "d2": -0.3})
        res = lodo(multi, "Full", seed=0)
        assert len(res.holds) == 3
        for held, beta in res.holds.items():
            assert np.all(np.sign(beta) == np.sign(BETA_STAR)), held


def test_diagnostic_oracles(criterion):
    with criterion("KS, median shift, ECE, Spearman, Kendall, AUC vs brute force", 30.0):
        for seed in range(50):
            rng = np.random.default_rng(100 + seed)
            n = int(rng.integers(10, 201))
            pred = np.round(rng.uniform(size=n), 2)
            t = rng.integers(0, 2, n)
            t[:2] = [0, 1]
            present, absent = list(pred[t == 1]), list(pred[t == 0])
            sep = dx.ecdf_separation(pred, t)
            assert abs(sep.ks - oracles.ks(present, absent)) <= 1e-12
            assert abs(sep.delta_median - (oracles.median(present) - oracles.median(absent))
                       ) <= 1e-12
            o = (rng.uniform(size=n) < pred).astype(float)
            assert abs(dx.reliability(pred, o, 10)[1] - oracles.ece(list(pred), list(o), 10)
                       ) <= 1e-12
            x = list(rng.integers(0, 8, n).astype(float))
            y = list(rng.integers(0, 3, n).astype(float))
            c = dx.rank_correlation(x, y)
            assert abs(c.spearman - oracles.spearman(x, y)) <= 1e-12
            assert abs(c.kendall - oracles.kendall_b(x, y)) <= 1e-12
            assert abs(roc_auc(pred, t) - oracles.auc(list(pred), list(t))) <= 1e-12


def test_uplift_degenerate_equivalence_and_gate(criterion):
    with criterion("IPW/stratified reduce to mean difference; overlap gate", 10.0):
        rng = np.random.default_rng(3)
        n = 500
        o, t = rng.uniform(size=n), rng.integers(0, 2, n)
        naive = o[t == 1].mean() - o[t == 0].mean()
        half = np.full(n, 0.5)
        assert abs(dx.ate_ipw(o, t, half) - naive) <= 1e-12
        assert abs(dx.ate_stratified(o, t, half) - naive) <= 1e-12

        n = 3000
        z = rng.integers(0, 2, n)
        near = np.where(rng.uniform(size=n) < 0.995, z, 1 - z)
        free = rng.integers(0, 2, n)
        X = np.column_stack([near, free, z, rng.normal(size=n)]).astype(float)
        design = DesignMatrix(X, ["near", "free", "z", "w"], ["d"] * n, ["Abstractive"] * n,
                              np.zeros(n, int))
        outcome = rng.uniform(size=n)
        gated = dx.propensity_uplift("near", design, outcome)
        assert gated.overlap_share < 0.45 and gated.ate_ipw is None and gated.ate_strat is None
        shown = dx.propensity_uplift("free", design, outcome)
        assert shown.overlap_share == 1.0
        assert shown.ate_ipw is not None and shown.ate_strat is not None


def test_directional_smoke(criterion, tmp_path):
    with criterion("bundled corpus end to end: coefficient signs", 120.0):
        cfg = load_config()
        for stage in ("extract", "perturb", "answer", "score", "fit"):
            run_stage(stage, cfg, tmp_path)
        model = OrdinalModel.load(tmp_path / "model.json")
        beta = dict(zip(model.feature_names, model.beta))
        assert beta["LackOfSpecificity"] > 0
        assert beta["ClauseComplexity"] > 0
        assert beta["Answerability"] < 0
        assert beta["IntentionGrounding"] < 0


def test_determinism(criterion, tmp_path):
    with criterion("byte-identical report bundles across runs", 180.0):
        transcripts = tmp_path / "transcripts"
        first = load_config(overrides={"transcript": {"dir": str(transcripts),
                                                      "mode": "record"}})
        run_all(first, tmp_path / "a")
        warm = load_config(overrides={"transcript": {"dir": str(transcripts),
                                                     "mode": "replay-strict"}})
        run_all(warm, tmp_path / "b")
        a, b = tmp_path / "a" / "report", tmp_path / "b" / "report"
        names = sorted(p.name for p in a.iterdir())
        assert names == sorted(p.name for p in b.iterdir())
        assert "lodo.csv" in names and len(names) == 8
        _, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
        assert mismatch == [] and errors == []


def test_detector_goldens(criterion):
    with criterion("detector goldens under LlmJudge with recorded transcript", 5.0):
        cases = load_goldens()
        assert len(cases) >= 34
        assert {c["feature"] for c in cases} == set(BINARY_FEATURES)
        judge = LlmJudge(mock_provider(transcript=Transcript(TRANSCRIPT, "replay-strict")))
        report = detector_accuracy(judge, cases)
        assert report.misses == [], [c["id"] for c in report.misses]
