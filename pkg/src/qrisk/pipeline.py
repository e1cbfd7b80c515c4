"""Resumable stages from corpus to report bundle, plus inference-time triage.

Stages and their artifacts (all under one working directory):

    extract   -> features.jsonl
    perturb   -> neighborhoods.jsonl
    answer    -> answers.jsonl
    score     -> labels.jsonl (and scores.jsonl)
    fit       -> model.json (and coefficients.csv)
    diagnose  -> report/

Each stage writes ``<stage>.meta.json`` recording the hashes of its inputs,
its configuration section and, for the seed-dependent stages, the seed.  A
stage whose recorded hashes still match is skipped.
"""

from __future__ import annotations

import copy
import hashlib
import json
import logging
import shutil
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import diagnostics as dx
from .corpus import Corpus, CorpusError, Query, RiskCategory, Scenario, load_corpus, \
    load_labels, read_jsonl, save_labels, write_jsonl
from .features import (ALL_FEATURES, BINARY_FEATURES, NUMERIC_FEATURES, FeatureVector,
                       LlmJudge, NumericScaler, RuleBased, extract_features, load_features,
                       save_features)
from .features.templates import ANSWER_TEMPLATE, render
from .llmio import ProviderConfig, Transcript, canonical_json, http_provider
from .ordmodel import (DesignMatrix, FitConfig, OrdinalModel, fit, lodo, report_table,
                       save_lodo_csv, save_table_csv)
from .perturb import SimilarityConfig, build_neighborhood, load_neighborhoods, \
    save_neighborhoods
from .proxy import ProxyScore, ProxyWeights, label_from_scores, score_paraphrase
from .synthetic import bundled_corpus_path, offline_providers

log = logging.getLogger(__name__)

STAGES = ("extract", "perturb", "answer", "score", "fit", "diagnose")
SEEDED = {"fit", "diagnose"}
ROLES = ("paraphraser", "answerer", "judge", "bi", "cross")


class PipelineError(ValueError):
    """Missing upstream artifact, stale resume state or bad configuration."""


DEFAULT_CONFIG = {
    "corpus": None,
    "seed": 0,
    "providers": {role: "mock" for role in ROLES},
    "endpoints": {},
    "transcript": {"dir": "transcripts", "mode": None},
    "features": {"backend": "rule", "detector": "mock"},
    "perturb": {"lambda_bi": 0.6, "lambda_cross": 0.4, "threshold": 0.85, "max_accepted": 6,
                "budget": None},
    "proxy": {"w_llm": 0.6, "w_fuzz": 0.3, "w_bleu": 0.1},
    "fit": {"spec": "Full", "lambda_reg": 1e-4, "learning_rate": 0.05, "max_iter": 10_000,
            "eval_every": 10, "patience": 20, "val_fraction": 0.1},
    "diagnose": {"ece_bins": 10, "length_bins": 30, "min_bin": 50, "overlap_threshold": 0.45,
                 "strata": 10, "outcome": "observed", "lodo": True},
    "triage": {"threshold": 0.5, "clarify_if_present": ["LackOfSpecificity"],
               "clarify_if_absent": ["IntentionGrounding"]},
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in out:
            raise PipelineError(f"unknown config key {k!r}")
        if isinstance(out[k], dict) and isinstance(v, dict) and k not in ("endpoints",):
            for kk in v:
                if out[k] and kk not in out[k]:
                    raise PipelineError(f"unknown config key {k}.{kk}")
            out[k] = {**out[k], **v}
        else:
            out[k] = v
    return out


def load_config(path=None, overrides: Optional[dict] = None) -> dict:
    """Read a TOML or JSON config over the defaults; relative paths resolve against it."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        path = Path(path)
        raw = path.read_bytes()
        if path.suffix.lower() == ".json":
            data = json.loads(raw)
        else:
            try:
                import tomllib
            except ModuleNotFoundError:      # Python < 3.11
                import tomli as tomllib
            try:
                data = tomllib.loads(raw.decode("utf-8"))
            except tomllib.TOMLDecodeError as exc:
                raise PipelineError(f"{path}: {exc}") from None
        cfg = _merge(cfg, data)
        if cfg["corpus"] and not Path(cfg["corpus"]).is_absolute():
            cfg["corpus"] = str((path.parent / cfg["corpus"]).resolve())
    if overrides:
        cfg = _merge(cfg, overrides)
    if cfg["transcript"]["mode"] not in (None, "record", "replay-strict"):
        raise PipelineError("transcript.mode must be record or replay-strict")
    if cfg["fit"]["spec"] not in ("FeatureOnly", "Full"):
        raise PipelineError("fit.spec must be FeatureOnly or Full")
    return cfg


# ---------------------------------------------------------------------------
# hashing and meta files


def sha256_file(path) -> str:
    path = Path(path)
    h = hashlib.sha256()
    if path.is_dir():
        for f in sorted(p for p in path.rglob("*") if p.is_file()):
            h.update(f.relative_to(path).as_posix().encode("utf-8") + b"\0")
            h.update(f.read_bytes())
    else:
        h.update(path.read_bytes())
    return h.hexdigest()


def _hash_obj(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


@dataclass
class Workspace:
    root: Path
    cfg: dict
    resume: bool = False
    _corpus: Optional[Corpus] = field(default=None, repr=False)
    _providers: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.root = Path(self.root)
        self.root.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        return self.root / name

    @property
    def corpus_path(self) -> Path:
        return Path(self.cfg["corpus"]) if self.cfg["corpus"] else Path(str(bundled_corpus_path()))

    @property
    def corpus(self) -> Corpus:
        if self._corpus is None:
            self._corpus = load_corpus(self.corpus_path)
        return self._corpus

    def transcript(self) -> Optional[Transcript]:
        t = self.cfg["transcript"]
        if not t["mode"]:
            return None
        d = Path(t["dir"])
        return Transcript(d if d.is_absolute() else self.root / d, t["mode"])

    def provider(self, role: str):
        if role not in self._providers:
            spec = self.cfg["providers"].get(role, "mock")
            transcript = self.transcript()
            if spec == "mock":
                mocks = offline_providers(self.corpus, transcript)
                self._providers.update({r: getattr(mocks, r) for r in ROLES
                                        if self.cfg["providers"].get(r, "mock") == "mock"})
            else:
                endpoint = self.cfg["endpoints"].get(spec)
                if endpoint is None:
                    raise PipelineError(f"provider {role}: no endpoint named {spec!r}")
                self._providers[role] = http_provider(ProviderConfig.from_dict(endpoint),
                                                      transcript)
        return self._providers[role]

    def detector(self):
        f = self.cfg["features"]
        if f["backend"] == "rule":
            return RuleBased()
        if f["backend"] == "llm":
            spec = f.get("detector", "mock")
            endpoint = self.cfg["endpoints"].get(spec)
            if endpoint is None:
                raise PipelineError(f"LLM detector needs an endpoint, got {spec!r}")
            return LlmJudge(http_provider(ProviderConfig.from_dict(endpoint), self.transcript()))
        raise PipelineError(f"unknown detector backend {f['backend']!r}")


ARTIFACTS = {
    "extract": ("features.jsonl",),
    "perturb": ("neighborhoods.jsonl",),
    "answer": ("answers.jsonl",),
    "score": ("labels.jsonl", "scores.jsonl"),
    "fit": ("model.json", "coefficients.csv"),
    "diagnose": ("report",),
}
UPSTREAM = {
    "extract": (),
    "perturb": (),
    "answer": ("perturb",),
    "score": ("perturb", "answer"),
    "fit": ("extract", "score"),
    "diagnose": ("extract", "score", "fit"),
}


def _stage_config(stage: str, cfg: dict) -> dict:
    prov = cfg["providers"]
    ends = cfg["endpoints"]

    def endpoint(role):
        return {"name": prov.get(role, "mock"), "endpoint": ends.get(prov.get(role, "mock"))}

    if stage == "extract":
        f = cfg["features"]
        return {"features": f, "endpoint": ends.get(f.get("detector"))}
    if stage == "perturb":
        return {"perturb": cfg["perturb"], **{r: endpoint(r) for r in ("paraphraser", "bi",
                                                                       "cross")}}
    if stage == "answer":
        return {"answerer": endpoint("answerer")}
    if stage == "score":
        return {"proxy": cfg["proxy"], "judge": endpoint("judge")}
    if stage == "fit":
        return {"fit": cfg["fit"]}
    return {"fit": cfg["fit"], "diagnose": cfg["diagnose"]}


def _meta(ws: Workspace, stage: str) -> dict:
    inputs = {"corpus": sha256_file(ws.corpus_path)}
    for up in UPSTREAM[stage]:
        for name in ARTIFACTS[up]:
            p = ws.path(name)
            if not p.exists():
                raise PipelineError(f"stage {stage!r} needs {name} from stage {up!r}; "
                                    f"run `{up}` first")
            inputs[name] = sha256_file(p)
    meta = {"stage": stage, "inputs": inputs,
            "config_hash": _hash_obj(_stage_config(stage, ws.cfg))}
    if stage in SEEDED:
        meta["seed"] = int(ws.cfg["seed"])
    return meta


def _up_to_date(ws: Workspace, stage: str, meta: dict) -> bool:
    mpath = ws.path(f"{stage}.meta.json")
    if not mpath.exists():
        return False
    old = json.loads(mpath.read_text("utf-8"))
    outputs_ok = all(ws.path(n).exists() and sha256_file(ws.path(n)) == old["outputs"].get(n)
                     for n in ARTIFACTS[stage])
    same = {k: old.get(k) for k in meta} == meta
    if ws.resume and not (same and outputs_ok):
        raise PipelineError(f"stage {stage!r}: recorded hashes no longer match; "
                            "rerun without resume mode to recompute")
    return same and outputs_ok


def _write_meta(ws: Workspace, stage: str, meta: dict) -> None:
    meta = dict(meta)
    meta["outputs"] = {n: sha256_file(ws.path(n)) for n in ARTIFACTS[stage]}
    ws.path(f"{stage}.meta.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n",
                                             encoding="utf-8")


# ---------------------------------------------------------------------------
# stage bodies


def _labelable(ws: Workspace) -> list[Query]:
    return ws.corpus.labelable()


def _do_extract(ws: Workspace) -> None:
    det = ws.detector()
    save_features([extract_features(q, det) for q in ws.corpus], ws.path("features.jsonl"))


def _do_perturb(ws: Workspace) -> None:
    p = dict(ws.cfg["perturb"])
    budget = p.pop("budget", None)
    sim = SimilarityConfig.from_dict(p)
    gen, bi, cross = (ws.provider(r) for r in ("paraphraser", "bi", "cross"))
    hoods = [build_neighborhood(q, gen, bi, cross, sim, budget) for q in _labelable(ws)]
    save_neighborhoods(hoods, ws.path("neighborhoods.jsonl"))


def answer_prompt(question: str, query: Query) -> str:
    extra = ""
    if query.context:
        extra += f"Context: {query.context}\n"
    if query.choices:
        extra += "Choices: " + "; ".join(query.choices) + "\n"
    return render(ANSWER_TEMPLATE, query=question, extra=extra)


def _do_answer(ws: Workspace) -> None:
    by_id = ws.corpus.by_id()
    answerer = ws.provider("answerer")
    rows = []
    for hood in load_neighborhoods(ws.path("neighborhoods.jsonl")):
        q = by_id[hood.source_id]
        for i, para in enumerate(hood.paraphrases):
            ans = answerer.complete(answer_prompt(para.text, q), salt=f"{q.id}:{i}")
            rows.append({"query_id": q.id, "paraphrase_index": i, "question": para.text,
                         "answer": ans.strip()})
    write_jsonl(rows, ws.path("answers.jsonl"))


def _do_score(ws: Workspace) -> None:
    by_id = ws.corpus.by_id()
    weights = ProxyWeights(**ws.cfg["proxy"])
    judge = ws.provider("judge")
    answers: dict[str, list] = {}
    for row in read_jsonl(ws.path("answers.jsonl")):
        answers.setdefault(row["query_id"], []).append(row)
    score_rows, labels = [], []
    for hood in load_neighborhoods(ws.path("neighborhoods.jsonl")):
        if not hood.paraphrases:
            continue
        q = by_id[hood.source_id]
        rows = sorted(answers.get(q.id, []), key=lambda r: r["paraphrase_index"])
        if len(rows) != hood.size:
            raise PipelineError(f"query {q.id}: {len(rows)} answers for {hood.size} paraphrases")
        scores = [score_paraphrase(q, r["answer"], weights, judge, question=r["question"])
                  for r in rows]
        for r, s in zip(rows, scores):
            score_rows.append({"query_id": q.id, "paraphrase_index": r["paraphrase_index"],
                               "s_llm": s.s_llm, "s_fuzz": s.s_fuzz, "s_bleu": s.s_bleu,
                               "h_hat": s.h_hat, "hallucinated": s.hallucinated})
        labels.append(label_from_scores(q.id, scores, hood.max_accepted))
    write_jsonl(score_rows, ws.path("scores.jsonl"))
    save_labels(labels, ws.path("labels.jsonl"))


def assemble_design(ws: Workspace, scaler: Optional[NumericScaler] = None):
    """Join features, labels and corpus metadata into a DesignMatrix."""
    labels = {lab.query_id: lab for lab in load_labels(ws.path("labels.jsonl"))}
    feats = [v for v in load_features(ws.path("features.jsonl")) if v.query_id in labels]
    if not feats:
        raise PipelineError("no query has both features and a label")
    scaler = scaler or NumericScaler.fit(feats)
    feats = [scaler.transform(v) for v in feats]
    by_id = ws.corpus.by_id()
    X = np.vstack([v.row() for v in feats])
    qs = [by_id[v.query_id] for v in feats]
    y = [int(labels[v.query_id].category) for v in feats]
    design = DesignMatrix(X, ALL_FEATURES, [q.dataset for q in qs],
                          [q.scenario.value for q in qs], y)
    return design, feats, scaler


def _fit_config(cfg: dict) -> FitConfig:
    return FitConfig.from_dict(cfg["fit"])


def _do_fit(ws: Workspace) -> None:
    design, _, scaler = assemble_design(ws)
    model = fit(design, ws.cfg["fit"]["spec"], ws.cfg["fit"]["lambda_reg"],
                int(ws.cfg["seed"]), config=_fit_config(ws.cfg),
                numeric_scaling=scaler.to_json())
    model.save(ws.path("model.json"))
    save_table_csv(report_table(model, design), ws.path("coefficients.csv"))


def _do_diagnose(ws: Workspace) -> None:
    d = ws.cfg["diagnose"]
    model = OrdinalModel.load(ws.path("model.json"))
    scaler = NumericScaler.from_json(model.numeric_scaling)
    design, feats, _ = assemble_design(ws, scaler)
    p_risky = model.predict_proba(design.X, design.dataset, design.scenario)[:, 2]
    risky = (design.y == int(RiskCategory.RISKY)).astype(float)
    outcome = p_risky if d["outcome"] == "model" else risky
    out = ws.path("report")
    if out.exists():
        shutil.rmtree(out)
    out.mkdir()

    seps = []
    for j, name in enumerate(BINARY_FEATURES):
        t = design.X[:, j]
        if 0 < t.sum() < len(t):
            seps.append(dx.ecdf_separation(p_risky, t, name))
    seps.sort(key=lambda s: (-s.ks, s.feature))
    dx.write_separations(out / "separations.csv", seps)

    columns = {name: design.X[:, j] for j, name in enumerate(BINARY_FEATURES)}
    columns.update({name: np.array([v.numeric_raw[name] for v in feats], float)
                    for name in NUMERIC_FEATURES})
    dx.write_correlations(out / "correlations.csv", dx.rank_correlations(columns, design.y))
    names, mat = dx.correlation_matrix(columns)
    with open(out / "correlation_matrix.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(["feature"] + names) + "\n")
        for name, row in zip(names, mat):
            fh.write(",".join([name] + [dx._f(x) for x in row]) + "\n")

    curves = {}
    if len(p_risky) >= d["ece_bins"]:
        curves["all"] = dx.reliability(p_risky, risky, d["ece_bins"])
    for j, name in enumerate(BINARY_FEATURES):
        t = design.X[:, j].astype(bool)
        for tag, mask in (("present", t), ("absent", ~t)):
            if mask.sum() >= d["ece_bins"]:
                curves[f"{name}:{tag}"] = dx.reliability(p_risky[mask], risky[mask],
                                                         d["ece_bins"])
    dx.write_calibration(out / "calibration.csv", curves)

    lengths = np.array([v.numeric_raw["QueryTokenLength"] for v in feats], float)
    dx.write_length_curves(out / "length_curves.csv", {
        name: dx.risk_vs_length(lengths, risky, design.X[:, j], d["length_bins"], d["min_bin"])
        for j, name in enumerate(BINARY_FEATURES)})

    props = []
    for j, name in enumerate(BINARY_FEATURES):
        t = design.X[:, j]
        if 0 < t.sum() < len(t):
            props.append(dx.propensity_uplift(name, design, outcome, d["overlap_threshold"],
                                              d["strata"]))
    dx.write_propensity(out / "propensity.csv", props)

    save_table_csv(report_table(model, design), out / "coefficients.csv")
    if d["lodo"] and len(set(design.dataset.tolist())) >= 2:
        res = lodo(design, model.spec, model.lambda_reg, int(ws.cfg["seed"]),
                   config=_fit_config(ws.cfg))
        save_lodo_csv(res, out / "lodo.csv")


_BODIES = {"extract": _do_extract, "perturb": _do_perturb, "answer": _do_answer,
           "score": _do_score, "fit": _do_fit, "diagnose": _do_diagnose}


@dataclass(frozen=True)
class StageResult:
    stage: str
    artifact: Path
    skipped: bool


def run_stage(stage: str, config: dict, workdir, resume: bool = False) -> StageResult:
    """Run one stage unless its recorded input, config and seed hashes are unchanged."""
    if stage not in STAGES:
        raise PipelineError(f"unknown stage {stage!r}; expected one of {STAGES}")
    ws = workdir if isinstance(workdir, Workspace) else Workspace(Path(workdir), config, resume)
    meta = _meta(ws, stage)
    artifact = ws.path(ARTIFACTS[stage][0])
    if _up_to_date(ws, stage, meta):
        log.info("stage %s up to date; skipped", stage)
        return StageResult(stage, artifact, True)
    if resume:
        raise PipelineError(f"stage {stage!r} has no recorded state to resume from")
    log.info("running stage %s", stage)
    _BODIES[stage](ws)
    _write_meta(ws, stage, meta)
    return StageResult(stage, artifact, False)


def run_all(config: dict, workdir) -> list[StageResult]:
    ws = Workspace(Path(workdir), config)
    return [run_stage(s, config, ws) for s in STAGES]


# ---------------------------------------------------------------------------
# triage


@dataclass(frozen=True)
class TriageResult:
    p_risky: float
    route: str
    features: FeatureVector


def triage(query_text: str, scenario, model: OrdinalModel, backend=None,
           threshold: float = 0.5, dataset: Optional[str] = None,
           clarify_if_present=("LackOfSpecificity",),
           clarify_if_absent=("IntentionGrounding",)) -> TriageResult:
    """Predict P(Risky) for a new query and pick a route.

    ``direct`` below the threshold; otherwise ``clarify`` when an
    under-specification cue fired (by default LackOfSpecificity present or
    IntentionGrounding absent) and ``ground`` for the rest.  Numeric
    features are standardized with the statistics frozen into the model.
    """
    if model.numeric_scaling is None:
        raise PipelineError("model carries no numeric scaling statistics")
    scen = Scenario.parse(scenario)
    if model.spec == "Full" and dataset is not None and dataset not in model.dataset_levels:
        log.warning("unknown dataset %r; using the reference level", dataset)
    q = Query("triage", query_text, scen, dataset or "unknown")
    vec = NumericScaler.from_json(model.numeric_scaling).transform(
        extract_features(q, backend or RuleBased()))
    p = model.predict(vec.row(), dataset, scen.value).p_risky
    return TriageResult(p, route_for(vec.binary, p, threshold, clarify_if_present,
                                     clarify_if_absent), vec)


def route_for(binary: dict, p_risky: float, threshold: float,
              clarify_if_present=("LackOfSpecificity",),
              clarify_if_absent=("IntentionGrounding",)) -> str:
    if p_risky < threshold:
        return "direct"
    if any(binary[f] == 1 for f in clarify_if_present) or \
            any(binary[f] == 0 for f in clarify_if_absent):
        return "clarify"
    return "ground"
