"""Command-line entry point: ``qrisk <stage> [options]``.

Exit codes: 0 on success, 2 for invalid input or configuration, 3 for
provider failures (including cache misses under ``--replay-strict``).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings

from .corpus import read_jsonl
from .llmio import ProviderError
from .ordmodel import OrdinalModel
from .pipeline import STAGES, PipelineError, load_config, run_all, run_stage, triage
from .proxy import save_sweep_csv, simplex_sweep

log = logging.getLogger("qrisk")

EXIT_OK, EXIT_INVALID, EXIT_PROVIDER = 0, 2, 3


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML or JSON configuration file")
    p.add_argument("--workdir", default="qrisk-work", help="artifact directory")
    p.add_argument("--seed", type=int, help="seed for fitting and diagnostics")
    for role, flag in (("paraphraser", "--paraphraser"), ("answerer", "--answerer"),
                       ("judge", "--judge"), ("bi", "--bi-encoder"),
                       ("cross", "--cross-encoder")):
        p.add_argument(flag, dest=f"provider_{role}", metavar="NAME",
                       help=f"'mock' or an endpoint name from the config for the {role}")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--record", action="store_true", help="record provider calls")
    mode.add_argument("--replay-strict", action="store_true",
                      help="serve provider calls from the transcript only")
    p.add_argument("--transcript", help="transcript directory (default: <workdir>/transcripts)")
    p.add_argument("--resume", action="store_true",
                   help="refuse to recompute a stage whose recorded hashes changed")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qrisk", description=(
        "Label query risk by paraphrase-neighborhood hallucination rates, fit an ordinal "
        "model on query features, and report diagnostics."))
    sub = parser.add_subparsers(dest="command", required=True)
    for stage in STAGES:
        _common(sub.add_parser(stage, help=f"run the {stage} stage"))
    _common(sub.add_parser("all", help="run every stage in order"))

    t = sub.add_parser("triage", help="predict P(Risky) and a route for a new query")
    _common(t)
    t.add_argument("query", help="query text")
    t.add_argument("--scenario", default="Abstractive",
                   help="Abstractive, Extractive or MultipleChoice")
    t.add_argument("--dataset", help="dataset level for Full-spec models")
    t.add_argument("--threshold", type=float, help="P(Risky) threshold for routing")
    t.add_argument("--model", help="model JSON (default: <workdir>/model.json)")

    s = sub.add_parser("sweep", help="ROC-AUC over the proxy weight simplex")
    s.add_argument("input", help="JSONL rows with s_llm, s_fuzz, s_bleu and label")
    s.add_argument("--step", type=float, default=0.1)
    s.add_argument("--out", help="CSV path (default: stdout)")
    s.add_argument("-v", "--verbose", action="store_true")
    return parser


def _config(args) -> dict:
    over: dict = {}
    if args.seed is not None:
        over["seed"] = args.seed
    providers = {r: getattr(args, f"provider_{r}") for r in
                 ("paraphraser", "answerer", "judge", "bi", "cross")
                 if getattr(args, f"provider_{r}")}
    if providers:
        over["providers"] = providers
    if args.record or args.replay_strict or args.transcript:
        t = {"mode": "record" if args.record else "replay-strict" if args.replay_strict
             else None}
        if args.transcript:
            t["dir"] = args.transcript
        over["transcript"] = t
    cfg = load_config(args.config)
    if "providers" in over:
        over["providers"] = {**cfg["providers"], **over["providers"]}
    if "transcript" in over:
        if over["transcript"]["mode"] is None:
            over["transcript"]["mode"] = cfg["transcript"]["mode"]
        over["transcript"] = {**cfg["transcript"], **over["transcript"]}
    return {**cfg, **over}


def _run(args) -> int:
    if args.command == "sweep":
        rows = read_jsonl(args.input)
        try:
            comps = [(r["s_llm"], r["s_fuzz"], r["s_bleu"]) for r in rows]
            labels = [int(r["label"]) for r in rows]
        except KeyError as exc:
            raise PipelineError(f"sweep input row lacks {exc}") from None
        points = simplex_sweep(comps, labels, args.step)
        if args.out:
            save_sweep_csv(points, args.out)
        else:
            print("w_llm,w_fuzz,w_bleu,auc")
            for p in points:
                print(f"{p.w_llm:.6g},{p.w_fuzz:.6g},{p.w_bleu:.6g},{p.auc:.12g}")
        return EXIT_OK

    cfg = _config(args)
    if args.command == "triage":
        from pathlib import Path
        model = OrdinalModel.load(args.model or Path(args.workdir) / "model.json")
        tcfg = cfg["triage"]
        res = triage(args.query, args.scenario, model, threshold=args.threshold
                     if args.threshold is not None else tcfg["threshold"],
                     dataset=args.dataset, clarify_if_present=tcfg["clarify_if_present"],
                     clarify_if_absent=tcfg["clarify_if_absent"])
        print(json.dumps({"p_risky": res.p_risky, "route": res.route,
                          "features": res.features.to_json()}, indent=1))
        return EXIT_OK
    if args.command == "all":
        if args.resume:
            raise PipelineError("--resume applies to single stages")
        results = run_all(cfg, args.workdir)
    else:
        results = [run_stage(args.command, cfg, args.workdir, resume=args.resume)]
    for r in results:
        print(f"{r.stage}: {'up to date' if r.skipped else 'done'} -> {r.artifact}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore")
    try:
        return _run(args)
    except ProviderError as exc:
        print(f"qrisk: provider error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except (ValueError, KeyError, OSError) as exc:
        print(f"qrisk: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
