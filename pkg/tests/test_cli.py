import json

import pytest

from qrisk.cli import main


def test_sweep_command(tmp_path, capsys):
    rows = [{"s_llm": i % 2, "s_fuzz": 0.5, "s_bleu": 0.5, "label": i % 2} for i in range(10)]
    src = tmp_path / "rows.jsonl"
    src.write_text("".join(json.dumps(r) + "\n" for r in rows))
    assert main(["sweep", str(src), "--step", "0.5"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "w_llm,w_fuzz,w_bleu,auc" and len(out) == 7
    assert main(["sweep", str(src), "--out", str(tmp_path / "s.csv")]) == 0
    assert (tmp_path / "s.csv").exists()


def test_validation_errors_exit_2(tmp_path, capsys):
    assert main(["fit", "--workdir", str(tmp_path)]) == 2
    assert "features.jsonl" in capsys.readouterr().err
    bad = tmp_path / "c.json"
    bad.write_text('{"colour": 1}')
    assert main(["extract", "--config", str(bad), "--workdir", str(tmp_path)]) == 2
    rows = tmp_path / "r.jsonl"
    rows.write_text('{"s_llm": 1}\n')
    assert main(["sweep", str(rows)]) == 2


def test_provider_errors_exit_3(tmp_path, capsys):
    assert main(["perturb", "--workdir", str(tmp_path), "--replay-strict"]) == 3
    assert "cache miss" in capsys.readouterr().err


def test_unknown_endpoint_is_invalid(tmp_path):
    assert main(["perturb", "--workdir", str(tmp_path), "--paraphraser", "gpt"]) == 2


def test_stage_then_triage(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[diagnose]\nlodo = false\n")
    work = str(tmp_path / "w")
    assert main(["all", "--workdir", work, "--config", str(cfg), "--seed", "2"]) == 0
    capsys.readouterr()
    assert main(["fit", "--workdir", work, "--config", str(cfg), "--seed", "2"]) == 0
    assert "up to date" in capsys.readouterr().out
    assert main(["triage", "--workdir", work, "What is the capital of Zanor or something?",
                 "--dataset", "demo_trivia"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert 0 <= res["p_risky"] <= 1 and res["route"] in ("direct", "clarify", "ground")


def test_help_lists_commands(capsys):
    with pytest.raises(SystemExit):
        main(["--help"])
    out = capsys.readouterr().out
    for cmd in ("extract", "perturb", "answer", "score", "fit", "diagnose", "triage", "sweep"):
        assert cmd in out
