from __future__ import annotations

import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from evalkit.audio import AudioClip, write_wav
from evalkit.cli import run
from evalkit.synth import am_noise

FIXTURES = Path(__file__).parent / "fixtures"


def test_help_exits_zero(capsys):
    assert run(["--help"]) == 0
    assert run(["eval", "--help"]) == 0
    assert "--manifest" in capsys.readouterr().out


def test_usage_errors(capsys):
    assert run([]) == 1
    assert run(["frobnicate"]) == 1
    assert run(["wer", "--lang", "en"]) == 1
    assert run(["wer", "--lang", "fr", "--ref", "a", "--hyp", "b"]) == 1
    assert capsys.readouterr().out == ""


def test_wer_prints_four_decimals(tmp_path, capsys):
    ref = tmp_path / "ref.txt"
    ref.write_text("the cat sat on the mat\n")
    assert run(["wer", "--lang", "en", "--ref", str(ref), "--hyp", str(ref)]) == 0
    assert capsys.readouterr().out == "0.0000\n"
    hyp = tmp_path / "hyp.txt"
    hyp.write_text("the cat sat on a mat")
    assert run(["wer", "--lang", "en", "--ref", str(ref), "--hyp", str(hyp)]) == 0
    assert capsys.readouterr().out == "0.1667\n"
    empty = tmp_path / "empty.txt"
    empty.write_text("...")
    assert run(["wer", "--lang", "en", "--ref", str(empty), "--hyp", str(hyp)]) == 1
    assert run(["wer", "--lang", "en", "--ref", str(tmp_path / "nope"), "--hyp", str(hyp)]) == 1


def test_srmr_prints_single_number(tmp_path, capsys):
    path = tmp_path / "x.wav"
    write_wav(path, AudioClip(am_noise(2.0), 16000))
    assert run(["--log-level", "DEBUG", "srmr", str(path)]) == 0
    out = capsys.readouterr().out
    assert out.endswith("\n") and float(out) > 0 and len(out.strip().split(".")[1]) == 4
    short = tmp_path / "short.wav"
    write_wav(short, AudioClip(am_noise(0.2), 16000))
    assert run(["srmr", str(short)]) == 1


def test_validate(capsys):
    assert run(["validate", "--manifest", str(FIXTURES / "bad_manifest.json")]) == 2
    err = capsys.readouterr().err
    assert "[0]" in err and "num_speakers" in err
    from evalkit.synth import bundled_manifest

    assert run(["validate", "--manifest", str(bundled_manifest())]) == 0
    assert capsys.readouterr().out == "6 cases ok\n"


def test_stats_commands(capsys):
    assert run(["stats", "--pairs", str(FIXTURES / "pairs.csv")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "PLCC,SRCC,KRCC,QWK,MAE" and len(lines) == 2
    assert all(float(v) == float(v) for v in lines[1].split(","))
    assert run(["stats", "--raters", str(FIXTURES / "raters.csv")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "rater,PLCC,SRCC,KRCC,QWK,MAE"
    assert [l.split(",")[0] for l in lines[1:]] == ["A1", "A2", "A3", "A4"]
    assert run(["stats"]) == 1


def test_eval_ok_then_report(mini_fixture, tmp_path, capsys):
    out = tmp_path / "rep"
    args = ["eval", "--manifest", str(mini_fixture / "cases.json"), "--audio-dir", str(mini_fixture),
            "--config", str(mini_fixture / "eval.toml"), "--report-dir", str(out)]
    assert run(args) == 0
    assert capsys.readouterr().out == ""
    assert {p.name for p in out.iterdir()} == {"raw.json", "clips.csv", "summary.csv", "summary.md"}
    assert run(["report", "--from", str(out / "raw.json"), "--format", "markdown"]) == 0
    md = capsys.readouterr().out
    assert md == (out / "summary.md").read_text()
    assert run(["report", "--from", str(out / "raw.json"), "--format", "json"]) == 0
    assert capsys.readouterr().out == (out / "raw.json").read_text()
    assert run(["report", "--from", str(out / "raw.json"), "--format", "csv", "--group-by", "model,scenario"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 7


def _config_with(mini_fixture, tmp_path, extra):
    text = (mini_fixture / "eval.toml").read_text()
    for kind, table in extra.items():
        text = text.replace(f'[backends.{kind}]\ntype = "mock"', f"[backends.{kind}]\n{table}")
    cfg = tmp_path / "eval.toml"
    cfg.write_text(text)
    shutil.copy(mini_fixture / "transcripts.json", tmp_path)
    return cfg


def test_eval_partial_when_one_backend_down(mini_fixture, tmp_path):
    cfg = _config_with(mini_fixture, tmp_path, {"judge": 'type = "down"'})
    out = tmp_path / "rep"
    code = run(["eval", "--manifest", str(mini_fixture / "cases.json"), "--audio-dir", str(mini_fixture),
                "--config", str(cfg), "--report-dir", str(out)])
    assert code == 4
    raw = json.loads((out / "raw.json").read_text())
    assert all(c["status"]["prosody"] == "BackendUnavailable" for c in raw["clips"])
    assert all(c["status"]["timbre_consistency"] == "ok" for c in raw["clips"])


def test_eval_total_backend_failure(mini_fixture, tmp_path):
    down = {k: 'type = "down"' for k in ("embedder", "judge", "quality")}
    cfg = _config_with(mini_fixture, tmp_path, down)
    cfg.write_text(cfg.read_text().replace('type = "mock"\nfixtures = "transcripts.json"', 'type = "down"'))
    code = run(["eval", "--manifest", str(mini_fixture / "cases.json"), "--audio-dir", str(mini_fixture),
                "--config", str(cfg), "--report-dir", str(tmp_path / "rep")])
    assert code == 3
    assert (tmp_path / "rep" / "raw.json").exists()


def test_eval_schema_errors(tmp_path, mini_fixture):
    assert run(["eval", "--manifest", str(FIXTURES / "bad_manifest.json"), "--audio-dir", str(tmp_path),
                "--report-dir", str(tmp_path / "r")]) == 2
    bad_cfg = tmp_path / "bad.toml"
    bad_cfg.write_text("[windows]\nwindow_size = 3\n")
    assert run(["eval", "--manifest", str(mini_fixture / "cases.json"), "--audio-dir", str(mini_fixture),
                "--config", str(bad_cfg), "--report-dir", str(tmp_path / "r")]) == 2
    assert run(["eval", "--manifest", str(mini_fixture / "cases.json"), "--audio-dir", str(tmp_path / "nope"),
                "--report-dir", str(tmp_path / "r")]) == 1
    assert run(["report", "--from", str(FIXTURES / "pairs.csv")]) == 1


def test_console_script_keeps_stdout_clean(tmp_path):
    ref = tmp_path / "r.txt"
    ref.write_text("你好，世界")
    hyp = tmp_path / "h.txt"
    hyp.write_text("你好世界")
    proc = subprocess.run([sys.executable, "-m", "evalkit.cli", "--log-level", "DEBUG", "wer", "--lang", "zh",
                           "--ref", str(ref), "--hyp", str(hyp)], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout == "0.0000\n"


@pytest.mark.parametrize("flag", ["--seed", "--workers"])
def test_global_flags_after_subcommand(flag, mini_fixture, tmp_path):
    assert run(["validate", flag, "2", "--manifest", str(mini_fixture / "cases.json")]) == 0
