"""Acceptance suite: one PASS/FAIL line per criterion in the terminal summary.

Everything here runs against mock backends only.
"""

from __future__ import annotations

import json
import random
import shutil
import subprocess
import sys
import time
from contextlib import contextmanager

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from evalkit.acoustic import (
    WindowConfig,
    embed_windows,
    reverb_consistency,
    reverb_consistency_from_series,
    timbre_consistency_single,
)
from evalkit.audio import AudioClip, VadMask, plan_windows
from evalkit.backends import MockEmbedder, ScriptedJudge
from evalkit.backends.mock import judge_json
from evalkit.errors import InsufficientTrials
from evalkit.judge import prosody_score, richness_score
from evalkit.runner import RadarNormalizer
from evalkit.runner.evaluate import rtf
from evalkit.srmr import srmr
from evalkit.stats import DEFAULT_LEVELS, krcc, mae, plcc, qwk, srcc
from evalkit.synth import am_noise, make_mini_fixture, reverberate, voice
from evalkit.text import CJK_PUNCTUATION, Transcript, edit_distance, normalize_text
from test_text import recursive_sdi

METRICS = ("timbre_consistency", "reverb_consistency", "sound_fidelity", "content_error_rate",
           "prosody", "richness", "hierarchy")


@contextmanager
def criterion(n: int, text: str):
    try:
        yield
    except BaseException:
        ACCEPTANCE_LINES.append(f"FAIL criterion {n}: {text}")
        raise
    ACCEPTANCE_LINES.append(f"PASS criterion {n}: {text}")


def brute_force_timbre(vectors: np.ndarray) -> float:
    n = len(vectors)
    total = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                a, b = vectors[i], vectors[j]
                total += float(a @ b) / (np.linalg.norm(a) * np.linalg.norm(b))
    return total / (n * (n - 1))


def test_c1_timbre_closed_form():
    with criterion(1, "timbre closed form == brute force within 1e-9 on 200 sets, < 10 s"):
        rng = np.random.default_rng(1)
        t0 = time.perf_counter()
        worst = 0.0
        for _ in range(200):
            n, d = int(rng.integers(2, 51)), int(rng.integers(1, 257))
            vectors = rng.standard_normal((n, d))
            worst = max(worst, abs(timbre_consistency_single(vectors) - brute_force_timbre(vectors)))
        elapsed = time.perf_counter() - t0
        assert worst < 1e-9, worst
        assert elapsed < 10.0, elapsed


def test_c2_srmr_monotone_and_scale_invariant():
    with criterion(2, "SRMR strictly decreasing over RT60 {0.2,0.5,1.0} on >= 9/10 seeds, scale-invariant < 1e-9, < 60 s"):
        t0 = time.perf_counter()
        rate = 16000
        monotone = 0
        for seed in range(10):
            dry = am_noise(3.0, rate, seed=seed)
            s = [srmr(AudioClip(reverberate(dry, rt, rate, seed=seed), rate)) for rt in (0.2, 0.5, 1.0)]
            monotone += s[0] > s[1] > s[2]
        x = am_noise(3.0, rate, seed=42)
        a = srmr(AudioClip(x, rate))
        b = srmr(AudioClip(2.0 * x, rate))
        elapsed = time.perf_counter() - t0
        assert monotone >= 9, monotone
        assert abs(a - b) / abs(a) < 1e-9
        assert elapsed < 60.0, elapsed


def test_c3_mixed_reverb_has_larger_std():
    with criterion(3, "half-dry/half-wet std > each homogeneous half on 10/10 fixtures, {2,2,2} -> 0.0"):
        rate = 16000
        all_speech = lambda x: VadMask(np.ones(int(np.ceil(len(x) / (0.01 * rate))), dtype=bool))
        wins = 0
        # speech-rate AM noise: harmonic voices near 125 Hz put f0 inside the top modulation band
        for seed in range(10):
            mod_hz = 3.0 + 0.3 * seed
            dry = am_noise(12.0, rate, seed=seed, mod_hz=mod_hz)
            wet = reverberate(am_noise(12.0, rate, seed=seed + 100, mod_hz=mod_hz), 1.0, rate, seed=seed)
            wet *= np.max(np.abs(dry)) / np.max(np.abs(wet))
            mixed = np.concatenate([dry, wet])
            s_mixed, s_dry, s_wet = (reverb_consistency(AudioClip(x, rate), all_speech(x)) for x in (mixed, dry, wet))
            wins += s_mixed > s_dry and s_mixed > s_wet
        assert wins == 10, wins
        assert reverb_consistency_from_series([2.0, 2.0, 2.0]) == 0.0


def test_c4_edit_counts_and_normalize_idempotent():
    with criterion(4, "S/D/I == brute-force DP on 1000 pairs, normalize idempotent on 500 strings"):
        rnd = random.Random(2024)
        for _ in range(1000):
            alphabet = "vwxyz"[: rnd.randint(1, 5)]
            ref = tuple(rnd.choice(alphabet) for _ in range(rnd.randint(0, 12)))
            hyp = tuple(rnd.choice(alphabet) for _ in range(rnd.randint(0, 12)))
            _, s, d, i = recursive_sdi(ref, hyp)
            assert edit_distance(list(ref), list(hyp)).as_tuple() == (s, d, i)
        pieces = list("Hello World 42 ") + list(CJK_PUNCTUATION) + list("!?.,'-") + list("語音測试门們")
        corpus = ["".join(rnd.choice(pieces) for _ in range(rnd.randint(0, 40))) for _ in range(500)]
        assert sum(any(c in CJK_PUNCTUATION for c in s) for s in corpus) > 100
        for s in corpus:
            for lang in ("zh", "en"):
                once = normalize_text(Transcript(s, lang))
                assert normalize_text(once) == once


def test_c5_statistics_closed_forms():
    with criterion(5, "SRCC/PLCC/KRCC/QWK/MAE closed forms and QWK ~ 0 on independent samples"):
        x = np.linspace(1.0, 5.0, 9)
        assert srcc(x, x) == pytest.approx(1.0, abs=1e-12)
        assert srcc(x, x[::-1]) == pytest.approx(-1.0, abs=1e-12)
        assert plcc(x, 2.5 * x - 1) == pytest.approx(1.0, abs=1e-12)
        assert plcc(x, -0.3 * x + 4) == pytest.approx(-1.0, abs=1e-12)
        assert krcc([1, 2, 3], [1, 3, 2]) == pytest.approx(1 / 3, abs=1e-12)
        assert qwk(x, x) == pytest.approx(1.0, abs=1e-12)
        assert mae(x, x + 0.5) == pytest.approx(0.5, abs=1e-12)
        rng = np.random.default_rng(5)
        a = rng.choice(DEFAULT_LEVELS, 10000)
        b = rng.choice(DEFAULT_LEVELS, 10000)
        assert abs(qwk(a, b)) < 0.1


def test_c6_window_plan_table():
    with criterion(6, "window plan (3 s / 2 s) table"):
        def starts(duration):
            return [round(w.start_s, 9) for w in plan_windows(duration, 3.0, 2.0)]

        assert plan_windows(1.0, 3.0, 2.0) == []
        only = plan_windows(3.0, 3.0, 2.0)
        assert [(w.start_s, w.end_s) for w in only] == [(0.0, 3.0)]
        assert starts(9.0) == [0, 2, 4, 6]
        assert starts(10.0) == [0, 2, 4, 6]
        w = plan_windows(10.9, 3.0, 2.0)
        assert starts(10.9) == [0, 2, 4, 6, 7.9]
        assert (w[-1].start_s, w[-1].end_s) == pytest.approx((7.9, 10.9))
        assert starts(11.0) == [0, 2, 4, 6, 8]
        long = plan_windows(60.0, 3.0, 2.0)
        assert len(long) == 29 and starts(60.0) == list(range(0, 57, 2))
        assert long[-1].end_s == 59.0


def test_c7_judge_means_and_trial_budget():
    with criterion(7, "richness and prosody means exact, < 8 valid trials -> InsufficientTrials"):
        clip = AudioClip(np.zeros(30 * 1000), 1000)
        chunk_scores = [4.0, 2.5, 3.5]
        out = richness_score(clip, ScriptedJudge([judge_json("richness", s) for s in chunk_scores]))
        assert out.score == sum(chunk_scores) / 3
        trials = [1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 3.0]
        out = prosody_score(clip, ScriptedJudge([judge_json("prosody", s) for s in trials]), target_text="x")
        assert out.score == sum(trials) / 10
        bad = ["{not json"] * 4
        script = bad * 3 + [judge_json("prosody", 3.0)] * 7
        with pytest.raises(InsufficientTrials):
            prosody_score(clip, ScriptedJudge(script), target_text="x", retries=3)


def test_c8_radar_mapping():
    with criterion(8, "radar: min->1, max->5, lower-better inverted, fidelity 4.5->5.0, degenerate -> 3.0"):
        norm = RadarNormalizer({"timbre_consistency": (0.7, 0.95), "content_error_rate": (0.01, 0.2),
                                "reverb_consistency": (0.3, 0.3)})
        assert norm("timbre_consistency", 0.7) == 1.0
        assert norm("timbre_consistency", 0.95) == 5.0
        assert norm("content_error_rate", 0.01) == 5.0
        assert norm("content_error_rate", 0.2) == 1.0
        assert norm("sound_fidelity", 4.5) == 5.0
        assert norm("reverb_consistency", 0.3) == 3.0


def test_c9_rtf():
    with criterion(9, "RTF(15, 30) = 0.5"):
        assert rtf(15.0, 30.0) == 0.5


def _run_eval(fixture, out):
    cmd = [sys.executable, "-m", "evalkit.cli", "--seed", "0", "eval", "--manifest", str(fixture / "cases.json"),
           "--audio-dir", str(fixture), "--config", str(fixture / "eval.toml"), "--report-dir", str(out)]
    return subprocess.run(cmd, capture_output=True, text=True)


def test_c10_end_to_end_eval(tmp_path):
    with criterion(10, "evalkit eval on the 6-case mini-manifest: < 60 s, 7 metrics, byte-identical, multi-speaker"):
        fixture = make_mini_fixture(tmp_path / "mini")
        t0 = time.perf_counter()
        first = _run_eval(fixture, tmp_path / "a")
        elapsed = time.perf_counter() - t0
        assert first.returncode == 0, first.stderr
        assert elapsed < 60.0, elapsed
        second = _run_eval(fixture, tmp_path / "b")
        assert second.returncode == 0, second.stderr
        raw_a = (tmp_path / "a" / "raw.json").read_bytes()
        assert raw_a == (tmp_path / "b" / "raw.json").read_bytes()
        clips = {c["case_id"]: c for c in json.loads(raw_a)["clips"]}
        assert len(clips) == 6
        for c in clips.values():
            assert all(c["status"][m] == "ok" for m in METRICS), c["status"]
            assert all(isinstance(c["values"][m], float) for m in METRICS)
        podcast = clips["podcast_zh_01"]
        per = podcast["details"]["timbre_per_speaker"]
        assert set(per) == {"guest", "host"}
        assert podcast["values"]["timbre_consistency"] == pytest.approx(np.mean(list(per.values())), abs=1e-12)

        (fixture / "podcast_zh_01.align.json").unlink()
        third = _run_eval(fixture, tmp_path / "c")
        assert third.returncode == 4
        status = {c["case_id"]: c["status"] for c in json.loads((tmp_path / "c" / "raw.json").read_text())["clips"]}
        assert status["podcast_zh_01"]["timbre_consistency"] == "MissingAlignment"
        assert all(status["podcast_zh_01"][m] == "ok" for m in METRICS if m != "timbre_consistency")
        shutil.rmtree(fixture)


def test_c11_timbre_ranking_stable_across_windows():
    with criterion(11, "timbre ranking of two cluster-separated mock systems stable for 3/4/5 s windows"):
        rate = 16000
        steady = AudioClip(voice(24.0, 150.0, rate=rate, seed=1), rate)
        # the second system flips between two voices, which the embedder separates into two clusters
        parts = [voice(4.0, f0, rate=rate, seed=k) for k, f0 in enumerate([150.0, 260.0] * 3)]
        drifting = AudioClip(np.concatenate(parts), rate)
        embedder = MockEmbedder(seed=0)
        rankings = []
        for window in (3.0, 4.0, 5.0):
            cfg = WindowConfig(window, 2.0, 0.4)
            scores = {name: timbre_consistency_single(embed_windows(clip, embedder, cfg))
                      for name, clip in (("steady", steady), ("drifting", drifting))}
            rankings.append(sorted(scores, key=scores.get, reverse=True))
            assert scores["steady"] - scores["drifting"] > 0.05, scores
        assert rankings[0] == rankings[1] == rankings[2] == ["steady", "drifting"]
