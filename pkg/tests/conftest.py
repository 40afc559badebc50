from __future__ import annotations

import numpy as np
import pytest

from evalkit.audio import AudioClip
from evalkit.synth import make_mini_fixture, voice


@pytest.fixture(scope="session")
def mini_fixture(tmp_path_factory):
    return make_mini_fixture(tmp_path_factory.mktemp("mini"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def tone_clip(duration_s=4.0, f0=150.0, rate=16000, seed=0, name="clip.wav"):
    return AudioClip(voice(duration_s, f0, rate=rate, seed=seed), rate, name=name)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
