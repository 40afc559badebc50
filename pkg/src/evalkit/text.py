"""Text normalisation and WER/CER."""

from __future__ import annotations

import re
import string
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Sequence

from .errors import EmptyReference

LANGUAGES = ("zh", "en")

# CJK and full-width punctuation (same set as zhon.hanzi.punctuation)
CJK_PUNCTUATION = (
    "＂＃＄％＆＇（）＊＋，－／：；＜＝＞＠［＼］＾＿｀｛｜｝～｟｠｢｣､　、〃〈〉《》「」『』【】〔〕〖〗〘〙〚〛〜〝〞〟〰〾〿–—‘’‛“”„‟…‧﹏﹑﹔·．！？｡。"
)
_PUNCT_TABLE = str.maketrans("", "", string.punctuation + CJK_PUNCTUATION)
_WS = re.compile(r"\s+")
_ZH_TOKEN = re.compile(r"[A-Za-z0-9]+|\S")


@dataclass(frozen=True)
class Transcript:
    text: str
    language: str = "en"

    def __post_init__(self):
        if self.language not in LANGUAGES:
            raise ValueError(f"language must be one of {LANGUAGES}, got {self.language!r}")


@dataclass(frozen=True)
class EditAlignment:
    substitutions: int
    deletions: int
    insertions: int
    ref_len: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    def as_tuple(self) -> tuple[int, int, int]:
        return self.substitutions, self.deletions, self.insertions


@lru_cache(maxsize=1)
def t2s_table() -> dict[int, str]:
    """Single-character traditional -> simplified map bundled with the package."""
    text = resources.files("evalkit.data").joinpath("t2s_chars.tsv").read_text(encoding="utf-8")
    table = {}
    for line in text.splitlines():
        if line and not line.startswith("#"):
            trad, simp = line.split("\t")
            table[ord(trad)] = simp
    return table


def normalize_text(t: Transcript) -> Transcript:
    text = t.text.translate(_PUNCT_TABLE)
    if t.language == "zh":
        text = text.translate(t2s_table())
    else:
        text = text.encode("ascii", "ignore").decode("ascii").lower()
    text = _WS.sub(" ", text).strip()
    return Transcript(text, t.language)


def tokenize(t: Transcript) -> list[str]:
    """Words for English; characters for Chinese, with ASCII letter/digit runs kept whole."""
    if t.language == "zh":
        return _ZH_TOKEN.findall(t.text)
    return t.text.split()


def edit_distance(ref: Sequence[str], hyp: Sequence[str]) -> EditAlignment:
    """Levenshtein alignment with unit costs.

    Among equally cheap alignments the backtrace (from the end) prefers a
    substitution/match step, then a deletion, then an insertion.
    """
    n, m = len(ref), len(hyp)
    prev = list(range(m + 1))
    table = [prev]
    for i in range(1, n + 1):
        row = [i] + [0] * m
        r = ref[i - 1]
        for j in range(1, m + 1):
            diag = prev[j - 1] + (r != hyp[j - 1])
            up = prev[j] + 1
            left = row[j - 1] + 1
            row[j] = min(diag, up, left)
        table.append(row)
        prev = row

    s = d = ins = 0
    i, j = n, m
    while i > 0 or j > 0:
        cur = table[i][j]
        if i > 0 and j > 0 and table[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1]) == cur:
            s += ref[i - 1] != hyp[j - 1]
            i, j = i - 1, j - 1
        elif i > 0 and table[i - 1][j] + 1 == cur:
            d += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return EditAlignment(int(s), d, ins, n)


def error_rate(a: EditAlignment) -> float:
    if a.ref_len <= 0:
        raise EmptyReference("reference has no tokens")
    return a.errors / a.ref_len


def text_error_rate(ref: Transcript, hyp: Transcript) -> float:
    """Normalise both sides, tokenise by the reference language, and score."""
    ref_n = normalize_text(ref)
    hyp_n = normalize_text(Transcript(hyp.text, ref.language))
    return error_rate(edit_distance(tokenize(ref_n), tokenize(hyp_n)))


def content_accuracy(gt: Transcript, audio, asr) -> float:
    """WER (en) or CER (zh) of the ASR backend's transcript against ``gt``."""
    if not normalize_text(gt).text:
        raise EmptyReference("ground-truth text is empty after normalisation")
    hyp = asr.transcribe(audio, gt.language)
    return text_error_rate(gt, Transcript(hyp or "", gt.language))
