"""Agreement statistics between metric scores and human ratings."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats as sps

from .errors import DegenerateInput, EmptyInput, InsufficientRaters

DEFAULT_LEVELS = tuple(np.arange(1.0, 5.0 + 1e-9, 0.5))
STAT_NAMES = ("PLCC", "SRCC", "KRCC", "QWK", "MAE")


@dataclass
class PairedScores:
    """Two aligned score sequences; pairs with a NaN on either side are dropped."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64).ravel()
        y = np.asarray(self.y, dtype=np.float64).ravel()
        if x.shape != y.shape:
            raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
        keep = ~(np.isnan(x) | np.isnan(y))
        self.x, self.y = x[keep], y[keep]

    def __len__(self) -> int:
        return len(self.x)


@dataclass
class RaterMatrix:
    scores: np.ndarray  # raters x items, NaN = missing
    rater_ids: list[str] = field(default_factory=list)
    item_ids: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.scores = np.atleast_2d(np.asarray(self.scores, dtype=np.float64))
        r, i = self.scores.shape
        self.rater_ids = list(self.rater_ids) or [f"A{k + 1}" for k in range(r)]
        self.item_ids = list(self.item_ids) or [str(k) for k in range(i)]
        if len(self.rater_ids) != r or len(self.item_ids) != i:
            raise ValueError("id lists do not match the score grid")


def _pairs(x, y=None) -> PairedScores:
    if isinstance(x, PairedScores):
        return x
    return PairedScores(x, y)


def _check_corr_input(p: PairedScores) -> None:
    if len(p) < 3:
        raise DegenerateInput(f"need at least 3 pairs, got {len(p)}")
    if np.ptp(p.x) == 0 or np.ptp(p.y) == 0:
        raise DegenerateInput("constant sequence")


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc, yc = x - x.mean(), y - y.mean()
    # rescale first so tiny or huge values cannot under/overflow the products
    xc = xc / np.max(np.abs(xc))
    yc = yc / np.max(np.abs(yc))
    denom = math.sqrt((xc @ xc) * (yc @ yc))
    if denom == 0 or not math.isfinite(denom):
        raise DegenerateInput("zero variance after centring")
    r = float(xc @ yc / denom)
    return max(-1.0, min(1.0, r))


def preference_score(ratings: Sequence[float]) -> float:
    """Mean of per-rater preference ratings on [-2, 2]."""
    if len(ratings) == 0:
        raise EmptyInput("no ratings")
    return float(np.mean(ratings))


def plcc(x, y=None) -> float:
    p = _pairs(x, y)
    _check_corr_input(p)
    return _pearson(p.x, p.y)


def srcc(x, y=None) -> float:
    """Spearman: Pearson correlation of mid-ranks."""
    p = _pairs(x, y)
    _check_corr_input(p)
    return _pearson(sps.rankdata(p.x), sps.rankdata(p.y))


def krcc(x, y=None) -> float:
    """Kendall tau-b."""
    p = _pairs(x, y)
    _check_corr_input(p)
    return float(sps.kendalltau(p.x, p.y, variant="b").statistic)


def mae(x, y=None) -> float:
    p = _pairs(x, y)
    if len(p) == 0:
        raise EmptyInput("no pairs")
    return float(np.mean(np.abs(p.x - p.y)))


def quantize(values, levels: Sequence[float] = DEFAULT_LEVELS) -> np.ndarray:
    """Index of the nearest level for each value."""
    levels = np.asarray(levels, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    return np.abs(values[:, None] - levels[None, :]).argmin(axis=1)


def rescale(values, src: tuple[float, float] = (-2.0, 2.0), dst: tuple[float, float] = (1.0, 5.0)) -> np.ndarray:
    """Linear map from ``src`` to ``dst`` (e.g. preference scale onto the 1-5 grid)."""
    values = np.asarray(values, dtype=np.float64)
    return dst[0] + (values - src[0]) * (dst[1] - dst[0]) / (src[1] - src[0])


def qwk(x, y=None, levels: Sequence[float] = DEFAULT_LEVELS) -> float:
    """Quadratic weighted kappa after snapping both sides onto ``levels``."""
    p = _pairs(x, y)
    if len(p) == 0:
        raise EmptyInput("no pairs")
    n_levels = len(levels)
    a, b = quantize(p.x, levels), quantize(p.y, levels)
    if len(np.unique(a)) < 2 or len(np.unique(b)) < 2:
        raise DegenerateInput("a single level used on one side")
    observed = np.zeros((n_levels, n_levels))
    np.add.at(observed, (a, b), 1.0)
    observed /= observed.sum()
    expected = np.outer(observed.sum(axis=1), observed.sum(axis=0))
    idx = np.arange(n_levels)
    weights = (idx[:, None] - idx[None, :]) ** 2 / (n_levels - 1) ** 2
    return float(1.0 - (weights * observed).sum() / (weights * expected).sum())


def all_stats(x, y=None, levels: Sequence[float] = DEFAULT_LEVELS) -> dict[str, float]:
    """The five statistics; a degenerate one is reported as NaN."""
    p = _pairs(x, y)
    out = {}
    for name, fn in (("PLCC", plcc), ("SRCC", srcc), ("KRCC", krcc)):
        try:
            out[name] = fn(p)
        except DegenerateInput:
            out[name] = math.nan
    try:
        out["QWK"] = qwk(p, levels=levels)
    except (DegenerateInput, EmptyInput):
        out["QWK"] = math.nan
    try:
        out["MAE"] = mae(p)
    except EmptyInput:
        out["MAE"] = math.nan
    return out


def leave_one_out_rater_corr(m: RaterMatrix, levels: Sequence[float] = DEFAULT_LEVELS) -> list[dict]:
    """Each rater against the per-item mean of all other raters."""
    scores = m.scores
    n_raters = scores.shape[0]
    if n_raters < 3:
        raise InsufficientRaters(f"need at least 3 raters, got {n_raters}")
    counts = (~np.isnan(scores)).sum(axis=0)
    if np.any(counts < 2):
        bad = [m.item_ids[i] for i in np.flatnonzero(counts < 2)]
        raise InsufficientRaters(f"items rated by fewer than 2 raters: {bad[:5]}")

    rows = []
    for r in range(n_raters):
        others = np.delete(scores, r, axis=0)
        valid = (~np.isnan(others)).sum(axis=0)
        total = np.nansum(others, axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            rest = np.where(valid > 0, total / np.maximum(valid, 1), np.nan)
        row = {"rater": m.rater_ids[r]}
        row.update(all_stats(scores[r], rest, levels))
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# CSV input


def _cell(value: str) -> float:
    value = value.strip()
    if value == "" or value.lower() in ("nan", "na", "n/a"):
        return math.nan
    return float(value)


def _is_number(value: str) -> bool:
    try:
        _cell(value)
    except ValueError:
        return False
    return True


def load_pairs_csv(path, x_col: str | None = None, y_col: str | None = None) -> PairedScores:
    """Two numeric columns. A header row is optional; named columns require one."""
    with open(path, newline="", encoding="utf-8") as f:
        rows = [r for r in csv.reader(f) if r and any(c.strip() for c in r)]
    if not rows:
        raise EmptyInput(f"{path}: no rows")
    header = None if all(_is_number(c) for c in rows[0]) else rows[0]
    body = rows[1:] if header is not None else rows
    if x_col is not None or y_col is not None:
        if header is None:
            raise ValueError("column names given but the file has no header")
        ix, iy = header.index(x_col or header[0]), header.index(y_col or header[1])
    else:
        ix, iy = 0, 1
    try:
        x = [_cell(r[ix]) for r in body]
        y = [_cell(r[iy]) for r in body]
    except (IndexError, ValueError) as exc:
        raise ValueError(f"{path}: bad row ({exc})") from None
    return PairedScores(np.array(x), np.array(y))


def load_rater_matrix_csv(path) -> RaterMatrix:
    """Header ``item,<rater>,...``; one row per item; empty cells are missing."""
    with open(path, newline="", encoding="utf-8") as f:
        rows = [r for r in csv.reader(f) if r and any(c.strip() for c in r)]
    if len(rows) < 2:
        raise EmptyInput(f"{path}: need a header and at least one item row")
    header, body = rows[0], rows[1:]
    raters = [h.strip() for h in header[1:]]
    try:
        grid = [[_cell(c) for c in r[1:len(header)]] + [math.nan] * (len(header) - len(r)) for r in body]
    except ValueError as exc:
        raise ValueError(f"{path}: bad cell ({exc})") from None
    return RaterMatrix(np.array(grid).T, raters, [r[0].strip() for r in body])


def format_table(rows: list[dict], columns: Sequence[str]) -> str:
    """Plain CSV text with 4-decimal numbers (NaN as ``nan``)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([f"{v:.4f}" if isinstance(v, float) else v for v in (row[c] for c in columns)])
    return buf.getvalue()
