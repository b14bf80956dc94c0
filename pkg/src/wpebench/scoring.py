"""Cosine trial scoring and detection metrics (EER, minDCF, DET points).

Decision rule throughout: accept when ``score >= threshold``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateInputError, FormatError
from .features import cosine_similarity

LABELS = ("target", "nontarget")


@dataclass(frozen=True)
class Trial:
    enroll: str
    test: str
    label: str

    def __post_init__(self):
        if not self.enroll or not self.test:
            raise ConfigError("trial ids must be nonempty")
        if self.label not in LABELS:
            raise ConfigError(f"trial label must be target/nontarget, got {self.label!r}")


@dataclass(frozen=True)
class TrialList:
    entries: tuple

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True, eq=False)
class TrialScoreSet:
    target_scores: np.ndarray
    nontarget_scores: np.ndarray

    def __post_init__(self):
        tar = np.array(self.target_scores, dtype=np.float64).ravel()
        non = np.array(self.nontarget_scores, dtype=np.float64).ravel()
        if tar.size == 0 or non.size == 0:
            raise DegenerateInputError("need at least one target and one nontarget score")
        if not (np.all(np.isfinite(tar)) and np.all(np.isfinite(non))):
            raise ConfigError("scores must be finite")
        object.__setattr__(self, "target_scores", tar)
        object.__setattr__(self, "nontarget_scores", non)

    def swapped(self) -> "TrialScoreSet":
        return TrialScoreSet(self.nontarget_scores, self.target_scores)

    def mapped(self, fn) -> "TrialScoreSet":
        return TrialScoreSet(fn(self.target_scores), fn(self.nontarget_scores))


@dataclass(frozen=True)
class DcfParams:
    p_tar: float = 0.01
    c_miss: float = 1.0
    c_fa: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.p_tar < 1.0:
            raise ConfigError(f"p_tar must lie in (0, 1), got {self.p_tar}")
        if not (self.c_miss > 0 and self.c_fa > 0):
            raise ConfigError("costs must be positive")

    def to_dict(self) -> dict:
        return {"p_tar": self.p_tar, "c_miss": self.c_miss, "c_fa": self.c_fa}


def trial_scores(trials: TrialList, embeddings: dict) -> list:
    """Cosine score per trial as ``(enroll, test, score, label)`` rows, in trial order."""
    rows = []
    for t in trials:
        for utt in (t.enroll, t.test):
            if utt not in embeddings:
                raise KeyError(f"no embedding for utterance {utt!r}")
        rows.append((t.enroll, t.test, cosine_similarity(embeddings[t.enroll], embeddings[t.test]), t.label))
    return rows


def score_trials(trials: TrialList, embeddings: dict) -> TrialScoreSet:
    rows = trial_scores(trials, embeddings)
    return TrialScoreSet(
        [s for *_, s, lab in rows if lab == "target"],
        [s for *_, s, lab in rows if lab == "nontarget"],
    )


def operating_points(scores: TrialScoreSet, sentinels: bool = False):
    """Miss and false-alarm rates at each distinct score plus ``+inf``.

    With ``sentinels`` a leading ``-inf`` threshold is included as well.
    Returns ``(thresholds, p_miss, p_fa)`` with thresholds ascending.
    """
    tar = np.sort(scores.target_scores)
    non = np.sort(scores.nontarget_scores)
    thr = np.unique(np.concatenate([tar, non]))
    thr = np.concatenate([[-np.inf], thr, [np.inf]] if sentinels else [thr, [np.inf]])
    p_miss = np.searchsorted(tar, thr, side="left") / tar.size
    p_fa = (non.size - np.searchsorted(non, thr, side="left")) / non.size
    return thr, p_miss, p_fa


def eer(scores: TrialScoreSet):
    """Equal error rate and its threshold, interpolating linearly between straddling points."""
    thr, pm, pf = operating_points(scores)
    diff = pm - pf
    # diff runs from -1 (lowest score) to +1 (reject everything) without decreasing
    hits = np.flatnonzero(diff == 0)
    if hits.size:
        i = hits[0]
        return float(pm[i]), float(thr[i])
    i = np.flatnonzero(diff < 0)[-1]
    s = -diff[i] / (diff[i + 1] - diff[i])
    rate = pm[i] + s * (pm[i + 1] - pm[i])
    t = thr[i] + s * (thr[i + 1] - thr[i]) if np.isfinite(thr[i + 1]) else thr[i]
    return float(rate), float(t)


def dcf_norm(params: DcfParams) -> float:
    return min(params.c_miss * params.p_tar, params.c_fa * (1.0 - params.p_tar))


def min_dcf(scores: TrialScoreSet, params: DcfParams | None = None):
    """Normalised minimum detection cost and the (lowest) threshold attaining it."""
    params = params or DcfParams()
    thr, pm, pf = operating_points(scores, sentinels=True)
    cost = params.c_miss * params.p_tar * pm + params.c_fa * (1.0 - params.p_tar) * pf
    cost = cost / dcf_norm(params)
    i = int(np.argmin(cost))
    return float(cost[i]), float(thr[i])


def det_points(scores: TrialScoreSet) -> list:
    """``(p_fa, p_miss)`` pairs from accept-all down to reject-all."""
    _, pm, pf = operating_points(scores)
    return [(float(a), float(b)) for a, b in zip(pf, pm)]


def read_trials(path) -> TrialList:
    entries = []
    with open(os.fspath(path), encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 3:
                raise FormatError(f"{path}:{lineno}: expected '<enroll> <test> <target|nontarget>'")
            try:
                entries.append(Trial(*parts))
            except ConfigError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
    return TrialList(tuple(entries))


def write_trials(trials: TrialList, path):
    with open(os.fspath(path), "w", encoding="utf-8") as fh:
        for t in trials:
            fh.write(f"{t.enroll} {t.test} {t.label}\n")


def read_scores(path) -> dict:
    """Score file rows keyed by ``(enroll, test)``."""
    out = {}
    with open(os.fspath(path), encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 3:
                raise FormatError(f"{path}:{lineno}: expected '<enroll> <test> <score>'")
            try:
                out[(parts[0], parts[1])] = float(parts[2])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
    return out


def write_scores(rows, path):
    with open(os.fspath(path), "w", encoding="utf-8") as fh:
        for enroll, test, score, *_ in rows:
            fh.write(f"{enroll} {test} {score!r}\n")


def scores_for_trials(trials: TrialList, table: dict) -> TrialScoreSet:
    tar, non = [], []
    for t in trials:
        key = (t.enroll, t.test)
        if key not in table:
            raise KeyError(f"no score for trial {t.enroll} {t.test}")
        (tar if t.label == "target" else non).append(table[key])
    return TrialScoreSet(tar, non)


def write_det(points, path):
    with open(os.fspath(path), "w", encoding="utf-8") as fh:
        for p_fa, p_miss in points:
            fh.write(f"{p_fa!r} {p_miss!r}\n")
