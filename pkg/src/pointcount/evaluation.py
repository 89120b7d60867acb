"""Decoding, scoring and statistics.

Words are integers: ``0`` is silence and ``k`` is the number word ``k``.
Pointed positions reuse the gesture labels of :mod:`pointcount.datagen`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc

from .datagen import MAX_OBJECTS, SequenceArrays, gesture_vocabulary, rest_label, Convention
from .gestures import BASE, GestureTable

SILENCE = 0
SILENCE_THRESHOLD = 0.5


def decode_numbers(number_outputs) -> np.ndarray:
    """Per-step words from number-unit activations of shape ``(..., 10)``.

    Silence when the strongest unit is below 0.5; otherwise the argmax
    unit's word (ties go to the lowest index).
    """
    y = np.asarray(number_outputs, dtype=float)
    return np.where(y.max(axis=-1) < SILENCE_THRESHOLD, SILENCE, y.argmax(axis=-1) + 1)


def decode_gestures(gesture_outputs, table: GestureTable, convention) -> np.ndarray:
    """Nearest canonical gesture label for each 3-vector in ``gesture_outputs``.

    Candidates are the 21 table entries plus, under "stay at the last one",
    the zero signal. Under "go to base" the rest signal is the base posture
    itself, already in the table.
    """
    convention = Convention.parse(convention)
    vocab = gesture_vocabulary(table)
    labels = np.arange(len(vocab))
    if convention is Convention.GO_TO_BASE:
        vocab, labels = vocab[:BASE + 1], labels[:BASE + 1]
    g = np.asarray(gesture_outputs, dtype=float)
    d2 = np.sum((g[..., None, :] - vocab) ** 2, axis=-1)
    return labels[np.argmin(d2, axis=-1)]


@dataclass
class DecodedSequence:
    words: np.ndarray
    pointed: np.ndarray | None = None


def counting_scores(words, target_words) -> np.ndarray:
    """1.0 for each sequence whose decoded words match at every step, else 0.0."""
    return np.all(np.asarray(words) == np.asarray(target_words), axis=-1).astype(float)


def gesture_scores(pointed, target_labels, numerosity) -> np.ndarray:
    """Fraction of correctly pointed steps among the first ``n + 1`` of each sequence."""
    pointed = np.asarray(pointed)
    window = np.arange(pointed.shape[-1])[None, :] <= np.asarray(numerosity)[:, None]
    hits = (pointed == np.asarray(target_labels)) & window
    return hits.sum(axis=-1) / window.sum(axis=-1)


def score_pair(decoded: DecodedSequence, pair) -> tuple[float, float | None]:
    """Score one decoded trigger-on sequence against its pair's targets."""
    on = pair.on_sequence
    count = float(counting_scores(np.atleast_2d(decoded.words), on.words)[0])
    if decoded.pointed is None:
        return count, None
    return count, float(gesture_scores(np.atleast_2d(decoded.pointed), on.gesture_labels, on.numerosity)[0])


@dataclass
class AccuracyReport:
    """Scores over numerosities 1..10 of the trigger-on sequences.

    ``off_silence`` is the fraction of trigger-off sequences that stay
    silent (numbers) and at rest (gestures) at every step; it is reported
    separately and does not enter the headline accuracies.
    """

    counting_accuracy: float | None
    gesture_accuracy: float | None
    counting_by_numerosity: dict[int, float] = field(default_factory=dict)
    gesture_by_numerosity: dict[int, float] = field(default_factory=dict)
    off_silence: float | None = None

    def to_dict(self) -> dict:
        return {
            "counting_accuracy": self.counting_accuracy,
            "gesture_accuracy": self.gesture_accuracy,
            "counting_by_numerosity": {str(k): v for k, v in self.counting_by_numerosity.items()},
            "gesture_by_numerosity": {str(k): v for k, v in self.gesture_by_numerosity.items()},
            "off_silence": self.off_silence,
        }


def accuracy_report(numbers_out, gestures_out, data: SequenceArrays, table: GestureTable | None) -> AccuracyReport:
    """Score network outputs for every sequence in ``data``."""
    on = data.trigger[:, 0] > 0.5
    counted = on & (data.numerosity >= 1) & (data.numerosity <= MAX_OBJECTS)
    words = decode_numbers(numbers_out) if numbers_out is not None else None
    pointed = decode_gestures(gestures_out, table, data.convention) if gestures_out is not None else None

    c_acc = g_acc = None
    c_by, g_by = {}, {}
    off_ok = np.ones(int((~on).sum()), dtype=bool)
    if words is not None:
        c = counting_scores(words, data.words)
        c_acc = float(c[counted].mean())
        c_by = {n: float(c[counted & (data.numerosity == n)].mean()) for n in range(1, MAX_OBJECTS + 1)}
        off_ok &= np.all(words[~on] == SILENCE, axis=-1)
    if pointed is not None:
        g = gesture_scores(pointed, data.gesture_labels, data.numerosity)
        g_acc = float(g[counted].mean())
        g_by = {n: float(g[counted & (data.numerosity == n)].mean()) for n in range(1, MAX_OBJECTS + 1)}
        off_ok &= np.all(pointed[~on] == rest_label(data.convention), axis=-1)
    return AccuracyReport(c_acc, g_acc, c_by, g_by, float(off_ok.mean()) if off_ok.size else None)


@dataclass
class AnovaResult:
    F: float
    df_between: int
    df_within: int
    p: float


def f_upper_tail(f: float, d1: int, d2: int) -> float:
    """P(X > f) for X ~ F(d1, d2), via the regularised incomplete beta function."""
    if f <= 0.0:
        return 1.0
    if np.isinf(f):
        return 0.0
    return float(betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f)))


def one_way_anova(*groups) -> AnovaResult:
    """One-way ANOVA F test across two or more groups of observations."""
    groups = [np.asarray(g, dtype=float).ravel() for g in groups]
    if len(groups) < 2:
        raise ValueError("one_way_anova needs at least two groups")
    if any(g.size == 0 for g in groups):
        raise ValueError("every group needs at least one observation")
    n_total = sum(g.size for g in groups)
    df_b, df_w = len(groups) - 1, n_total - len(groups)
    if df_w < 1:
        raise ValueError("not enough observations for a within-group variance")
    grand = np.concatenate(groups).mean()
    ss_b = sum(g.size * (g.mean() - grand) ** 2 for g in groups)
    ss_w = sum(np.sum((g - g.mean()) ** 2) for g in groups)
    # Differences below round-off of the data are treated as exact ties.
    scale = max(1.0, float(np.max(np.abs(np.concatenate(groups)))))
    if ss_b <= (1e-12 * scale) ** 2 * n_total:
        return AnovaResult(0.0, df_b, df_w, 1.0)
    if ss_w == 0.0:
        return AnovaResult(float("inf"), df_b, df_w, 0.0)
    f = (ss_b / df_b) / (ss_w / df_w)
    return AnovaResult(float(f), df_b, df_w, f_upper_tail(f, df_b, df_w))


def aggregate(values) -> tuple[float, float]:
    """Mean and sample (n - 1) standard deviation."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise ValueError("need at least two values for a sample standard deviation")
    return float(v.mean()), float(v.std(ddof=1))
