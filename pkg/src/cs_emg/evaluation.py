"""Clinical classification metrics. The positive class (1) is the patient."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import UndefinedAUCError

UNDEFINED = None


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def p(self):
        return self.tp + self.fn

    @property
    def n(self):
        return self.tn + self.fp

    @property
    def total(self):
        return self.tp + self.tn + self.fp + self.fn


def _binary(name, values):
    a = np.asarray(values)
    if a.ndim != 1 or a.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-d sequence")
    if not np.all((a == 0) | (a == 1)):
        raise ValueError(f"{name} must contain only 0 and 1")
    return a.astype(int)


def confusion_counts(predicted, truth):
    pred = _binary("predicted", predicted)
    true = _binary("truth", truth)
    if pred.size != true.size:
        raise ValueError(f"length mismatch: {pred.size} predictions vs {true.size} labels")
    return ConfusionCounts(
        tp=int(np.sum((pred == 1) & (true == 1))),
        tn=int(np.sum((pred == 0) & (true == 0))),
        fp=int(np.sum((pred == 1) & (true == 0))),
        fn=int(np.sum((pred == 0) & (true == 1))),
    )


def metrics(counts):
    """(accuracy, sensitivity, specificity); an empty class gives ``UNDEFINED``."""
    if counts.total == 0:
        raise ValueError("no predictions")
    accuracy = (counts.tp + counts.tn) / (counts.p + counts.n)
    sensitivity = counts.tp / counts.p if counts.p else UNDEFINED
    specificity = counts.tn / counts.n if counts.n else UNDEFINED
    return accuracy, sensitivity, specificity


def _scores_truth(scores, truth):
    s = np.asarray(scores, dtype=np.float64)
    t = _binary("truth", truth)
    if s.shape != t.shape:
        raise ValueError("scores and truth differ in length")
    n_pos = int(t.sum())
    n_neg = t.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUCError("AUC needs both classes in the truth labels")
    return s, t, n_pos, n_neg


def auc(scores, truth):
    """P(score of a random positive > score of a random negative), ties count 1/2.

    Computed from mid-ranks (Mann-Whitney U).
    """
    s, t, n_pos, n_neg = _scores_truth(scores, truth)
    ranks = rankdata(s)
    u = ranks[t == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_curve(scores, truth):
    """ROC vertices (fpr, tpr), one per distinct score threshold, from (0,0) to (1,1)."""
    s, t, n_pos, n_neg = _scores_truth(scores, truth)
    order = np.argsort(-s, kind="mergesort")
    s, t = s[order], t[order]
    last_of_group = np.r_[np.diff(s) != 0, True]
    tps = np.cumsum(t)[last_of_group]
    fps = np.cumsum(1 - t)[last_of_group]
    return np.r_[0.0, fps / n_neg], np.r_[0.0, tps / n_pos]


def trapezoid_auc(scores, truth):
    fpr, tpr = roc_curve(scores, truth)
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    sensitivity: float
    specificity: float
    auc: float
    counts: ConfusionCounts

    def to_json(self):
        d = asdict(self)
        d["counts"] = asdict(self.counts)
        return d

    def dumps(self):
        return json.dumps(self.to_json(), indent=2)

    def table(self, name="model"):
        def fmt(v, pct):
            if v is UNDEFINED:
                return "undef"
            return f"{100 * v:.2f}%" if pct else f"{v:.4f}"

        header = f"{'Model':<12}{'AUC':>10}{'Accuracy':>12}{'Sensitivity':>13}{'Specificity':>13}"
        row = (f"{name:<12}{fmt(self.auc, False):>10}{fmt(self.accuracy, True):>12}"
               f"{fmt(self.sensitivity, True):>13}{fmt(self.specificity, True):>13}")
        return header + "\n" + row


def evaluate(patient_scores, predicted, truth):
    """Full report from patient-class probabilities and hard predictions."""
    counts = confusion_counts(predicted, truth)
    acc, sens, spec = metrics(counts)
    try:
        area = auc(patient_scores, truth)
    except UndefinedAUCError:
        area = UNDEFINED
    return MetricsReport(acc, sens, spec, area, counts)
