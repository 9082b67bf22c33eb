from dataclasses import asdict, dataclass, field
from typing import Dict, Optional

import numpy as np

from .exceptions import SingleClass
from .manifest import BONAFIDE, FAKE

"""
Evaluation metrics used in "core.py" and "trainer.py"

Score polarity: higher score = more likely fake (label 1).
A sample scored exactly at the threshold is a "fake" decision.
"""


@dataclass
class EvalReport:
    eer_percent: float
    auc_percent: float
    eer_threshold: float
    n_bonafide: int
    n_fake: int
    per_attack: Optional[Dict[str, float]] = field(default=None)

    def to_dict(self):
        """flat JSON-ready dict (per_attack only when computed)"""
        report = asdict(self)
        if self.per_attack is None:
            report.pop("per_attack")
        return report


def _scored_set(scores, labels):
    """validated float64 scores and int labels"""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1).astype(np.int64)
    if scores.shape != labels.shape:
        raise ValueError(f"{scores.size} scores for {labels.size} labels")
    if not ((labels == BONAFIDE).any() and (labels == FAKE).any()):
        raise SingleClass(
            f"{int((labels == BONAFIDE).sum())} bonafide and "
            f"{int((labels == FAKE).sum())} fake samples, need both"
        )
    return scores, labels


def roc_curve(scores, labels):
    """ROC points of a descending threshold sweep

    One point per distinct score t: FPR = share of bonafide >= t,
    TPR = share of fake >= t; preceded by (0, 0) at threshold +inf.
    The lowest score yields (1, 1).

    Returns:
        (float array): false positive rates
        (float array): true positive rates
        (float array): thresholds
    """
    scores, labels = _scored_set(scores, labels)
    order = np.argsort(-scores, kind="mergesort")
    sorted_scores, sorted_fake = scores[order], labels[order] == FAKE
    # last position of each group of equal scores
    ends = np.r_[np.flatnonzero(np.diff(sorted_scores)), scores.size - 1]
    tp = np.cumsum(sorted_fake)[ends]
    fp = np.cumsum(~sorted_fake)[ends]
    tpr = np.r_[0.0, tp / sorted_fake.sum()]
    fpr = np.r_[0.0, fp / (~sorted_fake).sum()]
    thresholds = np.r_[np.inf, sorted_scores[ends]]
    return fpr, tpr, thresholds


def auc(scores, labels):
    """trapezoidal area under the ROC, in percent"""
    fpr, tpr, _ = roc_curve(scores, labels)
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2) * 100)


def eer(scores, labels):
    """Equal error rate (percent) and its threshold

    FAR(t) = share of bonafide >= t, FRR(t) = share of fake < t, swept
    along the ROC; between the two points around the crossing, both are
    interpolated linearly (and so is the threshold, when finite).

    Returns:
        (float): EER in percent
        (float): threshold at the crossing
    """
    far, tpr, thresholds = roc_curve(scores, labels)
    frr = 1 - tpr
    idx = int(np.argmax(far >= frr))  # far ends at 1, frr at 0
    if far[idx] == frr[idx]:
        return float(far[idx] * 100), float(thresholds[idx])
    gap_before = frr[idx - 1] - far[idx - 1]
    gap_after = far[idx] - frr[idx]
    alpha = gap_before / (gap_before + gap_after)
    rate = far[idx - 1] + alpha * (far[idx] - far[idx - 1])
    if np.isfinite(thresholds[idx - 1]):
        threshold = thresholds[idx - 1] + alpha * (thresholds[idx] - thresholds[idx - 1])
    else:
        threshold = thresholds[idx]
    return float(rate * 100), float(threshold)


def per_attack_eer(scores, labels, attacks):
    """EER (percent) of bonafide against each attack subset

    Returns:
        (dict): {attack tag: EER percent}, sorted by tag
    """
    scores, labels = _scored_set(scores, labels)
    attacks = np.asarray(attacks)
    bonafide = labels == BONAFIDE
    results = {}
    for tag in sorted(set(attacks[~bonafide].tolist())):
        subset = bonafide | (attacks == tag)
        results[tag] = eer(scores[subset], labels[subset])[0]
    return results


def evaluate_scores(scores, labels, attacks=None):
    """EvalReport of a scored set (per-attack EERs when -attacks given)"""
    scores, labels = _scored_set(scores, labels)
    eer_percent, threshold = eer(scores, labels)
    return EvalReport(
        eer_percent=eer_percent,
        auc_percent=auc(scores, labels),
        eer_threshold=threshold,
        n_bonafide=int((labels == BONAFIDE).sum()),
        n_fake=int((labels == FAKE).sum()),
        per_attack=None if attacks is None else per_attack_eer(scores, labels, attacks),
    )
