"""Verification error rates: DET operating points and equal error rate.

Scores are oriented higher-is-target. The false-acceptance rate at
threshold t is the fraction of non-target trials scoring >= t; the
false-rejection rate is the fraction of target trials scoring < t. The EER
is taken at the FAR/FRR crossing with linear interpolation between the two
adjacent threshold steps where the sign of (FAR - FRR) flips.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import DegenerateTrialsError
from .validation import check_scores_labels


class DetPoint(NamedTuple):
    far: float
    frr: float
    threshold: float


def _far_frr_curve(scores, labels):
    """FAR/FRR evaluated at every distinct score plus one sentinel above max."""
    scores, labels = check_scores_labels(scores, labels)
    n_target = int(np.count_nonzero(labels))
    n_nontarget = labels.size - n_target
    if n_target == 0 or n_nontarget == 0:
        raise DegenerateTrialsError(
            f"need both trial classes, got {n_target} target / {n_nontarget} non-target"
        )
    target = np.sort(scores[labels])
    nontarget = np.sort(scores[~labels])
    thresholds = np.unique(scores)
    thresholds = np.append(thresholds, np.nextafter(thresholds[-1], np.inf))
    far = 1.0 - np.searchsorted(nontarget, thresholds, side="left") / n_nontarget
    frr = np.searchsorted(target, thresholds, side="left") / n_target
    return thresholds, far, frr, n_target, n_nontarget


def compute_eer(scores, labels) -> tuple[float, float]:
    """Equal error rate and its threshold.

    Raises :class:`DegenerateTrialsError` unless both classes are present.
    """
    thresholds, far, frr, _, _ = _far_frr_curve(scores, labels)
    diff = far - frr  # starts at +1, ends at -1, non-increasing
    i = int(np.argmax(diff <= 0.0))
    if i == 0:
        return float(far[0]), float(thresholds[0])
    # fraction of the way from step i-1 to step i where the interpolants meet
    span = diff[i - 1] - diff[i]
    s = diff[i - 1] / span if span > 0 else 0.0
    eer = far[i - 1] + s * (far[i] - far[i - 1])
    threshold = thresholds[i - 1] + s * (thresholds[i] - thresholds[i - 1])
    return float(eer), float(threshold)


def det_points(scores, labels) -> list[DetPoint]:
    """One (FAR, FRR, threshold) point per distinct score threshold.

    FAR is non-increasing and FRR non-decreasing along the returned list.
    """
    thresholds, far, frr, _, _ = _far_frr_curve(scores, labels)
    return [DetPoint(float(a), float(r), float(t)) for a, r, t in zip(far, frr, thresholds)]


@dataclass
class EvalReport:
    """EER plus the DET curve for one evaluation condition."""

    eer: float
    eer_threshold: float
    det: list[DetPoint]
    n_target: int
    n_nontarget: int
    condition: str
    n_failed_trials: int = 0

    def to_json_dict(self) -> dict:
        return {
            "condition": self.condition,
            "eer": self.eer,
            "eer_threshold": self.eer_threshold,
            "n_target": self.n_target,
            "n_nontarget": self.n_nontarget,
            "n_failed_trials": self.n_failed_trials,
            "det": [[p.far, p.frr, p.threshold] for p in self.det],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n"

    def det_csv(self) -> str:
        lines = ["far,frr,threshold"]
        lines += [f"{p.far!r},{p.frr!r},{p.threshold!r}" for p in self.det]
        return "\n".join(lines) + "\n"


def evaluate_trials(scores, labels, condition: str, n_failed: int = 0) -> EvalReport:
    """Bundle EER and DET points for one batch of scored trials."""
    thresholds, far, frr, n_target, n_nontarget = _far_frr_curve(scores, labels)
    eer, threshold = compute_eer(scores, labels)
    det = [DetPoint(float(a), float(r), float(t)) for a, r, t in zip(far, frr, thresholds)]
    return EvalReport(
        eer=eer,
        eer_threshold=threshold,
        det=det,
        n_target=n_target,
        n_nontarget=n_nontarget,
        condition=condition,
        n_failed_trials=n_failed,
    )
