"""Noise-invariant frame selection.

Each frame of an utterance is scored by how far its feature vector moves
when the utterance is corrupted by K synthetic noise constraints. Frames
that barely move are "noise invariant" and get kept. Two selectors are
provided:

fused
    per-constraint distances are combined into one score per frame
    (non-negative weight per constraint plus a bias) and the fraction ``w``
    of frames with the smallest scores is kept.

intersection
    frames are ranked per constraint individually; the kept set is the
    intersection of the per-constraint top-``w`` subsets. This is the
    one-parameter simplification (all weights equal, zero bias) and the
    variant the experiments default to.

Finding a good ``w`` is a linear search over a grid (see
:func:`sweep_threshold`); gradient-based tuning of the fusion weights is
deliberately not provided, the weights are plain configuration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .audio import Utterance
from .exceptions import (
    ConsistencyError,
    EmptySelectionError,
    FrameCorrespondenceError,
    InvalidInputError,
)
from .features import FeatureMatrix, FrameConfig, MfccConfig, extract_mfcc
from .noise import NoiseConstraint, generate_noise, mix_at_snr
from .synth import child_seed


@dataclass
class DistanceTable:
    """Per-frame, per-constraint Euclidean feature distances (N x K)."""

    values: np.ndarray
    constraint_ids: list[str]
    frame_indices: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        idx = np.asarray(self.frame_indices, dtype=np.int64)
        if values.ndim != 2:
            raise InvalidInputError(f"distance table must be 2-D, got shape {values.shape}")
        if values.shape[1] != len(self.constraint_ids):
            raise InvalidInputError("one constraint id required per column")
        if idx.shape != (values.shape[0],):
            raise InvalidInputError("one frame index required per row")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise InvalidInputError("distances must be finite and non-negative")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "frame_indices", idx)

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_constraints(self) -> int:
        return self.values.shape[1]


@dataclass
class FusionParams:
    """Per-constraint fusion weights plus a score bias."""

    weights: np.ndarray
    bias: float = 0.0

    def __post_init__(self):
        weights = np.atleast_1d(np.asarray(self.weights, dtype=np.float64))
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise InvalidInputError("fusion weights must be finite and >= 0")
        if not np.isfinite(self.bias):
            raise InvalidInputError("fusion bias must be finite")
        object.__setattr__(self, "weights", weights)

    @classmethod
    def equal(cls, k: int, weight: float = 1.0, bias: float = 0.0) -> "FusionParams":
        return cls(np.full(k, weight), bias)


@dataclass
class SelectionResult:
    """Frames kept by a selection run.

    ``scores`` holds the fused score of each selected frame for the fused
    method and is ``None`` for the intersection method.
    """

    selected: np.ndarray
    scores: np.ndarray | None
    threshold_w: float
    method: str

    def __post_init__(self):
        sel = np.asarray(self.selected, dtype=np.int64)
        if sel.size == 0:
            raise EmptySelectionError("selection must be non-empty")
        if sel.size > 1 and not np.all(np.diff(sel) > 0):
            raise InvalidInputError("selected frame indices must be strictly increasing")
        object.__setattr__(self, "selected", sel)
        if self.scores is not None:
            scores = np.asarray(self.scores, dtype=np.float64)
            if scores.shape != sel.shape:
                raise InvalidInputError("one score required per selected frame")
            object.__setattr__(self, "scores", scores)
        if self.method not in ("fused", "intersection"):
            raise InvalidInputError(f"unknown selection method '{self.method}'")

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "w": float(self.threshold_w),
            "selected": [int(i) for i in self.selected],
            "scores": None if self.scores is None else [float(s) for s in self.scores],
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "SelectionResult":
        return cls(
            selected=np.asarray(obj["selected"], dtype=np.int64),
            scores=None if obj.get("scores") is None else np.asarray(obj["scores"]),
            threshold_w=float(obj["w"]),
            method=str(obj["method"]),
        )


def selection_size(w: float, n_frames: int) -> int:
    """Number of frames kept at threshold ``w``: ceil(w * N)."""
    if not 0.0 < w <= 1.0:
        raise InvalidInputError(f"threshold w must be in (0, 1], got {w}")
    if n_frames < 1:
        raise InvalidInputError("need at least one frame")
    return min(n_frames, math.ceil(w * n_frames))


def distance_table(orig: FeatureMatrix, noisy: list[FeatureMatrix],
                   constraint_ids: list[str] | None = None) -> DistanceTable:
    """Euclidean distance between original and each noisy copy, per frame.

    All matrices must agree on frame count, dimension and frame indices;
    a mismatch means framing broke upstream and raises
    :class:`FrameCorrespondenceError`.
    """
    if len(noisy) == 0:
        raise InvalidInputError("need at least one noisy feature matrix")
    for k, fm in enumerate(noisy):
        if fm.data.shape != orig.data.shape or not np.array_equal(
            fm.frame_indices, orig.frame_indices
        ):
            raise FrameCorrespondenceError(
                f"noisy copy {k} has frame layout {fm.data.shape} vs original "
                f"{orig.data.shape} (or mismatched frame indices)"
            )
    columns = [np.linalg.norm(orig.data - fm.data, axis=1) for fm in noisy]
    if constraint_ids is None:
        constraint_ids = [f"constraint{k}" for k in range(len(noisy))]
    return DistanceTable(np.stack(columns, axis=1), list(constraint_ids), orig.frame_indices)


def fused_scores(table: DistanceTable, params: FusionParams) -> np.ndarray:
    """Weighted sum of distance columns plus bias, one score per frame."""
    if params.weights.shape[0] != table.n_constraints:
        raise InvalidInputError(
            f"got {params.weights.shape[0]} weights for {table.n_constraints} constraints"
        )
    return table.values @ params.weights + params.bias


def _top_rows(scores: np.ndarray, frame_indices: np.ndarray, m: int) -> np.ndarray:
    """Row positions of the m smallest scores; ties go to smaller frame index."""
    order = np.lexsort((frame_indices, scores))
    return order[:m]


def select_top_fused(scores: np.ndarray, frame_indices: np.ndarray, w: float) -> SelectionResult:
    """Keep the ceil(w*N) frames with the smallest fused scores."""
    scores = np.asarray(scores, dtype=np.float64)
    frame_indices = np.asarray(frame_indices, dtype=np.int64)
    if scores.shape != frame_indices.shape:
        raise InvalidInputError("scores and frame_indices must align")
    m = selection_size(w, scores.shape[0])
    rows = _top_rows(scores, frame_indices, m)
    order = np.argsort(frame_indices[rows])
    rows = rows[order]
    return SelectionResult(frame_indices[rows], scores[rows], w, "fused")


def select_intersection(table: DistanceTable, w: float) -> SelectionResult:
    """Intersect the per-constraint top-ceil(w*N) subsets.

    Raises :class:`EmptySelectionError` (carrying the per-constraint subset
    sizes) when the subsets share no frame; callers may retry with a larger
    ``w``.
    """
    m = selection_size(w, table.n_frames)
    keep = np.ones(table.n_frames, dtype=bool)
    for k in range(table.n_constraints):
        mask = np.zeros(table.n_frames, dtype=bool)
        mask[_top_rows(table.values[:, k], table.frame_indices, m)] = True
        keep &= mask
    if not np.any(keep):
        raise EmptySelectionError(
            f"intersection of {table.n_constraints} subsets of size {m} "
            f"(w={w}, N={table.n_frames}) is empty",
            subset_sizes=[m] * table.n_constraints,
        )
    return SelectionResult(np.sort(table.frame_indices[keep]), None, w, "intersection")


def apply_selection(features: FeatureMatrix, sel: SelectionResult) -> FeatureMatrix:
    """Row-subset of ``features`` keeping only the selected frames."""
    positions = {int(fi): row for row, fi in enumerate(features.frame_indices)}
    try:
        rows = np.array([positions[int(fi)] for fi in sel.selected], dtype=np.int64)
    except KeyError as exc:
        raise ConsistencyError(
            f"selected frame {exc.args[0]} not present in the feature matrix"
        ) from exc
    return FeatureMatrix(
        features.data[rows], features.frame_indices[rows], source_id=features.source_id
    )


def _realize_constraint_noise(constraint: NoiseConstraint, n_samples: int,
                              rate: int, seed: int, index: int) -> Utterance:
    if isinstance(constraint.noise_source, Utterance):
        return constraint.noise_source
    return generate_noise(constraint.noise_source, n_samples, rate, child_seed(seed, index))


def constraint_distance_table(
    utt: Utterance,
    constraints: list[NoiseConstraint],
    fcfg: FrameConfig,
    mcfg: MfccConfig,
    seed: int = 0,
) -> tuple[FeatureMatrix, DistanceTable]:
    """Features of the clean utterance plus its distance table under the constraints."""
    if len(constraints) == 0:
        raise InvalidInputError("need at least one noise constraint")
    orig = extract_mfcc(utt, fcfg, mcfg)
    noisy = []
    for k, constraint in enumerate(constraints):
        noise = _realize_constraint_noise(constraint, utt.n_samples, utt.sample_rate, seed, k)
        mixed = mix_at_snr(utt, noise, constraint.snr_db)
        noisy.append(extract_mfcc(mixed, fcfg, mcfg))
    table = distance_table(orig, noisy, [c.noise_id for c in constraints])
    return orig, table


def nifs_select(
    utt: Utterance,
    constraints: list[NoiseConstraint],
    fcfg: FrameConfig,
    mcfg: MfccConfig,
    w: float,
    method: str = "intersection",
    params: FusionParams | None = None,
    seed: int = 0,
) -> tuple[FeatureMatrix, SelectionResult]:
    """Run the full selection pipeline on one utterance.

    Mixes each constraint noise into the utterance at its target SNR,
    extracts features from the original and all noisy copies, builds the
    distance table, selects frames by ``method``, and returns the selected
    rows of the *original* utterance's features together with the
    selection. Deterministic given ``seed``.
    """
    orig, table = constraint_distance_table(utt, constraints, fcfg, mcfg, seed)
    if method == "fused":
        if params is None:
            params = FusionParams(np.array([c.weight for c in constraints]))
        sel = select_top_fused(fused_scores(table, params), table.frame_indices, w)
    elif method == "intersection":
        sel = select_intersection(table, w)
    else:
        raise InvalidInputError(f"unknown selection method '{method}'")
    return apply_selection(orig, sel), sel


@dataclass
class ThresholdSweepPoint:
    """Summary of one grid point of a threshold sweep."""

    w: float
    mean_distance: float
    n_selected: int
    n_empty: int = 0


def sweep_threshold(
    tables,
    w_grid,
    method: str = "intersection",
    params: FusionParams | None = None,
) -> list[ThresholdSweepPoint]:
    """Selection quality/size trade-off over a grid of thresholds.

    For each ``w`` the selection is run on every table and the mean
    constraint-averaged distance of the selected frames is reported along
    with the total number of selected frames. Tables whose intersection
    comes out empty are counted in ``n_empty`` instead of aborting the
    sweep.
    """
    if isinstance(tables, DistanceTable):
        tables = [tables]
    w_grid = [float(w) for w in w_grid]
    if any(not 0.0 < w <= 1.0 for w in w_grid):
        raise InvalidInputError("w_grid values must lie in (0, 1]")
    if sorted(w_grid) != w_grid:
        raise InvalidInputError("w_grid must be sorted ascending")
    points = []
    for w in w_grid:
        total = 0.0
        n_selected = 0
        n_empty = 0
        for table in tables:
            row_means = table.values.mean(axis=1)
            by_frame = dict(zip(table.frame_indices.tolist(), row_means))
            try:
                if method == "fused":
                    p = params if params is not None else FusionParams.equal(table.n_constraints)
                    sel = select_top_fused(fused_scores(table, p), table.frame_indices, w)
                else:
                    sel = select_intersection(table, w)
            except EmptySelectionError:
                n_empty += 1
                continue
            total += sum(by_frame[int(fi)] for fi in sel.selected)
            n_selected += sel.selected.size
        mean = total / n_selected if n_selected else float("nan")
        points.append(ThresholdSweepPoint(w, mean, n_selected, n_empty))
    return points


class NoiseInvariantFrameSelector(BaseEstimator):
    """Estimator-style wrapper around :func:`nifs_select`.

    The selector is stateless (``fit`` only validates parameters), so it
    slots into pipelines as a plain transformer over utterances.

    Parameters
    ----------
    constraints : list of NoiseConstraint
        The synthetic perturbations used for scoring.
    w : float, default=0.9
        Fraction of frames each ranked subset keeps.
    method : {"intersection", "fused"}, default="intersection"
        Selection rule.
    weights : array-like or None
        Fusion weights (fused method only). ``None`` takes each
        constraint's own weight.
    bias : float, default=0.0
        Fused-score bias term.
    frame_config, mfcc_config : optional
        Front-end settings; defaults are the 24-dim layout.
    random_state : int, default=0
        Seed for generated constraint noise.
    """

    def __init__(self, constraints=None, w=0.9, method="intersection",
                 weights=None, bias=0.0, frame_config=None, mfcc_config=None,
                 random_state=0):
        self.constraints = constraints
        self.w = w
        self.method = method
        self.weights = weights
        self.bias = bias
        self.frame_config = frame_config
        self.mfcc_config = mfcc_config
        self.random_state = random_state

    def _resolved(self):
        if not self.constraints:
            raise InvalidInputError("selector needs at least one noise constraint")
        fcfg = self.frame_config if self.frame_config is not None else FrameConfig()
        mcfg = self.mfcc_config if self.mfcc_config is not None else MfccConfig()
        params = None
        if self.weights is not None:
            params = FusionParams(np.asarray(self.weights, dtype=np.float64), self.bias)
        elif self.bias != 0.0:
            params = FusionParams(
                np.array([c.weight for c in self.constraints]), self.bias
            )
        return fcfg, mcfg, params

    def fit(self, X=None, y=None):
        """No-op; validates parameters and returns self."""
        self._resolved()
        selection_size(self.w, 1)
        return self

    def select(self, utt: Utterance) -> tuple[FeatureMatrix, SelectionResult]:
        """Selected features plus the selection itself for one utterance."""
        fcfg, mcfg, params = self._resolved()
        return nifs_select(
            utt, list(self.constraints), fcfg, mcfg, self.w,
            method=self.method, params=params, seed=self.random_state,
        )

    def transform(self, X):
        """Selected features for one utterance or a sequence of them."""
        if isinstance(X, Utterance):
            return self.select(X)[0]
        return [self.select(utt)[0] for utt in X]

    def fit_transform(self, X, y=None):
        return self.fit().transform(X)
