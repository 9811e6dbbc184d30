"""Registration quality metrics and approximation-set reports.

TRE maps target landmarks through the predicted field and measures the
distance to the paired source landmarks; folding counts non-positive
Jacobian determinants of x + u(x) on the interior forward-difference
stencil; Dice is reported hard (thresholded) here even though training
uses the soft variant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from modir import autodiff as ad
from modir.hypervolume import hypervolume, nondominated_sort
from modir.network import ModelParams, RegistrationPair, per_head_losses
from modir.synth import _sample_at


@dataclass
class TreResult:
    per_landmark: np.ndarray  # np.nan where excluded
    mean: float
    excluded: int


def tre(dvf: np.ndarray, target_landmarks: np.ndarray, source_landmarks: np.ndarray) -> TreResult:
    """Euclidean error of landmarks mapped by ``dvf`` (voxels).

    Out-of-bounds target landmarks are flagged (NaN), excluded from the
    mean, and counted.
    """
    u = np.asarray(dvf)
    if u.ndim == 4:
        u = u[0]
    _, h, w = u.shape
    t = np.asarray(target_landmarks, dtype=float)
    s = np.asarray(source_landmarks, dtype=float)
    inside = (
        (t[:, 0] >= 0) & (t[:, 0] <= w - 1) & (t[:, 1] >= 0) & (t[:, 1] <= h - 1)
    )
    out = np.full(len(t), np.nan)
    if inside.any():
        mapped = t[inside] + _sample_at(u, t[inside])
        out[inside] = np.linalg.norm(mapped - s[inside], axis=1)
    mean = float(np.nanmean(out)) if inside.any() else float("nan")
    return TreResult(per_landmark=out, mean=mean, excluded=int((~inside).sum()))


def jacobian_determinants(dvf: np.ndarray) -> np.ndarray:
    """det of the spatial Jacobian of x + u(x) on the (H-1)x(W-1) stencil."""
    u = np.asarray(dvf)
    if u.ndim == 4:
        u = u[0]
    ux, uy = u[0], u[1]
    dux_dx = ux[:-1, 1:] - ux[:-1, :-1]
    dux_dy = ux[1:, :-1] - ux[:-1, :-1]
    duy_dx = uy[:-1, 1:] - uy[:-1, :-1]
    duy_dy = uy[1:, :-1] - uy[:-1, :-1]
    return (1.0 + dux_dx) * (1.0 + duy_dy) - dux_dy * duy_dx


def folding_percent(dvf: np.ndarray) -> float:
    """Percent of interior stencil sites with det <= 0 (non-positive counted
    to be conservative about degenerate sites)."""
    det = jacobian_determinants(dvf)
    return float(100.0 * np.count_nonzero(det <= 0.0) / det.size)


@dataclass
class DiceResult:
    per_organ: np.ndarray  # percent
    mean: float
    empty_flagged: list[int] = field(default_factory=list)


def dice_score(warped_mask: np.ndarray, target_mask: np.ndarray, threshold: float = 0.5) -> DiceResult:
    """Hard Dice in percent per organ channel and their mean."""
    a = np.asarray(warped_mask) >= threshold
    b = np.asarray(target_mask) >= threshold
    if a.ndim == 4:
        a, b = a[0], b[0]
    scores = np.zeros(a.shape[0])
    flagged = []
    for k in range(a.shape[0]):
        denom = a[k].sum() + b[k].sum()
        if denom == 0:
            scores[k] = 100.0
            flagged.append(k)
        else:
            scores[k] = 200.0 * np.logical_and(a[k], b[k]).sum() / denom
    return DiceResult(per_organ=scores, mean=float(scores.mean()), empty_flagged=flagged)


@dataclass
class SolutionMetrics:
    solution_id: int
    mean_tre: float
    folding_pct: float
    dice_pct: float
    losses: np.ndarray


@dataclass
class ApproximationSet:
    """Per-solution metrics and loss vectors for one evaluated pair (or the
    mean over an evaluation set)."""

    solutions: list[SolutionMetrics]
    ref_point: np.ndarray

    def loss_matrix(self) -> np.ndarray:
        return np.stack([s.losses for s in self.solutions])

    def hv(self) -> float:
        return hypervolume(np.minimum(self.loss_matrix(), self.ref_point), self.ref_point)


def spread_statistic(loss_matrix: np.ndarray) -> float:
    """Mean nearest-neighbour distance among front-0 points in objective
    space; 0 when the front has fewer than two points."""
    front0 = nondominated_sort(loss_matrix)[0]
    pts = loss_matrix[front0]
    if len(pts) < 2:
        return 0.0
    d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    np.fill_diagonal(d, np.inf)
    return float(d.min(axis=1).mean())


def evaluate_pair(params: ModelParams, pair: RegistrationPair, ref, guidance: bool = True) -> ApproximationSet:
    """Forward all heads on one pair and compute per-solution metrics."""
    ad.reset_tape()
    dvfs, comps = per_head_losses(params, pair, guidance)
    loss_mat = np.stack([c.data for c in comps], axis=1)
    u = dvfs.data
    ad.reset_tape()
    sols = []
    for i in range(u.shape[0]):
        warped_mask = _warp_mask(pair.source_mask, u[i : i + 1])
        sols.append(
            SolutionMetrics(
                solution_id=i,
                mean_tre=tre(u[i], pair.target_landmarks, pair.source_landmarks).mean,
                folding_pct=folding_percent(u[i]),
                dice_pct=dice_score(warped_mask, pair.target_mask).mean,
                losses=loss_mat[i],
            )
        )
    return ApproximationSet(solutions=sols, ref_point=np.asarray(ref, dtype=float))


def _warp_mask(mask: np.ndarray, dvf: np.ndarray) -> np.ndarray:
    from modir.synth import warp_numpy

    return warp_numpy(mask, dvf)


@dataclass
class SetReport:
    per_pair: list[ApproximationSet]
    mean_set: ApproximationSet
    hv: float
    min_tre: SolutionMetrics  # folding reported from this same solution
    max_dice: SolutionMetrics
    spread: float
    pre_tre: float


def set_report(params: ModelParams, pairs: list[RegistrationPair], ref, guidance: bool = True) -> SetReport:
    """Evaluate every pair, aggregate per-head means, and summarize.

    The reported (min-TRE, folding) and (max-Dice, folding) entries come
    from single solutions, never mixed across heads.
    """
    per_pair = [evaluate_pair(params, pair, ref, guidance) for pair in pairs]
    p = len(per_pair[0].solutions)
    mean_sols = []
    for i in range(p):
        mean_sols.append(
            SolutionMetrics(
                solution_id=i,
                mean_tre=float(np.mean([ap.solutions[i].mean_tre for ap in per_pair])),
                folding_pct=float(np.mean([ap.solutions[i].folding_pct for ap in per_pair])),
                dice_pct=float(np.mean([ap.solutions[i].dice_pct for ap in per_pair])),
                losses=np.mean([ap.solutions[i].losses for ap in per_pair], axis=0),
            )
        )
    mean_set = ApproximationSet(solutions=mean_sols, ref_point=np.asarray(ref, dtype=float))
    best_tre = min(mean_sols, key=lambda s: s.mean_tre)
    best_dice = max(mean_sols, key=lambda s: s.dice_pct)
    pre = float(
        np.mean(
            [
                np.linalg.norm(pair.source_landmarks - pair.target_landmarks, axis=1).mean()
                for pair in pairs
            ]
        )
    )
    return SetReport(
        per_pair=per_pair,
        mean_set=mean_set,
        hv=mean_set.hv(),
        min_tre=best_tre,
        max_dice=best_dice,
        spread=spread_statistic(mean_set.loss_matrix()),
        pre_tre=pre,
    )
