"""Exact hypervolume, hypervolume gradients, and dynamic loss weights.

Everything assumes minimization: a point contributes the box between itself
and the reference point. Supported objective counts are 2 and 3. All
routines are pure functions over numpy arrays and are deterministic; ties
are broken by solution index rather than by perturbation.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "dominates",
    "nondominated_sort",
    "hypervolume",
    "hv_gradient",
    "dynamic_weights",
]


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[None]
    if pts.ndim != 2 or pts.shape[1] not in (2, 3):
        raise ValueError("points must be (p, n) with n in {2, 3}, got %s" % (pts.shape,))
    return pts


def dominates(a, b) -> bool:
    """True iff ``a`` is componentwise <= ``b`` and strictly < somewhere."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("objective counts differ: %s vs %s" % (a.shape, b.shape))
    return bool(np.all(a <= b) and np.any(a < b))


def nondominated_sort(points) -> list[list[int]]:
    """Partition point indices into fronts (front 0 = non-dominated)."""
    pts = _as_points(points)
    p = len(pts)
    le = np.all(pts[:, None, :] <= pts[None, :, :], axis=2)
    lt = np.any(pts[:, None, :] < pts[None, :, :], axis=2)
    dom = le & lt  # dom[i, j]: i dominates j
    n_dominating = dom.sum(axis=0)
    fronts = []
    assigned = np.zeros(p, dtype=bool)
    current = np.flatnonzero(n_dominating == 0)
    while current.size:
        fronts.append(current.tolist())
        assigned[current] = True
        n_dominating = n_dominating - dom[current].sum(axis=0)
        current = np.flatnonzero((n_dominating == 0) & ~assigned)
    return fronts


def _union_area_2d(pts: np.ndarray, ref: np.ndarray) -> float:
    """Area of the union of boxes [q, ref] over rows q (2 columns)."""
    keep = (pts[:, 0] < ref[0]) & (pts[:, 1] < ref[1])
    pts = pts[keep]
    if len(pts) == 0:
        return 0.0
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    xs = pts[order, 0]
    y_env = np.minimum.accumulate(pts[order, 1])  # lower envelope left to right
    widths = np.diff(xs, append=ref[0])
    return float(np.dot(widths, ref[1] - y_env))


def _union_measure(pts: np.ndarray, ref: np.ndarray) -> float:
    """(n-1)-dimensional union measure used for gradient faces (n-1 in {1, 2})."""
    if pts.shape[1] == 1:
        keep = pts[:, 0] < ref[0]
        if not np.any(keep):
            return 0.0
        return float(ref[0] - pts[keep, 0].min())
    return _union_area_2d(pts, ref)


def hypervolume(points, ref) -> float:
    """Lebesgue measure of the union of boxes [q, ref] over the point set.

    Points with any coordinate at or beyond the reference contribute
    nothing. Exact sweep: sort-and-sweep in 2D, z-sweep over 2D slices
    in 3D.
    """
    pts = _as_points(points)
    ref = np.asarray(ref, dtype=np.float64)
    if ref.shape != (pts.shape[1],):
        raise ValueError("reference point has wrong arity: %s" % (ref.shape,))
    if pts.shape[1] == 2:
        return _union_area_2d(pts, ref)
    keep = np.all(pts < ref, axis=1)
    pts = pts[keep]
    if len(pts) == 0:
        return 0.0
    order = np.argsort(pts[:, 2], kind="stable")
    pts = pts[order]
    hv = 0.0
    for j in range(len(pts)):
        z_next = pts[j + 1, 2] if j + 1 < len(pts) else ref[2]
        if z_next > pts[j, 2]:
            area = _union_area_2d(pts[: j + 1, :2], ref[:2])
            hv += area * (z_next - pts[j, 2])
    return hv


def _face_gradient(pts: np.ndarray, ref: np.ndarray, ids, strict_inside: bool) -> np.ndarray:
    """Per-point gradient of the hypervolume via exclusive-face measures.

    ``ids`` orders tie-breaking: when two points share a coordinate, the
    one with the smaller id is treated as activating first. With
    ``strict_inside`` points touching the reference boundary get a zero
    row (the public contract); without it, the left-sided derivative is
    returned so projected boundary points still yield a descent direction.
    """
    p, n = pts.shape
    grad = np.zeros((p, n))
    ids = np.asarray(ids)
    inside = np.all(pts < ref, axis=1) if strict_inside else np.all(pts <= ref, axis=1)
    for i in range(p):
        if not inside[i]:
            continue
        for k in range(n):
            rest = [d for d in range(n) if d != k]
            active = (pts[:, k] < pts[i, k]) | ((pts[:, k] == pts[i, k]) & (ids < ids[i]))
            active[i] = False
            proj = pts[np.ix_(active, rest)]
            with_i = np.concatenate([proj, pts[i, rest][None]], axis=0)
            ref_rest = ref[rest]
            grad[i, k] = -(_union_measure(with_i, ref_rest) - _union_measure(proj, ref_rest))
    return grad


def hv_gradient(points, ref) -> np.ndarray:
    """d(hypervolume)/d(point coordinates), shape (p, n).

    Rows for dominated points and points at or beyond the reference are
    zero; downstream weighting applies its own fallback for those.
    """
    pts = _as_points(points)
    ref = np.asarray(ref, dtype=np.float64)
    return _face_gradient(pts, ref, np.arange(len(pts)), strict_inside=True)


def dynamic_weights(points, ref) -> np.ndarray:
    """Per-solution loss weights from hypervolume gradients, rows sum to 1.

    Points beyond the reference are first projected onto the reference
    boundary; the projected set is then non-dominated sorted and each
    front receives hypervolume gradients independently against the same
    reference, so dominated solutions also obtain a usable descent
    direction. Any remaining zero-gradient row falls back to uniform weights.
    """
    pts = _as_points(points)
    ref = np.asarray(ref, dtype=np.float64)
    p, n = pts.shape
    projected = np.minimum(pts, ref)
    weights = np.zeros((p, n))
    for front in nondominated_sort(projected):
        idx = np.asarray(front)
        grad = _face_gradient(projected[idx], ref, idx, strict_inside=False)
        for row, i in enumerate(idx):
            w = np.maximum(-grad[row], 0.0)
            total = w.sum()
            weights[i] = w / total if total > 0 else np.full(n, 1.0 / n)
    return weights
