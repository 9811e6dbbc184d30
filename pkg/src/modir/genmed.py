"""Analytic convex benchmark: objectives are squared distances to unit vectors.

The k-th objective of a decision vector x in R^n is ||x - e_k||^2, so the
Pareto set is the simplex spanned by the unit vectors and the problem has
closed-form gradients. Used to validate the hypervolume-driven trainer
without any image data.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "evaluate",
    "gradient",
    "project_to_simplex",
    "front_distance",
    "mean_edge_distance",
    "front_edge_samples",
]


def evaluate(x) -> np.ndarray:
    """Objective vector f_k(x) = ||x - e_k||^2 for k = 1..n."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    eye = np.eye(n)
    d = x[..., None, :] - eye  # (..., n, n)
    return np.sum(d * d, axis=-1)


def gradient(x) -> np.ndarray:
    """Jacobian rows grad f_k = 2 (x - e_k), shape (..., n, n)."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    return 2.0 * (x[..., None, :] - np.eye(n))


def project_to_simplex(x) -> np.ndarray:
    """Euclidean projection onto {y >= 0, sum(y) = 1} (sort-and-threshold)."""
    x = np.asarray(x, dtype=np.float64)
    u = np.sort(x)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, len(x) + 1)
    valid = u - css / ks > 0
    rho = ks[valid][-1]
    theta = css[rho - 1] / rho
    return np.maximum(x - theta, 0.0)


def front_distance(x) -> float:
    """Euclidean distance from a decision vector to the Pareto set (the simplex)."""
    x = np.asarray(x, dtype=np.float64)
    return float(np.linalg.norm(x - project_to_simplex(x)))


def front_edge_samples(n: int = 3, samples_per_edge: int = 512) -> np.ndarray:
    """Objective-space samples of the Pareto front's edges.

    Edges of the front are the images of the simplex edges conv{e_i, e_j}.
    """
    eye = np.eye(n)
    ts = np.linspace(0.0, 1.0, samples_per_edge)
    pts = []
    for i in range(n):
        for j in range(i + 1, n):
            xs = ts[:, None] * eye[i] + (1.0 - ts)[:, None] * eye[j]
            pts.append(evaluate(xs))
    return np.concatenate(pts, axis=0)


def mean_edge_distance(objectives, n: int = 3, samples_per_edge: int = 512) -> float:
    """Mean distance of objective vectors to the front's edge set.

    Smaller values mean the set clusters more tightly on the edges of the
    front.
    """
    objectives = np.asarray(objectives, dtype=np.float64)
    edges = front_edge_samples(n=n, samples_per_edge=samples_per_edge)
    d = np.linalg.norm(objectives[:, None, :] - edges[None], axis=-1)
    return float(d.min(axis=1).mean())
