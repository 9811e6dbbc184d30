"""Shared test oracles: finite differences, brute-force dominance, Monte-Carlo HV."""

from __future__ import annotations

import numpy as np

from modir import autodiff as ad


def finite_difference(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of scalar-valued ``f`` w.r.t. array ``x``.

    ``f`` takes no arguments and must read the current contents of ``x``
    (mutated in place), so closures over tensors work directly.
    """
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def rel_err(a: np.ndarray, b: np.ndarray) -> float:
    """Norm-relative error between a gradient and its oracle."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / denom)


def tape_scalar(f) -> float:
    """Evaluate a tape-building scalar function and return its value."""
    ad.reset_tape()
    out = f()
    return float(out.data)


def grad_of(f, params):
    """Backward of ``f()`` and return the grads of ``params`` (zeroed first)."""
    ad.reset_tape()
    for p in params:
        p.zero_grad()
    loss = f()
    ad.backward(loss)
    return [p.grad for p in params]


def brute_force_fronts(points: np.ndarray) -> list[list[int]]:
    """O(p^2 n) repeated-scan non-dominated partition, independent of the library."""
    pts = np.asarray(points, dtype=float)
    remaining = list(range(len(pts)))
    fronts = []
    while remaining:
        front = []
        for i in remaining:
            dominated = False
            for j in remaining:
                if j != i and np.all(pts[j] <= pts[i]) and np.any(pts[j] < pts[i]):
                    dominated = True
                    break
            if not dominated:
                front.append(i)
        fronts.append(front)
        remaining = [i for i in remaining if i not in front]
    return fronts


def mc_hypervolume(points: np.ndarray, ref: np.ndarray, n_samples: int, seed: int):
    """Monte-Carlo hypervolume estimate and its standard error."""
    pts = np.asarray(points, dtype=float)
    ref = np.asarray(ref, dtype=float)
    inside = np.all(pts < ref, axis=1)
    pts = pts[inside]
    if len(pts) == 0:
        return 0.0, 0.0
    lo = pts.min(axis=0)
    vol = float(np.prod(ref - lo))
    rng = np.random.default_rng(seed)
    hits = 0
    chunk = 250_000
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        s = lo + rng.random((m, len(ref))) * (ref - lo)
        covered = np.zeros(m, dtype=bool)
        for q in pts:
            covered |= np.all(s >= q, axis=1)
        hits += int(covered.sum())
        done += m
    frac = hits / n_samples
    sigma = vol * np.sqrt(max(frac * (1.0 - frac), 1e-12) / n_samples)
    return vol * frac, sigma
