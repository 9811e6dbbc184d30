"""Deterministic synthetic 2D registration pairs with known ground truth.

Each pair is built from a textured source image with elliptical "organ"
blobs: the target is the source resampled through a smooth random
displacement field, masks are warped consistently, and the 23 landmark
correspondences are exact by construction (source landmark = target
landmark + u(target landmark)). An optional conflict term injects an
intensity structure into the target that the masks do not explain, so the
segmentation and image-similarity objectives genuinely compete.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from modir import autodiff as ad
from modir.autodiff import Tensor
from modir.network import RegistrationPair

N_LANDMARKS = 23


@dataclass
class SynthConfig:
    seed: int = 0
    size: int = 64
    organs: int = 2
    magnitude: float = 4.0  # max displacement in voxels
    bumps: int = 4
    noise: float = 0.005
    conflict: float = 1.0  # 0 disables the mask-inconsistent intensity term

    def __post_init__(self):
        if self.magnitude > self.size / 8:
            raise ValueError("magnitude above size/8 risks non-invertible warps")
        if self.organs < 1 or self.size < 32:
            raise ValueError("need at least one organ and size >= 32")


def gen_gt_dvf(config: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    """Sum of random Gaussian displacement bumps scaled to the configured
    peak magnitude; smooth by construction. Shape (1,2,H,W)."""
    s = config.size
    ys, xs = np.mgrid[0:s, 0:s].astype(np.float64)
    u = np.zeros((2, s, s))
    for _ in range(config.bumps):
        cx, cy = rng.uniform(s * 0.2, s * 0.8, size=2)
        sigma = rng.uniform(s / 7.0, s / 4.5)
        amp = rng.standard_normal(2)
        bump = np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2.0 * sigma * sigma))
        u[0] += amp[0] * bump
        u[1] += amp[1] * bump
    peak = np.sqrt((u * u).sum(axis=0)).max()
    if peak > 0:
        u *= config.magnitude / peak
    return u[None]


def _ellipse(xs, ys, cx, cy, rx, ry, angle):
    ca, sa = np.cos(angle), np.sin(angle)
    dx, dy = xs - cx, ys - cy
    xr = (ca * dx + sa * dy) / rx
    yr = (-sa * dx + ca * dy) / ry
    return xr * xr + yr * yr  # <= 1 inside


def _sample_at(field: np.ndarray, xy: np.ndarray) -> np.ndarray:
    """Bilinear values of (C,H,W) ``field`` at (L,2) xy sites."""
    c, h, w = field.shape
    x = np.clip(xy[:, 0], 0, w - 1)
    y = np.clip(xy[:, 1], 0, h - 1)
    x0 = np.clip(np.floor(x).astype(int), 0, w - 2)
    y0 = np.clip(np.floor(y).astype(int), 0, h - 2)
    fx, fy = x - x0, y - y0
    v = (
        field[:, y0, x0] * (1 - fy) * (1 - fx)
        + field[:, y0, x0 + 1] * (1 - fy) * fx
        + field[:, y0 + 1, x0] * fy * (1 - fx)
        + field[:, y0 + 1, x0 + 1] * fy * fx
    )
    return v.T  # (L, C)


def warp_numpy(image: np.ndarray, dvf: np.ndarray) -> np.ndarray:
    """Plain-array warp used during generation (same kernel as the model)."""
    ad.reset_tape()
    return ad.grid_sample(Tensor(image), _coords(dvf)).data


def _coords(dvf: np.ndarray) -> Tensor:
    n, _, h, w = dvf.shape
    grid = ad.identity_grid(h, w, n=n)
    return Tensor(grid.data + np.moveaxis(dvf, 1, -1))


def gen_pair(config: SynthConfig, rng: np.random.Generator) -> RegistrationPair:
    s = config.size
    ys, xs = np.mgrid[0:s, 0:s].astype(np.float64)

    # smooth background with mid-frequency texture: windowed NCC needs local
    # variance everywhere, flat+noise regions would saturate the loss
    bg = 0.45 + 0.15 * np.sin(2 * np.pi * (xs * rng.uniform(0.5, 1.5) / s + rng.random()))
    bg += 0.12 * np.sin(2 * np.pi * (ys * rng.uniform(0.5, 1.5) / s + rng.random()))
    texture = gaussian_filter(rng.standard_normal((s, s)), sigma=2.0)
    bg += texture * (0.25 / max(texture.std(), 1e-9))

    source = bg.copy()
    mask = np.zeros((config.organs, s, s))
    centers = []
    for k in range(config.organs):
        margin = s * 0.28
        cx = rng.uniform(margin, s - margin)
        cy = rng.uniform(margin, s - margin)
        rx = rng.uniform(s * 0.09, s * 0.16)
        ry = rng.uniform(s * 0.09, s * 0.16)
        angle = rng.uniform(0, np.pi)
        d2 = _ellipse(xs, ys, cx, cy, rx, ry, angle)
        soft = 1.0 / (1.0 + np.exp((d2 - 1.0) * 6.0))
        shade = 0.35 if k % 2 == 0 else -0.3
        source += shade * soft
        mask[k] = (d2 <= 1.0).astype(np.float64)
        centers.append((cx, cy, rx, ry, angle))
    source = np.clip(source, 0.0, 1.0)[None, None]
    mask = mask[None]

    u = gen_gt_dvf(config, rng)
    target = warp_numpy(source, u)
    target_mask = (warp_numpy(mask, u) >= 0.5).astype(np.float64)

    if config.conflict > 0:
        cx, cy, rx, ry, _ = centers[0]
        bx, by = cx + rx * 0.9, cy
        blob = np.exp(-((xs - bx) ** 2 + (ys - by) ** 2) / (2.0 * 3.5**2))
        target[0, 0] += config.conflict * 0.08 * blob
        target = np.clip(target, 0.0, 1.0)

    if config.noise > 0:
        source = np.clip(source + rng.normal(0, config.noise, source.shape), 0.0, 1.0)
        target = np.clip(target + rng.normal(0, config.noise, target.shape), 0.0, 1.0)

    # landmark sites in the target image: organ centers, boundary points,
    # then a deterministic interior grid up to the standard count
    sites = []
    for cx, cy, rx, ry, angle in centers:
        sites.append((cx, cy))
        for t in (0.0, 0.5 * np.pi, np.pi, 1.5 * np.pi):
            px = cx + rx * np.cos(t) * np.cos(angle) - ry * np.sin(t) * np.sin(angle)
            py = cy + rx * np.cos(t) * np.sin(angle) + ry * np.sin(t) * np.cos(angle)
            sites.append((px, py))
    grid_pts = np.linspace(s * 0.2, s * 0.8, 4)
    for gy in grid_pts:
        for gx in grid_pts:
            sites.append((gx, gy))
    target_landmarks = np.array(sites[:N_LANDMARKS])
    disp = _sample_at(u[0], target_landmarks)
    source_landmarks = target_landmarks + disp
    lo, hi = 1.0, s - 2.0
    keep = np.all((source_landmarks >= lo) & (source_landmarks <= hi), axis=1)
    keep &= np.all((target_landmarks >= lo) & (target_landmarks <= hi), axis=1)
    target_landmarks = target_landmarks[keep]
    source_landmarks = source_landmarks[keep]

    pair = RegistrationPair(
        source_image=source,
        target_image=target,
        source_mask=mask,
        target_mask=target_mask,
        target_landmarks=target_landmarks,
        source_landmarks=source_landmarks,
        gt_dvf=u,
    )
    pair.validate()
    return pair


def dataset(config: SynthConfig, count: int, train_fraction: float = 0.8):
    """Deterministic list of pairs plus the train/eval index split."""
    if count < 1:
        raise ValueError("count must be >= 1")
    pairs = [gen_pair(config, np.random.default_rng([config.seed, i])) for i in range(count)]
    n_train = max(1, int(round(count * train_fraction)))
    if count > 1:
        n_train = min(n_train, count - 1)
    return pairs, list(range(n_train)), list(range(n_train, count))
