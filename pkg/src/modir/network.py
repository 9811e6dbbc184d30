"""Shared-encoder, multi-head encoder-decoder predicting one DVF per head.

All heads are evaluated in a single batched pass: head parameters are
stacked along a leading axis and convolved with :func:`conv2d_heads`, so a
forward for p heads costs a handful of batched matmuls instead of p python
loops. When the encoder is shared its features are broadcast to the heads
(gradients sum back over heads in fixed order); otherwise each head owns a
full encoder replica.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from modir import autodiff as ad
from modir import losses
from modir.autodiff import Tensor


@dataclass
class RegistrationPair:
    """One source/target pair with masks, landmark correspondences, and
    (for synthetic data) the ground-truth displacement field.

    Images are (1,1,H,W) in [0,1]; masks are (1,K,H,W) binary; landmark
    arrays are (L,2) in absolute voxel coordinates (x, y); ``gt_dvf`` is
    (1,2,H,W) in voxel units or None.
    """

    source_image: np.ndarray
    target_image: np.ndarray
    source_mask: np.ndarray
    target_mask: np.ndarray
    target_landmarks: np.ndarray
    source_landmarks: np.ndarray
    gt_dvf: np.ndarray | None = None

    def validate(self) -> None:
        h, w = self.source_image.shape[-2:]
        for name in ("target_image", "source_mask", "target_mask"):
            if getattr(self, name).shape[-2:] != (h, w):
                raise ValueError("spatial shape of %s disagrees with source_image" % name)
        for pts in (self.target_landmarks, self.source_landmarks):
            if pts.shape != self.target_landmarks.shape or pts.shape[-1] != 2:
                raise ValueError("landmark arrays must be matching (L, 2)")
            if np.any(pts[:, 0] < 0) or np.any(pts[:, 0] > w - 1):
                raise ValueError("landmark x coordinate out of bounds")
            if np.any(pts[:, 1] < 0) or np.any(pts[:, 1] > h - 1):
                raise ValueError("landmark y coordinate out of bounds")


@dataclass
class ModelConfig:
    """Architecture of the registration network.

    The published description fixes only the topology (shared encoder,
    p decoder heads, skip connections); the sizes below are desk-scale
    choices so a full training fits in minutes on a CPU.
    """

    p: int = 27
    image_size: int = 64
    in_channels: int = 2  # source and target concatenated
    enc_channels: tuple[int, ...] = (16, 32, 32, 32)
    dec_channels: tuple[int, ...] = (16, 16, 8, 8)
    leaky_slope: float = 0.2
    share_encoder: bool = True
    flow_scale: float = 10.0  # fixed output gain so small weights move voxels
    flow_init_std: float = 1e-3
    identical_heads: bool = False  # replicate head 0's initialization

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be >= 1, got %d" % self.p)
        if len(self.dec_channels) != len(self.enc_channels):
            raise ValueError("decoder depth must mirror encoder depth")


@dataclass
class ModelParams:
    """Parameter tensors of one model; head parameters are head-stacked."""

    config: ModelConfig
    tensors: dict[str, Tensor] = field(default_factory=dict)

    def parameters(self) -> list[Tensor]:
        return [self.tensors[k] for k in sorted(self.tensors)]

    def count(self) -> int:
        return sum(t.size for t in self.tensors.values())


def _kaiming_std(fan_in: int, slope: float) -> float:
    return np.sqrt(2.0 / (1.0 + slope * slope)) / np.sqrt(fan_in)


def init_params(seed: int, config: ModelConfig) -> ModelParams:
    """Kaiming-He (normal, fan-in) initialization; the final flow layer is
    near-zero so the initial DVF is approximately the identity transform."""
    rng = np.random.default_rng(seed)
    params = ModelParams(config=config)
    slope = config.leaky_slope
    p = config.p

    def conv_param(name, f, c, heads):
        std = _kaiming_std(c * 9, slope)
        shape = (heads, f, c, 3, 3) if heads else (f, c, 3, 3)
        bshape = (heads, f) if heads else (f,)
        w = rng.standard_normal(shape) * std
        if heads and config.identical_heads:
            w[:] = w[0:1]
        params.tensors[name + ".w"] = Tensor(w, requires_grad=True)
        params.tensors[name + ".b"] = Tensor(np.zeros(bshape), requires_grad=True)

    enc_heads = None if config.share_encoder else p
    c_in = config.in_channels
    for i, c_out in enumerate(config.enc_channels):
        conv_param(f"enc{i}", c_out, c_in, enc_heads)
        c_in = c_out

    skips = (config.in_channels,) + config.enc_channels[:-1]
    c_in = config.enc_channels[-1]
    for i, c_out in enumerate(config.dec_channels):
        level = len(config.dec_channels) - 1 - i  # resolution level being restored
        c_cat = c_in + (skips[level] if level > 0 else 0)
        conv_param(f"dec{i}", c_out, c_cat, p)
        c_in = c_out

    flow_w = rng.standard_normal((p, 2, c_in, 3, 3)) * config.flow_init_std
    if config.identical_heads:
        flow_w[:] = flow_w[0:1]
    params.tensors["flow.w"] = Tensor(flow_w, requires_grad=True)
    params.tensors["flow.b"] = Tensor(np.zeros((p, 2)), requires_grad=True)
    return params


def _conv_block(x, w, b, slope, stride):
    if w.ndim == 5:
        h = ad.conv2d_heads(x, w, stride=stride, padding=1)
        h = ad.add(h, b[:, :, None, None])
    else:
        h = ad.conv2d(x, w, stride=stride, padding=1)
        h = ad.add(h, b[None, :, None, None])
    return ad.leaky_relu(h, slope)


def forward_stacked(params: ModelParams, source: Tensor, target: Tensor) -> Tensor:
    """Run all heads at once; returns the stacked DVFs, shape (p, 2, H, W)."""
    cfg = params.config
    t = params.tensors
    if source.shape != target.shape or source.shape[-1] != cfg.image_size:
        raise ad.ShapeError(
            "expected images of shape (1,1,%d,%d)" % (cfg.image_size, cfg.image_size)
        )
    x = ad.concat([source, target], axis=1)
    if not cfg.share_encoder:
        x = ad.expand_heads(x, cfg.p)

    feats = [x]
    for i in range(len(cfg.enc_channels)):
        x = _conv_block(x, t[f"enc{i}.w"], t[f"enc{i}.b"], cfg.leaky_slope, stride=2)
        feats.append(x)

    h = feats[-1]
    if cfg.share_encoder:
        h = ad.expand_heads(h, cfg.p)
    n_levels = len(cfg.dec_channels)
    for i in range(n_levels):
        level = n_levels - 1 - i
        h = ad.upsample_bilinear(h, 2)
        if level > 0:
            skip = feats[level]
            if cfg.share_encoder:
                skip = ad.expand_heads(skip, cfg.p)
            h = ad.concat([h, skip], axis=1)
        h = _conv_block(h, t[f"dec{i}.w"], t[f"dec{i}.b"], cfg.leaky_slope, stride=1)

    flow = ad.conv2d_heads(h, t["flow.w"], stride=1, padding=1)
    flow = ad.add(flow, t["flow.b"][:, :, None, None])
    return ad.mul(flow, cfg.flow_scale)


def forward_multi_head(params: ModelParams, source: Tensor, target: Tensor) -> list[Tensor]:
    """Per-head view of :func:`forward_stacked` (p tensors of shape (1,2,H,W))."""
    stacked = forward_stacked(params, source, target)
    return [stacked[i : i + 1] for i in range(params.config.p)]


def warp(image: Tensor, dvf: Tensor) -> Tensor:
    """Resample ``image`` at x + u(x); masks warp with the same bilinear kernel.

    ``image`` may have batch 1 while ``dvf`` carries one field per head; the
    image is then broadcast across heads.
    """
    n, _, h, w = dvf.shape
    if image.shape[0] == 1 and n > 1:
        image = ad.expand_heads(image, n)
    coords = ad.add(ad.transpose(dvf, (0, 2, 3, 1)), ad.identity_grid(h, w, n=n))
    return ad.grid_sample(image, coords)


def per_head_losses(params: ModelParams, pair: RegistrationPair, guidance: bool = True):
    """Forward all heads and reduce the loss components per head.

    Returns ``(dvfs, components)`` where ``dvfs`` is the stacked (p,2,H,W)
    tensor and ``components`` is a tuple of (p,)-shaped tensors:
    (image, smoothness) plus Dice when ``guidance`` is on.
    """
    source = Tensor(pair.source_image)
    target = Tensor(pair.target_image)
    dvfs = forward_stacked(params, source, target)
    warped = warp(source, dvfs)
    l_img = losses.ncc_per_head(warped, target)
    l_smooth = losses.smoothness_per_head(dvfs)
    if not guidance:
        return dvfs, (l_img, l_smooth)
    warped_mask = warp(Tensor(pair.source_mask), dvfs)
    l_seg = losses.dice_per_head(warped_mask, Tensor(pair.target_mask))
    return dvfs, (l_img, l_smooth, l_seg)


def loss_vector(params: ModelParams, pair: RegistrationPair, head: int, guidance: bool = True):
    """Loss triple of a single head (a per-head view of the batched pass)."""
    _, comps = per_head_losses(params, pair, guidance)
    parts = [c[head : head + 1] for c in comps]
    scalars = [ad.reduce_sum(p) for p in parts]
    if guidance:
        return losses.LossVector(scalars[0], scalars[1], scalars[2])
    return losses.LossVector(scalars[0], scalars[1], None)
