"""The three registration losses: windowed NCC, smoothness, soft Dice.

All losses are bounded to [0, 1] (up to the epsilon stabilizers) so the
objective vectors are compatible with a unit-box reference point. The
''per_head'' variants reduce over everything except the leading head axis
and are what the trainer consumes; the scalar forms follow from a single
head.
"""

from __future__ import annotations

from dataclasses import dataclass

from modir import autodiff as ad
from modir.autodiff import Tensor

NCC_WINDOW = 9
NCC_EPS = 1e-5
DICE_EPS = 1e-6


def _ncc_map(warped: Tensor, target: Tensor, win: int, eps: float) -> Tensor:
    """Squared local normalized cross-correlation per window center."""
    n = float(win * win)
    sa = ad.window_sum(warped, win)
    sb = ad.window_sum(target, win)
    saa = ad.window_sum(ad.square(warped), win)
    sbb = ad.window_sum(ad.square(target), win)
    sab = ad.window_sum(ad.mul(warped, target), win)
    cross = ad.sub(sab, ad.div(ad.mul(sa, sb), n))
    var_a = ad.sub(saa, ad.div(ad.square(sa), n))
    var_b = ad.sub(sbb, ad.div(ad.square(sb), n))
    return ad.div(ad.square(cross), ad.add(ad.mul(var_a, var_b), eps))


def ncc_per_head(warped: Tensor, target: Tensor, win: int = NCC_WINDOW, eps: float = NCC_EPS) -> Tensor:
    """1 - mean squared local NCC, one value per head; shape (p,)."""
    cc = _ncc_map(warped, target, win, eps)
    return ad.sub(1.0, ad.reduce_mean(cc, axis=(1, 2, 3)))


def loss_ncc(warped: Tensor, target: Tensor, win: int = NCC_WINDOW, eps: float = NCC_EPS) -> Tensor:
    """Scalar image-similarity loss: 1 - mean windowed NCC^2, range [0, 1]."""
    return ad.reduce_mean(ad.sub(1.0, _ncc_map(warped, target, win, eps)))


def smoothness_per_head(dvf: Tensor) -> Tensor:
    """Mean squared forward difference of the field, one value per head.

    The means over the y- and x-difference stencils are averaged so a unit
    shear contributes exactly 1/4.
    """
    dy = ad.reduce_mean(ad.square(ad.diff(dvf, axis=2)), axis=(1, 2, 3))
    dx = ad.reduce_mean(ad.square(ad.diff(dvf, axis=3)), axis=(1, 2, 3))
    return ad.mul(ad.add(dy, dx), 0.5)


def loss_smooth(dvf: Tensor) -> Tensor:
    return ad.reduce_mean(smoothness_per_head(dvf))


def dice_per_head(warped_mask: Tensor, target_mask: Tensor, eps: float = DICE_EPS) -> Tensor:
    """Soft Dice loss averaged over organ channels, one value per head."""
    inter = ad.reduce_sum(ad.mul(warped_mask, target_mask), axis=(2, 3))
    sa = ad.reduce_sum(ad.square(warped_mask), axis=(2, 3))
    sb = ad.reduce_sum(ad.square(target_mask), axis=(2, 3))
    dice = ad.div(ad.mul(inter, 2.0), ad.add(ad.add(sa, sb), eps))
    return ad.sub(1.0, ad.reduce_mean(dice, axis=(1,)))


def loss_dice(warped_mask: Tensor, target_mask: Tensor, eps: float = DICE_EPS) -> Tensor:
    return ad.reduce_mean(dice_per_head(warped_mask, target_mask, eps))


@dataclass
class LossVector:
    """Tape-attached loss triple of one head (l_seg is None without guidance)."""

    l_image: Tensor
    l_smooth: Tensor
    l_seg: Tensor | None = None

    def values(self) -> list[float]:
        out = [self.l_image.item(), self.l_smooth.item()]
        if self.l_seg is not None:
            out.append(self.l_seg.item())
        return out


def weighted_total(lv: LossVector, weights) -> Tensor:
    """The dynamically weighted scalar actually differentiated (weights are
    constants on the tape)."""
    total = ad.add(ad.mul(lv.l_image, float(weights[0])), ad.mul(lv.l_smooth, float(weights[1])))
    if lv.l_seg is not None:
        total = ad.add(total, ad.mul(lv.l_seg, float(weights[2])))
    return total
