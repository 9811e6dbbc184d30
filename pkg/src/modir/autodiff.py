"""Minimal reverse-mode automatic differentiation over float64 numpy arrays.

Define-by-run: every differentiable operation appends an entry to a
module-level tape. ``backward`` walks the tape in exact reverse recording
order, which is a valid reverse topological order and gives a fixed,
deterministic accumulation order. The tape is meant to be rebuilt each
iteration via :func:`reset_tape`.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "ShapeError",
    "as_tensor",
    "reset_tape",
    "tape_size",
    "tape_healthy",
    "backward",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "square",
    "reduce_mean",
    "reduce_sum",
    "diff",
    "concat",
    "transpose",
    "expand_heads",
    "getitem",
    "leaky_relu",
    "conv2d",
    "conv2d_heads",
    "window_sum",
    "upsample_bilinear",
    "grid_sample",
    "identity_grid",
]


class ShapeError(ValueError):
    """Operand shapes violate an operation's contract."""


class Tensor:
    """N-dimensional float64 array participating in the tape.

    ``grad`` stays ``None`` until a backward pass reaches this tensor.
    Repeated backward calls accumulate into ``grad`` (callers zero it
    between optimizer steps).
    """

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # Arithmetic sugar; all routes through the module-level ops.
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __getitem__(self, idx):
        return getitem(self, idx)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class _TapeEntry:
    __slots__ = ("inputs", "output", "backward_fn")

    def __init__(self, inputs, output, backward_fn):
        self.inputs = inputs
        self.output = output
        self.backward_fn = backward_fn


_TAPE: list[_TapeEntry] = []


def reset_tape() -> None:
    """Discard all recorded operations (call once per training iteration)."""
    _TAPE.clear()


def tape_size() -> int:
    return len(_TAPE)


def tape_healthy() -> bool:
    """False if any recorded output holds a non-finite value (e.g. x/0)."""
    return all(np.isfinite(e.output.data).all() for e in _TAPE)


def _make(data, inputs, backward_fn) -> Tensor:
    out = Tensor(data, requires_grad=any(t.requires_grad for t in inputs))
    if out.requires_grad:
        _TAPE.append(_TapeEntry(inputs, out, backward_fn))
    return out


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every requires_grad tensor that feeds ``loss``.

    Accumulation happens in reverse recording order, so two identical
    passes produce bit-identical gradients.
    """
    if loss.size != 1:
        raise ValueError("backward requires a scalar loss, got shape %s" % (loss.shape,))
    flows: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    tensors: dict[int, Tensor] = {id(loss): loss}
    for entry in reversed(_TAPE):
        out_grad = flows.get(id(entry.output))
        if out_grad is None:
            continue
        for t, g in zip(entry.inputs, entry.backward_fn(out_grad)):
            if g is None or not t.requires_grad:
                continue
            acc = flows.get(id(t))
            flows[id(t)] = g if acc is None else acc + g
            tensors[id(t)] = t
    for tid, t in tensors.items():
        g = flows[tid]
        t.grad = g.copy() if t.grad is None else t.grad + g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise arithmetic (numpy broadcasting semantics)
# ---------------------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _make(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _make(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _make(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = a.data / b.data

    def bwd(g):
        with np.errstate(divide="ignore", invalid="ignore"):
            ga = g / b.data
            gb = -g * a.data / (b.data * b.data)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _make(out, (a, b), bwd)


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _make(-a.data, (a,), lambda g: (-g,))


def square(a) -> Tensor:
    a = as_tensor(a)
    return _make(a.data * a.data, (a,), lambda g: (2.0 * a.data * g,))


# ---------------------------------------------------------------------------
# reductions and structure
# ---------------------------------------------------------------------------


def reduce_mean(a, axis=None) -> Tensor:
    a = as_tensor(a)
    out = np.mean(a.data, axis=axis)
    count = a.size if axis is None else np.prod([a.shape[ax] for ax in np.atleast_1d(axis)])

    def bwd(g):
        g = np.asarray(g)
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, a.shape).copy(),)

    return _make(out, (a,), bwd)


def reduce_sum(a, axis=None) -> Tensor:
    a = as_tensor(a)
    out = np.sum(a.data, axis=axis)

    def bwd(g):
        g = np.asarray(g)
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _make(out, (a,), bwd)


def diff(a, axis: int) -> Tensor:
    """Forward difference along ``axis``; shortens that axis by one."""
    a = as_tensor(a)
    out = np.diff(a.data, axis=axis)

    def bwd(g):
        ga = np.zeros(a.shape)
        hi = [slice(None)] * a.ndim
        lo = [slice(None)] * a.ndim
        hi[axis] = slice(1, None)
        lo[axis] = slice(None, -1)
        ga[tuple(hi)] += g
        ga[tuple(lo)] -= g
        return (ga,)

    return _make(out, (a,), bwd)


def concat(tensors, axis: int) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    splits = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def bwd(g):
        return tuple(np.split(g, splits, axis=axis))

    return _make(out, tuple(tensors), bwd)


def transpose(a, axes) -> Tensor:
    a = as_tensor(a)
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return _make(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inv),))


def expand_heads(a, p: int) -> Tensor:
    """Repeat a leading batch of 1 to ``p`` entries (backward sums heads)."""
    a = as_tensor(a)
    if a.shape[0] != 1:
        raise ShapeError("expand_heads requires leading extent 1, got %s" % (a.shape,))
    out = np.broadcast_to(a.data, (p,) + a.shape[1:]).copy()
    return _make(out, (a,), lambda g: (g.sum(axis=0, keepdims=True),))


def getitem(a, idx) -> Tensor:
    a = as_tensor(a)
    out = a.data[idx]

    def bwd(g):
        ga = np.zeros(a.shape)
        ga[idx] = g
        return (ga,)

    return _make(out, (a,), bwd)


# ---------------------------------------------------------------------------
# neural-network operations
# ---------------------------------------------------------------------------


def leaky_relu(a, slope: float) -> Tensor:
    if not 0.0 <= slope < 1.0:
        raise ValueError("slope must lie in [0, 1)")
    a = as_tensor(a)
    out = np.maximum(a.data, slope * a.data)

    def bwd(g):
        return (g * np.where(a.data > 0, 1.0, slope),)

    return _make(out, (a,), bwd)


def _im2col(x: np.ndarray, kh: int, kw: int, stride: int, padding: int):
    """Return (cols, out_h, out_w) with cols shaped (N, C*kh*kw, out_h*out_w)."""
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    n, c, h, w = x.shape
    out_h = (h - kh) // stride + 1
    out_w = (w - kw) // stride + 1
    win = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    win = win[:, :, ::stride, ::stride]  # (N, C, out_h, out_w, kh, kw)
    cols = np.ascontiguousarray(win.transpose(0, 1, 4, 5, 2, 3))
    return cols.reshape(n, c * kh * kw, out_h * out_w), out_h, out_w


def _col2im(gcols: np.ndarray, x_shape, kh, kw, stride, padding, out_h, out_w):
    """Scatter-add column gradients back to the (padded) input layout."""
    n, c, h, w = x_shape
    hp, wp = h + 2 * padding, w + 2 * padding
    gx = np.zeros((n, c, hp, wp))
    g6 = gcols.reshape(n, c, kh, kw, out_h, out_w)
    for i in range(kh):
        for j in range(kw):
            gx[:, :, i : i + stride * out_h : stride, j : j + stride * out_w : stride] += g6[
                :, :, i, j
            ]
    if padding:
        gx = gx[:, :, padding:-padding, padding:-padding]
    return gx


def _check_conv_args(x, k, kernel_ndim, stride, padding):
    if k.ndim != kernel_ndim:
        raise ShapeError("kernel must be %dD, got shape %s" % (kernel_ndim, (k.shape,)))
    kh, kw = k.shape[-2], k.shape[-1]
    if kh % 2 == 0 or kw % 2 == 0:
        raise ShapeError("kernel extents must be odd, got %dx%d" % (kh, kw))
    if stride < 1 or padding < 0:
        raise ValueError("stride must be >= 1 and padding >= 0")
    if x.shape[-3] != k.shape[-3]:
        raise ShapeError(
            "input channels %d do not match kernel channels %d" % (x.shape[-3], k.shape[-3])
        )


def _shift_conv(xflat, kflat, h, w, r):
    """Same-size stride-1 convolution as k*k shifted matmuls.

    ``xflat`` is (N, C, H*W); ``kflat`` is (F, C, kh, kw) or (P, F, C, kh, kw).
    Accumulating each offset's matmul into a padded buffer avoids the large
    im2col intermediate, which dominates runtime at these sizes.
    """
    n = xflat.shape[0]
    f = kflat.shape[-4]
    kh = kflat.shape[-2]
    # offset-major, contiguous weight slabs: strided matmul operands are slow
    kper = np.ascontiguousarray(np.moveaxis(kflat, (-2, -1), (0, 1)))
    buf = np.zeros((n, f, h + 2 * r, w + 2 * r))
    for di in range(kh):
        for dj in range(kh):
            s = np.matmul(kper[di, dj], xflat).reshape(n, f, h, w)
            buf[:, :, 2 * r - di : 2 * r - di + h, 2 * r - dj : 2 * r - dj + w] += s
    return np.ascontiguousarray(buf[:, :, r : r + h, r : r + w]) if r else buf


def _shift_conv_gk(g, xflat, shape_k, r, heads):
    """Kernel gradient of the same-size stride-1 path."""
    n, _, l = xflat.shape
    kh, kw = shape_k[-2], shape_k[-1]
    f = shape_k[-4]
    h_w = g.shape[2], g.shape[3]
    gpad = np.pad(g, ((0, 0), (0, 0), (r, r), (r, r))) if r else g
    xt = xflat.transpose(0, 2, 1)  # (N, L, C) stride view; BLAS handles it
    gk = np.empty(shape_k)
    for di in range(kh):
        for dj in range(kw):
            gs = np.ascontiguousarray(
                gpad[:, :, 2 * r - di : 2 * r - di + h_w[0], 2 * r - dj : 2 * r - dj + h_w[1]]
            ).reshape(n, f, l)
            if heads:
                gk[:, :, :, di, dj] = np.matmul(gs, xt)
            else:
                gk[:, :, di, dj] = np.tensordot(gs, xflat, axes=((0, 2), (0, 2)))
    return gk


def _conv_common(x, k, stride, padding, heads):
    n, c, h, w = x.shape
    f, kh, kw = k.shape[-4], k.shape[-2], k.shape[-1]
    same_size = stride == 1 and padding == (kh - 1) // 2 and kh == kw
    if same_size:
        r = padding
        xflat = np.ascontiguousarray(x.data).reshape(n, c, h * w)
        out = _shift_conv(xflat, k.data, h, w, r)

        def bwd(g):
            gk = None
            gx = None
            if k.requires_grad:
                gk = _shift_conv_gk(g, xflat, k.shape, r, heads)
            if x.requires_grad:
                # input gradient is the same-size conv with a flipped,
                # channel-transposed kernel
                kt = k.data[..., ::-1, ::-1]
                kt = kt.transpose(0, 2, 1, 3, 4) if heads else kt.transpose(1, 0, 2, 3)
                gflat = np.ascontiguousarray(g).reshape(n, f, h * w)
                gx = _shift_conv(gflat, np.ascontiguousarray(kt), h, w, r)
            return gx, gk

        return out, bwd

    cols, out_h, out_w = _im2col(x.data, kh, kw, stride, padding)  # (N, CK, L)
    kflat = k.data.reshape(k.shape[:-4] + (f, c * kh * kw))
    out = np.matmul(kflat, cols).reshape(n, f, out_h, out_w)

    def bwd(g):
        g2 = g.reshape(n, f, out_h * out_w)
        gk = None
        gx = None
        if k.requires_grad:
            if heads:
                gk = np.matmul(g2, cols.transpose(0, 2, 1)).reshape(k.shape)
            else:
                gk = np.tensordot(g2, cols, axes=((0, 2), (0, 2))).reshape(k.shape)
        if x.requires_grad:
            kt = kflat.transpose(0, 2, 1) if heads else kflat.T
            gcols = np.matmul(np.ascontiguousarray(kt), g2)
            gx = _col2im(gcols, x.shape, kh, kw, stride, padding, out_h, out_w)
        return gx, gk

    return out, bwd


def conv2d(x, k, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlate ``x`` (N,C,H,W) with ``k`` (F,C,kh,kw)."""
    x, k = as_tensor(x), as_tensor(k)
    _check_conv_args(x, k, 4, stride, padding)
    out, bwd = _conv_common(x, k, stride, padding, heads=False)
    return _make(out, (x, k), bwd)


def conv2d_heads(x, k, stride: int = 1, padding: int = 0) -> Tensor:
    """Per-head cross-correlation: ``x`` (P,C,H,W) with ``k`` (P,F,C,kh,kw).

    Head ``i`` of the output uses kernel slab ``i``; equivalent to a loop of
    :func:`conv2d` over heads but executed as batched matmuls.
    """
    x, k = as_tensor(x), as_tensor(k)
    _check_conv_args(x, k, 5, stride, padding)
    if x.shape[0] != k.shape[0]:
        raise ShapeError("head counts differ: input %d, kernel %d" % (x.shape[0], k.shape[0]))
    out, bwd = _conv_common(x, k, stride, padding, heads=True)
    return _make(out, (x, k), bwd)


def _box_valid(a: np.ndarray, win: int) -> np.ndarray:
    """Sliding-window sum over the last two axes (valid mode) via cumsums."""
    c = np.cumsum(a, axis=-2)
    c = np.concatenate([np.zeros(c.shape[:-2] + (1, c.shape[-1])), c], axis=-2)
    a = c[..., win:, :] - c[..., :-win, :]
    c = np.cumsum(a, axis=-1)
    c = np.concatenate([np.zeros(c.shape[:-1] + (1,)), c], axis=-1)
    return c[..., win:] - c[..., :-win]


def window_sum(x, win: int) -> Tensor:
    """Sum of each win x win window of ``x`` (N,C,H,W), valid placements only.

    Equivalent to conv2d with an all-ones kernel per channel but runs in
    O(N) via cumulative sums.
    """
    if win < 1 or win % 2 == 0:
        raise ValueError("window must be odd and positive")
    x = as_tensor(x)
    out = _box_valid(x.data, win)

    def bwd(g):
        pad = ((0, 0),) * (g.ndim - 2) + ((win - 1, win - 1), (win - 1, win - 1))
        return (_box_valid(np.pad(g, pad), win),)

    return _make(out, (x,), bwd)


def _interp_matrix(n_in: int, factor: int) -> np.ndarray:
    """1D bilinear interpolation matrix, sample centers at (i+0.5)/f - 0.5."""
    n_out = n_in * factor
    m = np.zeros((n_out, n_in))
    src = (np.arange(n_out) + 0.5) / factor - 0.5
    src = np.clip(src, 0.0, n_in - 1.0)
    i0 = np.clip(np.floor(src).astype(int), 0, max(n_in - 2, 0))
    frac = src - i0
    m[np.arange(n_out), i0] += 1.0 - frac
    if n_in > 1:
        m[np.arange(n_out), i0 + 1] += frac
    return m


def upsample_bilinear(x, factor: int) -> Tensor:
    """Bilinear upsampling by an integer factor (align-corners-false)."""
    if factor < 1:
        raise ValueError("factor must be >= 1")
    x = as_tensor(x)
    if factor == 1:
        return _make(x.data.copy(), (x,), lambda g: (g,))
    n, c, h, w = x.shape
    mr = _interp_matrix(h, factor)
    mc = _interp_matrix(w, factor)
    mct = np.ascontiguousarray(mc.T)
    tmp = np.matmul(mr, x.data.reshape(n * c, h, w))
    out = np.matmul(tmp, mct).reshape(n, c, h * factor, w * factor)

    def bwd(g):
        t = np.matmul(np.ascontiguousarray(mr.T), g.reshape(n * c, h * factor, w * factor))
        return (np.matmul(t, mc).reshape(n, c, h, w),)

    return _make(out, (x,), bwd)


def grid_sample(x, coords) -> Tensor:
    """Bilinear sampling of ``x`` (N,C,H,W) at ``coords`` (N,Ho,Wo,2).

    Coordinates are absolute voxel units, channel 0 = x (along W),
    channel 1 = y (along H); out-of-range coordinates clamp to the border.
    Differentiable w.r.t. both the image and the coordinates.
    """
    x, coords = as_tensor(x), as_tensor(coords)
    if coords.shape[-1] != 2 or coords.ndim != 4:
        raise ShapeError("coords must be (N,Ho,Wo,2), got %s" % (coords.shape,))
    if coords.shape[0] != x.shape[0]:
        raise ShapeError("batch extents differ: %s vs %s" % (x.shape, coords.shape))
    n, c, h, w = x.shape
    _, ho, wo, _ = coords.shape

    cx = np.clip(coords.data[..., 0], 0.0, w - 1.0)
    cy = np.clip(coords.data[..., 1], 0.0, h - 1.0)
    x0 = np.clip(np.floor(cx).astype(np.intp), 0, w - 2)
    y0 = np.clip(np.floor(cy).astype(np.intp), 0, h - 2)
    wx = cx - x0
    wy = cy - y0

    flat = x.data.reshape(n, c, h * w)
    idx = y0 * w + x0  # (N,Ho,Wo)

    def gather(offset):
        ii = (idx + offset).reshape(n, 1, ho * wo)
        return np.take_along_axis(flat, ii, axis=2).reshape(n, c, ho, wo)

    v00 = gather(0)
    v01 = gather(1)
    v10 = gather(w)
    v11 = gather(w + 1)
    wxb = wx[:, None]
    wyb = wy[:, None]
    out = (
        (1 - wyb) * ((1 - wxb) * v00 + wxb * v01) + wyb * ((1 - wxb) * v10 + wxb * v11)
    )

    inside_x = (coords.data[..., 0] > 0.0) & (coords.data[..., 0] < w - 1.0)
    inside_y = (coords.data[..., 1] > 0.0) & (coords.data[..., 1] < h - 1.0)

    def bwd(g):
        gx = None
        gc = None
        if x.requires_grad:
            w00 = ((1 - wyb) * (1 - wxb) * g).reshape(n, c, -1)
            w01 = ((1 - wyb) * wxb * g).reshape(n, c, -1)
            w10 = (wyb * (1 - wxb) * g).reshape(n, c, -1)
            w11 = (wyb * wxb * g).reshape(n, c, -1)
            base = (np.arange(n * c) * (h * w))[:, None]
            ii = np.broadcast_to(idx.reshape(n, 1, -1), (n, c, ho * wo)).reshape(n * c, -1)
            flat_idx = np.concatenate(
                [ii + base, ii + base + 1, ii + base + w, ii + base + w + 1], axis=None
            )
            weights = np.concatenate([w00, w01, w10, w11], axis=None)
            gx = np.bincount(flat_idx, weights=weights, minlength=n * c * h * w).reshape(x.shape)
        if coords.requires_grad:
            dx = ((1 - wyb) * (v01 - v00) + wyb * (v11 - v10)) * g
            dy = ((1 - wxb) * (v10 - v00) + wxb * (v11 - v01)) * g
            gc = np.stack([dx.sum(axis=1) * inside_x, dy.sum(axis=1) * inside_y], axis=-1)
        return gx, gc

    return _make(out, (x, coords), bwd)


def identity_grid(h: int, w: int, n: int = 1) -> Tensor:
    """Constant (N,H,W,2) grid of absolute voxel coordinates."""
    ys, xs = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    grid = np.stack([xs, ys], axis=-1)[None]
    return Tensor(np.broadcast_to(grid, (n, h, w, 2)).copy())
