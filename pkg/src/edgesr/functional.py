"""Differentiable ops on :class:`~edgesr.tensor.Tensor`.

Each op computes its forward result with numpy and registers a closure
returning one gradient per parent (``None`` for non-differentiable ones).
Layout is always N,C,H,W.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .tensor import Tensor, as_tensor, make_result


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _coerce(a, like: Tensor) -> Tensor:
    if isinstance(a, Tensor):
        return a
    return Tensor(np.asarray(a, dtype=like.dtype), dtype=like.dtype)


def _binary_check(name: str, a: Tensor, b: Tensor) -> tuple:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ValueError(f"{name}: incompatible shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a, b) -> Tensor:
    a = a if isinstance(a, Tensor) else _coerce(a, b)
    b = _coerce(b, a)
    _binary_check("add", a, b)
    sa, sb = a.shape, b.shape

    def bw(g):
        return _unbroadcast(g, sa), _unbroadcast(g, sb)

    return make_result("add", a.data + b.data, (a, b), bw)


def sub(a, b) -> Tensor:
    a = a if isinstance(a, Tensor) else _coerce(a, b)
    b = _coerce(b, a)
    _binary_check("sub", a, b)
    sa, sb = a.shape, b.shape

    def bw(g):
        return _unbroadcast(g, sa), _unbroadcast(-g, sb)

    return make_result("sub", a.data - b.data, (a, b), bw)


def mul(a, b) -> Tensor:
    a = a if isinstance(a, Tensor) else _coerce(a, b)
    b = _coerce(b, a)
    _binary_check("mul", a, b)
    ad, bd = a.data, b.data

    def bw(g):
        return _unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)

    return make_result("mul", ad * bd, (a, b), bw)


def div(a, b) -> Tensor:
    a = a if isinstance(a, Tensor) else _coerce(a, b)
    b = _coerce(b, a)
    _binary_check("div", a, b)
    ad, bd = a.data, b.data

    def bw(g):
        return _unbroadcast(g / bd, ad.shape), _unbroadcast(-g * ad / (bd * bd), bd.shape)

    return make_result("div", ad / bd, (a, b), bw)


def power(x: Tensor, exponent: float) -> Tensor:
    xd = x.data

    def bw(g):
        return (g * exponent * xd ** (exponent - 1),)

    return make_result("power", xd**exponent, (x,), bw)


def log(x: Tensor) -> Tensor:
    xd = x.data
    if (xd <= 0).any():
        raise FloatingPointError("log of non-positive value")

    def bw(g):
        return (g / xd,)

    return make_result("log", np.log(xd), (x,), bw)


def sum(x: Tensor) -> Tensor:  # noqa: A001 - mirrors numpy naming
    shape = x.shape

    def bw(g):
        return (np.broadcast_to(g.reshape(()), shape),)

    return make_result("sum", np.asarray(x.data.sum(), dtype=x.dtype), (x,), bw)


def mean(x: Tensor) -> Tensor:
    shape, n = x.shape, x.size

    def bw(g):
        return (np.broadcast_to(g.reshape(()) / n, shape),)

    return make_result("mean", np.asarray(x.data.mean(), dtype=x.dtype), (x,), bw)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    old = x.shape

    def bw(g):
        return (g.reshape(old),)

    return make_result("reshape", x.data.reshape(shape), (x,), bw)


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    """Concatenate along ``axis`` (channels by default)."""
    tensors = [as_tensor(t) for t in tensors]
    ref = tensors[0].shape
    for t in tensors[1:]:
        if t.ndim != len(ref) or any(t.shape[i] != ref[i] for i in range(len(ref)) if i != axis):
            raise ValueError(f"concat: shape {t.shape} does not match {ref} off axis {axis}")
    splits = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def bw(g):
        return tuple(np.split(g, splits, axis=axis))

    return make_result("concat", np.concatenate([t.data for t in tensors], axis=axis), tensors, bw)


# ---------------------------------------------------------------------------
# activations


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0

    def bw(g):
        return (g * mask,)

    return make_result("relu", x.data * mask, (x,), bw)


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    xd = x.data
    scale = np.where(xd >= 0, 1.0, slope).astype(xd.dtype)

    def bw(g):
        return (g * scale,)

    return make_result("leaky_relu", xd * scale, (x,), bw)


def prelu(x: Tensor, alpha: Tensor) -> Tensor:
    """Per-channel parametric ReLU; ``alpha`` has one entry per channel (axis 1)."""
    xd = x.data
    if alpha.ndim != 1 or (xd.ndim > 1 and alpha.shape[0] not in (1, xd.shape[1])):
        raise ValueError(f"prelu: alpha shape {alpha.shape} does not match channel axis of {xd.shape}")
    a = alpha.data.reshape((1, -1) + (1,) * (xd.ndim - 2)) if xd.ndim > 1 else alpha.data
    neg = xd < 0
    out = np.where(neg, a * xd, xd)

    def bw(g):
        gx = np.where(neg, g * a, g)
        ga = g * xd * neg
        if xd.ndim > 1:
            axes = (0,) + tuple(range(2, xd.ndim))
            ga = ga.sum(axis=axes)
            if alpha.shape[0] == 1:
                ga = ga.sum(keepdims=True)
        else:
            ga = ga.sum(keepdims=True) if alpha.shape[0] == 1 else ga
        return gx, ga

    return make_result("prelu", out.astype(xd.dtype), (x, alpha), bw)


def sigmoid(x: Tensor) -> Tensor:
    xd = x.data
    e = np.exp(-np.abs(xd))
    out = np.where(xd >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(xd.dtype)

    def bw(g):
        return (g * out * (1.0 - out),)

    return make_result("sigmoid", out, (x,), bw)


def log_sigmoid(x: Tensor) -> Tensor:
    """``log(sigmoid(x))`` without overflow: ``min(x, 0) - log1p(exp(-|x|))``."""
    xd = x.data
    out = (np.minimum(xd, 0) - np.log1p(np.exp(-np.abs(xd)))).astype(xd.dtype)

    def bw(g):
        e = np.exp(-np.abs(xd))
        sig_neg = np.where(xd >= 0, e / (1.0 + e), 1.0 / (1.0 + e))  # sigmoid(-x)
        return (g * sig_neg,)

    return make_result("log_sigmoid", out, (x,), bw)


# ---------------------------------------------------------------------------
# losses


def mse_mean(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ValueError(f"mse_mean: shape mismatch {a.shape} vs {b.shape}")
    diff = a.data - b.data
    n = diff.size

    def bw(g):
        gd = g.reshape(()) * 2.0 * diff / n
        return gd, -gd

    return make_result("mse_mean", np.asarray(np.mean(diff * diff), dtype=a.dtype), (a, b), bw)


def bce(p: Tensor, target) -> Tensor:
    """Mean binary cross-entropy of probabilities ``p`` against ``target``."""
    t = np.broadcast_to(np.asarray(target.data if isinstance(target, Tensor) else target, dtype=p.dtype), p.shape)
    eps = float(np.finfo(p.dtype).eps)
    pd = np.clip(p.data, eps, 1.0 - eps)
    n = pd.size
    val = -np.mean(t * np.log(pd) + (1.0 - t) * np.log1p(-pd))

    def bw(g):
        return (g.reshape(()) * (pd - t) / (pd * (1.0 - pd)) / n,)

    return make_result("bce", np.asarray(val, dtype=p.dtype), (p,), bw)


def bce_with_logits(logits: Tensor, target) -> Tensor:
    """Mean binary cross-entropy of ``sigmoid(logits)`` against ``target``, computed stably."""
    x = logits.data
    t = np.broadcast_to(np.asarray(target.data if isinstance(target, Tensor) else target, dtype=x.dtype), x.shape)
    # -[t log s(x) + (1-t) log s(-x)] = max(x,0) - t x + log1p(exp(-|x|))
    val = np.mean(np.maximum(x, 0) - t * x + np.log1p(np.exp(-np.abs(x))))
    n = x.size

    def bw(g):
        e = np.exp(-np.abs(x))
        s = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
        return (g.reshape(()) * (s - t) / n,)

    return make_result("bce_with_logits", np.asarray(val, dtype=x.dtype), (logits,), bw)


# ---------------------------------------------------------------------------
# dense layers


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ValueError(f"linear: input {x.shape} incompatible with weight {weight.shape} (feature axis)")
    if bias is not None and bias.shape != (weight.shape[0],):
        raise ValueError(f"linear: bias shape {bias.shape} != ({weight.shape[0]},)")
    xd, wd = x.data, weight.data
    out = xd @ wd.T
    if bias is not None:
        out = out + bias.data

    def bw(g):
        gx = g @ wd
        gw = g.T @ xd
        gb = g.sum(axis=0) if bias is not None else None
        return (gx, gw, gb) if bias is not None else (gx, gw)

    parents = (x, weight, bias) if bias is not None else (x, weight)
    return make_result("linear", out, parents, bw)


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """2-D cross-correlation (no kernel flip), N,C,H,W in and out."""
    if x.ndim != 4:
        raise ValueError(f"conv2d: input must be N,C,H,W, got shape {x.shape}")
    if weight.ndim != 4:
        raise ValueError(f"conv2d: weight must be Cout,Cin,kh,kw, got shape {weight.shape}")
    n, cin, h, w = x.shape
    cout, wcin, kh, kw = weight.shape
    if wcin != cin:
        raise ValueError(f"conv2d: channel axis mismatch, input has {cin} channels but weight expects {wcin}")
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError(f"conv2d: kernel height/width must be odd, got {kh}x{kw}")
    if padding < 0 or stride < 1:
        raise ValueError(f"conv2d: invalid padding={padding} or stride={stride}")
    if bias is not None and bias.shape != (cout,):
        raise ValueError(f"conv2d: bias shape {bias.shape} != ({cout},) on output-channel axis")
    hp, wp = h + 2 * padding, w + 2 * padding
    if hp < kh or wp < kw:
        raise ValueError(f"conv2d: height/width {h}x{w} too small for kernel {kh}x{kw} with padding {padding}")
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1

    # channel-major padded copy: (Cin, N, Hp, Wp)
    xc = np.zeros((cin, n, hp, wp), dtype=x.dtype)
    xc[:, :, padding:padding + h, padding:padding + w] = x.data.transpose(1, 0, 2, 3)
    # (kh*kw, Cout, Cin): every tap matrix is contiguous for BLAS
    wt = np.ascontiguousarray(weight.data.transpose(2, 3, 0, 1)).reshape(kh * kw, cout, cin)
    if stride > 1:
        kernel = _strided_conv
    elif cin < cout and cin * kh * kw * n * ho * wo <= _STACK_LIMIT:
        kernel = _im2col_conv
    else:
        kernel = _flat_conv
    out, bw_core = kernel(xc, wt, kh, kw, stride, ho, wo)
    if bias is not None:
        out += bias.data[:, None, None, None]
    result = np.ascontiguousarray(out.transpose(1, 0, 2, 3))

    def bw(g):
        gcn = np.ascontiguousarray(g.transpose(1, 0, 2, 3))  # (Cout, N, Ho, Wo)
        gxc, gwt = bw_core(gcn)
        gx = gxc[:, :, padding:padding + h, padding:padding + w].transpose(1, 0, 2, 3)
        gw = gwt.reshape(kh, kw, cout, cin).transpose(2, 3, 0, 1)
        grads = [np.ascontiguousarray(gx), np.ascontiguousarray(gw)]
        if bias is not None:
            grads.append(gcn.sum(axis=(1, 2, 3)))
        return tuple(grads)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return make_result("conv2d", result, parents, bw)


# A (kh*kw*Cout) x M intermediate is used when it stays below this many elements.
_STACK_LIMIT = 1 << 26


def _flat_conv(xc, wt, kh, kw, stride, ho, wo):
    """Stride-1 convolution on the flattened padded canvas.

    With the padded input viewed as (Cin, M), M = N*Hp*Wp, tap (i, j) is a
    constant flat offset ``i*Wp + j``.  Outputs are accumulated on the same
    canvas and the valid Ho x Wo window is cut out at the end, so no
    shifted input copies are ever made.
    """
    cin, n, hp, wp = xc.shape
    taps, cout, _ = wt.shape
    m = n * hp * wp
    offsets = [i * wp + j for i in range(kh) for j in range(kw)]
    span = m - offsets[-1]
    xf = xc.reshape(cin, m)
    canvas = np.zeros((cout, m), dtype=xc.dtype)
    if taps * cout * m <= _STACK_LIMIT:
        stacked = (wt.reshape(taps * cout, cin) @ xf).reshape(taps, cout, m)
        for t, off in enumerate(offsets):
            canvas[:, :span] += stacked[t, :, off:off + span]
        del stacked
    else:
        for t, off in enumerate(offsets):
            canvas[:, :span] += wt[t] @ xf[:, off:off + span]
    out = canvas.reshape(cout, n, hp, wp)[:, :, :ho, :wo]

    def bw_core(gcn):
        gc = np.zeros((cout, n, hp, wp), dtype=xc.dtype)
        gc[:, :, :ho, :wo] = gcn
        gc = gc.reshape(cout, m)
        if cout <= cin and taps * cout * m <= _STACK_LIMIT:
            # few output channels: shifted copies of the gradient feed two big GEMMs
            shifted = np.zeros((taps, cout, m), dtype=xc.dtype)
            for t, off in enumerate(offsets):
                shifted[t, :, off:off + span] = gc[:, :span]
            shifted = shifted.reshape(taps * cout, m)
            gwt = (shifted @ xf.T).reshape(taps, cout, cin)
            gxf = np.ascontiguousarray(wt.transpose(2, 0, 1)).reshape(cin, taps * cout) @ shifted
            return gxf.reshape(cin, n, hp, wp), gwt
        gwt = np.empty_like(wt)
        for t, off in enumerate(offsets):
            gwt[t] = gc[:, :span] @ xf[:, off:off + span].T
        gxf = np.zeros((cin, m), dtype=xc.dtype)
        if taps * cin * m <= _STACK_LIMIT:
            wtt = np.ascontiguousarray(wt.transpose(0, 2, 1)).reshape(taps * cin, cout)
            stacked = (wtt @ gc[:, :span]).reshape(taps, cin, span)
            for t, off in enumerate(offsets):
                gxf[:, off:off + span] += stacked[t]
        else:
            for t, off in enumerate(offsets):
                gxf[:, off:off + span] += wt[t].T @ gc[:, :span]
        return gxf.reshape(cin, n, hp, wp), gwt

    return out, bw_core


def _im2col_conv(xc, wt, kh, kw, stride, ho, wo):
    """Stride-1 convolution through an explicit column matrix; cheap when Cin is small."""
    cin, n, hp, wp = xc.shape
    taps, cout, _ = wt.shape
    cols = np.empty((taps, cin, n, ho, wo), dtype=xc.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[i * kw + j] = xc[:, :, i:i + ho, j:j + wo]
    cols = cols.reshape(taps * cin, -1)
    wmat = np.ascontiguousarray(wt.transpose(1, 0, 2)).reshape(cout, taps * cin)
    out = (wmat @ cols).reshape(cout, n, ho, wo)

    def bw_core(gcn):
        gc = gcn.reshape(cout, -1)
        gwt = (gc @ cols.T).reshape(cout, taps, cin).transpose(1, 0, 2)
        gcols = (wmat.T @ gc).reshape(taps, cin, n, ho, wo)
        gxc = np.zeros_like(xc)
        for i in range(kh):
            for j in range(kw):
                gxc[:, :, i:i + ho, j:j + wo] += gcols[i * kw + j]
        return gxc, np.ascontiguousarray(gwt)

    return out, bw_core


def _strided_conv(xc, wt, kh, kw, stride, ho, wo):
    """Tap-by-tap convolution with explicit strided input copies."""
    cin, n, hp, wp = xc.shape
    taps, cout, _ = wt.shape
    slices = [
        (slice(None), slice(None), slice(i, i + stride * (ho - 1) + 1, stride), slice(j, j + stride * (wo - 1) + 1, stride))
        for i in range(kh) for j in range(kw)
    ]
    out = np.zeros((cout, n * ho * wo), dtype=xc.dtype)
    for t, sl in enumerate(slices):
        out += wt[t] @ xc[sl].reshape(cin, -1)
    out = out.reshape(cout, n, ho, wo)

    def bw_core(gcn):
        gc = gcn.reshape(cout, -1)
        gwt = np.empty_like(wt)
        gxc = np.zeros_like(xc)
        for t, sl in enumerate(slices):
            gwt[t] = gc @ xc[sl].reshape(cin, -1).T
            gxc[sl] += (np.ascontiguousarray(wt[t].T) @ gc).reshape(cin, n, ho, wo)
        return gxc, gwt

    return out, bw_core


def batch_norm(
    x: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    weight: Tensor | None = None,
    bias: Tensor | None = None,
    train: bool = True,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """Per-channel batch normalization over (N, H, W).

    In train mode ``running_mean``/``running_var`` are updated in place
    (unbiased variance, exponential average with ``momentum``).
    """
    if x.ndim != 4:
        raise ValueError(f"batch_norm: input must be N,C,H,W, got {x.shape}")
    n, c, h, w = x.shape
    if running_mean.shape != (c,) or running_var.shape != (c,):
        raise ValueError(f"batch_norm: running stats shape {running_mean.shape} != ({c},) on channel axis")
    xd = x.data
    m = n * h * w
    if train:
        if m < 2:
            raise ValueError("batch_norm: need at least 2 values per channel in train mode")
        mu = xd.mean(axis=(0, 2, 3))
        var = xd.var(axis=(0, 2, 3))
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        running_var *= 1.0 - momentum
        running_var += momentum * var * (m / (m - 1))
    else:
        mu, var = running_mean, running_var
    inv = (1.0 / np.sqrt(var + eps)).astype(xd.dtype)
    xhat = (xd - mu.astype(xd.dtype)[None, :, None, None]) * inv[None, :, None, None]
    out = xhat
    if weight is not None:
        out = out * weight.data[None, :, None, None]
    if bias is not None:
        out = out + bias.data[None, :, None, None]

    def bw(g):
        gxhat = g * weight.data[None, :, None, None] if weight is not None else g
        if train:
            s1 = gxhat.mean(axis=(0, 2, 3), keepdims=True)
            s2 = (gxhat * xhat).mean(axis=(0, 2, 3), keepdims=True)
            gx = (gxhat - s1 - xhat * s2) * inv[None, :, None, None]
        else:
            gx = gxhat * inv[None, :, None, None]
        grads = [gx]
        if weight is not None:
            grads.append((g * xhat).sum(axis=(0, 2, 3)))
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return tuple(grads)

    parents = [x]
    if weight is not None:
        parents.append(weight)
    if bias is not None:
        parents.append(bias)
    return make_result("batch_norm", out.astype(xd.dtype), parents, bw)


# ---------------------------------------------------------------------------
# pooling and resampling


def global_avg_pool(x: Tensor) -> Tensor:
    if x.ndim != 4:
        raise ValueError(f"global_avg_pool: input must be N,C,H,W, got {x.shape}")
    n, c, h, w = x.shape

    def bw(g):
        return (np.broadcast_to(g[:, :, None, None] / (h * w), (n, c, h, w)),)

    return make_result("global_avg_pool", x.data.mean(axis=(2, 3)), (x,), bw)


def avg_pool2d(x: Tensor, k: int = 2) -> Tensor:
    """Non-overlapping ``k x k`` average pooling; trailing rows/cols are dropped."""
    n, c, h, w = x.shape
    ho, wo = h // k, w // k
    if ho < 1 or wo < 1:
        raise ValueError(f"avg_pool2d: input {h}x{w} smaller than window {k}")
    crop = x.data[:, :, :ho * k, :wo * k]
    out = crop.reshape(n, c, ho, k, wo, k).mean(axis=(3, 5))

    def bw(g):
        gx = np.zeros(x.shape, dtype=x.dtype)
        up = np.repeat(np.repeat(g, k, axis=2), k, axis=3) / (k * k)
        gx[:, :, :ho * k, :wo * k] = up
        return (gx,)

    return make_result("avg_pool2d", out, (x,), bw)


def pixel_shuffle(x: Tensor, r: int) -> Tensor:
    """Rearrange ``(N, C*r*r, H, W)`` into ``(N, C, r*H, r*W)``."""
    n, crr, h, w = x.shape
    if crr % (r * r):
        raise ValueError(f"pixel_shuffle: channel count {crr} not divisible by r^2={r * r}")
    c = crr // (r * r)
    out = x.data.reshape(n, c, r, r, h, w).transpose(0, 1, 4, 2, 5, 3).reshape(n, c, h * r, w * r)

    def bw(g):
        return (g.reshape(n, c, h, r, w, r).transpose(0, 1, 3, 5, 2, 4).reshape(n, crr, h, w),)

    return make_result("pixel_shuffle", out, (x,), bw)


def pixel_unshuffle(x: Tensor, r: int) -> Tensor:
    """Inverse of :func:`pixel_shuffle`."""
    n, c, hr, wr = x.shape
    if hr % r or wr % r:
        raise ValueError(f"pixel_unshuffle: spatial dims {hr}x{wr} not divisible by r={r}")
    h, w = hr // r, wr // r
    out = x.data.reshape(n, c, h, r, w, r).transpose(0, 1, 3, 5, 2, 4).reshape(n, c * r * r, h, w)

    def bw(g):
        return (g.reshape(n, c, r, r, h, w).transpose(0, 1, 4, 2, 5, 3).reshape(n, c, hr, wr),)

    return make_result("pixel_unshuffle", out, (x,), bw)


def _bilinear_matrix(n_in: int, n_out: int, dtype) -> np.ndarray:
    # half-pixel centers, edge-clamped
    m = np.zeros((n_out, n_in), dtype=np.float64)
    scale = n_in / n_out
    for o in range(n_out):
        src = (o + 0.5) * scale - 0.5
        src = min(max(src, 0.0), n_in - 1.0)
        i0 = int(np.floor(src))
        i1 = min(i0 + 1, n_in - 1)
        t = src - i0
        m[o, i0] += 1.0 - t
        m[o, i1] += t
    return m.astype(dtype)


def resize_bilinear(x: Tensor, out_h: int, out_w: int) -> Tensor:
    """Bilinear resize, differentiable with respect to the values of ``x``."""
    n, c, h, w = x.shape
    ry = _bilinear_matrix(h, out_h, x.dtype)
    rx = _bilinear_matrix(w, out_w, x.dtype)
    out = np.einsum("oh,nchw,pw->ncop", ry, x.data, rx, optimize=True)

    def bw(g):
        return (np.einsum("oh,ncop,pw->nchw", ry, g, rx, optimize=True),)

    return make_result("resize_bilinear", np.ascontiguousarray(out), (x,), bw)


def narrow(x: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Slice ``length`` entries of ``axis`` beginning at ``start``."""
    if start < 0 or start + length > x.shape[axis]:
        raise ValueError(f"narrow: [{start}, {start + length}) out of range for axis {axis} of {x.shape}")
    index = [slice(None)] * x.ndim
    index[axis] = slice(start, start + length)
    index = tuple(index)
    shape = x.shape

    def bw(g):
        gx = np.zeros(shape, dtype=g.dtype)
        gx[index] = g
        return (gx,)

    return make_result("narrow", np.ascontiguousarray(x.data[index]), (x,), bw)
