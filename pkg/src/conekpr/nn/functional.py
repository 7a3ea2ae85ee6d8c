"""Forward and backward passes for the fixed layer set.

The compute core is channels-last (NHWC): im2col lowers each convolution to
one tall GEMM with no transpose copies, which is what makes CPU training of
the keypoint nets tractable. Stride-1 input gradients run as a convolution
with the spatially flipped, channel-swapped kernel (another tall GEMM);
strided convolutions scatter through the im2col adjoint instead.

Channels-first (C,H,W / N,C,H,W) entry points with the documented contracts
wrap the core with boundary transposes; they are the reference surface and
are fine for tests and small inputs. The models call the NHWC core directly.

Each forward returns ``(output, ctx)``; the matching ``*_backward(ctx, grad)``
returns exact gradients of the forward map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import ShapeError


def _as_batch_nhwc(x):
    x = np.asarray(x)
    if x.ndim == 3:
        return x[None], True
    if x.ndim == 4:
        return x, False
    raise ShapeError(f"expected 3D (H,W,C) or 4D (N,H,W,C) input, got shape {x.shape}")


def _as_batch_nchw(x):
    x = np.asarray(x)
    if x.ndim == 3:
        return x[None], True
    if x.ndim == 4:
        return x, False
    raise ShapeError(f"expected 3D (C,H,W) or 4D (N,C,H,W) input, got shape {x.shape}")


def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    if size + 2 * padding < kernel:
        raise ShapeError(
            f"input size {size} with padding {padding} is smaller than kernel {kernel}"
        )
    return (size + 2 * padding - kernel) // stride + 1


def _pad_nhwc(x, padding):
    if not padding:
        return x
    n, h, w, c = x.shape
    xp = np.zeros((n, h + 2 * padding, w + 2 * padding, c), dtype=x.dtype)
    xp[:, padding:padding + h, padding:padding + w, :] = x
    return xp


def _im2col_nhwc(xp, kernel, stride, out_h, out_w):
    """Columns laid out (N, out_h, out_w, k, k, C): reshapes to a tall GEMM
    operand (N*out_h*out_w, k*k*C) without any transpose copy."""
    n, _, _, c = xp.shape
    col = np.empty((n, out_h, out_w, kernel, kernel, c), dtype=xp.dtype)
    for i in range(kernel):
        i_end = i + stride * out_h
        for j in range(kernel):
            j_end = j + stride * out_w
            col[:, :, :, i, j, :] = xp[:, i:i_end:stride, j:j_end:stride, :]
    return col


def _col2im_nhwc(dcol, xp_shape, kernel, stride, out_h, out_w):
    """Adjoint of :func:`_im2col_nhwc`: scatter-add columns into a padded buffer."""
    dxp = np.zeros(xp_shape, dtype=dcol.dtype)
    for i in range(kernel):
        i_end = i + stride * out_h
        for j in range(kernel):
            j_end = j + stride * out_w
            dxp[:, i:i_end:stride, j:j_end:stride, :] += dcol[:, :, :, i, j, :]
    return dxp


@dataclass
class ConvNhwcCtx:
    col2: np.ndarray  # (N*out_h*out_w, k*k*C_in)
    x_shape: tuple
    weight: np.ndarray  # (k, k, C_in, C_out)
    stride: int
    padding: int
    out_hw: tuple
    single: bool


def conv2d_nhwc_forward(x, weight, bias=None, stride: int = 1, padding: int = 0):
    """NHWC convolution; weight laid out (k, k, C_in, C_out)."""
    xb, single = _as_batch_nhwc(x)
    weight = np.asarray(weight)
    if weight.ndim != 4 or weight.shape[0] != weight.shape[1]:
        raise ShapeError(f"weight must be (k,k,C_in,C_out), got {weight.shape}")
    n, h, w, c_in = xb.shape
    k, _, wc_in, c_out = weight.shape
    if wc_in != c_in:
        raise ShapeError(
            f"input has {c_in} channels but weight expects {wc_in} "
            f"(input {xb.shape}, weight {weight.shape})"
        )
    if stride < 1 or padding < 0 or k < 1:
        raise ValueError(f"invalid conv geometry: kernel={k} stride={stride} padding={padding}")
    out_h = conv_output_size(h, k, stride, padding)
    out_w = conv_output_size(w, k, stride, padding)
    xp = _pad_nhwc(xb, padding)
    if k == 1 and stride == 1:
        col2 = xp.reshape(n * out_h * out_w, c_in)  # pointwise conv needs no gather
    else:
        col2 = _im2col_nhwc(xp, k, stride, out_h, out_w).reshape(
            n * out_h * out_w, k * k * c_in)
    w2 = weight.reshape(k * k * c_in, c_out)
    out = col2 @ w2
    if bias is not None:
        bias = np.asarray(bias)
        if bias.shape != (c_out,):
            raise ShapeError(f"bias must be ({c_out},), got {bias.shape}")
        out += bias[None, :]
    out = out.reshape(n, out_h, out_w, c_out)
    ctx = ConvNhwcCtx(col2=col2, x_shape=xb.shape, weight=weight, stride=stride,
                      padding=padding, out_hw=(out_h, out_w), single=single)
    return (out[0] if single else out), ctx


def conv2d_nhwc_backward(ctx, grad_out):
    if ctx is None:
        raise ValueError("conv2d_nhwc_backward requires the forward context, got None")
    gb, _ = _as_batch_nhwc(grad_out)
    n, h, w, c_in = ctx.x_shape
    k, _, _, c_out = ctx.weight.shape
    out_h, out_w = ctx.out_hw
    if gb.shape != (n, out_h, out_w, c_out):
        raise ShapeError(
            f"grad_out shape {gb.shape} does not match forward output "
            f"{(n, out_h, out_w, c_out)}"
        )
    g2 = gb.reshape(n * out_h * out_w, c_out)
    grad_bias = g2.sum(axis=0)
    grad_weight = (ctx.col2.T @ g2).reshape(ctx.weight.shape)

    if ctx.stride == 1:
        # input grad as a conv with the flipped, channel-swapped kernel: this
        # keeps the GEMM tall instead of an inner dim of size C_out
        w_flip = ctx.weight[::-1, ::-1].transpose(0, 1, 3, 2)
        gp = _pad_nhwc(gb, k - 1 - ctx.padding) if k - 1 - ctx.padding else gb
        if k == 1:
            colg2 = gp.reshape(n * h * w, c_out)
        else:
            colg2 = _im2col_nhwc(gp, k, 1, h, w).reshape(n * h * w, k * k * c_out)
        grad_input = (colg2 @ w_flip.reshape(k * k * c_out, c_in)).reshape(n, h, w, c_in)
    else:
        w2 = ctx.weight.reshape(k * k * c_in, c_out)
        dcol = (g2 @ w2.T).reshape(n, out_h, out_w, k, k, c_in)
        hp, wp = h + 2 * ctx.padding, w + 2 * ctx.padding
        dxp = _col2im_nhwc(dcol, (n, hp, wp, c_in), k, ctx.stride, out_h, out_w)
        p = ctx.padding
        grad_input = dxp[:, p:hp - p, p:wp - p, :] if p else dxp
        grad_input = np.ascontiguousarray(grad_input)
    if ctx.single:
        grad_input = grad_input[0]
    return grad_input, grad_weight, grad_bias


@dataclass
class Conv2dCtx:
    inner: ConvNhwcCtx


def conv2d_forward(x, weight, bias=None, stride: int = 1, padding: int = 0):
    """Cross-correlate a zero-padded input with `weight` and add `bias`.

    Channels-first contract: x is (C_in,H,W) or (N,C_in,H,W), weight is
    (C_out,C_in,k,k), bias is (C_out,).
    """
    xb, single = _as_batch_nchw(x)
    weight = np.asarray(weight)
    if weight.ndim != 4 or weight.shape[2] != weight.shape[3]:
        raise ShapeError(f"weight must be (C_out,C_in,k,k), got {weight.shape}")
    x_nhwc = np.ascontiguousarray(xb.transpose(0, 2, 3, 1))
    w_nhwc = np.ascontiguousarray(weight.transpose(2, 3, 1, 0))
    out, inner = conv2d_nhwc_forward(x_nhwc, w_nhwc, bias, stride, padding)
    inner.single = single
    out = np.ascontiguousarray(out.transpose(0, 3, 1, 2))
    return (out[0] if single else out), Conv2dCtx(inner=inner)


def conv2d(x, weight, bias=None, stride: int = 1, padding: int = 0):
    out, _ = conv2d_forward(x, weight, bias, stride, padding)
    return out


def conv2d_backward(ctx, grad_out):
    """Gradients of conv2d w.r.t. input, weight, and bias (channels-first)."""
    if ctx is None:
        raise ValueError("conv2d_backward requires the forward context, got None")
    gb, _ = _as_batch_nchw(grad_out)
    single = ctx.inner.single
    ctx.inner.single = False
    dx, dw, db = conv2d_nhwc_backward(ctx.inner, np.ascontiguousarray(gb.transpose(0, 2, 3, 1)))
    dx = np.ascontiguousarray(dx.transpose(0, 3, 1, 2))
    dw = np.ascontiguousarray(dw.transpose(3, 2, 0, 1))
    if single:
        dx = dx[0]
    return dx, dw, db


@dataclass
class TransposedConv2dCtx:
    x: np.ndarray  # NHWC batch
    weight: np.ndarray  # (k, k, C_out, C_in): adjoint of a conv taking C_out -> C_in
    stride: int
    padding: int
    single: bool
    nchw: bool


def transposed_conv2d_nhwc_forward(x, weight, bias=None, stride: int = 1, padding: int = 0):
    """Transposed convolution in NHWC; weight laid out (k, k, C_out, C_in)."""
    xb, single = _as_batch_nhwc(x)
    weight = np.asarray(weight)
    n, h, w, c_in = xb.shape
    k, _, c_out, wc_in = weight.shape
    if wc_in != c_in:
        raise ShapeError(f"input has {c_in} channels but weight expects {wc_in}")
    full_h = (h - 1) * stride + k
    full_w = (w - 1) * stride + k
    out_h = full_h - 2 * padding
    out_w = full_w - 2 * padding
    if out_h <= 0 or out_w <= 0:
        raise ShapeError(f"padding {padding} too large for output {full_h}x{full_w}")
    x2 = xb.reshape(n * h * w, c_in)
    g = x2 @ weight.reshape(k * k * c_out, c_in).T  # (NHW, k*k*C_out)
    g = g.reshape(n, h, w, k, k, c_out)
    yfull = _col2im_nhwc(g, (n, full_h, full_w, c_out), k, stride, h, w)
    out = yfull[:, padding:full_h - padding, padding:full_w - padding, :]
    if bias is not None:
        out = out + np.asarray(bias)[None, None, None, :]
    out = np.ascontiguousarray(out)
    ctx = TransposedConv2dCtx(x=xb, weight=weight, stride=stride, padding=padding,
                              single=single, nchw=False)
    return (out[0] if single else out), ctx


def transposed_conv2d_nhwc_backward(ctx, grad_out):
    if ctx is None:
        raise ValueError("transposed_conv2d backward requires the forward context, got None")
    gb, _ = _as_batch_nhwc(grad_out)
    n, h, w, c_in = ctx.x.shape
    k, _, c_out, _ = ctx.weight.shape
    grad_bias = gb.sum(axis=(0, 1, 2))
    gp = _pad_nhwc(gb, ctx.padding)
    colg2 = _im2col_nhwc(gp, k, ctx.stride, h, w).reshape(n * h * w, k * k * c_out)
    w2 = ctx.weight.reshape(k * k * c_out, c_in)
    grad_input = (colg2 @ w2).reshape(n, h, w, c_in)
    x2 = ctx.x.reshape(n * h * w, c_in)
    grad_weight = (colg2.T @ x2).reshape(ctx.weight.shape)
    if ctx.single:
        grad_input = grad_input[0]
    return grad_input, grad_weight, grad_bias


def transposed_conv2d_forward(x, weight, bias=None, stride: int = 1, padding: int = 0):
    """Transposed convolution (adjoint of conv2d); channels-first contract
    with weight laid out (C_in, C_out, k, k)."""
    xb, single = _as_batch_nchw(x)
    weight = np.asarray(weight)
    if weight.ndim != 4 or weight.shape[2] != weight.shape[3]:
        raise ShapeError(f"weight must be (C_in,C_out,k,k), got {weight.shape}")
    x_nhwc = np.ascontiguousarray(xb.transpose(0, 2, 3, 1))
    w_nhwc = np.ascontiguousarray(weight.transpose(2, 3, 1, 0))  # (k,k,C_out,C_in)
    out, ctx = transposed_conv2d_nhwc_forward(x_nhwc, w_nhwc, bias, stride, padding)
    ctx.single = single
    ctx.nchw = True
    out = np.ascontiguousarray(out.transpose(0, 3, 1, 2))
    return (out[0] if single else out), ctx


def transposed_conv2d(x, weight, bias=None, stride: int = 1, padding: int = 0):
    out, _ = transposed_conv2d_forward(x, weight, bias, stride, padding)
    return out


def transposed_conv2d_backward(ctx, grad_out):
    if ctx is None:
        raise ValueError("transposed_conv2d_backward requires the forward context, got None")
    if not ctx.nchw:
        return transposed_conv2d_nhwc_backward(ctx, grad_out)
    gb, _ = _as_batch_nchw(grad_out)
    single = ctx.single
    ctx.single = False
    dx, dw, db = transposed_conv2d_nhwc_backward(
        ctx, np.ascontiguousarray(gb.transpose(0, 2, 3, 1)))
    dx = np.ascontiguousarray(dx.transpose(0, 3, 1, 2))
    dw = np.ascontiguousarray(dw.transpose(3, 2, 0, 1))
    if single:
        dx = dx[0]
    return dx, dw, db


@dataclass
class BatchNormCtx:
    xhat: np.ndarray
    gamma: np.ndarray
    inv_std: np.ndarray
    train: bool
    single: bool
    channel_axis: int


def _batchnorm_core(xb, gamma, beta, running_mean, running_var, train, momentum, eps,
                    channel_axis, single):
    ndim = xb.ndim
    reduce_axes = tuple(a for a in range(ndim) if a != channel_axis)
    shape = [1] * ndim
    shape[channel_axis] = -1

    def chan(v):
        return v.reshape(shape)

    if train:
        if xb.shape[0] < 1:
            raise ValueError("train-mode batchnorm needs at least one sample")
        m = int(np.prod([xb.shape[a] for a in reduce_axes]))
        mean = xb.mean(axis=reduce_axes)
        var = xb.var(axis=reduce_axes)
        inv_std = 1.0 / np.sqrt(var + eps)
        xhat = (xb - chan(mean)) * chan(inv_std)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean
        unbiased = var * (m / max(m - 1, 1))
        running_var *= 1.0 - momentum
        running_var += momentum * unbiased
    else:
        inv_std = 1.0 / np.sqrt(running_var + eps)
        xhat = (xb - chan(running_mean)) * chan(inv_std)
    out = chan(gamma) * xhat + chan(beta)
    ctx = BatchNormCtx(xhat=xhat, gamma=gamma, inv_std=inv_std.astype(xb.dtype),
                       train=train, single=single, channel_axis=channel_axis)
    return out, ctx


def batchnorm_forward(x, gamma, beta, running_mean, running_var, train: bool,
                      momentum: float = 0.1, eps: float = 1e-5):
    """Per-channel batch normalization over (N,H,W), channels-first contract.

    Train mode normalizes by batch statistics and updates the running buffers
    in place via an exponential moving average (the running variance uses the
    unbiased estimate). Eval mode uses the running buffers.
    """
    xb, single = _as_batch_nchw(x)
    c = xb.shape[1]
    gamma = np.asarray(gamma)
    beta = np.asarray(beta)
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError(f"gamma/beta must be ({c},), got {gamma.shape}/{beta.shape}")
    out, ctx = _batchnorm_core(xb, gamma, beta, running_mean, running_var, train,
                               momentum, eps, channel_axis=1, single=single)
    return (out[0] if single else out), ctx


def batchnorm_nhwc_forward(x, gamma, beta, running_mean, running_var, train: bool,
                           momentum: float = 0.1, eps: float = 1e-5):
    xb, single = _as_batch_nhwc(x)
    out, ctx = _batchnorm_core(xb, np.asarray(gamma), np.asarray(beta), running_mean,
                               running_var, train, momentum, eps,
                               channel_axis=3, single=single)
    return (out[0] if single else out), ctx


def batchnorm(x, gamma, beta, running_mean, running_var, train: bool,
              momentum: float = 0.1, eps: float = 1e-5):
    out, _ = batchnorm_forward(x, gamma, beta, running_mean, running_var,
                               train, momentum, eps)
    return out


def batchnorm_backward(ctx, grad_out):
    gb = np.asarray(grad_out)
    if ctx.single:
        gb = gb[None]
    ndim = gb.ndim
    axis = ctx.channel_axis
    reduce_axes = tuple(a for a in range(ndim) if a != axis)
    shape = [1] * ndim
    shape[axis] = -1

    def chan(v):
        return v.reshape(shape)

    dgamma = (gb * ctx.xhat).sum(axis=reduce_axes)
    dbeta = gb.sum(axis=reduce_axes)
    dxhat = gb * chan(ctx.gamma)
    if ctx.train:
        m = int(np.prod([gb.shape[a] for a in reduce_axes]))
        sum_dxhat = dxhat.sum(axis=reduce_axes)
        sum_dxhat_xhat = (dxhat * ctx.xhat).sum(axis=reduce_axes)
        dx = (chan(ctx.inv_std) / m) * (
            m * dxhat - chan(sum_dxhat) - ctx.xhat * chan(sum_dxhat_xhat)
        )
    else:
        dx = dxhat * chan(ctx.inv_std)
    if ctx.single:
        dx = dx[0]
    return dx, dgamma, dbeta


batchnorm_nhwc_backward = batchnorm_backward


def relu_forward(x):
    x = np.asarray(x)
    mask = x > 0
    return x * mask, mask


def relu(x):
    out, _ = relu_forward(x)
    return out


def relu_backward(mask, grad_out):
    return grad_out * mask


def dropout_forward(x, rate: float, train: bool, rng: np.random.Generator | None = None,
                    seed: int | None = None):
    """Inverted dropout: kept units are scaled by 1/(1-rate). Eval mode is identity."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    x = np.asarray(x)
    if not train or rate == 0.0:
        return x, None
    if rng is None:
        rng = np.random.default_rng(seed)
    draw_dtype = np.float32 if x.dtype == np.float32 else np.float64
    keep = rng.random(x.shape, dtype=draw_dtype) >= rate
    scale = 1.0 / (1.0 - rate)
    mask = keep.astype(x.dtype) * np.asarray(scale, dtype=x.dtype)
    return x * mask, mask


def dropout(x, rate: float, train: bool, rng=None, seed=None):
    out, _ = dropout_forward(x, rate, train, rng, seed)
    return out


def dropout_backward(mask, grad_out):
    if mask is None:
        return grad_out
    return grad_out * mask


def upsample2x_forward(x, channel_axis: int = 1):
    """Nearest-neighbor 2x spatial upsampling; spatial axes follow the layout."""
    if channel_axis == 1:
        xb, single = _as_batch_nchw(x)
        out = xb.repeat(2, axis=2).repeat(2, axis=3)
    else:
        xb, single = _as_batch_nhwc(x)
        out = xb.repeat(2, axis=1).repeat(2, axis=2)
    return (out[0] if single else out), (single, channel_axis)


def upsample2x(x):
    out, _ = upsample2x_forward(x)
    return out


def upsample2x_backward(ctx, grad_out):
    single, channel_axis = ctx
    if channel_axis == 1:
        gb, _ = _as_batch_nchw(grad_out)
        n, c, h2, w2 = gb.shape
        dx = gb.reshape(n, c, h2 // 2, 2, w2 // 2, 2).sum(axis=(3, 5))
    else:
        gb, _ = _as_batch_nhwc(grad_out)
        n, h2, w2, c = gb.shape
        dx = gb.reshape(n, h2 // 2, 2, w2 // 2, 2, c).sum(axis=(2, 4))
    return dx[0] if single else dx


@dataclass
class LinearCtx:
    x: np.ndarray
    weight: np.ndarray
    single: bool


def linear_forward(x, weight, bias=None):
    """Affine map: out = x @ weight.T + bias, weight laid out (out, in)."""
    x = np.asarray(x)
    single = x.ndim == 1
    xb = x[None] if single else x
    weight = np.asarray(weight)
    if xb.shape[1] != weight.shape[1]:
        raise ShapeError(
            f"input features {xb.shape[1]} do not match weight {weight.shape}"
        )
    out = xb @ weight.T
    if bias is not None:
        out = out + np.asarray(bias)[None, :]
    ctx = LinearCtx(x=xb, weight=weight, single=single)
    return (out[0] if single else out), ctx


def linear(x, weight, bias=None):
    out, _ = linear_forward(x, weight, bias)
    return out


def linear_backward(ctx, grad_out):
    gb = np.asarray(grad_out)
    if ctx.single:
        gb = gb[None]
    dx = gb @ ctx.weight
    dw = gb.T @ ctx.x
    db = gb.sum(axis=0)
    if ctx.single:
        dx = dx[0]
    return dx, dw, db


def _spatial_softmax_core(flat):
    z = flat - flat.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def spatial_softmax_forward(x):
    """Per-channel softmax over the spatial grid; each channel sums to 1.

    Channels-first contract: (K,H,W) or (N,K,H,W).
    """
    xb, single = _as_batch_nchw(x)
    n, c, h, w = xb.shape
    p = _spatial_softmax_core(xb.reshape(n, c, h * w)).reshape(n, c, h, w)
    return (p[0] if single else p), (p, single, 1)


def spatial_softmax(x):
    out, _ = spatial_softmax_forward(x)
    return out


def spatial_softmax_nhwc_forward(x):
    """Per-channel spatial softmax on (N,H,W,K)."""
    xb, single = _as_batch_nhwc(x)
    n, h, w, c = xb.shape
    flat = np.ascontiguousarray(xb.transpose(0, 3, 1, 2)).reshape(n, c, h * w)
    p = _spatial_softmax_core(flat).reshape(n, c, h, w).transpose(0, 2, 3, 1)
    p = np.ascontiguousarray(p)
    return (p[0] if single else p), (p, single, 3)


def spatial_softmax_backward(ctx, grad_out):
    p, single, channel_axis = ctx
    gb = np.asarray(grad_out)
    if single:
        gb = gb[None]
    if channel_axis == 1:
        n, c, h, w = gb.shape
        pf = p.reshape(n, c, h * w)
        gf = gb.reshape(n, c, h * w)
        dot = (pf * gf).sum(axis=2, keepdims=True)
        dz = (pf * (gf - dot)).reshape(n, c, h, w)
    else:
        spatial_axes = (1, 2)
        dot = (p * gb).sum(axis=spatial_axes, keepdims=True)
        dz = p * (gb - dot)
    return dz[0] if single else dz


spatial_softmax_nhwc_backward = spatial_softmax_backward


def soft_argmax(heatmap, validate: bool = True, tol: float = 1e-6):
    """Probability-weighted mean pixel coordinate of normalized heatmaps.

    Accepts (H,W), (K,H,W) or (N,K,H,W); returns coordinates (..., 2) ordered
    (x, y) with x the column index and y the row index.
    """
    p = np.asarray(heatmap)
    if p.ndim < 2:
        raise ShapeError(f"heatmap must have at least 2 dims, got shape {p.shape}")
    h, w = p.shape[-2], p.shape[-1]
    if validate:
        sums = p.sum(axis=(-2, -1))
        if np.any(p < -tol) or np.any(np.abs(sums - 1.0) > tol):
            raise ValueError("soft_argmax expects non-negative heatmaps normalized to sum 1")
    xs = np.arange(w, dtype=p.dtype)
    ys = np.arange(h, dtype=p.dtype)
    x = (p.sum(axis=-2) * xs).sum(axis=-1)
    y = (p.sum(axis=-1) * ys).sum(axis=-1)
    return np.stack([x, y], axis=-1)


def soft_argmax_backward(heatmap_shape, grad_coords, dtype=np.float64):
    """Gradient of soft_argmax w.r.t. the heatmap: d(x)/dp = column, d(y)/dp = row."""
    h, w = heatmap_shape[-2], heatmap_shape[-1]
    g = np.asarray(grad_coords)
    xs = np.arange(w, dtype=dtype)
    ys = np.arange(h, dtype=dtype)
    gx = g[..., 0]
    gy = g[..., 1]
    return (gx[..., None, None] * xs[None, :]
            + gy[..., None, None] * ys[:, None]).astype(dtype)


def soft_argmax_nhwc(p):
    """soft_argmax over (N,H,W,K) without validation; returns (N,K,2)."""
    n, h, w, k = p.shape
    xs = np.arange(w, dtype=p.dtype)
    ys = np.arange(h, dtype=p.dtype)
    x = np.einsum("nhwk,w->nk", p, xs)
    y = np.einsum("nhwk,h->nk", p, ys)
    return np.stack([x, y], axis=-1)


def soft_argmax_nhwc_backward(shape, grad_coords, dtype):
    n, h, w, k = shape
    g = np.asarray(grad_coords)
    xs = np.arange(w, dtype=dtype)
    ys = np.arange(h, dtype=dtype)
    gx = g[..., 0]  # (N, K)
    gy = g[..., 1]
    dp = gx[:, None, None, :] * xs[None, None, :, None] \
        + gy[:, None, None, :] * ys[None, :, None, None]
    return dp.astype(dtype)


def global_avg_pool_forward(x, channel_axis: int = 1):
    if channel_axis == 1:
        xb, single = _as_batch_nchw(x)
        out = xb.mean(axis=(2, 3))
    else:
        xb, single = _as_batch_nhwc(x)
        out = xb.mean(axis=(1, 2))
    return (out[0] if single else out), (xb.shape, single, channel_axis)


def global_avg_pool_backward(ctx, grad_out):
    shape, single, channel_axis = ctx
    gb = np.asarray(grad_out)
    if single:
        gb = gb[None]
    if channel_axis == 1:
        n, c, h, w = shape
        dx = np.broadcast_to(gb[:, :, None, None] / (h * w), shape).astype(gb.dtype).copy()
    else:
        n, h, w, c = shape
        dx = np.broadcast_to(gb[:, None, None, :] / (h * w), shape).astype(gb.dtype).copy()
    return dx[0] if single else dx
