"""Layer forward passes and their adjoints.

All activations are C x H x W (no batch axis).  Reductions accumulate
in float64 regardless of the working precision; results are cast back
to the input dtype, so a float32 forward stays reproducible while a
float64 forward is exact enough for finite-difference checks.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _out_extent(size, k, stride, pad):
    return (size + 2 * pad - k) // stride + 1


def conv_output_shape(in_shape, weight_shape, stride, padding):
    """(K, H', W') for a C x H x W input under the usual shape formula."""
    c, h, w = in_shape
    k, wc, kh, kw = weight_shape
    if wc != c:
        raise ValueError(f"kernel expects {wc} input channels, input has {c}")
    ho = _out_extent(h, kh, stride[0], padding[0])
    wo = _out_extent(w, kw, stride[1], padding[1])
    if ho <= 0 or wo <= 0:
        raise ValueError(
            f"nonpositive conv output extent {ho}x{wo} "
            f"(input {h}x{w}, kernel {kh}x{kw}, stride {stride}, padding {padding})"
        )
    return k, ho, wo


def _pad_hw(x, padding, value=0.0):
    ph, pw = padding
    if ph == 0 and pw == 0:
        return x
    return np.pad(x, ((0, 0), (ph, ph), (pw, pw)), constant_values=value)


def _windows(xp, kh, kw, sh, sw):
    # (C, H', W', kh, kw) strided view over the padded input
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))
    return win[:, ::sh, ::sw]


def conv2d(x, weight, bias=None, stride=(1, 1), padding=(0, 0)):
    """Cross-correlation of a C x H x W input with a K x C x kh x kw kernel."""
    x = np.asarray(x)
    weight = np.asarray(weight)
    k, ho, wo = conv_output_shape(x.shape, weight.shape, stride, padding)
    kh, kw = weight.shape[2], weight.shape[3]
    xp = _pad_hw(x, padding)
    win = _windows(xp, kh, kw, stride[0], stride[1])
    cols = win.transpose(0, 3, 4, 1, 2).reshape(-1, ho * wo)
    w2 = weight.reshape(k, -1)
    out = w2.astype(np.float64) @ cols.astype(np.float64)
    if bias is not None:
        out += np.asarray(bias, dtype=np.float64)[:, None]
    return out.reshape(k, ho, wo).astype(x.dtype)


def conv2d_backward(g, x, weight, stride=(1, 1), padding=(0, 0), with_weight_grad=True):
    """Adjoint of conv2d: returns (dx, dweight, dbias).

    ``g`` is the K x H' x W' output gradient; the input gradient is the
    transposed scatter of W^T g back over the receptive fields.
    """
    g = np.asarray(g)
    x = np.asarray(x)
    weight = np.asarray(weight)
    k, c, kh, kw = weight.shape
    _, ho, wo = g.shape
    sh, sw = stride
    ph, pw = padding
    hp, wp = x.shape[1] + 2 * ph, x.shape[2] + 2 * pw

    g2 = g.reshape(k, -1).astype(np.float64)
    w2 = weight.reshape(k, -1).astype(np.float64)
    dcols = (w2.T @ g2).reshape(c, kh, kw, ho, wo)
    dxp = np.zeros((c, hp, wp))
    for i in range(kh):
        for j in range(kw):
            dxp[:, i : i + sh * ho : sh, j : j + sw * wo : sw] += dcols[:, i, j]
    dx = dxp[:, ph : hp - ph, pw : wp - pw].astype(x.dtype)

    dweight = None
    if with_weight_grad:
        xp = _pad_hw(x, padding)
        win = _windows(xp, kh, kw, sh, sw)
        cols = win.transpose(0, 3, 4, 1, 2).reshape(-1, ho * wo)
        dweight = (g2 @ cols.astype(np.float64).T).reshape(weight.shape).astype(x.dtype)
    dbias = g.astype(np.float64).sum(axis=(1, 2)).astype(x.dtype)
    return dx, dweight, dbias


def relu(x):
    return np.maximum(x, 0)


def relu_backward(g, y):
    # gradient is exactly zero wherever the forward output was zero
    return np.where(y > 0, g, 0)


def maxpool(x, kernel, stride, padding):
    """Max pooling; padded positions hold -inf so they can never win.

    Returns (output, switches) where switches are the flat in-window
    argmax positions (first maximum in row-major window order), kept
    for the backward routing.
    """
    x = np.asarray(x)
    kh, kw = kernel
    xp = _pad_hw(x, padding, value=-np.inf)
    win = _windows(xp, kh, kw, stride[0], stride[1])
    flat = win.reshape(win.shape[:3] + (kh * kw,))
    switches = flat.argmax(axis=3)
    out = np.take_along_axis(flat, switches[..., None], axis=3)[..., 0]
    return out, switches


def maxpool_backward(g, switches, in_shape, kernel, stride, padding):
    c, h, w = in_shape
    kh, kw = kernel
    sh, sw = stride
    ph, pw = padding
    _, ho, wo = g.shape
    dxp = np.zeros((c, h + 2 * ph, w + 2 * pw), dtype=np.float64)
    ci, hi, wi = np.indices((c, ho, wo))
    rows = hi * sh + switches // kw
    cols = wi * sw + switches % kw
    np.add.at(dxp, (ci, rows, cols), g)
    return dxp[:, ph : ph + h, pw : pw + w].astype(g.dtype)


def avgpool(x, kernel, stride, padding):
    """Average pooling with a fixed kh*kw denominator (padding counts)."""
    x = np.asarray(x)
    kh, kw = kernel
    xp = _pad_hw(x, padding, value=0.0)
    win = _windows(xp, kh, kw, stride[0], stride[1])
    out = win.astype(np.float64).sum(axis=(3, 4)) / (kh * kw)
    return out.astype(x.dtype)


def avgpool_backward(g, in_shape, kernel, stride, padding):
    c, h, w = in_shape
    kh, kw = kernel
    sh, sw = stride
    ph, pw = padding
    _, ho, wo = g.shape
    dxp = np.zeros((c, h + 2 * ph, w + 2 * pw), dtype=np.float64)
    share = g.astype(np.float64) / (kh * kw)
    for i in range(kh):
        for j in range(kw):
            dxp[:, i : i + sh * ho : sh, j : j + sw * wo : sw] += share
    return dxp[:, ph : ph + h, pw : pw + w].astype(g.dtype)


def _bn_scale(gamma, var, eps):
    return np.asarray(gamma, dtype=np.float64) / np.sqrt(
        np.asarray(var, dtype=np.float64) + eps
    )


def batchnorm_inference(x, gamma, beta, mean, var, eps):
    """Channelwise affine using stored running statistics."""
    scale = _bn_scale(gamma, var, eps)
    shift = np.asarray(beta, dtype=np.float64) - scale * np.asarray(mean, dtype=np.float64)
    out = x * scale[:, None, None] + shift[:, None, None]
    return out.astype(x.dtype)


def batchnorm_backward(g, gamma, var, eps):
    scale = _bn_scale(gamma, var, eps)
    return (g * scale[:, None, None]).astype(g.dtype)
