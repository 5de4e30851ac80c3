"""Pure-numpy implementations of the hot kernels.

Same contracts as the Cython module ``seatnet.backend._core``; selected at
import time when the extension is unavailable (or forced via
``SEATNET_BACKEND=pure``). Gather/scatter is expressed as a loop over the
kernel taps so each iteration is one vectorized strided copy.

Convolution-style functions take the already-padded input; gradients come
back unpadded. Channel reductions accumulate in float64.
"""

import numpy as np

_MASK = 0xFFFFFFFFFFFFFFFF


def im2col(xpad, kh, kw, sh, sw, oh, ow):
    """(B, C, Hp, Wp) -> (B, C*kh*kw, oh*ow) patch matrix, row-major taps."""
    b, c, _, _ = xpad.shape
    cols = np.empty((b, c, kh, kw, oh, ow), dtype=xpad.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = xpad[:, :, i : i + sh * oh : sh, j : j + sw * ow : sw]
    return cols.reshape(b, c * kh * kw, oh * ow)


def col2im(cols, b, c, h, w, kh, kw, sh, sw, pt, pl, oh, ow):
    """Scatter-add transpose of im2col; returns the unpadded (h, w) gradient."""
    hp = max(kh + sh * (oh - 1), pt + h)
    wp = max(kw + sw * (ow - 1), pl + w)
    gxp = np.zeros((b, c, hp, wp), dtype=cols.dtype)
    cols = cols.reshape(b, c, kh, kw, oh, ow)
    for i in range(kh):
        for j in range(kw):
            gxp[:, :, i : i + sh * oh : sh, j : j + sw * ow : sw] += cols[:, :, i, j]
    return np.ascontiguousarray(gxp[:, :, pt : pt + h, pl : pl + w])


def depthwise_forward(xpad, kernel, sh, sw, oh, ow):
    """Per-channel convolution: channel c of the output sees only channel c."""
    b, c, _, _ = xpad.shape
    kh, kw = kernel.shape[2], kernel.shape[3]
    y = np.zeros((b, c, oh, ow), dtype=xpad.dtype)
    for i in range(kh):
        for j in range(kw):
            tap = kernel[:, 0, i, j][None, :, None, None]
            y += xpad[:, :, i : i + sh * oh : sh, j : j + sw * ow : sw] * tap
    return y


def depthwise_backward(xpad, kernel, gy, sh, sw, pt, pl, h, w):
    """Gradients w.r.t. the unpadded input and the per-channel kernel."""
    b, c, hp, wp = xpad.shape
    kh, kw = kernel.shape[2], kernel.shape[3]
    oh, ow = gy.shape[2], gy.shape[3]
    gxp = np.zeros((b, c, hp, wp), dtype=xpad.dtype)
    gk = np.zeros_like(kernel)
    for i in range(kh):
        for j in range(kw):
            window = xpad[:, :, i : i + sh * oh : sh, j : j + sw * ow : sw]
            gxp[:, :, i : i + sh * oh : sh, j : j + sw * ow : sw] += (
                gy * kernel[:, 0, i, j][None, :, None, None]
            )
            gk[:, 0, i, j] = (gy * window).sum(axis=(0, 2, 3), dtype=np.float64)
    return np.ascontiguousarray(gxp[:, :, pt : pt + h, pl : pl + w]), gk


def bn_train_forward(x, gamma, beta, eps):
    """Train-mode batch norm; returns (y, xhat, inv_std, mean64, var64)."""
    mean = x.mean(axis=(0, 2, 3), dtype=np.float64)
    var = np.mean(x * x, axis=(0, 2, 3), dtype=np.float64) - mean * mean
    np.maximum(var, 0.0, out=var)
    inv_std = (1.0 / np.sqrt(var + eps)).astype(x.dtype)
    xhat = (x - mean.astype(x.dtype)[None, :, None, None]) * inv_std[None, :, None, None]
    y = gamma[None, :, None, None] * xhat + beta[None, :, None, None]
    return y, xhat, inv_std, mean, var


def bn_train_backward(xhat, gamma, inv_std, gy):
    """Backward through train-mode batch norm: (gx, ggamma, gbeta)."""
    m = gy.shape[0] * gy.shape[2] * gy.shape[3]
    sg = gy.sum(axis=(0, 2, 3), dtype=np.float64)
    sgx = (gy * xhat).sum(axis=(0, 2, 3), dtype=np.float64)
    gbeta = sg.astype(gy.dtype)
    ggamma = sgx.astype(gy.dtype)
    mg = (sg / m).astype(gy.dtype)[None, :, None, None]
    mgx = (sgx / m).astype(gy.dtype)[None, :, None, None]
    scale = (inv_std * gamma)[None, :, None, None]
    gx = scale * (gy - mg - xhat * mgx)
    return gx, ggamma, gbeta


def relu_backward(x, gy):
    return np.where(x > 0, gy, 0).astype(gy.dtype)


def relu6_backward(x, gy):
    return np.where((x > 0) & (x < 6), gy, 0).astype(gy.dtype)


def rng_fill(state, out):
    """Fill ``out`` with xoshiro256** doubles, advancing ``state`` in place.

    ``state`` is a uint64[4] array; the recurrence matches ``seatnet.rng``
    bit for bit.
    """
    s0, s1, s2, s3 = (int(v) for v in state)
    n = out.shape[0]
    for idx in range(n):
        result = ((((s1 * 5) & _MASK) << 7 | ((s1 * 5) & _MASK) >> 57) * 9) & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _MASK
        out[idx] = (result >> 11) * 2.0**-53
    state[0] = np.uint64(s0)
    state[1] = np.uint64(s1)
    state[2] = np.uint64(s2)
    state[3] = np.uint64(s3)
