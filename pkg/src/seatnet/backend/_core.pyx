# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Cython kernel core: im2col/col2im, depthwise convolution, fused batch-norm
and ReLU passes, PRNG fill.

Contracts mirror seatnet.backend.pure exactly (same arguments, same output,
same tap order); only the inner loops are compiled. Kernels accept float32 or
float64 so the double-precision gradient checks can reuse the compiled path;
channel reductions always accumulate in double.

Loops are serial: on the small shared-CPU targets this package aims at,
thread fan-out costs more than it saves, and numpy's BLAS already threads
the convolution GEMMs.
"""

import numpy as np

cimport cython
cimport numpy as cnp
from libc.math cimport sqrt

ctypedef fused floating:
    float
    double

cnp.import_array()


def im2col(floating[:, :, :, ::1] xpad, Py_ssize_t kh, Py_ssize_t kw,
           Py_ssize_t sh, Py_ssize_t sw, Py_ssize_t oh, Py_ssize_t ow):
    cdef Py_ssize_t b = xpad.shape[0]
    cdef Py_ssize_t c = xpad.shape[1]
    cdef Py_ssize_t bi, ci, i, j, oi, oj, row
    out_np = np.empty((b, c * kh * kw, oh * ow),
                      dtype=np.float32 if floating is float else np.float64)
    cdef floating[:, :, ::1] out = out_np
    with nogil:
        for bi in range(b):
            for ci in range(c):
                for i in range(kh):
                    for j in range(kw):
                        row = (ci * kh + i) * kw + j
                        for oi in range(oh):
                            for oj in range(ow):
                                out[bi, row, oi * ow + oj] = xpad[bi, ci, i + oi * sh, j + oj * sw]
    return out_np


def col2im(floating[:, :, ::1] cols, Py_ssize_t b, Py_ssize_t c,
           Py_ssize_t h, Py_ssize_t w, Py_ssize_t kh, Py_ssize_t kw,
           Py_ssize_t sh, Py_ssize_t sw, Py_ssize_t pt, Py_ssize_t pl,
           Py_ssize_t oh, Py_ssize_t ow):
    """Scatter-add transpose of im2col straight into the unpadded (h, w)
    gradient; taps that land in the padding ring are dropped."""
    cdef Py_ssize_t bi, ci, i, j, oi, oj, row, ii, jj
    gx_np = np.zeros((b, c, h, w),
                     dtype=np.float32 if floating is float else np.float64)
    cdef floating[:, :, :, ::1] gx = gx_np
    with nogil:
        for bi in range(b):
            for ci in range(c):
                for i in range(kh):
                    for j in range(kw):
                        row = (ci * kh + i) * kw + j
                        for oi in range(oh):
                            ii = i + oi * sh - pt
                            if ii < 0 or ii >= h:
                                continue
                            for oj in range(ow):
                                jj = j + oj * sw - pl
                                if 0 <= jj < w:
                                    gx[bi, ci, ii, jj] += cols[bi, row, oi * ow + oj]
    return gx_np


def depthwise_forward(floating[:, :, :, ::1] xpad, floating[:, :, :, ::1] kernel,
                      Py_ssize_t sh, Py_ssize_t sw, Py_ssize_t oh, Py_ssize_t ow):
    cdef Py_ssize_t b = xpad.shape[0]
    cdef Py_ssize_t c = xpad.shape[1]
    cdef Py_ssize_t kh = kernel.shape[2]
    cdef Py_ssize_t kw = kernel.shape[3]
    cdef Py_ssize_t bi, ci, i, j, oi, oj
    cdef floating acc
    y_np = np.empty((b, c, oh, ow),
                    dtype=np.float32 if floating is float else np.float64)
    cdef floating[:, :, :, ::1] y = y_np
    with nogil:
        for bi in range(b):
            for ci in range(c):
                for oi in range(oh):
                    for oj in range(ow):
                        acc = 0
                        for i in range(kh):
                            for j in range(kw):
                                acc = acc + xpad[bi, ci, oi * sh + i, oj * sw + j] * kernel[ci, 0, i, j]
                        y[bi, ci, oi, oj] = acc
    return y_np


def depthwise_backward(floating[:, :, :, ::1] xpad, floating[:, :, :, ::1] kernel,
                       floating[:, :, :, ::1] gy, Py_ssize_t sh, Py_ssize_t sw,
                       Py_ssize_t pt, Py_ssize_t pl, Py_ssize_t h, Py_ssize_t w):
    """Input gradient (unpadded, padding taps dropped) and kernel gradient
    (double accumulation, one channel per thread)."""
    cdef Py_ssize_t b = xpad.shape[0]
    cdef Py_ssize_t c = xpad.shape[1]
    cdef Py_ssize_t kh = kernel.shape[2]
    cdef Py_ssize_t kw = kernel.shape[3]
    cdef Py_ssize_t oh = gy.shape[2]
    cdef Py_ssize_t ow = gy.shape[3]
    cdef Py_ssize_t bi, ci, i, j, oi, oj, ii, jj
    cdef double g
    cdef floating gf
    gx_np = np.zeros((b, c, h, w),
                     dtype=np.float32 if floating is float else np.float64)
    gk_acc_np = np.zeros((c, kh, kw), dtype=np.float64)
    gk_np = np.zeros((c, 1, kh, kw),
                     dtype=np.float32 if floating is float else np.float64)
    cdef floating[:, :, :, ::1] gx = gx_np
    cdef double[:, :, ::1] gk_acc = gk_acc_np
    cdef floating[:, :, :, ::1] gk = gk_np
    with nogil:
        for ci in range(c):
            for bi in range(b):
                for oi in range(oh):
                    for oj in range(ow):
                        g = gy[bi, ci, oi, oj]
                        gf = gy[bi, ci, oi, oj]
                        for i in range(kh):
                            ii = oi * sh + i - pt
                            for j in range(kw):
                                gk_acc[ci, i, j] += g * <double> xpad[bi, ci, oi * sh + i, oj * sw + j]
                                jj = oj * sw + j - pl
                                if 0 <= ii < h and 0 <= jj < w:
                                    gx[bi, ci, ii, jj] += gf * kernel[ci, 0, i, j]
    for ci in range(c):
        for i in range(kh):
            for j in range(kw):
                gk[ci, 0, i, j] = <floating> gk_acc[ci, i, j]
    return gx_np, gk_np


def bn_train_forward(floating[:, :, :, ::1] x, floating[::1] gamma,
                     floating[::1] beta, double eps):
    """Fused train-mode batch norm over (B,H,W) per channel.

    Returns (y, xhat, inv_std, mean64, var64); statistics accumulate in
    double precision, var is the population variance.
    """
    cdef Py_ssize_t b = x.shape[0]
    cdef Py_ssize_t c = x.shape[1]
    cdef Py_ssize_t h = x.shape[2]
    cdef Py_ssize_t w = x.shape[3]
    cdef Py_ssize_t bi, ci, i, j
    cdef double m = <double> (b * h * w)
    cdef double s, s2, v, mu, istd
    cdef floating mu_f, istd_f, ga, be, xh
    dtype = np.float32 if floating is float else np.float64
    y_np = np.empty((b, c, h, w), dtype=dtype)
    xhat_np = np.empty((b, c, h, w), dtype=dtype)
    inv_std_np = np.empty(c, dtype=dtype)
    mean_np = np.empty(c, dtype=np.float64)
    var_np = np.empty(c, dtype=np.float64)
    cdef floating[:, :, :, ::1] y = y_np
    cdef floating[:, :, :, ::1] xhat = xhat_np
    cdef floating[::1] inv_std = inv_std_np
    cdef double[::1] mean = mean_np
    cdef double[::1] var = var_np
    with nogil:
        for ci in range(c):
            s = 0.0
            s2 = 0.0
            for bi in range(b):
                for i in range(h):
                    for j in range(w):
                        s = s + x[bi, ci, i, j]
                        s2 = s2 + <double> x[bi, ci, i, j] * <double> x[bi, ci, i, j]
            mu = s / m
            v = s2 / m - mu * mu
            if v < 0.0:
                v = 0.0
            mean[ci] = mu
            var[ci] = v
            istd = 1.0 / sqrt(v + eps)
            inv_std[ci] = <floating> istd
            mu_f = <floating> mu
            istd_f = <floating> istd
            ga = gamma[ci]
            be = beta[ci]
            for bi in range(b):
                for i in range(h):
                    for j in range(w):
                        xh = (x[bi, ci, i, j] - mu_f) * istd_f
                        xhat[bi, ci, i, j] = xh
                        y[bi, ci, i, j] = ga * xh + be
    return y_np, xhat_np, inv_std_np, mean_np, var_np


def bn_train_backward(floating[:, :, :, ::1] xhat, floating[::1] gamma,
                      floating[::1] inv_std, floating[:, :, :, ::1] gy):
    """Fused backward through train-mode batch norm.

    gx = inv_std * gamma * (gy - mean(gy) - xhat * mean(gy * xhat)) per
    channel; returns (gx, ggamma, gbeta).
    """
    cdef Py_ssize_t b = gy.shape[0]
    cdef Py_ssize_t c = gy.shape[1]
    cdef Py_ssize_t h = gy.shape[2]
    cdef Py_ssize_t w = gy.shape[3]
    cdef Py_ssize_t bi, ci, i, j
    cdef double m = <double> (b * h * w)
    cdef double sg, sgx
    cdef floating mg, mgx, scale
    dtype = np.float32 if floating is float else np.float64
    gx_np = np.empty((b, c, h, w), dtype=dtype)
    ggamma_np = np.empty(c, dtype=dtype)
    gbeta_np = np.empty(c, dtype=dtype)
    cdef floating[:, :, :, ::1] gx = gx_np
    cdef floating[::1] ggamma = ggamma_np
    cdef floating[::1] gbeta = gbeta_np
    with nogil:
        for ci in range(c):
            sg = 0.0
            sgx = 0.0
            for bi in range(b):
                for i in range(h):
                    for j in range(w):
                        sg = sg + gy[bi, ci, i, j]
                        sgx = sgx + <double> gy[bi, ci, i, j] * <double> xhat[bi, ci, i, j]
            gbeta[ci] = <floating> sg
            ggamma[ci] = <floating> sgx
            mg = <floating> (sg / m)
            mgx = <floating> (sgx / m)
            scale = inv_std[ci] * gamma[ci]
            for bi in range(b):
                for i in range(h):
                    for j in range(w):
                        gx[bi, ci, i, j] = scale * (
                            gy[bi, ci, i, j] - mg - xhat[bi, ci, i, j] * mgx
                        )
    return gx_np, ggamma_np, gbeta_np


def relu_backward(floating[:, :, :, ::1] x, floating[:, :, :, ::1] gy):
    cdef Py_ssize_t n0 = x.shape[0], n1 = x.shape[1], n2 = x.shape[2], n3 = x.shape[3]
    cdef Py_ssize_t a, bb, cc, d
    gx_np = np.empty((n0, n1, n2, n3),
                     dtype=np.float32 if floating is float else np.float64)
    cdef floating[:, :, :, ::1] gx = gx_np
    with nogil:
        for a in range(n0):
            for bb in range(n1):
                for cc in range(n2):
                    for d in range(n3):
                        gx[a, bb, cc, d] = gy[a, bb, cc, d] if x[a, bb, cc, d] > 0 else 0
    return gx_np


def relu6_backward(floating[:, :, :, ::1] x, floating[:, :, :, ::1] gy):
    cdef Py_ssize_t n0 = x.shape[0], n1 = x.shape[1], n2 = x.shape[2], n3 = x.shape[3]
    cdef Py_ssize_t a, bb, cc, d
    gx_np = np.empty((n0, n1, n2, n3),
                     dtype=np.float32 if floating is float else np.float64)
    cdef floating[:, :, :, ::1] gx = gx_np
    with nogil:
        for a in range(n0):
            for bb in range(n1):
                for cc in range(n2):
                    for d in range(n3):
                        if 0 < x[a, bb, cc, d] < 6:
                            gx[a, bb, cc, d] = gy[a, bb, cc, d]
                        else:
                            gx[a, bb, cc, d] = 0
    return gx_np


def rng_fill(cnp.uint64_t[::1] state, double[::1] out):
    cdef cnp.uint64_t s0 = state[0]
    cdef cnp.uint64_t s1 = state[1]
    cdef cnp.uint64_t s2 = state[2]
    cdef cnp.uint64_t s3 = state[3]
    cdef cnp.uint64_t result, t, m
    cdef Py_ssize_t idx
    cdef Py_ssize_t n = out.shape[0]
    for idx in range(n):
        m = s1 * <cnp.uint64_t> 5
        result = ((m << 7) | (m >> 57)) * <cnp.uint64_t> 9
        t = s1 << 17
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = (s3 << 45) | (s3 >> 19)
        out[idx] = <double> (result >> 11) * (2.0 ** -53)
    state[0] = s0
    state[1] = s1
    state[2] = s2
    state[3] = s3
