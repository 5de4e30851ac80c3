"""Independent reference implementations the tests check the engine against.

Nothing here imports the optimized kernel paths: the convolution is a literal
seven-loop sum, gradients come from central finite differences, and the PRNG
references are direct transcriptions of the published splitmix64 and
xoshiro256** recurrences using plain Python integers.
"""

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF


def naive_conv2d(x, kernel, bias=None, stride=1, padding="valid"):
    """Cross-correlation with seven explicit loops, float64 accumulation."""
    b, cin, h, w = x.shape
    o, _, kh, kw = kernel.shape
    if padding == "same":
        pt = (kh - 1) // 2
        pl = (kw - 1) // 2
        pb, pr = (kh - 1) - pt, (kw - 1) - pl
    else:
        pt = pb = pl = pr = 0
    xp = np.zeros((b, cin, h + pt + pb, w + pl + pr), dtype=np.float64)
    xp[:, :, pt : pt + h, pl : pl + w] = x
    oh = (h + pt + pb - kh) // stride + 1
    ow = (w + pl + pr - kw) // stride + 1
    y = np.zeros((b, o, oh, ow), dtype=np.float64)
    for bi in range(b):
        for oc in range(o):
            for oi in range(oh):
                for oj in range(ow):
                    acc = 0.0
                    for ic in range(cin):
                        for i in range(kh):
                            for j in range(kw):
                                acc += (
                                    float(xp[bi, ic, oi * stride + i, oj * stride + j])
                                    * float(kernel[oc, ic, i, j])
                                )
                    if bias is not None:
                        acc += float(bias[oc])
                    y[bi, oc, oi, oj] = acc
    return y


def naive_depthwise_conv2d(x, kernel, stride=1, padding="valid"):
    """Per-channel variant of the seven-loop reference."""
    b, c, h, w = x.shape
    _, _, kh, kw = kernel.shape
    if padding == "same":
        pt = (kh - 1) // 2
        pl = (kw - 1) // 2
        pb, pr = (kh - 1) - pt, (kw - 1) - pl
    else:
        pt = pb = pl = pr = 0
    xp = np.zeros((b, c, h + pt + pb, w + pl + pr), dtype=np.float64)
    xp[:, :, pt : pt + h, pl : pl + w] = x
    oh = (h + pt + pb - kh) // stride + 1
    ow = (w + pl + pr - kw) // stride + 1
    y = np.zeros((b, c, oh, ow), dtype=np.float64)
    for bi in range(b):
        for ci in range(c):
            for oi in range(oh):
                for oj in range(ow):
                    acc = 0.0
                    for i in range(kh):
                        for j in range(kw):
                            acc += (
                                float(xp[bi, ci, oi * stride + i, oj * stride + j])
                                * float(kernel[ci, 0, i, j])
                            )
                    y[bi, ci, oi, oj] = acc
    return y


def numerical_grad(f, arr, h=1e-3):
    """Central finite differences of scalar f w.r.t. every element of arr.

    arr must be float64; f is re-evaluated 2*size times.
    """
    grad = np.zeros_like(arr, dtype=np.float64)
    flat = arr.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = f()
        flat[i] = orig - h
        down = f()
        flat[i] = orig
        gflat[i] = (up - down) / (2.0 * h)
    return grad


def max_rel_error(analytic, numeric, floor=1e-4):
    """max |a - n| / max(|a|, |n|, floor) over all elements."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


# -- published PRNG recurrences, transcribed directly -----------------------


class RefSplitMix64:
    def __init__(self, seed):
        self.x = seed & MASK64

    def next(self):
        self.x = (self.x + 0x9E3779B97F4A7C15) & MASK64
        z = self.x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)


class RefXoshiro256StarStar:
    def __init__(self, seed):
        sm = RefSplitMix64(seed)
        self.s = [sm.next() for _ in range(4)]

    @staticmethod
    def _rotl(x, k):
        return ((x << k) | (x >> (64 - k))) & MASK64

    def next(self):
        s = self.s
        result = (self._rotl((s[1] * 5) & MASK64, 7) * 9) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = self._rotl(s[3], 45)
        return result

    def next_double(self):
        return (self.next() >> 11) * 2.0**-53
