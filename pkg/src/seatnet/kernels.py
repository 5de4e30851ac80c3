"""Neural-network kernels as pure functions over numpy arrays.

Layout conventions: activations are (batch, channels, height, width) in
row-major order, convolution kernels are (out_ch, in_ch, kh, kw), depthwise
kernels (channels, 1, kh, kw), dense weights (out_features, in_features).
Convolution is cross-correlation (no kernel flip). "same" padding adds
kernel-1 pixels total per axis so stride 1 preserves the spatial size; the
odd extra pixel of an even kernel goes bottom/right.

Production tensors are float32. Every kernel is dtype-polymorphic (float64
flows through untouched) so gradient checks can run the same code in double
precision. Reductions accumulate in float64 regardless of storage dtype.

All functions are pure (except the documented in-place running-stat update in
train-mode batch_norm) and safe to call concurrently on shared inputs.
"""

import numpy as np

from seatnet import backend
from seatnet.errors import ConfigError, DataError, ShapeError

BCE_CLAMP = 1e-7


def resolve_padding(padding, kh, kw):
    """Map a padding mode to explicit (top, bottom, left, right) amounts."""
    if padding == "valid":
        return 0, 0, 0, 0
    if padding == "same":
        pt = (kh - 1) // 2
        pl = (kw - 1) // 2
        return pt, (kh - 1) - pt, pl, (kw - 1) - pl
    raise ConfigError(f"unknown padding mode {padding!r} (expected 'valid' or 'same')")


def conv_output_hw(h, w, kh, kw, stride, padding):
    pt, pb, pl, pr = resolve_padding(padding, kh, kw)
    oh = (h + pt + pb - kh) // stride + 1
    ow = (w + pl + pr - kw) // stride + 1
    return oh, ow


def _pad(x, pt, pb, pl, pr):
    if pt == pb == pl == pr == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)))


def _contig(x):
    return np.ascontiguousarray(x)


# ---------------------------------------------------------------------------
# conv2d


def conv2d_with_cache(x, kernel, bias=None, stride=1, padding="valid"):
    """Forward convolution returning (y, cols) for reuse in backward."""
    if x.ndim != 4:
        raise ShapeError("conv2d", f"input must be BCHW, got rank {x.ndim}")
    if kernel.ndim != 4:
        raise ShapeError("conv2d", f"kernel must be OIKhKw, got rank {kernel.ndim}")
    b, cin, h, w = x.shape
    o, ci, kh, kw = kernel.shape
    if cin != ci:
        raise ShapeError(
            "conv2d", f"input channels {cin} != kernel input channels {ci}"
        )
    if bias is not None and bias.shape != (o,):
        raise ShapeError(
            "conv2d", f"bias length {bias.shape} != output channels {o}"
        )
    if stride < 1:
        raise ConfigError(f"stride must be >= 1, got {stride}")
    pt, pb, pl, pr = resolve_padding(padding, kh, kw)
    oh = (h + pt + pb - kh) // stride + 1
    ow = (w + pl + pr - kw) // stride + 1
    if oh < 1 or ow < 1:
        raise ShapeError(
            "conv2d",
            f"kernel {kh}x{kw} larger than padded input {h + pt + pb}x{w + pl + pr}",
        )
    xp = _pad(x, pt, pb, pl, pr)
    cols = backend.im2col(_contig(xp), kh, kw, stride, stride, oh, ow)
    wmat = kernel.reshape(o, ci * kh * kw)
    y = np.matmul(wmat[None], cols)
    if bias is not None:
        y = y + bias[None, :, None]
    return y.reshape(b, o, oh, ow), cols


def conv2d(x, kernel, bias=None, stride=1, padding="valid"):
    y, _ = conv2d_with_cache(x, kernel, bias, stride, padding)
    return y


def conv2d_backward(x_shape, cols, kernel, gy, stride, padding):
    """Gradients (gx, gkernel, gbias) of conv2d from the cached patch matrix."""
    b, cin, h, w = x_shape
    o, ci, kh, kw = kernel.shape
    pt, _, pl, _ = resolve_padding(padding, kh, kw)
    oh, ow = gy.shape[2], gy.shape[3]
    gmat = _contig(gy).reshape(b, o, oh * ow)
    wmat = kernel.reshape(o, ci * kh * kw)
    gw = np.matmul(gmat, cols.transpose(0, 2, 1)).sum(axis=0).reshape(kernel.shape)
    gcols = np.matmul(wmat.T[None], gmat)
    gx = backend.col2im(
        _contig(gcols), b, cin, h, w, kh, kw, stride, stride, pt, pl, oh, ow
    )
    gb = gy.sum(axis=(0, 2, 3), dtype=np.float64).astype(gy.dtype)
    return gx, gw, gb


# ---------------------------------------------------------------------------
# depthwise conv2d


def depthwise_conv2d_with_cache(x, kernel, stride=1, padding="valid"):
    if x.ndim != 4 or kernel.ndim != 4:
        raise ShapeError("depthwise_conv2d", "input must be BCHW and kernel C1KhKw")
    b, cin, h, w = x.shape
    ck, one, kh, kw = kernel.shape
    if ck != cin:
        raise ShapeError(
            "depthwise_conv2d", f"kernel channels {ck} != input channels {cin}"
        )
    if one != 1:
        raise ShapeError("depthwise_conv2d", f"kernel multiplier {one} != 1")
    if stride < 1:
        raise ConfigError(f"stride must be >= 1, got {stride}")
    pt, pb, pl, pr = resolve_padding(padding, kh, kw)
    oh = (h + pt + pb - kh) // stride + 1
    ow = (w + pl + pr - kw) // stride + 1
    if oh < 1 or ow < 1:
        raise ShapeError(
            "depthwise_conv2d",
            f"kernel {kh}x{kw} larger than padded input {h + pt + pb}x{w + pl + pr}",
        )
    xp = _contig(_pad(x, pt, pb, pl, pr))
    y = backend.depthwise_forward(xp, _contig(kernel), stride, stride, oh, ow)
    return y, xp


def depthwise_conv2d(x, kernel, stride=1, padding="valid"):
    y, _ = depthwise_conv2d_with_cache(x, kernel, stride, padding)
    return y


def depthwise_conv2d_backward(x_shape, xp, kernel, gy, stride, padding):
    _, _, h, w = x_shape
    kh, kw = kernel.shape[2], kernel.shape[3]
    pt, _, pl, _ = resolve_padding(padding, kh, kw)
    return backend.depthwise_backward(
        xp, _contig(kernel), _contig(gy), stride, stride, pt, pl, h, w
    )


# ---------------------------------------------------------------------------
# batch normalization


def _check_bn_args(x, gamma, beta, epsilon):
    if x.ndim != 4:
        raise ShapeError("batch_norm", f"input must be BCHW, got rank {x.ndim}")
    c = x.shape[1]
    for name, arr in (("gamma", gamma), ("beta", beta)):
        if arr.shape != (c,):
            raise ShapeError(
                "batch_norm", f"{name} length {arr.shape} != channel count {c}"
            )
    if epsilon <= 0:
        raise ConfigError(f"batch_norm epsilon must be > 0, got {epsilon}")


def batch_norm_train(x, gamma, beta, epsilon):
    """Normalize with batch statistics; returns (y, xhat, inv_std, mean, var).

    mean/var are the per-channel batch statistics (population variance), in
    float64, for the caller's running-stat update.
    """
    _check_bn_args(x, gamma, beta, epsilon)
    return backend.bn_train_forward(
        _contig(x), _contig(gamma), _contig(beta), float(epsilon)
    )


def batch_norm_update_running(running_mean, running_var, mean, var, stat_momentum):
    """In-place running-stat update: running <- m*running + (1-m)*batch."""
    if not 0.0 <= stat_momentum < 1.0:
        raise ConfigError(f"stat_momentum must be in [0, 1), got {stat_momentum}")
    running_mean[:] = (
        stat_momentum * running_mean.astype(np.float64) + (1.0 - stat_momentum) * mean
    ).astype(running_mean.dtype)
    running_var[:] = (
        stat_momentum * running_var.astype(np.float64) + (1.0 - stat_momentum) * var
    ).astype(running_var.dtype)


def batch_norm_infer(x, gamma, beta, running_mean, running_var, epsilon):
    _check_bn_args(x, gamma, beta, epsilon)
    scale = gamma / np.sqrt(running_var + np.asarray(epsilon, dtype=x.dtype))
    shift = beta - running_mean * scale
    return x * scale[None, :, None, None] + shift[None, :, None, None]


def batch_norm(
    x,
    gamma,
    beta,
    running_mean,
    running_var,
    mode,
    epsilon=1e-3,
    stat_momentum=0.99,
):
    """Spec-level entry point; train mode updates running stats in place."""
    if mode == "train":
        y, _, _, mean, var = batch_norm_train(x, gamma, beta, epsilon)
        batch_norm_update_running(running_mean, running_var, mean, var, stat_momentum)
        return y
    if mode == "infer":
        return batch_norm_infer(x, gamma, beta, running_mean, running_var, epsilon)
    raise ConfigError(f"unknown batch_norm mode {mode!r}")


def batch_norm_backward(xhat, inv_std, gamma, gy):
    """Gradients (gx, ggamma, gbeta) through train-mode normalization."""
    return backend.bn_train_backward(
        _contig(xhat), _contig(gamma), _contig(inv_std), _contig(gy)
    )


# ---------------------------------------------------------------------------
# activations, dropout, pooling


def relu(x):
    return np.maximum(x, 0)


def relu_backward(x, gy):
    # subgradient 0 at x == 0
    if x.ndim == 4:
        return backend.relu_backward(_contig(x), _contig(gy))
    return np.where(x > 0, gy, 0).astype(gy.dtype)


def relu6(x):
    return np.clip(x, 0, 6)


def relu6_backward(x, gy):
    # subgradient 0 at both clamp points
    if x.ndim == 4:
        return backend.relu6_backward(_contig(x), _contig(gy))
    return np.where((x > 0) & (x < 6), gy, 0).astype(gy.dtype)


def dropout_mask(shape, rate, rng):
    """Scaled inverted-dropout mask; element i survives iff draw i >= rate."""
    u = rng.uniform(int(np.prod(shape)))
    return (u >= rate).reshape(shape)


def dropout(x, rate, mode, rng=None):
    """Inverted dropout: infer mode is the identity, train mode zeroes each
    element with probability ``rate`` and scales survivors by 1/(1-rate)."""
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
    if mode == "infer":
        return x
    if mode != "train":
        raise ConfigError(f"unknown dropout mode {mode!r}")
    if rate == 0.0:
        return x
    if rng is None:
        raise ConfigError("train-mode dropout requires an rng")
    mask = dropout_mask(x.shape, rate, rng)
    scale = np.asarray(1.0 / (1.0 - rate), dtype=x.dtype)
    return x * (mask.astype(x.dtype) * scale)


def global_max_pool_with_cache(x):
    if x.ndim != 4:
        raise ShapeError("global_max_pool", f"input must be BCHW, got rank {x.ndim}")
    b, c, h, w = x.shape
    flat = x.reshape(b, c, h * w)
    idx = np.argmax(flat, axis=2)  # first maximum in row-major order
    y = np.take_along_axis(flat, idx[:, :, None], axis=2)[:, :, 0]
    return y, idx


def global_max_pool(x):
    y, _ = global_max_pool_with_cache(x)
    return y


def global_max_pool_backward(x_shape, idx, gy):
    b, c, h, w = x_shape
    g = np.zeros((b, c, h * w), dtype=gy.dtype)
    np.put_along_axis(g, idx[:, :, None], gy[:, :, None], axis=2)
    return g.reshape(b, c, h, w)


# ---------------------------------------------------------------------------
# dense, sigmoid, loss


def dense(x, weights, bias):
    if x.ndim != 2:
        raise ShapeError("dense", f"input must be (batch, features), got rank {x.ndim}")
    fout, fin = weights.shape
    if x.shape[1] != fin:
        raise ShapeError(
            "dense", f"input features {x.shape[1]} != weight input features {fin}"
        )
    if bias.shape != (fout,):
        raise ShapeError("dense", f"bias length {bias.shape} != output features {fout}")
    return x @ weights.T + bias


def dense_backward(x, weights, gy):
    gx = gy @ weights
    gw = gy.T @ x
    gb = gy.sum(axis=0, dtype=np.float64).astype(gy.dtype)
    return gx, gw, gb


def sigmoid(x):
    """Numerically stable logistic; outputs clamped strictly inside (0, 1)."""
    x = np.asarray(x)
    z = np.exp(-np.abs(x))
    y = np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    tiny = np.finfo(y.dtype).tiny
    top = np.nextafter(y.dtype.type(1.0), y.dtype.type(0.0))
    return np.clip(y, tiny, top)


def sigmoid_backward(y, gy):
    return gy * y * (1.0 - y)


def _check_labels(label):
    if not np.all((label == 0) | (label == 1)):
        bad = label[(label != 0) & (label != 1)]
        raise DataError(f"labels must be 0 or 1, got {bad[:4]!r}")


def bce_loss(prob, label):
    """Mean binary cross-entropy with probabilities clamped to
    [1e-7, 1 - 1e-7] before the logarithm. Returns a python float."""
    prob = np.asarray(prob)
    label = np.asarray(label)
    if prob.shape != label.shape:
        raise ShapeError(
            "bce_loss", f"prob shape {prob.shape} != label shape {label.shape}"
        )
    _check_labels(label)
    p = np.clip(prob.astype(np.float64), BCE_CLAMP, 1.0 - BCE_CLAMP)
    y = label.astype(np.float64)
    losses = -(y * np.log(p) + (1.0 - y) * np.log1p(-p))
    return float(losses.mean())


def bce_loss_backward(prob, label, sample_weight=None):
    """d(mean BCE)/d(prob); zero where the clamp is active."""
    p = np.clip(prob.astype(np.float64), BCE_CLAMP, 1.0 - BCE_CLAMP)
    y = label.astype(np.float64)
    g = (p - y) / (p * (1.0 - p)) / prob.size
    if sample_weight is not None:
        g = g * sample_weight
    inside = (prob >= BCE_CLAMP) & (prob <= 1.0 - BCE_CLAMP)
    return np.where(inside, g, 0.0).astype(prob.dtype)
