"""Image-tensor operations for the preprocessing pipeline.

Images are float32 (channels, height, width) in [0, 1]. Resampling math runs
in float64 and is cast back, so results are platform-stable.
"""

import numpy as np

from seatnet.errors import DataError, ShapeError


def to_grayscale(img):
    """BT.601 luma: 0.299 R + 0.587 G + 0.114 B. (3,H,W) -> (1,H,W)."""
    if img.ndim != 3 or img.shape[0] != 3:
        raise ShapeError(
            "to_grayscale", f"expected 3 channels, got shape {img.shape}"
        )
    w = np.array([0.299, 0.587, 0.114], dtype=np.float64)
    luma = np.tensordot(w, img.astype(np.float64), axes=(0, 0))
    return luma[None].astype(np.float32)


def _axis_samples(n_in, n_out):
    """Half-pixel-center source coordinates with edge clamping."""
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1.0)
    i0 = np.floor(src).astype(np.int64)
    i1 = np.minimum(i0 + 1, n_in - 1)
    frac = src - i0
    return i0, i1, frac


def resize_bilinear(img, out_h, out_w):
    """Bilinear resample of (C, H, W) to (C, out_h, out_w)."""
    c, h, w = img.shape
    if out_h == h and out_w == w:
        return img
    y0, y1, fy = _axis_samples(h, out_h)
    x0, x1, fx = _axis_samples(w, out_w)
    src = img.astype(np.float64)
    top = src[:, y0][:, :, x0] * (1 - fx) + src[:, y0][:, :, x1] * fx
    bot = src[:, y1][:, :, x0] * (1 - fx) + src[:, y1][:, :, x1] * fx
    out = top * (1 - fy)[None, :, None] + bot * fy[None, :, None]
    return out.astype(np.float32)


def rescale_short_side(img, target):
    """Scale so the shorter side equals ``target``, preserving aspect ratio
    (long side rounded to the nearest integer). Identity when already there."""
    if target < 1:
        raise DataError(f"rescale target must be >= 1, got {target}")
    _, h, w = img.shape
    short = min(h, w)
    if short == target:
        return img
    scale = target / short
    if h <= w:
        out_h, out_w = target, int(round(w * scale))
    else:
        out_h, out_w = int(round(h * scale)), target
    return resize_bilinear(img, out_h, out_w)


def crop(img, size, mode="center", rng=None):
    """Square crop. Random mode draws (top, left) uniformly via ``rng``;
    center mode uses floor((side - size) / 2)."""
    _, h, w = img.shape
    if h < size or w < size:
        raise DataError(f"image {h}x{w} smaller than crop size {size}")
    if mode == "center":
        top, left = (h - size) // 2, (w - size) // 2
    elif mode == "random":
        if rng is None:
            raise DataError("random crop requires an rng")
        top = rng.randint(h - size + 1)
        left = rng.randint(w - size + 1)
    else:
        raise DataError(f"unknown crop mode {mode!r}")
    return img[:, top : top + size, left : left + size]


def rotate90(img, k):
    """Rotate a (C, H, W) image by k quarter turns counter-clockwise."""
    return np.rot90(img, k=k % 4, axes=(1, 2))


def replicate_gray(img):
    """(1, H, W) -> (3, H, W) by channel replication."""
    if img.shape[0] == 3:
        return img
    if img.shape[0] != 1:
        raise ShapeError("replicate_gray", f"expected 1 channel, got {img.shape}")
    return np.broadcast_to(img, (3,) + img.shape[1:])
