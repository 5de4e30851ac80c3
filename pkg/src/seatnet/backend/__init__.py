"""Kernel backend selection.

The compiled Cython core is preferred; the pure-numpy module is a drop-in
fallback. ``SEATNET_BACKEND=pure`` or ``SEATNET_BACKEND=cython`` forces a
choice (the latter raises if the extension is missing). Both backends produce
identical results up to floating-point summation order; the PRNG stream is
bit-identical across the two.
"""

import os

_requested = os.environ.get("SEATNET_BACKEND", "").strip().lower()
if _requested not in ("", "cython", "pure"):
    raise RuntimeError(
        f"SEATNET_BACKEND must be 'cython' or 'pure', got {_requested!r}"
    )

if _requested == "pure":
    from seatnet.backend import pure as _impl

    BACKEND = "pure"
else:
    try:
        from seatnet.backend import _core as _impl

        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise
        from seatnet.backend import pure as _impl

        BACKEND = "pure"

im2col = _impl.im2col
col2im = _impl.col2im
depthwise_forward = _impl.depthwise_forward
depthwise_backward = _impl.depthwise_backward
bn_train_forward = _impl.bn_train_forward
bn_train_backward = _impl.bn_train_backward
relu_backward = _impl.relu_backward
relu6_backward = _impl.relu6_backward
rng_fill = _impl.rng_fill
