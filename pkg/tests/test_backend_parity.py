"""The pure-numpy fallback and the Cython core must agree on every kernel."""

import numpy as np
import pytest

from seatnet.backend import pure

_core = pytest.importorskip(
    "seatnet.backend._core", reason="compiled extension not built"
)


def contig(a):
    return np.ascontiguousarray(a)


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
@pytest.mark.parametrize("case", range(12))
def test_conv_pipeline_parity(case, dtype, rand):
    rs = np.random.RandomState(1000 + case)
    b, c = rs.randint(1, 4), rs.randint(1, 5)
    h, w = rs.randint(4, 10), rs.randint(4, 10)
    kh, kw = rs.randint(1, 4), rs.randint(1, 4)
    sh = sw = rs.randint(1, 3)
    pt, pl = rs.randint(0, kh), rs.randint(0, kw)
    x = contig(rs.randn(b, c, h + 2 * pt, w + 2 * pl).astype(dtype))
    oh = (x.shape[2] - kh) // sh + 1
    ow = (x.shape[3] - kw) // sw + 1
    if oh < 1 or ow < 1:
        pytest.skip("degenerate geometry")
    atol = 1e-6 if dtype is np.float32 else 1e-12

    cols_p = pure.im2col(x, kh, kw, sh, sw, oh, ow)
    cols_c = _core.im2col(x, kh, kw, sh, sw, oh, ow)
    assert np.array_equal(cols_p, cols_c)

    gx_p = pure.col2im(cols_p, b, c, h, w, kh, kw, sh, sw, pt, pl, oh, ow)
    gx_c = _core.col2im(cols_c, b, c, h, w, kh, kw, sh, sw, pt, pl, oh, ow)
    assert np.allclose(gx_p, gx_c, atol=atol)

    k = contig(rs.randn(c, 1, kh, kw).astype(dtype))
    y_p = pure.depthwise_forward(x, k, sh, sw, oh, ow)
    y_c = _core.depthwise_forward(x, k, sh, sw, oh, ow)
    assert np.allclose(y_p, y_c, atol=atol)

    gy = contig(rs.randn(b, c, oh, ow).astype(dtype))
    dx_p, dk_p = pure.depthwise_backward(x, k, gy, sh, sw, pt, pl, h, w)
    dx_c, dk_c = _core.depthwise_backward(x, k, gy, sh, sw, pt, pl, h, w)
    assert np.allclose(dx_p, dx_c, atol=atol)
    assert np.allclose(dk_p, dk_c, atol=atol * 100)


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_bn_and_relu_parity(dtype, rand):
    rs = np.random.RandomState(7)
    x = contig(rs.randn(3, 5, 6, 7).astype(dtype) * 2)
    gy = contig(rs.randn(3, 5, 6, 7).astype(dtype))
    gamma = contig(rs.uniform(0.5, 1.5, 5).astype(dtype))
    beta = contig(rs.randn(5).astype(dtype))
    atol = 2e-6 if dtype is np.float32 else 1e-12

    out_p = pure.bn_train_forward(x, gamma, beta, 1e-3)
    out_c = _core.bn_train_forward(x, gamma, beta, 1e-3)
    for a, b in zip(out_p, out_c):
        assert np.allclose(a, b, atol=atol)

    back_p = pure.bn_train_backward(out_p[1], gamma, out_p[2], gy)
    back_c = _core.bn_train_backward(out_c[1], gamma, out_c[2], gy)
    for a, b in zip(back_p, back_c):
        assert np.allclose(a, b, atol=atol * 20)

    assert np.array_equal(pure.relu_backward(x, gy), _core.relu_backward(x, gy))
    assert np.array_equal(pure.relu6_backward(x, gy), _core.relu6_backward(x, gy))


def test_rng_streams_bit_identical():
    state_p = np.array([11, 22, 33, 44], dtype=np.uint64)
    state_c = state_p.copy()
    out_p = np.empty(513)
    out_c = np.empty(513)
    pure.rng_fill(state_p, out_p)
    _core.rng_fill(state_c, out_c)
    assert np.array_equal(out_p, out_c)
    assert np.array_equal(state_p, state_c)
