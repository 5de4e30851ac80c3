"""Reverse-mode automatic differentiation over the kernel layer.

A ``Graph`` is an append-only tape: every operation adds one node holding the
op tag, the input node ids, and whatever activations its vector-Jacobian
product needs. Node inputs always reference earlier nodes, so the tape order
is already topological and ``backward`` is a single reverse sweep that visits
each node exactly once.

Graph construction and backward are single-threaded per training step; the
kernels a node calls are pure and may parallelize internally.
"""

import numpy as np

from seatnet import kernels
from seatnet.errors import ShapeError

_NO_GRAD = (None,)


class Var:
    """Handle to one node's value on a graph."""

    __slots__ = ("id", "value")

    def __init__(self, node_id, value):
        self.id = node_id
        self.value = value


class _Node:
    __slots__ = ("op", "inputs", "vjp")

    def __init__(self, op, inputs, vjp):
        self.op = op
        self.inputs = inputs
        self.vjp = vjp


class Graph:
    """Computation tape for one forward/backward pass."""

    def __init__(self):
        self._nodes = []

    def __len__(self):
        return len(self._nodes)

    def _emit(self, op, inputs, value, vjp):
        node_id = len(self._nodes)
        self._nodes.append(_Node(op, tuple(v.id for v in inputs), vjp))
        return Var(node_id, value)

    def leaf(self, value, name=None):
        """Register an input tensor (parameter or constant) as a graph leaf."""
        return self._emit(name or "leaf", (), value, None)

    # -- operations ---------------------------------------------------------

    def conv2d(self, x, kernel, bias=None, stride=1, padding="valid"):
        y, cols = kernels.conv2d_with_cache(
            x.value, kernel.value, None if bias is None else bias.value, stride, padding
        )
        x_shape, k_value = x.value.shape, kernel.value

        def vjp(gy):
            gx, gw, gb = kernels.conv2d_backward(
                x_shape, cols, k_value, gy, stride, padding
            )
            return (gx, gw) if bias is None else (gx, gw, gb)

        inputs = (x, kernel) if bias is None else (x, kernel, bias)
        return self._emit("conv2d", inputs, y, vjp)

    def depthwise_conv2d(self, x, kernel, stride=1, padding="valid"):
        y, xp = kernels.depthwise_conv2d_with_cache(x.value, kernel.value, stride, padding)
        x_shape, k_value = x.value.shape, kernel.value

        def vjp(gy):
            return kernels.depthwise_conv2d_backward(
                x_shape, xp, k_value, gy, stride, padding
            )

        return self._emit("depthwise_conv2d", (x, kernel), y, vjp)

    def batch_norm_train(
        self, x, gamma, beta, running_mean, running_var, epsilon, stat_momentum
    ):
        """Train-mode batch norm; updates the running stats arrays in place."""
        y, xhat, inv_std, mean, var = kernels.batch_norm_train(
            x.value, gamma.value, beta.value, epsilon
        )
        kernels.batch_norm_update_running(
            running_mean, running_var, mean, var, stat_momentum
        )
        g_value = gamma.value

        def vjp(gy):
            return kernels.batch_norm_backward(xhat, inv_std, g_value, gy)

        return self._emit("batch_norm", (x, gamma, beta), y, vjp)

    def relu(self, x):
        x_value = x.value
        return self._emit(
            "relu", (x,), kernels.relu(x_value), lambda gy: (kernels.relu_backward(x_value, gy),)
        )

    def relu6(self, x):
        x_value = x.value
        return self._emit(
            "relu6", (x,), kernels.relu6(x_value), lambda gy: (kernels.relu6_backward(x_value, gy),)
        )

    def dropout(self, x, rate, rng):
        if rate == 0.0:
            return x
        mask = kernels.dropout_mask(x.value.shape, rate, rng)
        scaled = (mask.astype(x.value.dtype)
                  * np.asarray(1.0 / (1.0 - rate), dtype=x.value.dtype))
        return self._emit(
            "dropout", (x,), x.value * scaled, lambda gy: (gy * scaled,)
        )

    def global_max_pool(self, x):
        y, idx = kernels.global_max_pool_with_cache(x.value)
        x_shape = x.value.shape
        return self._emit(
            "global_max_pool",
            (x,),
            y,
            lambda gy: (kernels.global_max_pool_backward(x_shape, idx, gy),),
        )

    def dense(self, x, weights, bias):
        y = kernels.dense(x.value, weights.value, bias.value)
        x_value, w_value = x.value, weights.value

        def vjp(gy):
            return kernels.dense_backward(x_value, w_value, gy)

        return self._emit("dense", (x, weights, bias), y, vjp)

    def sigmoid(self, x):
        y = kernels.sigmoid(x.value)
        return self._emit("sigmoid", (x,), y, lambda gy: (kernels.sigmoid_backward(y, gy),))

    def add(self, a, b):
        if a.value.shape != b.value.shape:
            raise ShapeError("add", f"shapes {a.value.shape} and {b.value.shape} differ")
        return self._emit("add", (a, b), a.value + b.value, lambda gy: (gy, gy))

    def reshape(self, x, shape):
        old = x.value.shape
        return self._emit(
            "reshape", (x,), x.value.reshape(shape), lambda gy: (gy.reshape(old),)
        )

    def bce_loss(self, prob, label, pos_weight=1.0):
        """Scalar mean BCE node against constant labels."""
        value = kernels.bce_loss(prob.value, label)
        weight = None
        if pos_weight != 1.0:
            weight = np.where(np.asarray(label) == 1, pos_weight, 1.0)
            losses_w = weight * _elementwise_bce(prob.value, label)
            value = float(losses_w.mean())
        p_value = prob.value

        def vjp(gy):
            return (gy * kernels.bce_loss_backward(p_value, label, weight),)

        return self._emit("bce_loss", (prob,), value, vjp)

    def weighted_sum(self, x, coeffs):
        """Scalar sum(x * coeffs) against constant coeffs (test utility)."""
        value = float(np.sum(x.value * coeffs, dtype=np.float64))
        return self._emit(
            "weighted_sum", (x,), value, lambda gy: (gy * coeffs.astype(x.value.dtype),)
        )

    # -- backward -----------------------------------------------------------

    def backward(self, loss):
        """Reverse sweep from a scalar loss node.

        Returns {node_id: gradient} for every node on a path to the loss.
        Leaves without a path simply do not appear (callers treat missing as
        exactly zero).
        """
        if np.ndim(loss.value) != 0:
            raise ShapeError(
                "backward", f"loss must be scalar, got shape {np.shape(loss.value)}"
            )
        grads = {loss.id: 1.0}
        for node_id in range(len(self._nodes) - 1, -1, -1):
            gy = grads.get(node_id)
            if gy is None:
                continue
            node = self._nodes[node_id]
            if node.vjp is None:
                continue
            for input_id, g in zip(node.inputs, node.vjp(gy)):
                if g is None:
                    continue
                acc = grads.get(input_id)
                grads[input_id] = g if acc is None else acc + g
        return grads

    def grad(self, grads, var):
        """Gradient for a leaf from a backward result; zeros if unreached."""
        g = grads.get(var.id)
        if g is None:
            return np.zeros_like(var.value)
        return g

    def op_tags(self):
        """Op tag per node, in tape order (introspection/testing)."""
        return [n.op for n in self._nodes]


def _elementwise_bce(prob, label):
    p = np.clip(np.asarray(prob, dtype=np.float64), kernels.BCE_CLAMP,
                1.0 - kernels.BCE_CLAMP)
    y = np.asarray(label, dtype=np.float64)
    return -(y * np.log(p) + (1.0 - y) * np.log1p(-p))
