"""SGD with classical momentum: v <- mu*v - lr*g; w <- w + v."""

import numpy as np

from seatnet.errors import ConfigError, ShapeError


class OptimizerState:
    """Per-parameter velocity plus the two scalar hyperparameters."""

    def __init__(self, params, learning_rate, momentum):
        # zero is allowed: it degenerates to a no-op update, which the
        # training tests rely on
        if learning_rate < 0:
            raise ConfigError(f"learning_rate must be >= 0, got {learning_rate}")
        if not 0.0 <= momentum < 1.0:
            raise ConfigError(f"momentum must be in [0, 1), got {momentum}")
        self.learning_rate = float(learning_rate)
        self.momentum = float(momentum)
        self.velocity = {name: np.zeros_like(p) for name, p in params.items()}


def sgd_momentum_step(params, grads, state):
    """Apply one update in place to every parameter present in ``grads``."""
    for name, g in grads.items():
        v = state.velocity[name]
        p = params[name]
        if g.shape != p.shape:
            raise ShapeError(
                "sgd_momentum_step",
                f"gradient shape {g.shape} != parameter shape {p.shape} for {name!r}",
            )
        v *= state.momentum
        v -= state.learning_rate * g.astype(v.dtype)
        p += v
