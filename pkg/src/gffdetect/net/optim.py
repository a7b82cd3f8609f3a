"""SGD with Nesterov momentum, lookahead form.

    v <- mu * v - lr * grad(theta + mu * v)
    theta <- theta + v

The caller evaluates the gradient at :meth:`NesterovSGD.lookahead`.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch


def sgd_nesterov_step(params: dict, grads: dict, velocity: dict, lr: float, momentum: float):
    """Return updated ``(params, velocity)``; ``grads`` must be taken at the lookahead point."""
    new_params, new_velocity = {}, {}
    for name in sorted(params):
        p, g = params[name], grads[name]
        v = velocity.get(name)
        if v is None:
            v = np.zeros_like(p)
        if np.shape(g) != np.shape(p) or np.shape(v) != np.shape(p):
            raise ShapeMismatch(f"{name}: param {np.shape(p)}, grad {np.shape(g)}, velocity {np.shape(v)}")
        v = momentum * v - lr * g
        new_velocity[name] = v
        new_params[name] = p + v
    return new_params, new_velocity


class NesterovSGD:
    def __init__(self, lr: float = 0.001, momentum: float = 0.9):
        self.lr = lr
        self.momentum = momentum
        self.velocity: dict = {}

    def lookahead(self, params: dict) -> dict:
        if not self.velocity:
            return params
        return {name: p + self.momentum * self.velocity[name] for name, p in params.items()}

    def step(self, params: dict, grads: dict) -> dict:
        params, self.velocity = sgd_nesterov_step(params, grads, self.velocity, self.lr, self.momentum)
        return params
