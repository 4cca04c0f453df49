"""
Adam with bias correction and an optional linear learning-rate warmup.

The state is a value: :func:`adam_step` returns new parameters and a new state and leaves its
arguments untouched.
"""
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import InputError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdamState:
    """
    :ivar m: First moments by parameter name.
    :ivar v: Second moments by parameter name.
    :ivar step: Number of updates applied so far.
    :ivar warmup_steps: Updates over which the learning rate ramps linearly up to `lr`, 0 disables warmup.
    """
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    warmup_steps: int = 0

    def learning_rate(self, step):
        if self.warmup_steps > 0:
            return self.lr * min(1.0, step / self.warmup_steps)
        return self.lr


def init_adam(params, names=None, **hyper):
    """Zero moments for every named parameter.

    :param params: Parameter tensors by name.
    :param names: The parameters to optimize, defaults to all of them.
    :param hyper: Any of lr, beta1, beta2, eps, warmup_steps.
    :return: :class:`AdamState`
    """
    if names is None:
        names = list(params)

    zeros = {name: np.zeros_like(params[name], dtype=np.float64) for name in names}
    return AdamState(m=dict(zeros), v=dict(zeros), **hyper)


def adam_step(params, grads, state):
    """Apply one bias-corrected Adam update.

    Parameters without a gradient (running statistics) are carried over unchanged.

    :param params: Parameter tensors by name.
    :param grads: Gradients by name, a subset of `params`.
    :param state: The optimizer state.
    :type state: AdamState
    :return: (new params, new state)
    """
    step = state.step + 1
    lr = state.learning_rate(step)
    correction1 = 1.0 - state.beta1 ** step
    correction2 = 1.0 - state.beta2 ** step

    new_params = dict(params)
    new_m = dict(state.m)
    new_v = dict(state.v)

    for name, grad in grads.items():
        value = params[name]
        if np.shape(grad) != np.shape(value):
            raise InputError(f"Gradient for {name!r} has shape {np.shape(grad)}, parameter has {np.shape(value)}.")

        m = state.beta1 * state.m.get(name, 0.0) + (1.0 - state.beta1) * grad
        v = state.beta2 * state.v.get(name, 0.0) + (1.0 - state.beta2) * grad * grad
        new_m[name] = m
        new_v[name] = v
        new_params[name] = value - lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)

    return new_params, replace(state, m=new_m, v=new_v, step=step)
