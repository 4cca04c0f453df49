"""
Central finite differences, the oracle every backward rule is checked against.
"""
import logging

import numpy as np

from ..enums import Mode
from ..errors import InputError, NumericError

logger = logging.getLogger(__name__)


def finite_diff_gradient(function, point, h=1e-5):
    """Estimate the gradient of a scalar function by central differences.

    :param function: Callable taking an array shaped like `point` and returning a scalar.
    :param point: Where to differentiate.
    :param h: Step, must be positive.
    :return: An array shaped like `point`.
    """
    if h <= 0:
        raise InputError(f"Finite-difference step must be positive, got {h}.")

    point = np.array(point, dtype=np.float64)
    flat = point.reshape(-1)
    grad = np.zeros_like(flat)

    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + h
        upper = float(function(point))
        flat[i] = original - h
        lower = float(function(point))
        flat[i] = original

        if not (np.isfinite(upper) and np.isfinite(lower)):
            raise NumericError(f"coordinate {i}", "non-finite function value")

        grad[i] = (upper - lower) / (2.0 * h)

    return grad.reshape(point.shape)


def relative_error(analytic, numeric, floor=1e-6):
    """Largest elementwise |a - n| / max(|a|, |n|, floor)."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / scale)) if analytic.size else 0.0


def check_graph_gradients(graph, inputs, params, loss, h=1e-5, mode=None, names=None):
    """Compare :meth:`Graph.backward` against finite differences on every trainable parameter.

    The graph must be deterministic in the chosen mode (no active dropout).

    :param loss: Name of the scalar loss node or output.
    :return: {param name: relative error}
    """
    mode = Mode.EVAL if mode is None else mode
    trace = graph.evaluate(inputs, params, mode)
    analytic = graph.backward(trace, loss)

    errors = {}
    for name in names or graph.trainable:
        def objective(value, name=name):
            return graph.evaluate(inputs, {**params, name: value}, mode)[loss].sum()

        numeric = finite_diff_gradient(objective, params[name], h)
        errors[name] = relative_error(analytic[name], numeric)
        logger.debug(f"Gradient check {name}: relative error {errors[name]:.3e}")

    return errors
