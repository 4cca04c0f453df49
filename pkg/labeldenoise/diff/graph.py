"""
A static compute graph over float64 numpy arrays with reverse-mode differentiation.

A graph is declared once (inputs, parameters, primitive nodes in topological order) and then evaluated
against a parameter mapping. Evaluation returns a :class:`Trace` holding every intermediate value;
:meth:`Graph.backward` walks the trace in reverse to produce parameter gradients.

>>> graph = Graph()
>>> x = graph.input('x', (None, 3))
>>> h = graph.affine(x, graph.param('W', (3, 2)), graph.param('b', (2,), init='zeros'))
>>> graph.output('y', graph.add_node('relu', [h]))
>>> trace = graph.evaluate({'x': batch}, params, Mode.EVAL)
>>> trace.outputs['y']
"""
import logging

import numpy as np
from scipy.special import expit, logsumexp

from ..enums import Mode
from ..errors import InputError, NumericError

logger = logging.getLogger(__name__)

LEAVES = ('input', 'param', 'const')


def as_tensor(value):
    """Coerce a value to a float64 array, the tensor type used everywhere in the package."""
    return np.asarray(value, dtype=np.float64)


def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)

    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)

    return grad


class Node:
    __slots__ = ('name', 'op', 'inputs', 'attrs')

    def __init__(self, name, op, inputs, attrs):
        self.name = name
        self.op = op
        self.inputs = inputs
        self.attrs = attrs

    def __repr__(self):
        return f"Node({self.name!r}, {self.op}, {self.inputs})"


class ParamSpec:
    """Declaration of a parameter tensor.

    :ivar shape: The tensor shape.
    :ivar init: One of 'fan_in', 'zeros', 'ones' or 'const'.
    :ivar fan_in: Number of inputs feeding each output unit, used by 'fan_in' initialization.
    :ivar value: Fill value for 'const' initialization.
    :ivar trainable: False for running statistics, which the optimizer never touches.
    """

    def __init__(self, shape, init='fan_in', fan_in=None, value=0.0, trainable=True):
        self.shape = tuple(shape)
        self.init = init
        self.fan_in = fan_in if fan_in is not None else (shape[0] if shape else 1)
        self.value = value
        self.trainable = trainable

    def size(self):
        return int(np.prod(self.shape, dtype=np.int64))


class Trace:
    """The result of one forward evaluation.

    :ivar values: Every node value by node name.
    :ivar outputs: Declared graph outputs by alias.
    :ivar buffer_updates: New running statistics computed by train-mode batch-norm nodes.
    """

    def __init__(self, graph, mode):
        self.graph = graph
        self.mode = mode
        self.values = {}
        self.cache = {}
        self.buffer_updates = {}

    @property
    def outputs(self):
        return {alias: self.values[name] for alias, name in self.graph.outputs.items()}

    def __getitem__(self, name):
        return self.values[self.graph.outputs.get(name, name)]


# Forward rules take (values, attrs, ctx) and return the node value, backward rules take
# (grad, values, out, attrs, ctx) and return one gradient (or None) per node input.

def _affine_forward(values, attrs, ctx):
    x, w, b = values
    if x.shape[-1] != w.shape[0]:
        raise InputError(f"affine input width {x.shape[-1]} does not match weight rows {w.shape[0]}")
    return x @ w + b


def _affine_backward(grad, values, out, attrs, ctx):
    x, w, b = values
    flat_x = x.reshape(-1, x.shape[-1])
    flat_g = grad.reshape(-1, grad.shape[-1])
    return [grad @ w.T, flat_x.T @ flat_g, flat_g.sum(axis=0)]


def _matmul_forward(values, attrs, ctx):
    a, b = values
    return np.matmul(a, b)


def _matmul_backward(grad, values, out, attrs, ctx):
    a, b = values
    ga = _unbroadcast(np.matmul(grad, np.swapaxes(b, -1, -2)), a.shape)
    gb = _unbroadcast(np.matmul(np.swapaxes(a, -1, -2), grad), b.shape)
    return [ga, gb]


def _power_forward(values, attrs, ctx):
    u, p = values
    positive = u > 0
    safe = np.where(positive, u, 1.0)
    ctx['positive'] = positive
    ctx['safe'] = safe
    return np.where(positive, safe ** p[0], 0.0)


def _power_backward(grad, values, out, attrs, ctx):
    u, p = values
    positive, safe = ctx['positive'], ctx['safe']
    du = np.where(positive, p[0] * safe ** (p[0] - 1.0), 0.0) * grad
    dp = np.sum(grad * np.where(positive, out * np.log(safe), 0.0))
    return [du, np.array([dp])]


def _softmax_forward(values, attrs, ctx):
    x, = values
    return np.exp(x - logsumexp(x, axis=-1, keepdims=True))


def _softmax_backward(grad, values, out, attrs, ctx):
    return [out * (grad - np.sum(grad * out, axis=-1, keepdims=True))]


def _batchnorm_forward(values, attrs, ctx):
    x, gamma, beta, running_mean, running_var = values
    eps = attrs['eps']

    if x.ndim != 2:
        raise InputError(f"batch-norm expects a 2-D batch, got shape {x.shape}")

    if ctx['mode'] is Mode.TRAIN:
        mean = x.mean(axis=0)
        var = x.var(axis=0)
        momentum = attrs['momentum']
        ctx['updates'] = {
            attrs['running_mean']: momentum * running_mean + (1.0 - momentum) * mean,
            attrs['running_var']: momentum * running_var + (1.0 - momentum) * var,
        }
    else:
        mean, var = running_mean, running_var

    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = (x - mean) * inv_std
    ctx['x_hat'] = x_hat
    ctx['inv_std'] = inv_std
    return gamma * x_hat + beta


def _batchnorm_backward(grad, values, out, attrs, ctx):
    x, gamma, beta, running_mean, running_var = values
    x_hat, inv_std = ctx['x_hat'], ctx['inv_std']
    d_hat = grad * gamma

    if ctx['mode'] is Mode.TRAIN:
        n = x.shape[0]
        dx = inv_std / n * (n * d_hat - d_hat.sum(axis=0) - x_hat * np.sum(d_hat * x_hat, axis=0))
    else:
        dx = d_hat * inv_std

    return [dx, np.sum(grad * x_hat, axis=0), grad.sum(axis=0), None, None]


def _dropout_forward(values, attrs, ctx):
    x, = values
    rate = attrs['rate']
    if ctx['mode'] is Mode.EVAL or rate == 0.0:
        ctx['mask'] = None
        return x

    rng = ctx['rng']
    if rng is None:
        raise InputError("train-mode dropout needs a random generator")

    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    ctx['mask'] = mask
    return x * mask


def _dropout_backward(grad, values, out, attrs, ctx):
    mask = ctx['mask']
    return [grad if mask is None else grad * mask]


def _concat_forward(values, attrs, ctx):
    return np.concatenate(values, axis=attrs['axis'])


def _concat_backward(grad, values, out, attrs, ctx):
    bounds = np.cumsum([v.shape[attrs['axis']] for v in values])[:-1]
    return np.split(grad, bounds, axis=attrs['axis'])


def _reduce_backward(grad, values, attrs, average):
    x, = values
    axis = attrs['axis']
    if axis is None:
        expanded = np.broadcast_to(grad, x.shape)
        count = x.size
    else:
        expanded = np.broadcast_to(np.expand_dims(grad, axis), x.shape)
        count = x.shape[axis]

    if average:
        return [expanded / count]

    return [np.array(expanded)]


def _clamp_backward(grad, values, out, attrs, ctx):
    x, = values
    return [grad * ((x >= attrs['low']) & (x <= attrs['high']))]


FORWARD = {
    'affine': _affine_forward,
    'matmul': _matmul_forward,
    'relu': lambda values, attrs, ctx: np.maximum(values[0], 0.0),
    'tanh': lambda values, attrs, ctx: np.tanh(values[0]),
    'sigmoid': lambda values, attrs, ctx: expit(values[0]),
    'softmax': _softmax_forward,
    'batchnorm': _batchnorm_forward,
    'dropout': _dropout_forward,
    'power': _power_forward,
    'concat': _concat_forward,
    'mean': lambda values, attrs, ctx: values[0].mean(axis=attrs['axis']),
    'sum': lambda values, attrs, ctx: values[0].sum(axis=attrs['axis']),
    'add': lambda values, attrs, ctx: values[0] + values[1],
    'multiply': lambda values, attrs, ctx: values[0] * values[1],
    'log': lambda values, attrs, ctx: np.log(values[0]),
    'exp': lambda values, attrs, ctx: np.exp(values[0]),
    'clamp': lambda values, attrs, ctx: np.clip(values[0], attrs['low'], attrs['high']),
    'flatten': lambda values, attrs, ctx: values[0].reshape(values[0].shape[0], -1),
}

BACKWARD = {
    'affine': _affine_backward,
    'matmul': _matmul_backward,
    'relu': lambda grad, values, out, attrs, ctx: [grad * (values[0] > 0)],
    'tanh': lambda grad, values, out, attrs, ctx: [grad * (1.0 - out * out)],
    'sigmoid': lambda grad, values, out, attrs, ctx: [grad * out * (1.0 - out)],
    'softmax': _softmax_backward,
    'batchnorm': _batchnorm_backward,
    'dropout': _dropout_backward,
    'power': _power_backward,
    'concat': _concat_backward,
    'mean': lambda grad, values, out, attrs, ctx: _reduce_backward(grad, values, attrs, True),
    'sum': lambda grad, values, out, attrs, ctx: _reduce_backward(grad, values, attrs, False),
    'add': lambda grad, values, out, attrs, ctx: [_unbroadcast(grad, values[0].shape),
                                                  _unbroadcast(grad, values[1].shape)],
    'multiply': lambda grad, values, out, attrs, ctx: [_unbroadcast(grad * values[1], values[0].shape),
                                                       _unbroadcast(grad * values[0], values[1].shape)],
    'log': lambda grad, values, out, attrs, ctx: [grad / values[0]],
    'exp': lambda grad, values, out, attrs, ctx: [grad * out],
    'clamp': _clamp_backward,
    'flatten': lambda grad, values, out, attrs, ctx: [grad.reshape(values[0].shape)],
}


class Graph:
    """
    :ivar nodes: Nodes in declaration order, which is also the evaluation order.
    :type nodes: [Node]
    :ivar params: Parameter declarations by name.
    :type params: {str: ParamSpec}
    :ivar outputs: Output aliases mapped to node names.
    :type outputs: {str: str}
    """

    def __init__(self):
        self.nodes = []
        self.index = {}
        self.input_shapes = {}
        self.params = {}
        self.outputs = {}
        self._counter = 0

    def _register(self, name, op, inputs, attrs):
        if name is None:
            name = f"{op}{self._counter}"
            self._counter += 1

        if name in self.index:
            raise InputError(f"Duplicate node name {name!r}.")

        for source in inputs:
            if source not in self.index:
                raise InputError(f"Node {name!r} refers to undeclared node {source!r}.")

        self.index[name] = len(self.nodes)
        self.nodes.append(Node(name, op, list(inputs), attrs))
        return name

    def input(self, name, shape):
        """Declare a graph input.

        :param name: The input name, also the key expected by :meth:`evaluate`.
        :param shape: Expected shape, None marks a free extent (batch, frame count).
        :return: The node name.
        """
        self.input_shapes[name] = tuple(shape)
        return self._register(name, 'input', [], {})

    def param(self, name, shape, init='fan_in', fan_in=None, value=0.0, trainable=True):
        self.params[name] = ParamSpec(shape, init, fan_in, value, trainable)
        return self._register(name, 'param', [], {})

    def const(self, value, name=None):
        return self._register(name, 'const', [], {'value': as_tensor(value)})

    def add_node(self, op, inputs, name=None, **attrs):
        if op not in FORWARD:
            raise InputError(f"Unknown primitive {op!r}.")

        return self._register(name, op, inputs, attrs)

    def output(self, alias, node):
        self.outputs[alias] = node

    def affine(self, x, weight, bias, name=None):
        return self.add_node('affine', [x, weight, bias], name=name)

    def batchnorm(self, x, prefix, width, momentum=0.9, eps=1e-5, name=None):
        """Batch-norm over the leading axis with its four parameter tensors declared under `prefix`."""
        gamma = self.param(f'{prefix}.gamma', (width,), init='ones')
        beta = self.param(f'{prefix}.beta', (width,), init='zeros')
        mean = self.param(f'{prefix}.running_mean', (width,), init='zeros', trainable=False)
        var = self.param(f'{prefix}.running_var', (width,), init='ones', trainable=False)
        return self.add_node('batchnorm', [x, gamma, beta, mean, var], name=name, momentum=momentum, eps=eps,
                             running_mean=mean, running_var=var)

    @property
    def trainable(self):
        return [name for name, spec in self.params.items() if spec.trainable]

    def _check_input(self, name, value):
        expected = self.input_shapes[name]
        if value.ndim != len(expected) or any(e is not None and e != s for e, s in zip(expected, value.shape)):
            raise InputError(f"Input {name!r} has shape {value.shape}, expected {expected}.")

    def evaluate(self, inputs, params, mode=Mode.EVAL, rng=None):
        """Run every node in declaration order.

        :param inputs: Input tensors by name.
        :param params: Parameter tensors by name.
        :param mode: Train or eval mode.
        :type mode: :class:`~labeldenoise.enums.Mode`
        :param rng: A numpy Generator, needed by train-mode dropout.
        :return: :class:`Trace`
        """
        trace = Trace(self, mode)

        for node in self.nodes:
            if node.op == 'input':
                try:
                    value = as_tensor(inputs[node.name])
                except KeyError:
                    raise InputError(f"Missing graph input {node.name!r}.")
                self._check_input(node.name, value)
            elif node.op == 'param':
                try:
                    value = as_tensor(params[node.name])
                except KeyError:
                    raise InputError(f"Missing parameter {node.name!r}.")
                if value.shape != self.params[node.name].shape:
                    raise InputError(f"Parameter {node.name!r} has shape {value.shape}, "
                                     f"expected {self.params[node.name].shape}.")
            elif node.op == 'const':
                value = node.attrs['value']
            else:
                ctx = {'mode': mode, 'rng': rng}
                value = FORWARD[node.op]([trace.values[i] for i in node.inputs], node.attrs, ctx)
                trace.cache[node.name] = ctx
                trace.buffer_updates.update(ctx.get('updates', {}))

            if not np.all(np.isfinite(value)):
                raise NumericError(node.name)

            trace.values[node.name] = value

        return trace

    def backward(self, trace, seeds):
        """Reverse-mode sweep.

        :param trace: A trace produced by :meth:`evaluate` on this graph.
        :param seeds: Either the name of a scalar loss node, or a mapping of node names to upstream
            gradients (used when a loss is computed outside the graph).
        :return: Gradients for every trainable parameter, zeros where the loss does not depend on it.
        """
        if isinstance(seeds, str):
            loss = trace.values[self.outputs.get(seeds, seeds)]
            if loss.size != 1:
                raise InputError(f"Loss node {seeds!r} is not scalar (shape {loss.shape}).")
            seeds = {self.outputs.get(seeds, seeds): np.ones_like(loss)}

        grads = {}
        for name, seed in seeds.items():
            name = self.outputs.get(name, name)
            grads[name] = as_tensor(seed)

        param_grads = {}
        for node in reversed(self.nodes):
            grad = grads.pop(node.name, None)
            if grad is None:
                continue

            if node.op == 'param':
                param_grads[node.name] = grad
                continue
            elif node.op in LEAVES:
                continue

            values = [trace.values[i] for i in node.inputs]
            input_grads = BACKWARD[node.op](grad, values, trace.values[node.name], node.attrs,
                                            trace.cache[node.name])

            for source, source_grad in zip(node.inputs, input_grads):
                if source_grad is None:
                    continue
                if source in grads:
                    grads[source] = grads[source] + source_grad
                else:
                    grads[source] = source_grad

        return {name: param_grads.get(name, np.zeros(self.params[name].shape)) for name in self.trainable}


def evaluate(graph, inputs, params, mode=Mode.EVAL, rng=None):
    """Module-level alias of :meth:`Graph.evaluate`."""
    return graph.evaluate(inputs, params, mode, rng)


def backward(graph, trace, loss):
    """Module-level alias of :meth:`Graph.backward`."""
    return graph.backward(trace, loss)
