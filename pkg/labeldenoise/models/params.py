"""
:class:`ModelParams` ties an architecture config to its parameter tensors; the compute graph is
rebuilt from the config on demand.

>>> params = init_model(ResNetLikeConfig(inner_size=16), seed=0)
>>> predict(params, {'video': video, 'audio': audio}, outputs=('penultimate', 'probabilities'))
"""
import functools
import json
import logging

import numpy as np

from .builder import LOGITS, PENULTIMATE, PROBABILITIES
from .config import config_class
from .framemix import build_framemix
from .resnetlike import build_resnetlike
from .vladbow import build_vladbow
from ..config import canonical, from_dict
from ..diff import Graph
from ..enums import Architecture, Mode
from ..errors import InputError

logger = logging.getLogger(__name__)


def build_head(config):
    """Stacking head: zero-initialized affine map over ``features`` and a sigmoid."""
    graph = Graph()
    features = graph.input('features', (None, config.input_dim))
    weight = graph.param('out.W', (config.input_dim, config.vocabulary_size), init='zeros')
    bias = graph.param('out.b', (config.vocabulary_size,), init='zeros')
    graph.output(PENULTIMATE, features)
    logits = graph.affine(features, weight, bias)
    graph.output(LOGITS, logits)
    graph.output(PROBABILITIES, graph.add_node('sigmoid', [logits]))
    return graph


BUILDERS = {
    Architecture.RESNETLIKE: build_resnetlike,
    Architecture.VLADBOW: build_vladbow,
    Architecture.FRAMEMIX: build_framemix,
    Architecture.HEAD: build_head,
}


@functools.lru_cache(maxsize=64)
def _cached_graph(architecture, text):
    config = from_dict(config_class(architecture), json.loads(text))
    return BUILDERS[architecture](config)


def build_graph(config):
    """The compute graph of a model config; graphs are immutable and shared between equal configs."""
    return _cached_graph(config.architecture, canonical(config))


class ModelParams:
    """
    :ivar config: The architecture config.
    :ivar tensors: Parameter tensors by name, running statistics included.
    :type tensors: {str: numpy.ndarray}
    """
    penultimate = PENULTIMATE

    def __init__(self, config, tensors):
        self.config = config
        self.tensors = dict(tensors)

    @property
    def architecture(self):
        return self.config.architecture

    @property
    def graph(self):
        return build_graph(self.config)

    @property
    def penultimate_width(self):
        """Width of the activation feeding the final affine map."""
        name = 'head.out.W' if 'head.out.W' in self.tensors else 'out.W'
        return self.tensors[name].shape[0]

    def copy(self):
        return ModelParams(self.config, {name: value.copy() for name, value in self.tensors.items()})

    def same_as(self, other):
        """Bitwise equality of config and every tensor."""
        return (type(self.config) is type(other.config)
                and canonical(self.config) == canonical(other.config)
                and self.tensors.keys() == other.tensors.keys()
                and all(self.tensors[name].shape == other.tensors[name].shape
                        and self.tensors[name].tobytes() == other.tensors[name].tobytes()
                        for name in self.tensors))

    def __repr__(self):
        return f"ModelParams({self.architecture.value}, {parameter_count(self)} parameters)"


def _initial(spec, rng):
    if spec.init == 'fan_in':
        limit = np.sqrt(6.0 / spec.fan_in)
        return rng.uniform(-limit, limit, size=spec.shape)
    elif spec.init == 'zeros':
        return np.zeros(spec.shape)
    elif spec.init == 'ones':
        return np.ones(spec.shape)

    return np.full(spec.shape, float(spec.value))


def init_model(config, seed):
    """Fresh parameters: He-uniform fan-in weights, zero biases, batch-norm scale 1 and shift 0,
    frame-mix coefficients 1/T_max, power p0.

    :param config: Any model config.
    :param seed: Initialization seed.
    :return: :class:`ModelParams`
    """
    config.validate()
    graph = build_graph(config)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    tensors = {name: _initial(spec, rng) for name, spec in graph.params.items()}
    return ModelParams(config, tensors)


def predict(params, inputs, outputs=(PROBABILITIES,), batch_size=None):
    """Evaluate a model in eval mode.

    :param params: :class:`ModelParams`
    :param inputs: Input matrices by name, one leading row per example.
    :param outputs: Declared outputs to return: ``probabilities``, ``logits``, ``penultimate``.
    :param batch_size: Evaluate in chunks of this many rows; eval mode makes chunking exact.
    :return: {output: matrix}
    """
    graph = params.graph
    missing = [alias for alias in outputs if alias not in graph.outputs]
    if missing:
        raise InputError(f"{params.architecture.value} model declares no output(s) {', '.join(missing)}.")

    needed = {name: value for name, value in inputs.items() if name in graph.input_shapes}
    if len(needed) != len(graph.input_shapes):
        absent = sorted(set(graph.input_shapes) - set(needed))
        raise InputError(f"Missing model input(s) {', '.join(absent)}.")

    rows = len(next(iter(needed.values())))
    step = batch_size or max(rows, 1)

    chunks = {alias: [] for alias in outputs}
    for start in range(0, rows, step):
        batch = {name: value[start:start + step] for name, value in needed.items()}
        trace = graph.evaluate(batch, params.tensors, Mode.EVAL)
        for alias in outputs:
            chunks[alias].append(trace[alias])

    return {alias: np.concatenate(parts) for alias, parts in chunks.items()}


def parameter_count(params, trainable_only=False):
    """Number of scalars in the model; with `trainable_only` the batch-norm running statistics are left out."""
    specs = params.graph.params
    return sum(int(np.prod(value.shape, dtype=np.int64)) for name, value in params.tensors.items()
               if not trainable_only or specs[name].trainable)
