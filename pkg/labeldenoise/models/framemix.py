"""
Frame mixing: m trainable linear combinations of the padded frames, fused = C F with C of shape
m x T_max, flattened to an m * D vector for a ResNet-like head.
"""
import logging

import numpy as np

from .builder import PROBABILITIES, resnet_body
from ..diff import Graph
from ..enums import Mode

logger = logging.getLogger(__name__)

FUSED = 'fused'


def build_framemix(config):
    """
    :param config: :class:`~labeldenoise.models.config.FrameMixConfig`
    :return: Graph with input ``frames`` (B x T_max x D). Padding rows are zero and drop out of C F, so the
        view's ``mask`` is not read.
    """
    graph = Graph()
    frames = graph.input('frames', (None, config.max_frames, config.frame_dim))
    mix = graph.param('mix.C', (config.combinations, config.max_frames), init='const',
                      value=1.0 / config.max_frames)

    fused = graph.add_node('matmul', [mix, frames])
    graph.output(FUSED, fused)
    flat = graph.add_node('flatten', [fused])

    resnet_body(graph, [('mix', flat, config.combinations * config.frame_dim)], config.head,
                config.vocabulary_size, prefix='head.')
    return graph


def forward_framemix(params, padded, mode=Mode.EVAL, rng=None, output=PROBABILITIES):
    """Forward one padded video.

    :param padded: T_max x D matrix, see :func:`~labeldenoise.frames.pad_truncate`.
    :return: Row vector of the requested output (``'fused'`` gives the m x D matrix).
    """
    padded = np.asarray(padded, dtype=np.float64)
    trace = params.graph.evaluate({'frames': padded[None]}, params.tensors, mode, rng)
    return trace[output][0]
