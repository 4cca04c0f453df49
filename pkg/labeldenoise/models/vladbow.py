"""
VLAD-BOW: every frame x_i is mapped to y_i = relu(W x_i + b) ** p with a trainable scalar power p,
softly assigned to K clusters with a softmax, and the assignments are summed over the valid frames.
The resulting K-dim bag of words feeds a ResNet-like head.
"""
import logging

import numpy as np

from .builder import PROBABILITIES, dense, resnet_body
from ..diff import Graph
from ..enums import Mode

logger = logging.getLogger(__name__)

BOW = 'bow'
SOFT_ASSIGN = 'soft_assign'


def build_vladbow(config):
    """
    :param config: :class:`~labeldenoise.models.config.VladBowConfig`
    :return: Graph with inputs ``frames`` (B x T x D) and ``mask`` (B x T x 1).
    """
    graph = Graph()
    frames = graph.input('frames', (None, None, config.frame_dim))
    mask = graph.input('mask', (None, None, 1))

    y = graph.add_node('relu', [dense(graph, frames, 'vlad', config.frame_dim, config.clusters)])
    p = graph.param('vlad.p', (1,), init='const', value=config.power)
    y = graph.add_node('power', [y, p])

    assign = graph.add_node('softmax', [y])
    graph.output(SOFT_ASSIGN, assign)
    bow = graph.add_node('sum', [graph.add_node('multiply', [assign, mask])], axis=1)
    graph.output(BOW, bow)

    resnet_body(graph, [('bow', bow, config.clusters)], config.head, config.vocabulary_size, prefix='head.')
    return graph


def single_video(frames):
    """Inputs of a one-video batch: the frames as given and an all-valid mask."""
    frames = np.asarray(frames, dtype=np.float64)
    return {'frames': frames[None], 'mask': np.ones((1, frames.shape[0], 1))}


def forward_vladbow(params, frames, mode=Mode.EVAL, rng=None, output=PROBABILITIES):
    """Forward one video.

    :param params: :class:`~labeldenoise.models.params.ModelParams` of a VLAD-BOW model.
    :param frames: T x D matrix, T >= 1.
    :param output: Which declared output to return, e.g. ``'bow'``.
    :return: Row vector of the requested output.
    """
    trace = params.graph.evaluate(single_video(frames), params.tensors, mode, rng)
    return trace[output][0]
