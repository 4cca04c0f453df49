import logging

import numpy as np

from .builder import PROBABILITIES, resnet_body
from ..diff import Graph
from ..enums import Modality, Mode
from ..views import view_dims

logger = logging.getLogger(__name__)


def build_resnetlike(config):
    """Graph of a ResNet-like model; single-modality variants declare only their own input.

    :param config: :class:`~labeldenoise.models.config.ResNetLikeConfig`
    :return: :class:`~labeldenoise.diff.graph.Graph` with inputs ``video`` and/or ``audio``.
    """
    graph = Graph()
    video_width, audio_width = view_dims(config.view, config.video_dim, config.audio_dim)

    branches = []
    if config.modality in (Modality.BOTH, Modality.VIDEO_ONLY):
        branches.append(('video', graph.input('video', (None, video_width)), video_width))
    if config.modality in (Modality.BOTH, Modality.AUDIO_ONLY):
        branches.append(('audio', graph.input('audio', (None, audio_width)), audio_width))

    resnet_body(graph, branches, config, config.vocabulary_size)
    return graph


def forward_resnetlike(params, video=None, audio=None, mode=Mode.EVAL, rng=None):
    """Per-class probabilities for a batch of video-level features.

    :param params: :class:`~labeldenoise.models.params.ModelParams` of a ResNet-like model.
    :param video: B x D_v matrix, ignored by audio-only models.
    :param audio: B x D_a matrix, ignored by video-only models.
    :return: B x vocabulary matrix in (0, 1).
    """
    inputs = {}
    if video is not None:
        inputs['video'] = np.atleast_2d(video)
    if audio is not None:
        inputs['audio'] = np.atleast_2d(audio)

    return params.graph.evaluate(inputs, params.tensors, mode, rng)[PROBABILITIES]
