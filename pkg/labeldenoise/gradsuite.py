"""
Finite-difference checks of every architecture on two-sample batches.

The cases keep the depth and activation of a preset's base model but shrink every width, so the check
touches each backward rule without evaluating millions of perturbations. Batch-norm running statistics are
randomized and dropout is disabled, which makes the graphs deterministic in eval mode.
"""
import logging
from dataclasses import replace

import numpy as np

from .diff import check_graph_gradients
from .enums import Activation, Modality, Mode, View
from .losses import LOSS, loss_graph
from .models import FrameMixConfig, VladBowConfig, init_model
from .views import ViewOptions

logger = logging.getLogger(__name__)

BATCH = 2
TOLERANCE = 1e-4


def suite_cases(model):
    """Small configs of every architecture, derived from a base ResNet-like config."""
    base = replace(model, video_dim=5, audio_dim=3, vocabulary_size=4, inner_size=6, dropout_rate=0.0,
                   view=View.PLAIN, view_options=ViewOptions())
    head = replace(base, modality=Modality.VIDEO_ONLY)

    return {
        'resnet_both': base,
        'resnet_video': replace(base, modality=Modality.VIDEO_ONLY),
        'resnet_audio': replace(base, modality=Modality.AUDIO_ONLY),
        'resnet_bottleneck': replace(base, inner_size=4),
        'resnet_tanh': replace(base, activation=Activation.TANH),
        'vladbow': VladBowConfig(frame_dim=7, clusters=5, power=1.5, max_frames=4, vocabulary_size=4, head=head),
        'framemix': FrameMixConfig(frame_dim=7, combinations=3, max_frames=4, vocabulary_size=4, head=head),
    }


def _inputs(graph, config, rng):
    frames = getattr(config, 'max_frames', 1)
    inputs = {}
    for name, shape in graph.input_shapes.items():
        if name == 'mask':
            mask = np.ones((BATCH, frames, 1))
            mask[1, frames // 2:] = 0.0
            inputs[name] = mask
        elif name == 'targets':
            inputs[name] = (rng.random((BATCH, config.vocabulary_size)) < 0.5).astype(np.float64)
        else:
            extents = [BATCH if axis == 0 else frames if extent is None else extent
                       for axis, extent in enumerate(shape)]
            inputs[name] = rng.normal(size=extents)

    if 'mask' in inputs:
        inputs['frames'] = inputs['frames'] * inputs['mask']
    return inputs


def _randomized_statistics(graph, tensors, rng):
    tensors = dict(tensors)
    for name, spec in graph.params.items():
        if name.endswith('.running_mean'):
            tensors[name] = rng.normal(scale=0.1, size=spec.shape)
        elif name.endswith('.running_var'):
            tensors[name] = rng.uniform(0.5, 1.5, size=spec.shape)
    return tensors


def check_case(config, seed=0, h=1e-5):
    """
    :return: {param name: relative error} over every trainable parameter of `config`.
    """
    graph = loss_graph(config)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 3]))
    tensors = _randomized_statistics(graph, init_model(config, seed).tensors, rng)
    return check_graph_gradients(graph, _inputs(graph, config, rng), tensors, LOSS, h=h, mode=Mode.EVAL)


def gradient_suite(model, seed=0, h=1e-5):
    """Run :func:`check_case` on every case of :func:`suite_cases`.

    :return: {case: max relative error}
    """
    results = {}
    for case, config in suite_cases(model).items():
        errors = check_case(config, seed, h)
        worst = max(errors, key=errors.get)
        results[case] = errors[worst]
        logger.info(f"Gradient check {case}: max relative error {errors[worst]:.3e} at {worst}")
    return results
