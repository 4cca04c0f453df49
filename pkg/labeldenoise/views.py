"""
Feature views: ways of turning a :class:`~labeldenoise.data.records.Dataset` into the named input
matrices a model graph consumes.

Video-level views produce ``video`` (N x D_v') and ``audio`` (N x D_a') matrices; the stats views append
:meth:`~labeldenoise.frames.FrameStats.vector` of a frame subset to the stored features, per modality.
The ``frames`` view produces ``frames`` (N x T_max x D) and ``mask`` (N x T_max x 1).
"""
import logging
from dataclasses import dataclass

import numpy as np

from .enums import Representative, View
from .errors import InputError
from .frames import (center_frames, frame_statistics, kmeans_fit, pad_truncate, scene_representatives,
                     segment_scenes, stats_width, unique_centroid_subsample)

logger = logging.getLogger(__name__)


@dataclass
class ViewOptions:
    """
    :ivar scene_tau: Cosine-distance threshold of the scene view.
    :ivar representative: Frame standing for a scene.
    :ivar clusters: Centroid count of the centroid view.
    :ivar seed: k-means seed of the centroid view.
    :ivar max_frames: T_max of the frames view.
    """
    scene_tau: float = 0.2
    representative: Representative = Representative.MEAN
    clusters: int = 64
    seed: int = 0
    max_frames: int = 32


def view_dims(view, video_dim, audio_dim):
    """Widths of the ``video`` and ``audio`` inputs a video-level view produces."""
    if view is View.FRAMES:
        raise InputError("The frames view has no video-level widths.")
    elif view is View.PLAIN:
        return video_dim, audio_dim

    return video_dim + stats_width(video_dim), audio_dim + stats_width(audio_dim)


def _subset(view, frames, options, vocabulary):
    if view is View.FRAMESTATS:
        return frames
    elif view is View.SCENESTATS:
        return scene_representatives(frames, segment_scenes(frames, options.scene_tau), options.representative)
    elif view is View.CENTROIDSTATS:
        return unique_centroid_subsample(frames, vocabulary)
    elif view is View.CENTEREDSTATS:
        return center_frames(frames)

    raise InputError(f"View {view.value!r} does not condense frames.")


def fit_vocabulary(dataset, options):
    """Fit the centroid vocabulary of the centroid view on every frame of the dataset."""
    vectors = np.concatenate([record.frames for record in dataset.records])
    clusters = min(options.clusters, len(vectors))
    logger.info(f"Fitting {clusters} centroids on {len(vectors)} frames.")
    return kmeans_fit(vectors, clusters, seed=options.seed)


def prepare_inputs(dataset, view, options=None, vocabulary=None):
    """Model inputs for every record of `dataset`, in dataset order.

    :param dataset: The dataset.
    :param view: Which view to compute.
    :type view: :class:`~labeldenoise.enums.View`
    :param options: :class:`ViewOptions`, defaults when None.
    :param vocabulary: A fitted :class:`~labeldenoise.frames.CentroidVocabulary`; the centroid view fits
        one on the dataset's frames when None.
    :return: {input name: matrix with one leading row per record}
    """
    options = options or ViewOptions()
    if view.needs_frames and not dataset.has_frames:
        raise InputError(f"View {view.value!r} needs frames, the dataset has none.")

    if view is View.PLAIN:
        return {
            'video': np.stack([record.video_feat for record in dataset.records]),
            'audio': np.stack([record.audio_feat for record in dataset.records]),
        }

    if view is View.FRAMES:
        padded = np.zeros((len(dataset), options.max_frames, dataset.frame_dim))
        mask = np.zeros((len(dataset), options.max_frames, 1))
        for row, record in enumerate(dataset.records):
            padded[row], valid = pad_truncate(record.frames, options.max_frames)
            mask[row, :valid] = 1.0
        return {'frames': padded, 'mask': mask}

    if view is View.CENTROIDSTATS and vocabulary is None:
        vocabulary = fit_vocabulary(dataset, options)

    split = dataset.video_dim
    video, audio = [], []
    for record in dataset.records:
        subset = _subset(view, record.frames, options, vocabulary)
        video.append(np.concatenate([record.video_feat, frame_statistics(subset[:, :split]).vector()]))
        audio.append(np.concatenate([record.audio_feat, frame_statistics(subset[:, split:]).vector()]))

    return {'video': np.stack(video), 'audio': np.stack(audio)}
