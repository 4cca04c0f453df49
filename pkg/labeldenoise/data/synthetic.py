"""
Synthetic multi-label videos with known clean labels and a configurable label-noise model.

Labels own a visual and an audio prototype. A video's features sum the prototypes of its clean
labels; its frames are piecewise constant around scene centers built from the same prototypes.
Observed labels drop each true positive with probability ``fn_rate`` and add ``Poisson(fp_rate)``
spurious labels, which mimics labels of high precision and low recall.
"""
import logging

import numpy as np

from .records import Dataset, VideoRecord
from ..errors import InputError

logger = logging.getLogger(__name__)

MAX_SCENE_ATTEMPTS = 1000


def _unit(vectors):
    norms = np.linalg.norm(vectors, axis=-1, keepdims=True)
    return vectors / np.where(norms > 0, norms, 1.0)


def _stored(values):
    # Values must survive the 32-bit on-disk format unchanged.
    return np.asarray(values, dtype=np.float32).astype(np.float64)


def _cosine_distance(a, b):
    return 1.0 - float(a @ b) / float(np.linalg.norm(a) * np.linalg.norm(b))


class _Prototypes:
    def __init__(self, config, rng):
        self.video = _unit(rng.standard_normal((config.vocabulary_size, config.video_dim)))
        self.audio = _unit(rng.standard_normal((config.vocabulary_size, config.audio_dim)))

        ranks = rng.permutation(config.vocabulary_size)
        weights = 1.0 / (ranks + 1.0) ** config.label_skew
        self.popularity = weights / weights.sum()


def _clean_labels(config, prototypes, rng):
    count = int(rng.integers(1, config.max_labels + 1))
    labels = rng.choice(config.vocabulary_size, size=count, replace=False, p=prototypes.popularity)
    return frozenset(int(label) for label in labels)


def _features(config, prototypes, labels, rng):
    ordered = sorted(labels)
    video = _unit(prototypes.video[ordered].sum(axis=0))
    video = video + config.feature_noise * rng.standard_normal(config.video_dim)

    weight = config.audio_informativeness
    audio = weight * _unit(prototypes.audio[ordered].sum(axis=0))
    audio = audio + np.sqrt(max(0.0, 1.0 - weight * weight)) * rng.standard_normal(config.audio_dim) \
        / np.sqrt(config.audio_dim)
    audio = audio + config.feature_noise * rng.standard_normal(config.audio_dim)

    return _stored(video), _stored(audio)


def _scene_center(config, prototypes, labels, previous, rng):
    label = int(rng.choice(sorted(labels)))
    base = _unit(np.concatenate([prototypes.video[label], prototypes.audio[label]]))
    direction = _unit(rng.standard_normal(base.shape))
    center = _unit((1.0 - config.scene_jitter) * base + config.scene_jitter * direction)

    attempts = 0
    while previous is not None and _cosine_distance(center, previous) < config.scene_separation:
        attempts += 1
        if attempts > MAX_SCENE_ATTEMPTS:
            raise InputError(f"Cannot plant scenes {config.scene_separation} apart in "
                             f"{base.size} dimensions.")
        center = _unit(rng.standard_normal(base.shape))

    return center


def _frames(config, prototypes, labels, rng):
    length = int(rng.integers(config.min_frames, config.max_frames + 1))
    scenes = int(rng.integers(1, min(config.max_scenes, length) + 1))
    cuts = sorted(int(c) for c in rng.choice(np.arange(1, length), size=scenes - 1, replace=False)) \
        if scenes > 1 else []
    starts = [0] + cuts

    frames = np.empty((length, config.video_dim + config.audio_dim))
    previous = None
    for start, end in zip(starts, starts[1:] + [length]):
        center = _scene_center(config, prototypes, labels, previous, rng)
        frames[start:end] = center + config.frame_noise * rng.standard_normal((end - start, center.size))
        previous = center

    return _stored(frames), tuple(starts)


def corrupt_labels(clean, vocabulary_size, noise, rng):
    """Apply the noise model to one clean label set.

    :param clean: The clean label set.
    :param noise: The noise configuration.
    :type noise: :class:`~labeldenoise.data.records.NoiseConfig`
    :return: The observed label set.
    """
    kept = {label for label in sorted(clean) if rng.random() >= noise.fn_rate}

    candidates = np.array(sorted(set(range(vocabulary_size)) - set(clean)), dtype=np.int64)
    spurious = min(int(rng.poisson(noise.fp_rate)), candidates.size)
    if spurious > 0:
        kept.update(int(label) for label in rng.choice(candidates, size=spurious, replace=False))

    return frozenset(kept)


def synthetic_groups(vocabulary_size, n_groups, rng):
    """Assign labels to verticals round-robin over a seeded permutation."""
    order = rng.permutation(vocabulary_size)
    return {int(label): f'group{position % n_groups}' for position, label in enumerate(order)}


def generate_synthetic(config, noise, seed):
    """Generate a dataset whose clean labels are known.

    Clean data depends only on (config, seed); observed labels additionally on the noise seed, so the
    same clean data can be corrupted in different ways.

    :param config: Counts, dims and scene parameters.
    :type config: :class:`~labeldenoise.data.records.GeneratorConfig`
    :param noise: The label-noise model.
    :type noise: :class:`~labeldenoise.data.records.NoiseConfig`
    :param seed: Seed of every random stream.
    :return: :class:`~labeldenoise.data.records.Dataset`
    """
    config.validate()
    noise.validate()

    streams = np.random.SeedSequence(seed).spawn(4)
    proto_rng, label_rng, feature_rng, group_rng = (np.random.default_rng(s) for s in streams)
    noise_rng = np.random.default_rng(np.random.SeedSequence([seed, noise.seed]))

    prototypes = _Prototypes(config, proto_rng)
    records = []
    for index in range(config.videos):
        clean = _clean_labels(config, prototypes, label_rng)
        video, audio = _features(config, prototypes, clean, feature_rng)

        frames, starts = None, None
        if config.with_frames:
            frames, starts = _frames(config, prototypes, clean, feature_rng)

        records.append(VideoRecord(
            id=f'vid{index:06d}',
            video_feat=video,
            audio_feat=audio,
            frames=frames,
            noisy_labels=corrupt_labels(clean, config.vocabulary_size, noise, noise_rng),
            clean_labels=clean,
            scene_starts=starts,
        ))

    groups = synthetic_groups(config.vocabulary_size, config.n_groups, group_rng)
    dataset = Dataset(config.vocabulary_size, config.video_dim, config.audio_dim, records, groups)

    positives = sum(len(r.clean_labels) for r in records)
    observed = sum(len(r.noisy_labels) for r in records)
    logger.info(f"Generated {len(records)} videos, {positives} clean and {observed} observed labels.")
    return dataset.validate()
