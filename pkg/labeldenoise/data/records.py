import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from ..enums import LabelSource
from ..errors import InputError

logger = logging.getLogger(__name__)


@dataclass
class VideoRecord:
    """One video.

    :ivar id: Unique record id.
    :ivar video_feat: Video-level visual embedding, length D_v.
    :ivar audio_feat: Video-level audio embedding, length D_a.
    :ivar frames: Optional T x (D_v + D_a) frame matrix, visual part first.
    :ivar noisy_labels: Observed label indices.
    :ivar clean_labels: True label indices, only known for synthetic data.
    :ivar scene_starts: Planted scene boundaries of synthetic frames; not stored on disk.
    """
    id: str
    video_feat: np.ndarray
    audio_feat: np.ndarray
    frames: Optional[np.ndarray] = None
    noisy_labels: frozenset = frozenset()
    clean_labels: Optional[frozenset] = None
    scene_starts: Optional[Tuple[int, ...]] = field(default=None, compare=False)

    def labels(self, source=LabelSource.NOISY):
        if source is LabelSource.CLEAN:
            if self.clean_labels is None:
                raise InputError(f"Record {self.id!r} has no clean labels.")
            return self.clean_labels

        return self.noisy_labels

    def __eq__(self, other):
        if not isinstance(other, VideoRecord):
            return NotImplemented

        def same(a, b):
            if a is None or b is None:
                return a is b
            return a.shape == b.shape and np.array_equal(a, b)

        return (self.id == other.id
                and same(self.video_feat, other.video_feat)
                and same(self.audio_feat, other.audio_feat)
                and same(self.frames, other.frames)
                and self.noisy_labels == other.noisy_labels
                and self.clean_labels == other.clean_labels)


@dataclass
class Dataset:
    """
    :ivar vocabulary_size: Number of labels.
    :ivar video_dim: D_v.
    :ivar audio_dim: D_a.
    :ivar records: Records in a fixed order; every per-record matrix in the package follows it.
    :ivar groups: Optional label index to vertical name map.
    """
    vocabulary_size: int
    video_dim: int
    audio_dim: int
    records: list
    groups: Optional[dict] = None

    def __post_init__(self):
        self._positions = None

    def validate(self):
        seen = set()
        for record in self.records:
            if record.id in seen:
                raise InputError(f"Duplicate record id {record.id!r}.")
            seen.add(record.id)

            if record.video_feat.shape != (self.video_dim,) or record.audio_feat.shape != (self.audio_dim,):
                raise InputError(f"Record {record.id!r} does not match dims ({self.video_dim}, {self.audio_dim}).")

            if record.frames is not None and (record.frames.ndim != 2 or record.frames.shape[0] < 1
                                              or record.frames.shape[1] != self.frame_dim):
                raise InputError(f"Record {record.id!r} has frames of shape {record.frames.shape}.")

            for labels in (record.noisy_labels, record.clean_labels or ()):
                if any(label < 0 or label >= self.vocabulary_size for label in labels):
                    raise InputError(f"Record {record.id!r} has a label outside the vocabulary.")

        return self

    @property
    def frame_dim(self):
        return self.video_dim + self.audio_dim

    @property
    def has_frames(self):
        return bool(self.records) and all(record.frames is not None for record in self.records)

    @property
    def has_clean(self):
        return bool(self.records) and all(record.clean_labels is not None for record in self.records)

    @property
    def ids(self):
        return [record.id for record in self.records]

    def position(self, record_id):
        if self._positions is None:
            self._positions = {record.id: i for i, record in enumerate(self.records)}
        return self._positions[record_id]

    def __len__(self):
        return len(self.records)

    def label_matrix(self, source=LabelSource.NOISY, indices=None):
        """Binary N x L target matrix of the chosen label set."""
        records = self.records if indices is None else [self.records[i] for i in indices]
        matrix = np.zeros((len(records), self.vocabulary_size))
        for row, record in enumerate(records):
            matrix[row, sorted(record.labels(source))] = 1.0
        return matrix

    def truth(self, source=LabelSource.NOISY, indices=None):
        """Ground truth as used by the metrics: record id to set of positive labels."""
        records = self.records if indices is None else [self.records[i] for i in indices]
        return {record.id: set(record.labels(source)) for record in records}

    def label_counts(self, source=LabelSource.NOISY, indices=None):
        counts = np.zeros(self.vocabulary_size, dtype=np.int64)
        records = self.records if indices is None else [self.records[i] for i in indices]
        for record in records:
            counts[sorted(record.labels(source))] += 1
        return counts


@dataclass
class NoiseConfig:
    """
    :ivar fn_rate: Probability that a true positive is dropped from the observed labels.
    :ivar fp_rate: Expected number of spurious labels added per video (Poisson mean).
    """
    fn_rate: float = 0.5
    fp_rate: float = 1.0
    seed: int = 0

    def validate(self):
        if not 0.0 <= self.fn_rate <= 1.0:
            raise InputError(f"fn_rate must lie in [0, 1], got {self.fn_rate}.")
        if self.fp_rate < 0.0:
            raise InputError(f"fp_rate must be non-negative, got {self.fp_rate}.")


@dataclass
class GeneratorConfig:
    """Shape of a synthetic dataset.

    :ivar max_labels: Each video draws between 1 and max_labels clean labels.
    :ivar label_skew: Zipf exponent of label popularity, 0 for uniform.
    :ivar feature_noise: Standard deviation of the Gaussian noise on video-level features.
    :ivar audio_informativeness: Weight of the label signal in audio features, 0 makes audio pure noise.
    :ivar frame_noise: Per-coordinate standard deviation of frame noise around its scene center.
    :ivar scene_separation: Minimal cosine distance between consecutive scene centers.
    :ivar scene_jitter: Weight of the random direction mixed into each scene center.
    """
    videos: int = 2000
    vocabulary_size: int = 50
    video_dim: int = 64
    audio_dim: int = 16
    max_labels: int = 3
    label_skew: float = 1.0
    feature_noise: float = 0.05
    audio_informativeness: float = 0.5
    with_frames: bool = True
    min_frames: int = 8
    max_frames: int = 24
    max_scenes: int = 4
    frame_noise: float = 0.01
    scene_separation: float = 0.4
    scene_jitter: float = 0.6
    n_groups: int = 5

    def validate(self):
        if self.vocabulary_size < 2:
            raise InputError("vocabulary_size must be at least 2.")
        if self.videos < 1:
            raise InputError("videos must be at least 1.")
        if self.video_dim < 1 or self.audio_dim < 1:
            raise InputError("feature dims must be at least 1.")
        if self.max_labels < 1 or self.max_labels > self.vocabulary_size:
            raise InputError(f"max_labels={self.max_labels} is impossible with "
                             f"{self.vocabulary_size} labels.")
        if self.with_frames and not 1 <= self.min_frames <= self.max_frames:
            raise InputError("frame counts must satisfy 1 <= min_frames <= max_frames.")
        if self.with_frames and not 1 <= self.max_scenes:
            raise InputError("max_scenes must be at least 1.")
        if self.n_groups < 1:
            raise InputError("n_groups must be at least 1.")
