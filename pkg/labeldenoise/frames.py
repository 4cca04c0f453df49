"""
Frame-sequence condensation: statistics, per-video centering, scene segmentation by cosine distance,
a global k-means centroid vocabulary, subsampling and pad/truncate.

Every function takes a T x D frame matrix (T frames, D features per frame) and is pure.
"""
import logging
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from scipy.spatial.distance import cdist

from .enums import Representative, Subsample
from .errors import InputError

logger = logging.getLogger(__name__)

MODE_LEVELS = 255


def _as_frames(frames):
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] < 1:
        raise InputError(f"Expected a non-empty T x D frame matrix, got shape {frames.shape}.")
    return frames


@dataclass
class FrameStats:
    """Per-dimension statistics of a frame sequence.

    :ivar length: Number of frames.
    """
    mean: np.ndarray
    std: np.ndarray
    median: np.ndarray
    minimum: np.ndarray
    maximum: np.ndarray
    mode: np.ndarray
    length: int

    def vector(self):
        """Model input: mean, std, median, min, max, mode and log(1 + length), concatenated."""
        return np.concatenate([self.mean, self.std, self.median, self.minimum, self.maximum, self.mode,
                               [np.log1p(self.length)]])


def stats_width(dim):
    """Length of :meth:`FrameStats.vector` for D-dimensional frames."""
    return 6 * dim + 1


def quantized_mode(frames):
    """Most frequent value per column after rounding to the nearest 1/255 step, ties to the smaller value."""
    levels = np.rint(frames * MODE_LEVELS).astype(np.int64)
    mode = np.empty(frames.shape[1])
    for column in range(frames.shape[1]):
        values, counts = np.unique(levels[:, column], return_counts=True)
        mode[column] = values[np.argmax(counts)] / MODE_LEVELS
    return mode


def frame_statistics(frames):
    """
    :param frames: T x D matrix, T >= 1.
    :return: :class:`FrameStats` with population std and the lower middle as median for even T.
    """
    frames = _as_frames(frames)
    length = frames.shape[0]
    ordered = np.sort(frames, axis=0)

    return FrameStats(
        mean=frames.mean(axis=0),
        std=frames.std(axis=0),
        median=ordered[(length - 1) // 2],
        minimum=ordered[0],
        maximum=ordered[-1],
        mode=quantized_mode(frames),
        length=length,
    )


def center_frames(frames):
    """Subtract the per-video mean frame, keeping only the dynamics."""
    frames = _as_frames(frames)
    return frames - frames.mean(axis=0)


@dataclass
class SceneSegmentation:
    """
    :ivar boundaries: Sorted frame indices where a scene starts, always beginning with 0.
    :ivar threshold: The cosine-distance threshold used.
    :ivar length: Number of frames segmented.
    """
    boundaries: Tuple[int, ...]
    threshold: float
    length: int

    def scenes(self):
        """(start, end) frame ranges of every scene."""
        ends = list(self.boundaries[1:]) + [self.length]
        return list(zip(self.boundaries, ends))


def neighbour_distances(frames):
    """Cosine distance between frames t-1 and t for t = 1..T-1; pairs with a zero-norm frame count as 0."""
    frames = _as_frames(frames)
    previous, current = frames[:-1], frames[1:]
    norms = np.linalg.norm(previous, axis=1) * np.linalg.norm(current, axis=1)
    dots = np.sum(previous * current, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    return np.where(norms > 0, 1.0 - dots / safe, 0.0)


def segment_scenes(frames, tau=0.2):
    """Cut a video where neighbouring frames are further apart than `tau`.

    :param frames: T x D matrix.
    :param tau: Cosine-distance threshold in (0, 2].
    :return: :class:`SceneSegmentation`
    """
    if not 0.0 < tau <= 2.0:
        raise InputError(f"Scene threshold must lie in (0, 2], got {tau}.")

    frames = _as_frames(frames)
    cuts = np.flatnonzero(neighbour_distances(frames) > tau) + 1
    return SceneSegmentation((0,) + tuple(int(c) for c in cuts), tau, frames.shape[0])


def scene_representatives(frames, segmentation, representative=Representative.MEAN):
    """One row per scene: the scene's mean frame, or its first frame."""
    frames = _as_frames(frames)
    if representative is Representative.FIRST:
        return frames[list(segmentation.boundaries)]

    return np.stack([frames[start:end].mean(axis=0) for start, end in segmentation.scenes()])


@dataclass
class CentroidVocabulary:
    """
    :ivar centroids: k x D matrix.
    :ivar inertia: Sum of squared distances of the fitted vectors to their nearest centroid.
    :ivar history: Inertia after each assignment step of the winning run.
    """
    centroids: np.ndarray
    inertia: float
    iterations: int = 0
    history: list = field(default_factory=list)

    @property
    def k(self):
        return self.centroids.shape[0]


def assign(vectors, centroids):
    """Nearest centroid by squared Euclidean distance, ties to the lower index.

    :return: (labels, squared distances to the chosen centroid)
    """
    distances = cdist(vectors, centroids, 'sqeuclidean')
    labels = np.argmin(distances, axis=1)
    return labels, distances[np.arange(len(vectors)), labels]


def _plus_plus(vectors, k, rng):
    n = len(vectors)
    chosen = [int(rng.integers(n))]
    closest = cdist(vectors, vectors[chosen], 'sqeuclidean')[:, 0]

    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            index = int(rng.choice(n, p=closest / total))
        else:
            index = int(rng.integers(n))
        chosen.append(index)
        closest = np.minimum(closest, cdist(vectors, vectors[[index]], 'sqeuclidean')[:, 0])

    return vectors[chosen].copy()


def _lloyd(vectors, centroids, max_iter, tol):
    history = []
    for iteration in range(1, max_iter + 1):
        labels, distances = assign(vectors, centroids)
        history.append(float(distances.sum()))

        updated = np.empty_like(centroids)
        farthest = distances.copy()
        for j in range(len(centroids)):
            members = labels == j
            if np.any(members):
                updated[j] = vectors[members].mean(axis=0)
            else:
                index = int(np.argmax(farthest))
                logger.debug(f"Cluster {j} is empty, re-seeding it at point {index}.")
                updated[j] = vectors[index]
                farthest[index] = -1.0

        shift = float(np.max(np.linalg.norm(updated - centroids, axis=1)))
        centroids = updated
        if shift < tol:
            break
    else:
        logger.warning(f"k-means stopped after max_iter={max_iter} iterations without converging.")

    labels, distances = assign(vectors, centroids)
    history.append(float(distances.sum()))
    return centroids, history, iteration


def kmeans_fit(vectors, k, max_iter=100, tol=1e-6, seed=0, n_init=4):
    """Fit k centroids with k-means++ seeding and exact Lloyd iterations.

    Each of the `n_init` restarts draws its own seed from `seed`; the run with the lowest inertia wins.

    :param vectors: N x D matrix, N >= k.
    :param k: Number of centroids.
    :param max_iter: Lloyd iteration cap per restart.
    :param tol: Stop once no centroid moves further than this.
    :return: :class:`CentroidVocabulary`
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    if k < 1:
        raise InputError(f"k must be at least 1, got {k}.")
    if max_iter < 1:
        raise InputError(f"max_iter must be at least 1, got {max_iter}.")
    if vectors.ndim != 2 or len(vectors) < k:
        raise InputError(f"k-means needs at least k={k} vectors, got {len(vectors)}.")

    best = None
    for stream in np.random.SeedSequence(seed).spawn(n_init):
        rng = np.random.default_rng(stream)
        centroids, history, iterations = _lloyd(vectors, _plus_plus(vectors, k, rng), max_iter, tol)
        if best is None or history[-1] < best.inertia:
            best = CentroidVocabulary(centroids, history[-1], iterations, history)

    logger.debug(f"k-means k={k}: inertia {best.inertia:.6g} after {best.iterations} iterations.")
    return best


def unique_centroid_subsample(frames, vocabulary):
    """Keep the first frame for every distinct nearest centroid, in order of first occurrence."""
    frames = _as_frames(frames)
    centroids = vocabulary.centroids if isinstance(vocabulary, CentroidVocabulary) else vocabulary
    if frames.shape[1] != centroids.shape[1]:
        raise InputError(f"Frames have {frames.shape[1]} features, centroids {centroids.shape[1]}.")

    labels, _ = assign(frames, centroids)
    _, first = np.unique(labels, return_index=True)
    return frames[np.sort(first)]


def subsample_frames(frames, count, strategy=Subsample.REGULAR, rng=None):
    """Pick at most `count` frames, at regular intervals or at random, preserving temporal order."""
    frames = _as_frames(frames)
    if count < 1:
        raise InputError(f"Subsample count must be at least 1, got {count}.")

    length = frames.shape[0]
    if strategy is Subsample.REGULAR:
        indices = np.unique(np.rint(np.linspace(0, length - 1, min(count, length))).astype(np.int64))
    else:
        if rng is None:
            raise InputError("Random subsampling needs a random generator.")
        indices = np.sort(rng.choice(length, size=min(count, length), replace=False))

    return frames[indices]


def pad_truncate(frames, max_frames):
    """Copy the first min(T, max_frames) rows into a zero max_frames x D matrix.

    :return: (padded matrix, number of valid rows)
    """
    frames = _as_frames(frames)
    if max_frames < 1:
        raise InputError(f"max_frames must be at least 1, got {max_frames}.")

    valid = min(frames.shape[0], max_frames)
    padded = np.zeros((max_frames, frames.shape[1]))
    padded[:valid] = frames[:valid]
    return padded, valid
