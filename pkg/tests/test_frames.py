import numpy as np
import pytest
from sklearn.cluster import KMeans

from labeldenoise.data import GeneratorConfig, NoiseConfig, generate_synthetic
from labeldenoise.enums import Representative, Subsample
from labeldenoise.errors import InputError
from labeldenoise.frames import (assign, center_frames, frame_statistics, kmeans_fit, neighbour_distances,
                                 pad_truncate, quantized_mode, scene_representatives, segment_scenes,
                                 stats_width, subsample_frames, unique_centroid_subsample)


def test_frame_statistics():
    frames = np.array([[1.0, 4.0], [3.0, 2.0], [2.0, 0.0], [10.0, 6.0]])
    stats = frame_statistics(frames)

    np.testing.assert_allclose(stats.mean, [4.0, 3.0])
    np.testing.assert_allclose(stats.std, frames.std(axis=0))
    np.testing.assert_array_equal(stats.median, [2.0, 2.0])
    np.testing.assert_array_equal(stats.minimum, [1.0, 0.0])
    np.testing.assert_array_equal(stats.maximum, [10.0, 6.0])
    assert stats.length == 4

    vector = stats.vector()
    assert vector.shape == (stats_width(2),) == (13,)
    assert vector[-1] == pytest.approx(np.log(5.0))


def test_single_frame_statistics():
    stats = frame_statistics([[0.5, -1.0, 2.0]])
    np.testing.assert_array_equal(stats.std, np.zeros(3))
    np.testing.assert_array_equal(stats.median, [0.5, -1.0, 2.0])


def test_quantized_mode_ties_to_smaller_value():
    step = 1.0 / 255
    frames = np.array([[1 * step, 7 * step], [2 * step, 7 * step], [2 * step, 3 * step], [1 * step, 3 * step]])
    np.testing.assert_allclose(quantized_mode(frames), [1 * step, 3 * step])

    frames = np.array([[0.501], [0.502], [0.1]])
    np.testing.assert_allclose(quantized_mode(frames), [128 / 255])


def test_empty_frames_are_rejected():
    with pytest.raises(InputError):
        frame_statistics(np.zeros((0, 3)))


def test_center_frames():
    centered = center_frames([[1.0, 2.0], [3.0, 6.0]])
    np.testing.assert_allclose(centered, [[-1.0, -2.0], [1.0, 2.0]])


def test_neighbour_distances():
    frames = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, -1.0], [0.0, 0.0]])
    np.testing.assert_allclose(neighbour_distances(frames), [0.0, 1.0, 2.0, 0.0])


def test_segment_scenes():
    frames = np.array([[1.0, 0.0], [0.99, 0.05], [0.0, 1.0], [0.05, 1.0], [-1.0, 0.0]])
    segmentation = segment_scenes(frames, tau=0.2)

    assert segmentation.boundaries == (0, 2, 4)
    assert segmentation.scenes() == [(0, 2), (2, 4), (4, 5)]

    single = segment_scenes(frames[:1])
    assert single.boundaries == (0,)

    with pytest.raises(InputError):
        segment_scenes(frames, tau=0.0)


def test_planted_scenes_are_recovered():
    config = GeneratorConfig(videos=100, vocabulary_size=10, video_dim=8, audio_dim=4, min_frames=8,
                             max_frames=30, max_scenes=5)
    dataset = generate_synthetic(config, NoiseConfig(), seed=21)

    for record in dataset.records:
        assert segment_scenes(record.frames, tau=0.2).boundaries == record.scene_starts


def test_scene_representatives():
    frames = np.array([[1.0, 0.0], [3.0, 0.0], [0.0, 2.0]])
    segmentation = segment_scenes(frames)

    np.testing.assert_allclose(scene_representatives(frames, segmentation), [[2.0, 0.0], [0.0, 2.0]])
    np.testing.assert_allclose(scene_representatives(frames, segmentation, Representative.FIRST),
                               [[1.0, 0.0], [0.0, 2.0]])


def blobs(rng, per_blob=40):
    centers = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
    return np.concatenate([c + 0.5 * rng.standard_normal((per_blob, 2)) for c in centers]), centers


def test_kmeans_finds_blobs(rng):
    vectors, centers = blobs(rng)
    vocabulary = kmeans_fit(vectors, 3, seed=1)

    assert vocabulary.k == 3
    found = sorted(map(tuple, np.round(vocabulary.centroids)))
    assert found == sorted(map(tuple, centers))
    assert all(a >= b - 1e-9 for a, b in zip(vocabulary.history, vocabulary.history[1:]))

    labels, distances = assign(vectors, vocabulary.centroids)
    assert distances.sum() == pytest.approx(vocabulary.inertia)
    assert len(set(labels[:40])) == len(set(labels[40:80])) == len(set(labels[80:])) == 1


def test_kmeans_matches_reference_inertia(rng):
    vectors, _ = blobs(rng)
    ours = kmeans_fit(vectors, 3, seed=0)
    reference = KMeans(n_clusters=3, n_init=10, random_state=0).fit(vectors)
    assert ours.inertia == pytest.approx(reference.inertia_, rel=1e-4)


def test_kmeans_is_seeded(rng):
    vectors = rng.standard_normal((50, 3))
    np.testing.assert_array_equal(kmeans_fit(vectors, 4, seed=5).centroids, kmeans_fit(vectors, 4, seed=5).centroids)

    with pytest.raises(InputError):
        kmeans_fit(vectors[:3], 4)


def test_unique_centroid_subsample():
    centroids = np.array([[0.0, 0.0], [10.0, 10.0], [-10.0, 0.0]])
    frames = np.array([[9.0, 9.0], [0.0, 1.0], [10.0, 9.0], [1.0, 0.0]])

    np.testing.assert_array_equal(unique_centroid_subsample(frames, centroids), frames[:2])

    with pytest.raises(InputError):
        unique_centroid_subsample(frames, np.zeros((2, 3)))


def test_subsample_frames(rng):
    frames = np.arange(10.0)[:, None]

    np.testing.assert_array_equal(subsample_frames(frames, 4)[:, 0], [0.0, 3.0, 6.0, 9.0])
    np.testing.assert_array_equal(subsample_frames(frames, 20), frames)

    picked = subsample_frames(frames, 5, Subsample.RANDOM, rng)[:, 0]
    assert len(set(picked)) == 5
    assert list(picked) == sorted(picked)

    with pytest.raises(InputError):
        subsample_frames(frames, 5, Subsample.RANDOM)


def test_pad_truncate():
    frames = np.ones((3, 2))
    padded, valid = pad_truncate(frames, 5)
    assert valid == 3
    np.testing.assert_array_equal(padded, np.vstack([np.ones((3, 2)), np.zeros((2, 2))]))

    long = np.arange(14.0).reshape(7, 2)
    padded, valid = pad_truncate(long, 5)
    assert valid == 5
    np.testing.assert_array_equal(padded, long[:5])


def test_statistics_follow_a_shift(rng):
    shift = 17.0 / 255
    frames = rng.integers(0, 200, size=(30, 4)) / 255 + rng.uniform(-0.3, 0.3, size=(30, 4)) / 255
    before, after = frame_statistics(frames), frame_statistics(frames + shift)

    for moved in ('mean', 'median', 'minimum', 'maximum', 'mode'):
        np.testing.assert_allclose(getattr(after, moved), getattr(before, moved) + shift, rtol=0, atol=1e-12)
    np.testing.assert_allclose(after.std, before.std, rtol=0, atol=1e-12)
    assert after.length == before.length


def test_larger_threshold_never_adds_cuts(rng):
    config = GeneratorConfig(videos=20, vocabulary_size=5, video_dim=6, audio_dim=2, min_frames=5,
                             max_frames=25, max_scenes=4)
    dataset = generate_synthetic(config, NoiseConfig(), seed=8)
    thresholds = np.linspace(0.05, 2.0, 40)

    for frames in [record.frames for record in dataset.records] + [rng.normal(size=(30, 3))]:
        cuts = [set(segment_scenes(frames, tau).boundaries) for tau in thresholds]
        assert all(later <= earlier for earlier, later in zip(cuts, cuts[1:]))


def test_kmeans_with_one_centroid_per_vector(rng):
    vectors = rng.standard_normal((6, 3))
    vocabulary = kmeans_fit(vectors, 6, seed=2)

    assert vocabulary.inertia == 0.0
    assert sorted(map(tuple, vocabulary.centroids)) == sorted(map(tuple, vectors))


def test_kmeans_with_one_centroid(rng):
    vectors = rng.standard_normal((25, 4))
    vocabulary = kmeans_fit(vectors, 1)

    np.testing.assert_allclose(vocabulary.centroids, vectors.mean(axis=0, keepdims=True))
    assert vocabulary.inertia == pytest.approx(((vectors - vectors.mean(axis=0)) ** 2).sum())


def test_kmeans_splits_a_rectangle_along_its_long_side():
    corners = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 1.0], [10.0, 1.0]])
    vocabulary = kmeans_fit(corners, 2, seed=0)

    np.testing.assert_allclose(sorted(map(tuple, vocabulary.centroids)), [(0.0, 0.5), (10.0, 0.5)])
    assert vocabulary.inertia == pytest.approx(1.0)


def test_kmeans_needs_an_iteration(rng):
    with pytest.raises(InputError):
        kmeans_fit(rng.standard_normal((10, 2)), 2, max_iter=0)


def first_per_nearest_centroid(frames, centroids):
    kept, seen = [], set()
    for frame in frames:
        distances = [float(np.sum((frame - centroid) ** 2)) for centroid in centroids]
        nearest = distances.index(min(distances))
        if nearest not in seen:
            seen.add(nearest)
            kept.append(frame)
    return np.array(kept)


def test_unique_centroid_subsample_matches_a_direct_scan(rng):
    for _ in range(200):
        frames = rng.normal(size=(int(rng.integers(1, 15)), 3))
        centroids = rng.normal(size=(int(rng.integers(1, 6)), 3))

        kept = unique_centroid_subsample(frames, centroids)
        np.testing.assert_array_equal(kept, first_per_nearest_centroid(frames, centroids))
        assert len(kept) <= min(len(frames), len(centroids))
