import numpy as np
import pytest
from sklearn.metrics import average_precision_score

from labeldenoise.errors import InputError
from labeldenoise.gap import GapScorer, gap_at_n, gap_from_matrix, top_n_predictions


def brute_force_gap(predictions, truth, n):
    pooled = []
    for record_id, pairs in predictions.items():
        for label, score in pairs[:n]:
            pooled.append((-score, record_id, label))
    pooled.sort()

    total = sum(len(labels) for labels in truth.values())
    hits, accumulated = 0, 0.0
    for rank, (_, record_id, label) in enumerate(pooled, start=1):
        if label in truth.get(record_id, ()):
            hits += 1
            accumulated += hits / rank
    return accumulated / total


def random_instance(rng, ties=False):
    videos = int(rng.integers(1, 7))
    vocabulary_size = int(rng.integers(2, 9))
    ids = [f'v{i}' for i in rng.permutation(videos)]

    scores = rng.random((videos, vocabulary_size))
    if ties:
        scores = np.round(scores, 1)

    truth = {record_id: set(int(label) for label in np.flatnonzero(rng.random(vocabulary_size) < 0.3))
             for record_id in ids}
    truth[ids[0]].add(int(rng.integers(vocabulary_size)))
    return ids, scores, truth, int(rng.integers(1, vocabulary_size + 1))


def test_documented_example():
    assert gap_at_n({'v': [(1, 0.9), (0, 0.8)]}, {'v': {0}}, n=20) == 0.5


def test_perfect_and_truncated_rankings():
    truth = {'a': {0, 1}, 'b': {2}}
    predictions = {'a': [(0, 0.9), (1, 0.8), (2, 0.1)], 'b': [(2, 0.7), (0, 0.2)]}
    assert gap_at_n(predictions, truth, n=3) == pytest.approx(1.0)

    # a's second positive is cut off, b's positive still ranks second overall
    assert gap_at_n(predictions, truth, n=1) == pytest.approx((1.0 + 1.0) / 3)


def test_ties_break_by_id_then_label():
    truth = {'a': {1}, 'b': {0}}
    predictions = {'b': [(0, 0.5)], 'a': [(0, 0.5), (1, 0.5)]}
    # pooled order: (a, 0), (a, 1), (b, 0)
    assert gap_at_n(predictions, truth) == pytest.approx((1 / 2 + 2 / 3) / 2)


def test_undefined_and_invalid_inputs():
    with pytest.raises(InputError):
        gap_at_n({'a': [(0, 1.0)]}, {'a': set()})
    with pytest.raises(InputError):
        gap_at_n({'a': [(0, 1.0), (0, 0.5)]}, {'a': {0}})
    assert gap_at_n({}, {'a': {0}}) == 0.0


def test_matches_brute_force(rng):
    for trial in range(1000):
        ids, scores, truth, n = random_instance(rng, ties=trial % 2 == 0)
        predictions = top_n_predictions(scores, ids, n)
        expected = brute_force_gap(predictions, truth, n)
        assert gap_at_n(predictions, truth, n) == pytest.approx(expected, rel=0, abs=1e-12)


def test_scorer_matches_prediction_lists(rng):
    for trial in range(300):
        ids, scores, truth, n = random_instance(rng, ties=trial % 3 == 0)
        expected = gap_at_n(top_n_predictions(scores, ids, n), truth, n)
        assert GapScorer(ids, truth, scores.shape[1], n)(scores) == pytest.approx(expected)
        assert gap_from_matrix(scores, ids, truth, n) == pytest.approx(expected)


def test_matches_reference_average_precision(rng):
    for _ in range(200):
        ids, scores, truth, n = random_instance(rng)
        predictions = top_n_predictions(scores, ids, n)

        relevant, pooled = [], []
        for record_id, pairs in predictions.items():
            for label, score in pairs:
                relevant.append(label in truth[record_id])
                pooled.append(score)

        retrieved = sum(relevant)
        total = sum(len(labels) for labels in truth.values())
        expected = 0.0 if retrieved == 0 else average_precision_score(relevant, pooled) * retrieved / total
        assert gap_at_n(predictions, truth, n) == pytest.approx(expected)


def test_top_n_predictions():
    scores = np.array([[0.1, 0.7, 0.7, 0.3]])
    assert top_n_predictions(scores, ['a'], n=3) == {'a': [(1, 0.7), (2, 0.7), (3, 0.3)]}

    with pytest.raises(InputError):
        top_n_predictions(scores, ['a', 'b'])


def test_scorer_rejects_wrong_shape():
    scorer = GapScorer(['a'], {'a': {0}}, 3)
    with pytest.raises(InputError):
        scorer(np.zeros((1, 2)))


@pytest.mark.parametrize('transform', [
    lambda s: s ** 3,
    lambda s: np.log(s + 0.5),
    lambda s: 2.0 * s - 7.0,
])
def test_strictly_increasing_transforms_keep_the_score(transform, rng):
    for _ in range(200):
        ids, scores, truth, n = random_instance(rng)
        expected = gap_from_matrix(scores, ids, truth, n)
        assert gap_from_matrix(transform(scores), ids, truth, n) == expected
