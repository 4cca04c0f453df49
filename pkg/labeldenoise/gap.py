"""
Global average precision at n.

The top-n predictions of every video are pooled and sorted by descending score, ties broken by
(video id, label index) ascending. Walking the pooled list, every positive pair contributes the precision
at its rank; the sum is divided by the number of positive (video, label) pairs in the ground truth.

>>> gap_at_n({'v': [(1, 0.9), (0, 0.8)]}, {'v': {0}}, n=20)
0.5
"""
import logging

import numpy as np

from .errors import InputError

logger = logging.getLogger(__name__)


def top_n_predictions(scores, ids, n=20):
    """Ranked predictions from a score matrix.

    :param scores: N x L matrix, row i belongs to ``ids[i]``.
    :param ids: Record ids.
    :param n: Predictions kept per video, ties broken by label index ascending.
    :return: {id: [(label, score)]}
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape[0] != len(ids):
        raise InputError(f"{scores.shape[0]} score rows for {len(ids)} ids.")

    order = np.argsort(-scores, axis=1, kind='stable')[:, :n]
    return {record_id: [(int(label), float(scores[row, label])) for label in order[row]]
            for row, record_id in enumerate(ids)}


def gap_at_n(predictions, truth, n=20):
    """
    :param predictions: {id: [(label, score)]} sorted by descending score; only the first n are used.
    :param truth: {id: set of positive labels}.
    :param n: Cut-off per video.
    :return: float in [0, 1]
    """
    positives = sum(len(labels) for labels in truth.values())
    if positives == 0:
        raise InputError("GAP is undefined without positive labels.")

    video_rank = {record_id: rank for rank, record_id in enumerate(sorted(predictions))}
    rows, labels, scores, relevant = [], [], [], []
    for record_id, pairs in predictions.items():
        seen = set()
        positive = truth.get(record_id, ())
        for label, score in pairs[:n]:
            if label in seen:
                raise InputError(f"Duplicate prediction ({record_id!r}, {label}).")
            seen.add(label)
            rows.append(video_rank[record_id])
            labels.append(label)
            scores.append(score)
            relevant.append(label in positive)

    if not scores:
        return 0.0

    order = np.lexsort((np.array(labels), np.array(rows), -np.array(scores, dtype=np.float64)))
    relevant = np.array(relevant, dtype=bool)[order]
    hits = np.cumsum(relevant)
    ranks = np.arange(1, len(relevant) + 1)
    return float(np.sum(hits[relevant] / ranks[relevant]) / positives)


class GapScorer:
    """GAP@n of score matrices against a fixed ground truth.

    Gives the same value as ``gap_at_n(top_n_predictions(scores, ids, n), truth, n)`` without building
    per-video lists, for repeated evaluation.

    :ivar positives: Number of positive (video, label) pairs in the truth.
    """

    def __init__(self, ids, truth, vocabulary_size, n=20):
        self.ids = list(ids)
        self.n = n
        self.positives = sum(len(labels) for labels in truth.values())
        if self.positives == 0:
            raise InputError("GAP is undefined without positive labels.")

        self.relevant = np.zeros((len(self.ids), vocabulary_size), dtype=bool)
        for row, record_id in enumerate(self.ids):
            labels = [label for label in truth.get(record_id, ()) if 0 <= label < vocabulary_size]
            self.relevant[row, labels] = True

        rank = {record_id: r for r, record_id in enumerate(sorted(self.ids))}
        self.video_rank = np.array([rank[record_id] for record_id in self.ids], dtype=np.int64)

    def __call__(self, scores):
        scores = np.asarray(scores, dtype=np.float64)
        if scores.shape != self.relevant.shape:
            raise InputError(f"Score matrix {scores.shape} does not match {self.relevant.shape}.")

        order = np.argsort(-scores, axis=1, kind='stable')[:, :self.n]
        top = np.take_along_axis(scores, order, axis=1).reshape(-1)
        relevant = np.take_along_axis(self.relevant, order, axis=1).reshape(-1)
        rows = np.repeat(self.video_rank, order.shape[1])

        pooled = np.lexsort((order.reshape(-1), rows, -top))
        relevant = relevant[pooled]
        hits = np.cumsum(relevant)
        ranks = np.arange(1, len(relevant) + 1)
        return float(np.sum(hits[relevant] / ranks[relevant]) / self.positives)


def gap_from_matrix(scores, ids, truth, n=20):
    """GAP@n of a full score matrix, see :func:`top_n_predictions`."""
    scores = np.asarray(scores, dtype=np.float64)
    return GapScorer(ids, truth, scores.shape[1], n)(scores)
