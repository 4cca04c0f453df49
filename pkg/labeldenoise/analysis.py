"""
Error analysis of ranked predictions.

Per video, a positive label is a true positive when it scores strictly above every negative label and a
false negative otherwise; a negative label among the top-ranked predictions is a false positive when it
scores strictly above at least one positive. Per-label precision, recall and F1 follow from the counts,
and labels are bucketed by their training-sample count at powers of 2.
"""
import json
import logging
import os
from collections import defaultdict
from dataclasses import asdict, dataclass

import numpy as np

from .enums import ErrorClass
from .errors import InputError

logger = logging.getLogger(__name__)

TOP = 20
UNKNOWN_GROUP = 'unknown'


class ErrorTaxonomy:
    """
    :ivar classes: (video id, label) to :class:`~labeldenoise.enums.ErrorClass`.
    :ivar vocabulary_size: Number of labels.
    """

    def __init__(self, classes, vocabulary_size):
        self.classes = classes
        self.vocabulary_size = vocabulary_size

    def counts(self):
        """Per-label TP, FP and FN counts, each a length-L integer array."""
        counts = {kind: np.zeros(self.vocabulary_size, dtype=np.int64) for kind in ErrorClass}
        for (_, label), kind in self.classes.items():
            counts[kind][label] += 1
        return counts

    def of_video(self, record_id):
        return {label: kind for (video, label), kind in self.classes.items() if video == record_id}

    def summary(self):
        counts = self.counts()
        return {kind.value: int(counts[kind].sum()) for kind in ErrorClass}


def _ranked(scores):
    return sorted(scores.items(), key=lambda item: (-item[1], item[0]))


def error_taxonomy(scores, truth, vocabulary_size, top=TOP):
    """Classify every positive label and every top-ranked negative label of every video.

    :param scores: {id: {label: score}}, covering at least the top-ranked labels and all positives.
    :param truth: {id: set of positive labels}.
    :param top: How many top-ranked labels are FP candidates.
    :return: :class:`ErrorTaxonomy`
    """
    classes = {}
    for record_id, video_scores in scores.items():
        positives = truth.get(record_id, set())
        missing = [label for label in positives if label not in video_scores]
        if missing:
            raise InputError(f"No score for positive label(s) {sorted(missing)} of {record_id!r}.")

        negatives = [score for label, score in video_scores.items() if label not in positives]
        highest_negative = max(negatives, default=-np.inf)
        for label in positives:
            kind = ErrorClass.TP if video_scores[label] > highest_negative else ErrorClass.FN
            classes[(record_id, label)] = kind

        lowest_positive = min((video_scores[label] for label in positives), default=np.inf)
        for label, score in _ranked(video_scores)[:top]:
            if label not in positives and score > lowest_positive:
                classes[(record_id, label)] = ErrorClass.FP

    return ErrorTaxonomy(classes, vocabulary_size)


def scores_for_analysis(matrix, ids, truth, top=TOP):
    """Reduce a full score matrix to the top-ranked labels, the positives and the highest-scored negative
    of every video."""
    matrix = np.asarray(matrix, dtype=np.float64)
    order = np.argsort(-matrix, axis=1, kind='stable')
    scores = {}
    for row, record_id in enumerate(ids):
        positives = set(truth.get(record_id, ()))
        labels = set(int(label) for label in order[row, :top]) | positives
        negative = next((int(label) for label in order[row] if label not in positives), None)
        if negative is not None:
            labels.add(negative)
        scores[record_id] = {label: float(matrix[row, label]) for label in sorted(labels)}
    return scores


@dataclass
class LabelReport:
    """
    :ivar flagged: True when precision or recall has a zero denominator and is reported as 0.
    :ivar bucket: Lower bound of the power-of-2 training-count bucket, 0 for unseen labels.
    """
    label: int
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    train_count: int
    bucket: int
    flagged: bool


def count_bucket(count):
    return 0 if count <= 0 else 1 << (int(count).bit_length() - 1)


def per_label_report(taxonomy, train_counts):
    """Precision, recall and F1 of every label.

    :param train_counts: Training samples per label, indexable by label.
    :return: [LabelReport] ordered by label.
    """
    counts = taxonomy.counts()
    report = []
    for label in range(taxonomy.vocabulary_size):
        tp, fp, fn = (int(counts[kind][label]) for kind in (ErrorClass.TP, ErrorClass.FP, ErrorClass.FN))
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        train_count = int(train_counts[label])
        report.append(LabelReport(label, tp, fp, fn, precision, recall, f1, train_count,
                                  count_bucket(train_count), flagged=not (tp + fp and tp + fn)))
    return report


def group_accuracy(report, groups):
    """Mean label F1 and positive-example count per group; labels without a group go to ``unknown``.

    :param groups: {label: group name}
    :return: {group: {'mean_f1': float, 'positives': int, 'labels': int}}, groups without labels omitted.
    """
    members = defaultdict(list)
    for row in report:
        members[groups.get(row.label, UNKNOWN_GROUP)].append(row)

    return {group: {'mean_f1': float(np.mean([row.f1 for row in rows])),
                    'positives': sum(row.tp + row.fn for row in rows),
                    'labels': len(rows)}
            for group, rows in sorted(members.items())}


def f1_histogram(report, bins=10):
    counts, edges = np.histogram([row.f1 for row in report], bins=bins, range=(0.0, 1.0))
    return counts, edges


def precision_recall_heatmap(report, bins=10):
    """bins x bins label counts, rows by precision and columns by recall."""
    counts, _, _ = np.histogram2d([row.precision for row in report], [row.recall for row in report],
                                  bins=bins, range=[[0.0, 1.0], [0.0, 1.0]])
    return counts.astype(np.int64)


def f1_by_count(report):
    """Per training-count bucket: number of labels and their mean F1, ordered by bucket."""
    buckets = defaultdict(list)
    for row in report:
        buckets[row.bucket].append(row.f1)
    return [(bucket, len(values), float(np.mean(values))) for bucket, values in sorted(buckets.items())]


def write_analysis(out_dir, taxonomy, report, groups=None, bins=10):
    """Write analysis.json, heatmap.tsv, f1_by_count.tsv, f1_hist.tsv and, with a group map, groups.tsv.

    :return: The summary written into analysis.json.
    """
    os.makedirs(out_dir, exist_ok=True)
    summary = {
        'counts': taxonomy.summary(),
        'mean_f1': float(np.mean([row.f1 for row in report])) if report else 0.0,
        'labels': [asdict(row) for row in report],
    }
    if groups is not None:
        summary['groups'] = group_accuracy(report, groups)

    with open(os.path.join(out_dir, 'analysis.json'), 'w', encoding='utf-8') as f:
        json.dump(summary, f, sort_keys=True, indent=2)
        f.write('\n')

    heatmap = precision_recall_heatmap(report, bins)
    with open(os.path.join(out_dir, 'heatmap.tsv'), 'w', encoding='utf-8', newline='\n') as f:
        f.write('precision\\recall\t' + '\t'.join(f"{i / bins:g}" for i in range(bins)) + '\n')
        for i, row in enumerate(heatmap):
            f.write(f"{i / bins:g}\t" + '\t'.join(str(int(v)) for v in row) + '\n')

    with open(os.path.join(out_dir, 'f1_by_count.tsv'), 'w', encoding='utf-8', newline='\n') as f:
        f.write('bucket\tlabels\tmean_f1\n')
        for bucket, labels, mean_f1 in f1_by_count(report):
            f.write(f"{bucket}\t{labels}\t{mean_f1:.9g}\n")

    counts, edges = f1_histogram(report, bins)
    with open(os.path.join(out_dir, 'f1_hist.tsv'), 'w', encoding='utf-8', newline='\n') as f:
        f.write('f1_low\tf1_high\tlabels\n')
        for low, high, count in zip(edges[:-1], edges[1:], counts):
            f.write(f"{low:g}\t{high:g}\t{int(count)}\n")

    if groups is not None:
        with open(os.path.join(out_dir, 'groups.tsv'), 'w', encoding='utf-8', newline='\n') as f:
            f.write('group\tmean_f1\tpositives\tlabels\n')
            for group, values in summary['groups'].items():
                f.write(f"{group}\t{values['mean_f1']:.9g}\t{values['positives']}\t{values['labels']}\n")

    logger.info(f"Wrote analysis of {len(report)} labels to {out_dir}.")
    return summary
