"""
Prediction files: one line per video, ``id<TAB>label:score,label:score,...``, scores descending and
printed with 9 significant digits.

>>> write_predictions('oof.pred', {'vid000001': [(3, 0.9), (1, 0.5)]})
>>> read_predictions('oof.pred')
{'vid000001': [(3, 0.9), (1, 0.5)]}
"""
import logging
import math

from ..errors import FormatError, InputError

logger = logging.getLogger(__name__)

SCORE_FORMAT = '.9g'


def format_score(score):
    return format(score, SCORE_FORMAT)


def _check(record_id, pairs):
    if '\t' in record_id or '\n' in record_id:
        raise InputError(f"Record id {record_id!r} contains a tab or newline.")

    labels = set()
    previous = math.inf
    for label, score in pairs:
        if not math.isfinite(score):
            raise InputError(f"Non-finite score for {record_id!r}, label {label}.")
        if score > previous:
            raise InputError(f"Predictions for {record_id!r} are not sorted by descending score.")
        if label in labels:
            raise InputError(f"Label {label} appears twice for {record_id!r}.")
        labels.add(label)
        previous = score


def write_predictions(path, predictions):
    """Write per-video ranked predictions.

    :param path: Output path.
    :param predictions: Record id to [(label, score)] sorted by descending score.
    :type predictions: {str: [(int, float)]}
    """
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        for record_id, pairs in predictions.items():
            _check(record_id, pairs)
            body = ','.join(f"{int(label)}:{format_score(float(score))}" for label, score in pairs)
            f.write(f"{record_id}\t{body}\n")


def _parse_line(path, number, line, vocabulary_size=None):
    try:
        record_id, body = line.split('\t')
    except ValueError:
        raise FormatError(f"{path}: line {number}: expected 'id<TAB>label:score,...'.")

    pairs = []
    if body:
        for item in body.split(','):
            try:
                label, score = item.split(':')
                pairs.append((int(label), float(score)))
            except ValueError:
                raise FormatError(f"{path}: line {number}: malformed pair {item!r}.")

    try:
        _check(record_id, pairs)
    except InputError as e:
        raise FormatError(f"{path}: line {number}: {e}")

    if vocabulary_size is not None:
        for label, _ in pairs:
            if not 0 <= label < vocabulary_size:
                raise FormatError(f"{path}: line {number}: label {label} outside [0, {vocabulary_size}).")

    return record_id, pairs


def read_predictions(path, vocabulary_size=None):
    """Read a predictions file written by :func:`write_predictions`.

    :param vocabulary_size: When given, every label must lie in [0, vocabulary_size).
    :return: {str: [(int, float)]} in file order.
    """
    predictions = {}
    with open(path, encoding='utf-8') as f:
        for number, line in enumerate(f, start=1):
            line = line.rstrip('\n')
            if not line:
                continue

            record_id, pairs = _parse_line(path, number, line, vocabulary_size)
            if record_id in predictions:
                raise FormatError(f"{path}: line {number}: duplicate record id {record_id!r}.")
            predictions[record_id] = pairs

    return predictions
