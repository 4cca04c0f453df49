import logging

import numpy as np

from ..errors import FormatError, InputError

logger = logging.getLogger(__name__)


class FoldSplit:
    """Partition of record ids into k disjoint folds.

    :ivar k: Number of folds.
    :type k: int
    :ivar assignment: Record id to fold index in [0, k).
    :type assignment: {str: int}
    """

    def __init__(self, k, assignment):
        self.k = k
        self.assignment = dict(assignment)

    def __eq__(self, other):
        return isinstance(other, FoldSplit) and self.k == other.k and self.assignment == other.assignment

    def sizes(self):
        return [sum(1 for fold in self.assignment.values() if fold == f) for f in range(self.k)]

    def check(self, dataset):
        """Raise unless the split covers exactly the records of `dataset`."""
        if set(self.assignment) != set(dataset.ids):
            raise InputError("Fold split does not cover the dataset's record ids.")
        if any(not 0 <= fold < self.k for fold in self.assignment.values()):
            raise InputError(f"Fold index outside [0, {self.k}).")
        return self

    def fold_of(self, dataset):
        """Fold index per record, in dataset order."""
        return np.array([self.assignment[record.id] for record in dataset.records], dtype=np.int64)

    def holdout_indices(self, dataset, fold):
        return np.flatnonzero(self.fold_of(dataset) == fold)

    def train_indices(self, dataset, fold):
        return np.flatnonzero(self.fold_of(dataset) != fold)


def make_folds(dataset, k, seed):
    """Shuffle the records with a seeded generator and deal them round-robin into k folds.

    :param dataset: The dataset to split, or a plain list of record ids.
    :param k: Number of folds, at least 2 and at most the record count.
    :param seed: Shuffle seed.
    :return: :class:`FoldSplit`
    """
    ids = dataset.ids if hasattr(dataset, 'ids') else list(dataset)
    if k < 2:
        raise InputError(f"Need at least 2 folds, got {k}.")
    if k > len(ids):
        raise InputError(f"Cannot split {len(ids)} records into {k} folds.")

    rng = np.random.default_rng(np.random.SeedSequence([seed, k]))
    order = rng.permutation(len(ids))
    assignment = {ids[position]: i % k for i, position in enumerate(order)}

    split = FoldSplit(k, assignment)
    logger.debug(f"Fold sizes {split.sizes()}.")
    return split


def write_folds(path, split):
    """Write one `id<TAB>fold` line per record, in sorted id order."""
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        for record_id in sorted(split.assignment):
            f.write(f"{record_id}\t{split.assignment[record_id]}\n")


def read_folds(path):
    assignment = {}
    with open(path, encoding='utf-8') as f:
        for number, line in enumerate(f, start=1):
            line = line.rstrip('\n')
            if not line:
                continue

            try:
                record_id, fold = line.split('\t')
                fold = int(fold)
            except ValueError:
                raise FormatError(f"{path}: line {number}: expected 'id<TAB>fold'.")

            if fold < 0 or record_id in assignment:
                raise FormatError(f"{path}: line {number}: invalid or duplicate entry.")
            assignment[record_id] = fold

    if not assignment:
        raise FormatError(f"{path}: no folds.")

    return FoldSplit(max(assignment.values()) + 1, assignment)
