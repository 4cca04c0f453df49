"""
Denoising by distillation.

The out-of-fold predictions of several first-level runs are combined with simplex weights fitted on OOF GAP;
the combination is a soft-label matrix that students fit with BCE. The final model freezes one feature
extractor per student, concatenates their penultimate activations and trains a single affine + sigmoid
head on the soft labels.
"""
import json
import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .config import canonical
from .diff import adam_step, init_adam
from .enums import LabelSource, Mode, TargetKind
from .errors import FormatError, InputError
from .frames import CentroidVocabulary
from .gap import GapScorer, top_n_predictions
from .losses import bce, bce_grad
from .models import HeadConfig, ModelParams, init_model, parameter_count, predict
from .models.builder import PENULTIMATE, PROBABILITIES
from .stream.buffer import ByteReader
from .stream.modelfile import config_size, decode_model, encode_model, model_bytes
from .stream.predictions import read_predictions, write_predictions
from .stream.writer import ByteWriter
from .training import EVAL_BATCH, batches, run_jobs, train_cv
from .views import prepare_inputs

logger = logging.getLogger(__name__)

WEIGHT_UNITS = 100
WEIGHT_STEPS = (5, 1)


class SoftLabelMatrix:
    """Per (record, label) confidences in [0, 1].

    :ivar ids: Record ids, one per row.
    :ivar values: N x L matrix.
    """

    def __init__(self, ids, values):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != len(ids):
            raise InputError(f"Soft labels of shape {values.shape} for {len(ids)} ids.")
        if len(set(ids)) != len(ids):
            raise InputError("Soft labels cover a record twice.")
        if np.any(values < 0.0) or np.any(values > 1.0) or not np.all(np.isfinite(values)):
            raise InputError("Soft labels must lie in [0, 1].")

        self.ids = list(ids)
        self.values = values

    @property
    def vocabulary_size(self):
        return self.values.shape[1]

    def aligned(self, ids):
        """Rows reordered to `ids`; every id must be covered."""
        position = {record_id: row for row, record_id in enumerate(self.ids)}
        try:
            return self.values[[position[record_id] for record_id in ids]]
        except KeyError as e:
            raise InputError(f"Soft labels do not cover record {e.args[0]!r}.")

    def __len__(self):
        return len(self.ids)


def write_soft_labels(path, soft):
    """Soft labels in the predictions format, the full vocabulary per record."""
    write_predictions(path, top_n_predictions(soft.values, soft.ids, soft.vocabulary_size))


def read_soft_labels(path, vocabulary_size):
    predictions = read_predictions(path, vocabulary_size)
    values = np.zeros((len(predictions), vocabulary_size))
    for row, pairs in enumerate(predictions.values()):
        for label, score in pairs:
            values[row, label] = score
    try:
        return SoftLabelMatrix(list(predictions), values)
    except InputError as e:
        raise FormatError(f"{path}: {e}")


def oof_soft_labels(trained):
    """One soft-label matrix per run, its OOF predictions clamped to [0, 1].

    :param trained: [TrainedCV] over the same folds and records.
    """
    if not trained:
        raise InputError("Need at least one run.")

    reference = trained[0]
    for run in trained[1:]:
        if run.folds != reference.folds or run.ids != reference.ids:
            raise InputError("Runs were trained on different folds or records.")

    return [SoftLabelMatrix(run.ids, np.clip(run.oof, 0.0, 1.0)) for run in trained]


@dataclass
class EnsembleWeights:
    """
    :ivar weights: One non-negative weight per model, summing to 1.
    :ivar gap: OOF GAP of the weighted combination.
    :ivar singleton_gaps: OOF GAP of every model alone.
    """
    weights: tuple
    gap: float
    singleton_gaps: tuple

    def as_dict(self, names=None):
        names = names or [f"model{i}" for i in range(len(self.weights))]
        return {
            'models': list(names),
            'weights': list(self.weights),
            'singleton_gaps': list(self.singleton_gaps),
            'gap': self.gap,
        }


def _check_aligned(matrices):
    if not matrices:
        raise InputError("Need at least one soft-label matrix.")
    reference = matrices[0]
    for matrix in matrices[1:]:
        if matrix.ids != reference.ids or matrix.values.shape != reference.values.shape:
            raise InputError("Soft-label matrices are not aligned.")


def combine(matrices, weights):
    """Elementwise convex combination.

    :param matrices: [SoftLabelMatrix] over the same records.
    :param weights: Non-negative weights summing to 1.
    :return: :class:`SoftLabelMatrix`
    """
    _check_aligned(matrices)
    weights = np.asarray(weights, dtype=np.float64)
    if len(weights) != len(matrices):
        raise InputError(f"{len(weights)} weights for {len(matrices)} matrices.")
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
        raise InputError("Ensemble weights must lie on the simplex.")

    total = np.zeros_like(matrices[0].values)
    for matrix, weight in zip(matrices, weights):
        total = total + weight * matrix.values
    return SoftLabelMatrix(matrices[0].ids, np.clip(total, 0.0, 1.0))


def fit_ensemble_weights(matrices, truth, n=20):
    """Simplex weights maximizing OOF GAP by coordinate ascent.

    Starts with all weight on the best single model and repeatedly applies the pairwise transfer of 0.05,
    then 0.01, that improves GAP the most; stops when no transfer improves it strictly.

    :param matrices: [SoftLabelMatrix] over the same records.
    :param truth: {id: set of labels}, the noisy labels.
    :return: :class:`EnsembleWeights`
    """
    _check_aligned(matrices)
    if not truth:
        raise InputError("Ensemble weights need ground truth.")

    scorer = GapScorer(matrices[0].ids, truth, matrices[0].vocabulary_size, n)

    def score(units):
        return scorer(combine(matrices, units / WEIGHT_UNITS).values)

    singletons = tuple(scorer(matrix.values) for matrix in matrices)
    units = np.zeros(len(matrices), dtype=np.int64)
    units[int(np.argmax(singletons))] = WEIGHT_UNITS
    current = max(singletons)

    for step in WEIGHT_STEPS:
        while True:
            best_move, best_gap = None, current
            for source in np.flatnonzero(units >= step):
                for target in range(len(matrices)):
                    if target == source:
                        continue
                    moved = units.copy()
                    moved[source] -= step
                    moved[target] += step
                    gap = score(moved)
                    if gap > best_gap:
                        best_move, best_gap = moved, gap

            if best_move is None:
                break
            logger.debug(f"Weight transfer of {step / WEIGHT_UNITS}: GAP {current:.6f} -> {best_gap:.6f}")
            units, current = best_move, best_gap

    weights = tuple(float(u) / WEIGHT_UNITS for u in units)
    logger.info(f"Ensemble weights {weights}, OOF GAP {current:.6f} (best single {max(singletons):.6f}).")
    return EnsembleWeights(weights, current, singletons)


def distill_student(soft, dataset, folds, student_config, train_config, jobs=1):
    """Train a student on soft labels with BCE.

    :return: :class:`~labeldenoise.training.TrainedCV` tagged as distilled.
    """
    if train_config.loss.is_ranking:
        raise InputError(f"Distillation fits soft labels with bce, not {train_config.loss.value}.")

    return train_cv(dataset, folds, student_config, replace(train_config, targets=TargetKind.SOFT),
                    targets=soft, jobs=jobs)


def fit_head(features, targets, train_config, seed=None):
    """Train the zero-initialized affine + sigmoid head with BCE and Adam.

    :param features: N x W frozen features.
    :param targets: N x L soft labels.
    :param train_config: Epochs, batch size and Adam settings.
    :return: :class:`~labeldenoise.models.params.ModelParams` of a head.
    """
    tc = train_config
    seed = tc.seed if seed is None else seed
    head = init_model(HeadConfig(features.shape[1], targets.shape[1]), seed)
    graph = head.graph
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    tensors = dict(head.tensors)
    state = init_adam(tensors, graph.trainable, **tc.adam())

    for epoch in range(1, tc.epochs + 1):
        losses = []
        for batch in batches(rng.permutation(len(features)), tc.batch_size):
            trace = graph.evaluate({'features': features[batch]}, tensors, Mode.TRAIN, rng)
            p = trace[PROBABILITIES]
            losses.append(bce(p, targets[batch]))
            tensors, state = adam_step(tensors, graph.backward(trace, {PROBABILITIES: bce_grad(p, targets[batch])}),
                                       state)
        logger.debug(f"Head epoch {epoch}: loss {np.mean(losses):.6f}")

    return ModelParams(head.config, tensors)


@dataclass
class FinalModel:
    """
    :ivar students: One frozen feature extractor per student.
    :ivar vocabularies: Centroid vocabulary of each student's view, or None.
    :ivar head: Classification layer over the concatenated penultimate features.
    :ivar oof: Stacked out-of-fold probabilities, when computed.
    :ivar oof_gap: OOF GAP of the stacked model against noisy labels.
    """
    students: list
    vocabularies: list
    head: object
    oof: Optional[np.ndarray] = None
    oof_gap: Optional[float] = None

    @property
    def input_width(self):
        return sum(student.penultimate_width for student in self.students)


def _extractor(run):
    """The fold model a student contributes: highest holdout GAP, lowest fold on ties."""
    return run.models[int(np.argmax(run.fold_gap))]


def stack_penultimate(students, soft, dataset, folds, head_config, jobs=1):
    """Freeze the students and train a head on their concatenated OOF penultimate features.

    The OOF features of a record come from the fold model that did not see it, so the head is trained on
    the outputs of k different extractors per student. The final model keeps only the best fold model of
    each student (see :func:`predict_final`), and its features at inference follow that one extractor's
    distribution rather than the mix the head was fitted on.

    :param students: [TrainedCV] over `folds`.
    :param soft: :class:`SoftLabelMatrix` the head fits.
    :param head_config: :class:`~labeldenoise.training.TrainConfig` of the head.
    :return: :class:`FinalModel`
    """
    if not students:
        raise InputError("Stacking needs at least one student.")
    for run in students:
        if run.folds != folds:
            raise InputError("A student was trained on different folds.")
        if any(PENULTIMATE not in params.graph.outputs for params in run.models):
            raise InputError(f"A {run.model_config.architecture.value} student declares no penultimate layer.")
    folds.check(dataset)

    features = np.concatenate([run.oof_outputs(dataset, PENULTIMATE) for run in students], axis=1)
    targets = soft.aligned(dataset.ids)
    logger.info(f"Stacking {len(students)} students, head input width {features.shape[1]}.")

    fold_of = folds.fold_of(dataset)
    oof = np.zeros(targets.shape)

    def fold_head(fold):
        train = np.flatnonzero(fold_of != fold)
        holdout = np.flatnonzero(fold_of == fold)
        head = fit_head(features[train], targets[train], head_config, seed=head_config.seed + fold)
        return holdout, predict(head, {'features': features[holdout]})[PROBABILITIES]

    for holdout, scores in run_jobs([lambda fold=fold: fold_head(fold) for fold in range(folds.k)], jobs):
        oof[holdout] = scores

    truth = dataset.truth(LabelSource.NOISY)
    oof_gap = GapScorer(dataset.ids, truth, dataset.vocabulary_size, head_config.n)(oof)
    logger.info(f"Stacked OOF GAP {oof_gap:.6f}.")

    head = fit_head(features, targets, head_config)
    return FinalModel([_extractor(run) for run in students], [run.vocabulary for run in students], head,
                      oof, oof_gap)


def final_features(final, dataset):
    """Concatenated penultimate features of the frozen extractors."""
    parts = []
    for params, vocabulary in zip(final.students, final.vocabularies):
        inputs = prepare_inputs(dataset, params.config.view, params.config.view_options, vocabulary)
        parts.append(predict(params, inputs, (PENULTIMATE,), EVAL_BATCH)[PENULTIMATE])
    return np.concatenate(parts, axis=1)


def predict_final(final, dataset):
    """N x L probabilities of the final stacked model."""
    return predict(final.head, {'features': final_features(final, dataset)}, (PROBABILITIES,),
                   EVAL_BATCH)[PROBABILITIES]


MAGIC = b'LDNF'
VERSION = 1


def manifest(final):
    """Size breakdown of the container parts."""
    return {
        'students': [{'architecture': params.architecture.value, 'config': json.loads(canonical(params.config)),
                      'parameters': parameter_count(params), 'bytes': len(model_bytes(params))}
                     for params in final.students],
        'head': {'input_width': final.head.config.input_dim, 'parameters': parameter_count(final.head),
                 'bytes': len(model_bytes(final.head))},
    }


def encode_final(final):
    """
    Layout: "LDNF" u32 version u32 student_count, per student u8 centroid flag [u32 k u32 D k x D f64]
    and a model file image, then the head's model file image and a u32-length JSON manifest.
    """
    writer = ByteWriter()
    writer.raw(MAGIC)
    writer.pack('II', VERSION, len(final.students))

    for params, vocabulary in zip(final.students, final.vocabularies):
        if vocabulary is None:
            writer.pack('B', 0)
        else:
            writer.pack('BII', 1, *vocabulary.centroids.shape)
            writer.array(vocabulary.centroids, '<f8')
        encode_model(params, writer)

    encode_model(final.head, writer)
    writer.text(json.dumps(manifest(final), sort_keys=True, separators=(',', ':')), 'I')
    return writer


def final_bytes(final):
    return encode_final(final).getvalue()


def save_final(final, path):
    """Write the container.

    :return: Size in bytes.
    """
    return encode_final(final).save(path)


def load_final(path):
    reader = ByteReader.open(path)
    if reader.read_exactly(4) != MAGIC:
        raise FormatError(f"{path}: not a final-model file (bad magic).")

    version, count = reader.unpack('II')
    if version != VERSION:
        raise FormatError(f"{path}: unsupported final-model version {version}.")

    students, vocabularies = [], []
    for _ in range(count):
        vocabulary = None
        if reader.scalar('B'):
            k, dim = reader.unpack('II')
            vocabulary = CentroidVocabulary(reader.array(k * dim, '<f8').reshape(k, dim), 0.0)
        vocabularies.append(vocabulary)
        students.append(decode_model(reader))

    head = decode_model(reader)
    reader.text('I')
    if not reader.at_eof():
        raise FormatError(f"{path}: {reader.read_available} trailing bytes.")

    return FinalModel(students, vocabularies, head)


@dataclass
class BudgetCheck:
    passed: bool
    size_bytes: int
    budget_bytes: int


def budget_check(final, budget_bytes):
    """Compare the serialized size of the final model with a byte budget."""
    size = len(final_bytes(final))
    passed = size <= budget_bytes
    if not passed:
        logger.warning(f"Final model of {size} bytes exceeds the budget of {budget_bytes} bytes.")
    return BudgetCheck(passed, size, budget_bytes)


def estimate_final_size(student_configs, vocabulary_size):
    """Serialized model bytes of a final model built from these student configs, without training it.

    Counts the student and head model images; centroid blocks and the manifest are left out.
    """
    head_width = 0
    for config in student_configs:
        head_width += config.head.inner_size if hasattr(config, 'head') else config.inner_size
    return (sum(config_size(config) for config in student_configs)
            + config_size(HeadConfig(head_width, vocabulary_size)))
