"""
Cross-validated training.

For every fold f a model is trained on the records outside f and predicts the records of f in eval mode,
so every record receives exactly one out-of-fold (OOF) prediction. Folds are independent jobs with their
own seed streams; ``jobs > 1`` runs them on a thread pool driven by an asyncio event loop and the results
are assembled by fold index, so the outcome does not depend on scheduling.
"""
import asyncio
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import canonical, from_dict, to_dict
from .data.folds import read_folds, write_folds
from .diff import adam_step, init_adam
from .enums import LabelSource, LambdaMode, LossKind, Mode, PairScope, TargetKind, View
from .errors import FormatError, InputError
from .frames import CentroidVocabulary
from .gap import gap_from_matrix, top_n_predictions
from .losses import loss_and_grad
from .mixup import mixup_batch
from .models import ModelParams, init_model, model_config_from_dict, predict, with_dataset_dims
from .models.builder import PROBABILITIES
from .stream.modelfile import deserialize_model, serialize_model
from .stream.predictions import read_predictions, write_predictions
from .views import fit_vocabulary, prepare_inputs

logger = logging.getLogger(__name__)

EVAL_BATCH = 512


@dataclass
class TrainConfig:
    """
    :ivar loss: Training loss.
    :ivar epochs: Epoch cap per fold.
    :ivar batch_size: Examples per optimizer step.
    :ivar warmup_steps: Steps of linear learning-rate warmup, 0 disables it.
    :ivar mixup: Mix every training batch.
    :ivar alpha: Beta(alpha, alpha) parameter of mixup.
    :ivar targets: Kind of targets the run fits, soft targets need BCE.
    :ivar patience: Stop a fold after this many epochs without a better holdout GAP; None trains all epochs.
    :ivar max_steps: Optional cap on optimizer steps per fold.
    :ivar n: GAP cut-off used for holdout evaluation.
    """
    loss: LossKind = LossKind.BCE
    epochs: int = 20
    batch_size: int = 64
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    warmup_steps: int = 0
    mixup: bool = False
    alpha: float = 0.4
    lambda_mode: LambdaMode = LambdaMode.PER_BATCH
    seed: int = 0
    targets: TargetKind = TargetKind.HARD
    top_k_neg: int = 30
    pair_scope: PairScope = PairScope.BATCH
    margin: float = 1.0
    patience: Optional[int] = 3
    max_steps: Optional[int] = None
    n: int = 20

    def validate(self):
        if self.epochs < 1:
            raise InputError(f"epochs must be at least 1, got {self.epochs}.")
        if self.batch_size < 2:
            raise InputError(f"batch_size must be at least 2 for batch-norm and mixup, got {self.batch_size}.")
        if not self.lr > 0:
            raise InputError(f"Learning rate must be positive, got {self.lr}.")
        if self.mixup and not self.alpha > 0:
            raise InputError(f"Mixup alpha must be positive, got {self.alpha}.")
        if self.loss.is_ranking and self.targets is TargetKind.SOFT:
            raise InputError(f"The {self.loss.value} loss needs hard labels, soft targets need bce.")
        if self.loss.is_ranking and self.mixup:
            raise InputError(f"Mixed targets are not binary, the {self.loss.value} loss cannot use mixup.")
        if self.patience is not None and self.patience < 1:
            raise InputError(f"patience must be at least 1, got {self.patience}.")
        if self.max_steps is not None and self.max_steps < 1:
            raise InputError(f"max_steps must be at least 1, got {self.max_steps}.")
        return self

    def adam(self):
        return {'lr': self.lr, 'beta1': self.beta1, 'beta2': self.beta2, 'eps': self.eps,
                'warmup_steps': self.warmup_steps}


@dataclass
class TrainedCV:
    """The outcome of :func:`train_cv`.

    :ivar models: One model per fold, ``models[f]`` never saw fold f.
    :ivar oof: N x L out-of-fold probabilities in dataset order.
    :ivar ids: Record ids of the rows of `oof`.
    :ivar fold_gap: Holdout GAP of every fold's kept model, against noisy labels.
    :ivar history: One entry per fold and epoch: fold, epoch, train_loss, oof_gap.
    :ivar vocabulary: Centroids used by the centroid view, if any.
    """
    model_config: object
    train_config: TrainConfig
    folds: object
    models: list
    oof: np.ndarray
    ids: list
    fold_gap: list
    history: list = field(default_factory=list)
    distilled: bool = False
    vocabulary: Optional[CentroidVocabulary] = None

    @property
    def k(self):
        return len(self.models)

    def inputs(self, dataset):
        return prepare_inputs(dataset, self.model_config.view, self.model_config.view_options, self.vocabulary)

    def oof_outputs(self, dataset, output=PROBABILITIES, inputs=None):
        """Out-of-fold values of any declared output, e.g. ``penultimate``, in dataset order."""
        inputs = inputs if inputs is not None else self.inputs(dataset)
        fold_of = self.folds.fold_of(dataset)
        rows = None
        for fold, params in enumerate(self.models):
            holdout = np.flatnonzero(fold_of == fold)
            values = predict(params, _take(inputs, holdout), (output,), EVAL_BATCH)[output]
            if rows is None:
                rows = np.zeros((len(dataset), values.shape[1]))
            rows[holdout] = values
        return rows


def _take(inputs, indices):
    return {name: value[indices] for name, value in inputs.items()}


def batches(order, batch_size):
    """Split an index order into batches; a trailing singleton joins the previous batch."""
    chunks = [order[start:start + batch_size] for start in range(0, len(order), batch_size)]
    if len(chunks) > 1 and len(chunks[-1]) == 1:
        chunks[-2] = np.concatenate(chunks[-2:])
        chunks.pop()
    return chunks


def _holdout_gap(scores, ids, truth, n):
    if not any(truth.values()):
        logger.warning("Holdout fold has no positive labels, reporting GAP 0.")
        return 0.0
    return gap_from_matrix(scores, ids, truth, n)


def train_fold(fold, config, train_config, inputs, targets, fold_of, ids, truth):
    """Train the model of one fold.

    :return: (ModelParams, holdout indices, holdout probabilities, holdout GAP, history entries)
    """
    tc = train_config
    train = np.flatnonzero(fold_of != fold)
    holdout = np.flatnonzero(fold_of == fold)
    holdout_ids = [ids[i] for i in holdout]
    holdout_truth = {record_id: truth[record_id] for record_id in holdout_ids}
    holdout_inputs = _take(inputs, holdout)

    params = init_model(config, tc.seed)
    graph = params.graph
    rng = np.random.default_rng(np.random.SeedSequence([tc.seed, fold, 1]))
    tensors = dict(params.tensors)
    state = init_adam(tensors, graph.trainable, **tc.adam())
    names = list(graph.input_shapes)

    best_gap, best_tensors, stale, history = -np.inf, tensors, 0, []
    for epoch in range(1, tc.epochs + 1):
        losses = []
        for batch in batches(train[rng.permutation(len(train))], tc.batch_size):
            x = {name: inputs[name][batch] for name in names}
            t = targets[batch]
            if tc.mixup:
                x, t, _ = mixup_batch(x, t, tc.alpha, rng, tc.lambda_mode)

            trace = graph.evaluate(x, tensors, Mode.TRAIN, rng)
            loss, seeds = loss_and_grad(tc.loss, trace, t, tc.top_k_neg, tc.pair_scope, tc.margin)
            tensors, state = adam_step(tensors, graph.backward(trace, seeds), state)
            tensors.update(trace.buffer_updates)
            losses.append(loss)

            if tc.max_steps is not None and state.step >= tc.max_steps:
                break

        scores = predict(ModelParams(config, tensors), holdout_inputs, (PROBABILITIES,), EVAL_BATCH)[PROBABILITIES]
        gap = _holdout_gap(scores, holdout_ids, holdout_truth, tc.n)
        history.append({'fold': fold, 'epoch': epoch, 'train_loss': float(np.mean(losses)), 'oof_gap': gap})
        logger.info(f"Fold {fold} epoch {epoch}: train loss {np.mean(losses):.6f}, holdout GAP {gap:.6f}")

        if gap > best_gap:
            best_gap, best_tensors, stale = gap, tensors, 0
        else:
            stale += 1
            if tc.patience is not None and stale >= tc.patience:
                logger.info(f"Fold {fold}: no improvement for {stale} epochs, stopping after epoch {epoch}.")
                break

        if tc.max_steps is not None and state.step >= tc.max_steps:
            logger.info(f"Fold {fold}: reached max_steps={tc.max_steps}.")
            break

    model = ModelParams(config, best_tensors)
    scores = predict(model, holdout_inputs, (PROBABILITIES,), EVAL_BATCH)[PROBABILITIES]
    return model, holdout, scores, best_gap, history


async def _gather(loop, executor, jobs):
    return await asyncio.gather(*(loop.run_in_executor(executor, job) for job in jobs))


def run_jobs(jobs, workers=1):
    """Run zero-argument callables, at most `workers` at a time; results keep the order of `jobs`."""
    if workers <= 1 or len(jobs) <= 1:
        return [job() for job in jobs]

    loop = asyncio.new_event_loop()
    try:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            return loop.run_until_complete(_gather(loop, executor, jobs))
    finally:
        loop.close()


def target_matrix(dataset, train_config, targets=None):
    """The N x L matrix a run fits: noisy labels, or a soft-label matrix aligned to the dataset."""
    if targets is None:
        if train_config.targets is TargetKind.SOFT:
            raise InputError("Soft-target training needs a soft-label matrix.")
        return dataset.label_matrix(LabelSource.NOISY)

    if train_config.targets is TargetKind.HARD:
        raise InputError("Soft labels supplied to a run configured for hard targets.")
    if train_config.loss.is_ranking:
        raise InputError(f"The {train_config.loss.value} loss cannot fit soft labels.")

    matrix = targets.aligned(dataset.ids) if hasattr(targets, 'aligned') else np.asarray(targets, dtype=np.float64)
    if matrix.shape != (len(dataset), dataset.vocabulary_size):
        raise InputError(f"Targets of shape {matrix.shape} do not match the dataset.")
    return matrix


def train_cv(dataset, folds, model_config, train_config, targets=None, jobs=1, vocabulary=None):
    """Train one model per fold and collect out-of-fold predictions.

    :param dataset: The dataset.
    :param folds: :class:`~labeldenoise.data.folds.FoldSplit` covering the dataset.
    :param model_config: Any model config; feature dims and vocabulary are taken from `dataset`.
    :param train_config: :class:`TrainConfig`
    :param targets: None for the noisy labels, or a :class:`~labeldenoise.distill.SoftLabelMatrix`.
    :param jobs: Folds trained concurrently.
    :param vocabulary: Centroid vocabulary for the centroid view, fitted on the dataset when None.
    :return: :class:`TrainedCV`
    """
    train_config.validate()
    folds.check(dataset)
    config = with_dataset_dims(model_config, dataset)
    matrix = target_matrix(dataset, train_config, targets)

    if config.view is View.CENTROIDSTATS and vocabulary is None:
        vocabulary = fit_vocabulary(dataset, config.view_options)

    inputs = prepare_inputs(dataset, config.view, config.view_options, vocabulary)
    fold_of = folds.fold_of(dataset)
    ids = dataset.ids
    truth = dataset.truth(LabelSource.NOISY)

    logger.info(f"Training {config.architecture.value} on {len(dataset)} records, {folds.k} folds, jobs={jobs}.")
    results = run_jobs([lambda fold=fold: train_fold(fold, config, train_config, inputs, matrix, fold_of, ids, truth)
                        for fold in range(folds.k)], jobs)

    oof = np.zeros((len(dataset), dataset.vocabulary_size))
    models, fold_gap, history = [], [], []
    for model, holdout, scores, gap, fold_history in results:
        oof[holdout] = scores
        models.append(model)
        fold_gap.append(gap)
        history.extend(fold_history)

    return TrainedCV(config, train_config, folds, models, oof, ids, fold_gap, history,
                     distilled=train_config.targets is TargetKind.SOFT, vocabulary=vocabulary)


def predict_cv(trained, dataset, indices=None):
    """Test-time probabilities: the mean of the k fold models.

    :return: N x L matrix for `indices` (all records when None).
    """
    inputs = trained.inputs(dataset)
    if indices is not None:
        inputs = _take(inputs, np.asarray(indices))

    total = None
    for params in trained.models:
        scores = predict(params, inputs, (PROBABILITIES,), EVAL_BATCH)[PROBABILITIES]
        total = scores if total is None else total + scores
    return total / trained.k


def _model_config_dict(config):
    return {'architecture': config.architecture.value, **to_dict(config)}


def save_run(trained, path):
    """Write a run directory: run.json, folds.tsv, fold_<i>.model, oof.pred, history.jsonl."""
    os.makedirs(path, exist_ok=True)
    summary = {
        'model_config': _model_config_dict(trained.model_config),
        'train_config': to_dict(trained.train_config),
        'k': trained.k,
        'fold_gap': trained.fold_gap,
        'distilled': trained.distilled,
        'centroids': None if trained.vocabulary is None else trained.vocabulary.centroids.tolist(),
    }
    with open(os.path.join(path, 'run.json'), 'w', encoding='utf-8') as f:
        json.dump(summary, f, sort_keys=True, indent=2)
        f.write('\n')

    write_folds(os.path.join(path, 'folds.tsv'), trained.folds)
    for fold, params in enumerate(trained.models):
        serialize_model(params, os.path.join(path, f'fold_{fold}.model'))

    vocabulary_size = trained.oof.shape[1]
    write_predictions(os.path.join(path, 'oof.pred'), top_n_predictions(trained.oof, trained.ids, vocabulary_size))

    with open(os.path.join(path, 'history.jsonl'), 'w', encoding='utf-8') as f:
        for entry in trained.history:
            f.write(json.dumps(entry, sort_keys=True) + '\n')

    logger.info(f"Saved run to {path}.")


def load_run(path):
    """Read a run directory written by :func:`save_run`.

    The OOF matrix is read back from ``oof.pred`` at 9 significant digits.
    """
    try:
        with open(os.path.join(path, 'run.json'), encoding='utf-8') as f:
            summary = json.load(f)
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}/run.json: line {e.lineno}: {e.msg}")
    except FileNotFoundError:
        raise InputError(f"{path} is not a run directory (no run.json).")

    config = model_config_from_dict(summary['model_config'])
    train_config = from_dict(TrainConfig, summary['train_config'])
    folds = read_folds(os.path.join(path, 'folds.tsv'))
    models = [deserialize_model(os.path.join(path, f'fold_{fold}.model')) for fold in range(summary['k'])]

    predictions = read_predictions(os.path.join(path, 'oof.pred'), config.vocabulary_size)
    ids = list(predictions)
    oof = np.zeros((len(ids), config.vocabulary_size))
    for row, record_id in enumerate(ids):
        for label, score in predictions[record_id]:
            oof[row, label] = score

    history = []
    with open(os.path.join(path, 'history.jsonl'), encoding='utf-8') as f:
        for line in f:
            if line.strip():
                history.append(json.loads(line))

    vocabulary = None
    if summary.get('centroids') is not None:
        vocabulary = CentroidVocabulary(np.array(summary['centroids'], dtype=np.float64), 0.0)

    return TrainedCV(config, train_config, folds, models, oof, ids, summary['fold_gap'], history,
                     distilled=summary['distilled'], vocabulary=vocabulary)


def describe(trained):
    """Echo of a run for the command line."""
    return {
        'model_config': _model_config_dict(trained.model_config),
        'train_config': json.loads(canonical(trained.train_config)),
        'fold_gap': trained.fold_gap,
        'mean_fold_gap': float(np.mean(trained.fold_gap)),
        'distilled': trained.distilled,
    }
