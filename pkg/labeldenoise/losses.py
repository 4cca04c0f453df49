"""
Training losses. Each loss has a value function and a gradient function with respect to its score input,
so a training step can seed :meth:`~labeldenoise.diff.graph.Graph.backward` with the gradient.

BCE works on probabilities and accepts soft targets. The ranking losses work on the pre-sigmoid logits and
need binary labels: every positive of the pairing scope is paired with the `top_k_neg` highest-scored
negatives of each sample.
"""
import logging

import numpy as np
from scipy.special import expit

from .enums import LossKind, PairScope
from .errors import InputError
from .models.builder import PROBABILITIES
from .models.params import BUILDERS

logger = logging.getLogger(__name__)

CLAMP = 1e-7
TOP_K_NEG = 30
LOSS = 'loss'


def _check_shapes(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InputError(f"Score shape {a.shape} does not match target shape {b.shape}.")
    return a, b


def bce(predictions, targets):
    """Mean binary cross-entropy over every entry, predictions clamped to [1e-7, 1 - 1e-7].

    :param predictions: batch x L probabilities.
    :param targets: batch x L values in [0, 1].
    :return: float
    """
    p, t = _check_shapes(predictions, targets)
    p = np.clip(p, CLAMP, 1.0 - CLAMP)
    return float(-np.mean(t * np.log(p) + (1.0 - t) * np.log(1.0 - p)))


def bce_grad(predictions, targets):
    """Gradient of :func:`bce` with respect to the predictions, zero where the clamp is active."""
    p, t = _check_shapes(predictions, targets)
    inside = (p >= CLAMP) & (p <= 1.0 - CLAMP)
    p = np.clip(p, CLAMP, 1.0 - CLAMP)
    return np.where(inside, -(t / p - (1.0 - t) / (1.0 - p)) / p.size, 0.0)


def _selected_negatives(scores, labels, top_k_neg):
    """Flat indices of the `top_k_neg` highest-scored negatives of every row, ties to the lower label."""
    selected = []
    width = scores.shape[1]
    for row in range(scores.shape[0]):
        negatives = np.flatnonzero(labels[row] == 0)
        order = negatives[np.argsort(-scores[row, negatives], kind='stable')]
        selected.append(row * width + order[:top_k_neg])
    return selected


def ranking_pairs(scores, labels, top_k_neg=TOP_K_NEG, scope=PairScope.BATCH):
    """Every (positive, negative) pair a ranking loss averages over.

    :return: (flat positive indices, flat negative indices), one entry per pair.
    """
    scores, labels = _check_shapes(scores, labels)
    if scores.ndim != 2:
        raise InputError(f"Ranking losses need a batch x L score matrix, got shape {scores.shape}.")
    if np.any((labels != 0) & (labels != 1)):
        raise InputError("Ranking losses need binary labels.")

    width = scores.shape[1]
    negatives = _selected_negatives(scores, labels, top_k_neg)
    positives = [row * width + np.flatnonzero(labels[row] == 1) for row in range(scores.shape[0])]

    if scope is PairScope.BATCH:
        pos = np.concatenate(positives)
        neg = np.concatenate(negatives)
        pairs = (np.repeat(pos, len(neg)), np.tile(neg, len(pos)))
    else:
        pairs = (np.concatenate([np.repeat(p, len(n)) for p, n in zip(positives, negatives)]),
                 np.concatenate([np.tile(n, len(p)) for p, n in zip(positives, negatives)]))

    if len(pairs[0]) == 0:
        raise InputError("No positive/negative pair in scope: the batch needs a positive and a negative label.")

    return pairs[0].astype(np.int64), pairs[1].astype(np.int64)


def _pairwise(scores, labels, top_k_neg, scope):
    scores = np.asarray(scores, dtype=np.float64)
    pos, neg = ranking_pairs(scores, labels, top_k_neg, scope)
    flat = scores.reshape(-1)
    return pos, neg, flat[neg] - flat[pos]


def _scatter(shape, pos, neg, slope):
    grad = np.zeros(int(np.prod(shape)))
    np.add.at(grad, neg, slope / len(pos))
    np.add.at(grad, pos, -slope / len(pos))
    return grad.reshape(shape)


def soft_rank_loss(scores, labels, top_k_neg=TOP_K_NEG, scope=PairScope.BATCH):
    """Mean over pairs of ln(1 + exp(n - p + 1)).

    :param scores: batch x L logits.
    :param labels: batch x L binary labels.
    :param top_k_neg: Negatives kept per sample.
    :param scope: Pair positives with negatives of the whole batch or of their own sample only.
    """
    _, _, gap = _pairwise(scores, labels, top_k_neg, scope)
    return float(np.mean(np.logaddexp(0.0, gap + 1.0)))


def soft_rank_loss_grad(scores, labels, top_k_neg=TOP_K_NEG, scope=PairScope.BATCH):
    pos, neg, gap = _pairwise(scores, labels, top_k_neg, scope)
    return _scatter(np.shape(scores), pos, neg, expit(gap + 1.0))


def hinge_rank_loss(scores, labels, margin=1.0, top_k_neg=TOP_K_NEG, scope=PairScope.BATCH):
    """Mean over pairs of max(0, margin - (p - n))."""
    _, _, gap = _pairwise(scores, labels, top_k_neg, scope)
    return float(np.mean(np.maximum(0.0, margin + gap)))


def hinge_rank_loss_grad(scores, labels, margin=1.0, top_k_neg=TOP_K_NEG, scope=PairScope.BATCH):
    pos, neg, gap = _pairwise(scores, labels, top_k_neg, scope)
    return _scatter(np.shape(scores), pos, neg, (margin + gap > 0).astype(np.float64))


def loss_and_grad(kind, outputs, targets, top_k_neg=TOP_K_NEG, scope=PairScope.BATCH, margin=1.0):
    """Loss value and the backward seed for one batch.

    :param kind: :class:`~labeldenoise.enums.LossKind`
    :param outputs: Trace outputs holding ``probabilities`` and ``logits``.
    :param targets: batch x L targets.
    :return: (loss, {output alias: gradient})
    """
    if kind is LossKind.BCE:
        p = outputs[PROBABILITIES]
        return bce(p, targets), {PROBABILITIES: bce_grad(p, targets)}

    logits = outputs['logits']
    if kind is LossKind.SOFT_RANK:
        return (soft_rank_loss(logits, targets, top_k_neg, scope),
                {'logits': soft_rank_loss_grad(logits, targets, top_k_neg, scope)})

    return (hinge_rank_loss(logits, targets, margin, top_k_neg, scope),
            {'logits': hinge_rank_loss_grad(logits, targets, margin, top_k_neg, scope)})


def loss_graph(config):
    """A fresh graph of the model in `config` extended with an in-graph BCE ``loss`` over a ``targets`` input.

    Used by gradient checks, where the whole loss has to be a function of the parameters.
    """
    graph = BUILDERS[config.architecture](config)
    p = graph.add_node('clamp', [graph.outputs[PROBABILITIES]], low=CLAMP, high=1.0 - CLAMP)
    t = graph.input('targets', (None, config.vocabulary_size))
    one = graph.const(1.0)
    minus = graph.const(-1.0)

    positive = graph.add_node('multiply', [t, graph.add_node('log', [p])])
    not_t = graph.add_node('add', [one, graph.add_node('multiply', [minus, t])])
    not_p = graph.add_node('add', [one, graph.add_node('multiply', [minus, p])])
    negative = graph.add_node('multiply', [not_t, graph.add_node('log', [not_p])])

    mean = graph.add_node('mean', [graph.add_node('add', [positive, negative])], axis=None)
    graph.output(LOSS, graph.add_node('multiply', [minus, mean]))
    return graph
