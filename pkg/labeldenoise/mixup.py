"""
Mixup: every example is replaced by the convex combination lam * x_i + (1 - lam) * x_j with a partner j
drawn by a seeded permutation of the batch; targets are mixed with the same coefficients.
"""
import logging

import numpy as np

from .enums import LambdaMode
from .errors import InputError

logger = logging.getLogger(__name__)


def sample_lambda(alpha, rng, size=None):
    """Beta(alpha, alpha) draws."""
    if not alpha > 0:
        raise InputError(f"Mixup alpha must be positive, got {alpha}.")
    return rng.beta(alpha, alpha, size=size)


def _mix(values, partner, lam):
    values = np.asarray(values, dtype=np.float64)
    if np.ndim(lam):
        lam = np.reshape(lam, (-1,) + (1,) * (values.ndim - 1))
    return lam * values + (1.0 - lam) * values[partner]


def mixup_batch(features, targets, alpha, rng, mode=LambdaMode.PER_BATCH, lam=None, partner=None):
    """Mix a batch.

    :param features: One batch matrix, or input matrices by name sharing their leading extent.
    :param targets: batch x L targets in [0, 1].
    :param alpha: Beta distribution parameter.
    :param rng: numpy Generator drawing the permutation and the coefficients.
    :param mode: One coefficient per batch or one per example.
    :param lam: Force the coefficient instead of sampling it.
    :param partner: Force the partner indices instead of permuting.
    :return: (mixed features, mixed targets, coefficient(s))
    """
    batch = len(targets)
    if batch < 2:
        raise InputError(f"Mixup needs at least 2 examples, got {batch}.")

    if partner is None:
        partner = rng.permutation(batch)
    if lam is None:
        lam = sample_lambda(alpha, rng, None if mode is LambdaMode.PER_BATCH else batch)

    if isinstance(features, dict):
        mixed = {name: _mix(values, partner, lam) for name, values in features.items()}
    else:
        mixed = _mix(features, partner, lam)

    return mixed, _mix(targets, partner, lam), lam
