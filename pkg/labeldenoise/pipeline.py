"""
The whole denoising pipeline on one dataset: first-level runs on the noisy labels, ensemble weights fitted
on their out-of-fold predictions, the weighted combination as soft labels, students distilled on them and
a head stacked on the frozen students.
"""
import logging
from dataclasses import dataclass, field

from .distill import combine, distill_student, fit_ensemble_weights, oof_soft_labels, stack_penultimate
from .enums import LabelSource
from .errors import InputError
from .gap import GapScorer
from .training import train_cv

logger = logging.getLogger(__name__)


@dataclass
class StageSpec:
    """A named model trained by the pipeline.

    :ivar model_config: Any model config.
    :ivar train_config: :class:`~labeldenoise.training.TrainConfig`
    """
    name: str
    model_config: object
    train_config: object


@dataclass
class PipelineResult:
    """
    :ivar first_level: Run name to :class:`~labeldenoise.training.TrainedCV` on the noisy labels.
    :ivar weights: :class:`~labeldenoise.distill.EnsembleWeights` over `first_level`, in its order.
    :ivar soft: The combined :class:`~labeldenoise.distill.SoftLabelMatrix`.
    :ivar students: Run name to distilled :class:`~labeldenoise.training.TrainedCV`.
    :ivar final: :class:`~labeldenoise.distill.FinalModel`
    :ivar clean_gap: Out-of-fold GAP of every stage against the clean labels, empty without clean labels.
    """
    first_level: dict
    weights: object
    soft: object
    students: dict
    final: object
    clean_gap: dict = field(default_factory=dict)

    def summary(self):
        return {
            'first_level': {name: run.fold_gap for name, run in self.first_level.items()},
            'ensemble': self.weights.as_dict(list(self.first_level)),
            'students': {name: run.fold_gap for name, run in self.students.items()},
            'stack_gap': self.final.oof_gap,
            'clean_gap': self.clean_gap,
        }


def _unique(specs, what):
    names = [spec.name for spec in specs]
    if not names:
        raise InputError(f"The pipeline needs at least one {what}.")
    if len(set(names)) != len(names):
        raise InputError(f"Duplicate {what} names in {names}.")


def clean_gaps(dataset, first_level, soft, students, final, n=20):
    """OOF GAP of every stage against the clean labels of a synthetic dataset."""
    scorer = GapScorer(dataset.ids, dataset.truth(LabelSource.CLEAN), dataset.vocabulary_size, n)
    gaps = {name: scorer(run.oof) for name, run in first_level.items()}
    gaps['ensemble'] = scorer(soft.aligned(dataset.ids))
    gaps.update((name, scorer(run.oof)) for name, run in students.items())
    gaps['final'] = scorer(final.oof)
    return gaps


def run_pipeline(dataset, folds, first_level, students, head_config, jobs=1, n=20):
    """Run every stage on the same folds.

    :param dataset: :class:`~labeldenoise.data.records.Dataset`
    :param folds: :class:`~labeldenoise.data.folds.FoldSplit`
    :param first_level: [StageSpec] trained on the noisy labels.
    :param students: [StageSpec] distilled on the soft labels; names must differ from `first_level`.
    :param head_config: :class:`~labeldenoise.training.TrainConfig` of the stacking head.
    :param jobs: Folds trained concurrently.
    :param n: GAP cut-off.
    :return: :class:`PipelineResult`
    """
    _unique(first_level, 'first-level model')
    _unique(students, 'student')
    _unique(list(first_level) + list(students), 'model')

    runs = {}
    for spec in first_level:
        logger.info(f"First level: {spec.name}")
        runs[spec.name] = train_cv(dataset, folds, spec.model_config, spec.train_config, jobs=jobs)

    matrices = oof_soft_labels(list(runs.values()))
    weights = fit_ensemble_weights(matrices, dataset.truth(LabelSource.NOISY), n)
    soft = combine(matrices, weights.weights)

    distilled = {}
    for spec in students:
        logger.info(f"Student: {spec.name}")
        distilled[spec.name] = distill_student(soft, dataset, folds, spec.model_config, spec.train_config, jobs)

    final = stack_penultimate(list(distilled.values()), soft, dataset, folds, head_config, jobs)

    gaps = {}
    if dataset.has_clean:
        gaps = clean_gaps(dataset, runs, soft, distilled, final, n)
        logger.info(f"Clean-label GAP per stage: {gaps}")

    return PipelineResult(runs, weights, soft, distilled, final, gaps)
