"""
Command line: ``python -m labeldenoise <command> [options]``.

Every command prints one JSON object on standard output and logs to standard error. Exit codes follow
:class:`~labeldenoise.errors.ExitCode`.
"""
import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field, replace

import numpy as np

from .analysis import error_taxonomy, per_label_report, scores_for_analysis, write_analysis
from .config import from_dict, load_config, to_dict
from .data.folds import make_folds, read_folds, write_folds
from .data.records import GeneratorConfig, NoiseConfig
from .data.synthetic import generate_synthetic
from .distill import (budget_check, combine, distill_student, estimate_final_size, fit_ensemble_weights,
                      load_final, manifest, oof_soft_labels, predict_final, read_soft_labels, save_final,
                      stack_penultimate, write_soft_labels)
from .enums import LabelSource
from .errors import ExitCode, FormatError, InputError, LabelDenoiseError
from .gap import gap_at_n, top_n_predictions
from .gradsuite import TOLERANCE, gradient_suite
from .models import load_model_config
from .presets import PRESETS, get_preset, student_zoo, zoo
from .stream.dataset import load_dataset, write_dataset, write_groups
from .stream.predictions import read_predictions, write_predictions
from .training import describe, load_run, predict_cv, save_run, train_cv

logger = logging.getLogger(__name__)

LOG_FORMAT = ' %(levelname)s: %(name)s -- %(asctime)s.%(msecs)03d -- %(message)s'


def _train_config(path, base, seed):
    config = load_config(path, base)
    return config if seed is None else replace(config, seed=seed)


def _entry(table, name, what):
    try:
        return table[name]
    except KeyError:
        raise InputError(f"Unknown {what} {name!r}, expected one of {', '.join(table)}.")


def _labels(name):
    return LabelSource(name)


def _write_json(path, value):
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        json.dump(value, f, sort_keys=True, indent=2)
        f.write('\n')


@dataclass
class SynthOverrides:
    """Keys of a ``synth --config`` file."""
    generator: dict = field(default_factory=dict)
    noise: dict = field(default_factory=dict)

    def validate(self):
        if not isinstance(self.generator, dict) or not isinstance(self.noise, dict):
            raise InputError("synth config: generator and noise must be objects.")


def cmd_synth(args):
    preset = get_preset(args.preset)
    generator, noise = preset.generator, preset.noise
    if args.config is not None:
        with open(args.config, encoding='utf-8') as f:
            try:
                overrides = json.load(f)
            except json.JSONDecodeError as e:
                raise FormatError(f"{args.config}: line {e.lineno}: {e.msg}")
        overrides = from_dict(SynthOverrides, overrides, where=args.config)
        generator = from_dict(GeneratorConfig, {**to_dict(generator), **overrides.generator})
        noise = from_dict(NoiseConfig, {**to_dict(noise), **overrides.noise})

    seed = 0 if args.seed is None else args.seed
    dataset = generate_synthetic(generator, noise, seed)

    os.makedirs(args.out, exist_ok=True)
    size = write_dataset(os.path.join(args.out, 'data.ldns'), dataset)
    write_groups(os.path.join(args.out, 'groups.tsv'), dataset.groups)

    return {
        'videos': len(dataset),
        'vocabulary_size': dataset.vocabulary_size,
        'noisy_positives': int(dataset.label_counts(LabelSource.NOISY).sum()),
        'clean_positives': int(dataset.label_counts(LabelSource.CLEAN).sum()),
        'bytes': size,
        'generator': to_dict(generator),
        'noise': to_dict(noise),
        'seed': seed,
    }


def cmd_folds(args):
    preset = get_preset(args.preset)
    dataset = load_dataset(args.data)
    split = make_folds(dataset, args.k or preset.k, 0 if args.seed is None else args.seed)

    os.makedirs(args.out, exist_ok=True)
    write_folds(os.path.join(args.out, 'folds.tsv'), split)
    return {'k': split.k, 'sizes': split.sizes()}


def cmd_train(args):
    preset = get_preset(args.preset)
    dataset = load_dataset(args.data)
    folds = read_folds(args.folds)

    model, train = _entry(zoo(preset), args.model, 'model')
    model = load_model_config(args.model_config, model)
    train = _train_config(args.train_config, train, args.seed)

    trained = train_cv(dataset, folds, model, train, jobs=args.jobs)
    save_run(trained, args.out)
    return describe(trained)


def cmd_predict(args):
    dataset = load_dataset(args.data)
    if os.path.isfile(args.run):
        scores = predict_final(load_final(args.run), dataset)
    else:
        scores = predict_cv(load_run(args.run), dataset)

    write_predictions(args.out, top_n_predictions(scores, dataset.ids, args.n))
    return {'videos': len(dataset), 'n': args.n}


def cmd_eval(args):
    dataset = load_dataset(args.truth)
    truth = dataset.truth(_labels(args.labels))
    predictions = read_predictions(args.pred, dataset.vocabulary_size)

    unknown = [record_id for record_id in predictions if record_id not in truth]
    if unknown:
        raise InputError(f"{len(unknown)} predicted record(s) are not in {args.truth}, e.g. {unknown[0]!r}.")

    return {'gap': gap_at_n(predictions, truth, args.n), 'n': args.n, 'videos': len(predictions)}


def cmd_ensemble(args):
    dataset = load_dataset(args.data)
    runs = [load_run(path) for path in args.runs]

    matrices = oof_soft_labels(runs)
    weights = fit_ensemble_weights(matrices, dataset.truth(LabelSource.NOISY), args.n)
    soft = combine(matrices, weights.weights)

    os.makedirs(args.out, exist_ok=True)
    summary = weights.as_dict(list(args.runs))
    _write_json(os.path.join(args.out, 'ensemble.json'), summary)
    write_soft_labels(os.path.join(args.out, 'soft.pred'), soft)
    return summary


def cmd_distill(args):
    preset = get_preset(args.preset)
    dataset = load_dataset(args.data)
    folds = read_folds(args.folds)
    soft = read_soft_labels(args.soft, dataset.vocabulary_size)

    model, train = _entry(student_zoo(preset), args.model, 'student')
    model = load_model_config(args.model_config, model)
    train = _train_config(args.train_config, train, args.seed)

    trained = distill_student(soft, dataset, folds, model, train, jobs=args.jobs)
    save_run(trained, args.out)
    return describe(trained)


def cmd_stack(args):
    preset = get_preset(args.preset)
    dataset = load_dataset(args.data)
    soft = read_soft_labels(args.soft, dataset.vocabulary_size)
    students = [load_run(path) for path in args.students]
    folds = read_folds(args.folds) if args.folds else students[0].folds
    head_config = _train_config(args.train_config, preset.head_train, args.seed)

    final = stack_penultimate(students, soft, dataset, folds, head_config, jobs=args.jobs)

    os.makedirs(args.out, exist_ok=True)
    size = save_final(final, os.path.join(args.out, 'final.ldnf'))
    _write_json(os.path.join(args.out, 'manifest.json'), manifest(final))

    budget = budget_check(final, args.budget_bytes or preset.budget_bytes)
    summary = {
        'students': list(args.students),
        'head_input_width': final.input_width,
        'oof_gap': final.oof_gap,
        'size_bytes': size,
        'budget_bytes': budget.budget_bytes,
        'budget_passed': budget.passed,
        'head_config': to_dict(head_config),
    }
    _write_json(os.path.join(args.out, 'stack.json'), summary)
    return summary


def cmd_analyze(args):
    dataset = load_dataset(args.truth, args.groups)
    source = _labels(args.labels)
    truth = dataset.truth(source)

    predictions = read_predictions(args.pred, dataset.vocabulary_size)
    scores = np.zeros((len(predictions), dataset.vocabulary_size))
    ids = list(predictions)
    for row, record_id in enumerate(ids):
        if record_id not in truth:
            raise InputError(f"Predicted record {record_id!r} is not in {args.truth}.")
        for label, score in predictions[record_id]:
            scores[row, label] = score

    taxonomy = error_taxonomy(scores_for_analysis(scores, ids, truth, args.n), truth, dataset.vocabulary_size,
                              top=args.n)
    report = per_label_report(taxonomy, dataset.label_counts(LabelSource.NOISY))
    summary = write_analysis(args.out, taxonomy, report, dataset.groups)
    return {key: value for key, value in summary.items() if key != 'labels'}


def cmd_gradcheck(args):
    preset = get_preset(args.preset)
    model = load_model_config(args.model_config, preset.model)
    results = gradient_suite(model, 0 if args.seed is None else args.seed)
    worst = max(results.values())

    if not worst < TOLERANCE:
        logger.error(f"Gradient check failed: max relative error {worst:.3e} >= {TOLERANCE}.")

    paperlike = get_preset('paperlike')
    students = [student_zoo(paperlike)[name][0] for name in paperlike.students]
    estimate = estimate_final_size(students, paperlike.generator.vocabulary_size)
    return {
        'cases': results,
        'max_relative_error': worst,
        'passed': worst < TOLERANCE,
        'paperlike_final_bytes': estimate,
        'paperlike_budget_passed': estimate <= paperlike.budget_bytes,
    }


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--preset', choices=list(PRESETS), default='desk', help="Defaults to start from.")
    common.add_argument('--seed', type=int, default=None, help="Seed of every random stream of the command.")
    common.add_argument('--jobs', type=int, default=1, help="Folds trained concurrently.")
    common.add_argument('--n', type=int, default=20, help="GAP cut-off, predictions kept per video.")
    common.add_argument('-v', '--verbose', action='store_true', help="Log debug messages.")

    parser = argparse.ArgumentParser(prog='labeldenoise', description="Label denoising by distillation.")
    sub = parser.add_subparsers(dest='command', required=True)

    def command(name, handler, help):
        p = sub.add_parser(name, parents=[common], help=help)
        p.set_defaults(handler=handler)
        return p

    p = command('synth', cmd_synth, "Generate a synthetic dataset with clean and noisy labels.")
    p.add_argument('--config', help="JSON object with 'generator' and 'noise' overrides.")
    p.add_argument('--out', required=True, help="Directory receiving data.ldns and groups.tsv.")

    p = command('folds', cmd_folds, "Split a dataset into k folds.")
    p.add_argument('--data', required=True)
    p.add_argument('--k', type=int, default=None)
    p.add_argument('--out', required=True, help="Directory receiving folds.tsv.")

    p = command('train', cmd_train, "Cross-validated training on the noisy labels.")
    p.add_argument('--data', required=True)
    p.add_argument('--folds', required=True)
    p.add_argument('--model', default='resnet_both', help="Model zoo entry.")
    p.add_argument('--model-config')
    p.add_argument('--train-config')
    p.add_argument('--out', required=True, help="Run directory.")

    p = command('predict', cmd_predict, "Predict with a run directory or a final model file.")
    p.add_argument('--run', required=True)
    p.add_argument('--data', required=True)
    p.add_argument('--out', required=True, help="Predictions file.")

    p = command('eval', cmd_eval, "GAP of a predictions file.")
    p.add_argument('--pred', required=True)
    p.add_argument('--truth', required=True, help="Dataset file holding the labels.")
    p.add_argument('--labels', choices=[s.value for s in LabelSource], default=LabelSource.NOISY.value)

    p = command('ensemble', cmd_ensemble, "Fit ensemble weights on OOF predictions and write soft labels.")
    p.add_argument('--data', required=True)
    p.add_argument('--runs', nargs='+', required=True)
    p.add_argument('--out', required=True)

    p = command('distill', cmd_distill, "Train a student on soft labels.")
    p.add_argument('--data', required=True)
    p.add_argument('--folds', required=True)
    p.add_argument('--soft', required=True)
    p.add_argument('--model', default='student_base', help="Student zoo entry.")
    p.add_argument('--model-config')
    p.add_argument('--train-config')
    p.add_argument('--out', required=True, help="Run directory.")

    p = command('stack', cmd_stack, "Freeze students and train a head on their penultimate features.")
    p.add_argument('--data', required=True)
    p.add_argument('--soft', required=True)
    p.add_argument('--students', nargs='+', required=True)
    p.add_argument('--folds')
    p.add_argument('--train-config', help="Training config of the head.")
    p.add_argument('--budget-bytes', type=int, default=None)
    p.add_argument('--out', required=True)

    p = command('analyze', cmd_analyze, "Error taxonomy and per-label reports of a predictions file.")
    p.add_argument('--pred', required=True)
    p.add_argument('--truth', required=True, help="Dataset file holding the labels.")
    p.add_argument('--labels', choices=[s.value for s in LabelSource], default=LabelSource.NOISY.value)
    p.add_argument('--groups', help="label<TAB>group file.")
    p.add_argument('--out', required=True)

    p = command('gradcheck', cmd_gradcheck, "Finite-difference gradient checks of every architecture.")
    p.add_argument('--model-config')

    return parser


def main(argv=None):
    """Run one command.

    :param argv: Arguments without the program name, ``sys.argv[1:]`` when None.
    :return: Process exit code.
    """
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else ExitCode.INPUT.value

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format=LOG_FORMAT,
                        datefmt='%H:%M:%S', stream=sys.stderr)

    if args.jobs < 1:
        logger.error(f"--jobs must be at least 1, got {args.jobs}.")
        return ExitCode.INPUT.value
    if args.n < 1:
        logger.error(f"--n must be at least 1, got {args.n}.")
        return ExitCode.INPUT.value

    try:
        result = args.handler(args)
    except (LabelDenoiseError, OSError, FloatingPointError) as e:
        code = ExitCode.for_exception(e)
        logger.error(f"{args.command}: {e}")
        return code.value

    print(json.dumps(result, sort_keys=True, indent=2))
    if args.command == 'gradcheck' and not result['passed']:
        return ExitCode.NUMERIC.value
    return ExitCode.OK.value


def main_exit():
    sys.exit(main())
