import numpy as np
import pytest

from labeldenoise.config import from_dict
from labeldenoise.data import GeneratorConfig, NoiseConfig, generate_synthetic
from labeldenoise.diff import adam_step, init_adam
from labeldenoise.enums import LabelSource, LossKind, Mode, TargetKind, View
from labeldenoise.errors import InputError
from labeldenoise.losses import loss_and_grad
from labeldenoise.models import ResNetLikeConfig, VladBowConfig, init_model, predict, with_dataset_dims
from labeldenoise.training import TrainConfig, batches, describe, load_run, predict_cv, run_jobs, save_run, \
    target_matrix, train_cv
from labeldenoise.views import ViewOptions, prepare_inputs

MODEL = ResNetLikeConfig(inner_size=8, dropout_rate=0.0)
TRAIN = TrainConfig(epochs=3, batch_size=16, lr=1e-2, patience=None, n=5)


@pytest.fixture(scope='module')
def trained(small_dataset, small_folds):
    return train_cv(small_dataset, small_folds, MODEL, TRAIN)


def test_batches():
    assert [list(b) for b in batches(np.arange(5), 2)] == [[0, 1], [2, 3, 4]]
    assert [list(b) for b in batches(np.arange(6), 4)] == [[0, 1, 2, 3], [4, 5]]
    assert [list(b) for b in batches(np.arange(1), 4)] == [[0]]


def test_run_jobs_keeps_order():
    jobs = [lambda i=i: i * i for i in range(6)]
    assert run_jobs(jobs, 1) == run_jobs(jobs, 3) == [0, 1, 4, 9, 16, 25]


def test_every_record_gets_one_oof_prediction(trained, small_dataset, small_folds):
    assert trained.k == 3
    assert trained.ids == small_dataset.ids
    assert trained.oof.shape == (len(small_dataset), small_dataset.vocabulary_size)
    assert np.all((trained.oof > 0.0) & (trained.oof < 1.0))
    assert len(trained.fold_gap) == 3 and all(0.0 <= gap <= 1.0 for gap in trained.fold_gap)
    assert [(entry['fold'], entry['epoch']) for entry in trained.history] == \
        [(fold, epoch) for fold in range(3) for epoch in range(1, 4)]

    for fold, params in enumerate(trained.models):
        holdout = small_folds.holdout_indices(small_dataset, fold)
        inputs = {name: value[holdout] for name, value in trained.inputs(small_dataset).items()}
        np.testing.assert_allclose(predict(params, inputs)['probabilities'], trained.oof[holdout])


def test_folds_are_independent_of_jobs(trained, small_dataset, small_folds):
    parallel = train_cv(small_dataset, small_folds, MODEL, TRAIN, jobs=3)
    np.testing.assert_array_equal(parallel.oof, trained.oof)
    assert parallel.fold_gap == trained.fold_gap
    assert all(a.same_as(b) for a, b in zip(parallel.models, trained.models))


def test_training_reduces_loss(small_dataset, small_folds):
    run = train_cv(small_dataset, small_folds, MODEL, TrainConfig(epochs=10, batch_size=16, lr=1e-2,
                                                                  patience=None))
    for fold in range(3):
        losses = [entry['train_loss'] for entry in run.history if entry['fold'] == fold]
        assert losses[-1] < losses[0]


def test_max_steps_stops_every_fold(small_dataset, small_folds):
    run = train_cv(small_dataset, small_folds, MODEL, TrainConfig(epochs=5, batch_size=8, max_steps=1))
    assert len(run.history) == 3


@pytest.mark.parametrize('train_config', [
    TrainConfig(epochs=1, batch_size=16, mixup=True),
    TrainConfig(epochs=1, batch_size=16, loss=LossKind.SOFT_RANK),
    TrainConfig(epochs=1, batch_size=16, loss=LossKind.HINGE_RANK, margin=0.5),
])
def test_training_variants(train_config, small_dataset, small_folds):
    run = train_cv(small_dataset, small_folds, MODEL, train_config)
    assert np.all(np.isfinite(run.oof))


def test_frame_views(small_dataset, small_folds):
    config = ResNetLikeConfig(inner_size=4, dropout_rate=0.0, view=View.CENTROIDSTATS,
                              view_options=ViewOptions(clusters=4))
    run = train_cv(small_dataset, small_folds, config, TrainConfig(epochs=1, batch_size=16))
    assert run.vocabulary is not None and run.vocabulary.k == 4

    config = VladBowConfig(clusters=3, max_frames=8, head=ResNetLikeConfig(inner_size=4, dropout_rate=0.0))
    run = train_cv(small_dataset, small_folds, config, TrainConfig(epochs=1, batch_size=16, mixup=True))
    assert run.model_config.frame_dim == small_dataset.frame_dim
    assert np.all(np.isfinite(run.oof))


def test_predict_cv_averages_fold_models(trained, small_dataset):
    inputs = trained.inputs(small_dataset)
    expected = np.mean([predict(params, inputs)['probabilities'] for params in trained.models], axis=0)
    np.testing.assert_allclose(predict_cv(trained, small_dataset), expected)
    np.testing.assert_allclose(predict_cv(trained, small_dataset, [2, 4]), expected[[2, 4]])


def test_penultimate_oof(trained, small_dataset):
    assert trained.oof_outputs(small_dataset, 'penultimate').shape == (len(small_dataset), 8)
    np.testing.assert_allclose(trained.oof_outputs(small_dataset), trained.oof)


def test_invalid_train_configs():
    for mapping in ({'epochs': 0}, {'batch_size': 1}, {'lr': 0.0}, {'patience': 0},
                    {'loss': 'soft_rank', 'targets': 'soft'}, {'loss': 'hinge_rank', 'mixup': True},
                    {'loss': 'cross_entropy'}, {'epoch': 3}):
        with pytest.raises(InputError):
            from_dict(TrainConfig, mapping)


def test_target_matrix(small_dataset):
    np.testing.assert_array_equal(target_matrix(small_dataset, TrainConfig()), small_dataset.label_matrix())

    soft = TrainConfig(targets=TargetKind.SOFT)
    with pytest.raises(InputError):
        target_matrix(small_dataset, soft)
    with pytest.raises(InputError):
        target_matrix(small_dataset, TrainConfig(), np.zeros((len(small_dataset), 8)))
    with pytest.raises(InputError):
        target_matrix(small_dataset, soft, np.zeros((3, 8)))

    matrix = np.full((len(small_dataset), 8), 0.25)
    np.testing.assert_array_equal(target_matrix(small_dataset, soft, matrix), matrix)


def test_run_directory_roundtrip(trained, tmp_path):
    save_run(trained, tmp_path / 'run')
    loaded = load_run(tmp_path / 'run')

    assert loaded.ids == trained.ids
    np.testing.assert_allclose(loaded.oof, trained.oof, rtol=1e-8)
    assert all(a.same_as(b) for a, b in zip(loaded.models, trained.models))
    assert loaded.folds == trained.folds
    assert loaded.fold_gap == trained.fold_gap
    assert loaded.history == trained.history
    assert loaded.train_config == trained.train_config
    assert loaded.model_config == trained.model_config
    assert describe(loaded) == describe(trained)

    with pytest.raises(InputError):
        load_run(tmp_path / 'missing')


def test_full_batch_training_memorizes_ten_records():
    dataset = generate_synthetic(GeneratorConfig(videos=10, vocabulary_size=8, video_dim=6, audio_dim=3,
                                                 feature_noise=1.0, with_frames=False), NoiseConfig(), seed=5)
    config = with_dataset_dims(ResNetLikeConfig(inner_size=16, av_id_block_num=1, concat_id_block_num=1,
                                                dropout_rate=0.0), dataset)
    params = init_model(config, seed=0)
    graph, tensors = params.graph, dict(params.tensors)
    inputs = prepare_inputs(dataset, config.view, config.view_options)
    targets = dataset.label_matrix(LabelSource.NOISY)
    state = init_adam(tensors, graph.trainable, **TrainConfig(lr=1e-2).adam())

    losses = []
    for _ in range(500):
        trace = graph.evaluate(inputs, tensors, Mode.TRAIN, np.random.default_rng(0))
        loss, seeds = loss_and_grad(LossKind.BCE, trace, targets)
        tensors, state = adam_step(tensors, graph.backward(trace, seeds), state)
        tensors.update(trace.buffer_updates)
        losses.append(loss)

    assert losses[-1] <= 0.01
    assert losses[-1] < losses[0]
