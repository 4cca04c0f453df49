import json

import numpy as np
import pytest
from scipy.special import softmax

from labeldenoise.enums import Activation, Architecture, Modality, View
from labeldenoise.errors import FormatError, InputError
from labeldenoise.gradsuite import TOLERANCE, gradient_suite, suite_cases
from labeldenoise.models import (FrameMixConfig, HeadConfig, ResNetLikeConfig, VladBowConfig, forward_framemix,
                                 forward_resnetlike, forward_vladbow, init_model, load_model_config,
                                 model_config_from_dict, parameter_count, predict, with_dataset_dims)
from labeldenoise.frames import pad_truncate, stats_width
from labeldenoise.stream.buffer import ByteReader
from labeldenoise.stream.modelfile import analytic_size, decode_model, deserialize_model, model_bytes, \
    serialize_model

SMALL_RESNET = ResNetLikeConfig(video_dim=6, audio_dim=3, vocabulary_size=5, inner_size=8, dropout_rate=0.0)
SMALL_HEAD = ResNetLikeConfig(inner_size=6, modality=Modality.VIDEO_ONLY, dropout_rate=0.0)


def test_resnetlike_shapes(rng):
    params = init_model(SMALL_RESNET, seed=0)
    video, audio = rng.normal(size=(4, 6)), rng.normal(size=(4, 3))

    probabilities = forward_resnetlike(params, video, audio)
    assert probabilities.shape == (4, 5)
    assert np.all((probabilities > 0) & (probabilities < 1))

    out = predict(params, {'video': video, 'audio': audio}, outputs=('penultimate', 'logits'))
    assert out['penultimate'].shape == (4, 8)
    assert params.penultimate_width == 8
    np.testing.assert_allclose(1.0 / (1.0 + np.exp(-out['logits'])), probabilities)


@pytest.mark.parametrize('modality, inputs', [
    (Modality.BOTH, {'video', 'audio'}),
    (Modality.VIDEO_ONLY, {'video'}),
    (Modality.AUDIO_ONLY, {'audio'}),
])
def test_modalities_declare_their_inputs(modality, inputs):
    params = init_model(ResNetLikeConfig(video_dim=6, audio_dim=3, inner_size=4, modality=modality), seed=0)
    assert set(params.graph.input_shapes) == inputs


def test_stats_view_widens_inputs():
    config = ResNetLikeConfig(video_dim=6, audio_dim=3, inner_size=4, view=View.FRAMESTATS)
    shapes = init_model(config, seed=0).graph.input_shapes
    assert shapes['video'] == (None, 6 + stats_width(6))
    assert shapes['audio'] == (None, 3 + stats_width(3))

    with pytest.raises(InputError):
        init_model(ResNetLikeConfig(view=View.FRAMES), seed=0)


def test_init_is_seeded():
    assert init_model(SMALL_RESNET, seed=3).same_as(init_model(SMALL_RESNET, seed=3))
    assert not init_model(SMALL_RESNET, seed=3).same_as(init_model(SMALL_RESNET, seed=4))

    params = init_model(SMALL_RESNET, seed=3)
    np.testing.assert_array_equal(params.tensors['out.b'], np.zeros(5))
    np.testing.assert_array_equal(params.tensors['proj.bn.gamma'], np.ones(8))
    np.testing.assert_array_equal(params.tensors['proj.bn.running_var'], np.ones(8))


def test_parameter_count():
    params = init_model(HeadConfig(input_dim=10, vocabulary_size=4), seed=0)
    assert parameter_count(params) == 44

    params = init_model(SMALL_RESNET, seed=0)
    running = sum(value.size for name, value in params.tensors.items() if name.endswith(('running_mean',
                                                                                        'running_var')))
    assert running > 0
    assert parameter_count(params, trainable_only=True) == parameter_count(params) - running


def test_predict_in_batches_is_exact(rng):
    params = init_model(SMALL_RESNET, seed=1)
    inputs = {'video': rng.normal(size=(11, 6)), 'audio': rng.normal(size=(11, 3)), 'extra': np.zeros(11)}

    whole = predict(params, inputs)['probabilities']
    chunked = predict(params, inputs, batch_size=4)['probabilities']
    np.testing.assert_allclose(chunked, whole, rtol=1e-12)

    with pytest.raises(InputError):
        predict(params, inputs, outputs=('bow',))
    with pytest.raises(InputError):
        predict(params, {'video': inputs['video']})


def test_head_starts_at_one_half(rng):
    params = init_model(HeadConfig(input_dim=3, vocabulary_size=2), seed=0)
    out = predict(params, {'features': rng.normal(size=(4, 3))}, outputs=('probabilities', 'penultimate'))
    np.testing.assert_array_equal(out['probabilities'], np.full((4, 2), 0.5))
    assert out['penultimate'].shape == (4, 3)
    assert params.penultimate_width == 3


def vladbow(power=1.0):
    return VladBowConfig(frame_dim=4, clusters=6, power=power, max_frames=8, vocabulary_size=3, head=SMALL_HEAD)


def test_vladbow_counts_frames(rng):
    params = init_model(vladbow(), seed=0)
    for length in (1, 5, 12):
        bow = forward_vladbow(params, rng.normal(size=(length, 4)), output='bow')
        assert bow.shape == (6,)
        assert bow.sum() == pytest.approx(length)

    padded, valid = pad_truncate(rng.normal(size=(5, 4)), 8)
    mask = np.zeros((1, 8, 1))
    mask[0, :valid] = 1.0
    out = predict(params, {'frames': padded[None], 'mask': mask}, outputs=('bow',))
    assert out['bow'].sum() == pytest.approx(5.0)


def test_vladbow_power_one_is_plain_softmax(rng):
    params = init_model(vladbow(power=1.0), seed=2)
    frames = rng.normal(size=(7, 4))

    assign = forward_vladbow(params, frames, output='soft_assign')
    y = np.maximum(frames @ params.tensors['vlad.W'] + params.tensors['vlad.b'], 0.0)
    np.testing.assert_allclose(assign, softmax(y, axis=-1))


def test_vladbow_power_sharpens(rng):
    params = init_model(vladbow(power=3.0), seed=2)
    frames = rng.normal(size=(7, 4))

    assign = forward_vladbow(params, frames, output='soft_assign')
    y = np.maximum(frames @ params.tensors['vlad.W'] + params.tensors['vlad.b'], 0.0)
    np.testing.assert_allclose(assign, softmax(y ** 3, axis=-1))
    np.testing.assert_array_equal(params.tensors['vlad.p'], [3.0])


def test_framemix_starts_as_frame_average(rng):
    config = FrameMixConfig(frame_dim=4, combinations=3, max_frames=6, vocabulary_size=3, head=SMALL_HEAD)
    params = init_model(config, seed=0)
    padded, _ = pad_truncate(rng.normal(size=(6, 4)), 6)

    fused = forward_framemix(params, padded, output='fused')
    assert fused.shape == (3, 4)
    for row in fused:
        np.testing.assert_allclose(row, padded.mean(axis=0))

    assert set(params.graph.input_shapes) == {'frames'}
    assert forward_framemix(params, padded).shape == (3,)

    short, valid = pad_truncate(rng.normal(size=(2, 4)), 6)
    for row in forward_framemix(params, short, output='fused'):
        np.testing.assert_allclose(row, short[:valid].sum(axis=0) / 6)


@pytest.mark.parametrize('config', [
    SMALL_RESNET,
    ResNetLikeConfig(video_dim=6, audio_dim=3, inner_size=5, activation=Activation.TANH, view=View.SCENESTATS),
    VladBowConfig(frame_dim=4, clusters=3, max_frames=5, vocabulary_size=3, head=SMALL_HEAD),
    FrameMixConfig(frame_dim=4, combinations=2, max_frames=5, vocabulary_size=3, head=SMALL_HEAD),
    HeadConfig(input_dim=7, vocabulary_size=3),
])
def test_model_file_size_is_analytic(config, tmp_path):
    params = init_model(config, seed=5)
    size = serialize_model(params, tmp_path / 'model.ldnm')

    assert size == analytic_size(params) == (tmp_path / 'model.ldnm').stat().st_size
    loaded = deserialize_model(tmp_path / 'model.ldnm')
    assert loaded.same_as(params)
    assert loaded.architecture is config.architecture


def test_model_file_errors(tmp_path):
    data = model_bytes(init_model(SMALL_RESNET, seed=0))

    with pytest.raises(FormatError):
        decode_model(ByteReader(b'XXXX' + data[4:]))
    with pytest.raises(FormatError):
        decode_model(ByteReader(data[:-1]))

    (tmp_path / 'model.ldnm').write_bytes(data + b'\0')
    with pytest.raises(FormatError):
        deserialize_model(tmp_path / 'model.ldnm')

    other = model_bytes(init_model(ResNetLikeConfig(video_dim=6, audio_dim=3, vocabulary_size=5, inner_size=9),
                                   seed=0))
    config_end = data.index(b'"vocabulary_size":5}') + len(b'"vocabulary_size":5}')
    other_end = other.index(b'"vocabulary_size":5}') + len(b'"vocabulary_size":5}')
    with pytest.raises(FormatError):
        decode_model(ByteReader(data[:config_end] + other[other_end:]))


def test_gradient_suite_passes():
    results = gradient_suite(ResNetLikeConfig())
    assert set(results) == set(suite_cases(ResNetLikeConfig()))
    for case, error in results.items():
        assert error < TOLERANCE, case


def test_config_from_mapping():
    config = model_config_from_dict({'architecture': 'vladbow', 'clusters': 9, 'head': {'inner_size': 5}})
    assert isinstance(config, VladBowConfig)
    assert config.clusters == 9 and config.head.inner_size == 5
    assert config.head.modality is Modality.BOTH

    assert model_config_from_dict({'modality': 'audio_only'}).architecture is Architecture.RESNETLIKE

    with pytest.raises(InputError):
        model_config_from_dict({'architecture': 'transformer'})
    with pytest.raises(InputError):
        model_config_from_dict({'inner_sise': 4})
    with pytest.raises(InputError):
        model_config_from_dict({'dropout_rate': 1.0})


def test_load_model_config(tmp_path):
    path = tmp_path / 'model.json'

    path.write_text(json.dumps({'inner_size': 32, 'view_options': {'clusters': 5}}))
    config = load_model_config(path, SMALL_RESNET)
    assert config.inner_size == 32 and config.view_options.clusters == 5
    assert config.video_dim == SMALL_RESNET.video_dim

    path.write_text(json.dumps({'architecture': 'framemix', 'combinations': 2}))
    assert load_model_config(path, SMALL_RESNET) == FrameMixConfig(combinations=2)

    path.write_text('{"inner_size": ')
    with pytest.raises(FormatError):
        load_model_config(path, SMALL_RESNET)

    assert load_model_config(None, SMALL_RESNET) is SMALL_RESNET


def test_with_dataset_dims(small_dataset):
    config = with_dataset_dims(ResNetLikeConfig(inner_size=4), small_dataset)
    assert (config.video_dim, config.audio_dim, config.vocabulary_size) == (6, 3, 8)

    config = with_dataset_dims(VladBowConfig(), small_dataset)
    assert (config.frame_dim, config.vocabulary_size) == (9, 8)
