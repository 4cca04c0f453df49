import numpy as np
import pytest

from labeldenoise.diff import Graph, check_graph_gradients
from labeldenoise.enums import Mode
from labeldenoise.errors import InputError, NumericError

TOLERANCE = 1e-4
POINTS = 50


def weighted_loss(graph, node, weights):
    product = graph.add_node('multiply', [node, graph.const(weights)])
    graph.output('loss', graph.add_node('sum', [product], axis=None))


def signed_weights(rng, shape):
    return rng.choice([-1.0, 1.0], size=shape) * rng.uniform(0.5, 1.5, size=shape)


def away_from_kinks(values):
    return np.where(np.abs(values) < 1e-3, 0.5, values)


def unary_graph(op, shape, rng, **attrs):
    graph = Graph()
    p = graph.param('P', shape)
    y = graph.add_node(op, [p], **attrs)
    out_shape = np.shape(graph.evaluate({}, {'P': np.ones(shape)}).values[y])
    weighted_loss(graph, y, signed_weights(rng, out_shape))
    return graph


@pytest.mark.parametrize('op, attrs', [
    ('tanh', {}),
    ('sigmoid', {}),
    ('softmax', {}),
    ('exp', {}),
    ('relu', {}),
    ('mean', {'axis': 0}),
    ('sum', {'axis': 1}),
    ('flatten', {}),
    ('clamp', {'low': -10.0, 'high': 10.0}),
])
def test_unary_gradients(op, attrs, rng):
    graph = unary_graph(op, (2, 3), rng, **attrs)
    for _ in range(POINTS):
        params = {'P': away_from_kinks(rng.normal(size=(2, 3)))}
        assert check_graph_gradients(graph, {}, params, 'loss')['P'] < TOLERANCE


def test_log_gradient(rng):
    graph = Graph()
    p = graph.param('P', (2, 3))
    y = graph.add_node('log', [graph.add_node('sigmoid', [p])])
    weighted_loss(graph, y, signed_weights(rng, (2, 3)))
    for _ in range(POINTS):
        assert check_graph_gradients(graph, {}, {'P': rng.normal(size=(2, 3))}, 'loss')['P'] < TOLERANCE


def test_add_broadcast_gradient(rng):
    graph = Graph()
    a = graph.param('A', (4, 3))
    s = graph.param('s', (3,))
    weighted_loss(graph, graph.add_node('add', [a, s]), signed_weights(rng, (4, 3)))
    for _ in range(POINTS):
        params = {'A': rng.normal(size=(4, 3)), 's': rng.normal(size=3)}
        assert max(check_graph_gradients(graph, {}, params, 'loss').values()) < TOLERANCE


def test_affine_matmul_concat_gradients(rng):
    graph = Graph()
    x = graph.input('x', (None, 3))
    h = graph.affine(x, graph.param('W', (3, 4)), graph.param('b', (4,), init='zeros'))
    c = graph.param('C', (2, 5))
    frames = graph.input('frames', (None, 5, 4))
    fused = graph.add_node('matmul', [c, frames])
    joined = graph.add_node('concat', [h, graph.add_node('flatten', [fused])], axis=-1)
    weighted_loss(graph, graph.add_node('tanh', [joined]), signed_weights(rng, (6, 12)))

    for _ in range(POINTS):
        inputs = {'x': 0.5 * rng.normal(size=(6, 3)), 'frames': 0.5 * rng.normal(size=(6, 5, 4))}
        params = {'W': 0.5 * rng.normal(size=(3, 4)), 'b': 0.5 * rng.normal(size=4),
                  'C': 0.5 * rng.normal(size=(2, 5))}
        errors = check_graph_gradients(graph, inputs, params, 'loss')
        assert max(errors.values()) < TOLERANCE


def test_multiply_broadcast_gradient(rng):
    graph = Graph()
    a = graph.param('A', (4, 3))
    s = graph.param('s', (3,))
    weighted_loss(graph, graph.add_node('multiply', [a, s]), signed_weights(rng, (4, 3)))
    for _ in range(POINTS):
        params = {'A': rng.normal(size=(4, 3)), 's': rng.normal(size=3)}
        assert max(check_graph_gradients(graph, {}, params, 'loss').values()) < TOLERANCE


def batchnorm_graph(rng):
    graph = Graph()
    x = graph.input('x', (None, 3))
    h = graph.affine(x, graph.param('W', (3, 3)), graph.param('b', (3,), init='zeros'))
    y = graph.batchnorm(h, 'bn', 3)
    weighted_loss(graph, y, signed_weights(rng, (8, 3)))
    return graph


def batchnorm_params(rng):
    return {'W': rng.normal(size=(3, 3)), 'b': rng.normal(size=3), 'bn.gamma': rng.uniform(0.5, 1.5, 3),
            'bn.beta': rng.normal(size=3), 'bn.running_mean': rng.normal(size=3),
            'bn.running_var': rng.uniform(0.5, 1.5, 3)}


@pytest.mark.parametrize('mode', [Mode.TRAIN, Mode.EVAL])
def test_batchnorm_gradients(mode, rng):
    graph = batchnorm_graph(rng)
    for _ in range(POINTS):
        inputs = {'x': rng.normal(size=(8, 3))}
        errors = check_graph_gradients(graph, inputs, batchnorm_params(rng), 'loss', mode=mode,
                                       names=['W', 'bn.gamma', 'bn.beta'])
        assert max(errors.values()) < TOLERANCE


def test_batchnorm_running_statistics(rng):
    graph = batchnorm_graph(rng)
    params = batchnorm_params(rng)
    x = rng.normal(size=(8, 3))

    trace = graph.evaluate({'x': x}, params, Mode.TRAIN)
    h = x @ params['W'] + params['b']
    np.testing.assert_allclose(trace.buffer_updates['bn.running_mean'],
                               0.9 * params['bn.running_mean'] + 0.1 * h.mean(axis=0))
    np.testing.assert_allclose(trace.buffer_updates['bn.running_var'],
                               0.9 * params['bn.running_var'] + 0.1 * h.var(axis=0))

    assert graph.evaluate({'x': x}, params, Mode.EVAL).buffer_updates == {}
    assert 'bn.running_mean' not in graph.trainable


def test_dropout_modes(rng):
    graph = Graph()
    x = graph.input('x', (None, 200))
    graph.output('y', graph.add_node('dropout', [x], rate=0.5))
    ones = np.ones((4, 200))

    np.testing.assert_array_equal(graph.evaluate({'x': ones}, {}, Mode.EVAL)['y'], ones)

    y = graph.evaluate({'x': ones}, {}, Mode.TRAIN, rng)['y']
    assert set(np.unique(y)) == {0.0, 2.0}

    with pytest.raises(InputError):
        graph.evaluate({'x': ones}, {}, Mode.TRAIN)


@pytest.mark.parametrize('rate', [0.1, 0.25, 0.5])
def test_dropout_keeps_the_expectation(rate, rng):
    graph = Graph()
    x = graph.input('x', (None, 2))
    graph.output('y', graph.add_node('dropout', [x], rate=rate))
    values = np.tile([1.0, -2.0], (100000, 1))

    y = graph.evaluate({'x': values}, {}, Mode.TRAIN, rng)['y']
    np.testing.assert_allclose(y.mean(axis=0), [1.0, -2.0], rtol=0.02)


@pytest.mark.parametrize('batch', [
    np.array([[0.0, 10.0, -50.0], [20.0, 0.0, 50.0]]),
    100.0 * np.random.default_rng(1).normal(size=(8, 3)) + 7.0,
    100.0 * np.random.default_rng(2).normal(size=(64, 3)),
])
def test_batchnorm_train_output_is_standardized(batch):
    graph = Graph()
    x = graph.input('x', (None, 3))
    graph.output('y', graph.batchnorm(x, 'bn', 3))
    params = {'bn.gamma': np.ones(3), 'bn.beta': np.zeros(3), 'bn.running_mean': np.zeros(3),
              'bn.running_var': np.ones(3)}

    y = graph.evaluate({'x': batch}, params, Mode.TRAIN)['y']
    assert np.all(np.abs(y.mean(axis=0)) < 1e-6)
    assert np.all(np.abs(y.var(axis=0) - 1.0) < 1e-6)


def test_eval_is_bit_identical(rng):
    graph = Graph()
    x = graph.input('x', (None, 3))
    h = graph.affine(x, graph.param('W', (3, 3)), graph.param('b', (3,), init='zeros'))
    y = graph.add_node('dropout', [graph.batchnorm(h, 'bn', 3)], rate=0.5)
    graph.output('y', graph.add_node('sigmoid', [y]))

    inputs = {'x': rng.normal(size=(5, 3))}
    params = batchnorm_params(rng)
    first = graph.evaluate(inputs, params, Mode.EVAL, np.random.default_rng(1))['y']
    second = graph.evaluate(inputs, params, Mode.EVAL, np.random.default_rng(2))['y']
    assert first.tobytes() == second.tobytes()


def test_power_forward_and_gradient(rng):
    graph = Graph()
    u = graph.input('u', (None, 4))
    p = graph.param('p', (1,), init='const', value=1.0)
    y = graph.add_node('power', [u, p])
    graph.output('y', y)
    weighted_loss(graph, y, rng.normal(size=(3, 4)))

    values = np.array([[-1.0, 0.0, 0.5, 2.0]] * 3)
    trace = graph.evaluate({'u': values}, {'p': np.array([1.0])})
    np.testing.assert_array_equal(trace['y'], np.maximum(values, 0.0))

    trace = graph.evaluate({'u': values}, {'p': np.array([2.5])})
    np.testing.assert_allclose(trace['y'][0], [0.0, 0.0, 0.5 ** 2.5, 2.0 ** 2.5])

    positive = rng.uniform(0.2, 2.0, size=(3, 4))
    errors = check_graph_gradients(graph, {'u': positive}, {'p': np.array([1.7])}, 'loss')
    assert errors['p'] < TOLERANCE


def test_power_gradient_vanishes_at_zero():
    graph = Graph()
    u = graph.param('u', (1, 3))
    p = graph.param('p', (1,))
    graph.output('loss', graph.add_node('sum', [graph.add_node('power', [u, p])], axis=None))

    params = {'u': np.array([[0.0, -1.0, 4.0]]), 'p': np.array([0.5])}
    grads = graph.backward(graph.evaluate({}, params), 'loss')
    np.testing.assert_allclose(grads['u'], [[0.0, 0.0, 0.25]])
    np.testing.assert_allclose(grads['p'], [2.0 * np.log(4.0)])


def test_seed_mapping_matches_scalar_loss(rng):
    graph = Graph()
    x = graph.input('x', (None, 3))
    logits = graph.affine(x, graph.param('W', (3, 2)), graph.param('b', (2,), init='zeros'))
    graph.output('logits', logits)
    graph.output('loss', graph.add_node('sum', [logits], axis=None))

    trace = graph.evaluate({'x': rng.normal(size=(5, 3))}, {'W': rng.normal(size=(3, 2)), 'b': np.zeros(2)})
    by_name = graph.backward(trace, 'loss')
    by_seed = graph.backward(trace, {'logits': np.ones((5, 2))})
    for name in by_name:
        np.testing.assert_allclose(by_name[name], by_seed[name])


def test_non_finite_value_names_its_node():
    graph = Graph()
    x = graph.input('x', (None, 1))
    graph.add_node('log', [x], name='bad_log')

    with pytest.raises(NumericError) as e:
        graph.evaluate({'x': np.array([[-1.0]])}, {})
    assert e.value.node == 'bad_log'


def test_declaration_errors():
    graph = Graph()
    x = graph.input('x', (None, 2))
    with pytest.raises(InputError):
        graph.add_node('conv', [x])
    with pytest.raises(InputError):
        graph.add_node('relu', ['missing'])
    with pytest.raises(InputError):
        graph.add_node('relu', [x], name='x')


def test_input_shape_is_checked():
    graph = Graph()
    graph.output('y', graph.add_node('relu', [graph.input('x', (None, 2))]))
    with pytest.raises(InputError):
        graph.evaluate({'x': np.ones((3, 4))}, {})
    with pytest.raises(InputError):
        graph.evaluate({}, {})
