"""
Graph building blocks shared by every architecture.

Every builder declares its parameters on the graph under a dotted prefix and returns the name of its
output node. The classification tail always declares three outputs: ``penultimate`` (the activation
feeding the final affine map), ``logits`` and ``probabilities``.
"""
import logging

from ..enums import Activation

logger = logging.getLogger(__name__)

PENULTIMATE = 'penultimate'
LOGITS = 'logits'
PROBABILITIES = 'probabilities'


def dense(graph, x, prefix, fan_in, width, init='fan_in'):
    """Affine map with weights `prefix`.W and zero bias `prefix`.b."""
    weight = graph.param(f'{prefix}.W', (fan_in, width), init=init, fan_in=fan_in)
    bias = graph.param(f'{prefix}.b', (width,), init='zeros')
    return graph.affine(x, weight, bias)


def activate(graph, x, activation):
    return graph.add_node('relu' if activation is Activation.RELU else 'tanh', [x])


def stem(graph, x, prefix, fan_in, width, activation):
    """affine -> batch-norm -> activation"""
    h = dense(graph, x, f'{prefix}.fc', fan_in, width)
    h = graph.batchnorm(h, f'{prefix}.bn', width)
    return activate(graph, h, activation)


def identity_block(graph, x, prefix, width, dropout_rate, activation):
    """affine -> BN -> act -> dropout -> affine -> BN, add the skip, act"""
    h = dense(graph, x, f'{prefix}.fc1', width, width)
    h = graph.batchnorm(h, f'{prefix}.bn1', width)
    h = activate(graph, h, activation)
    h = graph.add_node('dropout', [h], rate=dropout_rate)
    h = dense(graph, h, f'{prefix}.fc2', width, width)
    h = graph.batchnorm(h, f'{prefix}.bn2', width)
    return activate(graph, graph.add_node('add', [x, h]), activation)


def classifier(graph, x, prefix, fan_in, vocabulary_size):
    """Final affine map and sigmoid; declares the three standard outputs."""
    graph.output(PENULTIMATE, x)
    logits = dense(graph, x, prefix, fan_in, vocabulary_size)
    graph.output(LOGITS, logits)
    graph.output(PROBABILITIES, graph.add_node('sigmoid', [logits]))
    return logits


def resnet_body(graph, branches, config, vocabulary_size, prefix=''):
    """The ResNet-like network over one or two input branches.

    :param branches: [(branch name, input node, input width)]
    :param config: :class:`~labeldenoise.models.config.ResNetLikeConfig` supplying width, depth,
        dropout and activation.
    :param prefix: Prepended to every parameter name, e.g. ``'head.'``.
    """
    width = config.inner_size
    outputs = []
    for branch, node, fan_in in branches:
        h = stem(graph, node, f'{prefix}{branch}.stem', fan_in, width, config.activation)
        for i in range(config.av_id_block_num):
            h = identity_block(graph, h, f'{prefix}{branch}.block{i}', width, config.dropout_rate,
                               config.activation)
        outputs.append(h)

    if len(outputs) > 1:
        h = graph.add_node('concat', outputs, axis=-1)
    else:
        h = outputs[0]

    h = stem(graph, h, f'{prefix}proj', width * len(outputs), width, config.activation)
    for i in range(config.concat_id_block_num):
        h = identity_block(graph, h, f'{prefix}concat.block{i}', width, config.dropout_rate, config.activation)

    return classifier(graph, h, f'{prefix}out', width, vocabulary_size)
