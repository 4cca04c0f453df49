"""
The model file.

Layout, all little-endian::

    "LDNM" u32 version
    u16 tag_length, architecture tag
    u32 config_length, canonical JSON config
    u32 tensor_count
    per tensor: u16 name_length, name, u8 rank, rank x u32 extents, f64 data in row-major order

Batch-norm running statistics are stored like any other tensor.
"""
import json
import logging

import numpy as np

from .buffer import ByteReader
from .writer import ByteWriter
from ..config import canonical, from_dict
from ..errors import FormatError, InputError
from ..models.config import config_class
from ..models.params import ModelParams, build_graph

logger = logging.getLogger(__name__)

MAGIC = b'LDNM'
VERSION = 1


def encode_model(params, writer=None):
    writer = writer or ByteWriter()
    writer.raw(MAGIC)
    writer.pack('I', VERSION)
    writer.text(params.architecture.value, 'H')
    writer.text(canonical(params.config), 'I')
    writer.pack('I', len(params.tensors))

    for name, value in params.tensors.items():
        writer.text(name, 'H')
        writer.pack('B', value.ndim)
        writer.array(value.shape, '<u4')
        writer.array(value, '<f8')

    return writer


def model_bytes(params):
    return encode_model(params).getvalue()


def serialize_model(params, path):
    """Write a model file.

    :param params: :class:`~labeldenoise.models.params.ModelParams`
    :return: size_bytes, the length of the written file.
    """
    size = encode_model(params).save(path)
    logger.debug(f"Wrote {params!r} to {path} ({size} bytes).")
    return size


def config_size(config):
    """File size of any model with this config, from the format alone; no tensor is allocated."""
    header = 4 + 4 + 2 + len(config.architecture.value.encode('utf-8'))
    header += 4 + len(canonical(config).encode('utf-8')) + 4
    tensors = sum(2 + len(name.encode('utf-8')) + 1 + 4 * len(spec.shape) + 8 * spec.size()
                  for name, spec in build_graph(config).params.items())
    return header + tensors


def analytic_size(params):
    """File size predicted from the format: header, config text and 8 bytes per parameter."""
    return config_size(params.config)


def decode_model(reader):
    """Parse one model from a :class:`~labeldenoise.stream.buffer.ByteReader`, leaving the read head after it."""
    if reader.read_exactly(4) != MAGIC:
        raise FormatError(f"{reader.name}: not a model file (bad magic).")

    version = reader.scalar('I')
    if version != VERSION:
        raise FormatError(f"{reader.name}: unsupported model version {version}.")

    tag = reader.text('H')
    text = reader.text('I')
    try:
        config = from_dict(config_class(tag), json.loads(text))
    except (InputError, json.JSONDecodeError) as e:
        raise FormatError(f"{reader.name}: invalid model config: {e}")

    tensors = {}
    for _ in range(reader.scalar('I')):
        name = reader.text('H')
        rank = reader.scalar('B')
        shape = tuple(int(extent) for extent in reader.array(rank, '<u4'))
        tensors[name] = reader.array(int(np.prod(shape, dtype=np.int64)), '<f8').reshape(shape)

    declared = build_graph(config).params
    if set(declared) != set(tensors) or any(declared[name].shape != tensors[name].shape for name in tensors):
        raise FormatError(f"{reader.name}: tensors do not match the {tag} architecture.")

    return ModelParams(config, tensors)


def deserialize_model(path):
    """Read a model file written by :func:`serialize_model`.

    :return: :class:`~labeldenoise.models.params.ModelParams`
    """
    reader = ByteReader.open(path)
    params = decode_model(reader)
    if not reader.at_eof():
        raise FormatError(f"{path}: {reader.read_available} trailing bytes after the model.")
    return params
