"""
The portable dataset file.

Layout, all little-endian::

    "LDNS" u32 version u32 vocabulary_size u32 D_v u32 D_a u8 frames_flag u64 record_count
    per record:
        u16 id_length, UTF-8 id
        D_v x f32 video_feat, D_a x f32 audio_feat
        [frames_flag] u32 T, T x (D_v + D_a) x f32
        u16 n_noisy, n_noisy x u32
        u8 clean_flag, [clean_flag] u16 n_clean, n_clean x u32

Features are stored in 32 bits and widened to 64 bits on load.
"""
import logging

import numpy as np

from .buffer import ByteReader
from .writer import ByteWriter
from ..data.records import Dataset, VideoRecord
from ..errors import FormatError, InputError

logger = logging.getLogger(__name__)

MAGIC = b'LDNS'
VERSION = 1


def encode_dataset(dataset):
    frames_flag = dataset.has_frames
    if not frames_flag and any(record.frames is not None for record in dataset.records):
        logger.warning("Some records lack frames, writing the dataset without any frames.")

    writer = ByteWriter()
    writer.raw(MAGIC)
    writer.pack('IIIIBQ', VERSION, dataset.vocabulary_size, dataset.video_dim, dataset.audio_dim,
                int(frames_flag), len(dataset.records))

    for record in dataset.records:
        if not (np.all(np.isfinite(record.video_feat)) and np.all(np.isfinite(record.audio_feat))):
            raise InputError(f"Record {record.id!r} has non-finite features.")

        writer.text(record.id)
        writer.array(record.video_feat, '<f4')
        writer.array(record.audio_feat, '<f4')

        if frames_flag:
            writer.pack('I', record.frames.shape[0])
            writer.array(record.frames, '<f4')

        noisy = sorted(record.noisy_labels)
        writer.pack('H', len(noisy))
        writer.array(noisy, '<u4')

        if record.clean_labels is None:
            writer.pack('B', 0)
        else:
            clean = sorted(record.clean_labels)
            writer.pack('BH', 1, len(clean))
            writer.array(clean, '<u4')

    return writer


def write_dataset(path, dataset):
    """Write a dataset file.

    :return: The file size in bytes.
    """
    return encode_dataset(dataset).save(path)


def _labels(reader):
    count = reader.scalar('H')
    return frozenset(int(label) for label in reader.array(count, '<u4'))


def decode_dataset(reader):
    """Parse a dataset from a :class:`~labeldenoise.stream.buffer.ByteReader`."""
    if reader.read_exactly(4) != MAGIC:
        raise FormatError(f"{reader.name}: not a dataset file (bad magic).")

    version, vocabulary_size, video_dim, audio_dim, frames_flag, count = reader.unpack('IIIIBQ')
    if version != VERSION:
        raise FormatError(f"{reader.name}: unsupported dataset version {version}.")

    records = []
    for _ in range(count):
        record_id = reader.text()
        video = reader.array(video_dim, '<f4').astype(np.float64)
        audio = reader.array(audio_dim, '<f4').astype(np.float64)

        frames = None
        if frames_flag:
            length = reader.scalar('I')
            frames = reader.array(length * (video_dim + audio_dim), '<f4').astype(np.float64)
            frames = frames.reshape(length, video_dim + audio_dim)

        noisy = _labels(reader)
        clean = _labels(reader) if reader.scalar('B') else None
        records.append(VideoRecord(record_id, video, audio, frames, noisy, clean))

    if not reader.at_eof():
        raise FormatError(f"{reader.name}: {reader.read_available} trailing bytes at offset {reader.read_head}.")

    try:
        return Dataset(vocabulary_size, video_dim, audio_dim, records).validate()
    except InputError as e:
        raise FormatError(f"{reader.name}: {e}")


def load_dataset(path, groups_path=None):
    """Read a dataset file, optionally attaching a group map.

    :param path: The dataset file.
    :param groups_path: Optional `label_index<TAB>group_name` file.
    :return: :class:`~labeldenoise.data.records.Dataset`
    """
    dataset = decode_dataset(ByteReader.open(path))
    if groups_path is not None:
        dataset.groups = read_groups(groups_path)

    logger.debug(f"Loaded {len(dataset)} records from {path}.")
    return dataset


def write_groups(path, groups):
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        for label in sorted(groups):
            f.write(f"{label}\t{groups[label]}\n")


def read_groups(path):
    groups = {}
    with open(path, encoding='utf-8') as f:
        for number, line in enumerate(f, start=1):
            line = line.rstrip('\n')
            if not line:
                continue

            try:
                label, name = line.split('\t', 1)
                groups[int(label)] = name
            except ValueError:
                raise FormatError(f"{path}: line {number}: expected 'label_index<TAB>group_name'.")

    return groups
