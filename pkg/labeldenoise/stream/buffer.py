"""
Sequential reading of binary file images, truncation reported with its byte offset.

>>> reader = ByteReader.open('train.ldns')
>>> magic = reader.read_exactly(4)
>>> version = reader.scalar('I')
"""
import logging
import struct

import numpy as np

from ..errors import FormatError

logger = logging.getLogger(__name__)


class IncompleteReadError(FormatError):
    def __init__(self, name, offset, available, expected):
        super().__init__(f"{name}: truncated at byte offset {offset}, "
                         f"{available} bytes available of {expected} expected bytes")
        self.offset = offset


class ByteReader:
    """A read head over an in-memory copy of a file.

    :ivar read_head: Offset of the next byte to read.
    :type read_head: int
    :ivar name: Used in error messages, usually the path.
    :type name: str
    """

    def __init__(self, data, name='<bytes>'):
        self.backing = memoryview(data)
        self.limit = len(data)
        self.read_head = 0
        self.name = name

    @classmethod
    def open(cls, path):
        with open(path, 'rb') as f:
            return cls(f.read(), str(path))

    @property
    def read_available(self):
        return self.limit - self.read_head

    def read_exactly(self, n):
        """Read n bytes or throw if the file ends first.

        :param n: The amount of data to read.
        :return: :class:`bytes`
        """
        if self.read_available < n:
            raise IncompleteReadError(self.name, self.read_head, self.read_available, n)

        data = bytes(self.backing[self.read_head:self.read_head + n])
        self.read_head += n
        return data

    def unpack(self, fmt):
        """Read one little-endian struct, `fmt` is given without its byte-order prefix."""
        fmt = '<' + fmt
        return struct.unpack(fmt, self.read_exactly(struct.calcsize(fmt)))

    def scalar(self, fmt):
        value, = self.unpack(fmt)
        return value

    def array(self, count, dtype):
        """Read `count` values of a little-endian numpy dtype such as '<f4'."""
        dtype = np.dtype(dtype)
        return np.frombuffer(self.read_exactly(count * dtype.itemsize), dtype=dtype).copy()

    def text(self, length_fmt='H'):
        """Read a UTF-8 string stored behind its byte length."""
        length = self.scalar(length_fmt)
        offset = self.read_head
        try:
            return self.read_exactly(length).decode('utf-8')
        except UnicodeDecodeError as e:
            raise FormatError(f"{self.name}: invalid utf8 at byte offset {offset + e.start}")

    def at_eof(self):
        """
        :return: True iff there is no more data to read.
        """
        return self.read_available == 0
