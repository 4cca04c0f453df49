"""
Little-endian binary framing: fixed-width scalars, arrays and length-prefixed strings.
"""
import logging
import struct

import numpy as np

from ..errors import InputError

logger = logging.getLogger(__name__)


class ByteWriter:
    MAX_LEN_8 = (1 << 8) - 1
    MAX_LEN_16 = (1 << 16) - 1
    MAX_LEN_32 = (1 << 32) - 1

    LIMITS = {'B': MAX_LEN_8, 'H': MAX_LEN_16, 'I': MAX_LEN_32}

    def __init__(self):
        self.frame = bytearray()

    def pack(self, fmt, *values):
        self.frame.extend(struct.pack('<' + fmt, *values))

    def array(self, values, dtype):
        self.frame.extend(np.ascontiguousarray(values, dtype=np.dtype(dtype)).tobytes())

    def text(self, value, length_fmt='H'):
        """Write a UTF-8 string behind its byte length.

        :param value: The string.
        :param length_fmt: Struct code of the length prefix, 'B', 'H' or 'I'.
        """
        data = value.encode('utf-8')
        if len(data) > ByteWriter.LIMITS[length_fmt]:
            raise InputError(f"String of {len(data)} bytes does not fit a {length_fmt!r} length prefix.")

        self.pack(length_fmt, len(data))
        self.frame.extend(data)

    def raw(self, data):
        self.frame.extend(data)

    def getvalue(self):
        return bytes(self.frame)

    def __len__(self):
        return len(self.frame)

    def save(self, path):
        """Write the frame to `path`.

        :return: The number of bytes written.
        """
        with open(path, 'wb') as f:
            f.write(self.frame)
        return len(self.frame)
