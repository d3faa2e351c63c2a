"""``PTC1`` stream container.

Layout, all integers big-endian::

    magic      4s   b"PTC1"
    width      u16
    height     u16
    ctu_log2   u8
    qp         u8
    frames     u32
    then per frame: u32 payload length, payload bytes
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

from ..core import CodecConfig, check_dims
from ..entropy import TruncatedStream

MAGIC = b"PTC1"
_HEADER = struct.Struct(">4sHHBBI")
_LEN = struct.Struct(">I")


class ContainerError(ValueError):
    pass


@dataclass
class Stream:
    width: int
    height: int
    qp: int
    ctu_size: int
    payloads: list[bytes] = field(default_factory=list)

    @property
    def cfg(self) -> CodecConfig:
        return CodecConfig(self.width, self.height, qp=self.qp, ctu_size=self.ctu_size)

    @property
    def payload_bytes(self) -> int:
        return sum(len(p) for p in self.payloads)

    def to_bytes(self) -> bytes:
        check_dims(self.width, self.height)
        parts = [_HEADER.pack(MAGIC, self.width, self.height,
                              self.ctu_size.bit_length() - 1, self.qp, len(self.payloads))]
        for p in self.payloads:
            parts.append(_LEN.pack(len(p)))
            parts.append(bytes(p))
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Stream":
        if len(data) < _HEADER.size:
            raise TruncatedStream("truncated stream: header incomplete")
        magic, w, h, ctu_log2, qp, n = _HEADER.unpack_from(data, 0)
        if magic != MAGIC:
            raise ContainerError(f"bad magic {magic!r}")
        try:
            check_dims(w, h)
        except ValueError as e:
            raise ContainerError(str(e)) from None
        if not 4 <= ctu_log2 <= 6 or qp > 51:
            raise ContainerError("bad header fields")
        pos = _HEADER.size
        payloads = []
        for i in range(n):
            if pos + _LEN.size > len(data):
                raise TruncatedStream(f"truncated stream: frame {i} length missing")
            (ln,) = _LEN.unpack_from(data, pos)
            pos += _LEN.size
            if pos + ln > len(data):
                raise TruncatedStream(
                    f"truncated stream: frame {i} declares {ln} bytes, {len(data) - pos} present")
            payloads.append(bytes(data[pos:pos + ln]))
            pos += ln
        if pos != len(data):
            raise ContainerError(f"{len(data) - pos} trailing bytes after last frame")
        return cls(w, h, qp, 1 << ctu_log2, payloads)

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "Stream":
        return cls.from_bytes(Path(path).read_bytes())
