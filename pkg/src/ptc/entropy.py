"""Adaptive binary range coder with indexed context models.

Bins are coded against a 16-bit probability of ``1`` held per context;
``BYPASS`` bins are coded at exactly one half and never touch a context.
The arithmetic is LZMA-style: a 32-bit range, a 33-bit ``low`` with a
cached byte for carry propagation, and byte-wise renormalisation.
"""

from __future__ import annotations

from typing import Iterable, NamedTuple

BYPASS = -1
NUM_CONTEXTS = 15

PROB_INIT = 32768
PROB_MIN = 256
PROB_MAX = 65280
ADAPT_SHIFT = 5

_TOP = 1 << 24
_MASK32 = 0xFFFFFFFF
FLUSH_BYTES = 5


class TruncatedStream(Exception):
    """The payload ended before the decoder had read every byte it needed."""


class BinRecord(NamedTuple):
    bin: int
    ctx: int


def init_contexts() -> list[int]:
    return [PROB_INIT] * NUM_CONTEXTS


def update_prob(p: int, b: int) -> int:
    if b:
        p += (65536 - p) >> ADAPT_SHIFT
        return PROB_MAX if p > PROB_MAX else p
    p -= p >> ADAPT_SHIFT
    return PROB_MIN if p < PROB_MIN else p


class RangeEncoder:
    def __init__(self, contexts: list[int] | None = None):
        self.contexts = init_contexts() if contexts is None else list(contexts)
        self.low = 0
        self.range = _MASK32
        self._cache = 0
        self._cache_size = 1
        self._out = bytearray()
        self.bin_count = 0

    @property
    def bytes_out(self) -> int:
        """Bytes already final; later bins cannot change them."""
        return len(self._out)

    def _shift_low(self) -> None:
        low = self.low
        if (low & _MASK32) < 0xFF000000 or low > _MASK32:
            carry = low >> 32
            out = self._out
            out.append((self._cache + carry) & 0xFF)
            for _ in range(self._cache_size - 1):
                out.append((0xFF + carry) & 0xFF)
            self._cache_size = 0
            self._cache = (low >> 24) & 0xFF
        self._cache_size += 1
        self.low = (low & 0x00FFFFFF) << 8

    def encode_bin(self, b: int, ctx: int) -> None:
        self.encode_bins(((b, ctx),))

    def encode_bins(self, records: Iterable[tuple[int, int]]) -> None:
        """Encode a sequence of ``(bin, ctx)`` pairs.

        This is the hot loop of the codec, so state lives in locals and the
        carry logic of ``_shift_low`` is inlined.
        """
        probs = self.contexts
        out = self._out
        low = self.low
        rng = self.range
        cache = self._cache
        cache_size = self._cache_size
        n = 0
        for b, c in records:
            n += 1
            if c < 0:
                rng >>= 1
                if b:
                    low += rng
            else:
                p = probs[c]
                bound = (rng >> 16) * p
                if b:
                    rng = bound
                    p += (65536 - p) >> 5
                    if p > PROB_MAX:
                        p = PROB_MAX
                else:
                    low += bound
                    rng -= bound
                    p -= p >> 5
                    if p < PROB_MIN:
                        p = PROB_MIN
                probs[c] = p
            while rng < _TOP:
                if (low & _MASK32) < 0xFF000000 or low > _MASK32:
                    carry = low >> 32
                    out.append((cache + carry) & 0xFF)
                    if cache_size > 1:
                        out.extend(bytes([(0xFF + carry) & 0xFF]) * (cache_size - 1))
                    cache_size = 0
                    cache = (low >> 24) & 0xFF
                cache_size += 1
                low = (low & 0x00FFFFFF) << 8
                rng <<= 8
        self.low = low
        self.range = rng
        self._cache = cache
        self._cache_size = cache_size
        self.bin_count += n

    def flush(self) -> bytes:
        for _ in range(FLUSH_BYTES):
            self._shift_low()
        return bytes(self._out)


class RangeDecoder:
    def __init__(self, data: bytes, contexts: list[int] | None = None):
        self.contexts = init_contexts() if contexts is None else list(contexts)
        self.data = data
        self.pos = 0
        self.range = _MASK32
        self.code = 0
        for _ in range(FLUSH_BYTES):
            self.code = (self.code << 8) | self._next_byte()

    def _next_byte(self) -> int:
        if self.pos >= len(self.data):
            raise TruncatedStream(
                f"payload exhausted after {len(self.data)} bytes")
        b = self.data[self.pos]
        self.pos += 1
        return b

    def decode_bin(self, ctx: int) -> int:
        rng = self.range
        code = self.code
        if ctx < 0:
            rng >>= 1
            if code >= rng:
                code -= rng
                b = 1
            else:
                b = 0
        else:
            probs = self.contexts
            p = probs[ctx]
            bound = (rng >> 16) * p
            if code < bound:
                rng = bound
                b = 1
                p += (65536 - p) >> 5
                if p > PROB_MAX:
                    p = PROB_MAX
            else:
                code -= bound
                rng -= bound
                b = 0
                p -= p >> 5
                if p < PROB_MIN:
                    p = PROB_MIN
            probs[ctx] = p
        while rng < _TOP:
            rng <<= 8
            code = (code << 8) | self._next_byte()
        self.range = rng
        self.code = code
        return b

    def decode_bins(self, ctxs: Iterable[int]) -> list[int]:
        return [self.decode_bin(c) for c in ctxs]

    @property
    def exhausted(self) -> bool:
        return self.pos >= len(self.data)


def encode_records(records: Iterable[tuple[int, int]]) -> bytes:
    """Encode bins from fresh contexts and flush."""
    enc = RangeEncoder()
    enc.encode_bins(records)
    return enc.flush()
