"""Exact GF(2) bit vectors.

A :class:`BitVector` of length ``n`` holds bits ``x_{n-1} ... x_0``. The text
form is written most-significant first, so ``BitVector.from_str("110")`` has
``x_2 = 1, x_1 = 1, x_0 = 0``. Internally the bits are packed into a Python
int whose bit ``k`` is ``x_k``; every operation below is defined on the text
form and the packing is only an implementation detail.
"""

from __future__ import annotations

from typing import Iterable, Sequence, Union

from .errors import LengthMismatch

__all__ = [
    "BitVector",
    "as_bitvector",
    "concat",
    "dot_mod2",
    "make_aux_b",
    "make_aux_c",
    "split_at",
    "xor",
    "zeros",
]


class BitVector:
    """Immutable fixed-length bit vector."""

    __slots__ = ("_value", "_length")

    def __init__(self, value: int = 0, length: int = 0):
        if length < 0:
            raise ValueError(f"length must be non-negative, got {length}")
        if value < 0 or value >> length:
            raise ValueError(f"value {value} does not fit in {length} bits")
        object.__setattr__(self, "_value", int(value))
        object.__setattr__(self, "_length", int(length))

    def __setattr__(self, name, value):
        raise AttributeError("BitVector is immutable")

    @classmethod
    def from_str(cls, text: str) -> "BitVector":
        if any(ch not in "01" for ch in text):
            raise ValueError(f"not a bitstring: {text!r}")
        return cls(int(text, 2) if text else 0, len(text))

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> "BitVector":
        """Build from bits listed most-significant first."""
        bits = list(bits)
        value = 0
        for b in bits:
            if b not in (0, 1):
                raise ValueError(f"bit values must be 0 or 1, got {b!r}")
            value = (value << 1) | int(b)
        return cls(value, len(bits))

    @property
    def value(self) -> int:
        return self._value

    @property
    def bits(self) -> tuple[int, ...]:
        """Bits in text order: ``(x_{n-1}, ..., x_0)``."""
        return tuple((self._value >> k) & 1 for k in range(self._length - 1, -1, -1))

    def bit(self, k: int) -> int:
        """Return ``x_k`` (``k = 0`` is the least significant bit)."""
        if not 0 <= k < self._length:
            raise IndexError(k)
        return (self._value >> k) & 1

    def weight(self) -> int:
        return self._value.bit_count()

    def __len__(self) -> int:
        return self._length

    def __str__(self) -> str:
        return format(self._value, f"0{self._length}b") if self._length else ""

    def __repr__(self) -> str:
        return f"BitVector('{self}')"

    def __eq__(self, other) -> bool:
        if isinstance(other, BitVector):
            return self._length == other._length and self._value == other._value
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self._value, self._length))

    def __xor__(self, other: "BitVector") -> "BitVector":
        return xor(self, other)

    def __add__(self, other: "BitVector") -> "BitVector":
        return concat(self, other)

    def __iter__(self):
        return iter(self.bits)


BitLike = Union[BitVector, str, Sequence[int]]


def as_bitvector(v: BitLike) -> BitVector:
    if isinstance(v, BitVector):
        return v
    if isinstance(v, str):
        return BitVector.from_str(v)
    return BitVector.from_bits(v)


def zeros(n: int) -> BitVector:
    return BitVector(0, n)


def _check_same_length(u: BitVector, v: BitVector, op: str) -> None:
    if len(u) != len(v):
        raise LengthMismatch(f"{op}: lengths differ ({len(u)} vs {len(v)})")


def dot_mod2(z: BitLike, x: BitLike) -> int:
    """Inner product modulo 2: ``z_{n-1}x_{n-1} xor ... xor z_0x_0``."""
    z, x = as_bitvector(z), as_bitvector(x)
    _check_same_length(z, x, "dot_mod2")
    return (z.value & x.value).bit_count() & 1


def xor(u: BitLike, v: BitLike) -> BitVector:
    u, v = as_bitvector(u), as_bitvector(v)
    _check_same_length(u, v, "xor")
    return BitVector(u.value ^ v.value, len(u))


def concat(hi: BitLike, lo: BitLike) -> BitVector:
    """Place ``hi`` in the leading (most significant) positions and ``lo`` after it."""
    hi, lo = as_bitvector(hi), as_bitvector(lo)
    return BitVector((hi.value << len(lo)) | lo.value, len(hi) + len(lo))


def split_at(v: BitLike, hi_len: int) -> tuple[BitVector, BitVector]:
    """Inverse of :func:`concat`: the first ``hi_len`` bits of the text form, then the rest."""
    v = as_bitvector(v)
    if not 0 <= hi_len <= len(v):
        raise LengthMismatch(f"split_at: cannot take {hi_len} bits from a {len(v)}-bit vector")
    lo_len = len(v) - hi_len
    return BitVector(v.value >> lo_len, hi_len), BitVector(v.value & ((1 << lo_len) - 1), lo_len)


def make_aux_b(i_b: BitLike, len_c: int) -> BitVector:
    """Bob's secret followed by ``len_c`` zeros."""
    return concat(i_b, zeros(len_c))


def make_aux_c(i_c: BitLike, len_b: int) -> BitVector:
    """``len_b`` zeros followed by Charlie's secret."""
    return concat(zeros(len_b), i_c)
