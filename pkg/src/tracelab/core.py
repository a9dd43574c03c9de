"""Binary strings, the brute-force subsequence counter, and string families.

Indices are 1-based throughout (``bit(1)`` is the first bit) so formulas can
be transcribed without off-by-one shifts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Tuple


class BitString(str):
    """An immutable string over {0, 1}.

    Subclasses ``str`` so values hash, compare and print as their ASCII form;
    the empty string is a valid value.
    """

    __slots__ = ()

    def __new__(cls, value: "str | Iterable[int]" = "") -> "BitString":
        if isinstance(value, BitString):
            return value
        if not isinstance(value, str):
            value = "".join("1" if int(b) else "0" for b in value)
        if value.strip("01"):
            raise ValueError(f"not a binary string: {value!r}")
        return super().__new__(cls, value)

    @classmethod
    def from_int(cls, value: int, length: int) -> "BitString":
        """Decode ``value`` with the first bit as the most significant one."""
        if length == 0:
            return cls("")
        return cls(format(value, f"0{length}b"))

    def to_int(self) -> int:
        return int(self, 2) if self else 0

    @property
    def bits(self) -> Tuple[int, ...]:
        return tuple(1 if c == "1" else 0 for c in self)

    def bit(self, i: int) -> int:
        if not 1 <= i <= len(self):
            raise IndexError(f"bit index {i} outside 1..{len(self)}")
        return 1 if str.__getitem__(self, i - 1) == "1" else 0

    def sub(self, a: int, b: int) -> "BitString":
        """Return w_{a,b}; out-of-range bounds clamp and a > b gives ''."""
        a = max(a, 1)
        b = min(b, len(self))
        if a > b:
            return BitString("")
        return BitString(str.__getitem__(self, slice(a - 1, b)))

    def __add__(self, other: str) -> "BitString":
        return BitString(str.__add__(self, BitString(other)))

    def __mul__(self, times: int) -> "BitString":
        return BitString(str.__mul__(self, times))

    def ones(self) -> int:
        return self.count("1")

    def __repr__(self) -> str:
        return f"BitString({str.__repr__(self)})"


def hamming(x: str, y: str) -> int:
    if len(x) != len(y):
        raise ValueError("Hamming distance needs equal lengths")
    return sum(a != b for a, b in zip(x, y))


@dataclass(frozen=True)
class PaddedPair:
    """The pair x = (01)^k 1 (01)^(k+1), y = (01)^(k+1) 1 (01)^k of length 4k+3."""

    k: int
    x: BitString
    y: BitString

    @property
    def n(self) -> int:
        return 4 * self.k + 3

    def variant(self, which: str) -> BitString:
        if which == "x":
            return self.x
        if which == "y":
            return self.y
        raise ValueError(f"variant must be 'x' or 'y', got {which!r}")

    def lone_one_index(self, which: str) -> int:
        """1-based position of the defect 1 (2k+1 in x, 2k+3 in y)."""
        return 2 * self.k + 1 if which == "x" else 2 * self.k + 3


def make_padded_pair(k: int) -> PaddedPair:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    x = BitString("01" * k + "1" + "01" * (k + 1))
    y = BitString("01" * (k + 1) + "1" + "01" * k)
    return PaddedPair(k=k, x=x, y=y)


def padded_pair_of(s: str) -> Optional[Tuple[PaddedPair, str]]:
    """Recognise ``s`` as one side of a padded pair; returns (pair, 'x'|'y')."""
    n = len(s)
    if n < 7 or n % 4 != 3:
        return None
    pair = make_padded_pair((n - 3) // 4)
    if s == pair.x:
        return pair, "x"
    if s == pair.y:
        return pair, "y"
    return None


def contiguous_01_count(w: str) -> int:
    """Number of positions i with w_i = 0 and w_{i+1} = 1."""
    return w.count("01")


def subsequence_count_oracle(w: str, z: str) -> int:
    """Number of strictly increasing index tuples embedding ``w`` in ``z``.

    Plain O(|w| |z|) dynamic programme over exact integers; f('', z) = 1.
    """
    m = len(w)
    if m > len(z):
        return 0
    # ways[i] = embeddings of w[:i] into the prefix of z scanned so far
    ways = [1] + [0] * m
    for ch in z:
        for i in range(m, 0, -1):
            if w[i - 1] == ch:
                ways[i] += ways[i - 1]
    return ways[m]


@dataclass(frozen=True)
class EadPair:
    """Strings agreeing at indices <= k1 and >= k2 and differing strictly between."""

    x: BitString
    y: BitString
    k1: int
    k2: int


def is_ead_pair(x: str, y: str) -> Optional[EadPair]:
    """Return the (maximal k1, minimal k2) witness, or None.

    Indices are 1-based; k1 = 0 and k2 = n+1 stand for empty padding.
    """
    if len(x) != len(y):
        raise ValueError("strings must have equal length")
    n = len(x)
    diff = [i + 1 for i in range(n) if x[i] != y[i]]
    if not diff:
        return None
    k1, k2 = diff[0] - 1, diff[-1] + 1
    if len(diff) != k2 - k1 - 1:
        return None
    return EadPair(BitString(x), BitString(y), k1, k2)
