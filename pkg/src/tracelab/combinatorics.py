"""Exact and log-space binomials, subsequence closed forms, segment counts.

All counting helpers are total: out-of-range arguments give 0 rather than
raising, so sums can run over generous index ranges.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import List, Tuple

import mpmath
import numpy as np

from tracelab.core import contiguous_01_count


def binomial_exact(n: int, r: int) -> int:
    if n < 0 or r < 0 or r > n:
        return 0
    return math.comb(n, r)


class BinomialTable:
    """Factorials up to ``max_n``, exact and as natural logs.

    The float logs come from 256-bit mpmath log-gamma, rounded once, so a
    log-binomial carries only the rounding of three table entries.
    """

    def __init__(self, max_n: int):
        if max_n < 0:
            raise ValueError("max_n must be non-negative")
        self.max_n = max_n
        fact = [1] * (max_n + 1)
        for i in range(1, max_n + 1):
            fact[i] = fact[i - 1] * i
        self.factorials: Tuple[int, ...] = tuple(fact)
        with mpmath.workprec(256):
            logs = [float(mpmath.loggamma(i + 1)) for i in range(max_n + 1)]
        self.log_factorials = np.array(logs, dtype=np.float64)
        self.log_factorials.flags.writeable = False

    def exact(self, n: int, r: int) -> int:
        if n < 0 or r < 0 or r > n:
            return 0
        f = self.factorials
        return f[n] // (f[r] * f[n - r])

    def log(self, n: int, r: int) -> float:
        if n < 0 or r < 0 or r > n:
            return -math.inf
        lf = self.log_factorials
        return float(lf[n] - lf[r] - lf[n - r])

    def log_array(self, n: np.ndarray, r: np.ndarray) -> np.ndarray:
        """Vectorised log C(n, r); -inf where the coefficient vanishes."""
        n = np.asarray(n)
        r = np.asarray(r)
        ok = (n >= 0) & (r >= 0) & (r <= n)
        nn = np.where(ok, n, 0)
        rr = np.where(ok, r, 0)
        lf = self.log_factorials
        out = lf[nn] - lf[rr] - lf[nn - rr]
        return np.where(ok, out, -np.inf)


@lru_cache(maxsize=8)
def log_table(max_n: int) -> BinomialTable:
    return BinomialTable(max_n)


def zigzag_subseq_count(k: int, w: str) -> int:
    """f(w; (01)^k) = C(k + f_c(w), |w|)."""
    return binomial_exact(k + contiguous_01_count(w), len(w))


def fc_class_count(l: int, a: int) -> int:
    """Number of length-l strings with exactly ``a`` contiguous 01s."""
    if l < 0 or a < 0:
        return 0
    return binomial_exact(l + 1, 2 * a + 1)


class FcClassTable:
    """T(l, a, last): length-l strings with f_c = a ending in bit ``last``.

    Built from the recurrence alone (no closed forms). The empty string is
    booked under last = 1: a leading 1 never starts a 01, so it is the
    neutral left boundary for concatenation.
    """

    def __init__(self, max_l: int):
        self.max_l = max_l
        rows: List[List[Tuple[int, int]]] = [[(0, 1)]]
        for l in range(1, max_l + 1):
            prev = rows[-1]
            width = l // 2 + 1
            row = []
            for a in range(width):
                p0, p1 = prev[a] if a < len(prev) else (0, 0)
                q0 = prev[a - 1][0] if 1 <= a <= len(prev) else 0
                row.append((p0 + p1, q0 + p1))
            rows.append(row)
        self._rows = rows

    def get(self, l: int, a: int, last: int) -> int:
        if l > self.max_l:
            raise ValueError(f"l={l} beyond table size {self.max_l}")
        if l < 0 or a < 0:
            return 0
        row = self._rows[l]
        return row[a][last] if a < len(row) else 0


def segment_count(l: int, a: int, last: "int | str" = "any") -> int:
    """Closed form of T(l, a, last): C(l, 2a+1) for last 0, C(l, 2a) for last 1.

    The empty segment counts once, under last = 1 (see ``FcClassTable``).
    """
    if l < 0 or a < 0:
        return 0
    if last == "any":
        return fc_class_count(l, a)
    if last in (0, "0"):
        return binomial_exact(l, 2 * a + 1)
    if last in (1, "1"):
        return binomial_exact(l, 2 * a)
    raise ValueError(f"last must be 0, 1 or 'any', got {last!r}")


def vandermonde_check(d: int, e: int, f: int) -> Tuple[int, int]:
    lhs = sum(binomial_exact(d, c) * binomial_exact(e, f - c) for c in range(0, d + 1))
    return lhs, binomial_exact(d + e, f)


def pascal_row(n: int) -> List[int]:
    """Row ``n`` of Pascal's triangle by repeated addition (independent of math.comb)."""
    row = [1]
    for _ in range(n):
        row = [1] + [row[i] + row[i + 1] for i in range(len(row) - 1)] + [1]
    return row
