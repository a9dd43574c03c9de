"""Exact squared-difference sums per count profile, the weighted surrogate
distance built from them, and power-law fits of its decay.

For a profile (m, f) the quantity of interest is

    S(m, f) = sum over |w| = m, f_c(w) = f of (f(w; x_n) - f(w; y_n))^2,

where only the defect-1 terms of the two closed forms survive the
difference. Writing a = f_c(w_1..w_{j-1}) and c = f_c(w_{j+1}..w_m), the
term for a 1 at position j is

    d_j(a, c) = C(k+a, j-1) C(k+1+c, m-j) - C(k+1+a, j-1) C(k+c, m-j),

and c = f - a - [w_{j-1} = 0] because a 1 never starts a 01 pair.

Two evaluators are provided and must agree exactly:

* ``inner_diff_sq_sum`` expands the square into pairs of 1-positions j <= t
  and counts strings per junction configuration (w_{j-1}, w_{t-1});
* ``inner_diff_sq_sum_transfer`` scans w left to right carrying, per
  (prefix f_c, last bit), the count of prefixes and the first two moments
  of the partial sum of d_j. It costs O(m f) big-integer steps per profile
  and is what the surrogate uses at scale.
"""

from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from tracelab.combinatorics import fc_class_count, segment_count
from tracelab.core import PaddedPair, make_padded_pair, subsequence_count_oracle
from tracelab.distance import ESetSpec


@dataclass(frozen=True, order=True)
class CountProfile:
    m: int
    f: int

    def __post_init__(self):
        if self.m < 0 or not 0 <= self.f <= self.m // 2:
            raise ValueError(f"invalid count profile (m={self.m}, f={self.f})")


class _Binomials:
    """Row-cached exact binomials C(N, r) for N <= max_n; zero outside range."""

    def __init__(self, max_n: int):
        rows = [[1]]
        for _ in range(max_n):
            prev = rows[-1]
            rows.append([1] + [prev[i] + prev[i + 1] for i in range(len(prev) - 1)] + [1])
        self.rows = rows

    def __call__(self, n: int, r: int) -> int:
        if n < 0 or r < 0 or r > n:
            return 0
        return self.rows[n][r]


_BINOMIAL_CACHE: Dict[int, _Binomials] = {}


def _binomials(max_n: int) -> _Binomials:
    for size, table in _BINOMIAL_CACHE.items():
        if size >= max_n:
            return table
    table = _Binomials(max_n)
    _BINOMIAL_CACHE.clear()
    _BINOMIAL_CACHE[max_n] = table
    return table


def difference_term(k: int, m: int, j: int, a: int, c: int, binom=None) -> int:
    """d_j(a, c): the x-minus-y defect term for a 1 at position j of a length-m word."""
    C = binom or _binomials(4 * k + 8)
    return C(k + a, j - 1) * C(k + 1 + c, m - j) - C(k + 1 + a, j - 1) * C(k + c, m - j)


def _window(center: float, radius: Optional[int], lo: int, hi: int) -> range:
    if radius is None:
        return range(lo, hi + 1)
    return range(max(lo, math.ceil(center - radius)), min(hi, math.floor(center + radius)) + 1)


def inner_diff_sq_sum(pair: PaddedPair, profile: CountProfile, window: Optional[int] = None) -> int:
    """S(m, f) by pair expansion over 1-positions j <= t and junction casework.

    A word with 1s at j < t splits as P 1 M 1 S with |P| = j-1, |M| = t-1-j,
    |S| = m-t. Given a = f_c(P) and b = f_c(w_1..w_{t-1}), the number of such
    words with last bits c1 (of P) and c2 (of M, or of the first 1 when M is
    empty) is

        T(j-1, a, c1) * T(t-1-j, b-a-[c1=0], c2) * C(m-t+1, 2(f-b-[c2=0])+1),

    with the empty segment booked under last = 1, which covers j = 1 and
    t = j+1 without special cases. The diagonal t = j pairs a single index
    with itself. ``window`` restricts j, t to m/2 +- window and a, b to
    f/2 +- window (approximate; None means exact).
    """
    k, m, f = pair.k, profile.m, profile.f
    C = _binomials(4 * k + 8 + m)
    d_cache: Dict[Tuple[int, int, int], int] = {}

    def d(j: int, a: int, last: int) -> int:
        key = (j, a, last)
        if key not in d_cache:
            d_cache[key] = difference_term(k, m, j, a, f - a - (last == 0), C)
        return d_cache[key]

    positions = _window(m / 2, window, 1, m)
    counts = _window(f / 2, window, 0, f)
    total = 0
    for j in positions:
        for a in counts:
            for c1 in (0, 1):
                head = segment_count(j - 1, a, c1)
                if not head:
                    continue
                dj = d(j, a, c1)
                if not dj:
                    continue
                step = a + (c1 == 0)
                total += dj * dj * head * fc_class_count(m - j, f - step)
                cross = 0
                for t in positions:
                    if t <= j:
                        continue
                    for b in counts:
                        if b < step:
                            continue
                        for c2 in (0, 1):
                            mid = segment_count(t - 1 - j, b - step, c2)
                            if not mid:
                                continue
                            tail = fc_class_count(m - t, f - b - (c2 == 0))
                            if tail:
                                cross += d(t, b, c2) * mid * tail
                total += 2 * dj * head * cross
    return total


def inner_diff_sq_sum_transfer(pair: PaddedPair, profile: CountProfile) -> int:
    """S(m, f) by a left-to-right scan carrying (count, sum d, sum d^2) per state."""
    k, m, f = pair.k, profile.m, profile.f
    C = _binomials(4 * k + 8 + m)
    width = f + 1
    zeros = lambda: np.zeros(width, dtype=object)  # noqa: E731
    # state arrays indexed by the prefix f_c; the empty prefix sits under last = 1
    n0, s0, q0 = zeros(), zeros(), zeros()
    n1, s1, q1 = zeros(), zeros(), zeros()
    n1[0] = 1
    a_idx = range(width)
    for j in range(1, m + 1):
        # next bit 1 after a 1: f_c unchanged, suffix count c = f - a
        d_same = np.array(
            [C(k + a, j - 1) * C(k + 1 + f - a, m - j) - C(k + 1 + a, j - 1) * C(k + f - a, m - j) for a in a_idx],
            dtype=object,
        )
        # next bit 1 after a 0: the pair forms a 01, prefix a -> a+1, c = f - a - 1
        d_up = np.array(
            [C(k + a, j - 1) * C(k + f - a, m - j) - C(k + 1 + a, j - 1) * C(k - 1 + f - a, m - j) for a in a_idx],
            dtype=object,
        )
        new_n0, new_s0, new_q0 = n0 + n1, s0 + s1, q0 + q1
        new_n1 = n1.copy()
        new_s1 = s1 + d_same * n1
        new_q1 = q1 + 2 * d_same * s1 + d_same * d_same * n1
        if width > 1:
            new_n1[1:] += n0[:-1]
            new_s1[1:] += s0[:-1] + d_up[:-1] * n0[:-1]
            new_q1[1:] += q0[:-1] + 2 * d_up[:-1] * s0[:-1] + d_up[:-1] * d_up[:-1] * n0[:-1]
        n0, s0, q0, n1, s1, q1 = new_n0, new_s0, new_q0, new_n1, new_s1, new_q1
    return int(q0[f] + q1[f])


def inner_diff_sq_sum_bruteforce(pair: PaddedPair, profile: CountProfile) -> int:
    """S(m, f) by enumerating {0,1}^m with the subsequence-count oracle."""
    total = 0
    for bits in itertools.product("01", repeat=profile.m):
        w = "".join(bits)
        if w.count("01") != profile.f:
            continue
        diff = subsequence_count_oracle(w, pair.x) - subsequence_count_oracle(w, pair.y)
        total += diff * diff
    return total


def all_profiles(n: int) -> List[CountProfile]:
    return [CountProfile(m, f) for m in range(n + 1) for f in range(m // 2 + 1)]


@dataclass
class SurrogateReport:
    k: int
    restricted: bool
    per_profile: Dict[Tuple[int, int], float]
    total: float
    excluded_profiles: List[Tuple[int, int]] = field(default_factory=list)
    avoid_offset: int = 1
    weight_convention: str = "1 / (2^n C(2k+1+f, m))"

    def to_json(self) -> str:
        doc = {
            "k": self.k,
            "n": 4 * self.k + 3,
            "restricted": self.restricted,
            "total": self.total,
            "weight_convention": self.weight_convention,
            "excluded_profiles": [list(p) for p in self.excluded_profiles],
            "per_profile": [[m, f, v] for (m, f), v in sorted(self.per_profile.items())],
        }
        return json.dumps(doc, indent=2)


def surrogate_distance(
    pair: PaddedPair,
    windowed: bool = True,
    q: float = 0.5,
    avoid_offset: int = 1,
    threads: int = 1,
    eset: Optional[ESetSpec] = None,
) -> SurrogateReport:
    """sum over profiles of S(m, f) / (2^n C(2k + avoid_offset + f, m)).

    The avoid term lower-bounds 2^n nu(w) on a profile, so the windowed value
    upper-bounds the E-restricted chi-square. Profiles where that bound is
    zero carry no finite weight; they are listed in ``excluded_profiles``
    (when S(m, f) > 0) and left out of the total.
    """
    if q != 0.5:
        raise ValueError("the surrogate weighting is defined for q = 1/2 only")
    k, n = pair.k, pair.n
    if windowed:
        eset = eset or ESetSpec(k)
        profiles = [CountProfile(m, f) for m, f in eset.profiles(n)]
    else:
        profiles = all_profiles(n)
    C = _binomials(4 * k + 8 + n)

    def work(p: CountProfile) -> Tuple[CountProfile, int]:
        return p, inner_diff_sq_sum_transfer(pair, p)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, profiles))
    else:
        results = [work(p) for p in profiles]

    per: Dict[Tuple[int, int], float] = {}
    excluded = []
    scale = 2**n
    for p, num in sorted(results):
        den = C(2 * k + avoid_offset + p.f, p.m)
        if den == 0:
            if num:
                excluded.append((p.m, p.f))
            continue
        per[(p.m, p.f)] = float(Fraction(num, scale * den))
    total = math.fsum(per[key] for key in sorted(per))
    convention = f"1 / (2^n C(2k+{avoid_offset}+f, m))"
    return SurrogateReport(k, windowed, per, total, excluded, avoid_offset, convention)


@dataclass
class ScalingFit:
    points: List[Tuple[int, float]]
    slope: float
    stderr: float
    intercept: float
    method: str
    fit_range: Tuple[int, int]

    def rows(self) -> List[Dict[str, object]]:
        """Per-point table with the slope of the fit through the points so far."""
        out = []
        for i, (n, value) in enumerate(self.points):
            so_far = fit_power_law(self.points[: i + 1]).slope if i >= 2 else float("nan")
            out.append({"n": n, "k": (n - 3) // 4, "method": self.method, "value": value, "slope_so_far": so_far})
        return out


def fit_power_law(points: Sequence[Tuple[int, float]], method: str = "given") -> ScalingFit:
    """Least-squares slope of ln(value) against ln(n)."""
    if len(points) < 3:
        raise ValueError("a scaling fit needs at least three points")
    ns = np.array([p[0] for p in points], dtype=float)
    vals = np.array([p[1] for p in points], dtype=float)
    if np.any(vals <= 0):
        raise ValueError("scaling fit needs positive values")
    res = stats.linregress(np.log(ns), np.log(vals))
    return ScalingFit(list(points), float(res.slope), float(res.stderr), float(res.intercept), method,
                      (int(ns.min()), int(ns.max())))


def scaling_fit(
    k_list: Iterable[int],
    method: str = "exact_surrogate",
    samples: int = 1_000_000,
    seed: int = 0,
    threads: int = 1,
) -> ScalingFit:
    """Fit the decay of the distance over pairs k in ``k_list``.

    ``exact_surrogate`` uses the windowed surrogate; ``mc_chi_sq`` the Monte
    Carlo chi-square estimate with ``samples`` traces per k.
    """
    k_list = list(k_list)
    if len(k_list) < 3:
        raise ValueError("a scaling fit needs at least three points")
    points = []
    for k in k_list:
        pair = make_padded_pair(k)
        if method == "exact_surrogate":
            value = surrogate_distance(pair, windowed=True, threads=threads).total
        elif method == "mc_chi_sq":
            from tracelab.channel import ChannelSpec
            from tracelab.distance import chi_sq_monte_carlo

            value, _ = chi_sq_monte_carlo(pair, 0.5, samples, ChannelSpec(q=0.5, seed=seed), stream=k, threads=threads)
        else:
            raise ValueError(f"unknown scaling method {method!r}")
        points.append((pair.n, value))
    return fit_power_law(points, method)
