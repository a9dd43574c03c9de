"""Statistical distances between the trace distributions of two strings.

Brute-force routines enumerate every trace w with non-zero probability under
either source. They walk the subsequence trie layer by layer with numpy,
pruning branches that embed in neither string, so the cost tracks the number
of distinct subsequences rather than 2^(n+1).
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from tracelab._rng import BLOCK_ROWS
from tracelab.channel import ChannelSpec, mask_stats, padded_log_counts, sample_masks
from tracelab.core import PaddedPair
from tracelab.errors import InfeasibleError, TracelabError

BRUTE_FORCE_MAX_N = 24
_CHUNK_ROWS = 1 << 16


@dataclass(frozen=True)
class ESetSpec:
    """Traces with length within ``radius`` of 2k and f_c within ``radius`` of 2k/3.

    radius = floor(multiplier * sqrt(k) * ln k), boundaries inclusive.
    """

    k: int
    multiplier: float = 1.0

    @classmethod
    def empty(cls, k: int) -> "ESetSpec":
        return cls(k, multiplier=-1.0)

    @classmethod
    def everything(cls, k: int) -> "ESetSpec":
        return cls(k, multiplier=math.inf)

    @property
    def radius(self) -> int:
        if self.multiplier == math.inf:
            return 10**9
        if self.multiplier < 0:
            return -1
        return math.floor(self.multiplier * math.sqrt(self.k) * math.log(self.k))

    @property
    def length_center(self) -> int:
        return 2 * self.k

    @property
    def fc_center(self) -> Fraction:
        return Fraction(2 * self.k, 3)

    def contains(self, m, f):
        """Membership by (length, f_c); works elementwise on numpy arrays."""
        r = self.radius
        return (abs(m - 2 * self.k) <= r) & (abs(3 * f - 2 * self.k) <= 3 * r)

    def profiles(self, n: int) -> List[Tuple[int, int]]:
        r = self.radius
        out = []
        for m in range(max(0, 2 * self.k - r), min(n, 2 * self.k + r) + 1):
            for f in range(0, m // 2 + 1):
                if self.contains(m, f):
                    out.append((m, f))
        return out


def fc_of_values(values: np.ndarray, m: int) -> np.ndarray:
    """f_c of length-m words packed with the first bit most significant."""
    if m < 2:
        return np.zeros(len(values), dtype=np.int64)
    v = values.astype(np.uint64)
    pairs = (~v >> np.uint64(1)) & v & np.uint64((1 << (m - 1)) - 1)
    return np.bitwise_count(pairs).astype(np.int64)


def _check_size(x: str, y: str) -> int:
    if len(x) != len(y):
        raise ValueError("sources must have equal length")
    n = len(x)
    if n > BRUTE_FORCE_MAX_N:
        raise InfeasibleError(
            f"brute force enumerates all traces; n={n} exceeds the cap of {BRUTE_FORCE_MAX_N}"
        )
    return n


def enumerate_counts(x: str, y: str) -> Iterator[Tuple[int, np.ndarray, np.ndarray, np.ndarray]]:
    """Yield (m, packed words, f(w;x), f(w;y)) over every w embedding in x or y.

    Each layer carries, per word w, the embedding counts of w into every
    prefix of the source; appending bit b is a masked cumulative sum.
    """
    n = _check_size(x, y)
    bx = np.frombuffer(x.encode(), dtype=np.uint8) - ord("0")
    by = np.frombuffer(y.encode(), dtype=np.uint8) - ord("0")
    masks = {
        (src, b): (bits == b).astype(np.int64)
        for src, bits in (("x", bx), ("y", by))
        for b in (0, 1)
    }
    ex = np.ones((1, n + 1), dtype=np.int64)
    ey = np.ones((1, n + 1), dtype=np.int64)
    vals = np.zeros(1, dtype=np.int64)

    def extend(e: np.ndarray, src: str, b: int) -> np.ndarray:
        out = np.zeros_like(e)
        np.cumsum(e[:, :-1] * masks[(src, b)][None, :], axis=1, out=out[:, 1:])
        return out

    def walk(ex, ey, vals, m):
        yield m, vals, ex[:, n], ey[:, n]
        if m == n:
            return
        cx = np.concatenate([extend(ex, "x", 0), extend(ex, "x", 1)])
        cy = np.concatenate([extend(ey, "y", 0), extend(ey, "y", 1)])
        cv = np.concatenate([2 * vals, 2 * vals + 1])
        live = (cx[:, n] > 0) | (cy[:, n] > 0)
        cx, cy, cv = cx[live], cy[live], cv[live]
        if not len(cv):
            return
        for s in range(0, len(cv), _CHUNK_ROWS):
            yield from walk(cx[s : s + _CHUNK_ROWS], cy[s : s + _CHUNK_ROWS], cv[s : s + _CHUNK_ROWS], m + 1)

    yield from walk(ex, ey, vals, 0)


def _weights(n: int, m: int, q: float) -> float:
    return (1.0 - q) ** m * q ** (n - m)


def pmf_total(x: str, q: float) -> float:
    """Sum of mu_x over all traces (should be 1); compensated summation."""
    n = len(x)
    parts = [fx * _weights(n, m, q) for m, _, fx, _ in enumerate_counts(x, x)]
    return math.fsum(np.concatenate(parts))


def hellinger_sq_bruteforce(x: str, y: str, q: float) -> float:
    """sum_w (sqrt(mu_x(w)) - sqrt(mu_y(w)))^2 over all traces."""
    n = len(x)
    parts = []
    for m, _, fx, fy in enumerate_counts(x, y):
        w = _weights(n, m, q)
        parts.append((np.sqrt(fx * w) - np.sqrt(fy * w)) ** 2)
    return math.fsum(np.concatenate(parts))


def tv_bruteforce(x: str, y: str, q: float) -> float:
    n = len(x)
    parts = []
    for m, _, fx, fy in enumerate_counts(x, y):
        parts.append(np.abs(fx - fy) * _weights(n, m, q))
    return 0.5 * math.fsum(np.concatenate(parts))


def chi_sq_bruteforce(x: str, y: str, q: float) -> Tuple[float, float]:
    """sum over supp(mu_y) of (mu_x - mu_y)^2 / mu_y, and mu_x's mass off that support.

    The first value is what sampling traces of y estimates; the second is the
    mass on which the full divergence is infinite.
    """
    n = len(x)
    parts, off = [], []
    for m, _, fx, fy in enumerate_counts(x, y):
        w = _weights(n, m, q)
        on = fy > 0
        parts.append((fx[on] - fy[on]).astype(np.float64) ** 2 / fy[on] * w)
        off.append(fx[~on] * w)
    return math.fsum(np.concatenate(parts)), math.fsum(np.concatenate(off))


def chi_sq_restricted(pair: PaddedPair, eset: ESetSpec, q: float = 0.5) -> float:
    """sum over w in E of (mu(w) - nu(w))^2 / nu(w) for mu = traces of x, nu = of y."""
    n = pair.n
    parts = []
    for m, vals, fx, fy in enumerate_counts(pair.x, pair.y):
        inside = eset.contains(m, fc_of_values(vals, m))
        if not np.any(inside):
            continue
        fx, fy = fx[inside], fy[inside]
        if np.any((fy == 0) & (fx > 0)):
            raise TracelabError("a trace in E has nu(w) = 0 < mu(w); the divergence is infinite")
        on = fy > 0
        parts.append((fx[on] - fy[on]).astype(np.float64) ** 2 / fy[on] * _weights(n, m, q))
    return math.fsum(np.concatenate(parts)) if parts else 0.0


def hellinger_restricted(pair: PaddedPair, eset: ESetSpec, q: float = 0.5) -> float:
    n = pair.n
    parts = []
    for m, vals, fx, fy in enumerate_counts(pair.x, pair.y):
        inside = eset.contains(m, fc_of_values(vals, m))
        w = _weights(n, m, q)
        parts.append((np.sqrt(fx[inside] * w) - np.sqrt(fy[inside] * w)) ** 2)
    return math.fsum(np.concatenate(parts))


def eset_mass_bruteforce(pair: PaddedPair, eset: ESetSpec, q: float, measure: str = "mu") -> float:
    src_index = {"mu": 2, "nu": 3}[measure]
    n = pair.n
    parts = []
    for row in enumerate_counts(pair.x, pair.y):
        m, vals = row[0], row[1]
        counts = row[src_index]
        inside = eset.contains(m, fc_of_values(vals, m))
        parts.append(counts[inside] * _weights(n, m, q))
    return math.fsum(np.concatenate(parts))


def _blocks(samples: int) -> List[Tuple[int, int]]:
    return [(b, min(BLOCK_ROWS, samples - b * BLOCK_ROWS)) for b in range((samples + BLOCK_ROWS - 1) // BLOCK_ROWS)]


def _map_blocks(fn, samples: int, threads: int) -> List:
    blocks = _blocks(samples)
    if threads <= 1:
        return [fn(b, rows) for b, rows in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda br: fn(*br), blocks))


def eset_mass_monte_carlo(
    pair: PaddedPair,
    eset: ESetSpec,
    spec: ChannelSpec,
    samples: int,
    measure: str = "mu",
    stream: int = 0,
    threads: int = 1,
) -> Tuple[float, float]:
    source = pair.x if measure == "mu" else pair.y

    def block(b: int, rows: int) -> int:
        mask = sample_masks(pair.n, spec.q, rows, spec.seed, stream, b)
        st = mask_stats(mask, source, with_ones=False)
        return int(np.count_nonzero(eset.contains(st.length, st.fc)))

    hits = sum(_map_blocks(block, samples, threads))
    p = hits / samples
    return p, math.sqrt(p * (1 - p) / samples)


def eset_mass(
    pair: PaddedPair,
    q: float,
    eset: ESetSpec,
    measure: str = "mu",
    spec: Optional[ChannelSpec] = None,
    samples: int = 100_000,
) -> float:
    """Mass of E under mu (traces of x) or nu (traces of y).

    Exact enumeration when n is within the brute-force cap, sampling otherwise.
    """
    if measure not in ("mu", "nu"):
        raise ValueError("measure must be 'mu' or 'nu'")
    if pair.n <= BRUTE_FORCE_MAX_N:
        return eset_mass_bruteforce(pair, eset, q, measure)
    spec = spec or ChannelSpec(q=q)
    return eset_mass_monte_carlo(pair, eset, spec, samples, measure)[0]


def chi_sq_monte_carlo(
    pair: PaddedPair,
    q: float,
    samples: int,
    spec: ChannelSpec,
    against: str = "x",
    stream: int = 0,
    threads: int = 1,
) -> Tuple[float, float]:
    """Estimate sum over supp(nu) of (mu - nu)^2 / nu as E_nu[(mu/nu - 1)^2].

    Traces are drawn from y; both pmfs come from the closed forms, so each
    trace costs O(n). ``against='y'`` compares nu with itself (estimate 0).
    Returns (estimate, standard error).
    """
    if samples < 1000:
        raise ValueError("chi_sq_monte_carlo needs at least 1000 samples")
    if against not in ("x", "y"):
        raise ValueError("against must be 'x' or 'y'")

    def block(b: int, rows: int) -> Tuple[float, float]:
        mask = sample_masks(pair.n, q, rows, spec.seed, stream, b)
        st = mask_stats(mask, pair.y)
        _, fx, fy, diff = padded_log_counts(pair, st)
        if against == "y":
            diff = np.zeros_like(fy)
        v = (diff / fy) ** 2
        return float(np.sum(v)), float(np.sum(v * v))

    sums = _map_blocks(block, samples, threads)
    s1 = math.fsum(s for s, _ in sums)
    s2 = math.fsum(s for _, s in sums)
    mean = s1 / samples
    var = max(s2 / samples - mean * mean, 0.0) * samples / (samples - 1)
    return mean, math.sqrt(var / samples)


@dataclass
class DistanceReport:
    hellinger_sq: float
    tv: float
    chi_sq_restricted: float
    mu_mass_outside_E: float
    nu_mass_outside_E: float
    per_profile: Dict[Tuple[int, int], float] = field(default_factory=dict)
    eset_radius: int = 0
    eset_multiplier: float = 1.0

    def to_json(self) -> str:
        doc = {
            "hellinger_sq": self.hellinger_sq,
            "tv": self.tv,
            "chi_sq_restricted": self.chi_sq_restricted,
            "masses": {"mu_outside_E": self.mu_mass_outside_E, "nu_outside_E": self.nu_mass_outside_E},
            "eset": {"radius": self.eset_radius, "multiplier": self.eset_multiplier},
            "per_profile": [[m, f, c] for (m, f), c in sorted(self.per_profile.items())],
        }
        return json.dumps(doc, indent=2)


def distance_report(pair: PaddedPair, q: float = 0.5, eset: Optional[ESetSpec] = None) -> DistanceReport:
    """All brute-force distances in one enumeration.

    ``per_profile`` splits the squared Hellinger distance by (trace length, f_c).
    """
    eset = eset or ESetSpec(pair.k)
    n = pair.n
    hell, tv, chi, mu_out, nu_out = [], [], [], [], []
    per: Dict[Tuple[int, int], List[float]] = {}
    for m, vals, fx, fy in enumerate_counts(pair.x, pair.y):
        w = _weights(n, m, q)
        fc = fc_of_values(vals, m)
        h = (np.sqrt(fx * w) - np.sqrt(fy * w)) ** 2
        hell.append(h)
        tv.append(np.abs(fx - fy) * w)
        inside = eset.contains(m, fc)
        mu_out.append(fx[~inside] * w)
        nu_out.append(fy[~inside] * w)
        fxi, fyi = fx[inside], fy[inside]
        if np.any((fyi == 0) & (fxi > 0)):
            raise TracelabError("a trace in E has nu(w) = 0 < mu(w); the divergence is infinite")
        on = fyi > 0
        chi.append((fxi[on] - fyi[on]).astype(np.float64) ** 2 / fyi[on] * w)
        for f in np.unique(fc):
            per.setdefault((m, int(f)), []).append(math.fsum(h[fc == f]))
    return DistanceReport(
        hellinger_sq=math.fsum(np.concatenate(hell)),
        tv=0.5 * math.fsum(np.concatenate(tv)),
        chi_sq_restricted=math.fsum(np.concatenate(chi)),
        mu_mass_outside_E=math.fsum(np.concatenate(mu_out)),
        nu_mass_outside_E=math.fsum(np.concatenate(nu_out)),
        per_profile={key: math.fsum(v) for key, v in per.items()},
        eset_radius=eset.radius,
        eset_multiplier=eset.multiplier,
    )
