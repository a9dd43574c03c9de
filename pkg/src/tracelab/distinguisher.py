"""Telling two sources apart from their traces.

Likelihood-ratio tests with an empirical sample-complexity search, plus the
deck side: power-sum signatures, shortest distinguishing subsequence words,
the mean-count test, and root multiplicities of +-1 polynomials at z = 1.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from tracelab._rng import generator, keep_mask
from tracelab.channel import ChannelSpec, subseq_count
from tracelab.core import BitString, subsequence_count_oracle
from tracelab.distance import enumerate_counts
from tracelab.errors import InfeasibleError, TracelabError

TABLE_MAX_N = 20
COMPLEXITY_CAP = 1 << 24
POLY_MAX_DEGREE = 22
WILSON_Z = 1.959963984540054  # two-sided 95%


@dataclass(frozen=True)
class LrtResult:
    decision: str
    log_likelihood_ratio: float
    traces_used: int


def _log_ratio_scalar(x: str, y: str, w: str, q: float) -> float:
    fx = subseq_count(x, w) if len(w) <= len(x) else 0
    fy = subseq_count(y, w) if len(w) <= len(y) else 0
    if fx == 0 and fy == 0:
        raise TracelabError(f"trace {w!r} has probability zero under both sources")
    if fx == 0:
        return -math.inf
    if fy == 0:
        return math.inf
    out = math.log(fx) - math.log(fy)
    if len(x) != len(y):
        out += (len(x) - len(y)) * math.log(q)
    return out


@lru_cache(maxsize=16)
def _llr_table(x: str, y: str) -> np.ndarray:
    """ln f(w;x) - ln f(w;y) at index 2^|w| - 1 + int(w); NaN where both vanish."""
    n = len(x)
    table = np.full((1 << (n + 1)) - 1, np.nan)
    with np.errstate(divide="ignore"):
        for m, vals, fx, fy in enumerate_counts(x, y):
            lx = np.log(fx.astype(np.float64))
            ly = np.log(fy.astype(np.float64))
            r = np.where(fx == fy, 0.0, lx - ly)
            table[(1 << m) - 1 + vals] = r
    table.flags.writeable = False
    return table


def _mask_indices(mask: np.ndarray, bits: np.ndarray) -> np.ndarray:
    """Table index 2^m - 1 + int(trace) of each masked row (n <= 62)."""
    pos = np.cumsum(mask, axis=1, dtype=np.int64)
    m = pos[:, -1] if mask.shape[1] else np.zeros(len(mask), dtype=np.int64)
    shift = np.where(mask, m[:, None] - pos, 0)
    vals = np.sum((mask & bits[None, :].astype(bool)) * np.left_shift(1, shift), axis=1)
    return (np.left_shift(1, m) - 1) + vals


def lrt_classify(traces: Sequence[str], x: str, y: str, q: float) -> LrtResult:
    """Sign of sum_w ln(mu_x(w) / mu_y(w)); a zero total decides x."""
    limit = max(len(x), len(y))
    for w in traces:
        if len(w) > limit:
            raise ValueError(f"trace of length {len(w)} is longer than the sources")
    if x == y:
        return LrtResult("x", 0.0, len(traces))
    total = 0.0
    cache: Dict[str, float] = {}
    for w in traces:
        if w not in cache:
            cache[w] = _log_ratio_scalar(x, y, w, q)
        total += cache[w]
    return LrtResult("x" if total >= 0 else "y", total, len(traces))


def _trial_llrs(x: str, y: str, q: float, T: int, seed: int, stream: int, trials: range) -> np.ndarray:
    """Log ratios of the given trials; trial i draws T traces from x (i even) or y."""
    n = len(x)
    out = np.zeros(len(trials))
    if T == 0 or x == y:
        return out
    use_table = n == len(y) and n <= TABLE_MAX_N
    table = _llr_table(x, y) if use_table else None
    bx = np.frombuffer(x.encode(), dtype=np.uint8) - ord("0")
    by = np.frombuffer(y.encode(), dtype=np.uint8) - ord("0")
    cache: Dict[str, float] = {}
    for slot, i in enumerate(trials):
        src, bits = (x, bx) if i % 2 == 0 else (y, by)
        mask = keep_mask(generator(seed, stream, i), T, len(src), q)
        if table is not None:
            r = table[_mask_indices(mask, bits)]
            if np.isnan(r).any():
                raise TracelabError("sampled a trace impossible under both sources")
            out[slot] = math.fsum(r) if np.isfinite(r).all() else float(np.sum(r))
        else:
            arr = np.frombuffer(src.encode(), dtype="S1")
            total = 0.0
            for row in mask:
                w = arr[row].tobytes().decode()
                if w not in cache:
                    cache[w] = _log_ratio_scalar(x, y, w, q)
                total += cache[w]
            out[slot] = total
    return out


def _split(count: int, parts: int) -> List[range]:
    size = -(-count // max(parts, 1))
    return [range(s, min(s + size, count)) for s in range(0, count, size)] or [range(0)]


def empirical_error_rate(
    x: str,
    y: str,
    q: float,
    T: int,
    trials: int,
    spec: ChannelSpec,
    stream: int = 0,
    threads: int = 1,
) -> Tuple[float, float]:
    """Misclassification rate of the likelihood-ratio test with T traces.

    Trial i uses source x when i is even and y when i is odd, drawing its
    traces from generator (seed, stream, i). Returns (rate, standard error).
    """
    if trials < 100:
        raise ValueError("need at least 100 trials")
    if T < 0:
        raise ValueError("T must be non-negative")
    chunks = _split(trials, threads)
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda r: _trial_llrs(x, y, q, T, spec.seed, stream, r), chunks))
    else:
        parts = [_trial_llrs(x, y, q, T, spec.seed, stream, r) for r in chunks]
    llr = np.concatenate(parts)
    from_y = np.arange(trials) % 2 == 1
    wrong = np.where(from_y, llr >= 0, llr < 0)
    rate = int(np.count_nonzero(wrong)) / trials
    return rate, math.sqrt(rate * (1 - rate) / trials)


def wilson_upper(errors: int, trials: int, z: float = WILSON_Z) -> float:
    p = errors / trials
    denom = 1 + z * z / trials
    centre = p + z * z / (2 * trials)
    spread = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials))
    return (centre + spread) / denom


@dataclass
class ComplexitySearch:
    t_star: Optional[int]
    records: List[Dict[str, object]] = field(default_factory=list)

    def json_lines(self) -> Iterator[str]:
        for rec in self.records:
            yield json.dumps(rec, sort_keys=True)


def sample_complexity_search(
    x: str,
    y: str,
    q: float,
    target_delta: float,
    spec: ChannelSpec,
    trials: int = 1000,
    cap: int = COMPLEXITY_CAP,
    threads: int = 1,
) -> ComplexitySearch:
    """Doubling search over T = 1, 2, 4, ...; stops once the Wilson bound clears the target.

    The error rate at T uses stream T, so different T see independent traces.
    ``t_star`` is None when T would exceed ``cap``.
    """
    if not 0 < target_delta < 0.5:
        raise ValueError("target_delta must lie in (0, 1/2)")
    out = ComplexitySearch(None)
    T = 1
    while T <= cap:
        rate, _ = empirical_error_rate(x, y, q, T, trials, spec, stream=T, threads=threads)
        errors = round(rate * trials)
        upper = wilson_upper(errors, trials)
        out.records.append(
            {"pair": [str(x), str(y)], "q": q, "T": T, "trials": trials, "errors": errors, "rate": rate, "wilson_upper": upper}
        )
        if upper <= target_delta:
            out.t_star = T
            return out
        T *= 2
    return out


def estimate_sample_complexity(
    x: str,
    y: str,
    q: float,
    target_delta: float,
    spec: ChannelSpec,
    trials: int = 1000,
    cap: int = COMPLEXITY_CAP,
    threads: int = 1,
) -> int:
    """Smallest power of two T whose error rate provably (95% Wilson) meets the target."""
    res = sample_complexity_search(x, y, q, target_delta, spec, trials, cap, threads)
    if res.t_star is None:
        raise InfeasibleError(f"no T <= {cap} reaches error {target_delta}")
    return res.t_star


# ---------------------------------------------------------------------------
# Decks and power sums.


@dataclass(frozen=True)
class DeckSignature:
    n: int
    power_sums: Tuple[int, ...]


def deck_signature(x: str, max_order: int) -> DeckSignature:
    """sum_i x_i i^m for m = 0..max_order (1-based i), exact."""
    ones = [i + 1 for i, c in enumerate(x) if c == "1"]
    return DeckSignature(len(x), tuple(sum(i**m for i in ones) for m in range(max_order + 1)))


def first_power_sum_difference(x: str, y: str, max_order: Optional[int] = None) -> Optional[int]:
    """Smallest m with sum x_i i^m != sum y_i i^m, or None up to max_order (default n)."""
    top = max(len(x), len(y)) if max_order is None else max_order
    sx = deck_signature(x, top).power_sums
    sy = deck_signature(y, top).power_sums
    for m, (a, b) in enumerate(zip(sx, sy)):
        if a != b:
            return m
    return None


def find_min_distinguishing_word(x: str, y: str, max_len: int) -> Optional[Tuple[BitString, int, int]]:
    """First w (by length, then lexicographically) with f(w;x) != f(w;y)."""
    for length in range(1, max_len + 1):
        for letters in itertools.product("01", repeat=length):
            w = "".join(letters)
            fx = subsequence_count_oracle(w, x)
            fy = subsequence_count_oracle(w, y)
            if fx != fy:
                return BitString(w), fx, fy
    return None


def mean_based_distinguish(traces: Sequence[str], w: str, fx: int, fy: int, q: float) -> str:
    """Decide x iff the mean of f(w; trace) is at least as close to fx (1-q)^|w| as to fy (1-q)^|w|."""
    if fx == fy:
        raise ValueError("fx and fy must differ")
    if not traces:
        raise ValueError("need at least one trace")
    scale = (1.0 - q) ** len(w)
    mean = math.fsum(subsequence_count_oracle(w, t) for t in traces) / len(traces)
    return "x" if abs(mean - fx * scale) <= abs(mean - fy * scale) else "y"


# ---------------------------------------------------------------------------
# +-1 polynomials.


@dataclass(frozen=True)
class PolySpec:
    """Coefficients a_0..a_n (ascending degree), each +1 or -1."""

    coefficients: Tuple[int, ...]

    def __post_init__(self):
        if not self.coefficients or any(c not in (1, -1) for c in self.coefficients):
            raise ValueError("coefficients must be a non-empty sequence of +1/-1")

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1


def root_multiplicity_at_one(coefficients: Sequence[int]) -> int:
    """Largest m with (z-1)^m | p, coefficients given in ascending degree."""
    coeffs = [int(c) for c in coefficients]
    while coeffs and coeffs[-1] == 0:
        coeffs.pop()
    if not coeffs:
        raise ValueError("the zero polynomial has infinite multiplicity at 1")
    mult = 0
    while len(coeffs) > 1:
        # synthetic division by (z - 1), highest degree first
        acc = 0
        quotient = []
        for c in reversed(coeffs):
            acc = acc + c
            quotient.append(acc)
        if quotient.pop() != 0:
            break
        coeffs = quotient[::-1]
        mult += 1
    return mult


def _sign_rows(start: int, stop: int, n: int) -> np.ndarray:
    # row u: a_i = -1 where bit i of u is set (i < n), a_n = +1
    u = np.arange(start, stop, dtype=np.int64)
    bits = (u[:, None] >> np.arange(n, dtype=np.int64)[None, :]) & 1
    signs = np.ones((len(u), n + 1), dtype=np.int64)
    signs[:, :n] = 1 - 2 * bits
    return signs


def _chunk_best(n: int, start: int, stop: int) -> Tuple[int, int]:
    """(best multiplicity, smallest pattern index attaining it) over [start, stop)."""
    signs = _sign_rows(start, stop, n)
    idx = np.arange(start, stop, dtype=np.int64)
    powers = np.ones(n + 1, dtype=np.int64)
    base = np.arange(n + 1, dtype=np.int64)
    best, best_u = 0, start
    order = 0
    # multiplicity at 1 = first m with sum a_i i^m != 0
    while len(idx):
        moment = signs @ powers
        alive = moment == 0
        if not alive.any():
            break
        order += 1
        best, best_u = order, int(idx[alive][0])
        signs, idx = signs[alive], idx[alive]
        powers = powers * base
    return best, best_u


def max_multiplicity_exhaustive(n: int, threads: int = 1) -> Tuple[int, PolySpec]:
    """Maximum root multiplicity at 1 over all +-1 polynomials of degree n.

    The leading coefficient is fixed to +1 (p and -p share roots). Ties go to
    the smallest pattern index, so the witness is deterministic.
    """
    if n < 0:
        raise ValueError("degree must be non-negative")
    if n > POLY_MAX_DEGREE:
        raise InfeasibleError(f"exhaustive search over 2^{n} sign patterns exceeds the cap (n <= {POLY_MAX_DEGREE})")
    total = 1 << n
    step = 1 << 16
    spans = [(s, min(s + step, total)) for s in range(0, total, step)]
    if threads > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda sp: _chunk_best(n, *sp), spans))
    else:
        parts = [_chunk_best(n, *sp) for sp in spans]
    best = max(p[0] for p in parts)
    witness = min(u for m, u in parts if m == best)
    coeffs = tuple(int(c) for c in _sign_rows(witness, witness + 1, n)[0])
    return best, PolySpec(coeffs)


GOLDEN_FILE = "multiplicity_golden.csv"


def load_multiplicity_table() -> Dict[int, Tuple[int, Tuple[int, ...]]]:
    """n -> (M(n), witness coefficients ascending) from the stored baseline."""
    text = resources.files("tracelab.data").joinpath(GOLDEN_FILE).read_text()
    out = {}
    for row in csv.DictReader(text.splitlines()):
        coeffs = tuple(1 if c == "+" else -1 for c in row["witness"])
        out[int(row["n"])] = (int(row["M"]), coeffs)
    return out


def write_multiplicity_table(path: str, max_n: int = 17) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["n", "M", "witness"])
        for n in range(max_n + 1):
            m, spec = max_multiplicity_exhaustive(n)
            writer.writerow([n, m, "".join("+" if c > 0 else "-" for c in spec.coefficients)])
