"""The deletion channel: sampling traces and exact trace probabilities."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import IO, Iterable, List, Tuple

import numpy as np

from tracelab._rng import generator, keep_mask
from tracelab.combinatorics import binomial_exact, log_table
from tracelab.core import (
    BitString,
    PaddedPair,
    padded_pair_of,
    subsequence_count_oracle,
)

LOG_SPACE_THRESHOLD = 1000


@dataclass(frozen=True)
class ChannelSpec:
    q: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise ValueError(f"deletion probability must lie in [0, 1], got {self.q}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


def sample_trace(x: str, spec: ChannelSpec, stream_id: int = 0) -> BitString:
    """One trace of ``x``; deterministic in (spec.seed, stream_id)."""
    rng = generator(spec.seed, stream_id)
    keep = rng.random(len(x)) >= spec.q
    return BitString("".join(c for c, kept in zip(x, keep) if kept))


def sample_traces(x: str, spec: ChannelSpec, count: int, stream_id: int = 0) -> List[BitString]:
    """``count`` traces of ``x``; trace i comes from generator (seed, stream_id, i)."""
    out = []
    for i in range(count):
        keep = generator(spec.seed, stream_id, i).random(len(x)) >= spec.q
        out.append(BitString("".join(c for c, kept in zip(x, keep) if kept)))
    return out


def padded_subseq_count(pair: PaddedPair, w: str, variant: str, avoid_offset: int = 1) -> int:
    """f(w; x_n) or f(w; y_n) from the lone-1 casework in O(|w|) binomials.

    Occurrences either skip the defect 1, leaving the zigzag (01)^(2k+1)
    (the avoid term C(2k + avoid_offset + f_c(w), |w|) with offset 1), or use
    it as w_j, splitting w around j into zigzag prefix/suffix embeddings.
    ``avoid_offset=0`` reproduces the uncorrected avoid term for comparison.
    """
    if variant not in ("x", "y"):
        raise ValueError(f"variant must be 'x' or 'y', got {variant!r}")
    k = pair.k
    m = len(w)
    # prefix[i] = f_c(w_1..w_i)
    prefix = [0] * (m + 1)
    for i in range(1, m):
        prefix[i + 1] = prefix[i] + (w[i - 1] == "0" and w[i] == "1")
    total_fc = prefix[m]
    lead, trail = (k, k + 1) if variant == "x" else (k + 1, k)
    count = binomial_exact(2 * k + avoid_offset + total_fc, m)
    for j in range(1, m + 1):
        if w[j - 1] != "1":
            continue
        a = prefix[j - 1]
        c = total_fc - prefix[j]
        count += binomial_exact(lead + a, j - 1) * binomial_exact(trail + c, m - j)
    return count


def subseq_count(x: str, w: str) -> int:
    """f(w; x), by closed form when x is one side of a padded pair."""
    hit = padded_pair_of(x)
    if hit is not None:
        return padded_subseq_count(hit[0], w, hit[1])
    return subsequence_count_oracle(w, x)


def trace_pmf(x: str, w: str, q: "float | Fraction", exact: bool = False) -> "float | Fraction":
    """mu_x(w) = (1-q)^|w| q^(n-|w|) f(w; x).

    ``exact=True`` returns a Fraction (q is converted exactly). Long sources
    are evaluated in log space to avoid underflow.
    """
    n, m = len(x), len(w)
    if m > n:
        return Fraction(0) if exact else 0.0
    count = subseq_count(x, w)
    if count == 0:
        return Fraction(0) if exact else 0.0
    if exact:
        qf = Fraction(q)
        return (1 - qf) ** m * qf ** (n - m) * count
    if n > LOG_SPACE_THRESHOLD:
        return math.exp(log_trace_pmf(x, w, q, count=count))
    return (1.0 - q) ** m * q ** (n - m) * count


def log_trace_pmf(x: str, w: str, q: float, count: "int | None" = None) -> float:
    n, m = len(x), len(w)
    if count is None:
        count = subseq_count(x, w) if m <= n else 0
    if count == 0:
        return -math.inf
    out = math.log(count)
    if m:
        out += m * math.log1p(-q) if q < 1 else -math.inf
    if n - m:
        out += (n - m) * math.log(q) if q > 0 else -math.inf
    return out


def expected_subseq_count(x: str, w: str, q: float) -> float:
    """E[f(w; trace of x)] = f(w; x) (1-q)^|w|.

    Each occurrence of w in x survives iff its |w| bits all survive.
    """
    return subseq_count(x, w) * (1.0 - q) ** len(w)


# ---------------------------------------------------------------------------
# Vectorised statistics of many traces, given as survival masks over a source.


@dataclass
class MaskStats:
    """Per-row trace length/f_c plus, for every surviving 1, its (row, j, a, c)."""

    length: np.ndarray
    fc: np.ndarray
    rows: np.ndarray
    j: np.ndarray
    a: np.ndarray
    c: np.ndarray


def mask_stats(mask: np.ndarray, source: str, with_ones: bool = True) -> MaskStats:
    rows_n, n = mask.shape
    bits = np.frombuffer(source.encode(), dtype=np.uint8) - ord("0")
    cols = np.arange(n, dtype=np.int32)
    kept_idx = np.where(mask, cols, -1)
    last_kept = np.maximum.accumulate(kept_idx, axis=1)
    prev_idx = np.empty_like(last_kept)
    prev_idx[:, 0] = -1
    prev_idx[:, 1:] = last_kept[:, :-1]
    # a virtual leading 1 never forms a 01 pair
    prev_bit = np.where(prev_idx >= 0, bits[np.maximum(prev_idx, 0)], 1)
    is_one = bits.astype(bool)
    new01 = mask & is_one & (prev_bit == 0)
    cum01 = np.cumsum(new01, axis=1, dtype=np.int32)
    length = mask.sum(axis=1, dtype=np.int64)
    fc = cum01[:, -1].astype(np.int64)
    if not with_ones:
        empty = np.empty(0, dtype=np.int64)
        return MaskStats(length, fc, empty, empty, empty, empty)
    pos = np.cumsum(mask, axis=1, dtype=np.int32)
    sel = mask & is_one
    r, col = np.nonzero(sel)
    j = pos[r, col].astype(np.int64)
    a = (cum01[r, col] - new01[r, col]).astype(np.int64)
    c = fc[r] - cum01[r, col]
    return MaskStats(length, fc, r.astype(np.int64), j, a, c)


def padded_log_counts(
    pair: PaddedPair, stats: MaskStats
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Closed-form counts for a batch of traces, scaled by a per-row e^L.

    Returns (L, f_x e^-L, f_y e^-L, (f_x - f_y) e^-L). The difference is
    summed term by term so the shared avoid term never enters it.
    """
    k = pair.k
    table = log_table(pair.n + 2)
    m = stats.length
    r = stats.rows
    avoid = table.log_array(2 * k + 1 + stats.fc, m)
    lx = table.log_array(k + stats.a, stats.j - 1) + table.log_array(k + 1 + stats.c, m[r] - stats.j)
    ly = table.log_array(k + 1 + stats.a, stats.j - 1) + table.log_array(k + stats.c, m[r] - stats.j)
    scale = avoid.copy()
    np.maximum.at(scale, r, np.maximum(lx, ly))
    scale = np.where(np.isfinite(scale), scale, 0.0)
    base = np.exp(avoid - scale)
    ex = np.exp(lx - scale[r])
    ey = np.exp(ly - scale[r])
    rows_n = len(m)
    fx = base + np.bincount(r, weights=ex, minlength=rows_n)
    fy = base + np.bincount(r, weights=ey, minlength=rows_n)
    diff = np.bincount(r, weights=ex - ey, minlength=rows_n)
    return scale, fx, fy, diff


def mask_to_words(mask: np.ndarray, source: str) -> List[BitString]:
    arr = np.array(list(source))
    return [BitString("".join(arr[row])) for row in mask]


def sample_masks(n: int, q: float, rows: int, seed: int, stream: int, block: int) -> np.ndarray:
    return keep_mask(generator(seed, stream, block), rows, n, q)


# ---------------------------------------------------------------------------
# Trace dumps: "# x=<string> q=<float> seed=<int>" then one trace per line.


def write_trace_dump(fh: IO[str], x: str, q: float, seed: int, traces: Iterable[str]) -> None:
    fh.write(f"# x={x} q={q!r} seed={seed}\n")
    for t in traces:
        fh.write(f"{t}\n")


def read_trace_dump(fh: IO[str]) -> Tuple[BitString, float, int, List[BitString]]:
    header = fh.readline().strip()
    # other comment lines (tool and config headers) may precede the dump header
    while header.startswith("#") and not header.startswith("# x="):
        header = fh.readline().strip()
    if not header.startswith("# x="):
        raise ValueError("trace dump must start with a '# x=... q=... seed=...' header")
    fields = dict(item.split("=", 1) for item in header[2:].split())
    traces = [BitString(line.rstrip("\n")) for line in fh]
    return BitString(fields["x"]), float(fields["q"]), int(fields["seed"]), traces
