"""Numerical audits of the binomial approximation lemmas.

Every exact side is either a big-integer ratio or a difference of 256-bit
log-gamma values; double precision only enters when a finished ratio is
reported. Sweeps run serially: mpmath keeps its working precision in
process-global state, so the reductions here are plain max-folds.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import mpmath

from tracelab.combinatorics import binomial_exact

PRECISION_BITS = 256
ETA_BOUNDS = (0.05, 0.95)


@dataclass(frozen=True)
class ApproxParams:
    """Arguments of the two-factor ratio C(A+D, eA+s) C(B-D, eB-s) / (C(A, eA) C(B, eB)).

    ``eta`` is stored as a Fraction and eta*A, eta*B must be integers: no
    rounding is ever applied, sweeps pick eta = r/s with s dividing A and B.
    """

    A: int
    B: int
    eta: Fraction
    delta: int
    sigma: int

    def __post_init__(self):
        object.__setattr__(self, "eta", Fraction(self.eta))
        if self.A <= 0 or self.B <= 0:
            raise ValueError("A and B must be positive")
        if not 0 < self.eta < 1:
            raise ValueError("eta must lie in (0, 1)")
        if (self.eta * self.A).denominator != 1 or (self.eta * self.B).denominator != 1:
            raise ValueError(f"eta*A and eta*B must be integers (eta={self.eta}, A={self.A}, B={self.B})")
        if min(self.A + self.delta, self.eta_a + self.sigma, self.B - self.delta, self.eta_b - self.sigma) < 0:
            raise ValueError("A+delta, eta*A+sigma, B-delta and eta*B-sigma must be non-negative")

    @property
    def eta_a(self) -> int:
        return int(self.eta * self.A)

    @property
    def eta_b(self) -> int:
        return int(self.eta * self.B)


@dataclass
class AuditReport:
    sweep: str
    max_relative_deviation: float
    argmax: Dict[str, object]
    fitted_constant: float
    points: int = 0
    extra: Dict[str, float] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@lru_cache(maxsize=1 << 16)
def _loggamma1(n: int) -> mpmath.mpf:
    # log n! at 256 bits
    with mpmath.workprec(PRECISION_BITS):
        return +mpmath.loggamma(n + 1)


def _log_binomial(n: int, r: int) -> mpmath.mpf:
    if n < 0 or r < 0 or r > n:
        return mpmath.mpf("-inf")
    with mpmath.workprec(PRECISION_BITS):
        return _loggamma1(n) - _loggamma1(r) - _loggamma1(n - r)


# ---------------------------------------------------------------------------
# Lemma 2: the Stirling ratio.


def lemma2_exponent(p: ApproxParams) -> float:
    eta = float(p.eta)
    d, s = p.delta, p.sigma
    total = 0.0
    for size in (p.A, p.B):
        total += 0.5 * (d - s) ** 2 / ((1 - eta) * size) + 0.5 * s * s / (eta * size) - 0.5 * d * d / size
    return total


def lemma2_approx(p: ApproxParams) -> float:
    """exp of the six quadratic terms, approximating the reciprocal ratio."""
    lo, hi = ETA_BOUNDS
    if not lo < p.eta < hi:
        raise ValueError(f"eta={p.eta} is not bounded away from 0 and 1 (need {lo} < eta < {hi})")
    if p.delta == 0 and p.sigma == 0:
        return 1.0
    return math.exp(lemma2_exponent(p))


def lemma2_log_exact(p: ApproxParams) -> mpmath.mpf:
    """log of the exact reciprocal ratio, at 256 bits."""
    with mpmath.workprec(PRECISION_BITS):
        return (
            _log_binomial(p.A, p.eta_a)
            + _log_binomial(p.B, p.eta_b)
            - _log_binomial(p.A + p.delta, p.eta_a + p.sigma)
            - _log_binomial(p.B - p.delta, p.eta_b - p.sigma)
        )


def lemma2_exact(p: ApproxParams) -> float:
    with mpmath.workprec(PRECISION_BITS):
        return float(mpmath.exp(lemma2_log_exact(p)))


def lemma2_deviation(p: ApproxParams) -> float:
    """|approx / exact - 1|, with the division done in log space."""
    with mpmath.workprec(PRECISION_BITS):
        gap = mpmath.mpf(lemma2_exponent(p)) - lemma2_log_exact(p)
        if p.delta == 0 and p.sigma == 0:
            gap = -lemma2_log_exact(p)
        return float(abs(mpmath.expm1(gap)))


def lemma2_error_scale(p: ApproxParams) -> float:
    """Cubic part of the predicted error, (|D|^3 + |s|^3 + |D-s|^3) / min(A, B)^2."""
    d, s = abs(p.delta), abs(p.sigma)
    cubic = d**3 + s**3 + abs(p.delta - p.sigma) ** 3
    return cubic / min(p.A, p.B) ** 2


@dataclass(frozen=True)
class Lemma2Sweep:
    A_list: Tuple[int, ...]
    eta: Fraction
    delta_range: object = "cbrt"
    sigma_range: object = "cbrt"
    step: int = 1

    @classmethod
    def from_mapping(cls, cfg: Dict[str, object]) -> "Lemma2Sweep":
        return cls(
            A_list=tuple(int(a) for a in cfg["A_list"]),
            eta=Fraction(str(cfg["eta"])),
            delta_range=cfg.get("delta_range", "cbrt"),
            sigma_range=cfg.get("sigma_range", "cbrt"),
            step=int(cfg.get("step", 1)),
        )

    @classmethod
    def load(cls, path: "str | None" = None) -> "Lemma2Sweep":
        """Read a sweep config (JSON, or TOML when the name ends in .toml)."""
        if path is None:
            text = resources.files("tracelab.data").joinpath("lemma2_sweep.json").read_text()
            return cls.from_mapping(json.loads(text))
        if str(path).endswith(".toml"):
            try:
                import tomllib  # type: ignore[import-not-found]
            except ModuleNotFoundError:  # Python < 3.11
                import tomli as tomllib  # type: ignore[no-redef]

            with open(path, "rb") as fh:
                return cls.from_mapping(tomllib.load(fh))
        with open(path) as fh:
            return cls.from_mapping(json.load(fh))

    def describe(self) -> str:
        return (
            f"A=B in {list(self.A_list)}, eta={self.eta}, delta {self.delta_range}, "
            f"sigma {self.sigma_range}, step {self.step}"
        )

    @staticmethod
    def _range(spec: object, A: int, step: int) -> List[int]:
        if spec == "cbrt":
            r = int(round(A ** (1.0 / 3.0)))
            while r**3 > A:
                r -= 1
            lo, hi = -r, r
        else:
            lo, hi = (int(v) for v in spec)  # type: ignore[union-attr]
        return list(range(lo, hi + 1, step))

    def points(self) -> Iterator[ApproxParams]:
        for A in self.A_list:
            for d in self._range(self.delta_range, A, self.step):
                for s in self._range(self.sigma_range, A, self.step):
                    yield ApproxParams(A, A, self.eta, d, s)


def lemma2_audit(sweep: "Lemma2Sweep | Iterable[ApproxParams]") -> AuditReport:
    """Fit C = max |approx/exact - 1| / (cubic/min^2 + 1/min) over a grid.

    Also reports the largest observed binomial-product ratio (the constant
    hidden in the "maximised at sigma = delta = 0" corollary) and the largest
    deviation on the degenerate rows delta = sigma = 0.
    """
    points = sweep.points() if isinstance(sweep, Lemma2Sweep) else iter(sweep)
    desc = sweep.describe() if isinstance(sweep, Lemma2Sweep) else "explicit points"
    worst = -1.0
    arg: Dict[str, object] = {}
    fitted = 0.0
    corollary = 0.0
    degenerate = 0.0
    count = 0
    for p in points:
        count += 1
        dev = lemma2_deviation(p)
        if dev > worst:
            worst = dev
            arg = {"A": p.A, "B": p.B, "eta": str(p.eta), "delta": p.delta, "sigma": p.sigma}
        scale = lemma2_error_scale(p)
        fitted = max(fitted, dev / (scale + 1.0 / min(p.A, p.B)))
        if scale == 0:
            degenerate = max(degenerate, dev)
        with mpmath.workprec(PRECISION_BITS):
            corollary = max(corollary, float(mpmath.exp(-lemma2_log_exact(p))))
    if count == 0:
        raise ValueError("empty sweep")
    return AuditReport(
        sweep=desc,
        max_relative_deviation=worst,
        argmax=arg,
        fitted_constant=fitted,
        points=count,
        extra={"corollary_K": corollary, "degenerate_max_deviation": degenerate},
    )


# ---------------------------------------------------------------------------
# Lemma 4: range reduction.


def _window(k: int) -> float:
    return math.sqrt(k) * math.log(k)


def lemma4_range_check(k: int, m: int, f: int, a: int, j: int) -> Tuple[int, float, bool]:
    """(C(k+a, j-1) C(k+1+f-a, m-j), threshold, flagged).

    The threshold is e^(-ln^2 k) C(floor(4k/3), floor(m/2))^2; the comparison
    is made between 256-bit logs, the threshold itself is returned as a float.
    """
    r = _window(k)
    if abs(f - 2 * k / 3) > r or abs(m - 2 * k) > r:
        raise ValueError("need |f - 2k/3| and |m - 2k| within sqrt(k) ln k")
    lhs = binomial_exact(k + a, j - 1) * binomial_exact(k + 1 + f - a, m - j)
    with mpmath.workprec(PRECISION_BITS):
        log_thr = -mpmath.log(k) ** 2 + 2 * _log_binomial(4 * k // 3, m // 2)
        flagged = lhs > 0 and mpmath.log(lhs) > log_thr
        threshold = float(mpmath.exp(log_thr))
    return lhs, threshold, bool(flagged)


@dataclass
class Lemma4Sweep:
    k: int
    m: int
    f: int
    radius: float
    flagged: int
    outside_either: int
    outside_both: int
    strip_excess: float
    examples_outside: List[Tuple[int, int]]

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def lemma4_sweep(k: int, m: Optional[int] = None, f: Optional[int] = None) -> Lemma4Sweep:
    """Flag every (a, j) with 0 <= a <= f, 1 <= j <= m against the threshold.

    At eta = 3/4 the quadratic form of the product is degenerate, flat along
    a - f/2 = (4/3)(j - m/2), so flags may leave the rectangle along that
    line. ``strip_excess`` is the largest 3 u^2 / (k + f/2) - ln^2 k over flags,
    with u the distance from that line measured in a; <= 0 means every
    flag sits in the predicted strip.
    """
    m = 2 * k if m is None else m
    f = (2 * k) // 3 if f is None else f
    r = _window(k)
    with mpmath.workprec(PRECISION_BITS):
        log_thr = -mpmath.log(k) ** 2 + 2 * _log_binomial(4 * k // 3, m // 2)
        lf = [_loggamma1(i) for i in range(2 * k + f + 2)]

        def lbin(n, rr):
            if rr < 0 or rr > n:
                return None
            return lf[n] - lf[rr] - lf[n - rr]

        flagged = out_e = out_b = 0
        excess = -math.inf
        examples: List[Tuple[int, int]] = []
        half = k + f / 2
        for a in range(f + 1):
            for j in range(1, m + 1):
                u = lbin(k + a, j - 1)
                v = lbin(k + 1 + f - a, m - j)
                if u is None or v is None or u + v <= log_thr:
                    continue
                flagged += 1
                fa = abs(a - f / 2) > r
                fj = abs(j - m / 2) > r
                if fa or fj:
                    out_e += 1
                    if len(examples) < 8:
                        examples.append((a, j))
                out_b += fa and fj
                dist = (a - f / 2) - (4 / 3) * (j - m / 2)
                excess = max(excess, 3 * dist * dist / half - math.log(k) ** 2)
    return Lemma4Sweep(k, m, f, r, flagged, out_e, out_b, excess, examples)


# ---------------------------------------------------------------------------
# Lemma 5: parity pairing.


def lemma5_check(k: int, m: int, f: int, a: int, j: int, t: int) -> Tuple[int, int, float]:
    """Both restricted sums exactly, and |lhs/rhs - 1/2| (t-j) / ln^2 k."""
    if t <= j + 5:
        raise ValueError("need t > j + 5")
    d = t - j
    log2k = math.log(k) ** 2
    # |b - a - d/3| <= sqrt(d) ln k, squared and scaled by 9 to stay in integers
    lhs = 0
    b_lo = a + (d - 3 * math.isqrt(int(9 * d * log2k)) ) // 3 - 2
    b_hi = a + (d + 3 * math.isqrt(int(9 * d * log2k)) ) // 3 + 2
    for b in range(max(b_lo, 0), b_hi + 1):
        if (3 * (b - a) - d) ** 2 <= 9 * d * log2k:
            lhs += binomial_exact(d - 1, 2 * b - 2 * a - 1) * binomial_exact(m - t + 1, 2 * f - 2 * b - 1)
    rhs = 0
    for b in range(max(2 * b_lo - 2 * a, 0), 2 * b_hi + 1):
        if (3 * (b - 2 * a) - 2 * d) ** 2 <= 36 * d * log2k:
            rhs += binomial_exact(d - 1, b - 2 * a - 1) * binomial_exact(m - t + 1, 2 * f - b - 1)
    if rhs == 0:
        raise ValueError("right-hand sum vanishes for these parameters")
    dev = abs(Fraction(lhs, rhs) - Fraction(1, 2)) * d / log2k
    return lhs, rhs, float(dev)


def oddcombo_gap(k: int, m: int, f: int, a: int, j: int, t: int, b: Optional[int] = None) -> float:
    """Relative gap of the 2/3-1/3 weighted identity at b (default a + floor((t-j)/3)).

    (2/3) C(D, 2b-2a-1) C(M, 2f-2b+1) + (1/3) C(D, 2b-2a+1) C(M, 2f-2b-1)
    against C(D, 2b-2a) C(M, 2f-2b), with D = t-j-1 and M = m-t+1.
    """
    if b is None:
        b = a + (t - j) // 3
    dd, mm = t - j - 1, m - t + 1
    lhs = Fraction(2, 3) * binomial_exact(dd, 2 * b - 2 * a - 1) * binomial_exact(mm, 2 * f - 2 * b + 1)
    lhs += Fraction(1, 3) * binomial_exact(dd, 2 * b - 2 * a + 1) * binomial_exact(mm, 2 * f - 2 * b - 1)
    rhs = binomial_exact(dd, 2 * b - 2 * a) * binomial_exact(mm, 2 * f - 2 * b)
    if rhs == 0:
        raise ValueError("reference term vanishes for these parameters")
    return float(abs(lhs / rhs - 1))


def lemma5_audit(k_list: Sequence[int] = (50, 100, 200), step: int = 3) -> AuditReport:
    """Max normalised Lemma 5 deviation over j, t in the central window.

    m = 2k, f = floor(2k/3), a = floor(f/2); j and t range over
    [m/2 - sqrt(k) ln k, m/2 + sqrt(k) ln k] on a lattice of the given step.
    """
    worst = -1.0
    arg: Dict[str, object] = {}
    count = skipped = 0
    for k in k_list:
        m, f = 2 * k, (2 * k) // 3
        a = f // 2
        r = int(_window(k))
        for j in range(m // 2 - r, m // 2 + r + 1, step):
            for t in range(j + 6, m // 2 + r + 1, step):
                try:
                    _, _, dev = lemma5_check(k, m, f, a, j, t)
                except ValueError:
                    skipped += 1
                    continue
                count += 1
                if dev > worst:
                    worst, arg = dev, {"k": k, "m": m, "f": f, "a": a, "j": j, "t": t}
    return AuditReport(
        f"lemma5 k in {list(k_list)}, step {step}", worst, arg, worst, count, {"skipped": float(skipped)}
    )


def oddcombo_audit(k_list: Sequence[int] = (50, 100, 200)) -> AuditReport:
    """Fit C in gap <= C ln^2 k / (t-j) along the balanced line j = 3a, b = a + (t-j)//3."""
    worst = -1.0
    fitted = 0.0
    arg: Dict[str, object] = {}
    count = 0
    for k in k_list:
        m, f = 2 * k, (2 * k) // 3
        a = f // 2
        j = 3 * a
        r = int(_window(k))
        for d in range(6, min(r, m - j - 2) + 1):
            gap = oddcombo_gap(k, m, f, a, j, j + d)
            count += 1
            norm = gap * d / math.log(k) ** 2
            if gap > worst:
                worst = gap
            if norm > fitted:
                fitted, arg = norm, {"k": k, "j": j, "t": j + d}
    return AuditReport(f"oddcombo k in {list(k_list)}", worst, arg, fitted, count)


# ---------------------------------------------------------------------------
# Lemmas 6 and 7: reflection symmetry.


@dataclass(frozen=True)
class LemmaSymmetryParams:
    """Offsets delta (integer) and eps (a multiple of 1/3) about the window centre.

    Non-integral binomial arguments (k + f/2 + delta/3 + eps and the like)
    are floored individually, after exact rational evaluation.
    """

    k: int
    m: int
    f: int
    delta: int
    eps: Fraction

    def __post_init__(self):
        object.__setattr__(self, "eps", Fraction(self.eps))
        if (3 * self.eps).denominator != 1:
            raise ValueError("eps must be a multiple of 1/3")
        r = _window(self.k) if self.k > 1 else 0.0
        if abs(self.delta) > r or abs(self.eps) > r:
            raise ValueError("|delta| and |eps| must not exceed sqrt(k) ln k")


def _floor(x: Fraction) -> int:
    return math.floor(x)


def symmetry_products(p: LemmaSymmetryParams, which: str) -> Tuple[int, int]:
    k, d, e = p.k, Fraction(p.delta), p.eps
    half_f, half_m = Fraction(p.f, 2), Fraction(p.m, 2)
    if which in ("6", "7a"):
        top = k + half_f
        lhs = binomial_exact(_floor(top + d / 3 + e), _floor(half_m + d)) * binomial_exact(
            _floor(top - d / 3 - e), _floor(half_m - d)
        )
        rhs = binomial_exact(_floor(top + d / 3 - 5 * e / 3), _floor(half_m + d - 2 * e)) * binomial_exact(
            _floor(top - d / 3 + 5 * e / 3), _floor(half_m - d + 2 * e)
        )
    elif which == "7b":
        f = p.f
        lhs = binomial_exact(_floor(half_m + d), _floor(f + 2 * d / 3 + 2 * e)) * binomial_exact(
            _floor(half_m - d), _floor(f - 2 * d / 3 - 2 * e)
        )
        rhs = binomial_exact(_floor(half_m + 2 * e - d), _floor(f + 10 * e / 3 - 2 * d / 3)) * binomial_exact(
            _floor(half_m - 2 * e + d), _floor(f - 10 * e / 3 + 2 * d / 3)
        )
    else:
        raise ValueError(f"which must be '6', '7a' or '7b', got {which!r}")
    return lhs, rhs


def lemma6_7_ratio(p: LemmaSymmetryParams, which: str) -> Fraction:
    lhs, rhs = symmetry_products(p, which)
    if rhs == 0:
        raise ValueError("reflected product vanishes")
    return Fraction(lhs, rhs)


def lemma6_7_check(p: LemmaSymmetryParams, which: "str | int") -> float:
    """|ratio - 1| sqrt(k) / ln^3 k for Lemma 6, 7a (same display) or 7b."""
    which = str(which)
    ratio = lemma6_7_ratio(p, which)
    return float(abs(ratio - 1)) * math.sqrt(p.k) / math.log(p.k) ** 3


def lemma6_7_audit(which: str, k_list: Sequence[int] = (100, 400), steps: int = 12) -> AuditReport:
    """Max normalised deviation over a lattice of (delta, eps) in the window.

    delta runs over multiples of 3 and eps over integers, so delta/3 + eps is
    integral; m = 2k and f = floor(2k/3).
    """
    worst = -1.0
    arg: Dict[str, object] = {}
    count = 0
    for k in k_list:
        m, f = 2 * k, (2 * k) // 3
        r = int(_window(k))
        dstep = max(3, 3 * ((2 * r) // (3 * steps)))
        estep = max(1, (2 * r) // steps)
        for d in range(-(r // 3) * 3, r + 1, dstep):
            for e in range(-r, r + 1, estep):
                p = LemmaSymmetryParams(k, m, f, d, Fraction(e))
                try:
                    dev = lemma6_7_check(p, which)
                except ValueError:
                    continue
                count += 1
                if dev > worst:
                    worst, arg = dev, {"k": k, "delta": d, "eps": e}
    return AuditReport(f"lemma{which} k in {list(k_list)}", worst, arg, worst, count)


# ---------------------------------------------------------------------------
# Regression baselines.

BASELINE_FILE = "asymptotics_baselines.json"


def compute_baselines() -> Dict[str, float]:
    l2 = lemma2_audit(Lemma2Sweep.load())
    return {
        "lemma2_fitted_constant": l2.fitted_constant,
        "lemma2_corollary_K": l2.extra["corollary_K"],
        "lemma5_max_deviation": lemma5_audit().fitted_constant,
        "oddcombo_fitted_constant": oddcombo_audit().fitted_constant,
        "lemma6_max_deviation": lemma6_7_audit("6").fitted_constant,
        "lemma7b_max_deviation": lemma6_7_audit("7b").fitted_constant,
    }


def load_baselines() -> Dict[str, float]:
    text = resources.files("tracelab.data").joinpath(BASELINE_FILE).read_text()
    return json.loads(text)


def write_baselines(path: str) -> Dict[str, float]:
    values = compute_baselines()
    with open(path, "w") as fh:
        json.dump(values, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return values
