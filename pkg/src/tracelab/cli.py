"""Command-line front end: ``tracelab <subcommand> [flags]``.

Exit codes: 0 success, 1 a declared cap was exceeded or a verification
found failures, 2 usage error. Every output starts with a header carrying
the run configuration and a hash of the installed sources, so identical
invocations produce identical bytes.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import itertools
import json
import os
import sys
from fractions import Fraction
from importlib import resources
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from tracelab import __version__
from tracelab.errors import InfeasibleError

VERIFY_TARGETS = ("lemma1", "lemma2", "lemma3", "lemma5", "lemma6", "lemma7", "vandermonde", "closed-form", "pairsum")
BASELINE_SLACK = 1.01


def version_hash() -> str:
    """Package version plus a digest of the module sources (stable across runs)."""
    h = hashlib.sha256(__version__.encode())
    pkg = resources.files("tracelab")
    for name in sorted(p.name for p in pkg.iterdir() if p.name.endswith(".py")):
        h.update(name.encode())
        h.update(pkg.joinpath(name).read_bytes())
    return f"{__version__}+{h.hexdigest()[:12]}"


# ---------------------------------------------------------------------------
# Output plumbing.


class Output:
    def __init__(self, args: argparse.Namespace, config: Dict[str, object]):
        self.fmt = args.format
        self.config = config
        self.buf = io.StringIO()

    def header_comment(self) -> None:
        self.buf.write(f"# tracelab {version_hash()}\n")
        self.buf.write(f"# config {json.dumps(self.config, sort_keys=True)}\n")

    def document(self, result: Dict[str, object]) -> None:
        if self.fmt == "csv":
            self.header_comment()
            rows = result.get("rows")
            if isinstance(rows, list) and rows:
                self.table(rows, header=False)
            else:
                self.table([_flatten(result)], header=False)
            return
        doc = {"tool": version_hash(), "config": self.config, "result": result}
        self.buf.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")

    def table(self, rows: List[Dict[str, object]], header: bool = True) -> None:
        if header:
            self.header_comment()
        writer = csv.DictWriter(self.buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _csv_value(v) for k, v in row.items()})

    def json_lines(self, records: List[Dict[str, object]]) -> None:
        self.buf.write(json.dumps({"tool": version_hash(), "config": self.config}, sort_keys=True) + "\n")
        for rec in records:
            self.buf.write(json.dumps(rec, sort_keys=True) + "\n")

    def text(self, lines: List[str]) -> None:
        self.header_comment()
        for line in lines:
            self.buf.write(line + "\n")

    def flush(self, path: Optional[str]) -> None:
        data = self.buf.getvalue()
        if path:
            with open(path, "w", newline="") as fh:
                fh.write(data)
        else:
            sys.stdout.write(data)
            sys.stdout.flush()


def _csv_value(v: object) -> object:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple, dict)):
        return json.dumps(v, sort_keys=True)
    return v


def _flatten(d: Dict[str, object], prefix: str = "") -> Dict[str, object]:
    out: Dict[str, object] = {}
    for key, value in d.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, name + "."))
        else:
            out[name] = value
    return out


# ---------------------------------------------------------------------------
# Argument parsing.


def _bits(text: str) -> str:
    if not text or set(text) - {"0", "1"}:
        raise argparse.ArgumentTypeError(f"expected a non-empty 0/1 string, got {text!r}")
    return text


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _prob(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError("probability must lie in [0, 1]")
    return value


def _k_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("expected a positive integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_u64, default=0, help="u64 seed for every random draw")
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--format", choices=("json", "csv"), default=None, help="output format")
    common.add_argument("--threads", type=_positive, default=None, help="worker threads (env TRACELAB_THREADS)")

    source = argparse.ArgumentParser(add_help=False)
    source.add_argument("--k", type=_positive, help="padded pair index (n = 4k + 3)")
    source.add_argument("--x", type=_bits, help="first source string")
    source.add_argument("--y", type=_bits, help="second source string")

    parser = argparse.ArgumentParser(prog="tracelab", description="Trace distinguishability toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-pair", parents=[common], help="print the padded pair for k")
    p.add_argument("--k", type=_positive, required=True)

    p = sub.add_parser("sample", parents=[common, source], help="sample traces of one source")
    p.add_argument("--q", type=_prob, default=0.5)
    p.add_argument("--samples", type=_positive, default=10)
    p.add_argument("--variant", choices=("x", "y"), default="x", help="which side of a --k pair")

    p = sub.add_parser("distance", parents=[common, source], help="brute-force distances (n <= 24)")
    p.add_argument("--q", type=_prob, default=0.5)

    p = sub.add_parser("surrogate", parents=[common], help="chi-square surrogate of the padded pair")
    p.add_argument("--k", type=_positive, required=True)
    p.add_argument("--windowed", action=argparse.BooleanOptionalAction, default=True)

    p = sub.add_parser("scaling", parents=[common], help="power-law fit of the distance in n")
    p.add_argument("--k-list", type=_k_list, required=True)
    p.add_argument("--method", choices=("exact", "mc"), default="exact")
    p.add_argument("--samples", type=_positive, default=1_000_000)

    p = sub.add_parser("distinguish", parents=[common, source], help="likelihood-ratio error rate")
    p.add_argument("--q", type=_prob, default=0.5)
    p.add_argument("--samples", type=int, default=16, help="traces per trial (T)")
    p.add_argument("--trials", type=int, default=1000)

    p = sub.add_parser("complexity", parents=[common, source], help="doubling search for T*")
    p.add_argument("--q", type=_prob, default=0.5)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--max", type=int, default=24, help="cap T <= 2^max")

    p = sub.add_parser("verify", parents=[common], help="exhaustive identity checks")
    p.add_argument("target", choices=VERIFY_TARGETS)
    p.add_argument("--max", type=int, default=None, help="size bound (meaning depends on target)")
    p.add_argument("--k", type=_positive, default=None)

    p = sub.add_parser("deck", parents=[common], help="power sums and shortest distinguishing word")
    p.add_argument("--x", type=_bits, required=True)
    p.add_argument("--y", type=_bits)
    p.add_argument("--max", type=int, default=6, help="highest power-sum order / word length")

    p = sub.add_parser("poly-mult", parents=[common], help="max root multiplicity at 1 of +-1 polynomials")
    p.add_argument("--max", type=int, default=12, help="largest degree n")
    return parser


def _threads(args: argparse.Namespace) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("TRACELAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"TRACELAB_THREADS must be an integer, got {env!r}")
    return 1


class UsageError(Exception):
    pass


def _sources(args: argparse.Namespace, need_y: bool = True) -> Tuple[str, str, Optional[object]]:
    from tracelab.core import make_padded_pair

    if args.k is not None:
        if args.x or args.y:
            raise UsageError("give either --k or --x/--y, not both")
        pair = make_padded_pair(args.k)
        return pair.x, pair.y, pair
    if not args.x or (need_y and not args.y):
        raise UsageError("need --k, or --x and --y")
    return args.x, args.y or args.x, None


def _config(args: argparse.Namespace) -> Dict[str, object]:
    # --threads and --out do not change results and are left out of the header
    skip = {"threads", "out"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip and v is not None}


# ---------------------------------------------------------------------------
# Subcommands. Each returns an exit code and writes into ``out``.


def cmd_gen_pair(args, out: Output, threads: int) -> int:
    from tracelab.core import make_padded_pair

    pair = make_padded_pair(args.k)
    if args.format == "json":
        out.document({"x": pair.x, "y": pair.y, "n": pair.n, "k": pair.k})
    else:
        out.text([f"x={pair.x} y={pair.y} n={pair.n}"])
    return 0


def cmd_sample(args, out: Output, threads: int) -> int:
    from tracelab.channel import ChannelSpec, sample_traces

    if args.k is not None:
        x, y, _ = _sources(args)
        src = x if args.variant == "x" else y
    elif args.x:
        src = args.x
    else:
        raise UsageError("need --k or --x")
    traces = sample_traces(src, ChannelSpec(args.q, args.seed), args.samples)
    if args.format == "json":
        out.document({"source": src, "traces": [str(t) for t in traces]})
    else:
        # trace dump layout, readable by read_trace_dump after the comment lines
        out.text([f"# x={src} q={args.q!r} seed={args.seed}"] + [str(t) for t in traces])
    return 0


def cmd_distance(args, out: Output, threads: int) -> int:
    from tracelab.distance import chi_sq_bruteforce, distance_report, hellinger_sq_bruteforce, tv_bruteforce

    x, y, pair = _sources(args)
    if pair is not None:
        doc = json.loads(distance_report(pair, args.q).to_json())
    else:
        doc = {"hellinger_sq": hellinger_sq_bruteforce(x, y, args.q), "tv": tv_bruteforce(x, y, args.q)}
    chi, off = chi_sq_bruteforce(x, y, args.q)
    doc["chi_sq_unrestricted"] = chi
    doc["mu_mass_off_support_nu"] = off
    out.document(doc)
    return 0


def cmd_surrogate(args, out: Output, threads: int) -> int:
    from tracelab.core import make_padded_pair
    from tracelab.pairsum import surrogate_distance

    rep = surrogate_distance(make_padded_pair(args.k), windowed=args.windowed, threads=threads)
    doc = json.loads(rep.to_json())
    if args.format == "csv":
        rows = [{"m": m, "f": f, "value": v} for m, f, v in doc["per_profile"]]
        if rows:
            out.table(rows)
        else:
            out.table([{"m": "", "f": "", "value": 0.0}])
        return 0
    out.document(doc)
    return 0


def cmd_scaling(args, out: Output, threads: int) -> int:
    from tracelab.pairsum import scaling_fit

    method = "exact_surrogate" if args.method == "exact" else "mc_chi_sq"
    fit = scaling_fit(args.k_list, method=method, samples=args.samples, seed=args.seed, threads=threads)
    rows = []
    for row in fit.rows():
        row = dict(row)
        row["slope"] = fit.slope
        row["slope_stderr"] = fit.stderr
        rows.append(row)
    if args.format == "json":
        out.document({"slope": fit.slope, "slope_stderr": fit.stderr, "intercept": fit.intercept, "rows": rows})
    else:
        out.table(rows)
    return 0


def cmd_distinguish(args, out: Output, threads: int) -> int:
    from tracelab.channel import ChannelSpec
    from tracelab.distinguisher import empirical_error_rate, wilson_upper

    x, y, _ = _sources(args)
    if args.trials < 100:
        raise UsageError("--trials must be at least 100")
    rate, se = empirical_error_rate(x, y, args.q, args.samples, args.trials, ChannelSpec(args.q, args.seed), threads=threads)
    errors = round(rate * args.trials)
    rec = {
        "pair": [x, y], "q": args.q, "T": args.samples, "trials": args.trials, "errors": errors,
        "rate": rate, "std_error": se, "wilson_upper": wilson_upper(errors, args.trials),
    }
    out.json_lines([rec])
    return 0


def cmd_complexity(args, out: Output, threads: int) -> int:
    from tracelab.channel import ChannelSpec
    from tracelab.distinguisher import sample_complexity_search

    x, y, _ = _sources(args)
    if not 0 < args.delta < 0.5:
        raise UsageError("--delta must lie in (0, 1/2)")
    if args.trials < 100:
        raise UsageError("--trials must be at least 100")
    res = sample_complexity_search(
        x, y, args.q, args.delta, ChannelSpec(args.q, args.seed), args.trials, cap=1 << args.max, threads=threads
    )
    records = list(res.records)
    records.append({"T_star": res.t_star, "cap": 1 << args.max})
    out.json_lines(records)
    if res.t_star is None:
        print(f"tracelab: infeasible: no T <= 2^{args.max} reaches error {args.delta}", file=sys.stderr)
        return 1
    return 0


def cmd_deck(args, out: Output, threads: int) -> int:
    from tracelab.distinguisher import deck_signature, find_min_distinguishing_word, first_power_sum_difference

    doc: Dict[str, object] = {"x": {"power_sums": list(deck_signature(args.x, args.max).power_sums)}}
    if args.y:
        if len(args.y) != len(args.x):
            raise UsageError("--x and --y must have equal length")
        doc["y"] = {"power_sums": list(deck_signature(args.y, args.max).power_sums)}
        m0 = first_power_sum_difference(args.x, args.y, args.max)
        doc["first_power_sum_difference"] = m0
        hit = find_min_distinguishing_word(args.x, args.y, args.max)
        doc["min_distinguishing_word"] = None if hit is None else {"w": str(hit[0]), "fx": hit[1], "fy": hit[2]}
    out.document(doc)
    return 0


def cmd_poly_mult(args, out: Output, threads: int) -> int:
    from tracelab.distinguisher import POLY_MAX_DEGREE, max_multiplicity_exhaustive

    if args.max > POLY_MAX_DEGREE:
        raise InfeasibleError(f"--max {args.max} exceeds the exhaustive-search cap {POLY_MAX_DEGREE}")
    rows = []
    for n in range(args.max + 1):
        m, spec = max_multiplicity_exhaustive(n, threads=threads)
        rows.append({"n": n, "M": m, "witness": "".join("+" if c > 0 else "-" for c in spec.coefficients)})
    if args.format == "json":
        out.document({"rows": rows})
    else:
        out.table(rows)
    return 0


# ---------------------------------------------------------------------------
# verify targets: each returns (checked, failures, details).


def _verify_lemma1(args) -> Tuple[int, int, Dict[str, object]]:
    from tracelab.combinatorics import zigzag_subseq_count
    from tracelab.core import subsequence_count_oracle

    top = args.max if args.max is not None else 8
    kmax = args.k or 6
    checked = failures = 0
    for k in range(kmax + 1):
        z = "01" * k
        for m in range(top + 1):
            for letters in itertools.product("01", repeat=m):
                w = "".join(letters)
                checked += 1
                failures += zigzag_subseq_count(k, w) != subsequence_count_oracle(w, z)
    return checked, failures, {"k_max": kmax, "w_max": top}


def _verify_lemma3(args) -> Tuple[int, int, Dict[str, object]]:
    from tracelab.combinatorics import FcClassTable, fc_class_count, segment_count
    from tracelab.core import contiguous_01_count

    top = args.max if args.max is not None else 12
    table = FcClassTable(top)
    checked = failures = 0
    for l in range(top + 1):
        counts: Dict[Tuple[int, int], int] = {}
        for letters in itertools.product("01", repeat=l):
            w = "".join(letters)
            last = 1 if not w else int(w[-1])
            key = (contiguous_01_count(w), last)
            counts[key] = counts.get(key, 0) + 1
        for a in range(l // 2 + 1):
            for last in (0, 1):
                checked += 1
                want = counts.get((a, last), 0)
                failures += table.get(l, a, last) != want or segment_count(l, a, last) != want
            checked += 1
            failures += fc_class_count(l, a) != counts.get((a, 0), 0) + counts.get((a, 1), 0)
    return checked, failures, {"l_max": top}


def _verify_vandermonde(args) -> Tuple[int, int, Dict[str, object]]:
    from tracelab.combinatorics import vandermonde_check

    top = args.max if args.max is not None else 20
    checked = failures = 0
    for d in range(top + 1):
        for e in range(top + 1):
            for f in range(d + e + 1):
                lhs, rhs = vandermonde_check(d, e, f)
                checked += 1
                failures += lhs != rhs
    return checked, failures, {"max": top}


def _verify_closed_form(args) -> Tuple[int, int, Dict[str, object]]:
    from tracelab.channel import padded_subseq_count
    from tracelab.core import make_padded_pair, subsequence_count_oracle

    top = args.max if args.max is not None else 9
    kmax = args.k or 4
    checked = failures = 0
    for k in range(1, kmax + 1):
        pair = make_padded_pair(k)
        for m in range(top + 1):
            for letters in itertools.product("01", repeat=m):
                w = "".join(letters)
                for v in ("x", "y"):
                    checked += 1
                    failures += padded_subseq_count(pair, w, v) != subsequence_count_oracle(w, pair.variant(v))
    return checked, failures, {"k_max": kmax, "w_max": top}


def _verify_pairsum(args) -> Tuple[int, int, Dict[str, object]]:
    from tracelab.core import make_padded_pair
    from tracelab.pairsum import (
        all_profiles,
        inner_diff_sq_sum,
        inner_diff_sq_sum_bruteforce,
        inner_diff_sq_sum_transfer,
    )

    kmax = args.max if args.max is not None else 2
    if kmax > 5:
        raise InfeasibleError("pairsum brute force is capped at k <= 5")
    checked = failures = 0
    for k in range(1, kmax + 1):
        pair = make_padded_pair(k)
        for p in all_profiles(pair.n):
            brute = inner_diff_sq_sum_bruteforce(pair, p)
            checked += 1
            failures += inner_diff_sq_sum(pair, p) != brute or inner_diff_sq_sum_transfer(pair, p) != brute
    return checked, failures, {"k_max": kmax}


def _verify_baseline(name: str, value: float) -> Tuple[int, int, Dict[str, object]]:
    from tracelab.asymptotics import load_baselines

    base = load_baselines()[name]
    return 1, int(value > base * BASELINE_SLACK), {"value": value, "baseline": base}


def _verify_lemma2(args) -> Tuple[int, int, Dict[str, object]]:
    from tracelab.asymptotics import ApproxParams, Lemma2Sweep, lemma2_approx, lemma2_audit

    rep = lemma2_audit(Lemma2Sweep.load())
    checked, failures, info = _verify_baseline("lemma2_fitted_constant", rep.fitted_constant)
    checked += 1
    failures += lemma2_approx(ApproxParams(1000, 1000, Fraction(1, 2), 0, 0)) != 1.0
    info.update({"points": rep.points, "corollary_K": rep.extra["corollary_K"], "argmax": rep.argmax})
    return checked, failures, info


def _verify_lemma5(args) -> Tuple[int, int, Dict[str, object]]:
    from tracelab.asymptotics import lemma5_audit

    rep = lemma5_audit()
    checked, failures, info = _verify_baseline("lemma5_max_deviation", rep.fitted_constant)
    info.update({"points": rep.points, "argmax": rep.argmax})
    return checked, failures, info


def _verify_lemma6(args) -> Tuple[int, int, Dict[str, object]]:
    from tracelab.asymptotics import lemma6_7_audit

    rep = lemma6_7_audit("6")
    checked, failures, info = _verify_baseline("lemma6_max_deviation", rep.fitted_constant)
    info.update({"points": rep.points, "argmax": rep.argmax})
    return checked, failures, info


def _verify_lemma7(args) -> Tuple[int, int, Dict[str, object]]:
    from tracelab.asymptotics import lemma6_7_audit

    checked, failures, info = 0, 0, {}
    for which, key in (("7a", "lemma6_max_deviation"), ("7b", "lemma7b_max_deviation")):
        rep = lemma6_7_audit(which)
        c, f, i = _verify_baseline(key, rep.fitted_constant)
        checked, failures = checked + c, failures + f
        info[which] = i
    return checked, failures, info


VERIFIERS: Dict[str, Callable] = {
    "lemma1": _verify_lemma1,
    "lemma2": _verify_lemma2,
    "lemma3": _verify_lemma3,
    "lemma5": _verify_lemma5,
    "lemma6": _verify_lemma6,
    "lemma7": _verify_lemma7,
    "vandermonde": _verify_vandermonde,
    "closed-form": _verify_closed_form,
    "pairsum": _verify_pairsum,
}


def cmd_verify(args, out: Output, threads: int) -> int:
    checked, failures, info = VERIFIERS[args.target](args)
    out.document({"target": args.target, "checked": checked, "failures": failures, "details": info})
    return 0 if failures == 0 else 1


COMMANDS: Dict[str, Callable] = {
    "gen-pair": cmd_gen_pair,
    "sample": cmd_sample,
    "distance": cmd_distance,
    "surrogate": cmd_surrogate,
    "scaling": cmd_scaling,
    "distinguish": cmd_distinguish,
    "complexity": cmd_complexity,
    "verify": cmd_verify,
    "deck": cmd_deck,
    "poly-mult": cmd_poly_mult,
}

DEFAULT_FORMAT = {"gen-pair": "text", "sample": "text", "scaling": "csv", "poly-mult": "csv"}


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.format is None:
        args.format = DEFAULT_FORMAT.get(args.command, "json")
    try:
        threads = _threads(args)
        out = Output(args, _config(args))
        code = COMMANDS[args.command](args, out, threads)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"tracelab: error: {exc}", file=sys.stderr)
        return 2
    except InfeasibleError as exc:
        print(f"tracelab: infeasible: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"tracelab: error: {exc}", file=sys.stderr)
        return 2
    out.flush(args.out)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
