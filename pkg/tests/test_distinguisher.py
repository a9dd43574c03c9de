import itertools
import math
import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tracelab._rng import generator, keep_mask
from tracelab.channel import ChannelSpec, expected_subseq_count, mask_to_words, sample_traces
from tracelab.core import make_padded_pair, subsequence_count_oracle
from tracelab.distance import hellinger_sq_bruteforce
from tracelab.distinguisher import (
    PolySpec,
    deck_signature,
    empirical_error_rate,
    estimate_sample_complexity,
    find_min_distinguishing_word,
    first_power_sum_difference,
    load_multiplicity_table,
    lrt_classify,
    max_multiplicity_exhaustive,
    mean_based_distinguish,
    root_multiplicity_at_one,
    sample_complexity_search,
    wilson_upper,
)
from tracelab.errors import InfeasibleError, TracelabError

PAIR = make_padded_pair(1)
HALF = ChannelSpec(0.5, seed=17)


def test_lrt_tie_and_identity_rules():
    assert lrt_classify([], PAIR.x, PAIR.y, 0.5).decision == "x"
    res = lrt_classify(["01", "1"], "0101", "0101", 0.5)
    assert res.log_likelihood_ratio == 0.0 and res.decision == "x" and res.traces_used == 2


def test_lrt_errors():
    with pytest.raises(ValueError):
        lrt_classify(["00000000"], PAIR.x, PAIR.y, 0.5)
    with pytest.raises(TracelabError):
        lrt_classify(["00"], "01", "10", 0.5)


def test_lrt_impossible_trace_is_decisive():
    assert lrt_classify(["0"], "0", "1", 0.5).decision == "x"
    assert lrt_classify(["1"], "0", "1", 0.5).decision == "y"


def test_lrt_with_many_traces():
    hits = 0
    for trial in range(200):
        traces = sample_traces(PAIR.x, ChannelSpec(0.5, seed=trial), 1000)
        hits += lrt_classify(traces, PAIR.x, PAIR.y, 0.5).decision == "x"
    assert hits / 200 >= 0.99


def test_table_path_matches_scalar_path():
    # n = 7 uses the lookup table inside empirical_error_rate; recompute trials by hand
    T, trials = 6, 100
    rate, _ = empirical_error_rate(PAIR.x, PAIR.y, 0.5, T, trials, HALF)
    wrong = 0
    for i in range(trials):
        src = PAIR.x if i % 2 == 0 else PAIR.y
        mask = keep_mask(generator(HALF.seed, 0, i), T, PAIR.n, 0.5)
        res = lrt_classify(mask_to_words(mask, src), PAIR.x, PAIR.y, 0.5)
        wrong += res.decision != ("x" if i % 2 == 0 else "y")
    assert rate == wrong / trials


def test_error_rate_examples():
    assert empirical_error_rate(PAIR.x, PAIR.y, 0.5, 0, 200, HALF) == (0.5, 0.5 / math.sqrt(200))
    assert empirical_error_rate("0101", "0101", 0.5, 16, 100, HALF)[0] == 0.5
    rate, _ = empirical_error_rate("0", "1", 0.5, 8, 20_000, HALF)
    assert rate < 0.01
    assert rate == pytest.approx(0.5 * 2**-8, abs=4 * math.sqrt(0.5 * 2**-8 / 20_000))
    with pytest.raises(ValueError):
        empirical_error_rate("0", "1", 0.5, 8, 99, HALF)


def test_more_traces_help():
    r4, s4 = empirical_error_rate(PAIR.x, PAIR.y, 0.5, 4, 1000, HALF)
    r256, s256 = empirical_error_rate(PAIR.x, PAIR.y, 0.5, 256, 1000, HALF, stream=1)
    assert r4 - r256 > 2 * math.hypot(s4, s256)


def test_doubling_never_hurts_much():
    prev = None
    for T in (2, 4, 8, 16, 32):
        r, s = empirical_error_rate(PAIR.x, PAIR.y, 0.5, T, 1000, HALF, stream=T)
        if prev is not None:
            assert r <= prev[0] + 2 * math.hypot(s, prev[1])
        prev = (r, s)


def test_threaded_error_rate_identical():
    a = empirical_error_rate(PAIR.x, PAIR.y, 0.5, 8, 500, HALF, threads=1)
    b = empirical_error_rate(PAIR.x, PAIR.y, 0.5, 8, 500, HALF, threads=4)
    assert a == b


def test_long_sources_use_the_closed_forms():
    pair = make_padded_pair(6)  # n = 27, beyond the lookup table
    rate, _ = empirical_error_rate(pair.x, pair.y, 0.5, 4, 100, HALF)
    assert 0 < rate < 0.6


def test_wilson_bound():
    assert wilson_upper(0, 100) == pytest.approx(0.0370, abs=1e-4)
    assert wilson_upper(50, 100) > 0.5


def test_sample_complexity():
    t_star = estimate_sample_complexity(PAIR.x, PAIR.y, 0.5, 0.1, HALF)
    h2 = hellinger_sq_bruteforce(PAIR.x, PAIR.y, 0.5)
    assert 2**-4 <= t_star * h2 <= 2**8
    assert estimate_sample_complexity(PAIR.x, PAIR.y, 0.5, 0.05, HALF) >= estimate_sample_complexity(
        PAIR.x, PAIR.y, 0.5, 0.2, HALF
    )


def test_identical_sources_hit_the_cap():
    with pytest.raises(InfeasibleError):
        estimate_sample_complexity("0110", "0110", 0.5, 0.1, HALF, trials=100)
    res = sample_complexity_search("0110", "0110", 0.5, 0.1, HALF, trials=100, cap=8)
    assert res.t_star is None and [r["T"] for r in res.records] == [1, 2, 4, 8]
    with pytest.raises(ValueError):
        sample_complexity_search("0", "1", 0.5, 0.6, HALF)


def test_deck_signature():
    assert deck_signature("0011", 2).power_sums == (2, 7, 25)
    assert deck_signature("0000", 4).power_sums == (0,) * 5
    assert deck_signature("0011", 1).power_sums[1] != deck_signature("1100", 1).power_sums[1]
    assert deck_signature("1001", 1).power_sums[1] == deck_signature("1001"[::-1], 1).power_sums[1]


def test_min_distinguishing_word():
    assert find_min_distinguishing_word("0011", "0101", 3) == ("01", 4, 3)
    assert find_min_distinguishing_word("0101", "0101", 5) is None
    w, fx, fy = find_min_distinguishing_word(PAIR.x, PAIR.y, 3)
    assert len(w) <= 3 and fx != fy


def thue_morse(length):
    return "".join(str(bin(i).count("1") % 2) for i in range(length))


def test_power_sums_locate_a_word_on_thue_morse_blocks():
    for r in (2, 3, 4):
        block = thue_morse(2**r)
        x = "1" + block + "0"
        y = "1" + "".join("1" if c == "0" else "0" for c in block) + "0"
        m0 = first_power_sum_difference(x, y)
        assert m0 == r
        hit = find_min_distinguishing_word(x, y, m0 + 1)
        assert hit is not None and len(hit[0]) == m0 + 1


def deck_agreement(x, y, top):
    """Largest K <= top with f(w;x) = f(w;y) for every |w| <= K."""
    for K in range(1, top + 1):
        for letters in itertools.product("01", repeat=K):
            w = "".join(letters)
            if subsequence_count_oracle(w, x) != subsequence_count_oracle(w, y):
                return K - 1
    return top


def test_equal_decks_force_equal_power_sums():
    rng = random.Random(5)
    pairs = [(thue_morse(8), "".join("1" if c == "0" else "0" for c in thue_morse(8)))]
    for _ in range(40):
        n = rng.randint(2, 14)
        x = "".join(rng.choice("01") for _ in range(n))
        y = list(x)
        i, j = sorted(rng.sample(range(n), 2))
        y[i], y[j] = y[j], y[i]
        pairs.append((x, "".join(y)))
    for x, y in pairs:
        K = deck_agreement(x, y, 4)
        sx, sy = deck_signature(x, K).power_sums, deck_signature(y, K).power_sums
        assert sx[:K] == sy[:K]


def test_mean_based_distinguisher():
    assert mean_based_distinguish(["0011"], "01", 4, 3, 0.0) == "x"
    assert mean_based_distinguish(["0101"], "01", 4, 3, 0.0) == "y"
    with pytest.raises(ValueError):
        mean_based_distinguish(["01"], "01", 3, 3, 0.5)


def test_mean_statistic_matches_expectation():
    x, w, q, rows = "0011", "01", 0.5, 50_000
    mask = keep_mask(generator(3, 1), rows, 4, q)
    vals = np.array([subsequence_count_oracle(w, t) for t in mask_to_words(mask, x)], dtype=float)
    se = vals.std(ddof=1) / math.sqrt(rows)
    assert abs(vals.mean() - expected_subseq_count(x, w, q)) < 3 * se


def test_root_multiplicity_examples():
    assert root_multiplicity_at_one([1, -1, -1, 1]) == 2
    assert root_multiplicity_at_one([1, 1, 1, 1]) == 0
    assert root_multiplicity_at_one([0, 0, 5]) == 0
    with pytest.raises(ValueError):
        root_multiplicity_at_one([0, 0])


@given(st.lists(st.integers(-3, 3), min_size=1, max_size=10).filter(any))
def test_multiplying_by_z_minus_one(coeffs):
    shifted = [0] + coeffs
    times = [s - c for s, c in itertools.zip_longest(shifted, coeffs, fillvalue=0)]
    assert root_multiplicity_at_one(times) == root_multiplicity_at_one(coeffs) + 1
    assert (root_multiplicity_at_one(coeffs) >= 1) == (sum(coeffs) == 0)


@pytest.mark.parametrize("n", range(0, 11))
def test_exhaustive_search_against_direct_division(n):
    best = 0
    for tail in itertools.product((1, -1), repeat=n):
        best = max(best, root_multiplicity_at_one(list(tail) + [1]))
    m, witness = max_multiplicity_exhaustive(n)
    assert m == best
    assert root_multiplicity_at_one(witness.coefficients) == m and witness.degree == n
    if n % 2 == 0:
        assert m == 0


def test_exhaustive_search_example_and_cap():
    assert max_multiplicity_exhaustive(3) == (2, PolySpec((1, -1, -1, 1)))
    with pytest.raises(InfeasibleError):
        max_multiplicity_exhaustive(23)
    with pytest.raises(ValueError):
        PolySpec((1, 0, -1))


def test_threaded_search_identical():
    assert max_multiplicity_exhaustive(18, threads=1) == max_multiplicity_exhaustive(18, threads=3)


def test_golden_table_loads():
    table = load_multiplicity_table()
    assert sorted(table) == list(range(18))
    assert table[7][0] == 3 and table[15][0] == 4
