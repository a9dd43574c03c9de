import json
import math

import pytest
from hypothesis import given, settings, strategies as st

from tracelab.core import make_padded_pair, subsequence_count_oracle
from tracelab.distance import ESetSpec, enumerate_counts, fc_of_values
from tracelab.pairsum import (
    CountProfile,
    all_profiles,
    difference_term,
    fit_power_law,
    inner_diff_sq_sum,
    inner_diff_sq_sum_bruteforce,
    inner_diff_sq_sum_transfer,
    scaling_fit,
    surrogate_distance,
)


def test_profile_validation():
    with pytest.raises(ValueError):
        CountProfile(3, 2)
    with pytest.raises(ValueError):
        CountProfile(-1, 0)
    assert CountProfile(2, 1) < CountProfile(3, 0)


def test_difference_term_is_the_defect_contribution():
    # a single "1": x gains the k+1 trailing zigzag ones, y the k leading ones
    k = 2
    pair = make_padded_pair(k)
    assert difference_term(k, 1, 1, 0, 0) == (
        subsequence_count_oracle("1", pair.x) - subsequence_count_oracle("1", pair.y)
    )


@pytest.mark.parametrize("k", [1, 2])
def test_three_evaluators_agree(k):
    pair = make_padded_pair(k)
    for p in all_profiles(pair.n):
        brute = inner_diff_sq_sum_bruteforce(pair, p)
        assert inner_diff_sq_sum(pair, p) == brute
        assert inner_diff_sq_sum_transfer(pair, p) == brute


def test_smallest_pair_profiles():
    pair = make_padded_pair(1)
    assert inner_diff_sq_sum_transfer(pair, CountProfile(2, 1)) == 1
    assert inner_diff_sq_sum_transfer(pair, CountProfile(1, 0)) == 0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 19).flatmap(lambda m: st.tuples(st.just(m), st.integers(0, m // 2))))
def test_casework_matches_transfer(mf):
    pair = make_padded_pair(4)
    p = CountProfile(*mf)
    assert inner_diff_sq_sum(pair, p) == inner_diff_sq_sum_transfer(pair, p)


def test_profile_sums_reassemble_the_squared_difference():
    pair = make_padded_pair(2)
    per = {}
    for m, vals, fx, fy in enumerate_counts(pair.x, pair.y):
        fc = fc_of_values(vals, m)
        for f, d in zip(fc, fx - fy):
            per[(m, int(f))] = per.get((m, int(f)), 0) + int(d) ** 2
    for p in all_profiles(pair.n):
        assert inner_diff_sq_sum_transfer(pair, p) == per.get((p.m, p.f), 0)


def test_surrogate_report():
    rep = surrogate_distance(make_padded_pair(3))
    assert rep.restricted
    assert rep.total == pytest.approx(math.fsum(rep.per_profile.values()))
    assert set(rep.per_profile) <= set(ESetSpec(3).profiles(15))
    doc = json.loads(rep.to_json())
    assert doc["n"] == 15 and doc["weight_convention"] == "1 / (2^n C(2k+1+f, m))"


def test_unwindowed_surrogate_lists_zero_denominator_profiles():
    rep = surrogate_distance(make_padded_pair(2), windowed=False)
    # m = 2k + 2 + f exceeds 2k + 1 + f: nu's avoid bound is zero there
    assert (6, 0) in rep.excluded_profiles
    for m, f in rep.excluded_profiles:
        assert m > 2 * 2 + 1 + f


def test_surrogate_threads_identical():
    pair = make_padded_pair(6)
    assert surrogate_distance(pair, threads=1).total == surrogate_distance(pair, threads=3).total


def test_surrogate_only_at_half():
    with pytest.raises(ValueError):
        surrogate_distance(make_padded_pair(2), q=0.3)


def test_power_law_fit_recovers_exponent():
    pts = [(n, 3.0 * n ** -1.5) for n in (10, 20, 40, 80)]
    fit = fit_power_law(pts)
    assert fit.slope == pytest.approx(-1.5, abs=1e-12)
    assert fit.fit_range == (10, 80)
    assert len(fit.rows()) == 4 and math.isnan(fit.rows()[1]["slope_so_far"])
    with pytest.raises(ValueError):
        fit_power_law(pts[:2])
    with pytest.raises(ValueError):
        fit_power_law([(1, 1.0), (2, 0.0), (3, 1.0)])


def test_scaling_fit_small():
    # the window still grows faster than the decay at these sizes, so only the plumbing is checked
    fit = scaling_fit([4, 6, 8])
    assert fit.method == "exact_surrogate"
    assert [n for n, _ in fit.points] == [19, 27, 35]
    with pytest.raises(ValueError):
        scaling_fit([4, 6, 8], method="other")
