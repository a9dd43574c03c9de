import itertools

import pytest
from hypothesis import given, strategies as st

from tracelab.core import (
    BitString,
    contiguous_01_count,
    hamming,
    is_ead_pair,
    make_padded_pair,
    padded_pair_of,
    subsequence_count_oracle,
)

bits = st.text(alphabet="01", max_size=10)


def count_by_combinations(w, z):
    return sum(1 for idx in itertools.combinations(range(len(z)), len(w)) if all(z[i] == c for i, c in zip(idx, w)))


def test_bitstring_rejects_other_symbols():
    with pytest.raises(ValueError):
        BitString("0120")
    assert BitString([1, 0, 1]) == "101"


def test_bitstring_int_round_trip():
    assert BitString.from_int(5, 4) == "0101"
    assert BitString("0101").to_int() == 5
    assert BitString("").to_int() == 0


def test_one_based_access_and_clamped_slices():
    s = BitString("0110")
    assert s.bit(1) == 0 and s.bit(2) == 1
    assert s.sub(2, 3) == "11"
    assert s.sub(0, 99) == "0110"
    assert s.sub(3, 2) == ""


def test_concatenation_keeps_type():
    s = BitString("01") * 2 + "1"
    assert isinstance(s, BitString) and s == "01011"
    assert s.ones() == 3


def test_hamming():
    assert hamming("0110", "0101") == 2
    with pytest.raises(ValueError):
        hamming("0", "01")


@pytest.mark.parametrize("k", [1, 2, 5])
def test_padded_pair_shape(k):
    pair = make_padded_pair(k)
    assert pair.n == 4 * k + 3 == len(pair.x) == len(pair.y)
    assert pair.x == "01" * k + "1" + "01" * (k + 1)
    assert pair.y == "01" * (k + 1) + "1" + "01" * k
    assert pair.x[pair.lone_one_index("x") - 1] == "1"
    assert pair.y[pair.lone_one_index("y") - 1] == "1"


def test_smallest_pair_strings():
    pair = make_padded_pair(1)
    assert (pair.x, pair.y) == ("0110101", "0101101")


def test_padded_pair_rejects_k0():
    with pytest.raises(ValueError):
        make_padded_pair(0)


def test_padded_pair_recognition():
    pair = make_padded_pair(3)
    assert padded_pair_of(pair.x) == (pair, "x")
    assert padded_pair_of(pair.y) == (pair, "y")
    assert padded_pair_of("0110100") is None
    assert padded_pair_of("01") is None


def test_contiguous_01_count():
    assert contiguous_01_count("") == 0
    assert contiguous_01_count("0101") == 2
    assert contiguous_01_count("0011") == 1
    assert contiguous_01_count("1100") == 0


@given(bits, bits)
def test_oracle_matches_combinations(w, z):
    w = w[:5]
    assert subsequence_count_oracle(w, z) == count_by_combinations(w, z)


def test_oracle_empty_word():
    assert subsequence_count_oracle("", "0101") == 1
    assert subsequence_count_oracle("", "") == 1
    assert subsequence_count_oracle("1", "") == 0


def test_ead_pair_detection():
    e = is_ead_pair("0011", "0101")
    assert e is not None and (e.k1, e.k2) == (1, 4)
    assert is_ead_pair("0000", "0000") is None
    assert is_ead_pair("0000", "1001") is None
    with pytest.raises(ValueError):
        is_ead_pair("0", "00")
