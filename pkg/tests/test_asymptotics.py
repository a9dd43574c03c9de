import json
import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from tracelab.asymptotics import (
    ApproxParams,
    AuditReport,
    Lemma2Sweep,
    LemmaSymmetryParams,
    lemma2_approx,
    lemma2_audit,
    lemma2_exact,
    lemma2_exponent,
    lemma4_range_check,
    lemma4_sweep,
    lemma5_check,
    lemma6_7_check,
    lemma6_7_ratio,
    load_baselines,
    oddcombo_gap,
)

HALF = Fraction(1, 2)


def test_params_validation():
    with pytest.raises(ValueError):
        ApproxParams(10, 10, Fraction(1, 3), 0, 0)  # eta*A not integral
    with pytest.raises(ValueError):
        ApproxParams(10, 10, HALF, 0, -6)
    with pytest.raises(ValueError):
        ApproxParams(0, 10, HALF, 0, 0)


@given(st.sampled_from([100, 1000, 4000]), st.sampled_from([Fraction(1, 2), Fraction(1, 4), Fraction(3, 4)]))
def test_approx_is_one_at_the_origin(A, eta):
    assert lemma2_approx(ApproxParams(A, 2 * A, eta, 0, 0)) == 1.0


def test_eta_must_be_bounded_away():
    with pytest.raises(ValueError):
        lemma2_approx(ApproxParams(100, 100, Fraction(1, 50), 0, 0))
    with pytest.raises(ValueError):
        lemma2_approx(ApproxParams(100, 100, Fraction(24, 25), 0, 0))


def test_approx_against_exact_ratio():
    p = ApproxParams(10**4, 10**4, HALF, 50, 25)
    exact = lemma2_exact(p)
    # independent big-integer oracle for the same ratio
    num = math.comb(10**4, 5000) ** 2
    den = math.comb(10**4 + 50, 5025) * math.comb(10**4 - 50, 4975)
    assert exact == pytest.approx(num / den, rel=1e-12)
    assert abs(lemma2_approx(p) / exact - 1) < 0.05


def test_exponent_at_three_quarters():
    # A = B, eta = 3/4, delta = sigma: sigma^2 (1/eta - 1) / (2A) per side, twice that in total
    A, s = 1000, 20
    p = ApproxParams(A, A, Fraction(3, 4), s, s)
    assert lemma2_exponent(p) == pytest.approx(s * s * (4 / 3 - 1) / A, rel=1e-14)


def test_audit_fits_the_error_model():
    rep = lemma2_audit(Lemma2Sweep.load())
    base = load_baselines()
    assert rep.fitted_constant <= base["lemma2_fitted_constant"] * 1.01
    assert rep.extra["degenerate_max_deviation"] == 0.0
    assert 1.0 <= rep.extra["corollary_K"] <= base["lemma2_corollary_K"] * 1.01
    # the stated additive form also holds with the fitted constant
    C = rep.fitted_constant
    for p in Lemma2Sweep((1000,), HALF, step=4).points():
        dev = abs(lemma2_approx(p) / lemma2_exact(p) - 1)
        cubic = abs(p.delta) ** 3 + abs(p.sigma) ** 3 + abs(p.delta - p.sigma) ** 3
        assert dev <= C * cubic / p.A**2 + 4 / p.A
    assert json.loads(rep.to_json())["points"] == rep.points


def test_audit_is_deterministic():
    sweep = Lemma2Sweep((1000,), HALF, step=5)
    assert lemma2_audit(sweep).to_json() == lemma2_audit(sweep).to_json()


def test_sweep_config_formats(tmp_path):
    cfg = {"A_list": [1000], "eta": "1/2", "delta_range": [-3, 3], "sigma_range": [0, 2]}
    js = tmp_path / "s.json"
    js.write_text(json.dumps(cfg))
    toml = tmp_path / "s.toml"
    toml.write_text('A_list = [1000]\neta = "1/2"\ndelta_range = [-3, 3]\nsigma_range = [0, 2]\n')
    a, b = Lemma2Sweep.load(str(js)), Lemma2Sweep.load(str(toml))
    assert a == b
    assert len(list(a.points())) == 7 * 3
    with pytest.raises(ValueError):
        lemma2_audit([])


def test_lemma4_examples():
    k, m, f = 100, 200, 66
    r = math.sqrt(k) * math.log(k)
    lhs, thr, flagged = lemma4_range_check(k, m, f, f // 2, m // 2)
    assert flagged and lhs > thr
    assert not lemma4_range_check(k, m, f, f // 2 + 2 * math.ceil(r), m // 2)[2]
    with pytest.raises(ValueError):
        lemma4_range_check(k, 100, f, 0, 1)


def test_lemma4_flags_follow_the_flat_direction():
    s = lemma4_sweep(100)
    assert s.flagged > 0
    assert s.outside_both == 0
    # flags off the rectangle exist, but only inside the degenerate strip
    assert s.outside_either > 0
    assert s.strip_excess < 0.5 * math.log(100) ** 2


def test_lemma5_examples():
    k, m = 100, 200
    f, a = 66, 33
    lhs, rhs, dev = lemma5_check(k, m, f, a, 80, 120)
    assert dev <= load_baselines()["lemma5_max_deviation"] * 1.01
    lhs, rhs, _ = lemma5_check(k, m, f, a, 95, 95 + 2 * 10)
    assert abs(Fraction(lhs, rhs) / Fraction(1, 2) - 1) < 0.01
    with pytest.raises(ValueError):
        lemma5_check(k, m, f, a, 100, 104)


def test_oddcombo_gap_halves():
    k = 3000
    m, f = 2 * k, (2 * k) // 3
    a = f // 2
    j = 3 * a
    gaps = [oddcombo_gap(k, m, f, a, j, j + d) for d in (24, 48, 96, 192)]
    for g1, g2 in zip(gaps, gaps[1:]):
        assert 0.35 <= g2 / g1 <= 0.65


def test_oddcombo_normalised_gap_within_baseline():
    k = 100
    m, f = 200, 66
    a = 33
    for d in range(6, 40):
        g = oddcombo_gap(k, m, f, a, 99, 99 + d)
        assert g * d / math.log(k) ** 2 <= load_baselines()["oddcombo_fitted_constant"] * 1.01


@pytest.mark.parametrize("which", ["6", "7a", "7b"])
def test_symmetry_fixed_points(which):
    assert lemma6_7_check(LemmaSymmetryParams(400, 800, 266, 0, Fraction(0)), which) == 0.0
    # the reflection maps each product onto the other when delta = eps
    for d in (-30, 3, 27):
        assert lemma6_7_ratio(LemmaSymmetryParams(400, 800, 266, d, Fraction(d)), which) == 1


def test_lemma7b_not_fixed_at_twice_eps():
    assert lemma6_7_ratio(LemmaSymmetryParams(400, 800, 266, 18, Fraction(9)), "7b") != 1


def test_lemma6_example_within_baseline():
    dev = lemma6_7_check(LemmaSymmetryParams(400, 800, 266, 30, Fraction(9)), 6)
    assert 0 < dev <= load_baselines()["lemma6_max_deviation"] * 1.01


def test_symmetry_params_validation():
    with pytest.raises(ValueError):
        LemmaSymmetryParams(400, 800, 266, 0, Fraction(1, 2))
    with pytest.raises(ValueError):
        LemmaSymmetryParams(400, 800, 266, 500, Fraction(0))
    with pytest.raises(ValueError):
        lemma6_7_check(LemmaSymmetryParams(400, 800, 266, 0, Fraction(0)), "8")


def test_report_serialises():
    rep = AuditReport("s", 0.1, {"A": 1}, 0.2, 3)
    assert json.loads(rep.to_json())["fitted_constant"] == 0.2
