import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from fairflip.numerics import (
    ber_pmf,
    ber_pmf_exact,
    ber_pmf_vector,
    ber_tail,
    ber_tail_exact,
    check_round_param,
    hyp_pmf,
    hyp_pmf_exact,
    hyp_pmf_vector,
    hyp_tail,
    hyp_tail_exact,
    mixture_tail,
    ml,
    ms,
    normal_upper,
    sbias,
    wilson_interval,
)

from oracles import hyp_by_subsets, pmf_by_patterns, tail_by_patterns

eps_st = st.floats(-0.95, 0.95, allow_nan=False)


def test_round_counts():
    assert [ml(5, i) for i in range(1, 6)] == [5, 4, 3, 2, 1]
    assert ms(5, 1) == 15 and ms(5, 5) == 1 and ms(5, 6) == 0
    assert ms(9, 1) % 2 == 1


def test_round_param_validation():
    check_round_param(5)
    with pytest.raises(ValueError):
        check_round_param(4)
    with pytest.warns(UserWarning):
        check_round_param(4, strict=False)
    with pytest.raises(ValueError):
        check_round_param(0, strict=False)


def test_pmf_examples():
    assert ber_pmf(2, 0, 0) == pytest.approx(0.5)
    assert ber_pmf(1, 1, 1) == 1.0
    assert ber_pmf(3, 0.1, 2) == 0.0
    assert ber_pmf(3, 0.1, 5) == 0.0
    assert ber_pmf(5, 0.2, 3) == pytest.approx(float(Fraction(162, 625)), abs=1e-15)
    assert pmf_by_patterns(5, Fraction(1, 5), 3) == Fraction(162, 625)


def test_tail_examples():
    assert ber_tail(3, 0, 0) == pytest.approx(0.5)
    assert ber_tail(4, 0, -4) == 1.0
    assert ber_tail(0, 0.3, 0) == 1.0 and ber_tail(0, 0.3, 1) == 0.0
    assert ber_tail(5, 0.2, 1) == pytest.approx(float(Fraction(2133, 3125)), abs=1e-15)
    assert tail_by_patterns(5, Fraction(1, 5), 1) == Fraction(2133, 3125)


@pytest.mark.parametrize("n", [1, 2, 5, 8])
@pytest.mark.parametrize("eps", [Fraction(0), Fraction(1, 5), Fraction(-2, 3)])
def test_pmf_matches_patterns(n, eps):
    for k in range(-n - 1, n + 2):
        assert ber_pmf_exact(n, eps, k) == pmf_by_patterns(n, eps, k)
        assert ber_pmf(n, float(eps), k) == pytest.approx(float(pmf_by_patterns(n, eps, k)), abs=1e-14)
        assert ber_tail(n, float(eps), k) == pytest.approx(float(ber_tail_exact(n, eps, k)), abs=1e-14)


def test_hyp_examples():
    assert hyp_pmf(2, 0, 1, 1) == pytest.approx(0.5)
    assert hyp_pmf(4, 0, 2, 0) == pytest.approx(2 / 3)
    assert hyp_pmf(6, 6, 4, 4) == pytest.approx(1.0)
    assert hyp_tail(4, 0, 2, -2) == pytest.approx(1.0)
    assert hyp_tail(4, 0, 2, 1) == pytest.approx(1 / 6)
    assert hyp_tail_exact(4, 0, 2, 1) == Fraction(1, 6)
    with pytest.raises(ValueError):
        hyp_pmf(4, 1, 2, 0)
    with pytest.raises(ValueError):
        hyp_pmf(4, 6, 2, 0)


@pytest.mark.parametrize("vector", [(1, 1, -1, -1), (1, -1, -1, -1, -1, 1), (1, 1, 1, -1, 1, -1, -1, 1)])
def test_hyp_matches_subsets(vector):
    n, p = len(vector), sum(vector)
    for ell in range(0, n + 1):
        for k in range(-ell, ell + 1):
            ref = hyp_by_subsets(vector, ell, k)
            assert hyp_pmf_exact(n, p, ell, k) == ref
            assert hyp_pmf(n, p, ell, k) == pytest.approx(float(ref), abs=1e-14)


def test_normal_upper():
    assert normal_upper(0) == 0.5
    assert normal_upper(40) <= 1e-300
    assert normal_upper(1) == pytest.approx(0.158655, abs=1e-6)
    ref, _ = quad(lambda t: math.exp(-t * t / 2) / math.sqrt(2 * math.pi), 1, math.inf)
    assert normal_upper(1) == pytest.approx(ref, abs=1e-12)
    xs = np.linspace(-5, 5, 41)
    assert np.allclose(normal_upper(xs) + normal_upper(-xs), 1.0, atol=1e-12)


def test_sbias_examples():
    assert sbias(15, 0.5) == 0.0
    assert sbias(3, 1.0) == 1.0 and sbias(3, 0.0) == -1.0
    e = sbias(5, 0.7)
    assert abs(ber_tail(5, e, 0) - 0.7) <= 1e-12


def test_large_n_tails_are_accurate_near_one():
    # complement of a tiny lower tail; a plain cumulative sum drifts by ~1e-11 here
    d = ber_tail(2500, 0.06719, -167)
    e = sbias(12500, d)
    assert abs(ber_tail(12500, e, 0) - d) <= 1e-12
    assert abs(e - 0.0598) < 1e-3


def test_wilson_interval():
    lo, hi = wilson_interval(0.5, 10_000)
    assert lo < 0.5 < hi and hi - lo < 0.03
    assert wilson_interval(0.0, 10)[0] == 0.0
    with pytest.raises(ValueError):
        wilson_interval(0.5, 0)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(0, 60), eps=eps_st)
def test_pmf_sums_to_one(n, eps):
    assert abs(ber_pmf_vector(n, eps)[1].sum() - 1.0) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 60), data=st.data())
def test_hyp_sums_to_one_and_mean(n, data):
    p = data.draw(st.integers(-n, n).filter(lambda v: (v - n) % 2 == 0))
    ell = data.draw(st.integers(0, n))
    xs, px = hyp_pmf_vector(n, p, ell)
    assert abs(px.sum() - 1.0) <= 1e-12
    assert abs(float(xs @ px) - ell * p / n) <= 1e-10


@settings(max_examples=80, deadline=None)
@given(n=st.integers(0, 40), eps=eps_st, k=st.integers(-45, 45))
def test_tail_telescopes(n, eps, k):
    lhs = ber_tail(n, eps, k) - ber_tail(n, eps, k + 2)
    rhs = ber_pmf(n, eps, k) + ber_pmf(n, eps, k + 1)
    assert abs(lhs - rhs) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 40), eps=eps_st, k=st.integers(-41, 40))
def test_tail_monotone_in_k(n, eps, k):
    assert ber_tail(n, eps, k) >= ber_tail(n, eps, k + 1) - 1e-15


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 200), delta=st.floats(0.001, 0.999))
def test_sbias_inverts_tail(n, delta):
    e = sbias(n, delta)
    assert abs(ber_tail(n, e, 0) - delta) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(big_n=st.integers(1, 50), eps=st.floats(-0.5, 0.5), data=st.data())
def test_mixture_identity(big_n, eps, data):
    ell = data.draw(st.integers(0, big_n))
    y = data.draw(st.integers(-ell - 1, ell + 1))
    assert abs(mixture_tail(big_n, eps, ell, -y) - ber_tail(ell, eps, -y)) <= 1e-10
