import math
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairflip import games
from fairflip.games import (
    Constant,
    GameSpec,
    GameState,
    Hypergeometric,
    PostProcessed,
    Simple,
    StopPolicy,
    Vector,
)
from fairflip.numerics import ber_tail, ms, sbias

from oracles import simple_game_bias

warnings.filterwarnings("ignore", message=".*not 1 mod 4.*")

# exact values from tests/oracles.py (whole-history enumeration, rationals)
FROZEN = {
    (5, Fraction(0), 0): Fraction(1801434665, 17179869184),
    (3, Fraction(1, 5), 0): Fraction(24053328, 244140625),
    (5, Fraction(0), 3): Fraction(4527915315, 68719476736),
}

SIMPLE_BIAS = {5: 0.104857, 9: 0.066514, 13: 0.050404, 17: 0.040996, 21: 0.034676, 25: 0.030134}


def test_m1_bias_is_quarter():
    assert games.bias_exact(GameSpec(1)).bias == 0.25
    assert simple_game_bias(1) == Fraction(1, 4)


@pytest.mark.parametrize("m,eps,offset", [(2, Fraction(0), 0), (3, Fraction(0), 0), (4, Fraction(0), 1),
                                          (3, Fraction(-1, 3), 2)])
def test_solver_matches_history_oracle(m, eps, offset):
    ref = simple_game_bias(m, eps, offset)
    assert games.bias_exact(GameSpec(m, float(eps), offset)).bias == pytest.approx(float(ref), abs=1e-12)


@pytest.mark.parametrize("key", sorted(FROZEN, key=str))
def test_solver_matches_frozen_oracle(key):
    m, eps, offset = key
    assert games.bias_exact(GameSpec(m, float(eps), offset)).bias == pytest.approx(float(FROZEN[key]), abs=1e-12)


def test_simple_bias_regression_values():
    for m, v in SIMPLE_BIAS.items():
        assert games.bias_exact(GameSpec(m, strict=True)).bias == pytest.approx(v, abs=1e-6)


def test_constant_hint_has_no_bias():
    assert games.bias_exact(GameSpec(5, hint=Constant())).bias == 0.0


def test_stop_immediately_policy_value():
    spec = GameSpec(1)
    # stop at round 1 always: E[o(h) - o] with a fair hint = 0 in expectation
    assert games.evaluate_policy(spec, lambda i, y, h: True) == pytest.approx(0.0, abs=1e-15)
    assert games.evaluate_policy(spec, lambda i, y, h: h == 1) == pytest.approx(0.25)


def test_optimal_policy_evaluates_to_bias():
    spec = GameSpec(5, strict=True)
    rep = games.bias_exact(spec)
    assert games.evaluate_policy(spec, rep.policy_up) == pytest.approx(rep.bias_up, abs=1e-14)
    assert -games.evaluate_policy(spec, rep.policy_down) == pytest.approx(rep.bias_down, abs=1e-14)


def test_random_policies_never_beat_optimum():
    spec = GameSpec(5, 0.1, 0, Hypergeometric(4))
    rep = games.bias_exact(spec)
    rng = np.random.default_rng(4)
    for _ in range(30):
        v = games.evaluate_policy(spec, StopPolicy.random(spec, rng))
        assert -rep.bias_down - 1e-12 <= v <= rep.bias_up + 1e-12


def test_value_with_hint_is_posterior():
    spec = GameSpec(3)
    st = GameState(2, 1)
    prior = games.value_plain(spec, st)
    lik = [games.hint_likelihood(spec, 2, 1 + x)[1] for x in (-2, 0, 2)]
    w = [0.25, 0.5, 0.25]
    p1 = sum(a * b for a, b in zip(w, lik))
    post1 = games.value_with_hint(spec, st, 1)
    post0 = games.value_with_hint(spec, st, 0)
    assert p1 * post1 + (1 - p1) * post0 == pytest.approx(prior, abs=1e-14)
    with pytest.raises(ValueError):
        games.value_with_hint(spec, GameState(2, 2), 1)


def test_hint_likelihoods_normalised():
    for hint in (Simple(), Hypergeometric(4), Vector(2), Constant(),
                 PostProcessed(Simple(), ((0.3, 0.7), (1.0, 0.0)))):
        spec = GameSpec(3, 0.0, 0, hint)
        for y in (-5, -1, 0, 3):
            assert games.hint_likelihood(spec, 1, y).sum() == pytest.approx(1.0, abs=1e-12)


def test_vector_statistic_checks():
    spec = GameSpec(1, hint=Vector(2))
    assert games.hint_statistic(spec, np.array([1, -1])) == 0
    with pytest.raises(ValueError):
        games.hint_statistic(spec, np.array([1, 1, 1]))
    sample = games.hint_sample(spec, 1, 1, np.random.default_rng(0))
    assert sample.shape == (2,)


def test_spec_validation():
    with pytest.raises(ValueError):
        GameSpec(0)
    with pytest.raises(ValueError):
        GameSpec(5, eps=1.5)
    with pytest.raises(ValueError):
        GameSpec(4, strict=True)
    with pytest.raises(ValueError):
        GameSpec(3, hint=Hypergeometric(3))
    with pytest.raises(ValueError):
        GameSpec(3, hint=Vector(0))
    with pytest.raises(ValueError):
        GameSpec(3, hint=PostProcessed(Simple(), ((0.5, 0.6), (1.0, 0.0))))
    with pytest.raises(ValueError):
        GameSpec(5, hint=Hypergeometric(30, c=0.1), strict=True)
    with pytest.warns(UserWarning):
        GameSpec(5, hint=Hypergeometric(30, c=0.1))


def test_budget_rejects_huge_games():
    with pytest.raises(ValueError):
        games.bias_exact(GameSpec(61, hint=Vector(9)))


def test_vector_games():
    v9 = games.bias_exact(GameSpec(5, hint=Vector(9))).bias
    v1 = games.bias_exact(GameSpec(5, hint=Vector(1))).bias
    assert v9 == pytest.approx(0.2005, abs=1e-4)
    assert v1 == pytest.approx(0.1516, abs=1e-4)
    assert v1 <= v9


def test_mc_matches_exact():
    spec = GameSpec(5, strict=True)
    rep = games.bias_exact(spec)
    mc = games.bias_policy_mc(spec, rep.policy_up, 200_000, 3)
    assert mc.ci_low <= rep.bias_up <= mc.ci_high
    spec_v = GameSpec(5, hint=Vector(2))
    rep_v = games.bias_exact(spec_v)
    mc_v = games.bias_policy_mc(spec_v, rep_v.policy_up, 100_000, 5)
    assert mc_v.ci_low <= rep_v.bias_up <= mc_v.ci_high


def test_postprocessing_never_helps():
    rows = games.check_postprocessing_monotonicity(GameSpec(3, 0.0, 0, Hypergeometric(2)), g_samples=10, seed=1)
    assert min(r.margin for r in rows) >= -1e-12


def test_determined_games():
    offs = games.determined_offsets(5)
    assert offs and all(abs(o) > 3 for o in offs)
    rep = games.check_determined_game(GameSpec(5, 0.0, offs[-1]))
    assert rep.holds and rep.bias <= 2 / 5
    with pytest.raises(ValueError):
        games.check_determined_game(GameSpec(5, 0.0, 0))


@settings(max_examples=25, deadline=None)
@given(m=st.integers(1, 6), eps=st.floats(-0.3, 0.3), offset=st.integers(-4, 4))
def test_bias_bounds(m, eps, offset):
    spec = GameSpec(m, eps, offset)
    rep = games.bias_exact(spec)
    assert 0.0 <= rep.bias <= 0.5
    assert rep.bias == max(rep.bias_up, rep.bias_down)
    # a hint can only move the value by as much as a full revelation would
    start = games.value_plain(spec, GameState(1, offset))
    assert rep.bias_up <= 1 - start + 1e-12 and rep.bias_down <= start + 1e-12


@settings(max_examples=20, deadline=None)
@given(m=st.integers(1, 4), seed=st.integers(0, 10_000))
def test_postprocessing_property(m, seed):
    spec = GameSpec(m)
    base = games.bias_exact(spec).bias
    ch = games.random_channel(np.random.default_rng(seed), 2, seed % 2 == 0)
    processed = games.bias_exact(GameSpec(m, hint=PostProcessed(Simple(), ch))).bias
    assert processed <= base + 1e-12


def test_bias_decreases_and_scales():
    grid = [5, 9, 13, 17, 21, 25]
    vals = [games.bias_exact(GameSpec(m, sbias(ms(m, 1), 0.5), strict=True)).bias for m in grid]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    scaled = [v * m / math.log2(m) ** 3 for v, m in zip(vals, grid)]
    assert max(scaled) < 0.05
    assert ber_tail(ms(5, 1), 0.0, 0) == pytest.approx(0.5, abs=1e-15)
