import math

import numpy as np
import pytest

from fairflip import games, sim
from fairflip.games import GameSpec, Simple, Vector
from fairflip.numerics import ms, sbias
from fairflip.protocol import AbortAt, HonestSchedule

from oracles import cleve_greedy_bias, simple_game_bias


def test_honest_adversary_has_zero_bias():
    for protocol in sim.PROTOCOLS:
        rep = sim.measure_unbiasedness(protocol, HonestSchedule(), 5)
        assert rep.bias == 0.0 and rep.adversary == "none"


def test_coin_step_abort_is_free():
    rep = sim.measure_unbiasedness("pi2", AbortAt({"out:1:b": {0}}), 5, "exact")
    assert rep.bias == 0.0


@pytest.mark.parametrize("m", [1, 3, 5])
def test_exact_dp_and_game_agree(m):
    adv = sim.optimal_adversary("pi2", m)
    target = games.bias_exact(sim.protocol_game("pi2", m)).bias
    ex = sim.measure_unbiasedness("pi2", adv, m, "exact")
    dp = sim.measure_unbiasedness("pi2", adv, m, "dp")
    assert ex.bias == pytest.approx(target, abs=1e-12)
    assert dp.bias == pytest.approx(target, abs=1e-12)
    # telescoping: the sum of value changes is the shift of the honest output
    assert ex.output_shift == pytest.approx(ex.signed, abs=1e-12)
    if sbias(ms(m, 1), 0.5) == 0.0:
        assert ex.bias == pytest.approx(float(simple_game_bias(m)), abs=1e-12)


def test_greedy_m1_is_quarter():
    rep = sim.measure_unbiasedness("pi2", sim.greedy_adversary("pi2", 1), 1, "exact")
    assert rep.bias == pytest.approx(0.25, abs=1e-15)
    assert rep.adversary == "greedy:1"


def test_greedy_never_beats_optimal():
    for m in (3, 5):
        opt = sim.measure_unbiasedness("pi2", sim.optimal_adversary("pi2", m), m, "dp").bias
        for d in (0, 1):
            g = sim.measure_unbiasedness("pi2", sim.greedy_adversary("pi2", d), m, "dp").bias
            assert g <= opt + 1e-12


@pytest.mark.parametrize("m", [3, 5, 9])
def test_random_policies_dominated_two_party(m):
    opt = sim.measure_unbiasedness("pi2", sim.optimal_adversary("pi2", m), m, "dp").bias
    rng = np.random.default_rng(m)
    for _ in range(100):
        adv = sim.random_table_adversary("pi2", m, rng)
        assert sim.measure_unbiasedness("pi2", adv, m, "dp").bias <= opt + 1e-12


def test_random_policies_dominated_three_party():
    m = 5
    opt = sim.measure_unbiasedness("pi3", sim.optimal_adversary("pi3", m), m, "dp").bias
    rng = np.random.default_rng(11)
    for _ in range(100):
        adv = sim.random_table_adversary("pi3", m, rng, corrupt=(0, 1))
        assert sim.measure_unbiasedness("pi3", adv, m, "dp").bias <= opt + 1e-12


def test_three_party_optimal_matches_game_and_vector_bound():
    m = 5
    adv = sim.optimal_adversary("pi3", m)
    rep = sim.measure_unbiasedness("pi3", adv, m, "dp")
    assert rep.bias == pytest.approx(games.bias_exact(GameSpec(m, hint=Vector(1))).bias, abs=1e-12)
    assert rep.output_shift == pytest.approx(rep.signed, abs=1e-12)
    assert rep.bias <= games.bias_exact(GameSpec(m, hint=Vector(9))).bias


def test_mc_soundness_output_shift_matches_telescoping_sum():
    rep = sim.measure_unbiasedness("pi2", sim.greedy_adversary("pi2", 1), 3, "mc", trials=3000, seed=1)
    exact = sim.measure_unbiasedness("pi2", sim.greedy_adversary("pi2", 1), 3, "exact")
    assert rep.ci_low <= exact.signed <= rep.ci_high
    assert rep.output_ci[0] <= exact.signed <= rep.output_ci[1]


def test_mc_three_party_optimal_in_ci():
    m = 5
    adv = sim.optimal_adversary("pi3", m)
    dp = sim.measure_unbiasedness("pi3", adv, m, "dp")
    mc = sim.measure_unbiasedness("pi3", adv, m, "mc", trials=400, seed=3)
    assert mc.output_ci[0] - 0.02 <= dp.signed <= mc.output_ci[1] + 0.02


def test_mc_is_deterministic():
    adv = sim.greedy_adversary("pi2", 1)
    a = sim.measure_unbiasedness("pi2", adv, 3, "mc", trials=200, seed=5)
    b = sim.measure_unbiasedness("pi2", adv, 3, "mc", trials=200, seed=5)
    assert (a.signed, a.output_shift) == (b.signed, b.output_shift)


def test_cleve_baseline():
    for m in (1, 3, 5, 7):
        dp = sim.measure_unbiasedness("cleve", sim.greedy_adversary("cleve", 1), m, "dp")
        assert dp.bias == pytest.approx(float(cleve_greedy_bias(m)), abs=1e-14)
    mc = sim.cleve_attack_mc(5, 200_000, 0)
    assert mc.ci_low <= 5 / 32 <= mc.ci_high


def test_bias_report_mirrors_ci():
    rep = sim.BiasReport("pi2", 5, "x", (0,), "mc", -0.1, -0.12, -0.08, 10, 0, 1.0)
    assert rep.bias == 0.1 and rep.bias_ci == (0.08, 0.12)
    row = rep.row()
    assert list(row) == sim.CSV_COLUMNS and row["corrupt_set"] == "0"


def test_simple_emulator_round_trip():
    m = 3
    adv = sim.optimal_adversary("pi2", m)
    spec = adv.game
    emu = sim.reduction_emulator(spec, adv)
    pol = emu.to_stop_policy(spec)
    rep = games.bias_exact(spec)
    assert games.evaluate_policy(spec, pol) == pytest.approx(games.evaluate_policy(spec, adv.policy), abs=1e-15)
    assert abs(games.evaluate_policy(spec, pol)) == pytest.approx(rep.bias, abs=1e-12)


def test_emulated_greedy_matches_protocol_gain():
    m = 3
    adv = sim.greedy_adversary("pi2", 1)
    spec = sim.protocol_game("pi2", m)
    pol = sim.reduction_emulator(spec, adv).to_stop_policy(spec)
    proto = sim.measure_unbiasedness("pi2", adv, m, "exact").signed
    assert games.evaluate_policy(spec, pol) == pytest.approx(-proto, abs=1e-12)


def test_emulator_rejects_coin_step_abort():
    m = 3
    emu = sim.SimpleGameEmulator(AbortAt({"out:1:b": {0}}), m, 0.0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        emu.decide(2, [1], [1, 0])
    with pytest.raises(ValueError):
        sim.reduction_emulator(GameSpec(3, hint=Vector(2)), sim.optimal_adversary("pi3", 3))


def test_vector_emulator_play_is_bounded():
    m = 3
    adv = sim.optimal_adversary("pi3", m)
    spec = GameSpec(m, hint=Vector(9))
    emu = sim.reduction_emulator(spec, adv, np.random.default_rng(1))
    rng = np.random.default_rng(2)
    gains = [emu.play(spec, rng) for _ in range(300)]
    bound = games.bias_exact(spec).bias
    assert abs(np.mean(gains)) <= bound + 4 * np.std(gains) / math.sqrt(len(gains))


def test_sweep_grid():
    reps = sim.sweep("pi2", ["optimal"], [5, 9, 13], trials=20_000, seed=0)
    opt = [r for r in reps if r.protocol == "pi2"]
    base = [r for r in reps if r.protocol == "cleve"]
    assert [r.m for r in opt] == [5, 9, 13]
    assert all(a.bias > b.bias for a, b in zip(opt, opt[1:]))
    assert len(base) == 3
    with pytest.raises(ValueError):
        sim.sweep("pi2", ["optimal"], [])


def test_invalid_arguments():
    with pytest.raises(ValueError):
        sim.measure_unbiasedness("pi2", AbortAt({}, corrupt=frozenset({0, 1})), 3)
    with pytest.raises(ValueError):
        sim.measure_unbiasedness("pi2", sim.greedy_adversary("pi2", 1), 3, "bogus")
    with pytest.raises(ValueError):
        sim.measure_unbiasedness("pi3", sim.optimal_adversary("pi3", 3), 3, "exact")
    with pytest.raises(ValueError):
        sim.measure_unbiasedness("nope", HonestSchedule(), 3)
    with pytest.raises(ValueError):
        sim.optimal_adversary("pi3", 3, corrupt=(0,))
    with pytest.raises(ValueError):
        sim.greedy_adversary("pi2", 2)


def test_protocol_game():
    assert isinstance(sim.protocol_game("pi2", 5).hint, Simple)
    assert sim.protocol_game("pi3", 5).hint == Vector(1)
    with pytest.raises(ValueError):
        sim.protocol_game("cleve", 5)
