import json
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
import pytest

from fairflip.numerics import ber_tail, ms, wilson_interval
from fairflip.protocol import (
    AbortAt,
    AdversaryView,
    HonestSchedule,
    RoundLabel,
    abort_value,
    honest_outputs_batch,
    run_cleve_majority,
    run_three_party,
    run_three_party_wrapped,
    run_two_party,
    run_two_party_wrapped,
    view_value,
)
from fairflip.shares import reconstruct_two, three_share_gen, two_share_gen

from oracles import cleve_greedy_bias


@dataclass
class Recorder:
    """Never aborts; logs the coalition's view value at every step."""

    corrupt: frozenset
    log: dict = field(default_factory=lambda: defaultdict(list))

    def decide(self, label, view):
        if view.context != "oracle":
            self.log[str(label)].append(view_value(view))
        return ()


def test_round_labels():
    lab = RoundLabel.parse("out:3:b")
    assert str(lab) == "out:3:b" and lab.phase == "out"
    assert RoundLabel.make("oracle", 0, "call") < RoundLabel.make("out", 1, "a") < RoundLabel.make("out", 1, "b")


@pytest.mark.parametrize("runner,n", [(run_two_party_wrapped, 2), (run_three_party_wrapped, 3), (run_cleve_majority, 2)])
def test_honest_runs_agree(runner, n):
    for seed in range(5):
        tr = runner(5, seed=seed)
        assert tr.agreement and len(tr.outputs) == n and not tr.aborts


def test_two_party_output_is_coin_majority():
    bundles = two_share_gen(5, 0.5, np.random.default_rng(3))
    tr = run_two_party(5, bundles)
    assert sum(r["label"].endswith(":b") for r in tr.rounds) == 5
    c, _ = reconstruct_two(*bundles)
    assert tr.outputs == {0: int(c.sum() >= 0), 1: int(c.sum() >= 0)}


def test_transcript_json_field_order():
    tr = run_two_party_wrapped(5, AbortAt({"out:2:a": {0}}), seed=1)
    d = json.loads(tr.to_json())
    assert list(d) == ["params", "seed", "rounds", "aborts", "outputs"]
    assert d["aborts"][0]["label"] == "out:2:a"
    assert set(d["outputs"]) == {"1"}


def test_abort_at_oracle_gives_uniform_coin():
    outs = [run_two_party_wrapped(5, AbortAt({"oracle:0:call": {1}}), seed=s).outputs[0] for s in range(400)]
    lo, hi = wilson_interval(np.mean(outs), 400)
    assert lo <= 0.5 <= hi


def test_non_eligible_abort_raises():
    with pytest.raises(ValueError):
        run_two_party_wrapped(5, AbortAt({"out:1:a": {1}}, corrupt=frozenset({0})), seed=0)
    with pytest.raises(ValueError):
        run_two_party_wrapped(5, AbortAt({}, corrupt=frozenset({0, 1})), seed=0)


def test_view_value_examples():
    assert view_value(AdversaryView("pi2", 5, frozenset())) == 0.5
    tr = run_two_party_wrapped(5, AbortAt({"out:3:b": {0}}), seed=4)
    ev = tr.aborts[0]
    # a (i, b) abort does not move the value: both sides equal the tail of the remaining coins
    assert ev.val_before == pytest.approx(ev.val_after, abs=1e-15)
    v = AdversaryView("cleve", 3, frozenset({0}), context="cleve", label=RoundLabel.make("out", 3, "b"), coins=[1, -1, 1])
    assert view_value(v) == 1.0
    assert abort_value(v, {0}) == ber_tail(1, 0.0, 0) == 0.5


def test_pi2_b_abort_value_formula():
    for seed in range(5):
        tr = run_two_party_wrapped(5, AbortAt({"out:2:b": {0}}), seed=seed)
        ev = tr.aborts[0]
        # value after a (2, b) abort is a tail over the ms(3) remaining coins
        candidates = [ber_tail(ms(5, 3), 0.0, -s) for s in range(-9, 10)]
        assert min(abs(ev.val_after - c) for c in candidates) < 1e-12


def test_cleve_m1_greedy_oracle():
    # m = 1: aborting after seeing a -1 leaves a fresh fair coin
    assert cleve_greedy_bias(1) == pytest.approx(0.25)
    outs = []
    for s in range(2000):
        rng = np.random.default_rng(s)
        tr = run_cleve_majority(1, Greedy1(), rng=rng)
        outs.append(tr.honest_output)
    lo, hi = wilson_interval(np.mean(outs), 2000)
    assert lo <= 0.75 <= hi


@dataclass
class Greedy1:
    corrupt: frozenset = frozenset({0})

    def decide(self, label, view):
        return {0} if abort_value(view, {0}) > view_value(view) else ()


def test_three_party_abort_scenarios():
    rng = np.random.default_rng(11)
    deal = three_share_gen(5, rng)
    tr = run_three_party(5, deal, AbortAt({"out:2:a": {2}}), rng=rng)
    assert set(tr.outputs) == {0, 1} and tr.agreement
    tr = run_three_party(5, deal, AbortAt({"out:3:b": {1, 2}}), rng=rng)
    assert set(tr.outputs) == {0}
    tr = run_three_party(5, deal, AbortAt({"out:1:a": {0, 1}}), rng=rng)
    assert set(tr.outputs) == {2}
    tr = run_three_party_wrapped(5, AbortAt({"oracle:0:call": {0}}), seed=2)
    assert set(tr.outputs) == {1, 2}


def test_three_party_fallback_follows_row_law():
    # after one party leaves at (3, a), the pair's output is Ber(delta_2) given the first two coins
    n = 300
    outs, deltas = [], []
    for s in range(n):
        rng = np.random.default_rng(1000 + s)
        deal = three_share_gen(5, rng)
        tr = run_three_party(5, deal, AbortAt({"out:3:a": {2}}), rng=rng, account=False)
        outs.append(tr.outputs[0])
        deltas.append(deal.deltas[1])
    diff = np.mean(outs) - np.mean(deltas)
    assert abs(diff) < 4 * 0.5 / np.sqrt(n)


@pytest.mark.parametrize("protocol", ["pi2", "pi3"])
def test_batched_honest_outputs(protocol):
    out = honest_outputs_batch(protocol, 5, 50_000, np.random.default_rng(0))
    lo, hi = wilson_interval(out.mean(), out.size)
    assert lo <= 0.5 <= hi
    with pytest.raises(ValueError):
        honest_outputs_batch("nope", 5, 10, np.random.default_rng(0))


def test_view_values_are_martingale():
    rec = Recorder(frozenset({0}))
    n = 3000
    for s in range(n):
        run_two_party_wrapped(5, rec, seed=s)
    for label, vals in rec.log.items():
        assert abs(np.mean(vals) - 0.5) < 4 * np.std(vals) / np.sqrt(n) + 1e-3, label


def test_honest_schedule_is_default():
    a = run_two_party_wrapped(3, HonestSchedule(), seed=9).to_json()
    b = run_two_party_wrapped(3, seed=9).to_json()
    assert a.replace('"pi2-wrapped"', "") == b.replace('"pi2-wrapped"', "")
