"""Fail-stop adversaries, game emulators and bias measurement.

The measured quantity for an adversary is the expected sum, over the rounds
in which it aborts, of ``val(after abort) - val(before abort)``, where ``val``
is the expected honest outcome given the coalition's view
(:func:`fairflip.protocol.view_value`). Three estimators are available:

``exact``
    Enumerates every coin and every defense bit the adversary can see, with
    exact rational arithmetic when the dealer bias is 0. Values before an
    abort are computed by brute-force summation over the enumerated
    continuation, independently of the game solver. Two-party protocol only.
``dp``
    Exact forward recursion over ``(round, coin sum)`` for adversaries that
    decide on ``(round, sum, hint statistic)`` only.
``mc``
    Seeded simulation of full protocol runs, reporting 99% Wilson intervals.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import games
from .games import GameSpec, Simple, StopPolicy, Vector
from .numerics import (
    ber_pmf,
    ber_pmf_exact,
    ber_pmf_vector,
    ber_tail,
    ber_tail_exact,
    ml,
    ms,
    sbias,
    wilson_interval,
)
from .protocol import (
    AbortAt,
    AdversaryView,
    HonestSchedule,
    RoundLabel,
    RowKnowledge,
    TwoPartyKnowledge,
    abort_value,
    run_cleve_majority,
    run_three_party_wrapped,
    run_two_party_wrapped,
    view_value,
)
from .shares import CoinEncoding, hid_two_share_gen_batch

PROTOCOLS = ("pi2", "pi3", "cleve")
TREE_BUDGET = 10_000_000


# ----------------------------------------------------------------------------
# adversaries


def _lead(view: AdversaryView) -> int | None:
    active = sorted(view.active_corrupt())
    return active[0] if active else None


def _markov_state(view: AdversaryView):
    """``(i, step, y, hint)`` seen by the coalition at the current step, or None."""
    lab = view.label
    if lab is None or view.context == "oracle":
        return None
    i = lab.i
    if view.context == "pi2":
        two = view.two
        if lab.step == "a":
            hint = two.defenses[i - 1] if two.role is not None and len(two.defenses) >= i else None
            return i, "a", sum(two.coins[: i - 1]), hint
        return i, "b", sum(two.coins[:i]), None
    if view.context == "pi3":
        if lab.step == "a":
            stat = None
            if view.row is not None and view.row.pair_coins is not None:
                stat = int(np.sum(view.row.pair_coins))
            return i, "a", sum(view.coins[: i - 1]), stat
        return i, "b", sum(view.coins[:i]), None
    if view.context == "cleve":
        return i, "b", sum(view.coins[:i]), None
    return None


@dataclass
class GreedyAdversary:
    """Aborts the lowest active corrupted party as soon as that moves the value the chosen way."""

    protocol: str
    direction: int
    corrupt: frozenset[int] = frozenset({0})
    tol: float = 1e-12

    @property
    def name(self) -> str:
        return f"greedy:{1 if self.direction > 0 else 0}"

    def gain(self, view: AdversaryView) -> float:
        lead = _lead(view)
        if lead is None:
            return 0.0
        return abort_value(view, {lead}) - view_value(view)

    def decide(self, label: RoundLabel, view: AdversaryView) -> Iterable[int]:
        lead = _lead(view)
        if lead is None or view.context == "oracle":
            return ()
        return (lead,) if self.direction * self.gain(view) > self.tol else ()


@dataclass
class TableAdversary:
    """Decides from ``(round, step, coin sum, hint statistic)`` via a rule.

    ``rule(i, step, y, hint) -> bool``. With ``first_only`` the coalition
    stops after its first abort.
    """

    rule: object
    corrupt: frozenset[int] = frozenset({0})
    name: str = "table"
    first_only: bool = True
    inner_rule: object = None

    def decide(self, label: RoundLabel, view: AdversaryView) -> Iterable[int]:
        lead = _lead(view)
        if lead is None:
            return ()
        inner = label.phase in ("in", "in-oracle")
        if inner and (self.first_only or self.inner_rule is None):
            return ()
        state = _markov_state(view)
        if state is None:
            return ()
        rule = self.inner_rule if inner else self.rule
        return (lead,) if rule(*state) else ()


def greedy_adversary(protocol: str, direction: int, corrupt: Iterable[int] = (0,)) -> GreedyAdversary:
    """Greedy attacker pushing the honest output toward ``direction`` (1 or 0)."""
    if direction not in (0, 1, -1):
        raise ValueError("direction must be 0 or 1")
    return GreedyAdversary(protocol, 1 if direction == 1 else -1, frozenset(corrupt))


def random_table_adversary(protocol: str, m: int, rng: np.random.Generator, corrupt: Iterable[int] = (0,),
                           p_stop: float = 0.2) -> TableAdversary:
    """A random rule on ``(round, step, sum, hint)``, stored lazily in a dict."""
    table: dict = {}

    def rule(i, step, y, hint):
        key = (i, step, y, hint)
        if key not in table:
            table[key] = bool(rng.random() < p_stop)
        return table[key]

    return TableAdversary(rule, frozenset(corrupt), "random")


def protocol_game(protocol: str, m: int) -> GameSpec:
    """The game whose optimal policy drives :func:`optimal_adversary`.

    Two-party: the simple game with the dealer's bias. Three-party with a
    corrupt pair: the vector game with one block of ``ms(1)`` entries, which
    is what the pair's inner coins reveal about the round value.
    """
    if protocol == "pi2":
        return GameSpec(m, sbias(ms(m, 1), 0.5), 0, Simple())
    if protocol == "pi3":
        return GameSpec(m, 0.0, 0, Vector(1))
    raise ValueError(f"no game for protocol {protocol}")


def optimal_adversary(protocol: str, m: int, corrupt: Iterable[int] | None = None,
                      direction: str | None = None) -> TableAdversary:
    """Translate the optimal game policy into a protocol adversary.

    The adversary aborts at ``(i, a)`` exactly when the game policy stops at
    round ``i`` with the same sum and hint. Three-party adversaries need a
    corrupt pair and act on the first abort only.
    """
    spec = protocol_game(protocol, m)
    rep = games.bias_exact(spec)
    policy = {"up": rep.policy_up, "down": rep.policy_down}.get(direction or rep.direction)
    if protocol == "pi2":
        corrupt = frozenset(corrupt or (0,))
    else:
        corrupt = frozenset(corrupt or (0, 1))
        if len(corrupt) != 2:
            raise ValueError("the three-party optimal adversary corrupts two parties")

    def rule(i, step, y, hint):
        return step == "a" and hint is not None and policy.decide(i, y, hint)

    adv = TableAdversary(rule, corrupt, "optimal")
    adv.game = spec
    adv.policy = policy
    return adv


# ----------------------------------------------------------------------------
# reports


@dataclass
class BiasReport:
    protocol: str
    m: int
    adversary: str
    corrupt_set: tuple[int, ...]
    estimator: str
    signed: float                 # expected sum of value changes caused by aborts
    ci_low: float
    ci_high: float
    trials: int
    seed: int | None
    runtime_ms: float
    output_shift: float | None = None   # E[honest output] - 1/2 when measured
    output_ci: tuple[float, float] | None = None

    @property
    def bias(self) -> float:
        return abs(self.signed)

    @property
    def bias_ci(self) -> tuple[float, float]:
        """Interval for :attr:`bias`, mirrored when the signed estimate is negative."""
        if self.signed < 0:
            return -self.ci_high, -self.ci_low
        return self.ci_low, self.ci_high

    def row(self) -> dict:
        lo, hi = self.bias_ci
        return {
            "protocol": self.protocol,
            "m": self.m,
            "adversary": self.adversary,
            "corrupt_set": "".join(str(z) for z in self.corrupt_set) or "-",
            "estimator": self.estimator,
            "bias": f"{self.bias:.12g}",
            "ci_low": f"{lo:.12g}",
            "ci_high": f"{hi:.12g}",
            "trials": self.trials,
            "seed": "" if self.seed is None else self.seed,
            "runtime_ms": f"{self.runtime_ms:.1f}",
        }


CSV_COLUMNS = ["protocol", "m", "adversary", "corrupt_set", "estimator", "bias",
               "ci_low", "ci_high", "trials", "seed", "runtime_ms"]


def _name(policy) -> str:
    return getattr(policy, "name", type(policy).__name__)


# ----------------------------------------------------------------------------
# exact enumeration for the two-party protocol


class _Arith:
    def __init__(self, exact: bool, eps):
        self.exact = exact
        self.eps = Fraction(0) if exact else eps

    def pmf(self, n, k):
        return ber_pmf_exact(n, self.eps, k) if self.exact else ber_pmf(n, self.eps, k)

    def tail(self, n, k):
        return ber_tail_exact(n, self.eps, k) if self.exact else ber_tail(n, self.eps, k)

    def num(self, v):
        return Fraction(v) if self.exact else float(v)


def _enumerate_two_party(m: int, policy, account_b: bool = True) -> tuple[object, object]:
    """Exact expected unbiasedness sum and honest-output mean of the wrapped two-party protocol.

    Corrupted party's view: its own defenses (one per ``(i, a)``), the coins
    (one per ``(i, b)``) and its own terminal defense. Honest-continuation
    values are brute-force sums over the remaining coin paths; the honest
    party's fallback law is the dealer's defense probability.
    """
    total = ms(m, 1)
    eps = sbias(total, 0.5)
    ar = _Arith(eps == 0.0, eps)
    corrupt = frozenset(policy.corrupt)
    (z,) = tuple(corrupt) if len(corrupt) == 1 else (None,)
    if z is None:
        raise ValueError("exact two-party enumeration needs exactly one corrupted party")
    support = {i: list(range(-ml(m, i), ml(m, i) + 1, 2)) for i in range(1, m + 1)}
    size = 1
    for i in range(1, m + 1):
        size *= 2 * len(support[i])
    if size > TREE_BUDGET:
        raise ValueError(f"tree has about {size} nodes (budget {TREE_BUDGET})")
    cont_memo: dict[tuple[int, ...], object] = {}

    def cont(prefix: tuple[int, ...]):
        """E[1{final sum >= 0} | coins so far] by enumerating the remaining coins."""
        if prefix in cont_memo:
            return cont_memo[prefix]
        i = len(prefix) + 1
        if i > m:
            v = ar.num(1 if sum(prefix) >= 0 else 0)
        else:
            v = sum((ar.pmf(ml(m, i), c) * cont(prefix + (c,)) for c in support[i]), ar.num(0))
        cont_memo[prefix] = v
        return v

    def dealer(i: int, s: int):
        """Pr[defense of round i = 1 | coin sum s after round i]."""
        return ar.tail(ms(m, i + 1), -s)

    half = ar.num(Fraction(1, 2))
    half_f = ar.num(0.5) if not ar.exact else half

    def make_view(step_label, coins, defs, terminal):
        two = TwoPartyKnowledge(m, eps, 0.5, False, z, list(coins), list(defs), terminal)
        return AdversaryView("pi2", m, corrupt, context="pi2", label=step_label, two=two)

    gain_total = ar.num(0)
    out_total = ar.num(0)
    for terminal in (0, 1):
        w_root = half_f
        oracle_view = AdversaryView("pi2", m, corrupt, context="oracle",
                                    label=RoundLabel.make("oracle", 0, "call"))
        if tuple(policy.decide(oracle_view.label, oracle_view)):
            out_total += w_root * half
            continue
        stack = [((), (), w_root)]
        while stack:
            coins, defs, w = stack.pop()
            i = len(coins) + 1
            if i > m:
                out_total += w * ar.num(1 if sum(coins) >= 0 else 0)
                continue
            s = sum(coins)
            for d in (0, 1):
                joint = {}
                for c in support[i]:
                    pd = dealer(i, s + c)
                    joint[c] = ar.pmf(ml(m, i), c) * (pd if d else 1 - pd)
                p_d = sum(joint.values(), ar.num(0))
                if p_d == 0:
                    continue
                lab_a = RoundLabel.make("out", i, "a")
                view = make_view(lab_a, coins, defs + (d,), terminal)
                if tuple(policy.decide(lab_a, view)):
                    before = sum((joint[c] * cont(coins + (c,)) for c in support[i]), ar.num(0)) / p_d
                    after = dealer(i - 1, s) if i >= 2 else half
                    gain_total += w * p_d * (after - before)
                    out_total += w * p_d * after
                    continue
                for c in support[i]:
                    if joint[c] == 0:
                        continue
                    wc = w * joint[c]
                    lab_b = RoundLabel.make("out", i, "b")
                    view_b = make_view(lab_b, coins + (c,), defs + (d,), terminal)
                    if tuple(policy.decide(lab_b, view_b)):
                        after = dealer(i, s + c)
                        before = cont(coins + (c,))
                        if account_b:
                            gain_total += wc * (after - before)
                        out_total += wc * after
                        continue
                    stack.append((coins + (c,), defs + (d,), wc))
    return gain_total, out_total


def coin_step_gains(protocol: str, m: int) -> list[tuple[str, object, object]]:
    """Values before and after an abort at every coin step, over all coin paths.

    Returns ``(label, val_before, val_after)`` triples. For the two-party
    protocol the values are exact rationals in strict mode; for the
    three-party protocol inner-deal biases are floats. Three-party coverage
    includes aborts at the outer coin steps (one or two parties) and at the
    coin steps of the fallback run after a first abort at ``(j, b)``.
    """
    out: list[tuple[str, object, object]] = []
    total = ms(m, 1)
    if protocol == "pi2":
        eps = sbias(total, 0.5)
        ar = _Arith(eps == 0.0, eps)
    elif protocol == "pi3":
        ar = _Arith(True, 0.0)
    else:
        raise ValueError(protocol)

    memo: dict = {}

    def cont(prefix, arith, n_rounds):
        key = (arith.exact, arith.eps, prefix)
        if key in memo:
            return memo[key]
        i = len(prefix) + 1
        if i > n_rounds:
            v = arith.num(1 if sum(prefix) >= 0 else 0)
        else:
            v = sum((arith.pmf(ml(m, i), c) * cont(prefix + (c,), arith, n_rounds)
                     for c in range(-ml(m, i), ml(m, i) + 1, 2)), arith.num(0))
        memo[key] = v
        return v

    def walk(prefix):
        i = len(prefix)
        if i == m:
            return
        for c in range(-ml(m, i + 1), ml(m, i + 1) + 1, 2):
            yield prefix + (c,)
            yield from walk(prefix + (c,))

    for path in walk(()):
        i = len(path)
        before = cont(path, ar, m)
        s = sum(path)
        if protocol == "pi2":
            after = ar.tail(ms(m, i + 1), -s)
            out.append((f"out:{i}:b", before, after))
            continue
        delta = ar.tail(ms(m, i + 1), -s)
        eps_in = sbias(total, float(delta))
        inner = _Arith(False, eps_in)
        # one abort: survivors run the fallback on row i, whose honest outcome is 1{inner sum >= 0}
        one = cont((), inner, m)
        # two aborts: the survivor outputs its terminal defense, 1{weight of a ms(1)-subset >= 0}
        two = ber_tail(total, eps_in, 0)
        out.append((f"out:{i}:b/one", before, one))
        out.append((f"out:{i}:b/two", before, two))
        # second abort at an inner coin step: the honest party's defense law given the inner coins
        for ipath in walk(()):
            j = len(ipath)
            ib = cont(ipath, inner, m)
            ia = ber_tail(ms(m, j + 1), eps_in, -sum(ipath))
            out.append((f"in:{j}:b@out:{i}", ib, ia))
    return out


# ----------------------------------------------------------------------------
# forward recursion for rule-based adversaries


def _dp_two_party(m: int, adv) -> tuple[float, float]:
    eps = sbias(ms(m, 1), 0.5)
    rule = adv.rule
    oracle_view = AdversaryView("pi2", m, frozenset(adv.corrupt), context="oracle",
                                label=RoundLabel.make("oracle", 0, "call"))
    if tuple(adv.decide(oracle_view.label, oracle_view)):
        return 0.0, 0.0
    spec = GameSpec(m, eps, 0, Simple())
    dist = {0: 1.0}
    gain = 0.0
    out = 0.0
    for i in range(1, m + 1):
        xs, px = ber_pmf_vector(ml(m, i), eps)
        nxt: dict[int, float] = {}
        for y, w in dist.items():
            o_minus = ber_tail(ms(m, i), eps, -y)
            after_a = o_minus if i >= 2 else 0.5
            for d in (0, 1):
                lik = np.array([ber_tail(ms(m, i + 1), eps, -(y + int(x))) for x in xs])
                lik = lik if d else 1.0 - lik
                joint = px * lik
                p_d = float(joint.sum())
                if p_d <= 0.0:
                    continue
                if rule(i, "a", y, d):
                    before = games.value_with_hint(spec, games.GameState(i, y), d)
                    gain += w * p_d * (after_a - before)
                    out += w * p_d * after_a
                    continue
                for x, jx in zip(xs, joint):
                    if jx <= 0.0:
                        continue
                    t = y + int(x)
                    if rule(i, "b", t, None):
                        out += w * jx * ber_tail(ms(m, i + 1), eps, -t)
                        continue
                    nxt[t] = nxt.get(t, 0.0) + w * jx
        dist = nxt
    out += sum(w for y, w in dist.items() if y >= 0)
    return gain, out - 0.5


def _dp_three_party(m: int, adv) -> tuple[float, float]:
    """First-abort measurement for a corrupt pair deciding on the pair-row coin sum."""
    total = ms(m, 1)
    rule = adv.rule
    dist = {0: 1.0}
    gain = 0.0
    out = 0.0
    for i in range(1, m + 1):
        xs, px = ber_pmf_vector(ml(m, i), 0.0)
        nxt: dict[int, float] = {}
        for y, w in dist.items():
            after_a = ber_tail(total, sbias(total, ber_tail(ms(m, i), 0.0, -y)), 0) if i >= 2 else 0.5
            deltas = np.array([ber_tail(ms(m, i + 1), 0.0, -(y + int(x))) for x in xs])
            stat_lik = np.stack([ber_pmf_vector(total, sbias(total, float(d)))[1] for d in deltas])
            joint = px[:, None] * stat_lik            # (x, stat)
            p_s = joint.sum(0)
            stats = np.arange(-total, total + 1, 2)
            stop_mass = np.zeros(len(xs))
            for k, s in enumerate(stats):
                if p_s[k] <= 0.0 or not rule(i, "a", y, int(s)):
                    continue
                before = float(joint[:, k] @ deltas / p_s[k])
                gain += w * p_s[k] * (after_a - before)
                out += w * p_s[k] * after_a
                stop_mass += joint[:, k]
            for x, pxv, sm, d in zip(xs, px, stop_mass, deltas):
                keep = pxv - sm
                if keep <= 0.0:
                    continue
                t = y + int(x)
                if rule(i, "b", t, None):
                    out += w * keep * d
                    continue
                nxt[t] = nxt.get(t, 0.0) + w * keep
        dist = nxt
    out += sum(w for y, w in dist.items() if y >= 0)
    return gain, out - 0.5


# ----------------------------------------------------------------------------
# Monte Carlo


def _trial_rng(seed: int, t: int) -> np.random.Generator:
    return np.random.default_rng([seed, t])


def _run(protocol: str, m: int, policy, rng):
    if protocol == "pi2":
        return run_two_party_wrapped(m, policy, rng=rng)
    if protocol == "pi3":
        return run_three_party_wrapped(m, policy, rng=rng)
    if protocol == "cleve":
        return run_cleve_majority(m, policy, rng=rng)
    raise ValueError(protocol)


def _mc(protocol: str, m: int, policy, trials: int, seed: int):
    sums = np.zeros(trials)
    outs = np.zeros(trials)
    for t in range(trials):
        tr = _run(protocol, m, policy, _trial_rng(seed, t))
        sums[t] = tr.unbiasedness_sum
        outs[t] = tr.honest_output
    return sums, outs


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("FAIRFLIP_THREADS", "1")))
    except ValueError:
        return 1


def measure_unbiasedness(protocol: str, policy, m: int, mode: str = "mc", trials: int = 10_000,
                         seed: int = 0) -> BiasReport:
    """Measure the expected value shift an adversary causes (see module docstring)."""
    if protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol}")
    parties = 3 if protocol == "pi3" else 2
    corrupt = frozenset(getattr(policy, "corrupt", frozenset()))
    if not corrupt < frozenset(range(parties)):
        raise ValueError("corrupt set must be a strict subset of the parties")
    t0 = time.perf_counter()
    name = _name(policy)
    if not corrupt:
        return BiasReport(protocol, m, "none", (), "exact", 0.0, 0.0, 0.0, 0, seed,
                          (time.perf_counter() - t0) * 1e3, 0.0, (0.0, 0.0))
    if mode == "exact":
        if protocol != "pi2":
            raise ValueError("exact enumeration covers the two-party protocol; use mode='dp'")
        g, o = _enumerate_two_party(m, policy)
        g = float(g)
        return BiasReport(protocol, m, name, tuple(sorted(corrupt)), "exact", g, g, g, 0, seed,
                          (time.perf_counter() - t0) * 1e3, float(o) - 0.5, (float(o) - 0.5,) * 2)
    if mode == "dp":
        if not isinstance(policy, TableAdversary) and not isinstance(policy, GreedyAdversary):
            raise ValueError("dp mode needs a rule-based adversary")
        if protocol == "cleve":
            if not isinstance(policy, GreedyAdversary):
                raise ValueError("baseline dp covers the greedy adversary")
            g, shift = _dp_cleve(m, policy)
            return BiasReport(protocol, m, name, tuple(sorted(corrupt)), "dp", g, g, g, 0, seed,
                              (time.perf_counter() - t0) * 1e3, shift, (shift, shift))
        rule_adv = policy if isinstance(policy, TableAdversary) else _greedy_as_table(protocol, m, policy)
        if protocol == "pi2":
            g, shift = _dp_two_party(m, rule_adv)
        elif protocol == "pi3":
            if len(corrupt) != 2:
                raise ValueError("three-party dp covers a corrupt pair")
            g, shift = _dp_three_party(m, rule_adv)
        return BiasReport(protocol, m, name, tuple(sorted(corrupt)), "dp", g, g, g, 0, seed,
                          (time.perf_counter() - t0) * 1e3, shift, (shift, shift))
    if mode != "mc":
        raise ValueError(f"unknown mode {mode}")
    if trials < 1:
        raise ValueError("trials must be positive")
    sums, outs = _mc(protocol, m, policy, trials, seed)
    mean = float(sums.mean())
    lo, hi = wilson_interval((1.0 + mean) / 2.0, trials)
    om = float(outs.mean())
    olo, ohi = wilson_interval(om, trials)
    return BiasReport(protocol, m, name, tuple(sorted(corrupt)), "mc", mean, 2 * lo - 1, 2 * hi - 1,
                      trials, seed, (time.perf_counter() - t0) * 1e3, om - 0.5, (olo - 0.5, ohi - 0.5))


def _greedy_as_table(protocol: str, m: int, adv: GreedyAdversary) -> TableAdversary:
    """Greedy decisions on synthetic views, for the forward recursion."""
    if protocol != "pi2":
        raise ValueError("greedy dp evaluation covers the two-party protocol")
    eps = sbias(ms(m, 1), 0.5)
    (z,) = tuple(adv.corrupt)

    def rule(i, step, y, hint):
        coins = [y] + [0] * (i - 2 if step == "a" else i - 1) if i >= (2 if step == "a" else 1) else []
        defs = [0] * (i - 1) + [hint] if step == "a" else [0] * i
        two = TwoPartyKnowledge(m, eps, 0.5, False, z, coins, defs, 0)
        view = AdversaryView("pi2", m, adv.corrupt, context="pi2", label=RoundLabel.make("out", i, step), two=two)
        return bool(tuple(adv.decide(view.label, view)))

    return TableAdversary(rule, adv.corrupt, adv.name, first_only=True)


def _dp_cleve(m: int, adv: GreedyAdversary) -> tuple[float, float]:
    direction = adv.direction
    dist = {0: 1.0}
    gain = out = 0.0
    for i in range(1, m + 1):
        nxt: dict[int, float] = {}
        for s, w in dist.items():
            after = ber_tail(m - i + 1, 0.0, -s)
            for c in (-1, 1):
                before = ber_tail(m - i, 0.0, -(s + c))
                if direction * (after - before) > adv.tol:
                    gain += 0.5 * w * (after - before)
                    out += 0.5 * w * after
                else:
                    nxt[s + c] = nxt.get(s + c, 0.0) + 0.5 * w
        dist = nxt
    out += sum(w for s, w in dist.items() if s >= 0)
    return gain, out - 0.5


def cleve_attack_mc(m: int, trials: int, seed: int, direction: int = 1) -> BiasReport:
    """Vectorised greedy attack on the majority baseline, measured by output frequency."""
    t0 = time.perf_counter()
    rng = np.random.default_rng([seed, m])
    sign = 1 if direction == 1 else -1
    coins = 2 * rng.integers(0, 2, size=(trials, m), dtype=np.int8) - 1
    sums = np.cumsum(coins, axis=1, dtype=np.int64)
    prev = np.concatenate([np.zeros((trials, 1), np.int64), sums[:, :-1]], axis=1)
    stop_round = np.full(trials, m + 1)
    for i in range(m, 0, -1):
        after = np.array([ber_tail(m - i + 1, 0.0, -int(s)) for s in range(-m, m + 1)])
        before = np.array([ber_tail(m - i, 0.0, -int(s)) for s in range(-m, m + 1)])
        gain = sign * (after[prev[:, i - 1] + m] - before[sums[:, i - 1] + m])
        stop_round = np.where(gain > 1e-12, i, stop_round)
    aborted = stop_round <= m
    idx = np.minimum(stop_round, m) - 1
    seen = prev[np.arange(trials), idx]
    fresh = 2 * rng.binomial(m - idx, 0.5) - (m - idx)
    out = np.where(aborted, seen + fresh >= 0, sums[:, -1] >= 0)
    om = float(out.mean())
    lo, hi = wilson_interval(om, trials)
    name = f"greedy:{1 if sign > 0 else 0}"
    return BiasReport("cleve", m, name, (0,), "mc", om - 0.5, lo - 0.5, hi - 0.5, trials, seed,
                      (time.perf_counter() - t0) * 1e3, om - 0.5, (lo - 0.5, hi - 0.5))


# ----------------------------------------------------------------------------
# emulators


@dataclass
class SimpleGameEmulator:
    """Runs a two-party protocol adversary inside the simple game.

    The player holds uniformly random shares for the corrupted party. Each
    game coin ``X_j`` becomes the counterpart's coin-share message
    ``encode(X_j) xor own share``; each hint ``h`` becomes the counterpart's
    defense-share message ``h xor own share``. The player stops exactly when
    the adversary aborts at ``(i, a)``; aborts elsewhere are rejected.
    """

    adversary: object
    m: int
    eps: float
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))

    def __post_init__(self) -> None:
        (self.z,) = tuple(self.adversary.corrupt)
        enc = CoinEncoding(self.m)
        self.enc = enc
        self.own_coins = self.rng.integers(0, 1 << enc.width, size=self.m)
        self.own_defs = self.rng.integers(0, 2, size=self.m + 1)
        self.own_terminal = int(self.rng.random() < ber_tail(ms(self.m, 1), self.eps, 0))

    def _view(self, label, coins_msgs, def_msgs):
        coins = [int(self.enc.decode(int(a) ^ int(b))) for a, b in zip(self.own_coins, coins_msgs)]
        defs = [int(a) ^ int(b) for a, b in zip(self.own_defs, def_msgs)]
        two = TwoPartyKnowledge(self.m, self.eps, 0.5, False, self.z, coins, defs, self.own_terminal)
        return AdversaryView("pi2", self.m, frozenset(self.adversary.corrupt), context="pi2", label=label, two=two)

    def decide(self, i: int, xs_before: Sequence[int], hints: Sequence[int]) -> bool:
        """Stop decision at round ``i`` given past game coins and hints ``h_1..h_i``."""
        coin_msgs = [self.enc.encode(x) ^ int(s) for x, s in zip(xs_before, self.own_coins)]
        def_msgs = [int(h) ^ int(s) for h, s in zip(hints, self.own_defs)]
        for j in range(1, i):
            lab = RoundLabel.make("out", j, "b")
            if tuple(self.adversary.decide(lab, self._view(lab, coin_msgs[:j], def_msgs[:j]))):
                raise ValueError("adversary aborts at a coin step, which the simple game does not cover")
        lab = RoundLabel.make("out", i, "a")
        return bool(tuple(self.adversary.decide(lab, self._view(lab, coin_msgs[: i - 1], def_msgs[:i]))))

    def to_stop_policy(self, spec: GameSpec) -> StopPolicy:
        """Tabulate decisions on every reachable ``(i, y, h)`` along a canonical coin path."""

        letters = list(games.alphabet(spec.m, spec.hint))

        def fn(i, y, h):
            xs, px = ber_pmf_vector(ml(self.m, i), spec.eps)
            p_h = sum(w * games.hint_likelihood(spec, i, y + int(x))[letters.index(h)] for x, w in zip(xs, px))
            if p_h <= 0.0:
                return False    # the hint never occurs here
            xs = _coin_path(self.m, i, y - spec.offset)
            return self.decide(i, xs, [0] * (i - 1) + [h])

        return StopPolicy.from_callable(spec, fn)

    def play(self, spec: GameSpec, rng: np.random.Generator) -> float:
        """One game episode with the true coin and hint history; returns the realised gain."""
        xs: list[int] = []
        hints: list[int] = []
        y = spec.offset
        for i in range(1, self.m + 1):
            x = 2 * int(rng.binomial(ml(self.m, i), (1 + spec.eps) / 2)) - ml(self.m, i)
            h = int(games.hint_sample(spec, i, y + x, rng))
            hints.append(h)
            if self.decide(i, xs, hints):
                return games.value_with_hint(spec, games.GameState(i, y), h) - games.value_plain(spec, games.GameState(i, y))
            xs.append(x)
            y += x
        return 0.0


def _coin_path(m: int, i: int, target: int) -> list[int]:
    """Some coin sequence ``x_1..x_{i-1}`` with ``x_j`` in the support of round ``j`` summing to ``target``."""
    xs = [ml(m, j) for j in range(1, i)]
    diff = sum(xs) - target
    if diff < 0 or diff % 2:
        raise ValueError("unreachable sum")
    for j in range(len(xs)):
        step = min(diff, 2 * ml(m, j + 1))
        xs[j] -= step
        diff -= step
    if diff:
        raise ValueError("unreachable sum")
    return xs


@dataclass
class VectorGameEmulator:
    """Runs a corrupt-pair three-party adversary inside the vector game.

    A hint of ``9 ms(1)`` entries is cut into blocks: two hidden vectors for
    the corrupt pair's hiding deal, one block whose runs of ``ml(j)`` entries
    become that deal's coins, and two blocks from which random ``ms(1)``-subsets
    give the terminal defenses the pair holds towards the honest party. The
    player stops exactly when the adversary aborts at ``(i, a)``.
    """

    adversary: object
    m: int
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))

    def row_knowledge(self, i: int, hint: np.ndarray) -> RowKnowledge:
        m, n = self.m, ms(self.m, 1)
        hint = np.asarray(hint)
        if hint.size != 9 * n:
            raise ValueError("vector hint must have 9 ms(1) entries")
        vectors = np.stack([hint[0:2 * n], hint[2 * n:4 * n]])[None]
        block = hint[4 * n:5 * n]
        cuts = np.cumsum([0] + [ml(m, j) for j in range(1, m + 1)])
        coins = np.array([[int(block[cuts[j]:cuts[j + 1]].sum()) for j in range(m)]])
        deal = hid_two_share_gen_batch(m, 0.5, self.rng, 1, vectors=vectors, coins=coins)
        terminals = []
        for z in (0, 1):
            ext = hint[(5 + 2 * z) * n:(7 + 2 * z) * n]
            pick = self.rng.choice(2 * n, size=n, replace=False)
            terminals.append(int(ext[pick].sum() >= 0))
        return RowKnowledge(i, deal.coins[0], deal.defenses[0], terminals)

    def decide(self, i: int, xs_before: Sequence[int], hint: np.ndarray) -> bool:
        corrupt = frozenset(self.adversary.corrupt)
        view = AdversaryView("pi3", self.m, corrupt, context="pi3",
                             label=RoundLabel.make("out", i, "a"), coins=list(xs_before),
                             row=self.row_knowledge(i, hint))
        return bool(tuple(self.adversary.decide(view.label, view)))

    def play(self, spec: GameSpec, rng: np.random.Generator) -> float:
        """One vector-game episode; returns the realised gain."""
        xs: list[int] = []
        y = spec.offset
        for i in range(1, self.m + 1):
            x = 2 * int(rng.binomial(ml(self.m, i), (1 + spec.eps) / 2)) - ml(self.m, i)
            h = games.hint_sample(spec, i, y + x, rng)
            if self.decide(i, xs, h):
                st = games.GameState(i, y)
                return games.value_with_hint(spec, st, int(h.sum())) - games.value_plain(spec, st)
            xs.append(x)
            y += x
        return 0.0


def reduction_emulator(game_spec: GameSpec, adversary, rng: np.random.Generator | None = None):
    """Wrap a protocol adversary as a player of ``game_spec``.

    Simple games take a one-party two-party adversary; vector games with
    ``c = 9`` take a corrupt-pair three-party adversary.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    if isinstance(game_spec.hint, Simple):
        return SimpleGameEmulator(adversary, game_spec.m, game_spec.eps, rng)
    if isinstance(game_spec.hint, Vector) and game_spec.hint.c == 9:
        return VectorGameEmulator(adversary, game_spec.m, rng)
    raise ValueError("emulators exist for the simple game and the 9-block vector game")


# ----------------------------------------------------------------------------
# sweeps


def _sweep_point(protocol: str, adversary: str, m: int, trials: int, seed: int, mode: str = "auto") -> BiasReport:
    if mode not in ("auto", "exact", "mc"):
        raise ValueError(f"unknown mode {mode}")
    if adversary == "none":
        return measure_unbiasedness(protocol, HonestSchedule(), m, seed=seed)
    if protocol == "cleve":
        direction = 1 if adversary in ("greedy:1", "optimal") else 0
        if mode == "exact":
            return measure_unbiasedness("cleve", greedy_adversary("cleve", direction), m, "dp", seed=seed)
        return cleve_attack_mc(m, trials, seed, direction)
    if adversary == "optimal":
        adv = optimal_adversary(protocol, m)
    elif adversary.startswith("greedy:"):
        adv = greedy_adversary(protocol, int(adversary.split(":")[1]))
        if protocol == "pi3":
            adv.corrupt = frozenset({0, 1})
    else:
        raise ValueError(f"unknown adversary {adversary}")
    greedy3 = protocol == "pi3" and isinstance(adv, GreedyAdversary)
    if mode == "mc" or (mode == "auto" and greedy3):
        return measure_unbiasedness(protocol, adv, m, "mc", trials=trials, seed=seed)
    if greedy3:
        raise ValueError("no exact evaluation of the greedy three-party adversary; use mode mc")
    return measure_unbiasedness(protocol, adv, m, "dp", seed=seed)


def sweep(protocol: str, adversaries: Sequence[str], m_grid: Sequence[int], trials: int = 1_000_000,
          seed: int = 0, baseline: bool = True, mode: str = "auto") -> list[BiasReport]:
    """Bias reports over a grid of round parameters, plus the majority baseline.

    ``mode`` is ``auto`` (exact where available), ``exact`` or ``mc``.
    """
    if not m_grid:
        raise ValueError("empty m grid")
    if mode not in ("auto", "exact", "mc"):
        raise ValueError(f"unknown mode {mode}")
    jobs = [(protocol, a, m) for a in adversaries for m in m_grid]
    if baseline and protocol != "cleve":
        jobs += [("cleve", "greedy:1", m) for m in m_grid]
    if mode == "exact":
        # fail before any work is done
        for p, a, _ in jobs:
            if p == "pi3" and a.startswith("greedy:"):
                raise ValueError("no exact evaluation of the greedy three-party adversary; use mode mc")
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        return list(pool.map(lambda j: _sweep_point(j[0], j[1], j[2], trials, seed, mode), jobs))
