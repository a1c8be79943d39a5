"""Party state machines for the two- and three-party protocols and the baseline.

Execution model
---------------
Every protocol step is driven by :func:`_step`: honest messages of the step
are computed first and shown to the corrupted coalition (rushing), then the
schedule names the corrupted parties that abort. An aborting party's messages
of that step are never delivered.

The coalition's knowledge is kept in an :class:`AdversaryView`, decoded from
the shares it holds and receives. :func:`view_value` gives the expected honest
outcome given such a view if nobody aborts from now on, and
:func:`abort_value` gives the same expectation right after some corrupted
parties abort. Their difference is what a fail-stop abort gains.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Protocol

import numpy as np

from .games import GameSpec, GameState, Simple, value_with_hint
from .numerics import ber_pmf, ber_pmf_vector, ber_tail, hyp_tail, ml, ms, sbias
from .shares import (
    CoinEncoding,
    ThreeShareDeal,
    TwoShareBundle,
    reconstruct_two,
    three_share_gen,
    two_share_gen,
    two_share_gen_batch,
    xor_reconstruct,
    _sample_coins,
)

PHASE_RANK = {"oracle": 0, "out": 1, "in-oracle": 2, "in": 3}


@dataclass(frozen=True, order=True)
class RoundLabel:
    rank: int
    i: int
    step: str

    @classmethod
    def make(cls, phase: str, i: int, step: str) -> "RoundLabel":
        return cls(PHASE_RANK[phase], i, step)

    @property
    def phase(self) -> str:
        return {v: k for k, v in PHASE_RANK.items()}[self.rank]

    def __str__(self) -> str:
        return f"{self.phase}:{self.i}:{self.step}"

    @classmethod
    def parse(cls, text: str) -> "RoundLabel":
        phase, i, step = text.split(":")
        return cls.make(phase, int(i), step)


# ----------------------------------------------------------------------------
# adversary knowledge


@dataclass
class TwoPartyKnowledge:
    """What the coalition knows inside one run of the two-party loop."""

    m: int
    eps: float
    delta: float
    hiding: bool
    role: int | None          # role of the corrupted participant, None if both are honest
    coins: list[int] = field(default_factory=list)
    defenses: list[int] = field(default_factory=list)
    terminal: int | None = None


@dataclass
class RowKnowledge:
    """What the coalition learns from the round-``i`` pair rows of the three-party loop."""

    i: int
    pair_coins: np.ndarray | None = None        # inner coins, when a whole pair is corrupt
    pair_defenses: np.ndarray | None = None     # (2, m+1) defenses of that pair
    terminals: list[int] = field(default_factory=list)


@dataclass
class AdversaryView:
    protocol: str
    m: int
    corrupt: frozenset[int]
    context: str = "oracle"            # oracle | pi2 | pi3 | cleve
    label: RoundLabel | None = None
    aborted: frozenset[int] = frozenset()
    coins: list[int] = field(default_factory=list)
    row: RowKnowledge | None = None
    two: TwoPartyKnowledge | None = None

    def active_corrupt(self) -> frozenset[int]:
        return self.corrupt - self.aborted


class Schedule(Protocol):
    corrupt: frozenset[int]

    def decide(self, label: RoundLabel, view: AdversaryView) -> Iterable[int]:
        ...


@dataclass
class HonestSchedule:
    corrupt: frozenset[int] = frozenset()

    def decide(self, label: RoundLabel, view: AdversaryView) -> Iterable[int]:
        return ()


@dataclass
class AbortAt:
    """Abort the given corrupted parties at fixed round labels (``{"out:2:a": {0}}``)."""

    plan: dict[str, set[int]]
    corrupt: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        if not self.corrupt:
            self.corrupt = frozenset(p for ps in self.plan.values() for p in ps)

    def decide(self, label: RoundLabel, view: AdversaryView) -> Iterable[int]:
        return self.plan.get(str(label), ())


# ----------------------------------------------------------------------------
# view values


def _pair_defense_likelihood(m: int, eps_v: float, inner_coins, defenses, terminal) -> float:
    """Pr[observed defenses of one party | inner coins] under a hiding deal with bias ``eps_v``."""
    total = ms(m, 1)
    ps, w = ber_pmf_vector(2 * total, eps_v)
    sums = np.cumsum(inner_coins)
    acc = 0.0
    for p, wp in zip(ps, w):
        if wp == 0.0:
            continue
        lik = wp
        if terminal is not None:
            t1 = hyp_tail(2 * total, int(p), total, 0)
            lik *= t1 if terminal else 1.0 - t1
        for j, d in enumerate(defenses, start=1):
            q = hyp_tail(2 * total, int(p), ms(m, j + 1), -int(sums[j - 1]))
            lik *= q if d else 1.0 - q
        acc += lik
    return acc


def _hiding_posterior(two: TwoPartyKnowledge, i: int) -> float:
    """Value after the round-``i`` defense of a hiding deal has been revealed."""
    m, total = two.m, ms(two.m, 1)
    y = sum(two.coins[: i - 1])
    ps, w = ber_pmf_vector(2 * total, two.eps)
    prior = w.copy()
    for k, p in enumerate(ps):
        if prior[k] == 0.0:
            continue
        if two.terminal is not None:
            t1 = hyp_tail(2 * total, int(p), total, 0)
            prior[k] *= t1 if two.terminal else 1.0 - t1
        run = 0
        for j in range(1, i):
            run += two.coins[j - 1]
            q = hyp_tail(2 * total, int(p), ms(m, j + 1), -run)
            prior[k] *= q if two.defenses[j - 1] else 1.0 - q
    d = two.defenses[i - 1]
    xs, px = ber_pmf_vector(ml(m, i), two.eps)
    num = den = 0.0
    for x, pxv in zip(xs, px):
        t = y + int(x)
        like = 0.0
        for k, p in enumerate(ps):
            if prior[k] == 0.0:
                continue
            q = hyp_tail(2 * total, int(p), ms(m, i + 1), -t)
            like += prior[k] * (q if d else 1.0 - q)
        den += pxv * like
        num += pxv * like * ber_tail(ms(m, i + 1), two.eps, -t)
    if den <= 0.0:
        raise ValueError("view has zero probability")
    return num / den


def _two_value(two: TwoPartyKnowledge, label: RoundLabel) -> float:
    i, m = label.i, two.m
    if label.step == "b":
        return ber_tail(ms(m, i + 1), two.eps, -sum(two.coins[:i]))
    y = sum(two.coins[: i - 1])
    if two.role is None or len(two.defenses) < i:
        return ber_tail(ms(m, i), two.eps, -y)
    if two.hiding:
        return _hiding_posterior(two, i)
    spec = GameSpec(m, two.eps, 0, Simple())
    return value_with_hint(spec, GameState(i, y), two.defenses[i - 1])


def _two_abort_value(two: TwoPartyKnowledge, label: RoundLabel) -> float:
    i, m = label.i, two.m
    if label.step == "b":
        return ber_tail(ms(m, i + 1), two.eps, -sum(two.coins[:i]))
    if i >= 2:
        return ber_tail(ms(m, i), two.eps, -sum(two.coins[: i - 1]))
    return ber_tail(ms(m, 1), two.eps, 0) if two.hiding else two.delta


def _outer_delta(m: int, i: int, s: int) -> float:
    """Value of the three-party loop after round ``i`` with coin sum ``s``."""
    return ber_tail(ms(m, i + 1), 0.0, -s)


def _fallback_value(m: int, i: int, s: int) -> float:
    """Honest outcome of a two-party fallback run on the round-``i`` pair row."""
    if i < 1:
        return 0.5
    return ber_tail(ms(m, 1), sbias(ms(m, 1), _outer_delta(m, i, s)), 0)


def row_likelihood(m: int, i: int, after_sum: int, row: RowKnowledge) -> float:
    """Pr[coalition's round-``i`` row knowledge | coin sum after round ``i``]."""
    total = ms(m, 1)
    eps_v = sbias(total, _outer_delta(m, i, after_sum))
    lik = 1.0
    if row.terminals:
        t1 = ber_tail(total, eps_v, 0)
        for b in row.terminals:
            lik *= t1 if b else 1.0 - t1
    if row.pair_coins is not None:
        for j, c in enumerate(row.pair_coins, start=1):
            lik *= ber_pmf(ml(m, j), eps_v, int(c))
        for r in (0, 1):
            d = row.pair_defenses[r]
            lik *= _pair_defense_likelihood(m, eps_v, row.pair_coins, d[:m], int(d[m]))
    return lik


def _outer_value(view: AdversaryView) -> float:
    m, lab = view.m, view.label
    i = lab.i
    if lab.step == "b":
        return _outer_delta(m, i, sum(view.coins[:i]))
    y = sum(view.coins[: i - 1])
    xs, px = ber_pmf_vector(ml(m, i), 0.0)
    num = den = 0.0
    for x, pxv in zip(xs, px):
        t = y + int(x)
        like = pxv * (row_likelihood(m, i, t, view.row) if view.row is not None else 1.0)
        den += like
        num += like * _outer_delta(m, i, t)
    if den <= 0.0:
        raise ValueError("view has zero probability")
    return num / den


def view_value(view: AdversaryView) -> float:
    """Expected honest output given the coalition's view, assuming no further aborts."""
    if view.context == "oracle" or view.label is None:
        return 0.5
    if view.context == "pi2":
        return _two_value(view.two, view.label)
    if view.context == "pi3":
        return _outer_value(view)
    if view.context == "cleve":
        i = view.label.i
        return ber_tail(view.m - i, 0.0, -sum(view.coins[:i]))
    raise ValueError(f"unknown context {view.context}")


def abort_value(view: AdversaryView, aborting: Iterable[int]) -> float:
    """Expected honest output right after ``aborting`` stop at the current step."""
    aborting = frozenset(aborting)
    if not aborting:
        return view_value(view)
    if view.context == "oracle" or view.label is None:
        return 0.5
    if view.context == "pi2":
        return _two_abort_value(view.two, view.label)
    if view.context == "pi3":
        i = view.label.i
        row = i if view.label.step == "b" else i - 1
        return _fallback_value(view.m, row, sum(view.coins[:row]))
    if view.context == "cleve":
        i = view.label.i
        return ber_tail(view.m - i + 1, 0.0, -sum(view.coins[: i - 1]))
    raise ValueError(f"unknown context {view.context}")


# ----------------------------------------------------------------------------
# transcripts


@dataclass
class AbortEvent:
    label: RoundLabel
    parties: tuple[int, ...]
    val_before: float
    val_after: float

    @property
    def gain(self) -> float:
        return self.val_after - self.val_before


@dataclass
class Transcript:
    params: dict
    seed: int | None = None
    rounds: list[dict] = field(default_factory=list)
    aborts: list[AbortEvent] = field(default_factory=list)
    outputs: dict[int, int] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    corrupt: frozenset[int] = frozenset()

    @property
    def honest_output(self) -> int:
        honest = [b for z, b in self.outputs.items() if z not in self.corrupt]
        vals = honest or list(self.outputs.values())
        return vals[0]

    @property
    def agreement(self) -> bool:
        honest = {b for z, b in self.outputs.items() if z not in self.corrupt}
        return len(honest) <= 1

    @property
    def unbiasedness_sum(self) -> float:
        return sum(e.gain for e in self.aborts)

    def to_dict(self) -> dict:
        return {
            "params": self.params,
            "seed": self.seed,
            "rounds": self.rounds,
            "aborts": [{"label": str(e.label), "parties": list(e.parties),
                        "val_before": e.val_before, "val_after": e.val_after} for e in self.aborts],
            "outputs": {str(z): int(b) for z, b in sorted(self.outputs.items())},
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


class InvariantError(RuntimeError):
    """Raised when an execution breaks agreement or reconstruction."""


def _hex(bits: np.ndarray) -> str:
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes().hex()


@dataclass
class _Run:
    schedule: Schedule
    view: AdversaryView
    transcript: Transcript
    rng: np.random.Generator
    account: bool = True

    def step(self, label: RoundLabel, messages: list[tuple[int, int, object]], eligible: frozenset[int]) -> frozenset[int]:
        """Run the abort decision of one step; returns the aborting parties."""
        self.view.label = label
        wanted = frozenset(self.schedule.decide(label, self.view)) if eligible else frozenset()
        aborting = wanted & eligible
        if wanted - eligible:
            raise ValueError(f"schedule asked non-eligible parties {sorted(wanted - eligible)} to abort")
        if aborting and self.account:
            before = float(view_value(self.view))
            after = float(abort_value(self.view, aborting))
            self.transcript.aborts.append(AbortEvent(label, tuple(sorted(aborting)), before, after))
        elif aborting:
            self.transcript.aborts.append(AbortEvent(label, tuple(sorted(aborting)), math.nan, math.nan))
        self.transcript.rounds.append({
            "label": str(label),
            "messages": [[s, r, v] for s, r, v in messages if s not in aborting],
            "aborts": sorted(aborting),
        })
        self.view.aborted = self.view.aborted | aborting
        return aborting


# ----------------------------------------------------------------------------
# two-party loop


def _two_loop(run: _Run, bundles: tuple[TwoShareBundle, TwoShareBundle], ids: tuple[int, int],
              phase: str, hiding: bool, eps: float) -> dict[int, int]:
    """Run the two-party loop between parties ``ids`` (roles 0 and 1)."""
    m = bundles[0].m
    for b in bundles:
        b.validate()
    enc = CoinEncoding(m)
    corrupt_roles = [r for r in (0, 1) if ids[r] in run.view.active_corrupt()]
    know = TwoPartyKnowledge(m, eps, bundles[0].delta, hiding, corrupt_roles[0] if corrupt_roles else None)
    if know.role is not None:
        know.terminal = int(bundles[know.role].defense(know.role)[m])
    run.view.context, run.view.two = "pi2", know
    eligible = frozenset(ids[r] for r in corrupt_roles)
    own_def: list[dict[int, int]] = [{}, {}]
    coins: list[int] = []

    def fallback(r: int) -> int:
        if own_def[r]:
            return own_def[r][max(own_def[r])]
        return int(bundles[r].defense(r)[m])

    for i in range(1, m + 1):
        # (i, a): each role sends the other role's defense share
        msgs = {0: int(bundles[0].d1[i - 1]), 1: int(bundles[1].d0[i - 1])}
        if know.role is not None:
            r = know.role
            know.defenses.append(int(bundles[r].defense(r)[i - 1]) ^ msgs[1 - r])
        ab = run.step(RoundLabel.make(phase, i, "a"), [(ids[0], ids[1], msgs[0]), (ids[1], ids[0], msgs[1])], eligible)
        for r in (0, 1):
            if ids[1 - r] not in ab:
                own_def[r][i] = int(bundles[r].defense(r)[i - 1]) ^ msgs[1 - r]
        if ab:
            return {ids[r]: fallback(r) for r in (0, 1) if ids[r] not in ab}
        # (i, b): exchange coin shares
        cmsg = {0: int(bundles[0].coins[i - 1]), 1: int(bundles[1].coins[i - 1])}
        c = int(enc.decode(cmsg[0] ^ cmsg[1]))
        if know.role is not None:
            know.coins.append(c)
        ab = run.step(RoundLabel.make(phase, i, "b"), [(ids[0], ids[1], cmsg[0]), (ids[1], ids[0], cmsg[1])], eligible)
        if ab:
            return {ids[r]: fallback(r) for r in (0, 1) if ids[r] not in ab}
        coins.append(c)
    out = int(sum(coins) >= 0)
    return {ids[0]: out, ids[1]: out}


def _new_transcript(kind: str, m: int, schedule: Schedule, seed, extra: dict | None = None) -> Transcript:
    params = {"protocol": kind, "m": m, "corrupt": sorted(schedule.corrupt)}
    params.update(extra or {})
    return Transcript(params, seed, corrupt=frozenset(schedule.corrupt))


def _check(tr: Transcript) -> Transcript:
    if not tr.agreement:
        raise InvariantError(f"honest parties disagree: {tr.outputs}")
    return tr


def run_two_party(m: int, bundles: tuple[TwoShareBundle, TwoShareBundle], schedule: Schedule | None = None,
                  *, rng: np.random.Generator | None = None, account: bool = True, seed=None) -> Transcript:
    """Run the two-party loop on given bundles."""
    schedule = schedule or HonestSchedule()
    _check_corrupt(schedule, 2)
    rng = rng or np.random.default_rng(seed)
    tr = _new_transcript("pi2", m, schedule, seed, {"delta": bundles[0].delta})
    view = AdversaryView("pi2", m, frozenset(schedule.corrupt))
    run = _Run(schedule, view, tr, rng, account)
    eps = sbias(ms(m, 1), bundles[0].delta)
    tr.outputs = _two_loop(run, bundles, (0, 1), "out", False, eps)
    return _check(tr)


def _check_corrupt(schedule: Schedule, n: int) -> None:
    c = frozenset(schedule.corrupt)
    if not c < frozenset(range(n)):
        raise ValueError(f"corrupt set must be a strict subset of the {n} parties")


def _wrapped_two(run: _Run, m: int, ids: tuple[int, int], phase_oracle: str, phase: str) -> dict[int, int]:
    run.view.context, run.view.two = "oracle", None
    eligible = frozenset(ids) & run.view.active_corrupt()
    ab = run.step(RoundLabel.make(phase_oracle, 0, "call"), [], eligible)
    if ab:
        coin = int(run.rng.integers(0, 2))
        return {z: coin for z in ids if z not in ab}
    bundles = two_share_gen(m, 0.5, run.rng)
    return _two_loop(run, bundles, ids, phase, False, sbias(ms(m, 1), 0.5))


def run_two_party_wrapped(m: int, schedule: Schedule | None = None, *, rng: np.random.Generator | None = None,
                          seed=None, account: bool = True) -> Transcript:
    """Dealer call followed by the two-party loop; an abort at the call yields a uniform coin."""
    schedule = schedule or HonestSchedule()
    _check_corrupt(schedule, 2)
    rng = rng if rng is not None else np.random.default_rng(seed)
    tr = _new_transcript("pi2-wrapped", m, schedule, seed)
    run = _Run(schedule, AdversaryView("pi2", m, frozenset(schedule.corrupt)), tr, rng, account)
    tr.outputs = _wrapped_two(run, m, (0, 1), "oracle", "out")
    return _check(tr)


# ----------------------------------------------------------------------------
# three-party loop


def _row_bundle(bits: np.ndarray, m: int, role: int, delta: float) -> TwoShareBundle:
    return TwoShareBundle.from_bits(bits, m, role, delta)


def _three_loop(run: _Run, deal: ThreeShareDeal) -> dict[int, int]:
    m = deal.m
    enc = CoinEncoding(m)
    view = run.view
    view.context = "pi3"
    # recon[z][(z2, i)] = reconstructed bits of row i for ordered pair (z, z2)
    recon: list[dict[tuple[int, int], np.ndarray]] = [{}, {}, {}]
    coins: list[int] = []
    parties = (0, 1, 2)
    for i in range(1, m + 1):
        corrupt = view.active_corrupt()
        msgs = []
        for s in parties:
            for r in parties:
                if r == s:
                    continue
                for o in parties:
                    if o != r:
                        msgs.append((s, r, o))
        # rushing: the coalition reconstructs its own rows from everyone's shares
        row = RowKnowledge(i)
        secrets = {}
        for z in sorted(corrupt):
            for z2 in parties:
                if z2 != z:
                    bits = xor_reconstruct([deal.share(h, z, z2, i) for h in parties])
                    role = 0 if z < z2 else 1
                    secrets[(z, z2)] = _row_bundle(bits, m, role, deal.deltas[i - 1])
        for z in sorted(corrupt):
            for z2 in parties:
                if z2 == z:
                    continue
                if z2 in corrupt:
                    if z < z2:
                        a, b = secrets[(z, z2)], secrets[(z2, z)]
                        c_in, d_in = reconstruct_two(a, b)
                        row.pair_coins, row.pair_defenses = c_in, d_in
                else:
                    s_b = secrets[(z, z2)]
                    row.terminals.append(int(s_b.defense(s_b.party)[m]))
        view.row = row
        label = RoundLabel.make("out", i, "a")
        shown = [(s, r, f"{o}:" + _hex(deal.share(s, r, o, i))) for s, r, o in msgs]
        ab = run.step(label, shown, corrupt)
        for z in parties:
            if z in view.aborted:
                continue
            for z2 in parties:
                if z2 == z:
                    continue
                senders = [h for h in parties if h != z]
                if all(h not in view.aborted for h in senders):
                    recon[z][(z2, i)] = xor_reconstruct([deal.share(h, z, z2, i) for h in parties])
        if ab:
            return _after_outer_abort(run, deal, recon, ab, i)
        # (i, b): broadcast coin shares
        cshares = deal.coin_shares[:, i - 1]
        c = int(enc.decode(xor_reconstruct(list(cshares))))
        view.coins.append(c)
        label = RoundLabel.make("out", i, "b")
        shown = [(s, "all", int(cshares[s])) for s in parties]
        ab = run.step(label, shown, view.active_corrupt())
        if ab:
            return _after_outer_abort(run, deal, recon, ab, i)
        coins.append(c)
    out = int(sum(coins) >= 0)
    return {z: out for z in parties}


def _after_outer_abort(run: _Run, deal: ThreeShareDeal, recon, aborted: frozenset[int], i: int) -> dict[int, int]:
    m = deal.m
    survivors = [z for z in range(3) if z not in aborted]
    if len(survivors) == 1:
        z = survivors[0]
        partner = min(aborted)
        rows = [j for (z2, j) in recon[z] if z2 == partner]
        if not rows:
            return {z: int(run.rng.integers(0, 2))}
        j = max(rows)
        role = 0 if z < partner else 1
        b = _row_bundle(recon[z][(partner, j)], m, role, deal.deltas[j - 1])
        run.transcript.notes.append(f"party {z} alone: terminal defense of row {j}")
        return {z: int(b.defense(role)[m])}
    z, z2 = survivors
    rows_z = {j for (p, j) in recon[z] if p == z2}
    rows_z2 = {j for (p, j) in recon[z2] if p == z}
    if rows_z != rows_z2:
        run.transcript.notes.append(f"asymmetric rows: {sorted(rows_z)} vs {sorted(rows_z2)}")
    both = rows_z & rows_z2
    if not both:
        return _wrapped_two(run, m, (z, z2), "in-oracle", "in")
    j = max(both)
    b0 = _row_bundle(recon[z][(z2, j)], m, 0, deal.deltas[j - 1])
    b1 = _row_bundle(recon[z2][(z, j)], m, 1, deal.deltas[j - 1])
    eps = sbias(ms(m, 1), float(deal.deltas[j - 1]))
    return _two_loop(run, (b0, b1), (z, z2), "in", True, eps)


def run_three_party(m: int, deal: ThreeShareDeal, schedule: Schedule | None = None, *,
                    rng: np.random.Generator | None = None, seed=None, account: bool = True) -> Transcript:
    """Run the three-party loop on a given dealer output."""
    schedule = schedule or HonestSchedule()
    _check_corrupt(schedule, 3)
    rng = rng if rng is not None else np.random.default_rng(seed)
    tr = _new_transcript("pi3", m, schedule, seed)
    run = _Run(schedule, AdversaryView("pi3", m, frozenset(schedule.corrupt)), tr, rng, account)
    tr.outputs = _three_loop(run, deal)
    return _check(tr)


def run_three_party_wrapped(m: int, schedule: Schedule | None = None, *, rng: np.random.Generator | None = None,
                            seed=None, account: bool = True) -> Transcript:
    """Dealer call followed by the three-party loop, with the oracle-abort fallbacks."""
    schedule = schedule or HonestSchedule()
    _check_corrupt(schedule, 3)
    rng = rng if rng is not None else np.random.default_rng(seed)
    tr = _new_transcript("pi3-wrapped", m, schedule, seed)
    run = _Run(schedule, AdversaryView("pi3", m, frozenset(schedule.corrupt)), tr, rng, account)
    ab = run.step(RoundLabel.make("oracle", 0, "call"), [], run.view.active_corrupt())
    if len(ab) == 2:
        (z,) = [p for p in range(3) if p not in ab]
        tr.outputs = {z: int(rng.integers(0, 2))}
    elif len(ab) == 1:
        ids = tuple(p for p in range(3) if p not in ab)
        tr.outputs = _wrapped_two(run, m, ids, "in-oracle", "in")
    else:
        deal = three_share_gen(m, rng)
        tr.outputs = _three_loop(run, deal)
    return _check(tr)


# ----------------------------------------------------------------------------
# baseline


def run_cleve_majority(m: int, schedule: Schedule | None = None, *, rng: np.random.Generator | None = None,
                       seed=None, account: bool = True) -> Transcript:
    """Unweighted majority of ``m`` fair coins revealed one per round.

    If the counterpart aborts in round ``i`` (after seeing coin ``i`` first),
    the remaining party completes the majority of the coins it has seen with
    its own fresh coins; with no coins seen this is a uniform bit.
    """
    schedule = schedule or HonestSchedule()
    _check_corrupt(schedule, 2)
    rng = rng if rng is not None else np.random.default_rng(seed)
    tr = _new_transcript("cleve", m, schedule, seed)
    view = AdversaryView("cleve", m, frozenset(schedule.corrupt), context="cleve")
    run = _Run(schedule, view, tr, rng, account)
    coins = 2 * rng.integers(0, 2, size=m) - 1
    shares = rng.integers(0, 2, size=m)
    seen: list[int] = []
    for i in range(1, m + 1):
        bit = int(coins[i - 1] > 0)
        view.coins.append(int(coins[i - 1]))
        msgs = [(0, 1, int(shares[i - 1])), (1, 0, int(shares[i - 1]) ^ bit)]
        ab = run.step(RoundLabel.make("out", i, "b"), msgs, view.active_corrupt())
        if ab:
            fresh = 2 * rng.integers(0, 2, size=m - len(seen)) - 1
            out = int(sum(seen) + int(fresh.sum()) >= 0)
            tr.outputs = {z: out for z in (0, 1) if z not in ab}
            return _check(tr)
        seen.append(int(coins[i - 1]))
    out = int(sum(seen) >= 0)
    tr.outputs = {0: out, 1: out}
    return _check(tr)


# ----------------------------------------------------------------------------
# vectorised honest executions


def honest_outputs_batch(protocol: str, m: int, trials: int, rng: np.random.Generator,
                         chunk: int = 200_000) -> np.ndarray:
    """Honest outputs of ``trials`` independent wrapped executions.

    Each party reconstructs the coins from the shares it receives and decides
    on its own; disagreement on any trial raises :class:`InvariantError`. Pair
    rows of the three-party dealer are never touched by honest parties and
    are therefore not materialised.
    """
    enc = CoinEncoding(m)
    out = np.empty(trials, dtype=np.uint8)
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        if protocol == "pi2":
            batch = two_share_gen_batch(m, 0.5, rng, n)
            sh = batch.coin_shares
            per_party = [enc.decode(sh[z] ^ sh[1 - z]).sum(1) >= 0 for z in (0, 1)]
        elif protocol == "pi3":
            coins = _sample_coins(m, 0.0, rng, n)
            enc_coins = enc.encode(coins)
            r1 = rng.integers(0, 1 << enc.width, size=(2, n, m))
            sh = np.concatenate([r1, (enc_coins ^ r1[0] ^ r1[1])[None]])
            per_party = [enc.decode(sh[z] ^ sh[(z + 1) % 3] ^ sh[(z + 2) % 3]).sum(1) >= 0 for z in range(3)]
        else:
            raise ValueError(f"unknown protocol {protocol}")
        first = per_party[0]
        if any(np.any(p != first) for p in per_party[1:]):
            raise InvariantError("honest parties disagree in a batched run")
        out[done:done + n] = first
        done += n
    return out
