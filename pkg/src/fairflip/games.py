"""Online binomial games and an exact optimal-stopping solver.

A game with round parameter ``m`` flips ``ml(i)`` biased ±1 coins in round
``i``; the running sum starts at an offset ``x0``. Before deciding whether to
stop at round ``i`` the player sees the previous sum ``y`` and a hint about the
new sum. Stopping at round ``i`` gains ``o_i(y, h) - o_i(y)``, the shift in the
probability that the final sum is nonnegative caused by the hint.

Hints are reduced to a finite statistic with an explicit likelihood vector
per post-round sum, so every hint family shares one backward-induction solver.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .numerics import (
    ber_pmf_vector,
    ber_tail,
    check_round_param,
    hyp_tail,
    ml,
    ms,
    sbias,
    wilson_interval,
)

STATE_BUDGET = 20_000_000


# ----------------------------------------------------------------------------
# hint families


@dataclass(frozen=True)
class Simple:
    """A bit equal to 1 with probability ``o_{i+1}(Y_i)``."""


@dataclass(frozen=True)
class Hypergeometric:
    """A bit equal to 1 with probability ``hyp_tail(2 ms(1), p, ms(i+1), -Y_i)``."""

    p: int
    c: float | None = None


@dataclass(frozen=True)
class Vector:
    """``c * ms(1)`` i.i.d. ±1 entries whose bias encodes ``o_{i+1}(Y_i)``."""

    c: int


@dataclass(frozen=True)
class Constant:
    """A hint carrying no information."""


@dataclass(frozen=True)
class PostProcessed:
    """A hint passed through a channel; ``channel[a][b] = Pr[output b | statistic a]``."""

    base: "HintKind"
    channel: tuple[tuple[float, ...], ...]


HintKind = Union[Simple, Hypergeometric, Vector, Constant, PostProcessed]


@dataclass(frozen=True)
class GameState:
    i: int
    y: int


@dataclass(frozen=True)
class GameSpec:
    m: int
    eps: float = 0.0
    offset: int = 0
    hint: HintKind = field(default_factory=Simple)
    strict: bool = False

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError("m must be positive")
        if not -1.0 <= self.eps <= 1.0:
            raise ValueError("eps must lie in [-1, 1]")
        if self.strict:
            check_round_param(self.m, strict=True)
            if abs(self.offset) > ms(self.m, 1):
                raise ValueError("offset exceeds ms(1) in strict mode")
        hint = self.hint
        if isinstance(hint, Hypergeometric):
            n = 2 * ms(self.m, 1)
            if abs(hint.p) > n or (hint.p - n) % 2:
                raise ValueError(f"hypergeometric weight p={hint.p} invalid for length {n}")
            if hint.c is not None and self.m > 1:
                bound = hint.c * math.sqrt(math.log2(self.m) * ms(self.m, 1))
                if abs(hint.p) > bound:
                    msg = f"|p|={abs(hint.p)} exceeds c*sqrt(log m * ms(1)) = {bound:.3f}"
                    if self.strict:
                        raise ValueError(msg)
                    warnings.warn(msg, stacklevel=2)
        if isinstance(hint, Vector) and hint.c < 1:
            raise ValueError("vector hint needs c >= 1")
        if isinstance(hint, PostProcessed):
            rows = np.asarray(hint.channel, dtype=float)
            if rows.ndim != 2 or rows.shape[0] != alphabet(self.m, hint.base).size:
                raise ValueError("channel rows must match the base hint alphabet")
            if np.any(rows < 0) or not np.allclose(rows.sum(1), 1.0, atol=1e-12):
                raise ValueError("channel rows must be probability vectors")

    @property
    def total(self) -> int:
        return ms(self.m, 1)

    def reachable_sums(self, i: int) -> np.ndarray:
        """Possible values of ``Y_{i-1}`` (the sum seen at the start of round ``i``)."""
        spread = self.total - ms(self.m, i)
        return np.arange(self.offset - spread, self.offset + spread + 1, 2)

    def is_reachable(self, state: GameState) -> bool:
        if not 1 <= state.i <= self.m + 1:
            return False
        spread = self.total - ms(self.m, state.i)
        d = state.y - self.offset
        return abs(d) <= spread and (d - spread) % 2 == 0


def alphabet(m: int, hint: HintKind) -> np.ndarray:
    """Values of the hint statistic (bits, or vector weights)."""
    if isinstance(hint, (Simple, Hypergeometric)):
        return np.array([0, 1])
    if isinstance(hint, Vector):
        q = hint.c * ms(m, 1)
        return np.arange(-q, q + 1, 2)
    if isinstance(hint, Constant):
        return np.array([0])
    if isinstance(hint, PostProcessed):
        return np.arange(len(hint.channel[0]))
    raise TypeError(f"unknown hint kind {hint!r}")


def value_plain(spec: GameSpec, state: GameState) -> float:
    """``o_i(y)``: probability the final sum is nonnegative given ``Y_{i-1} = y``."""
    if not spec.is_reachable(state):
        raise ValueError(f"unreachable state {state}")
    return ber_tail(ms(spec.m, state.i), spec.eps, -state.y)


def _next_value(spec: GameSpec, i: int, y_after: int) -> float:
    return ber_tail(ms(spec.m, i + 1), spec.eps, -y_after)


def hint_likelihood(spec: GameSpec, i: int, y_after: int, hint: HintKind | None = None) -> np.ndarray:
    """Distribution of the hint statistic in round ``i`` given ``Y_i = y_after``."""
    hint = spec.hint if hint is None else hint
    if isinstance(hint, Simple):
        d = _next_value(spec, i, y_after)
        return np.array([1.0 - d, d])
    if isinstance(hint, Hypergeometric):
        d = hyp_tail(2 * spec.total, hint.p, ms(spec.m, i + 1), -y_after)
        return np.array([1.0 - d, d])
    if isinstance(hint, Vector):
        eps_v = sbias(spec.total, _next_value(spec, i, y_after))
        return ber_pmf_vector(hint.c * spec.total, eps_v)[1]
    if isinstance(hint, Constant):
        return np.ones(1)
    if isinstance(hint, PostProcessed):
        return hint_likelihood(spec, i, y_after, hint.base) @ np.asarray(hint.channel, dtype=float)
    raise TypeError(f"unknown hint kind {hint!r}")


def hint_statistic(spec: GameSpec, hint) -> int:
    """Map a raw hint (bit, ±1 string or channel output) to its statistic value."""
    if isinstance(spec.hint, Vector):
        v = np.asarray(hint)
        if v.ndim == 0:
            return int(v)
        if v.size != spec.hint.c * spec.total or not np.all(np.abs(v) == 1):
            raise ValueError("vector hint has wrong length or entries")
        return int(v.sum())
    return int(hint)


def hint_sample(spec: GameSpec, i: int, y_after: int, rng: np.random.Generator):
    """Draw the round-``i`` hint given ``Y_i = y_after``.

    Vector hints are returned as full ±1 strings; other kinds as ints.
    """
    hint = spec.hint
    if isinstance(hint, Vector):
        eps_v = sbias(spec.total, _next_value(spec, i, y_after))
        q = hint.c * spec.total
        return np.where(rng.random(q) < (1.0 + eps_v) / 2.0, 1, -1)
    lik = hint_likelihood(spec, i, y_after)
    return int(alphabet(spec.m, hint)[rng.choice(lik.size, p=lik / lik.sum())])


def _posterior(spec: GameSpec, i: int, y: int):
    xs, px = ber_pmf_vector(ml(spec.m, i), spec.eps)
    lik = np.stack([hint_likelihood(spec, i, y + int(x)) for x in xs])
    joint = px[:, None] * lik
    o_next = np.array([_next_value(spec, i, y + int(x)) for x in xs])
    return xs, px, joint, o_next


def value_with_hint(spec: GameSpec, state: GameState, hint) -> float:
    """``o_i(y, h)``: the Bayesian posterior of a nonnegative final sum given the hint."""
    if not spec.is_reachable(state) or state.i > spec.m:
        raise ValueError(f"no hint is drawn at state {state}")
    stat = hint_statistic(spec, hint)
    letters = alphabet(spec.m, spec.hint)
    idx = np.searchsorted(letters, stat)
    if idx >= letters.size or letters[idx] != stat:
        raise ValueError(f"hint statistic {stat} outside alphabet")
    _, _, joint, o_next = _posterior(spec, state.i, state.y)
    mass = joint[:, idx].sum()
    if mass <= 0.0:
        raise ValueError(f"hint {stat} has zero probability at {state}")
    return float(joint[:, idx] @ o_next / mass)


# ----------------------------------------------------------------------------
# policies and backward induction


@dataclass
class StopPolicy:
    """Stopping rule on ``(round, sum before the round, hint statistic)``.

    ``table[i]`` is a boolean array indexed by ``(sum index, statistic index)``
    over ``spec.reachable_sums(i)`` and the hint alphabet.
    """

    spec: GameSpec
    table: dict[int, np.ndarray]

    def decide(self, i: int, y: int, stat: int) -> bool:
        ys = self.spec.reachable_sums(i)
        letters = alphabet(self.spec.m, self.spec.hint)
        yi = (y - ys[0]) // 2
        hi = int(np.searchsorted(letters, stat))
        return bool(self.table[i][yi, hi])

    def __call__(self, i: int, y: int, stat: int) -> bool:
        return self.decide(i, y, stat)

    @classmethod
    def never(cls, spec: GameSpec) -> "StopPolicy":
        k = alphabet(spec.m, spec.hint).size
        return cls(spec, {i: np.zeros((spec.reachable_sums(i).size, k), bool)
                          for i in range(1, spec.m + 1)})

    @classmethod
    def from_callable(cls, spec: GameSpec, fn: Callable[[int, int, int], bool]) -> "StopPolicy":
        letters = alphabet(spec.m, spec.hint)
        table = {}
        for i in range(1, spec.m + 1):
            ys = spec.reachable_sums(i)
            table[i] = np.array([[bool(fn(i, int(y), int(h))) for h in letters] for y in ys])
        return cls(spec, table)

    @classmethod
    def random(cls, spec: GameSpec, rng: np.random.Generator, p_stop: float = 0.3) -> "StopPolicy":
        k = alphabet(spec.m, spec.hint).size
        return cls(spec, {i: rng.random((spec.reachable_sums(i).size, k)) < p_stop
                          for i in range(1, spec.m + 1)})


def state_space_size(spec: GameSpec) -> int:
    k = alphabet(spec.m, spec.hint).size
    return sum(spec.reachable_sums(i).size * k for i in range(1, spec.m + 1))


def _work_estimate(spec: GameSpec) -> int:
    k = alphabet(spec.m, spec.hint).size
    return sum(spec.reachable_sums(i).size * (ml(spec.m, i) + 1) * k for i in range(1, spec.m + 1))


@dataclass
class _RoundTables:
    ys: np.ndarray
    prob_h: np.ndarray      # (ny, nh) hint statistic probabilities
    gain: np.ndarray        # (ny, nh) o_i(y,h) - o_i(y)
    post: np.ndarray        # (ny, nx, nh) posterior of X_i given the hint
    next_index: np.ndarray  # (ny, nx) index of y + x among the round-(i+1) sums


_TABLE_CACHE: dict[GameSpec, dict[int, _RoundTables]] = {}


def _round_tables(spec: GameSpec) -> dict[int, _RoundTables]:
    cached = _TABLE_CACHE.get(spec)
    if cached is not None:
        return cached
    out: dict[int, _RoundTables] = {}
    for i in range(1, spec.m + 1):
        ys = spec.reachable_sums(i)
        nxt = spec.reachable_sums(i + 1)
        xs, px = ber_pmf_vector(ml(spec.m, i), spec.eps)
        after = np.unique((ys[:, None] + xs[None, :]).ravel())
        lik = {int(t): hint_likelihood(spec, i, int(t)) for t in after}
        o_next = {int(t): _next_value(spec, i, int(t)) for t in after}
        L = np.stack([np.stack([lik[int(y + x)] for x in xs]) for y in ys])
        O = np.array([[o_next[int(y + x)] for x in xs] for y in ys])
        joint = px[None, :, None] * L
        prob_h = joint.sum(1)
        with np.errstate(invalid="ignore", divide="ignore"):
            post = np.where(prob_h[:, None, :] > 0, joint / prob_h[:, None, :], 0.0)
        o_minus = O @ px
        o_hint = np.einsum("yxh,yx->yh", post, O)
        gain = np.where(prob_h > 0, o_hint - o_minus[:, None], 0.0)
        next_index = (ys[:, None] + xs[None, :] - nxt[0]) // 2
        out[i] = _RoundTables(ys, prob_h, gain, post, next_index)
    if len(_TABLE_CACHE) > 64:
        _TABLE_CACHE.clear()
    _TABLE_CACHE[spec] = out
    return out


def _induct(spec: GameSpec, sign: float, policy: StopPolicy | None):
    """Backward induction; returns (value at the start, optimal table or None)."""
    tables = _round_tables(spec)
    w_next = np.zeros(spec.reachable_sums(spec.m + 1).size)
    opt: dict[int, np.ndarray] = {}
    for i in range(spec.m, 0, -1):
        t = tables[i]
        cont = np.einsum("yxh,yx->yh", t.post, w_next[t.next_index])
        gain = sign * t.gain
        if policy is None:
            stop = gain > cont + 1e-15
            opt[i] = stop & (t.prob_h > 0)
        else:
            stop = policy.table[i]
        w_next = (t.prob_h * np.where(stop, gain, cont)).sum(1)
    start = spec.reachable_sums(1)
    return float(w_next[(spec.offset - start[0]) // 2]), (None if policy is not None else opt)


@dataclass
class GameBiasReport:
    spec: GameSpec
    bias: float
    direction: str          # "up": maximises E[O_I - O_I^-]; "down": the reverse
    bias_up: float
    bias_down: float
    policy: StopPolicy
    policy_up: StopPolicy
    policy_down: StopPolicy
    states: int
    runtime_ms: float


def bias_exact(spec: GameSpec) -> GameBiasReport:
    """Exact game bias by backward induction in both directions."""
    work = _work_estimate(spec)
    if work > STATE_BUDGET:
        raise ValueError(f"exact solve needs about {work} state evaluations (budget {STATE_BUDGET})")
    t0 = time.perf_counter()
    up, table_up = _induct(spec, 1.0, None)
    down, table_down = _induct(spec, -1.0, None)
    p_up, p_down = StopPolicy(spec, table_up), StopPolicy(spec, table_down)
    best_up = up >= down
    return GameBiasReport(
        spec=spec,
        bias=max(up, down),
        direction="up" if best_up else "down",
        bias_up=up,
        bias_down=down,
        policy=p_up if best_up else p_down,
        policy_up=p_up,
        policy_down=p_down,
        states=state_space_size(spec),
        runtime_ms=(time.perf_counter() - t0) * 1e3,
    )


def evaluate_policy(spec: GameSpec, policy: StopPolicy | Callable[[int, int, int], bool]) -> float:
    """Exact ``E[O_I - O_I^-]`` for a stopping rule."""
    if not isinstance(policy, StopPolicy):
        policy = StopPolicy.from_callable(spec, policy)
    value, _ = _induct(spec, 1.0, policy)
    return value


@dataclass
class GameMCReport:
    estimate: float
    ci_low: float
    ci_high: float
    trials: int
    seed: int


def bias_policy_mc(spec: GameSpec, policy: StopPolicy, trials: int, seed: int) -> GameMCReport:
    """Monte Carlo estimate of ``E[O_I - O_I^-]`` with a 99% Wilson interval.

    Vector hints are sampled through their weight, which carries all the
    information a :class:`StopPolicy` can use.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    if not isinstance(policy, StopPolicy):
        policy = StopPolicy.from_callable(spec, policy)
    rng = np.random.default_rng(seed)
    tables = _round_tables(spec)
    letters = alphabet(spec.m, spec.hint)
    p = (1.0 + spec.eps) / 2.0
    y = np.full(trials, spec.offset)
    active = np.ones(trials, bool)
    gains = np.zeros(trials)
    for i in range(1, spec.m + 1):
        t = tables[i]
        n = ml(spec.m, i)
        x = 2 * rng.binomial(n, p, size=trials) - n
        after = y + x
        u = np.unique(after)
        cdf = np.cumsum(np.stack([hint_likelihood(spec, i, int(v)) for v in u]), axis=1)
        rows = np.searchsorted(u, after)
        draw = rng.random(trials)[:, None]
        h_idx = np.minimum((draw > cdf[rows]).sum(1), letters.size - 1)
        y_idx = (y - t.ys[0]) // 2
        stop = active & policy.table[i][y_idx, h_idx]
        gains[stop] = t.gain[y_idx[stop], h_idx[stop]]
        active &= ~stop
        y = after
    mean = float(gains.mean())
    lo, hi = wilson_interval((1.0 + mean) / 2.0, trials)
    return GameMCReport(mean, 2 * lo - 1, 2 * hi - 1, trials, seed)


# ----------------------------------------------------------------------------
# property checks


@dataclass
class MonotonicityRow:
    kind: str
    channel: tuple[tuple[float, ...], ...]
    base_bias: float
    processed_bias: float

    @property
    def margin(self) -> float:
        return self.base_bias - self.processed_bias


def random_channel(rng: np.random.Generator, n_in: int, deterministic: bool) -> tuple[tuple[float, ...], ...]:
    n_out = int(rng.integers(2, 4))
    if deterministic:
        target = rng.integers(0, n_out, size=n_in)
        mat = np.eye(n_out)[target]
    else:
        mat = rng.dirichlet(np.ones(n_out), size=n_in)
    return tuple(tuple(float(v) for v in row) for row in mat)


def check_postprocessing_monotonicity(spec: GameSpec, g_samples: int = 50, seed: int = 0,
                                      trials: int = 0) -> list[MonotonicityRow]:
    """Compare the bias of ``spec`` with that of randomly post-processed hints.

    Half of the channels are deterministic maps, half random stochastic
    matrices. When ``trials`` is positive the optimal policy of every
    processed game is also checked by simulation (the interval is stored but
    not asserted).
    """
    rng = np.random.default_rng(seed)
    base = bias_exact(spec).bias
    n_in = alphabet(spec.m, spec.hint).size
    rows = []
    for s in range(g_samples):
        det = s % 2 == 0
        channel = random_channel(rng, n_in, det)
        processed = GameSpec(spec.m, spec.eps, spec.offset, PostProcessed(spec.hint, channel), spec.strict)
        rows.append(MonotonicityRow("map" if det else "channel", channel, base, bias_exact(processed).bias))
        if trials:
            bias_policy_mc(processed, bias_exact(processed).policy, trials, seed + s)
    return rows


@dataclass
class DeterminedReport:
    m: int
    offset: int
    start_value: float
    bias: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.bias <= self.bound


def check_determined_game(spec: GameSpec) -> DeterminedReport:
    """Bias of a game whose starting value is within ``1/m^2`` of 0 or 1."""
    start = value_plain(spec, GameState(1, spec.offset))
    lo = 1.0 / spec.m**2
    if lo <= start <= 1.0 - lo:
        raise ValueError(f"starting value {start:.4g} lies inside [1/m^2, 1 - 1/m^2]")
    return DeterminedReport(spec.m, spec.offset, start, bias_exact(spec).bias, 2.0 / spec.m)


def determined_offsets(m: int, eps: float = 0.0) -> list[int]:
    """All offsets for which the starting value lies outside ``[1/m^2, 1 - 1/m^2]``."""
    total = ms(m, 1)
    lo = 1.0 / m**2
    out = []
    for x0 in range(-total - 2, total + 3):
        v = ber_tail(total, eps, -x0)
        if v < lo or v > 1.0 - lo:
            out.append(x0)
    return out
