"""Independent brute-force references used by the tests.

Nothing here calls the package's solvers; values are exact rationals obtained
by enumerating sign patterns, subsets and full game histories.
"""

from __future__ import annotations

import itertools
from math import comb
from fractions import Fraction


def pmf_by_patterns(n: int, eps: Fraction, k: int) -> Fraction:
    p, q = (1 + eps) / 2, (1 - eps) / 2
    total = Fraction(0)
    for signs in itertools.product((1, -1), repeat=n):
        if sum(signs) == k:
            ones = signs.count(1)
            total += p**ones * q ** (n - ones)
    return total


def tail_by_patterns(n: int, eps: Fraction, k: int) -> Fraction:
    return sum((pmf_by_patterns(n, eps, t) for t in range(-n, n + 1) if t >= k), Fraction(0))


def hyp_by_subsets(vector: tuple[int, ...], ell: int, k: int) -> Fraction:
    subsets = list(itertools.combinations(range(len(vector)), ell))
    hits = sum(1 for s in subsets if sum(vector[j] for j in s) == k)
    return Fraction(hits, len(subsets))


def _ml(m, i):
    return m + 1 - i


def _ms(m, i):
    return 0 if i > m else (m + 1 - i) * (m + 2 - i) // 2


def _law(n: int, eps: Fraction):
    p, q = (1 + eps) / 2, (1 - eps) / 2
    return [(2 * j - n, comb(n, j) * p**j * q ** (n - j)) for j in range(n + 1)]


def _tail(n: int, eps: Fraction, k: int) -> Fraction:
    return sum((w for x, w in _law(n, eps) if x >= k), Fraction(0))


def simple_game_bias(m: int, eps: Fraction = Fraction(0), offset: int = 0) -> Fraction:
    """Optimal bias of the simple game by enumerating whole histories.

    A player may condition on every past coin and hint, not just the running
    sum, so this also confirms that the sum/hint statistic loses nothing.
    """

    def o(i, y):
        return _tail(_ms(m, i), eps, -y)

    def solve(sign):
        def value(history_coins, history_hints):
            i = len(history_coins) + 1
            if i > m:
                return Fraction(0)
            y = offset + sum(history_coins)
            law = _law(_ml(m, i), eps)
            joint = {}
            for x, w in law:
                d = o(i + 1, y + x)
                for h, ph in ((1, d), (0, 1 - d)):
                    joint[(x, h)] = w * ph
            total = Fraction(0)
            for h in (0, 1):
                mass = sum(joint[(x, h)] for x, _ in law)
                if mass == 0:
                    continue
                post = sum(joint[(x, h)] * o(i + 1, y + x) for x, _ in law) / mass
                stop = sign * (post - o(i, y))
                cont = sum(joint[(x, h)] * value(history_coins + (x,), history_hints + (h,)) for x, _ in law) / mass
                total += mass * max(stop, cont)
            return total

        return value((), ())

    return max(solve(1), solve(-1))


def cleve_greedy_bias(m: int) -> Fraction:
    """Majority of m fair coins; the attacker aborts when doing so helps outcome 1 right away."""

    def after(i, s):      # abort in round i with prior sum s: fresh completion of m - i + 1 coins
        return _tail(m - i + 1, Fraction(0), -s)

    def before(i, s):     # value once coin i is seen
        return _tail(m - i, Fraction(0), -s)

    def rec(i, s):
        if i > m:
            return Fraction(1 if s >= 0 else 0)
        out = Fraction(0)
        for c in (-1, 1):
            if after(i, s) > before(i, s + c):
                out += Fraction(1, 2) * after(i, s)
            else:
                out += Fraction(1, 2) * rec(i + 1, s + c)
        return out

    return rec(1, 0) - Fraction(1, 2)
