"""Probability kernels for biased ±1 binomials and hypergeometric weights.

Conventions
-----------
* ``ber_pmf(n, eps, k)`` is the law of a sum of ``n`` i.i.d. ±1 coins, each
  equal to +1 with probability ``(1 + eps) / 2``.
* ``hyp_pmf(n, p, l, k)`` is the law of the weight (sum of entries) of a
  uniform ``l``-subset of a fixed ±1 vector of length ``n`` and weight ``p``.
* ``normal_upper(x)`` is the *upper* standard normal tail ``Pr[Z >= x]``,
  not the usual CDF. Every internal use follows this convention.

All float kernels work in log-space via ``gammaln`` and exponentiate at the
end. The ``*_exact`` variants return :class:`fractions.Fraction` values and
are meant for small oracle computations.
"""

from __future__ import annotations

import math
import warnings
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.special import betainc, erfc, gammaln, xlogy

__all__ = [
    "ml",
    "ms",
    "check_round_param",
    "ber_pmf",
    "ber_pmf_vector",
    "ber_tail",
    "sbias",
    "hyp_pmf",
    "hyp_pmf_vector",
    "hyp_tail",
    "normal_upper",
    "ber_pmf_exact",
    "ber_tail_exact",
    "hyp_pmf_exact",
    "hyp_tail_exact",
    "mixture_tail",
    "wilson_interval",
    "validate_estimates",
]

SBIAS_MAX_ITER = 200
SBIAS_WIDTH = 1e-15


def ml(m: int, i: int) -> int:
    """Number of coins flipped in round ``i`` of an ``m``-round game."""
    return m + 1 - i


def ms(m: int, i: int) -> int:
    """Number of coins flipped from round ``i`` through round ``m`` (0 after round m)."""
    if i > m:
        return 0
    return (m + 1 - i) * (m + 2 - i) // 2


def check_round_param(m: int, strict: bool = True) -> None:
    """Validate a round parameter.

    Strict mode demands ``m % 4 == 1`` so that the total coin count is odd and
    the honest outcome can never tie. Outside strict mode other values are
    accepted with a warning.
    """
    if not isinstance(m, (int, np.integer)) or m < 1:
        raise ValueError(f"round parameter must be a positive integer, got {m!r}")
    if m % 4 != 1:
        if strict:
            raise ValueError(f"m={m} violates m = 1 (mod 4); pass strict=False to override")
        warnings.warn(f"m={m} is not 1 mod 4: total coin count is even and ties resolve to 1",
                      stacklevel=2)


def _key(eps: float) -> float:
    eps = float(eps)
    if not -1.0 <= eps <= 1.0:
        raise ValueError(f"bias must lie in [-1, 1], got {eps}")
    return eps


def _ber_log_pmf(n: int, eps: float) -> np.ndarray:
    j = np.arange(n + 1, dtype=float)
    p, q = (1.0 + eps) / 2.0, (1.0 - eps) / 2.0
    logc = gammaln(n + 1.0) - gammaln(j + 1.0) - gammaln(n - j + 1.0)
    with np.errstate(divide="ignore"):
        return logc + xlogy(j, p) + xlogy(n - j, q)


def _normalised(logp: np.ndarray) -> np.ndarray:
    # gammaln carries ~1e-16 relative error on arguments near n, i.e. ~n * 1e-16 in the log
    probs = np.exp(logp)
    return probs / probs.sum()


def _tails(probs: np.ndarray) -> np.ndarray:
    """``tails[j] = sum(probs[j:])``, taken as a complement where that is the smaller sum."""
    upper = np.cumsum(probs[::-1])[::-1]
    below = np.concatenate([[0.0], np.cumsum(probs)[:-1]])
    return np.where(upper <= 0.5, upper, 1.0 - below)


@lru_cache(maxsize=65536)
def _ber_tables(n: int, eps: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    probs = _normalised(_ber_log_pmf(n, eps))
    support = np.arange(-n, n + 1, 2)
    tails = _tails(probs)
    for arr in (probs, support, tails):
        arr.setflags(write=False)
    return support, probs, tails


def ber_pmf_vector(n: int, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(support, probabilities)`` of ``Ber(n, eps)``; support is ``-n, -n+2, ..., n``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    support, probs, _ = _ber_tables(int(n), _key(eps))
    return support, probs


def ber_pmf(n: int, eps: float, k: int) -> float:
    """Pr[sum of n i.i.d. ±1 coins with bias eps equals k]."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    k = int(k)
    if abs(k) > n or (k + n) % 2:
        return 0.0
    _, probs, _ = _ber_tables(int(n), _key(eps))
    return float(probs[(k + n) // 2])


def ber_tail(n: int, eps: float, k: int) -> float:
    """Pr[sum of n i.i.d. ±1 coins with bias eps is at least k]."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    k = math.ceil(k)
    if k <= -n:
        return 1.0
    if k > n:
        return 0.0
    _, _, tails = _ber_tables(int(n), _key(eps))
    j = (k + n + 1) // 2  # first support index with value >= k
    return min(1.0, float(tails[j]))


def _tail_at_zero(n: int, eps: float) -> float:
    # Pr[Binomial(n, p) >= j0] through the regularised incomplete beta function
    j0 = (n + 1) // 2  # first number of +1 entries making the sum nonnegative
    p, q = (1.0 + eps) / 2.0, (1.0 - eps) / 2.0
    upper = float(betainc(j0, n - j0 + 1, p))
    return upper if upper <= 0.5 else 1.0 - float(betainc(n - j0 + 1, j0, q))


@lru_cache(maxsize=65536)
def _sbias(n: int, delta: float) -> float:
    if delta <= 0.0:
        return -1.0
    if delta >= 1.0:
        return 1.0
    if n % 2 and delta == 0.5:
        return 0.0  # symmetric sum of odd length never ties
    lo, hi = -1.0, 1.0
    for _ in range(SBIAS_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if _tail_at_zero(n, mid) < delta:
            lo = mid
        else:
            hi = mid
        if hi - lo < SBIAS_WIDTH:
            break
    return 0.5 * (lo + hi)


def sbias(n: int, delta: float) -> float:
    """The bias ``eps`` with ``ber_tail(n, eps, 0) == delta``, found by bisection."""
    if n < 1:
        raise ValueError("n must be positive")
    delta = float(delta)
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [0, 1], got {delta}")
    return _sbias(int(n), delta)


def _check_hyp(n: int, p: int, l: int) -> None:
    if n < 1:
        raise ValueError("n must be positive")
    if abs(p) > n or (p - n) % 2:
        raise ValueError(f"weight p={p} incompatible with length n={n}")
    if not 0 <= l <= n:
        raise ValueError(f"subset size l={l} outside [0, {n}]")


@lru_cache(maxsize=65536)
def _hyp_tables(n: int, p: int, l: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    ones = (n + p) // 2
    j = np.arange(max(0, l - (n - ones)), min(ones, l) + 1, dtype=float)
    logp = (gammaln(ones + 1.0) - gammaln(j + 1.0) - gammaln(ones - j + 1.0)
            + gammaln(n - ones + 1.0) - gammaln(l - j + 1.0) - gammaln(n - ones - l + j + 1.0)
            - (gammaln(n + 1.0) - gammaln(l + 1.0) - gammaln(n - l + 1.0)))
    probs = _normalised(logp)
    support = (2 * j - l).astype(int)
    tails = _tails(probs)
    for arr in (probs, support, tails):
        arr.setflags(write=False)
    return support, probs, tails


def hyp_pmf_vector(n: int, p: int, l: int) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(support, probabilities)`` of the subset weight; support has step 2."""
    _check_hyp(n, p, l)
    support, probs, _ = _hyp_tables(int(n), int(p), int(l))
    return support, probs


def hyp_pmf(n: int, p: int, l: int, k: int) -> float:
    """Pr[weight of a uniform l-subset of a ±1 vector (length n, weight p) equals k]."""
    support, probs = hyp_pmf_vector(n, p, l)
    idx = np.searchsorted(support, k)
    if idx < len(support) and support[idx] == k:
        return float(probs[idx])
    return 0.0


def hyp_tail(n: int, p: int, l: int, k: int) -> float:
    """Pr[weight of a uniform l-subset is at least k]."""
    _check_hyp(n, p, l)
    support, _, tails = _hyp_tables(int(n), int(p), int(l))
    idx = int(np.searchsorted(support, k))
    if idx >= len(support):
        return 0.0
    return min(1.0, float(tails[idx]))


def mixture_tail(big_n: int, eps: float, l: int, k: int) -> float:
    """Average subset-weight tail over a random ±1 vector of length ``2 * big_n``.

    Computes ``sum_p ber_pmf(2N, eps, p) * hyp_tail(2N, p, l, k)``, which is the
    probability that a fresh ``l``-subset of an i.i.d. biased vector has weight
    at least ``k``. It equals ``ber_tail(l, eps, k)``.
    """
    support, probs = ber_pmf_vector(2 * big_n, eps)
    return float(math.fsum(w * hyp_tail(2 * big_n, int(p), l, k)
                           for p, w in zip(support, probs) if w > 0.0))


def normal_upper(x):
    """Upper standard normal tail ``Pr[Z >= x]`` (works on scalars and arrays)."""
    out = 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))
    return float(out) if np.ndim(out) == 0 else out


def wilson_interval(mean01: float, n: int, level: float = 0.99) -> tuple[float, float]:
    """Wilson score interval for the mean of ``n`` draws of a [0, 1]-valued variable.

    For Bernoulli draws this is the usual Wilson interval. For other bounded
    variables it remains conservative, since their variance is at most
    ``mean * (1 - mean)``.
    """
    if n < 1:
        raise ValueError("need at least one trial")
    from scipy.stats import norm

    z = float(norm.isf((1.0 - level) / 2.0))
    p = min(1.0, max(0.0, float(mean01)))
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


# ----------------------------------------------------------------------------
# exact rational mode


def ber_pmf_exact(n: int, eps: Fraction | int, k: int) -> Fraction:
    """Exact ``ber_pmf`` for a rational bias."""
    eps = Fraction(eps)
    if abs(k) > n or (k + n) % 2:
        return Fraction(0)
    j = (k + n) // 2
    p, q = (1 + eps) / 2, (1 - eps) / 2
    return math.comb(n, j) * p**j * q ** (n - j)


def ber_tail_exact(n: int, eps: Fraction | int, k: int) -> Fraction:
    """Exact ``ber_tail`` for a rational bias."""
    return sum((ber_pmf_exact(n, eps, t) for t in range(max(k, -n), n + 1)), Fraction(0))


def hyp_pmf_exact(n: int, p: int, l: int, k: int) -> Fraction:
    """Exact ``hyp_pmf`` by counting subsets."""
    _check_hyp(n, p, l)
    if (k + l) % 2:
        return Fraction(0)
    ones, j = (n + p) // 2, (k + l) // 2
    if j < 0 or j > ones or l - j < 0 or l - j > n - ones:
        return Fraction(0)
    return Fraction(math.comb(ones, j) * math.comb(n - ones, l - j), math.comb(n, l))


def hyp_tail_exact(n: int, p: int, l: int, k: int) -> Fraction:
    """Exact ``hyp_tail`` by counting subsets."""
    return sum((hyp_pmf_exact(n, p, l, t) for t in range(max(k, -l), l + 1)), Fraction(0))


def validate_estimates(grid=None):
    """Check the binomial/hypergeometric inequalities and estimates; see :mod:`fairflip.estimates`."""
    from .estimates import validate_estimates as run

    return run(grid)
