"""Numerical checks of the binomial and hypergeometric estimates.

Hard inequalities (tail Lipschitz bound, the two Hoeffding bounds, the
averaging inequality) are checked point by point and must hold. Asymptotic
estimates carry an unspecified universal constant; for those the constant is
fitted on a training range of ``n`` and then checked on larger, held-out
``n``. Logarithms are base 2.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .numerics import (
    ber_pmf,
    ber_pmf_vector,
    ber_tail,
    hyp_pmf_vector,
    normal_upper,
    sbias,
)

HARD = ("tail_lipschitz", "hoeffding_pm1", "hoeffding_hypergeometric", "linear_averaging")
FITTED = ("binom_pmf_normal", "binom_pmf_ratio", "tail_normal", "sbias_linearization", "hyp_pmf_normal")
CHECKS = HARD + FITTED
COLUMNS = ["proposition", "params", "lhs", "rhs", "margin", "pass"]


@dataclass
class EstimateGrid:
    train_n: Sequence[int] = (64, 100, 150, 256, 400)
    test_n: Sequence[int] = (1000, 2500, 6000)
    hard_n: Sequence[int] = (25, 50, 101, 200, 501)
    eps_points: int = 5
    instances: int = 200      # random instances for the averaging inequality
    seed: int = 0
    checks: Sequence[str] = CHECKS

    def __post_init__(self) -> None:
        bad = [c for c in self.checks if c not in CHECKS]
        if bad:
            raise ValueError(f"unknown checks {bad}")
        for ns in (self.train_n, self.test_n, self.hard_n):
            if any(int(n) < 2 for n in ns):
                raise ValueError("grid sizes must be at least 2")


@dataclass
class EstimateRow:
    proposition: str
    params: str
    lhs: float
    rhs: float
    passed: bool

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    def as_dict(self) -> dict:
        return {"proposition": self.proposition, "params": self.params, "lhs": f"{self.lhs:.6e}",
                "rhs": f"{self.rhs:.6e}", "margin": f"{self.margin:.6e}", "pass": int(self.passed)}


@dataclass
class EstimateReport:
    rows: list[EstimateRow] = field(default_factory=list)
    constants: dict[str, float] = field(default_factory=dict)

    @property
    def hard_ok(self) -> bool:
        return all(r.passed for r in self.rows if r.proposition in HARD)

    @property
    def ok(self) -> bool:
        return all(r.passed for r in self.rows)

    def failures(self) -> list[EstimateRow]:
        return [r for r in self.rows if not r.passed]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow(r.as_dict())
        for name, c in self.constants.items():
            w.writerow({"proposition": f"{name}:constant", "params": "fitted on training n", "lhs": "",
                        "rhs": f"{c:.6e}", "margin": "", "pass": 1})
        return buf.getvalue()


def _lg(n: int) -> float:
    return math.log2(n)


def _eps_grid(bound: float, k: int) -> np.ndarray:
    return np.linspace(-bound, bound, k)


# ----------------------------------------------------------------------------
# hard inequalities


def _tail_lipschitz(grid: EstimateGrid) -> list[EstimateRow]:
    rows = []
    for n in grid.hard_n:
        kmax = int(n ** 0.6)
        for eps in _eps_grid(n ** -0.4, grid.eps_points):
            ks = range(-kmax, kmax + 1)
            tails = {k: ber_tail(n, eps, k) for k in ks}
            worst, arg = -math.inf, None
            for k in ks:
                for k2 in ks:
                    if k2 <= k:
                        continue
                    slack = (k2 - k) / math.sqrt(n) - abs(tails[k] - tails[k2])
                    if arg is None or slack < worst:
                        worst, arg = slack, (k, k2)
            k, k2 = arg
            lhs = abs(tails[k] - tails[k2])
            rows.append(EstimateRow("tail_lipschitz", f"n={n};eps={eps:.4g};k={k};k'={k2}", lhs,
                                    (k2 - k) / math.sqrt(n), worst >= 0))
    return rows


def _hoeffding_pm1(grid: EstimateGrid) -> list[EstimateRow]:
    rows = []
    for n in grid.hard_n:
        for eps in _eps_grid(1.0, grid.eps_points):
            xs, px = ber_pmf_vector(n, eps)
            dev = np.abs(xs - eps * n)
            for t in range(1, n + 1):
                lhs = float(px[dev >= t - 1e-9].sum())
                rhs = 2 * math.exp(-t * t / (2 * n))
                if t % max(1, n // 5) == 0 or lhs > rhs:
                    rows.append(EstimateRow("hoeffding_pm1", f"n={n};eps={eps:.4g};t={t}", lhs, rhs, lhs <= rhs))
    return rows


def _hoeffding_hyp(grid: EstimateGrid) -> list[EstimateRow]:
    # one-sided tails: the two-sided version without a factor 2 fails at n=2, l=1
    rows = []
    for n in (n for n in grid.hard_n if n <= 200):
        for p in range(-n, n + 1, max(2, 2 * (n // 8))):
            for ell in sorted({1, n // 4, n // 2, n}):
                if ell < 1:
                    continue
                xs, px = hyp_pmf_vector(n, p, ell)
                mu = ell * p / n
                for t in range(1, ell + 1):
                    up = float(px[xs - mu >= t - 1e-9].sum())
                    lo = float(px[mu - xs >= t - 1e-9].sum())
                    lhs = max(up, lo)
                    rhs = math.exp(-t * t / (2 * ell))
                    if t % max(1, ell // 3) == 0 or lhs > rhs:
                        rows.append(EstimateRow("hoeffding_hypergeometric",
                                                f"n={n};p={p};l={ell};t={t}", lhs, rhs, lhs <= rhs))
    return rows


def _linear_averaging(grid: EstimateGrid) -> list[EstimateRow]:
    """Random non-negative ``p_k..p_n`` meeting every suffix constraint, compared exactly."""
    rng = np.random.default_rng(grid.seed)
    rows = []
    for _ in range(grid.instances):
        n = int(rng.integers(1, 30))
        k = int(rng.integers(1, n + 1))
        alpha = Fraction(int(rng.integers(1, 20)), int(rng.integers(1, 10)))
        # fill from j = n downwards so every suffix sum stays within its budget
        p: dict[int, Fraction] = {}
        run = Fraction(0)
        for j in range(n, k - 1, -1):
            room = alpha * (n + 1 - j) - run
            p[j] = room * Fraction(int(rng.integers(0, 101)), 100)
            run += p[j]
        lhs = sum((p[j] / (n + 1 - j) for j in p), Fraction(0))
        rhs = alpha * sum((Fraction(1, n + 1 - j) for j in p), Fraction(0))
        rows.append(EstimateRow("linear_averaging", f"n={n};k={k};alpha={alpha}", float(lhs), float(rhs), lhs <= rhs))
    return rows


# ----------------------------------------------------------------------------
# fitted estimates


def _binom_pmf_points(n: int, k_eps: int):
    tmax = int(n ** 0.6)
    for eps in _eps_grid(n ** -0.4, k_eps):
        for t in range(-tmax, tmax + 1):
            if (t + n) % 2:
                continue
            approx = math.sqrt(2 / math.pi) / math.sqrt(n) * math.exp(-(t - eps * n) ** 2 / (2 * n))
            rel = abs(ber_pmf(n, eps, t) / approx - 1)
            scale = eps * eps * abs(t) + 1 / n + abs(t) ** 3 / n ** 2 + eps ** 4 * n
            yield f"n={n};eps={eps:.4g};t={t}", rel, scale


def _binom_ratio_points(n: int, k_eps: int):
    w = int(math.sqrt(n * _lg(n)))
    for eps in _eps_grid(math.sqrt(_lg(n) / n), k_eps):
        for t in range(-w, w + 1, max(1, w // 4)):
            for x in range(-w, w + 1, max(1, w // 3)):
                for x2 in (0, w // 2, -w):
                    if (t - x + n) % 2 or (t - x2 + n) % 2:
                        continue
                    den = ber_pmf(n, eps, t - x)
                    if den == 0.0:
                        continue
                    c = t - eps * n
                    approx = math.exp((-2 * c * x + x * x + 2 * c * x2 - x2 * x2) / (2 * n))
                    rel = abs(ber_pmf(n, eps, t - x2) / den / approx - 1)
                    yield f"n={n};eps={eps:.4g};t={t};x={x};x'={x2}", rel, _lg(n) ** 1.5 / math.sqrt(n)


def _tail_normal_points(n: int, k_eps: int):
    w = int(math.sqrt(n * _lg(n)))
    for eps in _eps_grid(math.sqrt(_lg(n) / n), k_eps):
        for k in range(-w, w + 1, max(1, w // 10)):
            z = (k - eps * n) / math.sqrt(n)
            err = abs(ber_tail(n, eps, k) - normal_upper(z))
            yield f"n={n};eps={eps:.4g};k={k}", err, _lg(n) ** 1.5 / math.sqrt(n) * math.exp(-z * z / 2)


def _sbias_points(n: int, k_eps: int):
    w = int(math.sqrt(n * _lg(n)))
    for n2 in (n, 2 * n, 5 * n):
        for eps in _eps_grid(math.sqrt(_lg(n) / n), k_eps):
            for k in range(-w, w + 1, max(1, w // 5)):
                delta = ber_tail(n, eps, k)
                if not 0.0 < delta < 1.0:
                    continue
                err = abs(sbias(n2, delta) - (eps * n - k) / math.sqrt(n * n2))
                yield f"n={n};n'={n2};eps={eps:.4g};k={k}", err, _lg(n) ** 1.5 / math.sqrt(n * n2)


def _hyp_pmf_points(n: int, k_eps: int):
    b = int(n ** 0.6)
    for p in range(-b - (b % 2), b + 1, max(2, 2 * (b // 6))):
        xs, px = hyp_pmf_vector(2 * n, p, n)
        for t, pr in zip(xs, px):
            if abs(t) > b:
                continue
            approx = 2 / math.sqrt(math.pi * n) * math.exp(-(t - p / 2) ** 2 / n)
            rel = abs(pr / approx - 1)
            yield f"n={n};p={p};t={int(t)}", rel, (n + abs(p) ** 3 + abs(t) ** 3) / n ** 2


_POINTS = {
    "binom_pmf_normal": _binom_pmf_points,
    "binom_pmf_ratio": _binom_ratio_points,
    "tail_normal": _tail_normal_points,
    "sbias_linearization": _sbias_points,
    "hyp_pmf_normal": _hyp_pmf_points,
}


def _fitted(name: str, grid: EstimateGrid) -> tuple[list[EstimateRow], float]:
    gen = _POINTS[name]
    const = float(max(err / scale for n in grid.train_n for _, err, scale in gen(n, grid.eps_points) if scale > 0))
    rows = []
    for n in grid.test_n:
        worst = None
        for params, err, scale in gen(n, grid.eps_points):
            row = EstimateRow(name, params, float(err), float(const * scale), bool(err <= const * scale))
            if worst is None or row.margin < worst.margin:
                worst = row
        if worst is not None:
            rows.append(worst)
    return rows, const


_HARD_FNS = {
    "tail_lipschitz": _tail_lipschitz,
    "hoeffding_pm1": _hoeffding_pm1,
    "hoeffding_hypergeometric": _hoeffding_hyp,
    "linear_averaging": _linear_averaging,
}


def validate_estimates(grid: EstimateGrid | None = None) -> EstimateReport:
    """Evaluate every check on ``grid``; never raises on a violated bound."""
    grid = grid or EstimateGrid()
    report = EstimateReport()
    for name in grid.checks:
        if name in _HARD_FNS:
            report.rows.extend(_HARD_FNS[name](grid))
        else:
            rows, const = _fitted(name, grid)
            report.rows.extend(rows)
            report.constants[name] = const
    return report
