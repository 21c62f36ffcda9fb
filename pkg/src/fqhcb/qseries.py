"""
q-series building blocks.

Exact truncated expansions (rational exponents, rational coefficients) are
used for characters; floating evaluation is done in the log domain.  The
nome is always q = exp(-2 pi^2 / t) with t the reduced temperature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Iterable

import numpy as np

from .errors import DomainError, GuardError

LOG_DROP = 750.0
T_MAX_DEFAULT = 50.0


def log_nome(t: float) -> float:
    """ln q for reduced temperature t."""
    if not t > 0:
        raise DomainError(f"reduced temperature must be positive, got {t!r}")
    return -2.0 * math.pi ** 2 / t


def q_pochhammer(n: int, q: float) -> float:
    """(q)_n = prod_{j=1}^n (1 - q^j)."""
    if not 0.0 <= q < 1.0:
        raise DomainError(f"q must lie in [0, 1), got {q!r}")
    if n < 0:
        raise DomainError(f"n must be non-negative, got {n!r}")
    return math.prod(1.0 - q ** j for j in range(1, n + 1))


def log_dedekind_eta(t: float, t_max: float = T_MAX_DEFAULT, tol: float = 1e-17,
                     n_terms: int | None = None) -> float:
    """
    ln eta at q = exp(-2 pi^2 / t): ln(q)/24 + sum_n ln(1 - q^n).

    The product is truncated at the first factor with |ln(1 - q^n)| < tol,
    unless ``n_terms`` fixes the number of factors explicitly.
    """
    if t > t_max:
        raise GuardError(f"t={t} exceeds t_max={t_max}; eta product too slowly convergent")
    lq = log_nome(t)
    terms = [lq / 24.0]
    n = 1
    while True:
        if n_terms is not None and n > n_terms:
            break
        term = math.log1p(-math.exp(n * lq))
        if n_terms is None and abs(term) < tol:
            break
        terms.append(term)
        n += 1
    return math.fsum(terms)


def _frac_gcd(a: Fraction, b: Fraction) -> Fraction:
    if a == 0:
        return abs(b)
    if b == 0:
        return abs(a)
    den = a.denominator * b.denominator // math.gcd(a.denominator, b.denominator)
    return Fraction(math.gcd(int(a * den), int(b * den)), den)


@dataclass(frozen=True)
class QExpansion:
    """
    Truncated q-series  sum_k c_k q^(leading_exponent + k*step),  exact.

    The expansion is complete for every exponent up to
    leading_exponent + level_max; coefficients beyond are unknown, so
    comparisons are made only on the common valid range.
    """

    leading_exponent: Fraction
    step: Fraction
    coefficients: tuple[Fraction, ...]
    level_max: Fraction

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.level_max < 0:
            raise ValueError("level_max must be non-negative")
        expected = math.floor(self.level_max / self.step) + 1
        if len(self.coefficients) != expected:
            raise ValueError(
                f"{len(self.coefficients)} coefficients given, level_max/step requires {expected}")

    @property
    def valid_up_to(self) -> Fraction:
        return self.leading_exponent + self.level_max

    @property
    def exponents(self) -> tuple[Fraction, ...]:
        return tuple(self.leading_exponent + k * self.step for k in range(len(self.coefficients)))

    def items(self):
        return zip(self.exponents, self.coefficients)

    def coefficient(self, exponent) -> Fraction:
        exponent = Fraction(exponent)
        if exponent > self.valid_up_to:
            raise ValueError(f"exponent {exponent} beyond truncation {self.valid_up_to}")
        k = (exponent - self.leading_exponent) / self.step
        if k < 0 or k.denominator != 1:
            return Fraction(0)
        return self.coefficients[int(k)]

    def is_character_like(self) -> bool:
        return all(c >= 0 and c.denominator == 1 for c in self.coefficients)

    def truncate(self, level_max) -> QExpansion:
        level_max = Fraction(level_max)
        if level_max > self.level_max:
            raise ValueError("cannot extend a truncated expansion")
        n = math.floor(level_max / self.step) + 1
        return QExpansion(self.leading_exponent, self.step, self.coefficients[:n], level_max)

    def regrid(self, leading_exponent, step) -> QExpansion:
        """Re-express on a finer grid starting at ``leading_exponent`` (<= own leading)."""
        leading_exponent, step = Fraction(leading_exponent), Fraction(step)
        offset = (self.leading_exponent - leading_exponent) / step
        ratio = self.step / step
        if offset < 0 or offset.denominator != 1 or ratio.denominator != 1:
            raise ValueError("target grid does not contain this expansion's grid")
        level_max = self.valid_up_to - leading_exponent
        coeffs = [Fraction(0)] * (math.floor(level_max / step) + 1)
        for k, c in enumerate(self.coefficients):
            coeffs[int(offset) + k * int(ratio)] = c
        return QExpansion(leading_exponent, step, tuple(coeffs), level_max)

    def __add__(self, other: QExpansion) -> QExpansion:
        if not isinstance(other, QExpansion):
            return NotImplemented
        lead = min(self.leading_exponent, other.leading_exponent)
        step = _frac_gcd(_frac_gcd(self.step, other.step),
                         _frac_gcd(self.leading_exponent - lead, other.leading_exponent - lead))
        top = min(self.valid_up_to, other.valid_up_to)
        if top < lead:
            raise ValueError("expansions have no common valid range")
        a = self.regrid(lead, step).truncate(top - lead)
        b = other.regrid(lead, step).truncate(top - lead)
        coeffs = tuple(x + y for x, y in zip(a.coefficients, b.coefficients))
        return QExpansion(lead, step, coeffs, top - lead)

    def agrees_with(self, other: QExpansion) -> bool:
        """Coefficient-wise equality on the common valid range."""
        top = min(self.valid_up_to, other.valid_up_to)
        for exponent in sorted(set(self.exponents) | set(other.exponents)):
            if exponent > top:
                continue
            if self.coefficient(exponent) != other.coefficient(exponent):
                return False
        return True

    @cached_property
    def _float_terms(self) -> tuple[np.ndarray, np.ndarray]:
        ks = [k for k, c in enumerate(self.coefficients) if c != 0]
        if any(self.coefficients[k] < 0 for k in ks):
            raise ValueError("log evaluation requires non-negative coefficients")
        log_c = np.array([_log_fraction(self.coefficients[k]) for k in ks])
        expo = np.array([float(self.leading_exponent + k * self.step) for k in ks])
        return log_c, expo

    def log_value(self, log_q: float) -> float:
        """ln of the truncated series at the nome exp(log_q)."""
        log_c, expo = self._float_terms
        if log_c.size == 0:
            return -math.inf
        v = log_c + expo * log_q
        top = v.max()
        return float(top + math.log(np.exp(v - top).sum()))


def _log_fraction(c: Fraction) -> float:
    return math.log(c.numerator) - math.log(c.denominator)


@lru_cache(maxsize=None)
def bounded_partition_counts(max_part: int, level: int) -> tuple[int, ...]:
    """Coefficients of 1/(q)_max_part up to q^level (partitions with parts <= max_part)."""
    p = [0] * (level + 1)
    p[0] = 1
    for part in range(1, max_part + 1):
        for j in range(part, level + 1):
            p[j] += p[j - part]
    return tuple(p)


def z3_quadratic_form(n1: int, n2: int, form: str = "symmetric") -> int:
    if form == "symmetric":
        return n1 * n1 + n1 * n2 + n2 * n2
    if form == "printed":
        return n1 * n1 + n2 * n2 + n2 * n2
    raise ValueError(f"unknown quadratic form {form!r}")


@lru_cache(maxsize=None)
def z3_parafermion_character(l: int, level_max: Fraction, form: str = "symmetric") -> QExpansion:
    """
    Exact expansion of ch_{0,l} for the Z_3 parafermion theory (c = 4/5):

        q^(-1/30) sum_{n1,n2 >= 0, n1 + 2 n2 = l mod 3} q^((2/3) F(n1,n2)) / ((q)_n1 (q)_n2)

    with F the quadratic form n1^2 + n1 n2 + n2^2.  ``form="printed"`` uses
    n1^2 + 2 n2^2 instead and exists only to check that reading.
    """
    l %= 3
    level_max = Fraction(level_max)
    if level_max < 0:
        raise ValueError("level_max must be non-negative")

    def admissible(n1, n2):
        return (n1 + 2 * n2 - l) % 3 == 0

    # F(n1, n2) >= max(n1, n2)^2 for both forms, which bounds the enumeration.
    e_min = min(Fraction(2, 3) * z3_quadratic_form(n1, n2, form)
                for n1 in range(4) for n2 in range(4) if admissible(n1, n2))
    cap = e_min + level_max
    n_hi = math.isqrt(math.floor(Fraction(3, 2) * cap)) + 1

    series: dict[Fraction, int] = {}
    for n1 in range(n_hi + 1):
        for n2 in range(n_hi + 1):
            if not admissible(n1, n2):
                continue
            base = Fraction(2, 3) * z3_quadratic_form(n1, n2, form)
            if base > cap:
                continue
            room = math.floor(cap - base)
            p1 = bounded_partition_counts(n1, room)
            p2 = bounded_partition_counts(n2, room)
            for j in range(room + 1):
                c = sum(p1[i] * p2[j - i] for i in range(j + 1))
                if c:
                    series[base + j] = series.get(base + j, 0) + c

    step = Fraction(0)
    for e in series:
        step = _frac_gcd(step, e - e_min)
    if step == 0:
        step = Fraction(1)
    n_coeff = math.floor(level_max / step) + 1
    coeffs = [Fraction(0)] * n_coeff
    for e, c in series.items():
        k = (e - e_min) / step
        if k < n_coeff:
            coeffs[int(k)] = Fraction(c)
    return QExpansion(Fraction(-1, 30) + e_min, step, tuple(coeffs), level_max)


def expand_character(model, sector, level_max) -> QExpansion:
    """Exact q-expansion of the neutral character of ``sector`` in ``model``."""
    return model.character(sector, Fraction(level_max))


class LogSeriesAccumulator:
    """
    Log-sum-exp accumulator for Boltzmann-weighted terms carrying a charge.

    Weights are held relative to exp(log_max); moment sums are taken about a
    reference charge ``ref`` (the charge of the heaviest term seen) so that
    the variance of a sharply peaked distribution does not cancel:

        s0 = sum w_i,  s1 = sum w_i (Q_i - ref),  s2 = sum w_i (Q_i - ref)^2.

    Terms lighter than log_max - drop are discarded and counted.
    """

    __slots__ = ("log_max", "ref", "s0", "s1", "s2", "n_terms", "n_dropped", "drop")

    def __init__(self, drop: float = LOG_DROP):
        self.log_max = -math.inf
        self.ref = 0.0
        self.s0 = self.s1 = self.s2 = 0.0
        self.n_terms = 0
        self.n_dropped = 0
        self.drop = drop

    @classmethod
    def from_arrays(cls, log_w, charges, drop: float = LOG_DROP) -> LogSeriesAccumulator:
        log_w = np.asarray(log_w, dtype=float)
        charges = np.asarray(charges, dtype=float)
        acc = cls(drop)
        if log_w.size == 0:
            return acc
        i = int(np.argmax(log_w))
        top = float(log_w[i])
        keep = log_w >= top - drop
        w = np.exp(log_w[keep] - top)
        dq = charges[keep] - charges[i]
        acc.log_max, acc.ref = top, float(charges[i])
        acc.s0 = float(w.sum())
        acc.s1 = float((w * dq).sum())
        acc.s2 = float((w * dq * dq).sum())
        acc.n_terms = int(keep.sum())
        acc.n_dropped = int(log_w.size - acc.n_terms)
        return acc

    def copy(self) -> LogSeriesAccumulator:
        new = LogSeriesAccumulator(self.drop)
        for name in self.__slots__:
            setattr(new, name, getattr(self, name))
        return new

    def _rebase(self, log_max: float, ref: float):
        scale = math.exp(self.log_max - log_max) if self.n_terms else 0.0
        d = ref - self.ref
        s0, s1, s2 = self.s0 * scale, self.s1 * scale, self.s2 * scale
        self.s2 = s2 - 2.0 * d * s1 + d * d * s0
        self.s1 = s1 - d * s0
        self.s0 = s0
        self.log_max, self.ref = log_max, ref

    def add(self, log_w: float, charge: float) -> LogSeriesAccumulator:
        if log_w < self.log_max - self.drop:
            self.n_dropped += 1
            return self
        if log_w > self.log_max:
            self._rebase(log_w, charge)
        w = math.exp(log_w - self.log_max)
        dq = charge - self.ref
        self.s0 += w
        self.s1 += w * dq
        self.s2 += w * dq * dq
        self.n_terms += 1
        return self

    def merge(self, other: LogSeriesAccumulator) -> LogSeriesAccumulator:
        """Fold ``other`` in as if its terms had been added to this stream."""
        if other.n_terms == 0:
            self.n_dropped += other.n_dropped
            return self
        o = other.copy()
        if o.log_max > self.log_max:
            self._rebase(o.log_max, o.ref)
        else:
            o._rebase(self.log_max, self.ref)
        self.s0 += o.s0
        self.s1 += o.s1
        self.s2 += o.s2
        self.n_terms += o.n_terms
        self.n_dropped += o.n_dropped
        return self

    def shifted(self, delta_log: float) -> LogSeriesAccumulator:
        """Copy with every weight multiplied by exp(delta_log)."""
        new = self.copy()
        new.log_max += delta_log
        return new

    @property
    def log_value(self) -> float:
        if self.n_terms == 0:
            return -math.inf
        return self.log_max + math.log(self.s0)

    @property
    def mean(self) -> float:
        return self.ref + self.s1 / self.s0

    @property
    def variance(self) -> float:
        m = self.s1 / self.s0
        return max(self.s2 / self.s0 - m * m, 0.0)

    def raw_moments(self) -> tuple[float, float, float]:
        """(sum w, sum w Q, sum w Q^2) with w relative to exp(log_max)."""
        r = self.ref
        return (self.s0, self.s1 + r * self.s0, self.s2 + 2 * r * self.s1 + r * r * self.s0)

    def __repr__(self):
        return (f"LogSeriesAccumulator(log_value={self.log_value:.6g}, mean={self.mean:.6g}, "
                f"variance={self.variance:.6g}, n_terms={self.n_terms})")


def accumulate_log_terms(terms: Iterable[tuple[float, float]],
                         drop: float = LOG_DROP) -> LogSeriesAccumulator:
    acc = LogSeriesAccumulator(drop)
    for log_w, charge in terms:
        acc.add(log_w, charge)
    if acc.n_terms == 0 and acc.n_dropped == 0:
        raise ValueError("empty term stream")
    return acc
