"""Exponential moments of binary KL for averages of iid [0, 1] variables.

The central quantity is

    xi(n) = E[exp(n * kl(M(X'), mu))]
          = sum_k C(n, k) (k/n)^k ((n-k)/n)^(n-k),

the moment for Bernoulli samples, which does not depend on mu. Along with
it live the two envelopes that sandwich it, the Riemann-sum constant c_n,
Stirling brackets for ln(n!), and two independent oracles: an exact
rational evaluation and a brute-force enumeration over finite supports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.special import gammaln, xlogy

from .kl_core import Probability, kl_array

__all__ = [
    "FiniteSupportDist",
    "MomentReport",
    "CostGuardError",
    "InvariantViolation",
    "xi_exact",
    "xi_exact_rational",
    "c_n",
    "envelopes",
    "stirling_bounds",
    "moment_bernoulli_at_mu",
    "moment_enumerated",
    "moment_report",
]

RATIONAL_MAX_N = 200
ENUMERATION_MAX = 10**7
_CHUNK = 1 << 20


class CostGuardError(ValueError):
    """Raised when a request exceeds an oracle's cost guard."""


class InvariantViolation(RuntimeError):
    """A proven inequality failed numerically."""


def _check_n(n, minimum=1):
    if isinstance(n, bool) or int(n) != n:
        raise TypeError(f"n must be an integer, got {n!r}")
    n = int(n)
    if n < minimum:
        raise ValueError(f"n must be >= {minimum}, got {n}")
    return n


def _chunked_fsum(func, start, stop):
    # func(k_array) -> term array; fsum within and across chunks
    partials = []
    for lo in range(start, stop, _CHUNK):
        k = np.arange(lo, min(lo + _CHUNK, stop), dtype=np.float64)
        partials.append(math.fsum(func(k)))
    return math.fsum(partials)


def xi_exact(n: int) -> float:
    """``sum_k C(n,k) (k/n)^k ((n-k)/n)^(n-k)`` with ``0^0 = 1``.

    Each term is formed in log space and is at most 1, so nothing overflows.
    Runs in O(n) and is fine up to n = 10^7.
    """
    n = _check_n(n)
    nf = float(n)
    log_n_fact = gammaln(nf + 1.0)

    def terms(k):
        m = nf - k
        log_t = (
            log_n_fact
            - gammaln(k + 1.0)
            - gammaln(m + 1.0)
            + xlogy(k, k / nf)
            + xlogy(m, m / nf)
        )
        return np.exp(log_t)

    return _chunked_fsum(terms, 0, n + 1)


def xi_exact_rational(n: int) -> Fraction:
    """Exact rational value of ``xi(n)`` using integer arithmetic only."""
    n = _check_n(n)
    if n > RATIONAL_MAX_N:
        raise CostGuardError(f"rational oracle limited to n <= {RATIONAL_MAX_N}, got {n}")
    num = sum(math.comb(n, k) * k**k * (n - k) ** (n - k) for k in range(n + 1))
    return Fraction(num, n**n)


def c_n(n: int) -> float:
    """``sum_{k=1}^{n-1} 1 / sqrt(k (n - k))``; tends to pi from below."""
    n = _check_n(n, minimum=2)
    nf = float(n)
    return _chunked_fsum(lambda k: 1.0 / np.sqrt(k * (nf - k)), 1, n)


def envelopes(n: int) -> tuple[float, float]:
    """Lower and upper bounds on ``xi(n)`` valid for every n >= 2."""
    n = _check_n(n, minimum=2)
    upper = math.exp(1.0 / (12.0 * n)) * math.sqrt(math.pi * n / 2.0) + 2.0
    lower = math.exp(-1.0 / 6.0) * math.sqrt(n / (2.0 * math.pi)) * c_n(n) + 2.0
    return lower, upper


def stirling_bounds(n: int) -> tuple[float, float]:
    """Bracket ``(lo, hi)`` of ``ln(n!)``: ``lo < ln(n!) < hi``, with ``hi = lo + 1/(12n)``."""
    n = _check_n(n)
    lo = 0.5 * math.log(2.0 * math.pi * n) + n * (math.log(n) - 1.0)
    return lo, lo + 1.0 / (12.0 * n)


def moment_bernoulli_at_mu(n: int, mu: float) -> float:
    """``E[exp(n kl(M, mu))]`` for Bernoulli(mu) samples, summed directly.

    The binomial weights and the exponential factor are kept separate, i.e.
    the mu-dependence is not cancelled algebraically. Agreement with
    :func:`xi_exact` is therefore a genuine check.
    """
    n = _check_n(n)
    mu = float(Probability(mu))
    if mu in (0.0, 1.0):
        raise ValueError("mu must lie strictly inside (0, 1); the moment is 1 at the endpoints")
    k = np.arange(n + 1, dtype=np.float64)
    log_pmf = (
        gammaln(n + 1.0)
        - gammaln(k + 1.0)
        - gammaln(n - k + 1.0)
        + k * math.log(mu)
        + (n - k) * math.log1p(-mu)
    )
    exponent = n * kl_array(k / n, mu)
    return math.fsum(np.exp(log_pmf + exponent))


@dataclass(frozen=True)
class FiniteSupportDist:
    """A distribution on finitely many points of [0, 1]."""

    values: tuple[float, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        probs = tuple(float(p) for p in self.probs)
        if len(values) == 0 or len(values) != len(probs):
            raise ValueError("values and probs must be non-empty and of equal length")
        if any(not 0.0 <= v <= 1.0 for v in values):
            raise ValueError("atom values must lie in [0, 1]")
        if len(set(values)) != len(values):
            raise ValueError("atom values must be distinct")
        for p in probs:
            Probability(p)
        if abs(math.fsum(probs) - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {math.fsum(probs)!r}, expected 1")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_atoms(cls, atoms: Sequence[tuple[float, float]]) -> "FiniteSupportDist":
        return cls(tuple(a for a, _ in atoms), tuple(p for _, p in atoms))

    @classmethod
    def bernoulli(cls, mu: float) -> "FiniteSupportDist":
        return cls((0.0, 1.0), (1.0 - mu, mu))

    def mean(self) -> float:
        return float(sum(p * v for v, p in zip(self.values, self.probs)))

    def mean_of_counts(self, counts: np.ndarray, n: int) -> np.ndarray:
        """Sample means from atom counts; shape ``(..., n_atoms)``.

        Summed in atom order, the same order :meth:`mean` uses, so a sample
        that reproduces the law exactly gives back ``mean()`` bit for bit.
        """
        out = np.zeros(counts.shape[:-1])
        for j, v in enumerate(self.values):
            out = out + (counts[..., j] / n) * v
        return out


def moment_enumerated(dist: FiniteSupportDist, n: int) -> float:
    """``E[exp(n kl(M(X), mu))]`` by enumerating every outcome in ``atoms^n``.

    Outcomes are visited in lexicographic order of atom indices. Slow by
    design: this is the brute-force reference for the convexity reduction.
    """
    n = _check_n(n)
    a = len(dist.values)
    total = a**n
    if total > ENUMERATION_MAX:
        raise CostGuardError(f"enumeration of {a}^{n} = {total} outcomes exceeds {ENUMERATION_MAX}")
    mu = dist.mean()
    with np.errstate(divide="ignore"):
        log_p = np.log(np.asarray(dist.probs))
    powers = a ** np.arange(n - 1, -1, -1, dtype=np.int64)
    partials = []
    for lo in range(0, total, _CHUNK):
        ordinals = np.arange(lo, min(lo + _CHUNK, total), dtype=np.int64)
        digits = (ordinals[:, None] // powers[None, :]) % a
        counts = np.stack([(digits == j).sum(axis=1) for j in range(a)], axis=1)
        log_prob = np.where(counts > 0, counts * log_p, 0.0).sum(axis=1)
        means = np.clip(dist.mean_of_counts(counts, n), 0.0, 1.0)
        weights = np.exp(log_prob + n * kl_array(means, mu))
        partials.append(math.fsum(weights))
    return math.fsum(partials)


@dataclass(frozen=True)
class MomentReport:
    n: int
    xi: float
    lower_env: float
    upper_env: float
    sqrt_n: float
    two_sqrt_n: float
    c_n: float

    def violations(self) -> list[str]:
        out = []
        if not self.lower_env <= self.xi <= self.upper_env:
            out.append(f"n={self.n}: xi={self.xi!r} outside [{self.lower_env!r}, {self.upper_env!r}]")
        if self.n >= 2 and self.xi < self.sqrt_n:
            out.append(f"n={self.n}: xi={self.xi!r} < sqrt(n)")
        if self.n >= 8 and self.xi > self.two_sqrt_n:
            out.append(f"n={self.n}: xi={self.xi!r} > 2 sqrt(n)")
        return out

    def as_row(self) -> tuple:
        return (self.n, self.xi, self.lower_env, self.upper_env, self.sqrt_n, self.two_sqrt_n, self.c_n)


def moment_report(n: int, check: bool = True) -> MomentReport:
    """Collect ``xi(n)`` with its envelopes; raise if any bound fails and ``check``."""
    n = _check_n(n, minimum=2)
    lower, upper = envelopes(n)
    root = math.sqrt(n)
    report = MomentReport(n, xi_exact(n), lower, upper, root, 2.0 * root, c_n(n))
    if check:
        bad = report.violations()
        if bad:
            raise InvariantViolation("; ".join(bad))
    return report
