"""Binary relative entropy and its inversions.

All functions here are pure. Probabilities may carry their complement
``1 - value`` separately (see :class:`Probability`), which is what keeps the
upper inversion accurate when the answer sits within a few ulps of 1.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "Probability",
    "complement",
    "kl",
    "kl_array",
    "kl_inv_upper",
    "kl_inv_lower",
]

MAX_ITER = 200
TOL = 1e-12


class Probability(float):
    """A float in [0, 1].

    ``Probability(0.3)`` validates and behaves as a plain float.
    ``Probability.from_complement(c)`` builds ``1 - c`` while remembering
    ``c`` exactly, so values like ``1 - 1e-200`` keep their information even
    though the float itself rounds to 1.0.
    """

    __slots__ = ("_complement",)

    def __new__(cls, value):
        value = float(value)
        if not 0.0 <= value <= 1.0:  # also rejects NaN
            raise ValueError(f"probability must lie in [0, 1], got {value!r}")
        obj = super().__new__(cls, value)
        obj._complement = None
        return obj

    @classmethod
    def from_complement(cls, comp):
        comp = float(comp)
        if not 0.0 <= comp <= 1.0:
            raise ValueError(f"complement must lie in [0, 1], got {comp!r}")
        obj = float.__new__(cls, 1.0 - comp)
        obj._complement = comp
        return obj

    @property
    def complement(self) -> float:
        if self._complement is not None:
            return self._complement
        return 1.0 - float(self)

    def __repr__(self):
        return f"Probability({float(self)!r})"

    # pickling support for __slots__ on a float subclass
    def __reduce__(self):
        if self._complement is not None:
            return (Probability.from_complement, (self._complement,))
        return (Probability, (float(self),))


def complement(x) -> float:
    """``1 - x``, read from the stored complement when ``x`` carries one."""
    if isinstance(x, Probability):
        return x.complement
    return 1.0 - float(x)


def _as_prob(x, name):
    if isinstance(x, Probability):
        return x
    try:
        return Probability(x)
    except ValueError as exc:
        raise ValueError(f"{name}: {exc}") from None


def _xlogratio(a, b):
    # a*ln(a/b) with 0*ln(0/b) = 0
    if a == 0.0:
        return 0.0
    if b == 0.0:
        return math.inf
    return a * math.log(a / b)


def _kl_raw(p, pc, q, qc):
    # p, q with their complements pc, qc, all plain floats
    if p == q and pc == qc:
        return 0.0
    return max(_xlogratio(p, q) + _xlogratio(pc, qc), 0.0)


def kl(p, q) -> float:
    """Binary KL divergence ``kl(p, q)`` between Bernoulli(p) and Bernoulli(q).

    Returns ``math.inf`` exactly when ``q = 0 < p`` or ``q = 1 > p``.
    """
    p = _as_prob(p, "p")
    q = _as_prob(q, "q")
    return _kl_raw(float(p), complement(p), float(q), complement(q))


def kl_array(p, q):
    """Vectorised :func:`kl` over numpy arrays (no complement tracking)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    pc = 1.0 - p
    qc = 1.0 - q
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        a = np.where(p > 0, p * np.log(p / q), 0.0)
        b = np.where(pc > 0, pc * np.log(pc / qc), 0.0)
    out = np.maximum(a + b, 0.0)
    return np.where(p == q, 0.0, out)


def _check_budget(budget):
    budget = float(budget)
    if math.isnan(budget) or budget < 0:
        raise ValueError(f"budget must be non-negative, got {budget!r}")
    return budget


_LOG_TINY = math.log(5e-324)
_LOG_HALF = math.log(0.5)


def _bisect(inside, good, bad):
    """Shrink ``[good, bad]`` keeping ``inside(good)`` true; return the good end."""
    for _ in range(MAX_ITER):
        if abs(bad - good) <= TOL:
            break
        mid = 0.5 * (good + bad)
        if mid == good or mid == bad:
            break
        if inside(mid):
            good = mid
        else:
            bad = mid
    return good


def _expand_down(inside, good):
    # walk a log coordinate towards -inf until inside() fails; None if it never does
    bad = good - 1.0
    while inside(bad):
        good = bad
        if bad <= _LOG_TINY:
            return good, None
        bad = max(2.0 * bad - 1.0, _LOG_TINY)
    return good, bad


def _search_small(inside, start):
    good, bad = _expand_down(inside, start)
    return good if bad is None else _bisect(inside, good, bad)


def kl_inv_upper(q_hat, budget) -> Probability:
    """Largest ``eps >= q_hat`` with ``kl(q_hat, eps) <= budget``.

    Bisection over ``[q_hat, 1)`` in a log coordinate: ``log(eps)`` while
    ``eps <= 1/2`` and ``log(1 - eps)`` above, so answers within a few ulps
    of 1 are still resolved. In both coordinates ``|d kl / dt| <= 1``, so a
    bracket of width 1e-12 pins the divergence to 1e-12. The end of the
    bracket that satisfies the budget is returned.
    """
    q_hat = _as_prob(q_hat, "q_hat")
    budget = _check_budget(budget)
    if budget == 0.0:
        return q_hat
    if math.isinf(budget) or complement(q_hat) == 0.0:
        return Probability(1.0)
    if q_hat == 0.0:
        return Probability.from_complement(math.exp(-budget))
    p, pc = float(q_hat), complement(q_hat)

    if p < 0.5 and _kl_raw(p, pc, 0.5, 0.5) > budget:
        def inside_eps(t):
            e = math.exp(t)
            return _kl_raw(p, pc, e, 1.0 - e) <= budget

        start = math.log(p)
        t = _bisect(inside_eps, start, _LOG_HALF)
        return q_hat if t == start else Probability(max(math.exp(t), p))

    def inside_comp(t):
        c = math.exp(t)
        return _kl_raw(p, pc, 1.0 - c, c) <= budget

    start = math.log(min(pc, 0.5))
    t = _search_small(inside_comp, start)
    if t == start and pc <= 0.5:
        return q_hat
    return Probability.from_complement(min(math.exp(t), pc))


def kl_inv_lower(q_hat, budget) -> Probability:
    """Smallest ``eps <= q_hat`` with ``kl(q_hat, eps) <= budget``.

    Mirror of :func:`kl_inv_upper`.
    """
    q_hat = _as_prob(q_hat, "q_hat")
    budget = _check_budget(budget)
    if budget == 0.0:
        return q_hat
    if q_hat == 0.0 or budget >= kl(q_hat, 0.0):
        return Probability(0.0)
    if complement(q_hat) == 0.0:
        return Probability(math.exp(-budget))
    p, pc = float(q_hat), complement(q_hat)

    if p > 0.5 and _kl_raw(p, pc, 0.5, 0.5) > budget:
        def inside_comp(t):
            c = math.exp(t)
            return _kl_raw(p, pc, 1.0 - c, c) <= budget

        start = math.log(pc)
        t = _bisect(inside_comp, start, _LOG_HALF)
        return q_hat if t == start else Probability.from_complement(max(math.exp(t), pc))

    def inside_eps(t):
        e = math.exp(t)
        return _kl_raw(p, pc, e, 1.0 - e) <= budget

    start = math.log(min(p, 0.5))
    t = _search_small(inside_eps, start)
    if t == start and p <= 0.5:
        return q_hat
    return Probability(min(math.exp(t), p))
