"""PAC-Bayes certificates for Gibbs classifiers over finite hypothesis sets.

A :class:`Scenario` fixes a finite data space with law ``D``, a loss table
``h(z)`` for every hypothesis, a prior ``P``, the sample size and the
confidence level. Given a sample ``S`` and a posterior ``Q`` the module
computes the Gibbs risks ``Q(S)`` and ``Q(D)``, ``KL(Q, P)``, the right-hand
side of either bound variant and the risk upper bound obtained by inverting
the binary KL.

Two bound variants are supported:

``maurer``
    ``(KL(Q,P) + ln(1/delta) + ln(2 sqrt(n))) / n``, valid for ``n >= 8``.
``mcallester``
    ``(KL(Q,P) + ln(1/delta) + ln(2 n)) / (n - 1)``, valid for ``n >= 2``.
"""

from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from . import _jsonio
from .kl_core import Probability, kl_array, kl_inv_upper

__all__ = [
    "Variant",
    "Scenario",
    "Certificate",
    "check_sample",
    "check_distribution",
    "true_risk",
    "true_risks",
    "empirical_risk",
    "empirical_risks",
    "gibbs_true_risk",
    "gibbs_empirical_risk",
    "kl_qp",
    "bound_rhs",
    "certify",
    "certify_from_risks",
    "gibbs_family",
    "gibbs_weights",
    "exponential_tilt",
    "optimize_posterior",
    "adversarial_posterior",
    "psi",
    "jensen_sides",
]

SUM_TOL = 1e-12
LAMBDA_MAX = 1e4
GRID_POINTS = 64
GOLDEN_TOL = 1e-6


class Variant(str, Enum):
    MAURER = "maurer"
    MCALLESTER = "mcallester"

    @property
    def min_n(self) -> int:
        return 8 if self is Variant.MAURER else 2


def check_distribution(weights, name="distribution", size=None) -> np.ndarray:
    """Validate a probability vector: finite, non-negative, sums to 1 within 1e-12."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-d vector")
    if size is not None and w.size != size:
        raise ValueError(f"{name} has length {w.size}, expected {size}")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError(f"{name} must be finite and non-negative")
    total = math.fsum(w)
    if abs(total - 1.0) > SUM_TOL:
        raise ValueError(f"{name} sums to {total!r}, expected 1 within {SUM_TOL}")
    return w


@dataclass(frozen=True, eq=False)
class Scenario:
    """Finite learning problem: ``D`` on Z, losses ``h(z)``, prior ``P`` on H."""

    z_size: int
    data_dist: np.ndarray
    loss_table: np.ndarray
    prior: np.ndarray
    n: int
    delta: float

    def __post_init__(self):
        z = int(self.z_size)
        if z != self.z_size or z < 1:
            raise ValueError("z_size must be a positive integer")
        d = check_distribution(self.data_dist, "data_dist", z)
        losses = np.array(self.loss_table, dtype=float)
        if losses.ndim != 2 or losses.shape[0] < 1 or losses.shape[1] != z:
            raise ValueError(f"loss_table must have shape (|H|, {z})")
        if not np.all((losses >= 0) & (losses <= 1)):
            raise ValueError("loss_table entries must lie in [0, 1]")
        p = check_distribution(self.prior, "prior", losses.shape[0])
        n = int(self.n)
        if n != self.n or n < 1:
            raise ValueError("n must be a positive integer")
        delta = float(self.delta)
        if not 0.0 < delta < 1.0:
            raise ValueError(f"delta must lie strictly in (0, 1), got {delta!r}")
        d = d / math.fsum(d)
        p = p / math.fsum(p)
        for arr in (d, losses, p):
            arr.setflags(write=False)
        object.__setattr__(self, "z_size", z)
        object.__setattr__(self, "data_dist", d)
        object.__setattr__(self, "loss_table", losses)
        object.__setattr__(self, "prior", p)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "delta", delta)

    @property
    def h_size(self) -> int:
        return self.loss_table.shape[0]

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        required = ("z_size", "data_dist", "loss_table", "prior", "n", "delta")
        missing = [k for k in required if k not in data]
        if missing:
            raise ValueError(f"scenario is missing fields: {', '.join(missing)}")
        return cls(**{k: data[k] for k in required})

    @classmethod
    def from_json(cls, path) -> "Scenario":
        return cls.from_dict(_jsonio.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {
            "z_size": self.z_size,
            "data_dist": self.data_dist.tolist(),
            "loss_table": self.loss_table.tolist(),
            "prior": self.prior.tolist(),
            "n": self.n,
            "delta": self.delta,
        }

    def digest(self) -> str:
        """SHA-256 hex digest of the canonical JSON form."""
        return hashlib.sha256(_jsonio.dumps(self.to_dict()).encode()).hexdigest()

    def is_binary(self) -> bool:
        return bool(np.all((self.loss_table == 0) | (self.loss_table == 1)))


def check_sample(sample, scenario: Scenario) -> np.ndarray:
    s = np.asarray(sample)
    if s.ndim != 1 or s.size == 0:
        raise ValueError("sample must be a non-empty 1-d index vector")
    if not np.issubdtype(s.dtype, np.integer):
        if not np.all(np.equal(np.mod(s, 1), 0)):
            raise ValueError("sample indices must be integers")
        s = s.astype(np.int64)
    if np.any(s < 0) or np.any(s >= scenario.z_size):
        raise ValueError(f"sample indices must lie in [0, {scenario.z_size})")
    return s


def _check_h(h_index, scenario):
    if not 0 <= h_index < scenario.h_size:
        raise IndexError(f"hypothesis index {h_index} out of range [0, {scenario.h_size})")
    return int(h_index)


def _frequencies(sample, scenario):
    s = check_sample(sample, scenario)
    return np.bincount(s, minlength=scenario.z_size) / s.size


def true_risks(scenario: Scenario) -> np.ndarray:
    return np.clip(scenario.loss_table @ scenario.data_dist, 0.0, 1.0)


def empirical_risks(scenario: Scenario, sample) -> np.ndarray:
    # frequency form: a sample whose frequencies equal D reproduces true_risks bit for bit
    return np.clip(scenario.loss_table @ _frequencies(sample, scenario), 0.0, 1.0)


def true_risk(h_index: int, scenario: Scenario) -> Probability:
    h = _check_h(h_index, scenario)
    return Probability(true_risks(scenario)[h])


def empirical_risk(h_index: int, scenario: Scenario, sample) -> Probability:
    h = _check_h(h_index, scenario)
    return Probability(empirical_risks(scenario, sample)[h])


def _gibbs(weights, risks):
    return Probability(min(max(float(np.dot(weights, risks)), 0.0), 1.0))


def gibbs_true_risk(posterior, scenario: Scenario) -> Probability:
    q = check_distribution(posterior, "posterior", scenario.h_size)
    return _gibbs(q, true_risks(scenario))


def gibbs_empirical_risk(posterior, scenario: Scenario, sample) -> Probability:
    q = check_distribution(posterior, "posterior", scenario.h_size)
    return _gibbs(q, empirical_risks(scenario, sample))


def kl_qp(posterior, prior) -> float:
    """``KL(Q, P)``; infinite when Q puts mass where P has none."""
    q = np.asarray(posterior, dtype=float)
    p = np.asarray(prior, dtype=float)
    if q.shape != p.shape:
        raise ValueError(f"posterior shape {q.shape} does not match prior shape {p.shape}")
    support = q > 0
    if np.any(p[support] == 0):
        return math.inf
    qs, ps = q[support], p[support]
    return max(math.fsum(qs * np.log(qs / ps)), 0.0)


def bound_rhs(kl_value: float, n: int, delta: float, variant) -> float:
    """Right-hand side of the chosen bound; ``inf`` when ``kl_value`` is."""
    variant = Variant(variant)
    n = int(n)
    if n < variant.min_n:
        raise ValueError(f"the {variant.value} bound requires n >= {variant.min_n}, got n={n}")
    delta = float(delta)
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie strictly in (0, 1), got {delta!r}")
    kl_value = float(kl_value)
    if math.isnan(kl_value) or kl_value < 0:
        raise ValueError(f"KL must be non-negative, got {kl_value!r}")
    if math.isinf(kl_value):
        return math.inf
    if variant is Variant.MAURER:
        return (kl_value + math.log(2.0 * math.sqrt(n) / delta)) / n
    return (kl_value + math.log(2.0 * n / delta)) / (n - 1)


@dataclass(frozen=True)
class Certificate:
    empirical_gibbs_risk: Probability
    kl_qp: float
    variant: Variant
    rhs: float
    risk_upper: Probability
    true_gibbs_risk: Optional[Probability] = None

    def to_dict(self, scenario_digest: Optional[str] = None) -> dict:
        out = {
            "empirical_gibbs_risk": float(self.empirical_gibbs_risk),
            "kl_qp": self.kl_qp,
            "variant": self.variant.value,
            "rhs": self.rhs,
            "risk_upper": float(self.risk_upper),
            "true_gibbs_risk": None if self.true_gibbs_risk is None else float(self.true_gibbs_risk),
        }
        if scenario_digest is not None:
            out["scenario_digest"] = scenario_digest
        return out


def certify_from_risks(posterior, prior, emp_risks, n, delta, variant, true_risks_=None) -> Certificate:
    """Certificate from per-hypothesis empirical risks; the core of :func:`certify`."""
    variant = Variant(variant)
    q = np.asarray(posterior, dtype=float)
    q_s = _gibbs(q, emp_risks)
    divergence = kl_qp(q, prior)
    rhs = bound_rhs(divergence, n, delta, variant)
    q_d = None if true_risks_ is None else _gibbs(q, true_risks_)
    return Certificate(q_s, divergence, variant, rhs, kl_inv_upper(q_s, rhs), q_d)


def certify(posterior, scenario: Scenario, sample, variant) -> Certificate:
    """Bound the true Gibbs risk of ``posterior`` from the sample."""
    q = check_distribution(posterior, "posterior", scenario.h_size)
    return certify_from_risks(
        q,
        scenario.prior,
        empirical_risks(scenario, sample),
        scenario.n,
        scenario.delta,
        variant,
        true_risks(scenario),
    )


def exponential_tilt(prior, exponents) -> np.ndarray:
    """Normalise ``P(h) exp(e(h))`` after shifting ``e`` by its max on the prior's support.

    If some supported exponent is ``+inf`` the mass goes, in proportion to
    the prior, to those hypotheses only.
    """
    p = np.asarray(prior, dtype=float)
    e = np.asarray(exponents, dtype=float)
    support = p > 0
    top = e[support].max()
    if math.isinf(top) and top > 0:
        w = np.where(support & np.isposinf(e), p, 0.0)
    else:
        with np.errstate(invalid="ignore"):
            w = np.where(support, p * np.exp(e - top), 0.0)
    return w / math.fsum(w)


def gibbs_weights(prior, emp_risks, n, lam) -> np.ndarray:
    """``Q(h) ∝ P(h) exp(-lam n r(h))``; exactly the prior at ``lam = 0``."""
    lam = float(lam)
    if math.isnan(lam) or lam < 0:
        raise ValueError(f"lambda must be non-negative, got {lam!r}")
    p = np.asarray(prior, dtype=float)
    if lam == 0.0:
        return p.copy()
    return exponential_tilt(p, -lam * n * np.asarray(emp_risks, dtype=float))


def gibbs_family(prior, scenario: Scenario, sample, lam) -> np.ndarray:
    p = check_distribution(prior, "prior", scenario.h_size)
    return gibbs_weights(p, empirical_risks(scenario, sample), scenario.n, lam)


def _golden_section(f, a, b, tol):
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def _optimize(prior, emp_risks, n, delta, variant, true_risks_=None):
    variant = Variant(variant)
    bound_rhs(0.0, n, delta, variant)  # gate before any work

    def objective(u):
        q = gibbs_weights(prior, emp_risks, n, math.expm1(u))
        return float(certify_from_risks(q, prior, emp_risks, n, delta, variant).risk_upper)

    grid = np.linspace(0.0, math.log1p(LAMBDA_MAX), GRID_POINTS)
    values = [objective(u) for u in grid]
    best = int(np.argmin(values))  # first minimum: ties go to the smaller lambda
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, GRID_POINTS - 1)]
    u_star, f_star = float(grid[best]), values[best]
    u_gs, f_gs = _golden_section(objective, lo, hi, GOLDEN_TOL)
    if f_gs < f_star:
        u_star, f_star = u_gs, f_gs
    lam = math.expm1(u_star)
    q = gibbs_weights(prior, emp_risks, n, lam)
    cert = certify_from_risks(q, prior, emp_risks, n, delta, variant, true_risks_)
    return lam, q, cert


def optimize_posterior(scenario: Scenario, sample, variant):
    """Pick the Gibbs temperature minimising the certified risk bound.

    Searches ``u = ln(1 + lambda)`` on ``[0, ln(1 + 1e4)]``: a 64-point grid
    followed by golden-section refinement to 1e-6 around the best grid
    point. Returns ``(lambda_star, posterior, certificate)``.
    """
    return _optimize(
        scenario.prior,
        empirical_risks(scenario, sample),
        scenario.n,
        scenario.delta,
        variant,
        true_risks(scenario),
    )


def _adversarial_exponents(scenario, sample):
    return scenario.n * kl_array(empirical_risks(scenario, sample), true_risks(scenario))


def adversarial_posterior(scenario: Scenario, sample) -> np.ndarray:
    """Posterior with density ``exp(n kl(M(h(S)), h(D)))`` relative to the prior.

    Makes ``n kl - ln(dQ/dP)`` the same for every hypothesis in the prior's
    support, so the change-of-measure step holds with equality.
    """
    tr = true_risks(scenario)
    if scenario.is_binary() and np.any((tr <= 0) | (tr >= 1)):
        warnings.warn("some hypotheses induce trivial Bernoulli losses", RuntimeWarning, stacklevel=2)
    e = _adversarial_exponents(scenario, sample)
    if np.any(np.isposinf(e[scenario.prior > 0])):
        warnings.warn("infinite exponent: mass placed on the divergent hypotheses", RuntimeWarning, stacklevel=2)
    return exponential_tilt(scenario.prior, e)


def psi(posterior, scenario: Scenario, sample) -> np.ndarray:
    """``n kl(M(h(S)), h(D)) - ln(dQ/dP)(h)`` on the support of both P and Q."""
    q = np.asarray(posterior, dtype=float)
    p = scenario.prior
    mask = (p > 0) & (q > 0)
    e = _adversarial_exponents(scenario, sample)
    return e[mask] - (np.log(q[mask]) - np.log(p[mask]))


def jensen_sides(posterior, scenario: Scenario, sample) -> tuple[float, float]:
    """Both sides of ``E_Q[n kl - ln dQ/dP] <= ln E_P[exp(n kl)]``."""
    q = check_distribution(posterior, "posterior", scenario.h_size)
    p = scenario.prior
    mask = q > 0
    if np.any(p[mask] == 0):
        raise ValueError("posterior is not absolutely continuous w.r.t. the prior")
    e = _adversarial_exponents(scenario, sample)
    lhs = math.fsum(q[mask] * (e[mask] - np.log(q[mask] / p[mask])))
    sup = p > 0
    rhs = float(logsumexp(e[sup], b=p[sup]))
    return lhs, rhs
