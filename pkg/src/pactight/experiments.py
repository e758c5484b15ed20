"""Seeded experiments checking the probabilistic claims.

Randomness comes from numpy's Philox4x64 counter-based generator. Trial
``t`` of an experiment with master seed ``s`` draws from the stream seeded
by ``SeedSequence(s, spawn_key=(t,))``, so a trial's outcome depends only on
``(s, t)`` and not on how trials are scheduled across workers.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from . import _jsonio
from .kl_core import kl, kl_array
from .moment import FiniteSupportDist, InvariantViolation, moment_bernoulli_at_mu, xi_exact
from .pacbayes import (
    Scenario,
    Variant,
    _optimize,
    adversarial_posterior,
    bound_rhs,
    check_distribution,
    empirical_risks,
    kl_qp,
    true_risks,
)

log = logging.getLogger(__name__)

__all__ = [
    "RNG_ALGORITHM",
    "STRATEGIES",
    "ExperimentConfig",
    "ViolationReport",
    "trial_generator",
    "draw_sample",
    "violation_experiment",
    "mc_moment_estimate",
    "exact_lower_bound_experiment",
    "reference_scenario",
    "reference_config",
]

RNG_ALGORITHM = "numpy.Philox4x64-10;SeedSequence(seed,spawn_key=(trial,));v1"
STRATEGIES = ("fixed", "optimized", "adversarial")
QUANTILES = (0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99)
_MC_CHUNK = 1 << 16


def trial_generator(seed: int, trial: Optional[int] = None) -> np.random.Generator:
    """Generator for ``trial`` under master ``seed`` (or the master stream itself)."""
    spawn_key = () if trial is None else (int(trial),)
    ss = np.random.SeedSequence(int(seed), spawn_key=spawn_key)
    return np.random.Generator(np.random.Philox(ss))


def _cdf(probs):
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    return cdf


def draw_sample(scenario: Scenario, rng: np.random.Generator) -> np.ndarray:
    """``n`` iid indices from ``D`` by inverse CDF; consumes exactly ``n`` uniforms."""
    u = rng.random(scenario.n)
    return np.searchsorted(_cdf(scenario.data_dist), u, side="right")


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    scenario: Scenario
    trials: int
    seed: int
    posterior_strategy: str = "adversarial"
    variant: Variant = Variant.MAURER
    posterior: Optional[np.ndarray] = None

    def __post_init__(self):
        if int(self.trials) != self.trials or self.trials < 1:
            raise ValueError("trials must be a positive integer")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.posterior_strategy not in STRATEGIES:
            raise ValueError(f"posterior_strategy must be one of {STRATEGIES}")
        object.__setattr__(self, "trials", int(self.trials))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.posterior_strategy == "fixed":
            q = self.scenario.prior if self.posterior is None else self.posterior
            object.__setattr__(self, "posterior", check_distribution(q, "posterior", self.scenario.h_size))
        elif self.posterior is not None:
            raise ValueError("posterior weights are only meaningful for the 'fixed' strategy")

    @classmethod
    def from_dict(cls, data: dict, base_dir=None) -> "ExperimentConfig":
        unknown = set(data) - {"scenario", "trials", "seed", "posterior_strategy", "variant", "posterior"}
        if unknown:
            raise ValueError(f"unknown config fields: {', '.join(sorted(unknown))}")
        for key in ("scenario", "trials", "seed"):
            if key not in data:
                raise ValueError(f"config is missing field {key!r}")
        scenario = data["scenario"]
        if isinstance(scenario, str):
            path = Path(scenario)
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            scenario = Scenario.from_json(path)
        else:
            scenario = Scenario.from_dict(scenario)
        return cls(
            scenario=scenario,
            trials=data["trials"],
            seed=data["seed"],
            posterior_strategy=data.get("posterior_strategy", "adversarial"),
            variant=data.get("variant", "maurer"),
            posterior=data.get("posterior"),
        )

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        path = Path(path)
        return cls.from_dict(_jsonio.loads(path.read_text()), base_dir=path.parent)

    def to_dict(self) -> dict:
        out = {
            "scenario": self.scenario.to_dict(),
            "trials": self.trials,
            "seed": self.seed,
            "posterior_strategy": self.posterior_strategy,
            "variant": self.variant.value,
        }
        if self.posterior is not None:
            out["posterior"] = np.asarray(self.posterior).tolist()
        return out


@dataclass(frozen=True)
class ViolationReport:
    trials: int
    violations: int
    rate: float
    delta: float
    per_trial_margin_quantiles: list = field(default_factory=list)
    config: Optional[ExperimentConfig] = None

    @property
    def band(self) -> float:
        """``delta`` plus three binomial standard deviations."""
        return self.delta + 3.0 * math.sqrt(self.delta * (1.0 - self.delta) / self.trials)

    def within_band(self) -> bool:
        return self.rate <= self.band

    def to_dict(self) -> dict:
        out = {
            "trials": self.trials,
            "violations": self.violations,
            "rate": self.rate,
            "delta": self.delta,
            "band": self.band,
            "per_trial_margin_quantiles": [[q, v] for q, v in self.per_trial_margin_quantiles],
            "rng_algorithm": RNG_ALGORITHM,
        }
        if self.config is not None:
            out["config"] = self.config.to_dict()
        return out

    def to_json(self) -> str:
        return _jsonio.dumps(self.to_dict())


def _posterior_for(config, emp, sample):
    sc = config.scenario
    if config.posterior_strategy == "fixed":
        return config.posterior
    if config.posterior_strategy == "adversarial":
        return adversarial_posterior(sc, sample)
    _, q, _ = _optimize(sc.prior, emp, sc.n, sc.delta, config.variant)
    return q


def _run_trial(config: ExperimentConfig, t: int) -> float:
    sc = config.scenario
    sample = draw_sample(sc, trial_generator(config.seed, t))
    emp = empirical_risks(sc, sample)
    tr = true_risks(sc)
    q = _posterior_for(config, emp, sample)
    q_s = min(max(float(np.dot(q, emp)), 0.0), 1.0)
    q_d = min(max(float(np.dot(q, tr)), 0.0), 1.0)
    rhs = bound_rhs(kl_qp(q, sc.prior), sc.n, sc.delta, config.variant)
    return rhs - kl(q_s, q_d)


def nearest_rank(sorted_values, q: float) -> float:
    """Nearest-rank quantile of an ascending sequence."""
    rank = max(1, math.ceil(q * len(sorted_values)))
    return float(sorted_values[rank - 1])


def violation_experiment(config: ExperimentConfig, workers: int = 1) -> ViolationReport:
    """Count samples on which ``kl(Q_S(S), Q_S(D))`` exceeds the bound.

    The margin of a trial is ``rhs - kl(Q_S(S), Q_S(D))``; a violation is a
    strictly negative margin. Output is identical for any ``workers``.
    """
    sc = config.scenario
    bound_rhs(0.0, sc.n, sc.delta, config.variant)
    workers = max(1, int(workers))
    blocks = np.array_split(np.arange(config.trials), workers)

    def run_block(block):
        return sorted(_run_trial(config, int(t)) for t in block)

    if workers == 1:
        parts = [run_block(blocks[0])]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run_block, blocks))
    margins = sorted(m for part in parts for m in part)
    violations = sum(1 for m in margins if m < 0)
    quantiles = [(q, nearest_rank(margins, q)) for q in QUANTILES]
    if quantiles[0][1] < 0:
        log.warning("1st-percentile margin is negative (%r)", quantiles[0][1])
    return ViolationReport(
        trials=config.trials,
        violations=violations,
        rate=violations / config.trials,
        delta=sc.delta,
        per_trial_margin_quantiles=quantiles,
        config=config,
    )


def mc_moment_estimate(dist: FiniteSupportDist, n: int, trials: int, seed: int) -> tuple[float, float]:
    """Monte Carlo estimate of ``E[exp(n kl(M(X), mu))]`` and its standard error.

    The integrand is heavy tailed, so at feasible trial counts the estimate
    tends to fall short of the true moment even though it is consistent.
    """
    n, trials = int(n), int(trials)
    if n < 1 or trials < 1:
        raise ValueError("n and trials must be positive")
    mu = dist.mean()
    rng = trial_generator(seed)
    cdf = _cdf(np.asarray(dist.probs))
    a = len(dist.values)
    sums, sq_sums = [], []
    done = 0
    while done < trials:
        m = min(_MC_CHUNK, trials - done)
        idx = np.searchsorted(cdf, rng.random((m, n)), side="right")
        counts = np.stack([(idx == j).sum(axis=1) for j in range(a)], axis=1)
        means = np.clip(dist.mean_of_counts(counts, n), 0.0, 1.0)
        vals = np.exp(n * kl_array(means, mu))
        sums.append(math.fsum(vals))
        sq_sums.append(math.fsum(vals * vals))
        done += m
    mean = math.fsum(sums) / trials
    if trials == 1:
        return mean, 0.0
    var = max(math.fsum(sq_sums) / trials - mean * mean, 0.0) * trials / (trials - 1)
    return mean, math.sqrt(var / trials)


def exact_lower_bound_experiment(scenario: Scenario) -> float:
    """``E_{h~P} E_S[exp(n kl(M(h(S)), h(D)))]`` in closed form.

    Every inner expectation equals ``xi(n)`` whatever the true risk, so the
    average over the prior does too. One inner expectation is recomputed by
    the direct binomial sum as a cross-check, and the result is checked
    against ``sqrt(n)``.
    """
    if not scenario.is_binary():
        raise ValueError("losses must be {0, 1}-valued")
    tr = true_risks(scenario)
    if np.any((tr <= 0) | (tr >= 1)):
        raise ValueError("every hypothesis must have true risk strictly inside (0, 1)")
    n = scenario.n
    xi = xi_exact(n)
    result = math.fsum(scenario.prior * xi)
    h = int(np.flatnonzero(scenario.prior > 0)[0])
    direct = moment_bernoulli_at_mu(n, tr[h])
    if abs(direct - xi) > 1e-9 * xi:
        raise InvariantViolation(f"direct sum {direct!r} differs from xi({n}) = {xi!r}")
    if n >= 2 and result < math.sqrt(n):
        raise InvariantViolation(f"moment {result!r} is below sqrt({n})")
    return result


def reference_scenario() -> Scenario:
    """The shipped 12-point, 6-hypothesis reference scenario."""
    return Scenario.from_json(_data_path("reference_scenario.json"))


def reference_config(strategy: str) -> ExperimentConfig:
    return ExperimentConfig.from_json(_data_path(f"reference_{strategy}.json"))


def _data_path(name):
    return Path(str(resources.files("pactight") / "data" / name))
