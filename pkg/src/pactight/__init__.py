"""Exponential-moment inequalities for binary KL and tightened PAC-Bayes certificates."""

from .kl_core import Probability, kl, kl_inv_lower, kl_inv_upper
from .moment import (
    CostGuardError,
    FiniteSupportDist,
    InvariantViolation,
    MomentReport,
    c_n,
    envelopes,
    moment_bernoulli_at_mu,
    moment_enumerated,
    moment_report,
    stirling_bounds,
    xi_exact,
    xi_exact_rational,
)
from .pacbayes import (
    Certificate,
    Scenario,
    Variant,
    adversarial_posterior,
    bound_rhs,
    certify,
    gibbs_family,
    kl_qp,
    optimize_posterior,
)

from .estimator import GibbsPACBayes

__version__ = "0.1.0"
