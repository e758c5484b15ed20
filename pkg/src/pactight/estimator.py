"""Scikit-learn style wrapper around the Gibbs posterior and its certificate."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted, check_random_state

from .pacbayes import Variant, _optimize, certify_from_risks, check_distribution, gibbs_weights


class GibbsPACBayes(BaseEstimator):
    """Exponential-weights Gibbs posterior with a PAC-Bayes risk certificate.

    ``fit`` takes the loss matrix ``X`` of shape ``(n_samples, n_hypotheses)``
    whose entry ``X[i, h]`` is the loss in [0, 1] of hypothesis ``h`` on the
    i-th sample point. Each row must be an independent draw from the data
    distribution for the certificate to hold.

    Parameters
    ----------
    variant : {"maurer", "mcallester"}
        Bound used for the certificate.
    delta : float
        Confidence parameter in (0, 1).
    prior : array-like of shape (n_hypotheses,), optional
        Prior weights; uniform when omitted. Must not depend on ``X``.
    lam : float or None
        Gibbs temperature. ``None`` chooses the value that minimises the
        certified risk bound.

    Attributes
    ----------
    empirical_risks_ : ndarray of shape (n_hypotheses,)
    posterior_ : ndarray of shape (n_hypotheses,)
    lambda_ : float
    certificate_ : Certificate
    """

    def __init__(self, variant="maurer", delta=0.05, prior=None, lam=None):
        self.variant = variant
        self.delta = delta
        self.prior = prior
        self.lam = lam

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64, ensure_min_samples=1)
        if np.any((X < 0) | (X > 1)):
            raise ValueError("losses must lie in [0, 1]")
        n, h = X.shape
        prior = np.full(h, 1.0 / h) if self.prior is None else check_distribution(self.prior, "prior", h)
        variant = Variant(self.variant)
        risks = X.mean(axis=0)
        if self.lam is None:
            lam, q, cert = _optimize(prior, risks, n, self.delta, variant)
        else:
            lam = float(self.lam)
            q = gibbs_weights(prior, risks, n, lam)
            cert = certify_from_risks(q, prior, risks, n, self.delta, variant)
        self.n_features_in_ = h
        self.prior_ = prior
        self.empirical_risks_ = risks
        self.lambda_ = lam
        self.posterior_ = q
        self.certificate_ = cert
        return self

    @property
    def risk_bound_(self) -> float:
        check_is_fitted(self, "certificate_")
        return float(self.certificate_.risk_upper)

    def transform(self, X):
        """Expected Gibbs loss of each row of a loss matrix."""
        check_is_fitted(self, "posterior_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} hypotheses, expected {self.n_features_in_}")
        return X @ self.posterior_

    def score(self, X, y=None):
        """One minus the mean Gibbs loss on ``X``."""
        return 1.0 - float(np.mean(self.transform(X)))

    def sample_hypotheses(self, size=1, random_state=None):
        """Draw hypothesis indices from the posterior, as a Gibbs classifier does."""
        check_is_fitted(self, "posterior_")
        rng = check_random_state(random_state)
        return rng.choice(self.n_features_in_, size=size, p=self.posterior_)
