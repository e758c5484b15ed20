import math
from fractions import Fraction

import numpy as np
import pytest

from pactight.moment import (
    CostGuardError,
    FiniteSupportDist,
    InvariantViolation,
    c_n,
    envelopes,
    moment_bernoulli_at_mu,
    moment_enumerated,
    moment_report,
    stirling_bounds,
    xi_exact,
    xi_exact_rational,
)


def xi_by_fraction(n):
    """Independent rational oracle, no cost guard."""
    total = Fraction(0)
    for k in range(n + 1):
        total += math.comb(n, k) * Fraction(k, n) ** k * Fraction(n - k, n) ** (n - k)
    return total


class TestXi:
    @pytest.mark.parametrize("n,expected", [(1, 2.0), (2, 2.5), (3, 26 / 9)])
    def test_small_values(self, n, expected):
        assert xi_exact(n) == pytest.approx(expected, rel=1e-14)

    @pytest.mark.parametrize("n,expected", [(1, Fraction(2)), (2, Fraction(5, 2)), (3, Fraction(26, 9))])
    def test_rational(self, n, expected):
        assert xi_exact_rational(n) == expected

    def test_rational_guard(self):
        xi_exact_rational(200)
        with pytest.raises(CostGuardError):
            xi_exact_rational(201)

    @pytest.mark.parametrize("n", [1, 7, 20, 60])
    def test_rational_matches_fraction_oracle(self, n):
        assert xi_exact_rational(n) == xi_by_fraction(n)

    def test_float_matches_rational(self):
        for n in range(1, 61):
            exact = float(xi_exact_rational(n))
            assert abs(xi_exact(n) - exact) / exact <= 1e-10

    @pytest.mark.parametrize("n", [500, 2000])
    def test_large_n_against_exact(self, n):
        assert xi_exact(n) == pytest.approx(float(xi_by_fraction(n)), rel=1e-10)

    def test_n8_between_simple_bounds(self):
        assert math.sqrt(8) <= xi_exact(8) <= 2 * math.sqrt(8)

    def test_rejects_bad_n(self):
        with pytest.raises(ValueError):
            xi_exact(0)
        with pytest.raises(TypeError):
            xi_exact(2.5)


class TestCn:
    def test_small(self):
        assert c_n(2) == 1.0
        assert c_n(3) == pytest.approx(math.sqrt(2), rel=1e-15)
        assert c_n(4) == pytest.approx(2 / math.sqrt(3) + 0.5, rel=1e-15)

    def test_limit(self):
        assert abs(c_n(10**6) - math.pi) <= 0.01

    def test_range_and_monotone(self):
        grid = sorted({int(round(x)) for x in np.geomspace(2, 10**6, 60)})
        values = [c_n(n) for n in grid]
        assert all(1.0 <= v <= math.pi + 1e-12 for v in values)
        assert all(a <= b for a, b in zip(values, values[1:]))

    def test_rejects_n1(self):
        with pytest.raises(ValueError):
            c_n(1)


class TestEnvelopes:
    def test_n2(self):
        lower, upper = envelopes(2)
        assert upper == pytest.approx(math.exp(1 / 24) * math.sqrt(math.pi) + 2, rel=1e-15)
        assert lower == pytest.approx(math.exp(-1 / 6) / math.sqrt(math.pi) + 2, rel=1e-15)
        assert upper == pytest.approx(3.8479, abs=1e-4)
        assert lower == pytest.approx(2.4776, abs=1e-4)

    def test_containment_log_grid(self):
        for n in sorted({int(round(x)) for x in np.geomspace(2, 10**6, 25)}):
            lower, upper = envelopes(n)
            assert lower <= xi_exact(n) <= upper

    def test_report(self):
        r = moment_report(50)
        assert r.violations() == []
        assert r.sqrt_n == math.sqrt(50)

    def test_report_flags(self):
        from pactight.moment import MomentReport

        bad = MomentReport(10, 100.0, 1.0, 5.0, math.sqrt(10), 2 * math.sqrt(10), 2.0)
        assert len(bad.violations()) == 2
        with pytest.raises(ValueError):
            envelopes(1)


class TestStirling:
    @pytest.mark.parametrize("n", [1, 2, 10, 52, 170, 1000])
    def test_brackets_log_factorial(self, n):
        lo, hi = stirling_bounds(n)
        exact = math.log(math.factorial(n))  # big-integer factorial, exact log of an int
        assert lo < exact < hi
        assert hi - lo == pytest.approx(1 / (12 * n), rel=1e-12)

    def test_n1_values(self):
        lo, hi = stirling_bounds(1)
        assert lo == pytest.approx(0.5 * math.log(2 * math.pi) - 1, abs=1e-15)
        assert lo == pytest.approx(-0.0811, abs=1e-4)
        assert hi == pytest.approx(0.0023, abs=1e-4)


class TestMuIndependence:
    def test_examples(self):
        assert moment_bernoulli_at_mu(2, 0.3) == pytest.approx(2.5, abs=1e-9)
        assert moment_bernoulli_at_mu(5, 0.5) == pytest.approx(xi_exact(5), abs=1e-9)
        assert moment_bernoulli_at_mu(10, 0.93) == pytest.approx(xi_exact(10), abs=1e-8)

    @pytest.mark.parametrize("n", [2, 5, 10, 25, 200])
    def test_grid(self, n):
        xi = xi_exact(n)
        for mu in (0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99):
            assert abs(moment_bernoulli_at_mu(n, mu) - xi) <= 1e-8 * xi

    @pytest.mark.parametrize("mu", [0.0, 1.0])
    def test_trivial_mu_rejected(self, mu):
        with pytest.raises(ValueError):
            moment_bernoulli_at_mu(4, mu)


class TestEnumeration:
    def test_bernoulli_matches_xi(self):
        d = FiniteSupportDist.from_atoms([(0, 0.6), (1, 0.4)])
        assert moment_enumerated(d, 3) == pytest.approx(26 / 9, abs=1e-10)

    def test_point_mass(self):
        assert moment_enumerated(FiniteSupportDist((0.7,), (1.0,)), 5) == 1.0

    def test_three_atoms_dominated(self):
        d = FiniteSupportDist.from_atoms([(0, 1 / 3), (0.5, 1 / 3), (1, 1 / 3)])
        v = moment_enumerated(d, 4)
        assert 1.0 < v <= xi_exact(4)

    def test_against_python_loop(self):
        # slow, direct itertools oracle
        import itertools

        from pactight.kl_core import kl

        d = FiniteSupportDist.from_atoms([(0.1, 0.2), (0.6, 0.5), (0.9, 0.3)])
        n = 4
        mu = d.mean()
        terms = []
        for outcome in itertools.product(range(3), repeat=n):
            prob = math.prod(d.probs[i] for i in outcome)
            m = sum(d.values[i] for i in outcome) / n
            terms.append(prob * math.exp(n * kl(min(m, 1.0), mu)))
        assert moment_enumerated(d, n) == pytest.approx(math.fsum(terms), rel=1e-12)

    def test_cost_guard(self):
        d = FiniteSupportDist.from_atoms([(0, 0.5), (1, 0.5)])
        with pytest.raises(CostGuardError):
            moment_enumerated(d, 24)

    def test_random_dists_dominated(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            a = int(rng.integers(1, 5))
            values = rng.choice(np.linspace(0, 1, 21), size=a, replace=False)
            probs = rng.dirichlet(np.ones(a))
            probs[-1] = 1.0 - math.fsum(probs[:-1])
            d = FiniteSupportDist(tuple(values), tuple(probs))
            n = int(rng.integers(1, 7))
            assert moment_enumerated(d, n) <= xi_exact(n) * (1 + 1e-12)

    @pytest.mark.parametrize(
        "values,probs",
        [((0.2, 0.2), (0.5, 0.5)), ((0.1, 1.2), (0.5, 0.5)), ((0.1, 0.2), (0.5, 0.6)), ((), ())],
    )
    def test_invalid_dist(self, values, probs):
        with pytest.raises(ValueError):
            FiniteSupportDist(values, probs)


def test_invariant_violation_is_runtime_error():
    assert issubclass(InvariantViolation, RuntimeError)
