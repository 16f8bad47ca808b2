import math

import numpy as np
import pytest
from scipy import integrate, special

from risinvest.errors import DivergenceError, ParameterError, QuadratureError
from risinvest.quadrature import (
    QuadratureConfig,
    adaptive_gk,
    central_difference,
    discrete_gauss,
    integrate_finite,
    integrate_semi_infinite,
    principal_value_symmetric,
    truncation_point,
)


class TestConfig:
    def test_tightened(self):
        cfg = QuadratureConfig().tightened(2.0)
        assert cfg.rel_tol == pytest.approx(5e-9)
        assert cfg.abs_tol == pytest.approx(5e-11)

    def test_invalid(self):
        with pytest.raises(ParameterError):
            QuadratureConfig(rel_tol=0.0)
        with pytest.raises(ParameterError):
            QuadratureConfig(tail_safety=0.5)


class TestFinite:
    def test_polynomial_exact(self):
        val, err = integrate_finite(lambda x: 3 * x ** 2, 0.0, 2.0)
        assert val == pytest.approx(8.0, rel=1e-14)

    def test_vector_valued(self):
        val, _ = integrate_finite(lambda x: np.stack([np.sin(x), np.cos(x)], axis=1), 0.0, math.pi)
        np.testing.assert_allclose(val, [2.0, 0.0], atol=1e-12)

    def test_peaked(self):
        val, _ = integrate_finite(lambda x: 1e-3 / (x ** 2 + 1e-6), -1.0, 1.0)
        assert val == pytest.approx(2 * math.atan(1e3), rel=1e-9)

    def test_budget_exhausted(self):
        with pytest.raises(QuadratureError) as info:
            adaptive_gk(lambda x: np.sin(1 / x), 1e-9, 1.0, max_intervals=20, rel_tol=1e-12, abs_tol=1e-14)
        assert info.value.estimate is not None

    def test_bad_interval(self):
        with pytest.raises(ParameterError):
            integrate_finite(np.sin, 1.0, 1.0)


class TestSemiInfinite:
    def test_exponential(self):
        val, _ = integrate_semi_infinite(lambda x: np.exp(-x), 0.0)
        assert val == pytest.approx(1.0, rel=1e-9)

    def test_algebraic_tail(self):
        val, _ = integrate_semi_infinite(lambda x: 1 / (1 + x) ** 2, 0.0)
        assert val == pytest.approx(1.0, rel=1e-8)

    def test_exponential_integral(self):
        x = 0.3
        val, _ = integrate_semi_infinite(lambda t: np.exp(-x * t) / (1 + t), 0.0)
        assert val == pytest.approx(math.exp(x) * special.exp1(x), rel=1e-8)

    def test_divergent(self):
        with pytest.raises(DivergenceError):
            integrate_semi_infinite(lambda x: 1 / (1 + x), 0.0)


class TestPrincipalValue:
    def test_folded_cauchy(self):
        # PV int_{-1}^{1} e^u / u du = 2 Shi(1); folded: (e^u - e^-u) / u
        val, _ = principal_value_symmetric(lambda u: 2 * np.sinh(u) / u, u_max=1.0)
        assert val == pytest.approx(2 * special.shichi(1.0)[0], rel=1e-9)

    def test_matches_scipy_cauchy_weight(self):
        f = lambda u: np.exp(-u * u) * (1 + u)
        ref = integrate.quad(f, -2.0, 2.0, weight="cauchy", wvar=0.0)[0]
        val, _ = principal_value_symmetric(lambda u: (f(u) - f(-u)) / u, u_max=2.0)
        assert val == pytest.approx(ref, rel=1e-9)


class TestHelpers:
    def test_truncation_point(self):
        cfg = QuadratureConfig(abs_tol=1e-10, tail_safety=1.0)
        u = truncation_point(4.0, 2.0, cfg)
        assert math.exp(-2.0 * u ** 0.5) == pytest.approx(1e-10)

    def test_central_difference(self):
        assert central_difference(np.exp, 1.0, 1e-5) == pytest.approx(math.e, rel=1e-9)


class TestDiscreteGauss:
    def test_moments(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(-3, 5, 500)
        w = rng.uniform(0, 1, 500)
        nodes, weights = discrete_gauss(x, w, 8)
        assert np.all(weights > 0)
        for k in range(16):
            np.testing.assert_allclose(weights @ nodes ** k, w @ x ** k, rtol=1e-9)

    def test_small_measure_unchanged(self):
        nodes, weights = discrete_gauss([1.0, 2.0], [0.5, 0.5], 4)
        np.testing.assert_array_equal(nodes, [1.0, 2.0])
