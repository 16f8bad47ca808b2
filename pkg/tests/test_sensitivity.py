import math

import numpy as np
import pytest

from risinvest.coverage import b_upsilon_plus, serving_point
from risinvest.errors import ParameterError
from risinvest.laplace import b_upsilon, exponent_D_RIS
from risinvest.model import Scenario, SystemParams, pathloss
from risinvest.sensitivity import (
    GainPair,
    d_b_upsilon_d_lambda_bs,
    d_b_upsilon_d_lambda_ris,
    d_b_upsilon_plus_d_lambda,
    finite_difference_gains,
    rate_and_gains,
)


def _fd(f, x, rel=1e-4):
    h = rel * x
    return (f(x + h) - f(x - h)) / (2 * h)


class TestTransformDerivatives:
    def test_ris_derivative_is_b_times_exponent(self, base_params):
        p = base_params
        s = (0.7 - 0.4j) / (p.p0 * float(pathloss(100.0, p)))
        got = d_b_upsilon_d_lambda_ris(s, 1.0, 100.0, p)
        ref = b_upsilon(s, 1.0, 100.0, p) * exponent_D_RIS(s, 100.0, p)
        np.testing.assert_allclose(got, ref, rtol=1e-10)

    def test_bs_derivative_throughput(self, base_params):
        p = base_params
        s = (1.0 - 2.0j) / (p.p0 * float(pathloss(100.0, p)))
        got = d_b_upsilon_d_lambda_bs(s, 1.0, 100.0, p)
        ref = _fd(lambda lam: b_upsilon(s, 1.0, 100.0, p.replace(lambda_bs=lam)), p.lambda_bs)
        np.testing.assert_allclose(got, ref, rtol=1e-6)

    @pytest.mark.parametrize("k", [1.0, 2.0])
    def test_bs_derivative_hole_both_channels(self, k):
        p = SystemParams(scenario=Scenario.COVERAGE_HOLE, penalty_k=k)
        _, s0, _ = serving_point(None, p)
        u = 0.8 * s0   # the imaginary offset stays put, s follows r_H

        def moving(lam):
            q = p.replace(lambda_bs=lam)
            _, s, _ = serving_point(None, q)
            return b_upsilon(s - 1j * u, 1.0, None, q)

        got = d_b_upsilon_d_lambda_bs(s0 - 1j * u, 1.0, None, p, s_channel=True)
        np.testing.assert_allclose(got, _fd(moving, p.lambda_bs), rtol=1e-6)

    def test_bs_derivative_hole_distance_channel_only(self):
        p = SystemParams(scenario=Scenario.COVERAGE_HOLE, penalty_k=2.0)
        _, s, _ = serving_point(None, p)
        z = -1j * s * 0.6   # fixed argument: only r_H moves
        got = d_b_upsilon_d_lambda_bs(z, 1.0, None, p, s_channel=False)
        ref = _fd(lambda lam: b_upsilon(z, 1.0, None, p.replace(lambda_bs=lam)), p.lambda_bs)
        np.testing.assert_allclose(got, ref, rtol=1e-6)

    def test_b_plus_derivatives(self, base_params, fast_cfg):
        p = base_params
        r = 100.0
        s = 1.0 / (p.p0 * float(pathloss(r, p)))
        for wrt, field in (("bs", "lambda_bs"), ("ris", "lambda_ris")):
            got = d_b_upsilon_plus_d_lambda(s, 1.0, r, p, wrt, fast_cfg)
            ref = _fd(lambda lam: b_upsilon_plus(s, 1.0, r, p.replace(**{field: lam}), fast_cfg),
                      getattr(p, field), 1e-3)
            assert got == pytest.approx(ref, rel=1e-3)

    def test_b_plus_derivative_at_zero(self, base_params):
        assert d_b_upsilon_plus_d_lambda(0.0, 1.0, 100.0, base_params) == 0.0
        with pytest.raises(ParameterError):
            d_b_upsilon_plus_d_lambda(-1.0, 1.0, 100.0, base_params)


class TestRateGains:
    def test_gain_pair_validation(self):
        with pytest.raises(ParameterError):
            GainPair(math.nan, 1.0)

    def test_throughput_matches_finite_differences(self, fast_cfg):
        p = SystemParams(lambda_bs=2e-5)
        got = rate_and_gains(p, fast_cfg)
        ref = finite_difference_gains(p, fast_cfg)
        assert got.tau == pytest.approx(ref.tau, rel=1e-9)
        assert got.d_tau_d_lambda_bs == pytest.approx(ref.d_tau_d_lambda_bs, rel=1e-3)
        assert got.d_tau_d_lambda_ris == pytest.approx(ref.d_tau_d_lambda_ris, rel=1e-3)

    def test_coverage_hole_matches_finite_differences(self, fast_cfg):
        p = SystemParams(scenario=Scenario.COVERAGE_HOLE, penalty_k=2.0)
        got = rate_and_gains(p, fast_cfg)
        ref = finite_difference_gains(p, fast_cfg)
        assert got.d_tau_d_lambda_bs == pytest.approx(ref.d_tau_d_lambda_bs, rel=1e-3)
        assert got.d_tau_d_lambda_ris == pytest.approx(ref.d_tau_d_lambda_ris, rel=1e-3)

    def test_ris_derivative_positive(self, fast_cfg):
        p = SystemParams(lambda_bs=1e-5)
        assert rate_and_gains(p, fast_cfg).d_tau_d_lambda_ris > 0
