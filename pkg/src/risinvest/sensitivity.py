"""Derivatives of the transform, the coverage and the ergodic rate in the densities.

Both densities enter the transform through its exponent, so the derivative
of ``B`` is ``B`` times the derivative of the exponent.  In the
coverage-hole scenario ``lambda_bs`` also moves the hole distance ``r_H``
and with it the evaluation point ``s = 1 / (K P0 g(r_H))``; those two
channels are carried separately (see :meth:`UpsilonTransform.evaluate`).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .coverage import (
    PVEngine,
    kernel_for,
    rate_from_coverage,
    serving_point,
    typical_integrand,
)
from .errors import ParameterError
from .laplace import probe_roc
from .model import Scenario, SystemParams
from .quadrature import QuadratureConfig, central_difference

__all__ = [
    "Density",
    "GainPair",
    "d_b_upsilon_d_lambda_bs",
    "d_b_upsilon_d_lambda_ris",
    "d_b_upsilon_plus_d_lambda",
    "d_tau",
    "rate_and_gains",
    "finite_difference_gains",
]


class Density(str, enum.Enum):
    BS = "bs"
    RIS = "ris"


@dataclass(frozen=True)
class GainPair:
    """Rate sensitivities: per BS/m^2 and per RIS/m^2 of ring."""

    d_tau_d_lambda_bs: float
    d_tau_d_lambda_ris: float
    tau: float = math.nan

    def __post_init__(self):
        if not (math.isfinite(self.d_tau_d_lambda_bs) and math.isfinite(self.d_tau_d_lambda_ris)):
            raise ParameterError("non-finite rate derivative")


def _point(s, threshold, serve_dist, params):
    distance, _, hole = serving_point(serve_dist, params)
    kernel = kernel_for(params, distance)
    z = np.atleast_1d(np.asarray(s, dtype=complex))
    kernel.check_roc(z, [threshold])
    return kernel, z, hole


def _scalar(arr, s):
    out = arr[:, 0].reshape(np.shape(s))
    return complex(out) if out.ndim == 0 else out


def d_b_upsilon_d_lambda_bs(s, threshold, serve_dist, params: SystemParams, s_channel: bool = True):
    """``dB(s)/dlambda_bs``.

    In the coverage-hole scenario the distance is ``r_H(lambda)`` and,
    when ``s_channel`` is true, ``s`` is treated as carrying the moving
    evaluation point (the ``s - iu`` branch); pass ``False`` for arguments
    of the form ``-iu``.
    """
    kernel, z, hole = _point(s, threshold, serve_dist, params)
    res = kernel.evaluate(z, [threshold], want=("d_bs",), hole=hole, s_channel=s_channel)
    return _scalar(res["d_bs"], s)


def d_b_upsilon_d_lambda_ris(s, threshold, serve_dist, params: SystemParams):
    """``dB(s)/dlambda_ris = B(s) D_RIS(s)``, the same in both scenarios."""
    kernel, z, _ = _point(s, threshold, serve_dist, params)
    res = kernel.evaluate(z, [threshold], want=("d_ris",))
    return _scalar(res["d_ris"], s)


def d_b_upsilon_plus_d_lambda(s, threshold, serve_dist, params: SystemParams, wrt="bs",
                              cfg: QuadratureConfig | None = None) -> float:
    """Density derivative of ``B_plus(s)`` by the same PV inversion as ``B_plus``.

    In the coverage-hole scenario ``s`` is taken to be the evaluation point
    that moves with ``r_H``.
    """
    wrt = Density(wrt)
    s = float(s)
    if s < 0:
        raise ParameterError("s must be real and non-negative")
    if s == 0:
        return 0.0
    distance, _, hole = serving_point(serve_dist, params)
    kernel = kernel_for(params, distance)
    kernel.check_roc(np.array([s + 0j]), [threshold])
    name = "d_bs" if wrt is Density.BS else "d_ris"
    engine = PVEngine(kernel, s, cfg, hole=hole if wrt is Density.BS else None)
    return float(engine.values([threshold], (name,))[name][0])


def rate_and_gains(params: SystemParams, cfg: QuadratureConfig | None = None,
                   conditional: bool = False, n_radial: int = 16) -> GainPair:
    """Rate and both density derivatives from one nested quadrature.

    Throughput scenario: distance-averaged over ``[R_c, inf)``, including
    the derivative of the distance density.  Coverage hole: the fixed
    distance ``r_H`` with the moving evaluation point, no averaging.
    """
    p = params
    want = ("b", "d_bs", "d_ris")
    if p.scenario is Scenario.COVERAGE_HOLE:
        distance, s, hole = serving_point(None, p)
        probe_roc(1.0, distance, p)
        engine = PVEngine(kernel_for(p, distance), s, cfg, hole=hole)

        scale = np.array([1.0, engine.scale["d_bs"], engine.scale["d_ris"]])

        def f(t):
            vals = engine.values(t, want)
            return np.stack([vals[n] for n in want], axis=1) * scale

        value, _ = rate_from_coverage(f, cfg, clamp=(True, False, False))
        value = value / scale
        return GainPair(float(value[1]), float(value[2]), float(value[0]))

    if not p.lambda_bs > 0:
        raise ParameterError("lambda_bs must be positive")
    mass = math.exp(-math.pi * p.lambda_bs * p.r_guard ** 2)
    f = typical_integrand(p, cfg, want, n_radial)
    # integrate lambda * d/dlambda so the absolute tolerance is meaningful
    scale = np.array([1.0, p.lambda_bs, max(p.lambda_ris, 1.0 / p.ring.area)]) / mass
    value, _ = rate_from_coverage(lambda t: f(t) * scale, cfg, clamp=(True, False, False))
    tau, d_bs, d_ris = (float(v) for v in value / scale)
    if conditional:
        # d(tau / mass) = (d tau + tau * pi R_c^2 * mass) / mass
        d_bs = (d_bs + tau * math.pi * p.r_guard ** 2) / mass
        d_ris = d_ris / mass
        tau = tau / mass
    return GainPair(d_bs, d_ris, tau)


def d_tau(params: SystemParams, wrt="bs", cfg: QuadratureConfig | None = None,
          conditional: bool = False) -> float:
    """``dtau/dlambda_bs`` or ``dtau/dlambda_ris`` for the scenario in ``params``."""
    pair = rate_and_gains(params, cfg, conditional)
    return pair.d_tau_d_lambda_bs if Density(wrt) is Density.BS else pair.d_tau_d_lambda_ris


def finite_difference_gains(params: SystemParams, cfg: QuadratureConfig | None = None,
                            rel_step: float = 1e-3, conditional: bool = False) -> GainPair:
    """Central differences of the rate in both densities (validation only).

    ``lambda_ris = 0`` uses a step of ``rel_step`` RIS per ring and a
    one-sided difference, since the density cannot go negative.
    """
    from .coverage import ergodic_rate_at, ergodic_rate_typical

    def rate(q):
        if q.scenario is Scenario.COVERAGE_HOLE:
            return ergodic_rate_at(None, q, cfg).value
        return ergodic_rate_typical(q, cfg, conditional).value

    p = params
    h_bs = rel_step * p.lambda_bs
    d_bs = central_difference(lambda lam: rate(p.replace(lambda_bs=lam)), p.lambda_bs, h_bs)
    if p.lambda_ris > 0:
        h_ris = rel_step * p.lambda_ris
        d_ris = central_difference(lambda lam: rate(p.replace(lambda_ris=lam)), p.lambda_ris, h_ris)
    else:
        h_ris = rel_step / p.ring.area
        d_ris = (rate(p.replace(lambda_ris=h_ris)) - rate(p)) / h_ris
    return GainPair(d_bs, d_ris, rate(p))
