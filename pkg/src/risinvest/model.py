"""Physical parameters, geometry and path-loss functions."""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import i0e, i1e

from .errors import ParameterError

SPEED_OF_LIGHT = 299_792_458.0


class Scenario(str, enum.Enum):
    THROUGHPUT = "throughput"
    COVERAGE_HOLE = "coverage_hole"


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(watt: float) -> float:
    return 10.0 * math.log10(watt) + 30.0


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


def beta_from_carrier(carrier_hz: float) -> float:
    """Reference gain at 1 m, ``c / (4 pi f_c)``."""
    if not carrier_hz > 0:
        raise ParameterError("carrier frequency must be positive")
    return SPEED_OF_LIGHT / (4.0 * math.pi * carrier_hz)


@dataclass(frozen=True)
class ClusterRing:
    r_in: float
    r_out: float

    def __post_init__(self):
        if not 0 <= self.r_in < self.r_out:
            raise ParameterError(f"ring needs 0 <= r_in < r_out, got {self.r_in}, {self.r_out}")

    @property
    def area(self) -> float:
        return math.pi * (self.r_out ** 2 - self.r_in ** 2)


@dataclass(frozen=True)
class SystemParams:
    """Deployment, propagation and fading parameters (SI, linear units).

    Densities are per m^2.  ``lambda_ris`` is the intensity of each
    cluster's PPP on its ring, so a BS carries ``lambda_ris * area`` RISs
    on average.  ``beta`` may be left as ``None`` and is then derived from
    ``carrier_hz``.  ``penalty_k`` is the linear attenuation of the blocked
    direct link in the coverage-hole scenario.
    """

    lambda_bs: float = 1e-5
    lambda_ris: float = 5.0 / (500.0 * math.pi)
    r_in: float = 20.0
    r_out: float = 30.0
    r_guard: float = 50.0
    p0: float = 1.0
    noise_power: float = 1e-13
    alpha: float = 4.0
    beta: float | None = None
    carrier_hz: float = 28.0e9
    m_elements: int = 600
    zeta_mean: float = math.pi / 4
    zeta_var: float = 1.0 - math.pi ** 2 / 16
    penalty_k: float = 1.0
    c_hole: float = 0.253
    scenario: Scenario = Scenario.THROUGHPUT

    def __post_init__(self):
        if self.beta is None:
            object.__setattr__(self, "beta", beta_from_carrier(self.carrier_hz))
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        if not self.alpha > 2:
            raise ParameterError(f"path-loss exponent must exceed 2, got {self.alpha}")
        for name in ("lambda_bs", "lambda_ris", "r_in", "r_guard", "p0", "noise_power", "c_hole"):
            if not getattr(self, name) >= 0:
                raise ParameterError(f"{name} must be non-negative")
        if not self.r_in < self.r_out:
            raise ParameterError("r_in must be smaller than r_out")
        if not self.beta > 0:
            raise ParameterError("beta must be positive")
        if not self.zeta_var > 0:
            raise ParameterError("zeta_var must be positive")
        if self.zeta_mean < 0:
            raise ParameterError("zeta_mean must be non-negative")
        if self.m_elements < 1:
            raise ParameterError("m_elements must be >= 1")
        if not self.penalty_k >= 1:
            raise ParameterError("penalty_k is an attenuation and must be >= 1")

    def replace(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, **changes)

    @property
    def ring(self) -> ClusterRing:
        return ClusterRing(self.r_in, self.r_out)

    @property
    def beam_mean(self) -> float:
        """Mean amplitude of one reflected beam, ``M E|zeta|``."""
        return self.m_elements * self.zeta_mean

    @property
    def beam_var(self) -> float:
        """Variance of one reflected beam amplitude, ``M V|zeta|``."""
        return self.m_elements * self.zeta_var

    @property
    def ris_per_cluster(self) -> float:
        return self.lambda_ris * self.ring.area


def pathloss(d, params: SystemParams):
    """``beta * (d + 1) ** -alpha``."""
    return params.beta * (np.asarray(d, dtype=float) + 1.0) ** (-params.alpha)


def pathloss_derivative(d, params: SystemParams):
    return -params.alpha * params.beta * (np.asarray(d, dtype=float) + 1.0) ** (-params.alpha - 1.0)


def _second_leg(r, y, psi):
    return np.sqrt(np.maximum(r * r + y * y - 2.0 * r * y * np.cos(psi), 0.0))


def reflected_pathloss(r, y, psi, params: SystemParams):
    """Two-segment gain ``g(y) g(|BS-RIS-UE leg|)`` for a RIS at ``(y, psi)``."""
    r = np.asarray(r, dtype=float)
    y = np.asarray(y, dtype=float)
    return pathloss(y, params) * pathloss(_second_leg(r, y, psi), params)


def reflected_pathloss_dr(r, y, psi, params: SystemParams):
    """Partial derivative of :func:`reflected_pathloss` in ``r``."""
    r = np.asarray(r, dtype=float)
    y = np.asarray(y, dtype=float)
    d2 = _second_leg(r, y, psi)
    with np.errstate(divide="ignore", invalid="ignore"):
        dd2 = np.where(d2 > 0, (r - y * np.cos(psi)) / d2, 0.0)
    return pathloss(y, params) * pathloss_derivative(d2, params) * dd2


def hole_distance(lambda_bs: float, c_hole: float):
    """Hole-to-BS distance ``C_H / sqrt(lambda)`` and its derivative in lambda."""
    if not lambda_bs > 0:
        raise ParameterError("lambda_bs must be positive for the coverage-hole distance")
    r_h = c_hole / math.sqrt(lambda_bs)
    return r_h, -c_hole / (2.0 * lambda_bs ** 1.5)


def _rician_mean_amplitude(k: float) -> float:
    # unit mean power; Laguerre L_{1/2}(-K) written with scaled Bessel functions
    if math.isinf(k):
        return 1.0
    half = 0.5 * k
    lag = (1.0 + k) * i0e(half) + k * i1e(half)
    return math.sqrt(math.pi / (4.0 * (k + 1.0))) * lag


def rician_product_moments(k1: float, k2: float):
    """Mean and variance of ``|rho_1 rho_2|`` for independent unit-power Rician links."""
    if k1 < 0 or k2 < 0:
        raise ParameterError("Rician K-factors must be non-negative")
    mean = _rician_mean_amplitude(k1) * _rician_mean_amplitude(k2)
    return mean, max(1.0 - mean * mean, 0.0)
