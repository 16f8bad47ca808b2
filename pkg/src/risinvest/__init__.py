"""Coverage, ergodic rate and investment planning for RIS-assisted cellular networks."""

from .coverage import (
    RateResult,
    b_upsilon_plus,
    coverage_probability,
    ergodic_rate_at,
    ergodic_rate_typical,
)
from .errors import (
    ConfigError,
    DivergenceError,
    OutsideROCError,
    ParameterError,
    PoleError,
    QuadratureError,
    RisInvestError,
    SingularityError,
)
from .laplace import RocBounds, b_upsilon, lt_beam_power, lt_direct_fading, probe_roc
from .model import ClusterRing, Scenario, SystemParams, hole_distance, pathloss, reflected_pathloss
from .planner import CostModel, Decision, InvestmentState, decide, expected_gains, run_trajectory
from .quadrature import QuadratureConfig
from .sensitivity import GainPair, d_tau, finite_difference_gains, rate_and_gains

__version__ = "0.1.0"

__all__ = [
    "RateResult", "b_upsilon_plus", "coverage_probability", "ergodic_rate_at", "ergodic_rate_typical",
    "ConfigError", "DivergenceError", "OutsideROCError", "ParameterError", "PoleError",
    "QuadratureError", "RisInvestError", "SingularityError",
    "RocBounds", "b_upsilon", "lt_beam_power", "lt_direct_fading", "probe_roc",
    "ClusterRing", "Scenario", "SystemParams", "hole_distance", "pathloss", "reflected_pathloss",
    "CostModel", "Decision", "InvestmentState", "decide", "expected_gains", "run_trajectory",
    "QuadratureConfig",
    "GainPair", "d_tau", "finite_difference_gains", "rate_and_gains",
]
