"""YAML scenario files.

Values are kept in the human units of the file (dBm, dB, GHz, per km^2)
and converted once by :meth:`ScenarioConfig.system_params` and friends,
so that ``load(dump(cfg)) == cfg`` holds exactly.
"""

from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .errors import ConfigError
from .model import Scenario, SystemParams, db_to_linear, dbm_to_watt, rician_product_moments
from .planner import CostModel, StagnationPolicy
from .quadrature import QuadratureConfig

__all__ = [
    "SystemSection",
    "CostSection",
    "MonteCarloSection",
    "SweepSection",
    "PlanSection",
    "ScenarioConfig",
    "load_config",
    "parse_config",
    "dump_config",
    "PER_KM2",
]

PER_KM2 = 1e-6


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads ``1e-8`` (no dot) as a float, as YAML 1.2 does."""


_Loader.yaml_implicit_resolvers = {
    key: [(tag, rx) for tag, rx in rules if tag != "tag:yaml.org,2002:float"]
    for key, rules in yaml.SafeLoader.yaml_implicit_resolvers.items()
}
_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
                |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
                |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
                |[-+]?\.(?:inf|Inf|INF)
                |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."),
)


@dataclass(frozen=True)
class SystemSection:
    """Physical parameters in file units.

    ``ris_per_cluster`` is the mean RIS count on a ring.  ``zeta_mean``
    and ``zeta_var`` win over ``rician_k_db`` when both are present.
    """

    lambda_bs_per_km2: float = 10.0
    ris_per_cluster: float = 5.0
    r_in: float = 20.0
    r_out: float = 30.0
    r_guard: float = 50.0
    p0_dbm: float = 30.0
    noise_dbm: float = -100.0
    alpha: float = 4.0
    carrier_ghz: float = 28.0
    beta: float | None = None
    m_elements: int = 600
    zeta_mean: float | None = None
    zeta_var: float | None = None
    rician_k_db: tuple | None = None
    penalty_k_db: float = 0.0
    c_hole: float = 0.253
    scenario: str = "throughput"


@dataclass(frozen=True)
class CostSection:
    c_bs_total: float | None = None
    c_ris_total: float | None = None
    cost_ratio_j: float | None = 5.0
    budget_bs_per_km2: float = 2.0


@dataclass(frozen=True)
class MonteCarloSection:
    n_samples: int = 100_000
    seed: int = 12345
    window_radius: float | None = None
    overlap_p: float = 0.0
    beamwidth_deg: float | None = None
    coverage_tol: float = 0.02
    rate_rel_tol: float = 0.02


@dataclass(frozen=True)
class SweepSection:
    lambda_bs_per_km2: tuple = (3.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 40.0)
    ris_per_cluster: tuple = (5.0,)
    thresholds: tuple = (1.0,)
    distances: tuple = (100.0,)
    penalty_k_db: tuple = ()
    conditional: bool = False


@dataclass(frozen=True)
class PlanSection:
    n_rounds: int = 10
    lambda_bs_per_km2: float = 1.0
    ris_per_cluster: float = 0.0
    policy: str = "stop"


_SECTIONS = {
    "system": SystemSection,
    "cost": CostSection,
    "quadrature": QuadratureConfig,
    "montecarlo": MonteCarloSection,
    "sweep": SweepSection,
    "plan": PlanSection,
}


@dataclass(frozen=True)
class ScenarioConfig:
    system: SystemSection = field(default_factory=SystemSection)
    cost: CostSection = field(default_factory=CostSection)
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    montecarlo: MonteCarloSection = field(default_factory=MonteCarloSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    plan: PlanSection = field(default_factory=PlanSection)
    name: str = ""

    def system_params(self, lambda_bs_per_km2: float | None = None,
                      ris_per_cluster: float | None = None,
                      penalty_k_db: float | None = None) -> SystemParams:
        s = self.system
        lam = s.lambda_bs_per_km2 if lambda_bs_per_km2 is None else lambda_bs_per_km2
        ris = s.ris_per_cluster if ris_per_cluster is None else ris_per_cluster
        k_db = s.penalty_k_db if penalty_k_db is None else penalty_k_db
        area = math.pi * (s.r_out ** 2 - s.r_in ** 2)
        extra = {}
        if s.zeta_mean is not None or s.zeta_var is not None:
            if s.zeta_mean is None or s.zeta_var is None:
                raise ConfigError("system: give both zeta_mean and zeta_var")
            extra = {"zeta_mean": s.zeta_mean, "zeta_var": s.zeta_var}
        elif s.rician_k_db is not None:
            k1, k2 = (db_to_linear(k) if k is not None else 0.0 for k in s.rician_k_db)
            mean, var = rician_product_moments(k1, k2)
            extra = {"zeta_mean": mean, "zeta_var": var}
        try:
            return SystemParams(
                lambda_bs=lam * PER_KM2,
                lambda_ris=ris / area,
                r_in=s.r_in,
                r_out=s.r_out,
                r_guard=s.r_guard,
                p0=dbm_to_watt(s.p0_dbm),
                noise_power=dbm_to_watt(s.noise_dbm),
                alpha=s.alpha,
                beta=s.beta,
                carrier_hz=s.carrier_ghz * 1e9,
                m_elements=s.m_elements,
                penalty_k=db_to_linear(k_db),
                c_hole=s.c_hole,
                scenario=Scenario(s.scenario),
                **extra,
            )
        except ValueError as exc:
            raise ConfigError(f"system: {exc}") from exc

    def cost_model(self, cost_ratio_j: float | None = None) -> CostModel:
        c = self.cost
        try:
            if cost_ratio_j is not None:
                return CostModel(cost_ratio_j=cost_ratio_j, budget_bs_per_round=c.budget_bs_per_km2 * PER_KM2)
            return CostModel(c.c_bs_total, c.c_ris_total, c.cost_ratio_j, c.budget_bs_per_km2 * PER_KM2)
        except ValueError as exc:
            raise ConfigError(f"cost: {exc}") from exc

    def stagnation_policy(self) -> StagnationPolicy:
        try:
            return StagnationPolicy(self.plan.policy)
        except ValueError as exc:
            raise ConfigError(f"plan.policy: {exc}") from exc

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)


def _key_lines(node, prefix=()):
    """Map key paths to 1-based line numbers from a composed YAML tree."""
    lines = {}
    if isinstance(node, yaml.MappingNode):
        for key, value in node.value:
            path = prefix + (key.value,)
            lines[path] = key.start_mark.line + 1
            lines.update(_key_lines(value, path))
    return lines


def _coerce(cls, name, value):
    kind = {f.name: f for f in fields(cls)}[name]
    default = kind.default if kind.default is not dataclasses.MISSING else None
    if isinstance(value, list):
        return tuple(value)
    if isinstance(default, float) and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    return value


def _section(cls, raw, where, lines):
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"line {lines.get((where,), '?')}: section '{where}' must be a mapping")
    names = {f.name for f in fields(cls)}
    for key in raw:
        if key not in names:
            line = lines.get((where, key), "?")
            raise ConfigError(f"line {line}: unknown field '{where}.{key}'")
    kwargs = {k: _coerce(cls, k, v) for k, v in raw.items()}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        line = lines.get((where,), "?")
        raise ConfigError(f"line {line}: section '{where}': {exc}") from exc


def parse_config(text: str) -> ScenarioConfig:
    """Parse YAML text; errors name the offending line and field."""
    try:
        tree = yaml.compose(text, Loader=_Loader)
        raw = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from exc
    lines = _key_lines(tree) if tree is not None else {}
    raw = raw or {}
    if not isinstance(raw, dict):
        raise ConfigError("top level of a scenario file must be a mapping")
    for key in raw:
        if key not in _SECTIONS and key != "name":
            raise ConfigError(f"line {lines.get((key,), '?')}: unknown section '{key}'")
    kwargs = {key: _section(cls, raw.get(key), key, lines) for key, cls in _SECTIONS.items()}
    cfg = ScenarioConfig(name=str(raw.get("name", "")), **kwargs)
    # surface unit/physics errors at load time
    cfg.system_params()
    cfg.cost_model()
    cfg.stagnation_policy()
    return cfg


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        return parse_config(text)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _plain(value):
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    return value


def config_to_dict(cfg: ScenarioConfig) -> dict:
    out = {"name": cfg.name} if cfg.name else {}
    for key in _SECTIONS:
        section = getattr(cfg, key)
        out[key] = {f.name: _plain(getattr(section, f.name)) for f in fields(section)}
    return out


def dump_config(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)
