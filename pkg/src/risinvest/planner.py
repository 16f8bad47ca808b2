"""Round-by-round investment policy for BS and RIS densification.

Each round spends the same budget, sized as ``budget_bs_per_round`` BSs
per m^2 at full BS cost.  The budget buys either new BSs (each arriving
with its cluster of RISs at the current per-ring density) or additional
RISs spread over the existing clusters.  Densities are per m^2
throughout; per-km^2 conversion happens only at the command line.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field
from typing import Callable

from .errors import ParameterError
from .model import ClusterRing, SystemParams
from .quadrature import QuadratureConfig

__all__ = [
    "Decision",
    "StagnationPolicy",
    "CostModel",
    "RoundRecord",
    "InvestmentState",
    "expected_gains",
    "decide",
    "apply_round",
    "round_spend",
    "run_trajectory",
]


class Decision(str, enum.Enum):
    BS = "BS"
    RIS = "RIS"


class StagnationPolicy(str, enum.Enum):
    STOP = "stop"
    FORCE_RIS = "force-ris"
    FORCE_BS = "force-bs"


@dataclass(frozen=True)
class CostModel:
    """Per-node total cost of ownership and the per-round budget.

    Either both totals are given (``J`` then follows) or only ``J``, in
    which case the RIS cost is taken as the unit of currency.
    """

    c_bs_total: float | None = None
    c_ris_total: float | None = None
    cost_ratio_j: float | None = None
    budget_bs_per_round: float = 2e-6

    def __post_init__(self):
        bs, ris, j = self.c_bs_total, self.c_ris_total, self.cost_ratio_j
        if bs is not None and ris is not None:
            if not bs > ris > 0:
                raise ParameterError("costs must satisfy c_bs_total > c_ris_total > 0")
            ratio = bs / ris
            if j is not None and not math.isclose(j, ratio, rel_tol=1e-12):
                raise ParameterError(f"cost_ratio_j={j} disagrees with c_bs_total/c_ris_total={ratio}")
            object.__setattr__(self, "cost_ratio_j", ratio)
        elif j is not None:
            if not j > 0:
                raise ParameterError("cost ratio J must be positive")
            object.__setattr__(self, "c_ris_total", 1.0)
            object.__setattr__(self, "c_bs_total", float(j))
        else:
            raise ParameterError("give c_bs_total and c_ris_total, or cost_ratio_j")
        if not self.budget_bs_per_round > 0:
            raise ParameterError("budget_bs_per_round must be positive")

    @property
    def budget(self) -> float:
        """Currency per m^2 per round."""
        return self.budget_bs_per_round * self.c_bs_total


@dataclass(frozen=True)
class RoundRecord:
    round: int
    decision: Decision | None
    lambda_bs: float
    lambda_ris: float
    tau: float
    e_bs: float
    e_ris: float
    threshold: float
    status: str = "ok"


@dataclass
class InvestmentState:
    lambda_bs: float
    lambda_ris: float = 0.0
    round: int = 0
    history: list[RoundRecord] = field(default_factory=list)

    def __post_init__(self):
        if not self.lambda_bs > 0:
            raise ParameterError("lambda_bs must be positive")
        if self.lambda_ris < 0:
            raise ParameterError("lambda_ris must be non-negative")


GainFunction = Callable[[SystemParams], tuple[float, float, float]]


def _analytic_gains(cfg: QuadratureConfig | None) -> GainFunction:
    from .sensitivity import rate_and_gains

    def gains(params):
        pair = rate_and_gains(params, cfg)
        return pair.tau, pair.d_tau_d_lambda_bs, pair.d_tau_d_lambda_ris

    return gains


def expected_gains(state: InvestmentState, params: SystemParams,
                   cfg: QuadratureConfig | None = None,
                   gain_fn: GainFunction | None = None):
    """``(tau, E_BS, E_RIS)`` at the state's densities.

    ``E_RIS`` is the per-ring derivative scaled by ``lambda_bs * area``.
    ``gain_fn`` replaces the analytical engine, mapping params to
    ``(tau, dtau/dlambda_bs, dtau/dlambda_ris)``.
    """
    p = params.replace(lambda_bs=state.lambda_bs, lambda_ris=state.lambda_ris)
    fn = gain_fn or _analytic_gains(cfg)
    tau, d_bs, d_ris = fn(p)
    return float(tau), float(d_bs), float(state.lambda_bs * p.ring.area * d_ris)


def decision_threshold(state: InvestmentState, cost: CostModel, ring: ClusterRing) -> float:
    """Multiplier on ``E_RIS`` that ``E_BS`` has to reach for a BS round."""
    return cost.cost_ratio_j + state.lambda_ris * ring.area


def decide(e_bs: float, e_ris: float, state: InvestmentState, cost: CostModel,
           ring: ClusterRing) -> Decision | None:
    """BS iff ``E_BS >= E_RIS (J + lambda_ris A)``; ``None`` when neither pays off."""
    if e_bs <= 0 and e_ris <= 0:
        return None
    if e_bs >= e_ris * decision_threshold(state, cost, ring):
        return Decision.BS
    return Decision.RIS


def round_spend(decision: Decision, delta: float, state: InvestmentState,
                cost: CostModel, ring: ClusterRing) -> float:
    """Currency per m^2 spent by a density increment ``delta`` from ``state``."""
    if decision is Decision.BS:
        return delta * (cost.c_bs_total + cost.c_ris_total * ring.area * state.lambda_ris)
    return delta * cost.c_ris_total * state.lambda_bs * ring.area


def _increment(decision: Decision, state: InvestmentState, cost: CostModel, ring: ClusterRing) -> float:
    if decision is Decision.BS:
        return cost.budget / (cost.c_bs_total + cost.c_ris_total * ring.area * state.lambda_ris)
    return cost.budget / (cost.c_ris_total * state.lambda_bs * ring.area)


def apply_round(state: InvestmentState, decision: Decision, cost: CostModel,
                ring: ClusterRing, record: RoundRecord | None = None) -> InvestmentState:
    """Spend one round's budget on ``decision``; returns a new state."""
    decision = Decision(decision)
    delta = _increment(decision, state, cost, ring)
    history = list(state.history)
    if record is not None:
        history.append(record)
    if decision is Decision.BS:
        return InvestmentState(state.lambda_bs + delta, state.lambda_ris, state.round + 1, history)
    return InvestmentState(state.lambda_bs, state.lambda_ris + delta, state.round + 1, history)


def run_trajectory(initial: InvestmentState, cost: CostModel, params: SystemParams,
                   n_rounds: int, cfg: QuadratureConfig | None = None,
                   policy: StagnationPolicy | str = StagnationPolicy.STOP,
                   gain_fn: GainFunction | None = None) -> list[RoundRecord]:
    """Run the greedy investment loop for ``n_rounds`` rounds.

    One record per visited state; the last record describes the final
    state and carries no decision.  With the ``stop`` policy a stagnant
    state ends the trajectory early with status ``stagnation``.
    """
    if n_rounds < 0:
        raise ParameterError("n_rounds must be non-negative")
    policy = StagnationPolicy(policy)
    fn = gain_fn or _analytic_gains(cfg)
    ring = params.ring
    state = dataclasses.replace(initial, history=list(initial.history))
    for _ in range(n_rounds):
        tau, e_bs, e_ris = expected_gains(state, params, gain_fn=fn)
        threshold = decision_threshold(state, cost, ring)
        choice = decide(e_bs, e_ris, state, cost, ring)
        status = "ok"
        if choice is None:
            if policy is StagnationPolicy.STOP:
                state.history.append(RoundRecord(state.round, None, state.lambda_bs, state.lambda_ris,
                                                 tau, e_bs, e_ris, threshold, "stagnation"))
                return state.history
            choice = Decision.RIS if policy is StagnationPolicy.FORCE_RIS else Decision.BS
            status = "stagnation-forced"
        record = RoundRecord(state.round, choice, state.lambda_bs, state.lambda_ris,
                             tau, e_bs, e_ris, threshold, status)
        state = apply_round(state, choice, cost, ring, record)
    tau, e_bs, e_ris = expected_gains(state, params, gain_fn=fn)
    state.history.append(RoundRecord(state.round, None, state.lambda_bs, state.lambda_ris, tau,
                                     e_bs, e_ris, decision_threshold(state, cost, ring), "final"))
    return state.history
