"""End-to-end acceptance checks, one test per criterion.

Every test records a one-line verdict that is printed in the terminal
summary (see ``conftest.py``), so ``pytest -v`` shows a pass/fail line per
criterion even when the assertion itself passes silently.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest

from risinvest.coverage import coverage_probability, ergodic_rate_typical
from risinvest.laplace import b_upsilon, lt_beam_power
from risinvest.model import Scenario, SystemParams, pathloss
from risinvest.montecarlo import Interference, SamplingMode, estimate_coverage, estimate_rate
from risinvest.planner import CostModel, Decision, InvestmentState, round_spend, run_trajectory
from risinvest.quadrature import QuadratureConfig
from risinvest.sensitivity import finite_difference_gains, rate_and_gains

pytestmark = pytest.mark.acceptance

KM2 = 1e-6
AREA = math.pi * (30.0 ** 2 - 20.0 ** 2)
MC_SAMPLES = 100_000
SEED = 20240601

VERDICTS: dict[int, str] = {}


def record(number: int, ok: bool, detail: str) -> None:
    VERDICTS[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"


def reference_params(lam_per_km2: float, ris_per_ring: float = 5.0, **extra) -> SystemParams:
    """Evaluation setup: 30 dBm, -100 dBm noise, 20-30 m rings, 50 m guard, M = 600."""
    return SystemParams(lambda_bs=lam_per_km2 * KM2, lambda_ris=ris_per_ring / AREA, **extra)


GRID = (3.0, 5.0, 7.5, 10.0, 15.0, 20.0, 25.0, 30.0, 40.0)
VALIDATION_POINTS = (5.0, 15.0, 30.0)
SHAPE_CFG = QuadratureConfig(rel_tol=1e-6, abs_tol=1e-8)


def validation_distance(lam_per_km2: float) -> float:
    """Mean nearest-BS distance ``1 / (2 sqrt(lambda))`` rounded to a metre."""
    return float(round(0.5 / math.sqrt(lam_per_km2 * KM2)))


def analytic_validation(cfg: QuadratureConfig) -> dict:
    out = {}
    for lam in VALIDATION_POINTS:
        p = reference_params(lam)
        r = validation_distance(lam)
        out[lam] = (float(coverage_probability(1.0, r, p, cfg)), ergodic_rate_typical(p, cfg).value)
    return out


@pytest.fixture(scope="module")
def validation_numbers():
    return analytic_validation(QuadratureConfig())


@pytest.fixture(scope="module")
def shape_sweep():
    """``(lam, GainPair)`` on the density grid, shared by the rate and gain shape checks."""
    return [(lam, rate_and_gains(reference_params(lam), SHAPE_CFG)) for lam in GRID]


class TestAcceptance:
    def test_01_transform_correctness(self):
        rng = np.random.default_rng(SEED)
        worst_zero = worst_mod = worst_conj = 0.0
        for _ in range(5):
            p = SystemParams(
                lambda_bs=rng.uniform(1, 40) * KM2,
                lambda_ris=rng.uniform(0, 10) / AREA,
                m_elements=int(rng.integers(100, 1000)),
                alpha=float(rng.uniform(3.0, 4.5)),
                noise_power=10 ** rng.uniform(-14, -12),
            )
            r = float(rng.uniform(60, 400))
            t = float(rng.uniform(0.1, 10))
            s_ref = 1.0 / (p.p0 * float(pathloss(r, p)))
            u = s_ref * np.geomspace(1e-3, 1e3, 50)
            worst_zero = max(worst_zero, abs(b_upsilon(0.0, t, r, p) - 1.0))
            vals = np.array([b_upsilon(-1j * v, t, r, p) for v in u])
            conj = np.array([b_upsilon(1j * v, t, r, p) for v in u])
            worst_mod = max(worst_mod, float(np.max(np.abs(vals))))
            worst_conj = max(worst_conj, float(np.max(np.abs(conj - np.conj(vals)))))
        ok = worst_zero <= 1e-8 and worst_mod <= 1 + 1e-8 and worst_conj <= 1e-10
        record(1, ok, f"|B(0)-1|={worst_zero:.2e} max|B(iu)|={worst_mod:.12f} conj={worst_conj:.2e}")
        assert ok

    def test_02_beam_transform_oracle(self):
        p = SystemParams()
        m, mean, var = p.m_elements, p.zeta_mean, p.zeta_var
        rng = np.random.default_rng(SEED)
        x = rng.normal(m * mean, math.sqrt(m * var), size=1_000_000)
        worst = 0.0
        a2 = (m * mean) ** 2
        for s in (0.2 / a2, 1.0 / a2, 3.0 / a2):
            mc = float(np.mean(np.exp(-s * x * x)))
            worst = max(worst, abs(lt_beam_power(s, m, mean, var).real / mc - 1.0))
        ok = worst < 5e-3
        record(2, ok, f"max relative gap to 1e6-draw MC = {worst:.2e}")
        assert ok

    def test_03_noise_only_closed_form(self):
        p = SystemParams(lambda_bs=0.0, lambda_ris=0.0)
        t, r = 1.0, 250.0
        exact = math.exp(-t * p.noise_power / (p.p0 * float(pathloss(r, p))))
        got = float(coverage_probability(t, r, p))
        mc = estimate_coverage(p, t, r, MC_SAMPLES, SEED)
        ok = abs(got - exact) <= 1e-4 and abs(mc.value - exact) <= 0.01
        record(3, ok, f"exact={exact:.6f} analytic={got:.6f} mc={mc.value:.4f}")
        assert ok

    def test_04_analytic_matches_monte_carlo(self, validation_numbers):
        parts, ok = [], True
        for lam in VALIDATION_POINTS:
            p = reference_params(lam)
            r = validation_distance(lam)
            pc, tau = validation_numbers[lam]
            mc_pc = estimate_coverage(p, 1.0, r, MC_SAMPLES, SEED)
            mc_tau = estimate_rate(p, MC_SAMPLES, SEED, mode=SamplingMode.TYPICAL_WITH_GUARD)
            d_pc = abs(pc - mc_pc.value)
            d_tau = abs(tau / mc_tau.value - 1.0)
            ok &= d_pc <= 0.02 and d_tau <= 0.02
            parts.append(f"{lam:g}/km2: dPc={d_pc:.4f} dRate={100 * d_tau:.2f}%")
        record(4, ok, "; ".join(parts))
        assert ok

    def test_05_derivatives_match_finite_differences(self):
        inner = QuadratureConfig(rel_tol=1e-8, abs_tol=1e-8)
        points = [reference_params(lam, ris) for lam, ris in
                  ((3.0, 5.0), (5.0, 2.0), (15.0, 5.0), (25.0, 8.0), (40.0, 5.0))]
        points += [reference_params(lam, ris, scenario=Scenario.COVERAGE_HOLE, penalty_k=k)
                   for lam, ris, k in ((10.0, 5.0, 1.0), (10.0, 5.0, 2.0), (5.0, 2.0, 1.0),
                                       (20.0, 8.0, 2.0), (30.0, 5.0, 10 ** 0.5))]
        worst = 0.0
        for p in points:
            got = rate_and_gains(p, inner)
            ref = finite_difference_gains(p, inner, rel_step=1e-3)
            for a, b in ((got.d_tau_d_lambda_bs, ref.d_tau_d_lambda_bs),
                         (got.d_tau_d_lambda_ris, ref.d_tau_d_lambda_ris)):
                worst = max(worst, abs(a / b - 1.0))
        ok = worst < 1e-2
        record(5, ok, f"{len(points)} points, max relative gap = {worst:.2e}")
        assert ok

    def test_06_rate_has_interior_maximum(self, shape_sweep):
        taus = [pair.tau for _, pair in shape_sweep]
        best = int(np.argmax(taus[1:-1])) + 1
        ok = taus[best] > taus[0] and taus[best] > taus[-1]
        record(6, ok, f"peak {taus[best]:.4f} at {GRID[best]:g}/km2, ends {taus[0]:.4f} / {taus[-1]:.4f}")
        assert ok

    def test_07_gain_signs(self, shape_sweep):
        d_bs = [pair.d_tau_d_lambda_bs for _, pair in shape_sweep]
        d_ris = [pair.d_tau_d_lambda_ris for _, pair in shape_sweep]
        ok = d_bs[0] > 0 and d_bs[-1] < 0 and min(d_ris) > 0
        record(7, ok, f"dtau/dlam_bs {d_bs[0] * KM2:+.4f} -> {d_bs[-1] * KM2:+.4f} per km2, "
                      f"min dtau/dlam_ris {min(d_ris):.3e}")
        assert ok

    def test_08_higher_cost_ratio_turns_to_ris_no_later(self):
        params = reference_params(1.0, 0.0)
        start = InvestmentState(1.0 * KM2, 0.0)
        first, identity = {}, 0.0
        for j in (5.0, 10.0):
            cost = CostModel(cost_ratio_j=j)
            history = run_trajectory(start, cost, params, 6, SHAPE_CFG)
            rounds = [rec.round for rec in history if rec.decision is Decision.RIS]
            first[j] = rounds[0] if rounds else math.inf
            for now, nxt in zip(history, history[1:]):
                if now.decision is None:
                    continue
                delta = (nxt.lambda_bs - now.lambda_bs if now.decision is Decision.BS
                         else nxt.lambda_ris - now.lambda_ris)
                spent = round_spend(now.decision, delta, InvestmentState(now.lambda_bs, now.lambda_ris),
                                    cost, params.ring)
                identity = max(identity, abs(spent / cost.budget - 1.0))
        ok = first[10.0] <= first[5.0] and identity < 1e-12
        record(8, ok, f"first RIS round J=10: {first[10.0]}, J=5: {first[5.0]}; budget gap {identity:.1e}")
        assert ok

    def test_09_hole_ratio_falls_with_penalty(self):
        k_db = (0.0, 2.0, 4.0, 6.0, 8.0, 10.0)
        ratios, slack = [], []
        for k in k_db:
            p = reference_params(10.0, 0.0, scenario=Scenario.COVERAGE_HOLE, penalty_k=10 ** (k / 10))
            pair = rate_and_gains(p, SHAPE_CFG)
            e_ris = p.lambda_bs * p.ring.area * pair.d_tau_d_lambda_ris
            ratios.append(pair.d_tau_d_lambda_bs / e_ris)
            slack.append(1e-3 * abs(ratios[-1]))
        ok = all(b <= a + max(sa, sb) for a, b, sa, sb in zip(ratios, ratios[1:], slack, slack[1:]))
        record(9, ok, "ratios " + ", ".join(f"{v:.4g}" for v in ratios))
        assert ok

    def test_10_reflected_interference_negligible(self):
        p = reference_params(15.0)
        plain = estimate_rate(p, MC_SAMPLES, SEED, interference=Interference.neglect())
        # same seed: identical networks, only the overlap draws are added
        leaky = estimate_rate(p, MC_SAMPLES, SEED, interference=Interference.overlap(0.01, 3.6))
        stderr = plain.stderr
        gap = abs(plain.value - leaky.value)
        ok = gap < 2 * stderr
        record(10, ok, f"neglect {plain.value:.4f} overlap {leaky.value:.4f} gap/stderr {gap / stderr:.2f}")
        assert ok

    def test_11_numerical_stability(self, validation_numbers):
        base = QuadratureConfig()
        stricter = dataclasses.replace(base.tightened(2.0), tail_safety=2.0 * base.tail_safety)
        again = analytic_validation(stricter)
        d_pc = max(abs(again[lam][0] - validation_numbers[lam][0]) for lam in VALIDATION_POINTS)
        d_tau = max(abs(again[lam][1] / validation_numbers[lam][1] - 1.0) for lam in VALIDATION_POINTS)
        ok = d_pc < 1e-4 and d_tau < 1e-3
        record(11, ok, f"max coverage change {d_pc:.1e}, max rate change {100 * d_tau:.1e}%")
        assert ok
