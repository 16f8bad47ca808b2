"""Command-line front end.

Tables go out as CSV and validation reports as JSON.  A failing grid
point becomes an error message in its own row; the exit code is 0 only
when no row failed.  Densities are printed per km^2 and derivatives per
added node per km^2.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys

import click

from .config import PER_KM2, ScenarioConfig, load_config
from .coverage import coverage_probability, ergodic_rate_typical
from .errors import RisInvestError
from .model import Scenario
from .montecarlo import Interference, estimate_coverage, estimate_rate
from .planner import Decision, InvestmentState, round_spend, run_trajectory
from .sensitivity import finite_difference_gains, rate_and_gains

COVERAGE_COLUMNS = ["threshold", "distance_m", "coverage", "error"]
RATE_COLUMNS = ["lambda_bs_per_km2", "ris_per_cluster", "tau", "est_error", "error"]
SENSITIVITY_COLUMNS = ["lambda_bs_per_km2", "ris_per_cluster", "penalty_k_db", "tau",
                       "e_bs", "e_ris", "ratio", "fd_e_bs", "fd_e_ris", "error"]
PLAN_COLUMNS = ["round", "decision", "lambda_bs_per_km2", "ris_per_cluster", "tau",
                "e_bs", "e_ris", "threshold", "budget_used", "status"]


class _Failures:
    def __init__(self):
        self.count = 0

    def guard(self, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs), ""
        except (RisInvestError, ValueError, ArithmeticError) as exc:
            self.count += 1
            return None, f"{type(exc).__name__}: {exc}"


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _emit_csv(rows, columns, out):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(c)) for c in columns])
    _write(buf.getvalue(), out)


def _emit_json(payload, out):
    _write(json.dumps(payload, indent=2, sort_keys=True) + "\n", out)


def _write(text, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load(path, seed) -> ScenarioConfig:
    cfg = load_config(path) if path else ScenarioConfig()
    if seed is not None:
        cfg = cfg.replace(montecarlo=cfg.montecarlo.__class__(**{**cfg.montecarlo.__dict__, "seed": seed}))
    return cfg


def _common(fn):
    fn = click.option("--threads", type=int, default=1, show_default=True, help="Worker threads for Monte Carlo batches.")(fn)
    fn = click.option("--seed", type=int, default=None, help="Override the configured Monte Carlo seed.")(fn)
    fn = click.option("--out", "out", type=click.Path(dir_okay=False), default=None, help="Output file (default stdout).")(fn)
    fn = click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
                      help="YAML scenario file.")(fn)
    return fn


@click.group()
def main():
    """Coverage, rate and BS/RIS investment analysis."""


def _finish(failures: _Failures):
    sys.exit(1 if failures.count else 0)


@main.command()
@_common
def coverage(config_path, out, seed, threads):
    """Coverage probability over the threshold x distance grid."""
    cfg = _load(config_path, seed)
    params = cfg.system_params()
    failures = _Failures()
    rows = []
    distances = cfg.sweep.distances if params.scenario is Scenario.THROUGHPUT else (None,)
    for r in distances:
        for t in cfg.sweep.thresholds:
            value, err = failures.guard(coverage_probability, float(t), r, params, cfg.quadrature)
            rows.append({"threshold": float(t), "distance_m": r, "coverage": value, "error": err})
    _emit_csv(rows, COVERAGE_COLUMNS, out)
    _finish(failures)


@main.command()
@_common
def rate(config_path, out, seed, threads):
    """Mean ergodic rate over the BS-density grid, one curve per RIS count."""
    cfg = _load(config_path, seed)
    failures = _Failures()
    rows = []
    for ris in cfg.sweep.ris_per_cluster:
        for lam in cfg.sweep.lambda_bs_per_km2:
            params = cfg.system_params(lam, ris)
            res, err = failures.guard(ergodic_rate_typical, params, cfg.quadrature, cfg.sweep.conditional)
            rows.append({"lambda_bs_per_km2": float(lam), "ris_per_cluster": float(ris),
                         "tau": res.value if res else None, "est_error": res.est_error if res else None,
                         "error": err})
    _emit_csv(rows, RATE_COLUMNS, out)
    _finish(failures)


def _gain_row(cfg, lam, ris, k_db, fd_check):
    params = cfg.system_params(lam, ris, k_db)
    pair = rate_and_gains(params, cfg.quadrature, cfg.sweep.conditional)
    scale = params.lambda_bs * params.ring.area
    e_bs, e_ris = pair.d_tau_d_lambda_bs, scale * pair.d_tau_d_lambda_ris
    row = {"tau": pair.tau, "e_bs": e_bs * PER_KM2, "e_ris": e_ris * PER_KM2,
           "ratio": e_bs / e_ris if e_ris != 0 else math.nan}
    if fd_check:
        fd = finite_difference_gains(params, cfg.quadrature, conditional=cfg.sweep.conditional)
        row["fd_e_bs"] = fd.d_tau_d_lambda_bs * PER_KM2
        row["fd_e_ris"] = scale * fd.d_tau_d_lambda_ris * PER_KM2
    return row


@main.command()
@_common
@click.option("--fd-check", is_flag=True, help="Add finite-difference columns for every point.")
def sensitivity(config_path, out, seed, threads, fd_check):
    """Expected gains of adding one BS or one RIS per km^2, and their ratio.

    With a non-empty ``sweep.penalty_k_db`` the sweep runs over the
    coverage-hole penalty at the configured BS density; otherwise over
    the BS-density grid.
    """
    cfg = _load(config_path, seed)
    failures = _Failures()
    if cfg.sweep.penalty_k_db:
        points = [(cfg.system.lambda_bs_per_km2, ris, k) for ris in cfg.sweep.ris_per_cluster
                  for k in cfg.sweep.penalty_k_db]
    else:
        points = [(lam, ris, cfg.system.penalty_k_db) for ris in cfg.sweep.ris_per_cluster
                  for lam in cfg.sweep.lambda_bs_per_km2]
    rows = []
    for lam, ris, k_db in points:
        row, err = failures.guard(_gain_row, cfg, float(lam), float(ris), float(k_db), fd_check)
        rows.append({"lambda_bs_per_km2": float(lam), "ris_per_cluster": float(ris),
                     "penalty_k_db": float(k_db), **(row or {}), "error": err})
    _emit_csv(rows, SENSITIVITY_COLUMNS, out)
    _finish(failures)


@main.command()
@_common
@click.option("--rounds", type=int, default=None, help="Override plan.n_rounds.")
def plan(config_path, out, seed, threads, rounds):
    """Greedy investment trajectory, one row per round."""
    cfg = _load(config_path, seed)
    failures = _Failures()
    params = cfg.system_params()
    cost = cfg.cost_model()
    area = params.ring.area
    n_rounds = cfg.plan.n_rounds if rounds is None else rounds
    start = InvestmentState(cfg.plan.lambda_bs_per_km2 * PER_KM2, cfg.plan.ris_per_cluster / area)
    history, err = failures.guard(run_trajectory, start, cost, params, n_rounds, cfg.quadrature,
                                  cfg.stagnation_policy())
    rows = []
    for rec in history or []:
        used = None
        if rec.decision is not None:
            delta_state = InvestmentState(rec.lambda_bs, rec.lambda_ris)
            nxt = [h for h in history if h.round == rec.round + 1]
            if nxt:
                delta = (nxt[0].lambda_bs - rec.lambda_bs if rec.decision is Decision.BS
                         else nxt[0].lambda_ris - rec.lambda_ris)
                used = round_spend(rec.decision, delta, delta_state, cost, params.ring) / cost.budget
        rows.append({"round": rec.round, "decision": rec.decision.value if rec.decision else "",
                     "lambda_bs_per_km2": rec.lambda_bs / PER_KM2, "ris_per_cluster": rec.lambda_ris * area,
                     "tau": rec.tau, "e_bs": rec.e_bs * PER_KM2, "e_ris": rec.e_ris * PER_KM2,
                     "threshold": rec.threshold, "budget_used": used, "status": rec.status})
    if err:
        rows.append({"status": err})
    _emit_csv(rows, PLAN_COLUMNS, out)
    _finish(failures)


def _mc_interference(cfg):
    mc = cfg.montecarlo
    return Interference.overlap(mc.overlap_p, mc.beamwidth_deg)


@main.command()
@_common
def simulate(config_path, out, seed, threads):
    """Monte Carlo coverage and rate on the configured grid (JSON)."""
    cfg = _load(config_path, seed)
    mc = cfg.montecarlo
    failures = _Failures()
    records = []
    for lam in cfg.sweep.lambda_bs_per_km2:
        for ris in cfg.sweep.ris_per_cluster:
            params = cfg.system_params(lam, ris)
            point = {"lambda_bs_per_km2": float(lam), "ris_per_cluster": float(ris)}
            res, err = failures.guard(estimate_rate, params, mc.n_samples, mc.seed,
                                      interference=_mc_interference(cfg), window_radius=mc.window_radius,
                                      threads=threads)
            records.append({"point": {**point, "quantity": "rate"}, "mc": res.value if res else None,
                            "stderr": res.stderr if res else None, "error": err})
            if params.scenario is not Scenario.THROUGHPUT:
                continue
            for r in cfg.sweep.distances:
                for t in cfg.sweep.thresholds:
                    res, err = failures.guard(estimate_coverage, params, float(t), float(r), mc.n_samples,
                                              mc.seed, _mc_interference(cfg), mc.window_radius, threads)
                    records.append({"point": {**point, "quantity": "coverage", "threshold": float(t),
                                              "distance_m": float(r)},
                                    "mc": res.value if res else None, "stderr": res.stderr if res else None,
                                    "error": err})
    _emit_json({"records": records}, out)
    _finish(failures)


def _compare(analytic, mc, tol, relative):
    delta = analytic - mc.value
    limit = tol * abs(mc.value) if relative else tol
    return {"analytic": analytic, "mc": mc.value, "stderr": mc.stderr, "delta": delta,
            "pass": bool(abs(delta) <= limit)}


@main.command()
@_common
def validate(config_path, out, seed, threads):
    """Analytical results against Monte Carlo at every grid point (JSON).

    Coverage passes within ``montecarlo.coverage_tol`` absolute and the
    typical rate within ``montecarlo.rate_rel_tol`` relative.
    """
    cfg = _load(config_path, seed)
    mc = cfg.montecarlo
    failures = _Failures()
    records = []

    def rate_point(params):
        an = ergodic_rate_typical(params, cfg.quadrature, cfg.sweep.conditional).value
        sim = estimate_rate(params, mc.n_samples, mc.seed, window_radius=mc.window_radius, threads=threads)
        if cfg.sweep.conditional and params.scenario is Scenario.THROUGHPUT:
            mass = math.exp(-math.pi * params.lambda_bs * params.r_guard ** 2)
            sim = sim.__class__(sim.value / mass, sim.stderr / mass, sim.n_samples)
        return _compare(an, sim, mc.rate_rel_tol, True)

    def coverage_point(params, t, r):
        an = float(coverage_probability(t, r, params, cfg.quadrature))
        sim = estimate_coverage(params, t, r, mc.n_samples, mc.seed, window_radius=mc.window_radius,
                                threads=threads)
        return _compare(an, sim, mc.coverage_tol, False)

    for lam in cfg.sweep.lambda_bs_per_km2:
        for ris in cfg.sweep.ris_per_cluster:
            params = cfg.system_params(lam, ris)
            point = {"lambda_bs_per_km2": float(lam), "ris_per_cluster": float(ris)}
            res, err = failures.guard(rate_point, params)
            records.append({"point": {**point, "quantity": "rate"}, **(res or {"pass": False}), "error": err})
            if params.scenario is not Scenario.THROUGHPUT:
                continue
            for r in cfg.sweep.distances:
                for t in cfg.sweep.thresholds:
                    res, err = failures.guard(coverage_point, params, float(t), float(r))
                    records.append({"point": {**point, "quantity": "coverage", "threshold": float(t),
                                              "distance_m": float(r)},
                                    **(res or {"pass": False}), "error": err})
    all_pass = all(rec["pass"] for rec in records)
    _emit_json({"records": records, "all_pass": all_pass}, out)
    _finish(failures)


def run():  # console-script entry point
    try:
        main(standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except click.exceptions.Abort:
        sys.exit(1)
    except RisInvestError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    run()
