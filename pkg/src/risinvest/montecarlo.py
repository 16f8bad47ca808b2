"""Monte Carlo simulation of the clustered BS/RIS network.

The typical UE sits at the origin.  Two samplers share the same
propagation model:

* :func:`sample_network` and :func:`realize_sinr` build one explicit
  network in a disc and evaluate its SINR.  They are meant for inspection
  and for cross-checking the batch sampler.
* :func:`draw_sinr` (behind :func:`estimate_coverage` and
  :func:`estimate_rate`) draws many independent networks at once.  Only
  the distances that enter the SINR are sampled: the serving distance, the
  interferer distances (a PPP in the annulus beyond the serving BS) and the
  serving cluster's RIS positions.

Conditioning on a serving distance ``r`` is exact: by independence of a
PPP on disjoint sets, the network given "nearest BS at r" is a BS at r
plus a PPP on ``|x| > r``.
"""

from __future__ import annotations

import enum
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .model import Scenario, SystemParams, hole_distance, pathloss

__all__ = [
    "SamplingMode",
    "Interference",
    "NetworkSample",
    "SinrSample",
    "McEstimate",
    "window_for",
    "sample_network",
    "realize_sinr",
    "draw_sinr",
    "estimate_coverage",
    "estimate_rate",
]

_TRUNCATION = 1e-3
_BATCH_POINTS = 4_000_000


class SamplingMode(str, enum.Enum):
    CONDITIONED_R = "conditioned_r"
    TYPICAL_WITH_GUARD = "typical_with_guard"


@dataclass(frozen=True)
class Interference:
    """Cross-cluster reflections: each foreign RIS hits the UE with probability ``p``.

    ``p = 0`` is the neglect mode.  ``beamwidth_deg`` is informational.
    """

    p: float = 0.0
    beamwidth_deg: float | None = None

    def __post_init__(self):
        if not 0 <= self.p <= 1:
            raise ParameterError("overlap probability must lie in [0, 1]")

    @classmethod
    def neglect(cls) -> "Interference":
        return cls(0.0)

    @classmethod
    def overlap(cls, p: float, beamwidth_deg: float | None = None) -> "Interference":
        return cls(p, beamwidth_deg)


@dataclass(frozen=True)
class NetworkSample:
    bs_points: np.ndarray
    ris_points: list
    serving_index: int
    seed: int | None


@dataclass(frozen=True)
class SinrSample:
    signal_direct: float
    signal_reflected: float
    interference: float
    sinr: float


@dataclass(frozen=True)
class McEstimate:
    value: float
    stderr: float
    n_samples: int


def window_for(distance: float, alpha: float) -> float:
    """Radius beyond which the mean interference is below 0.1% of that inside.

    Interference from a PPP beyond radius R scales as ``R^(2-alpha)``, so
    the truncated share relative to the annulus starting at ``distance``
    is ``(distance / R)^(alpha - 2)``.
    """
    return max(distance, 1.0) * _TRUNCATION ** (-1.0 / (alpha - 2.0))


def _ring_radii(rng, n, params):
    u = rng.random(n)
    return np.sqrt(params.r_in ** 2 + u * (params.r_out ** 2 - params.r_in ** 2))


def _beam_power(rng, n, params, rician_k=None):
    """Squared reflected-beam amplitudes.

    Default: Gaussian amplitude with the aggregated moments.  With
    ``rician_k=(k1, k2)`` each beam sums ``M`` products of unit-power
    Rician magnitudes instead.
    """
    if rician_k is None:
        x = rng.normal(params.beam_mean, math.sqrt(params.beam_var), n)
        return x * x
    out = np.empty(n)
    m = params.m_elements
    for i in range(n):
        amp = np.ones(m)
        for k in rician_k:
            los = math.sqrt(k / (k + 1.0))
            sd = math.sqrt(0.5 / (k + 1.0))
            amp = amp * np.abs(los + sd * (rng.standard_normal(m) + 1j * rng.standard_normal(m)))
        out[i] = amp.sum() ** 2
    return out


def sample_network(params: SystemParams, window_radius: float, seed: int | None = None) -> NetworkSample:
    """One explicit network in the disc of ``window_radius`` around the origin."""
    if not window_radius > 0:
        raise ParameterError("window_radius must be positive")
    rng = np.random.default_rng(seed)
    n = rng.poisson(params.lambda_bs * math.pi * window_radius ** 2)
    rad = window_radius * np.sqrt(rng.random(n))
    ang = rng.uniform(0.0, 2.0 * math.pi, n)
    bs = np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
    counts = rng.poisson(params.ris_per_cluster, n)
    ris = []
    for i in range(n):
        y = _ring_radii(rng, counts[i], params)
        phi = rng.uniform(0.0, 2.0 * math.pi, counts[i])
        ris.append(bs[i] + np.column_stack([y * np.cos(phi), y * np.sin(phi)]))
    serving = int(np.argmin(rad)) if n else -1
    return NetworkSample(bs, ris, serving, seed)


def realize_sinr(net: NetworkSample, params: SystemParams, interference: Interference | None = None,
                 rng=None, rician_k=None) -> SinrSample:
    """SINR of the UE at the origin for one network and one fading draw.

    The serving BS is ``net.serving_index``; its RISs add their reflected
    beams.  In the coverage-hole scenario the direct link is divided by K.
    """
    interference = interference or Interference.neglect()
    rng = np.random.default_rng(rng)
    if net.serving_index < 0:
        return SinrSample(0.0, 0.0, 0.0, 0.0)
    dist = np.hypot(net.bs_points[:, 0], net.bs_points[:, 1])
    k = params.penalty_k if params.scenario is Scenario.COVERAGE_HOLE else 1.0
    fade = rng.exponential(1.0, len(dist))
    power = params.p0 * fade * pathloss(dist, params)
    direct = float(power[net.serving_index]) / k
    interf = float(power.sum() - power[net.serving_index])
    reflected = 0.0
    for i, pts in enumerate(net.ris_points):
        if len(pts) == 0:
            continue
        if i != net.serving_index:
            pts = pts[rng.random(len(pts)) < interference.p]
            if len(pts) == 0:
                continue
        y = np.hypot(*(pts - net.bs_points[i]).T)
        gain = pathloss(y, params) * pathloss(np.hypot(pts[:, 0], pts[:, 1]), params)
        beams = params.p0 * _beam_power(rng, len(pts), params, rician_k) * gain
        if i == net.serving_index:
            reflected += float(beams.sum())
        else:
            interf += float(beams.sum())
    sinr = (direct + reflected) / (interf + params.noise_power)
    return SinrSample(direct, reflected, interf, sinr)


def _serving_distances(rng, n, params, mode, r):
    if params.scenario is Scenario.COVERAGE_HOLE:
        return np.full(n, hole_distance(params.lambda_bs, params.c_hole)[0])
    if mode is SamplingMode.CONDITIONED_R:
        return np.full(n, float(r))
    if not params.lambda_bs > 0:
        raise ParameterError("typical-UE sampling needs lambda_bs > 0")
    return np.sqrt(rng.exponential(1.0, n) / (math.pi * params.lambda_bs))


def _child(seed, k):
    """``k``-th child of a seed sequence, without mutating the parent."""
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.SeedSequence(seq.entropy, spawn_key=tuple(seq.spawn_key) + (k,))


def _batch(params, n, seed, mode, r, interference, window_radius, rician_k):
    # the overlap draws use their own stream so that switching overlap on
    # leaves the network, fading and serving-cluster draws unchanged
    rng = np.random.default_rng(_child(seed, 0))
    extra = np.random.default_rng(_child(seed, 1))
    p = params
    dist = _serving_distances(rng, n, p, mode, r)
    k = p.penalty_k if p.scenario is Scenario.COVERAGE_HOLE else 1.0
    direct = p.p0 * rng.exponential(1.0, n) * pathloss(dist, p) / k

    # interferers: PPP on the annulus (dist, R)
    outer = np.full(n, float(window_radius)) if window_radius else window_for(1.0, p.alpha) * np.maximum(dist, 1.0)
    outer = np.maximum(outer, dist)
    counts = rng.poisson(p.lambda_bs * math.pi * (outer ** 2 - dist ** 2))
    owner = np.repeat(np.arange(n), counts)
    d2 = dist[owner] ** 2 + rng.random(owner.size) * (outer[owner] ** 2 - dist[owner] ** 2)
    d_int = np.sqrt(d2)
    interf = np.bincount(owner, p.p0 * rng.exponential(1.0, owner.size) * pathloss(d_int, p), minlength=n)

    if interference.p > 0 and owner.size:
        # foreign RISs that happen to point at the UE: a thinned PPP per interferer
        hits = extra.poisson(interference.p * p.ris_per_cluster, owner.size)
        src = np.repeat(np.arange(owner.size), hits)
        y = _ring_radii(extra, src.size, p)
        psi = extra.uniform(0.0, 2.0 * math.pi, src.size)
        leg = np.sqrt(np.maximum(d2[src] + y * y - 2.0 * d_int[src] * y * np.cos(psi), 0.0))
        gain = pathloss(y, p) * pathloss(leg, p)
        beams = p.p0 * _beam_power(extra, src.size, p, rician_k) * gain
        interf += np.bincount(owner[src], beams, minlength=n)

    # the serving cluster's reflected beams
    n_ris = rng.poisson(p.ris_per_cluster, n)
    host = np.repeat(np.arange(n), n_ris)
    y = _ring_radii(rng, host.size, p)
    psi = rng.uniform(0.0, 2.0 * math.pi, host.size)
    r_h = dist[host]
    leg = np.sqrt(np.maximum(r_h * r_h + y * y - 2.0 * r_h * y * np.cos(psi), 0.0))
    gain = pathloss(y, p) * pathloss(leg, p)
    reflected = np.bincount(host, p.p0 * _beam_power(rng, host.size, p, rician_k) * gain, minlength=n)

    sinr = (direct + reflected) / (interf + p.noise_power)
    if p.scenario is Scenario.THROUGHPUT and mode is SamplingMode.TYPICAL_WITH_GUARD:
        # UEs inside the guard zone count as zero rate
        sinr = np.where(dist >= p.r_guard, sinr, 0.0)
    return {"distance": dist, "direct": direct, "reflected": reflected, "interference": interf, "sinr": sinr}


def draw_sinr(params: SystemParams, n_samples: int, seed: int | None = None,
              mode: SamplingMode | str = SamplingMode.TYPICAL_WITH_GUARD, r: float | None = None,
              interference: Interference | None = None, window_radius: float | None = None,
              threads: int = 1, rician_k=None) -> dict:
    """``n_samples`` independent network and fading realizations.

    Returns arrays ``distance``, ``direct``, ``reflected``,
    ``interference`` and ``sinr``.  In ``typical_with_guard`` mode draws
    whose nearest BS is closer than ``r_guard`` get SINR 0.  The result
    depends only on ``seed`` and ``n_samples``, not on ``threads``.
    """
    if n_samples < 1:
        raise ParameterError("n_samples must be >= 1")
    mode = SamplingMode(mode)
    if mode is SamplingMode.CONDITIONED_R and params.scenario is Scenario.THROUGHPUT and r is None:
        raise ParameterError("conditioned_r sampling needs a serving distance r")
    interference = interference or Interference.neglect()
    if params.scenario is Scenario.COVERAGE_HOLE:
        ref = hole_distance(params.lambda_bs, params.c_hole)[0]
    elif mode is SamplingMode.CONDITIONED_R:
        ref = float(r)
    else:
        ref = 2.0 / math.sqrt(params.lambda_bs)
    per_sample = 1.0 + params.lambda_bs * math.pi * (window_radius or window_for(ref, params.alpha)) ** 2
    size = int(max(1, min(n_samples, _BATCH_POINTS // per_sample)))
    sizes = [size] * (n_samples // size) + ([n_samples % size] if n_samples % size else [])
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))

    def job(i):
        return _batch(params, sizes[i], seeds[i], mode, r, interference, window_radius, rician_k)

    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(job, range(len(sizes))))
    else:
        parts = [job(i) for i in range(len(sizes))]
    return {key: np.concatenate([part[key] for part in parts]) for key in parts[0]}


def _dump(path, seed, draws):
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(draws["sinr"].size):
            rec = {"seed": seed, "index": i}
            rec.update({key: float(val[i]) for key, val in draws.items()})
            fh.write(json.dumps(rec) + "\n")


def estimate_coverage(params: SystemParams, threshold: float, r: float | None, n_samples: int,
                      seed: int | None = None, interference: Interference | None = None,
                      window_radius: float | None = None, threads: int = 1,
                      dump_path=None) -> McEstimate:
    """Fraction of draws with ``SINR >= threshold`` at serving distance ``r``.

    ``r=None`` averages over the typical UE (guard-zone draws fail).
    """
    if threshold <= 0:
        return McEstimate(1.0, 0.0, n_samples)
    mode = SamplingMode.TYPICAL_WITH_GUARD if r is None else SamplingMode.CONDITIONED_R
    draws = draw_sinr(params, n_samples, seed, mode, r, interference, window_radius, threads)
    if dump_path:
        _dump(dump_path, seed, draws)
    hit = draws["sinr"] >= threshold
    p = float(hit.mean())
    return McEstimate(p, math.sqrt(p * (1.0 - p) / n_samples), n_samples)


def estimate_rate(params: SystemParams, n_samples: int, seed: int | None = None,
                  mode: SamplingMode | str = SamplingMode.TYPICAL_WITH_GUARD, r: float | None = None,
                  interference: Interference | None = None, window_radius: float | None = None,
                  threads: int = 1, dump_path=None, rician_k=None) -> McEstimate:
    """Sample mean of ``ln(1 + SINR)`` (nats) and its standard error."""
    draws = draw_sinr(params, n_samples, seed, mode, r, interference, window_radius, threads, rician_k)
    if dump_path:
        _dump(dump_path, seed, draws)
    rate = np.log1p(draws["sinr"])
    err = float(rate.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else math.inf
    return McEstimate(float(rate.mean()), err, n_samples)
