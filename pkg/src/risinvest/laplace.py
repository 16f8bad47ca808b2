"""Laplace transforms of interference, reflected signal and noise.

The bilateral transform of ``Upsilon = T (I + noise) - S_R`` factorizes as

    B(z; T) = exp(lambda_bs * D_BS(z T) + lambda_ris * D_RIS(z) - z T noise)

:class:`UpsilonTransform` binds the geometry for one serving distance and
evaluates that product (and its density derivatives) on whole arrays of
complex arguments and thresholds at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import roots_legendre

from .errors import OutsideROCError, ParameterError, PoleError, QuadratureError
from .quadrature import discrete_gauss
from .model import (
    Scenario,
    SystemParams,
    hole_distance,
    pathloss,
    pathloss_derivative,
    reflected_pathloss,
    reflected_pathloss_dr,
)

__all__ = [
    "RocBounds",
    "RingRule",
    "UpsilonTransform",
    "lt_direct_fading",
    "lt_beam_power",
    "exponent_D_BS",
    "exponent_D_RIS",
    "b_upsilon",
    "probe_roc",
    "max_ring_gain",
]

_GL16 = roots_legendre(16)
_TAIL_RATIO = 0.1
_TAIL_TERMS = 18
_CHUNK = 2048


@dataclass(frozen=True)
class RocBounds:
    s_a: float
    s_b: float

    def __post_init__(self):
        if not self.s_a < 0 < self.s_b:
            raise ParameterError(f"ROC bounds out of order: s_a={self.s_a}, s_b={self.s_b}")

    def contains(self, s: float) -> bool:
        return self.s_a < s < self.s_b


def lt_direct_fading(z):
    """Laplace transform of a unit-mean exponential variable, ``1 / (1 + z)``."""
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(1.0 + z) < 1e-300):
        raise PoleError("Rayleigh transform evaluated at its pole z = -1")
    out = 1.0 / (1.0 + z)
    return out if out.ndim else complex(out)


def lt_beam_power(s, m, zeta_mean, zeta_var):
    """Transform of a squared Gaussian beam amplitude with mean ``m E`` and variance ``m V``."""
    s = np.asarray(s, dtype=complex)
    b = m * zeta_var
    boundary = -1.0 / (2.0 * b)
    if np.any(s.real <= boundary):
        raise OutsideROCError(f"Re(s) must exceed {boundary:.6g} for the beam-power transform",
                              s_b=-boundary)
    q = 1.0 + 2.0 * s * b
    out = np.exp(-s * (m * zeta_mean) ** 2 / q) / np.sqrt(q)
    return out if out.ndim else complex(out)


def _beam_and_slope(x, a2, b, slope=True):
    """``l(x) = L(-x)`` for the beam power and, if requested, ``dl/dx``."""
    q = 1.0 - 2.0 * x * b
    ell = np.exp(x * a2 / q) / np.sqrt(q)
    if not slope:
        return ell, None
    return ell, ell * (a2 + b - 2.0 * x * b * b) / (q * q)


# --- interference exponent ---------------------------------------------------


def _kernels(at, alpha, want_slope):
    """Universal interference integrals over ``xi in [1, inf)``.

    ``phi_k = int xi^k at xi^-a / (1 + at xi^-a)`` and, optionally,
    ``psi_k = int xi^(k-a) / (1 + at xi^-a)^2`` for ``k = 0, 1``.
    """
    at = np.asarray(at, dtype=complex).ravel()
    n = at.size
    phi0 = np.empty(n, dtype=complex)
    phi1 = np.empty(n, dtype=complex)
    psi0 = np.empty(n, dtype=complex) if want_slope else None
    psi1 = np.empty(n, dtype=complex) if want_slope else None
    mag = np.abs(at)
    top = np.maximum(1.0, (mag / _TAIL_RATIO) ** (1.0 / alpha))

    # tail beyond xi = top as a geometric series in eps = at * top^-alpha
    eps = at * top ** (-alpha)
    j = np.arange(1, _TAIL_TERMS + 1)
    powers = eps[:, None] ** j[None, :]
    sign = (-1.0) ** (j + 1)
    phi0[:] = top * np.sum(sign * powers / (j * alpha - 1.0), axis=1)
    phi1[:] = top ** 2 * np.sum(sign * powers / (j * alpha - 2.0), axis=1)
    if want_slope:
        j0 = j - 1
        pw0 = eps[:, None] ** j0[None, :]
        coef = (-1.0) ** j0 * j
        psi0[:] = top ** (1.0 - alpha) * np.sum(coef * pw0 / (j * alpha - 1.0), axis=1)
        psi1[:] = top ** (2.0 - alpha) * np.sum(coef * pw0 / (j * alpha - 2.0), axis=1)

    # finite part on [1, top] in eta = ln(xi), composite Gauss-Legendre
    idx = np.flatnonzero(top > 1.0)
    if idx.size:
        eta_max = np.log(top[idx])
        angle = np.abs(np.angle(at[idx]))
        clearance = max(float(np.min(math.pi - angle)), 0.05) / alpha
        width = min(0.5, 2.0 * clearance)
        panels = max(1, int(math.ceil(float(eta_max.max()) / width)))
        t, w = _GL16
        base = (np.arange(panels)[:, None] + 0.5 * (t[None, :] + 1.0)).ravel() / panels
        wts = np.tile(0.5 * w, panels) / panels
        for start in range(0, idx.size, _CHUNK):
            sel = idx[start:start + _CHUNK]
            em = eta_max[start:start + _CHUNK]
            eta = em[:, None] * base[None, :]
            xi = np.exp(eta)
            jac = em[:, None] * wts[None, :] * xi
            a = at[sel][:, None]
            xin = xi ** (-alpha)
            den = 1.0 + a * xin
            f = a * xin / den * jac
            phi0[sel] += np.sum(f, axis=1)
            phi1[sel] += np.sum(f * xi, axis=1)
            if want_slope:
                g = xin / (den * den) * jac
                psi0[sel] += np.sum(g, axis=1)
                psi1[sel] += np.sum(g * xi, axis=1)
    return phi0, phi1, psi0, psi1


def _interference_pole_check(at):
    # 1 + at * tau, tau in (0, 1], must stay away from zero with a convergent real part
    at = np.asarray(at, dtype=complex)
    if np.any(1.0 + at.real <= 0.0):
        raise OutsideROCError("interference transform evaluated left of its region of convergence")


# --- ring geometry -----------------------------------------------------------


def max_ring_gain(r: float, params: SystemParams) -> float:
    """Largest reflected gain ``G(r, y, psi)`` over the cluster ring.

    For fixed ``y`` the second leg is shortest at ``psi = 0``, so only ``y``
    is searched: a coarse grid followed by bounded refinement.
    """
    def neg(y):
        return -float(pathloss(y, params) * pathloss(abs(r - y), params))

    ys = np.linspace(params.r_in, params.r_out, 201)
    vals = pathloss(ys, params) * pathloss(np.abs(r - ys), params)
    k = int(np.argmax(vals))
    lo = ys[max(k - 1, 0)]
    hi = ys[min(k + 1, ys.size - 1)]
    best = float(vals[k])
    if hi > lo:
        res = minimize_scalar(neg, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
        best = max(best, -float(res.fun))
    return best


@dataclass
class RingRule:
    """Quadrature rule for ``int_{r_in}^{r_out} int_0^{2 pi} (.) y dpsi dy``.

    ``weight`` already contains the ``y`` Jacobian and the factor two from
    folding ``psi`` onto ``[0, pi]``.  ``gain_dr`` is ``None`` for rules
    that were compressed and no longer carry geometry.
    """

    weight: np.ndarray
    gain: np.ndarray
    gain_dr: np.ndarray | None

    @classmethod
    def build(cls, r: float, params: SystemParams, order: int = 12, split: int = 1) -> "RingRule":
        """Tensor Gauss-Legendre rule, graded towards ``psi = 0`` and towards ``y = r``.

        ``split`` subdivides every panel in both directions.
        """
        r_in, r_out = params.r_in, params.r_out
        closest = 0.0 if r_in <= r <= r_out else min(abs(r - r_in), abs(r - r_out))
        # angular width of the reflected-gain peak around psi = 0
        width = min(math.pi, max(1e-4, (1.0 + closest) / max(r, 1.0)))
        levels = max(0, int(math.ceil(math.log2(math.pi / width))))
        psi_edges = np.concatenate([[0.0], math.pi * 2.0 ** -np.arange(levels, -1, -1.0)])
        if r_in < r < r_out:
            y_edges = _graded_edges(r_in, r_out, r)
        else:
            y_edges = np.linspace(r_in, r_out, 3)
        psi_edges = _subdivide(psi_edges, split)
        y_edges = _subdivide(y_edges, split)
        t, w = roots_legendre(order)
        y_nodes, y_w = _composite(y_edges, t, w)
        p_nodes, p_w = _composite(psi_edges, t, w)
        yy, pp = np.meshgrid(y_nodes, p_nodes, indexing="ij")
        ww = (y_w * y_nodes)[:, None] * (2.0 * p_w)[None, :]
        return cls(
            weight=ww.ravel(),
            gain=reflected_pathloss(r, yy, pp, params).ravel(),
            gain_dr=reflected_pathloss_dr(r, yy, pp, params).ravel(),
        )

    def compressed(self, width: float = 0.25, points: int = 10) -> "RingRule":
        """Equivalent rule with far fewer atoms for integrands that depend on the gain only.

        Atoms are grouped into panels of ``width`` in ``log G`` and every
        group is replaced by its ``points``-point Gauss rule.
        """
        u = np.log(self.gain)
        lo = float(u.min())
        bins = np.floor((u - lo) / width).astype(int)
        order = np.argsort(bins, kind="stable")
        bins_sorted = bins[order]
        cuts = np.flatnonzero(np.diff(bins_sorted)) + 1
        nodes, weights = [], []
        for group in np.split(order, cuts):
            xg, wg = discrete_gauss(u[group], self.weight[group], points)
            nodes.append(xg)
            weights.append(wg)
        u_c = np.concatenate(nodes)
        return RingRule(weight=np.concatenate(weights), gain=np.exp(u_c), gain_dr=None)

    @property
    def size(self) -> int:
        return int(self.weight.size)


def _subdivide(edges, split):
    if split <= 1:
        return edges
    parts = [np.linspace(a, b, split + 1)[:-1] for a, b in zip(edges[:-1], edges[1:])]
    return np.concatenate(parts + [edges[-1:]])


def _graded_edges(a, b, c):
    left = c - a
    right = b - c
    edges = {a, b, c}
    for k in range(1, 12):
        edges.add(c - left * 2.0 ** -k)
        edges.add(c + right * 2.0 ** -k)
    return np.array(sorted(edges))


def _composite(edges, t, w):
    lo = edges[:-1, None]
    hi = edges[1:, None]
    nodes = 0.5 * (lo + hi) + 0.5 * (hi - lo) * t[None, :]
    weights = 0.5 * (hi - lo) * w[None, :]
    return nodes.ravel(), weights.ravel()


# --- the bound transform -----------------------------------------------------


class UpsilonTransform:
    """Transform of ``Upsilon`` for a UE at ``distance`` from its serving BS.

    ``distance`` is both the lower limit of the interference field and the
    BS-UE leg used in the reflected gain.  For the coverage-hole scenario
    callers pass ``r_H``.
    """

    def __init__(self, params: SystemParams, distance: float, ring_tol: float = 1e-10):
        if not distance >= 0:
            raise ParameterError("distance must be non-negative")
        self.params = params
        self.distance = float(distance)
        self.v0 = 1.0 + self.distance
        self.g_r = float(pathloss(self.distance, params))
        self.ring_tol = ring_tol
        self._rules: dict = {}

    def rebind(self, params: SystemParams) -> "UpsilonTransform":
        """Same distance and ring rules, different densities or noise.

        The ring rules depend only on geometry, so they are shared with the
        returned object.
        """
        if params is self.params:
            return self
        twin = UpsilonTransform.__new__(UpsilonTransform)
        twin.__dict__.update(self.__dict__)
        twin.params = params
        return twin

    # geometry ---------------------------------------------------------------

    @cached_property
    def ring_gain_max(self) -> float:
        return max_ring_gain(self.distance, self.params)

    @property
    def s_b(self) -> float:
        """Right edge of the strip imposed by the beam-power transform."""
        p = self.params
        if p.lambda_ris == 0:
            return math.inf
        return 1.0 / (2.0 * p.beam_var * p.p0 * self.ring_gain_max)

    @property
    def ring(self) -> RingRule:
        """Compressed ring rule, verified against :attr:`fine_ring` on probe arguments."""
        if "compressed" not in self._rules:
            self._rules["compressed"] = self._compressed_ring()
        return self._rules["compressed"]

    @property
    def fine_ring(self) -> RingRule:
        """Tensor ring rule refined until successive refinements agree."""
        if "fine" not in self._rules:
            self._rules["fine"] = self._converged_ring()
        return self._rules["fine"]

    def _exponent_tol(self) -> float:
        # tolerance on D_RIS itself; at least one RIS per ring is assumed so
        # that the lambda_ris derivative is resolved even when lambda_ris = 0
        return self.ring_tol / max(self.params.lambda_ris, 1.0 / self.params.ring.area)

    def _converged_ring(self) -> RingRule:
        p = self.params
        probes = self._ring_probes()
        tol = self._exponent_tol()
        schedule = ((12, 1), (12, 2), (16, 2), (16, 4), (16, 8), (24, 8))
        rule = RingRule.build(self.distance, p, *schedule[0])
        current = self._d_ris_with(rule, probes)
        gap = math.inf
        for order, split in schedule[1:]:
            finer = RingRule.build(self.distance, p, order, split)
            nxt = self._d_ris_with(finer, probes)
            gap = float(np.max(np.abs(nxt - current)))
            if gap <= tol:
                return finer
            rule, current = finer, nxt
        raise QuadratureError(
            f"ring rule did not converge at r={self.distance:.6g} (last change {gap:.3g})",
            estimate=current, error=gap)

    def _compressed_ring(self) -> RingRule:
        fine = self.fine_ring
        probes = self._ring_probes()
        reference = self._d_ris_with(fine, probes)
        tol = self._exponent_tol()
        for width in (0.25, 0.125, 0.0625):
            small = fine.compressed(width=width, points=10)
            if float(np.max(np.abs(self._d_ris_with(small, probes) - reference))) <= tol:
                return small
        return fine

    @property
    def ring_dr(self) -> RingRule:
        """Signed rule for ``sum W G_dr f(G)``, the distance derivative of the ring sum."""
        if "dr" not in self._rules:
            self._rules["dr"] = self._compressed_ring_dr()
        return self._rules["dr"]

    def _compressed_ring_dr(self) -> RingRule:
        fine = self.fine_ring
        signed = fine.weight * fine.gain_dr
        direct = RingRule(weight=signed, gain=fine.gain, gain_dr=None)
        probes = self._ring_probes()
        reference = self._ring_sums(probes, direct, self.params.p0, True)[1]
        tol = self._exponent_tol() / max(self.distance, 1.0)
        for width in (0.25, 0.125, 0.0625):
            parts = []
            for sign in (1.0, -1.0):
                keep = sign * signed > 0
                if np.any(keep):
                    part = RingRule(weight=sign * signed[keep], gain=fine.gain[keep], gain_dr=None)
                    small = part.compressed(width=width, points=10)
                    parts.append((sign * small.weight, small.gain))
            rule = RingRule(weight=np.concatenate([w for w, _ in parts]),
                            gain=np.concatenate([g for _, g in parts]), gain_dr=None)
            got = self._ring_sums(probes, rule, self.params.p0, True)[1]
            if float(np.max(np.abs(got - reference))) <= tol:
                return rule
        return direct

    def _ring_probes(self):
        # the transform is only ever needed near s = K / (P0 g(r)) and on the
        # line s - i u through it, so the rule is tested there
        p = self.params
        k = p.penalty_k if p.scenario is Scenario.COVERAGE_HOLE else 1.0
        s_eval = k / (p.p0 * self.g_r)
        x_eval = s_eval * p.p0 * self.ring_gain_max
        a = p.beam_mean
        b = p.beam_var
        reach = 10.0 / (a * math.sqrt(b)) if a > 0 else 10.0 / b
        spread = self.ring_gain_max / max(float(np.min(self._coarse_gain())), 1e-300)
        nu_top = max(10.0, reach * spread / x_eval)
        nu = np.geomspace(1e-2, nu_top, 10)
        s_ok = min(s_eval, 0.5 * self.s_b)
        return np.concatenate([[0.5 * s_ok, s_ok], -1j * s_ok * nu, s_ok * (1.0 - 1j * nu)])

    def _coarse_gain(self):
        p = self.params
        ys = np.linspace(p.r_in, p.r_out, 9)
        return pathloss(ys, p) * pathloss(self.distance + ys, p)

    def _d_ris_with(self, rule: RingRule, z):
        return self._ring_sums(np.asarray(z, dtype=complex).ravel(), rule, None, False)[0]

    # exponents --------------------------------------------------------------

    def check_roc(self, z, thresholds=None):
        z = np.asarray(z, dtype=complex)
        if np.any(z.real >= self.s_b):
            raise OutsideROCError(
                f"Re(s) reaches the beam-power boundary s_b={self.s_b:.6g}", s_b=self.s_b)
        if thresholds is not None:
            t = np.atleast_1d(np.asarray(thresholds, dtype=float))
            at = (z.ravel()[:, None] * t[None, :]) * (self.params.p0 * self.g_r)
            _interference_pole_check(at)

    def d_bs(self, w, slope=False):
        """``D_BS(w)`` (and ``dD_BS/dw`` when ``slope``) for an array ``w = z T``."""
        p = self.params
        w = np.asarray(w, dtype=complex)
        shape = w.shape
        at = w.ravel() * (p.p0 * self.g_r)
        _interference_pole_check(at)
        phi0, phi1, psi0, psi1 = _kernels(at, p.alpha, slope)
        v0 = self.v0
        val = (-2.0 * math.pi * (v0 * v0 * phi1 - v0 * phi0)).reshape(shape)
        if not slope:
            return val
        dval = -2.0 * math.pi * p.p0 * p.beta * (v0 ** (2.0 - p.alpha) * psi1 - v0 ** (1.0 - p.alpha) * psi0)
        return val, dval.reshape(shape)

    def d_bs_boundary(self, w):
        """Derivative of ``D_BS(w)`` with respect to its lower limit."""
        at = np.asarray(w, dtype=complex) * (self.params.p0 * self.g_r)
        return 2.0 * math.pi * self.distance * at / (1.0 + at)

    def d_ris(self, z, slopes=False):
        """``D_RIS(z)``; with ``slopes`` also ``dD_RIS/dz`` and ``dD_RIS/dr``."""
        p = self.params
        z = np.asarray(z, dtype=complex)
        shape = z.shape
        zf = z.ravel()
        if np.any(zf.real >= self.s_b):
            raise OutsideROCError(f"Re(s) reaches the beam-power boundary s_b={self.s_b:.6g}",
                                  s_b=self.s_b)
        val, dz = self._ring_sums(zf, self.ring, p.p0 * self.ring.gain, slopes)
        if not slopes:
            return val.reshape(shape)
        _, dr = self._ring_sums(zf, self.ring_dr, p.p0, True)
        return val.reshape(shape), dz.reshape(shape), (zf * dr).reshape(shape)

    def _ring_sums(self, zf, rule, factor, want_slope):
        # -sum W (1 - l(z P0 G)) and sum W l'(z P0 G) * factor
        p = self.params
        a2 = p.beam_mean ** 2
        b = p.beam_var
        val = np.empty(zf.size, dtype=complex)
        slope = np.empty(zf.size, dtype=complex) if want_slope else None
        chunk = max(1, 2_000_000 // rule.size)
        for start in range(0, zf.size, chunk):
            x = zf[start:start + chunk, None] * (p.p0 * rule.gain)[None, :]
            ell, ell_dx = _beam_and_slope(x, a2, b, want_slope)
            val[start:start + chunk] = -np.sum(rule.weight * (1.0 - ell), axis=1)
            if want_slope:
                slope[start:start + chunk] = np.sum(rule.weight * ell_dx * factor, axis=1)
        return val, slope

    def log_b(self, z, thresholds):
        """``log B(z; T)`` on the outer product of ``z`` (rows) and ``T`` (columns)."""
        p = self.params
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        t = np.atleast_1d(np.asarray(thresholds, dtype=float))
        out = -(z[:, None] * t[None, :]) * p.noise_power
        if p.lambda_bs > 0:
            out = out + p.lambda_bs * self.d_bs(z[:, None] * t[None, :])
        if p.lambda_ris > 0:
            out = out + p.lambda_ris * self.d_ris(z)[:, None]
        return out

    def b(self, z, thresholds):
        return np.exp(self.log_b(z, thresholds))

    def evaluate(self, z, thresholds, want=("b",), hole=None, s_channel=True):
        """``B`` and its density derivatives on the ``z x T`` grid.

        ``want`` may contain ``"b"``, ``"d_bs"`` and ``"d_ris"``.  ``hole``
        is ``(dr_dlambda, ds_dlambda)`` for the coverage-hole scenario, where
        the distance and the evaluation point move with ``lambda_bs``;
        ``s_channel`` says whether ``z`` itself carries that evaluation point
        (true for ``s - iu``, false for ``-iu``).
        """
        p = self.params
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        t = np.atleast_1d(np.asarray(thresholds, dtype=float))
        w = z[:, None] * t[None, :]
        need_bs = "d_bs" in want
        need_slopes = need_bs and hole is not None
        if need_slopes:
            dbs, dbs_dw = self.d_bs(w, slope=True)
            dris, dris_dz, dris_dr = self.d_ris(z, slopes=True)
        else:
            dbs = self.d_bs(w) if (p.lambda_bs > 0 or need_bs) else np.zeros_like(w)
            dris = self.d_ris(z) if (p.lambda_ris > 0 or "d_ris" in want) else np.zeros_like(z)
        logb = p.lambda_bs * dbs + p.lambda_ris * dris[:, None] - w * p.noise_power
        bval = np.exp(logb)
        out = {}
        if "b" in want:
            out["b"] = bval
        if "d_ris" in want:
            out["d_ris"] = bval * dris[:, None]
        if need_bs:
            dlog = dbs.copy()
            if hole is not None:
                r_dot, s_dot = hole
                dlog = dlog + p.lambda_bs * self.d_bs_boundary(w) * r_dot
                dlog = dlog + p.lambda_ris * (dris_dr * r_dot)[:, None]
                if s_channel:
                    dlog = dlog + p.lambda_bs * dbs_dw * (t[None, :] * s_dot)
                    dlog = dlog + p.lambda_ris * (dris_dz * s_dot)[:, None]
                    dlog = dlog - t[None, :] * p.noise_power * s_dot
            out["d_bs"] = bval * dlog
        return out


def _distance_for(serve_dist, params: SystemParams):
    if params.scenario is Scenario.COVERAGE_HOLE:
        return hole_distance(params.lambda_bs, params.c_hole)[0]
    return serve_dist


def exponent_D_BS(s, threshold, r_min, params: SystemParams):
    """``-2 pi int_{r_min}^inf x w P0 g(x) / (1 + w P0 g(x)) dx`` at ``w = s T``."""
    kernel = UpsilonTransform(params, r_min)
    out = kernel.d_bs(np.asarray(s, dtype=complex) * threshold)
    return out if np.ndim(out) else complex(out)


def exponent_D_RIS(s, serve_dist, params: SystemParams):
    """Ring exponent ``-int int y (1 - L(-s P0 G)) dy dpsi``."""
    kernel = UpsilonTransform(params, serve_dist)
    out = kernel.d_ris(np.asarray(s, dtype=complex))
    return out if np.ndim(out) else complex(out)


def b_upsilon(s, threshold, serve_dist, params: SystemParams):
    """``B_Upsilon(s)`` for threshold ``T``; in the coverage-hole scenario the distance is ``r_H``."""
    kernel = UpsilonTransform(params, _distance_for(serve_dist, params))
    s_arr = np.asarray(s, dtype=complex)
    out = kernel.b(s_arr.ravel(), [threshold])[:, 0].reshape(s_arr.shape)
    return out if out.ndim else complex(out)


def probe_roc(threshold, serve_dist, params: SystemParams) -> RocBounds:
    """Closed-form strip of convergence and a check of the evaluation point.

    ``s_a`` comes from the Rayleigh pole of the nearest interferer and
    ``s_b`` from the beam-power transform at the strongest ring point.
    """
    p = params
    if p.scenario is Scenario.COVERAGE_HOLE:
        r = hole_distance(p.lambda_bs, p.c_hole)[0]
        s_eval = p.penalty_k / (p.p0 * float(pathloss(r, p)))
    else:
        r = serve_dist
        s_eval = 1.0 / (p.p0 * float(pathloss(r, p)))
    g_lower = float(pathloss(r, p))
    s_a = -math.inf if (threshold == 0 or p.lambda_bs == 0) else -1.0 / (threshold * p.p0 * g_lower)
    s_b = UpsilonTransform(p, r).s_b
    if not s_a < 0 < s_eval < s_b:
        raise OutsideROCError(
            f"evaluation point s={s_eval:.6g} lies outside the strip ({s_a:.6g}, {s_b:.6g})",
            s_a=s_a, s_b=s_b)
    return RocBounds(s_a, s_b)
