"""Coverage probability and ergodic rate from the transform of ``Upsilon``.

The one-sided quantity ``B_plus(s) = E[min(1, exp(-s Upsilon))]`` is
obtained from the principal-value inversion

    B_plus(s) = 1/pi int_0^inf Im[B(s - iu) - B(-iu)] du/u + (1 + B(s))/2 .

With ``nu = u / s`` the integral becomes ``int Im[...] d(ln nu)``, which is
evaluated panel by panel on a fixed lattice in ``ln nu``.  Noise enters
both transforms as the same pure phase ``exp(i nu s T sigma^2)``, which
oscillates thousands of times over the range when interference decays
slowly; each panel therefore interpolates the smooth remainder and
integrates it against that phase exactly (a Filon rule).  The
lattice makes two expensive pieces reusable: the ring exponent depends on
the serving distance but not on the threshold, and in normalized form the
interference integrals depend on ``(kappa T, nu)`` only, so they are shared
by every distance and every density in a sweep.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate
from numpy.polynomial import legendre
from scipy.special import roots_legendre, spherical_jn

from .errors import DivergenceError, ParameterError, QuadratureError, SingularityError
from .laplace import UpsilonTransform, _kernels, probe_roc
from .model import Scenario, SystemParams, hole_distance, pathloss, pathloss_derivative
from .quadrature import _NODES, _WG15, _WK15, QuadratureConfig, adaptive_gk, discrete_gauss

__all__ = [
    "RateResult",
    "PVEngine",
    "b_upsilon_plus",
    "coverage_probability",
    "ergodic_rate_at",
    "ergodic_rate_typical",
    "rate_from_coverage",
    "serving_point",
    "distance_rule",
    "kernel_for",
]

_H0 = 0.25          # level-0 panel width in ln(nu)
_MAX_LEVEL = 14
_T_CHUNK = 24


@dataclass(frozen=True)
class RateResult:
    """Ergodic rate in nats per channel use with its propagated error bound."""

    value: float
    est_error: float

    def __post_init__(self):
        if self.value < -self.est_error - 1e-12:
            raise ParameterError(f"negative rate {self.value}")

    @property
    def bits(self) -> float:
        return self.value / math.log(2.0)


# --- shared caches -----------------------------------------------------------


class _PhiCache:
    """LRU store of interference integrals on the ``ln nu`` lattice.

    Entries are keyed by ``(alpha, kappa*T, level, slope)`` and hold a
    contiguous run of panels ``[i0, i0 + n)`` with shape ``(n, k, 15)``;
    ``k`` is 4 (``phi0, phi1`` on both branches) or 8 with the slopes.
    """

    def __init__(self, max_bytes: int = 400 * 2 ** 20):
        self.max_bytes = max_bytes
        self._data: OrderedDict = OrderedDict()
        self._bytes = 0

    def clear(self):
        self._data.clear()
        self._bytes = 0

    def _store(self, key, lo, arr):
        old = self._data.get(key)
        if old is not None:
            self._bytes -= old[1].nbytes
        self._data[key] = (lo, arr)
        self._data.move_to_end(key)
        self._bytes += arr.nbytes

    def fetch(self, alpha, kts, level, i_lo, i_hi, slope):
        """Arrays ``(i_hi - i_lo, k, 15)`` for every ``kt``; missing panels are computed in one batch."""
        h = _H0 / 2 ** level
        todo = []   # (position, kt, lo, hi) ranges to compute
        entries = []
        for pos, kt in enumerate(kts):
            key = (alpha, float(kt), level, slope)
            entry = self._data.get(key)
            lo, hi = int(i_lo[pos]), int(i_hi[pos])
            if entry is None:
                todo.append((pos, kt, lo, hi))
                entries.append(None)
                continue
            self._data.move_to_end(key)
            e_lo, arr = entry
            e_hi = e_lo + arr.shape[0]
            if lo < e_lo:
                todo.append((pos, kt, lo, e_lo))
            if hi > e_hi:
                todo.append((pos, kt, e_hi, hi))
            entries.append(entry)
        if todo:
            computed = self._compute(alpha, h, todo, slope)
            for (pos, kt, lo, hi), block in zip(todo, computed):
                key = (alpha, float(kt), level, slope)
                entry = self._data.get(key)
                if entry is None:
                    self._store(key, lo, block)
                else:
                    e_lo, arr = entry
                    if lo < e_lo:
                        self._store(key, lo, np.concatenate([block, arr]))
                    else:
                        self._store(key, e_lo, np.concatenate([arr, block]))
                entries[pos] = self._data[key]
            # evict least recently used, never the entries needed for this call
            needed = {(alpha, float(kt), level, slope) for kt in kts}
            for key in list(self._data):
                if self._bytes <= self.max_bytes:
                    break
                if key not in needed:
                    self._bytes -= self._data.pop(key)[1].nbytes
        out = []
        for pos, entry in enumerate(entries):
            e_lo, arr = entry
            out.append(arr[int(i_lo[pos]) - e_lo:int(i_hi[pos]) - e_lo])
        return out

    @staticmethod
    def _compute(alpha, h, todo, slope, max_panels=8192):
        out = []
        group, count = [], 0
        for item in todo:
            group.append(item)
            count += item[3] - item[2]
            if count >= max_panels:
                out += _PhiCache._compute_group(alpha, h, group, slope)
                group, count = [], 0
        if group:
            out += _PhiCache._compute_group(alpha, h, group, slope)
        return out

    @staticmethod
    def _compute_group(alpha, h, todo, slope):
        sizes = [hi - lo for (_, _, lo, hi) in todo]
        idx = np.concatenate([np.arange(lo, hi) for (_, _, lo, hi) in todo])
        kt = np.concatenate([np.full(hi - lo, kt) for (_, kt, lo, hi) in todo])
        nu = np.exp((idx[:, None] + 0.5) * h + 0.5 * h * _NODES[None, :])
        ktn = kt[:, None] * np.ones_like(nu)
        a1 = (ktn * (1.0 - 1j * nu)).ravel()
        a2 = (-1j * ktn * nu).ravel()
        k1 = _kernels(a1, alpha, slope)
        k2 = _kernels(a2, alpha, slope)
        parts = [k1[0], k1[1], k2[0], k2[1]]
        if slope:
            parts += [k1[2], k1[3], k2[2], k2[3]]
        stacked = np.stack([p.reshape(nu.shape) for p in parts], axis=1)
        return np.split(stacked, np.cumsum(sizes)[:-1])


_PHI = _PhiCache()


class _KernelCache:
    """Small LRU of :class:`UpsilonTransform` objects keyed by geometry and distance."""

    def __init__(self, max_items: int = 256):
        self.max_items = max_items
        self._data: OrderedDict = OrderedDict()

    def get(self, params: SystemParams, distance: float) -> UpsilonTransform:
        geometry = (params.r_in, params.r_out, params.alpha, params.beta, params.p0,
                    params.m_elements, params.zeta_mean, params.zeta_var)
        ris_scale = max(params.lambda_ris, 1.0 / params.ring.area)
        # the penalty moves the point where ring rules are verified
        probe = params.penalty_k if params.scenario is Scenario.COVERAGE_HOLE else 1.0
        key = (geometry, float(distance), ris_scale, probe)
        kernel = self._data.get(key)
        if kernel is None:
            kernel = UpsilonTransform(params, distance)
            self._data[key] = kernel
            while len(self._data) > self.max_items:
                self._data.popitem(last=False)
        else:
            self._data.move_to_end(key)
        return kernel.rebind(params)


_KERNELS = _KernelCache()


def kernel_for(params: SystemParams, distance: float) -> UpsilonTransform:
    """Transform object for ``distance``, reusing ring rules built for the same geometry."""
    return _KERNELS.get(params, distance)


def clear_caches():
    _PHI.clear()
    _KERNELS._data.clear()


# --- the PV engine -----------------------------------------------------------


_GAUSS_IDX = np.flatnonzero(_WG15)
_ORDERS = np.arange(15)


@lru_cache(maxsize=None)
def _filon_basis(level):
    """Node positions and inverse Legendre-Vandermonde matrices for one lattice level.

    Panel ``j`` covers ``nu in [e^{(j)h}, e^{(j+1)h}]``.  Relative to its
    centre ``e^{(j+1/2)h}`` the nodes sit at the same scaled positions on
    every panel, so one basis serves the whole level.
    """
    h = _H0 / 2 ** level
    lo, hi = math.exp(-0.5 * h), math.exp(0.5 * h)
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    x = (np.exp(0.5 * h * _NODES) - mid) / half
    inv15 = np.linalg.inv(legendre.legvander(x, 14))
    inv7 = np.linalg.inv(legendre.legvander(x[_GAUSS_IDX], 6))
    flat = inv15[0] * 2.0   # plain interpolatory weights, used for the error scale
    return mid, half, x, inv15, inv7, flat


def _filon_sums(g, omega, half_nu, level):
    """``int e^{i omega x} g`` over each panel by Legendre interpolation of ``g``.

    ``g`` holds the smooth factor at the 15 nodes (last axis).  Returns the
    15-node estimate and a QUADPACK-style error from the 7-node one.
    """
    _, _, _, inv15, inv7, flat = _filon_basis(level)
    jn = spherical_jn(_ORDERS, omega[..., None])
    moments = 2.0 * (1j ** _ORDERS) * jn
    w15 = moments @ inv15
    w7 = moments[..., :7] @ inv7
    full = half_nu * np.sum(w15 * g, axis=-1)
    gauss = half_nu * np.sum(w7 * g[..., _GAUSS_IDX], axis=-1)
    mean = np.sum(flat * g, axis=-1) / 2.0
    resasc = half_nu * np.sum(np.abs(flat) * np.abs(g - mean[..., None]), axis=-1)
    diff = np.abs(full - gauss)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = resasc * np.minimum(1.0, (200.0 * diff / resasc) ** 1.5)
    err = np.where(resasc > 0, scaled, diff)
    return full, err


def _gk_sums(y, half):
    """Kronrod sum and QUADPACK-style error over the trailing node axis."""
    kron = half * np.sum(_WK15 * y, axis=-1)
    gauss = half * np.sum(_WG15 * y, axis=-1)
    mean = kron / (2.0 * half)
    resasc = half * np.sum(_WK15 * np.abs(y - mean[..., None]), axis=-1)
    diff = np.abs(kron - gauss)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = resasc * np.minimum(1.0, (200.0 * diff / resasc) ** 1.5)
    err = np.where(resasc > 0, scaled, diff)
    return kron, err


class PVEngine:
    """Evaluates ``B_plus`` and its density derivatives at one real ``s``.

    ``kappa = s P0 g(distance)`` is the normalized position of ``s``: 1 at
    the throughput evaluation point and ``1 / K`` in the coverage hole.
    ``hole``, when given, is ``(dr/dlambda_bs, ds/dlambda_bs)``.
    """

    def __init__(self, kernel: UpsilonTransform, s: float, cfg: QuadratureConfig | None = None,
                 hole=None):
        if not s > 0:
            raise ParameterError("the PV engine needs s > 0")
        self.kernel = kernel
        self.params = kernel.params
        self.s = float(s)
        self.kappa = self.s * self.params.p0 * kernel.g_r
        self.cfg = cfg or QuadratureConfig()
        self.hole = hole
        self._ris: dict = {}
        self.level_used = 0
        # derivatives are handled as lambda * d/dlambda so one absolute
        # tolerance fits every component
        p = self.params
        self.scale = {
            "b": 1.0,
            "d_bs": p.lambda_bs if p.lambda_bs > 0 else 1.0 / (math.pi * kernel.v0 ** 2),
            "d_ris": max(p.lambda_ris, 1.0 / p.ring.area),
        }

    # -- point evaluations ----------------------------------------------------

    def _exponents(self, T, phi, dris, nu, branch, slope_data=None):
        """Exponent pieces for thresholds ``T`` (broadcast against ``nu``)."""
        p = self.params
        k = self.kernel
        v0 = k.v0
        d_bs = -2.0 * math.pi * (v0 * v0 * phi[1] - v0 * phi[0])
        if branch == 1:
            z = self.s * (1.0 - 1j * nu)
        else:
            z = -1j * self.s * nu
        log_b = p.lambda_bs * d_bs + p.lambda_ris * dris - z * T * p.noise_power
        return d_bs, log_b

    def _components(self, T, nu, phi1, phi2, ris1, ris2, want, imag=True):
        """Integrand values ``Im[E(s - iu) - E(-iu)]`` for every requested component.

        With ``imag=False`` the complex differences are returned instead.
        """
        p = self.params
        k = self.kernel
        hole = self.hole
        d1, log1 = self._exponents(T, phi1, ris1[0], nu, 1)
        d2, log2 = self._exponents(T, phi2, ris2[0], nu, 2)
        b1 = np.exp(log1)
        b2 = np.exp(log2)
        out = {}
        if "b" in want:
            out["b"] = b1 - b2
        if "d_ris" in want:
            out["d_ris"] = b1 * ris1[0] - b2 * ris2[0]
        if "d_bs" in want:
            g1 = d1
            g2 = d2
            if hole is not None:
                r_dot, s_dot = hole
                at1 = T * self.kappa * (1.0 - 1j * nu)
                at2 = -1j * T * self.kappa * nu
                bnd1 = 2.0 * math.pi * k.distance * at1 / (1.0 + at1)
                bnd2 = 2.0 * math.pi * k.distance * at2 / (1.0 + at2)
                g1 = g1 + (p.lambda_bs * bnd1 + p.lambda_ris * ris1[2]) * r_dot
                g2 = g2 + (p.lambda_bs * bnd2 + p.lambda_ris * ris2[2]) * r_dot
                v0 = k.v0
                dw1 = -2.0 * math.pi * p.p0 * p.beta * (
                    v0 ** (2.0 - p.alpha) * phi1[3] - v0 ** (1.0 - p.alpha) * phi1[2])
                g1 = g1 + (p.lambda_bs * dw1 * T + p.lambda_ris * ris1[1]
                           - T * p.noise_power) * s_dot
            out["d_bs"] = b1 * g1 - b2 * g2
        if imag:
            out = {name: v.imag for name, v in out.items()}
        return out, (b1, b2, d1, d2)

    def _ris_values(self, nu_z):
        """Ring exponent (and slopes in the hole case) at the given complex arguments."""
        if self.hole is not None:
            return self.kernel.d_ris(nu_z, slopes=True)
        return (self.kernel.d_ris(nu_z),)

    def _direct(self, T, nu, want):
        """Integrand at arbitrary ``(T, nu)`` pairs without the lattice (used by probes)."""
        p = self.params
        slope = self.hole is not None
        kt = T * self.kappa
        k1 = _kernels(kt * (1.0 - 1j * nu), p.alpha, slope)
        k2 = _kernels(-1j * kt * nu, p.alpha, slope)
        phi1 = [k1[0], k1[1]] + ([k1[2], k1[3]] if slope else [])
        phi2 = [k2[0], k2[1]] + ([k2[2], k2[3]] if slope else [])
        ris1 = self._ris_values(self.s * (1.0 - 1j * nu))
        ris2 = self._ris_values(-1j * self.s * nu)
        return self._components(T, nu, phi1, phi2, ris1, ris2, want)

    def real_axis(self, T, want):
        """``B(s)`` and its derivatives at ``u = 0``."""
        T = np.asarray(T, dtype=float)
        zero = np.zeros_like(T)
        p = self.params
        k = self.kernel
        slope = self.hole is not None
        kern = _kernels(T * self.kappa + 0j, p.alpha, slope)
        v0 = k.v0
        d_bs = -2.0 * math.pi * (v0 * v0 * kern[1] - v0 * kern[0])
        ris = self._ris_values(np.full(1, self.s + 0j))
        d_ris = ris[0][0]
        b = np.exp(p.lambda_bs * d_bs + p.lambda_ris * d_ris - self.s * T * p.noise_power)
        out = {}
        if "b" in want:
            out["b"] = b.real
        if "d_ris" in want:
            out["d_ris"] = (b * d_ris).real
        if "d_bs" in want:
            g = d_bs
            if self.hole is not None:
                r_dot, s_dot = self.hole
                at = T * self.kappa
                bnd = 2.0 * math.pi * k.distance * at / (1.0 + at)
                dw = -2.0 * math.pi * p.p0 * p.beta * (
                    v0 ** (2.0 - p.alpha) * kern[3] - v0 ** (1.0 - p.alpha) * kern[2])
                g = g + (p.lambda_bs * bnd + p.lambda_ris * ris[2][0]) * r_dot
                g = g + (p.lambda_bs * dw * T + p.lambda_ris * ris[1][0] - T * p.noise_power) * s_dot
            out["d_bs"] = (b * g).real
        del zero
        return out

    # -- truncation -----------------------------------------------------------

    def _mean_slope(self, T):
        """Bound on ``|Im[...]| / nu`` near the origin, ``s E|Upsilon|`` up to constants."""
        p = self.params
        k = self.kernel
        v0 = k.v0
        mean_i = 2.0 * math.pi * p.lambda_bs * p.p0 * p.beta * (
            v0 ** (2.0 - p.alpha) / (p.alpha - 2.0) - v0 ** (1.0 - p.alpha) / (p.alpha - 1.0))
        ring = k.ring
        mean_sr = max(p.lambda_ris, 1.0 / p.ring.area) * (p.beam_mean ** 2 + p.beam_var) * p.p0 * float(
            np.sum(ring.weight * ring.gain))
        return self.s * (T * (mean_i + p.noise_power) + mean_sr) + 1e-300

    def _decay_limit(self, T):
        """Truncation estimate from the interference decay ``exp(-c nu^(2/alpha))``."""
        p = self.params
        v0 = self.kernel.v0
        shape = math.pi / (2.0 * p.alpha * math.sin(math.pi / p.alpha))
        c = 2.0 * math.pi * p.lambda_bs * v0 * v0 * shape * (T * self.kappa) ** (2.0 / p.alpha)
        budget = math.log(1.0 / self.cfg.abs_tol) + math.pi * p.lambda_bs * v0 * v0 + 5.0
        return (budget / c) ** (p.alpha / 2.0) * self.cfg.tail_safety

    def _limits(self, T, want):
        """Per-threshold ``[nu_lo, nu_hi]`` verified by direct probes."""
        tol = self.cfg.abs_tol
        nu_lo = 1e-2 * tol / self._mean_slope(T)
        for _ in range(40):
            comps, _ = self._direct(T, nu_lo, want)
            worst = np.max(np.stack([np.abs(v) * self.scale[n] for n, v in comps.items()]), axis=0)
            bad = worst > 1e-2 * tol
            if not np.any(bad):
                break
            nu_lo = np.where(bad, nu_lo / 10.0, nu_lo)
        else:
            raise SingularityError("PV integrand does not vanish at the origin")
        nu_hi = self._decay_limit(T)
        for _ in range(60):
            _, (b1, b2, d1, d2) = self._direct(T, nu_hi, want)
            size = (np.abs(b1) + np.abs(b2)) * (1.0 + np.abs(d1) + np.abs(d2))
            bad = size > 1e-2 * tol
            if not np.any(bad):
                break
            nu_hi = np.where(bad, 2.0 * nu_hi, nu_hi)
        else:
            raise DivergenceError("transform does not decay along the PV line")
        return nu_lo, nu_hi

    # -- lattice integration -----------------------------------------------------

    def _ris_lattice(self, level, lo, hi):
        """Ring exponents on panels ``[lo, hi)`` of ``level`` as arrays ``(n, 15)``."""
        store = self._ris.get(level)
        if store is None or lo < store[0] or hi > store[0] + store[1][0][0].shape[0]:
            if store is not None:
                lo = min(lo, store[0])
                hi = max(hi, store[0] + store[1][0][0].shape[0])
            h = _H0 / 2 ** level
            nu = np.exp((np.arange(lo, hi)[:, None] + 0.5) * h + 0.5 * h * _NODES[None, :])
            one = self._ris_values(self.s * (1.0 - 1j * nu))
            two = self._ris_values(-1j * self.s * nu)
            store = (lo, (one, two))
            self._ris[level] = store
        return store

    def _panels(self, T, i_lo, i_hi, level, want):
        """Per-panel Kronrod sums and error estimates on ``[i_lo, i_hi)`` of ``level``.

        Returns ``(values, errors, first)``: arrays ``(T.size, width)`` per
        component (zero-padded past each row's range) and the integrand's
        ``Im[...] / nu`` at the first node of each row.
        """
        p = self.params
        h = _H0 / 2 ** level
        width_all = int(max((i_hi - i_lo).max(), 1))
        values = {name: np.zeros((T.size, width_all)) for name in want}
        errors = {name: np.zeros((T.size, width_all)) for name in want}
        first = {name: np.zeros(T.size) for name in want}
        base, (ris_one, ris_two) = self._ris_lattice(level, int(i_lo.min()), int(i_hi.max()))
        slope = self.hole is not None
        phis = _PHI.fetch(p.alpha, T * self.kappa, level, i_lo, i_hi, slope)
        f_mid, f_half, f_x = _filon_basis(level)[:3]
        for start in range(0, T.size, _T_CHUNK):
            rows = np.arange(start, min(start + _T_CHUNK, T.size))
            lo_c, hi_c = i_lo[rows], i_hi[rows]
            width = int((hi_c - lo_c).max())
            idx = lo_c[:, None] + np.arange(width)[None, :]
            mask = idx < hi_c[:, None]
            pos = np.clip(idx, None, hi_c[:, None] - 1) - base
            nu = np.exp((idx[..., None] + 0.5) * h + 0.5 * h * _NODES)
            blocks = phis[start:start + rows.size]
            nk = blocks[0].shape[1]
            phi = np.zeros((rows.size, width, nk, 15), dtype=complex)
            for j, block in enumerate(blocks):
                phi[j, :block.shape[0]] = block
            phi1 = [phi[:, :, 0], phi[:, :, 1]]
            phi2 = [phi[:, :, 2], phi[:, :, 3]]
            if slope:
                phi1 += [phi[:, :, 4], phi[:, :, 5]]
                phi2 += [phi[:, :, 6], phi[:, :, 7]]
            r1 = [arr.reshape(-1, 15)[pos] for arr in ris_one]
            r2 = [arr.reshape(-1, 15)[pos] for arr in ris_two]
            comps, _ = self._components(T[rows][:, None, None], nu, phi1, phi2, r1, r2, want, imag=False)
            # strip the common noise phase exp(i c nu) relative to each panel's midpoint
            centre = np.exp((idx + 0.5) * h)
            mid_nu = centre * f_mid
            half_nu = centre * f_half
            c = (self.s * p.noise_power * T[rows])[:, None]
            omega = c * half_nu
            turn = np.exp(1j * c * mid_nu)
            unphase = np.exp(-1j * omega[..., None] * f_x) / (turn[..., None] * nu)
            for name, e in comps.items():
                full, err = _filon_sums(e * unphase, omega, half_nu, level)
                values[name][rows, :width] = np.where(mask, (turn * full).imag, 0.0)
                errors[name][rows, :width] = np.where(mask, err, 0.0)
                first[name][rows] = e[:, 0, 0].imag / nu[:, 0, 0]
        return values, errors, first

    def _lattice(self, T, want):
        """Nested refinement on the ``ln nu`` lattice.

        Each pass integrates one contiguous run of panels per threshold.
        Panels whose error estimate is within their share of the tolerance
        are accepted; the hull of the rest is split in two at the next level.
        Runs stay contiguous, which keeps the lattice caches effective.
        """
        cfg = self.cfg
        nu_lo, nu_hi = self._limits(T, want)
        lo = np.floor(np.log(nu_lo) / _H0).astype(np.int64)
        hi = np.maximum(np.ceil(np.log(nu_hi) / _H0).astype(np.int64), lo + 1)
        done = {name: np.zeros(T.size) for name in want}
        done_err = {name: np.zeros(T.size) for name in want}
        active = np.arange(T.size)
        level = 0
        while True:
            vals, errs, first = self._panels(T[active], lo[active], hi[active], level, want)
            if level == 0:
                # strip (0, nu_start] filled with the first node's value of Im[...]/nu
                for name in want:
                    band = first[name] * np.exp(lo * _H0)
                    done[name] += band
                    done_err[name] += 0.5 * np.abs(band)
            ok = np.ones(active.size, dtype=bool)
            bad = np.zeros(vals[want[0]].shape, dtype=bool)
            for name in want:
                sc = self.scale[name]
                total = (done[name][active] + vals[name].sum(axis=1)) * sc
                err = (done_err[name][active] + errs[name].sum(axis=1)) * sc
                allowed = math.pi * np.maximum(cfg.abs_tol, cfg.rel_tol * np.abs(total))
                ok &= err <= allowed
                share = allowed * 2.0 ** -(level + 2) / vals[name].shape[1]
                bad |= errs[name] * sc > share[:, None]
            bad &= ~ok[:, None]
            # rows with nothing left to split: accept what they have
            hull = bad.any(axis=1)
            first_bad = np.where(hull, bad.argmax(axis=1), 0)
            last_bad = np.where(hull, bad.shape[1] - 1 - bad[:, ::-1].argmax(axis=1), -1)
            cols = np.arange(bad.shape[1])[None, :]
            keep = ~((cols >= first_bad[:, None]) & (cols <= last_bad[:, None]))
            for name in want:
                done[name][active] += np.where(keep, vals[name], 0.0).sum(axis=1)
                done_err[name][active] += np.where(keep, errs[name], 0.0).sum(axis=1)
            if not np.any(hull):
                break
            if level >= _MAX_LEVEL:
                raise QuadratureError("PV lattice did not converge",
                                      estimate=done[want[0]], error=done_err[want[0]])
            new_lo = 2 * (lo[active] + first_bad)
            new_hi = 2 * (lo[active] + last_bad + 1)
            active = active[hull]
            lo[active], hi[active] = new_lo[hull], new_hi[hull]
            level += 1
        self.level_used = level
        axis = self.real_axis(T, want)
        return {name: done[name] / math.pi + (0.5 * (1.0 + axis[name]) if name == "b" else 0.5 * axis[name])
                for name in want}

    def values(self, thresholds, want=("b",)):
        """Dictionary of ``B_plus`` (``"b"``) and its derivatives for every threshold."""
        want = tuple(want)
        T = np.atleast_1d(np.asarray(thresholds, dtype=float))
        if np.any(T < 0):
            raise ParameterError("thresholds must be non-negative")
        out = {name: np.zeros(T.size) for name in want}
        if "b" in out:
            out["b"][:] = 1.0
        live = T > 0
        if not np.any(live):
            return out
        Tl = T[live]
        if self.params.lambda_bs == 0:
            res = self._fallback(Tl, want)
        else:
            res = self._lattice(Tl, want)
        for name in want:
            out[name][live] = res[name]
        return out

    # -- no-interference fallback -------------------------------------------------

    def _fallback(self, T, want):
        """Inversion without interference decay: the noise phase is integrated by QAWF."""
        p = self.params
        cfg = self.cfg
        out = {name: np.zeros(T.size) for name in want}
        axis = self.real_axis(T, want)
        for j, t in enumerate(T):
            c = self.s * t * p.noise_power
            if c == 0:
                if "d_bs" in want:
                    raise ParameterError("density derivative undefined without interference and noise")
                # Upsilon <= 0 almost surely
                for name in want:
                    out[name][j] = 1.0 if name == "b" else 0.0
                continue

            @lru_cache(maxsize=None)
            def parts(nu, t=t, c=c):
                comps, (b1, b2, d1, d2) = self._direct(np.array([t]), np.array([nu]), want)
                return comps, b1, b2, d1, d2

            def im_part(nu, name):
                return float(parts(float(nu))[0][name][0]) / nu

            def h_part(nu, name, which, c=c):
                _, b1, b2, d1, d2 = parts(float(nu))
                if name == "b":
                    e = b1 - b2
                elif name == "d_ris":
                    ris1 = self.kernel.d_ris(np.array([self.s * (1 - 1j * nu)]))
                    ris2 = self.kernel.d_ris(np.array([-1j * self.s * nu]))
                    e = b1 * ris1 - b2 * ris2
                else:
                    e = b1 * d1 - b2 * d2
                hval = complex(e[0] * np.exp(-1j * nu * c))
                return (hval.real if which == "re" else hval.imag) / nu

            split = math.pi / c
            for name in want:
                eps = cfg.abs_tol / self.scale[name]
                head = integrate.quad(im_part, 0.0, split, args=(name,), epsabs=eps,
                                      epsrel=cfg.rel_tol, limit=cfg.max_subdivisions)[0]
                sin_part = integrate.quad(h_part, split, np.inf, args=(name, "re"), weight="sin",
                                          wvar=c, epsabs=eps, limlst=200)[0]
                cos_part = integrate.quad(h_part, split, np.inf, args=(name, "im"), weight="cos",
                                          wvar=c, epsabs=eps, limlst=200)[0]
                total = (head + sin_part + cos_part) / math.pi
                const = 0.5 * (1.0 + axis[name][j]) if name == "b" else 0.5 * axis[name][j]
                out[name][j] = total + const
        return out


# --- scenario plumbing -------------------------------------------------------


def serving_point(serve_dist, params: SystemParams):
    """``(distance, s, hole)`` for the scenario.

    In the coverage hole the distance is ``r_H``, ``s = K / (P0 g(r_H))``
    with ``K = penalty_k`` the attenuation of the blocked direct link,
    and ``hole`` carries ``(dr_H/dlambda, ds/dlambda)``; otherwise ``hole``
    is ``None``.
    """
    p = params
    if p.scenario is Scenario.COVERAGE_HOLE:
        r_h, dr_h = hole_distance(p.lambda_bs, p.c_hole)
        g = float(pathloss(r_h, p))
        s = p.penalty_k / (p.p0 * g)
        ds = -p.penalty_k * float(pathloss_derivative(r_h, p)) * dr_h / (p.p0 * g * g)
        return r_h, s, (dr_h, ds)
    if not serve_dist > 0:
        raise ParameterError("serving distance must be positive")
    return float(serve_dist), 1.0 / (p.p0 * float(pathloss(serve_dist, p))), None


def b_upsilon_plus(s, threshold, serve_dist, params: SystemParams, cfg=None) -> float:
    """``B_plus(s)`` for one real ``s >= 0`` and threshold."""
    s = float(s)
    if s < 0:
        raise ParameterError("b_upsilon_plus needs real s >= 0")
    if s == 0:
        return 1.0
    distance, _, _ = serving_point(serve_dist, params)
    kernel = kernel_for(params, distance)
    kernel.check_roc(np.array([s + 0j]), [threshold])
    engine = PVEngine(kernel, s, cfg)
    return float(engine.values([threshold])["b"][0])


def coverage_probability(threshold, serve_dist, params: SystemParams, cfg=None):
    """``P(SINR >= T | r)``; accepts a scalar or an array of thresholds.

    In the coverage-hole scenario ``serve_dist`` is ignored and ``r_H`` is used.
    """
    distance, s, _ = serving_point(serve_dist, params)
    t = np.atleast_1d(np.asarray(threshold, dtype=float))
    probe_roc(float(t.max()) if t.size else 1.0, distance, params)
    engine = PVEngine(kernel_for(params, distance), s, cfg)
    tol = (cfg or QuadratureConfig()).abs_tol
    pc = engine.values(t)["b"]
    if np.any(pc < -100 * tol) or np.any(pc > 1 + 100 * tol):
        raise QuadratureError(f"coverage estimate outside [0, 1] beyond tolerance: {pc}")
    pc = np.clip(pc, 0.0, 1.0)
    return float(pc[0]) if np.ndim(threshold) == 0 else pc


# --- rate integrals ------------------------------------------------------------


def rate_from_coverage(pc: Callable[[np.ndarray], np.ndarray], cfg: QuadratureConfig | None = None,
                       clamp=(True,), t_start=1e-3):
    """``int_0^inf pc(t) / (1 + t) dt`` for a batched coverage function.

    ``pc`` maps an array of thresholds to an array ``(n,)`` or ``(n, k)``.
    Components listed as ``True`` in ``clamp`` are probabilities and are
    clipped to ``[0, 1]``; the others (derivatives) are left alone.  The
    first component must be a probability; it drives the head bound.

    The integral is split at ``t1``: on ``[0, t1]`` monotonicity of the
    coverage bounds the piece, with ``t1`` lowered until the bound is
    tight; ``[t1, inf)`` is integrated in ``ln t`` and extended until the
    last increment is negligible.  Returns ``(value, error)`` arrays.
    """
    cfg = cfg or QuadratureConfig()
    abs_tol = 100.0 * cfg.abs_tol
    rel_tol = 100.0 * cfg.rel_tol

    def evaluate(t):
        y = np.asarray(pc(np.asarray(t, dtype=float)), dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        flags = np.array(list(clamp) + [False] * (y.shape[1] - len(clamp)))[: y.shape[1]]
        y = np.where(flags[None, :], np.clip(y, 0.0, 1.0), y)
        return y

    t1 = t_start
    for _ in range(12):
        y1 = evaluate(np.array([t1]))[0]
        width = math.log1p(t1) * (1.0 - y1[0]) / 2.0
        if width <= 0.1 * abs_tol:
            break
        t1 /= 10.0
    log_t1 = math.log1p(t1)
    head = np.where(np.arange(y1.size) == 0, log_t1 * (1.0 + y1[0]) / 2.0, 0.5 * t1 * y1)
    head_err = np.where(np.arange(y1.size) == 0, width, 0.5 * t1 * np.abs(y1))

    def integrand(eta):
        t = np.exp(eta)
        return evaluate(t) * (t / (1.0 + t))[:, None]

    lo = math.floor(math.log(t1))
    a = math.log(t1)
    b = 8.0
    breaks = np.arange(lo + 1, b)
    value, error = adaptive_gk(integrand, a, b, rel_tol=rel_tol, abs_tol=abs_tol,
                               max_intervals=cfg.max_subdivisions, breakpoints=breaks)
    increments = []
    for _ in range(12):
        inc, inc_err = adaptive_gk(integrand, b, b + 4.0, rel_tol=rel_tol, abs_tol=abs_tol,
                                   max_intervals=cfg.max_subdivisions,
                                   breakpoints=np.arange(b + 1, b + 4))
        value = value + inc
        error = error + inc_err
        b += 4.0
        size = float(np.max(np.abs(inc)))
        increments.append(size)
        tail = np.abs(integrand(np.array([b]))[0])
        if size <= max(abs_tol, rel_tol * float(np.max(np.abs(value)))) and np.all(tail <= abs_tol):
            return value + head, error + head_err + tail
        if len(increments) >= 3 and increments[-1] >= 0.9 * increments[-3]:
            raise DivergenceError(
                "rate integral does not converge: the coverage tail does not decay",
                estimate=value + head, error=error)
    raise DivergenceError("rate integral did not settle", estimate=value + head, error=error)


def ergodic_rate_at(r, params: SystemParams, cfg=None) -> RateResult:
    """Ergodic rate of a UE at distance ``r`` (``r_H`` with penalty in the coverage hole)."""
    distance, s, _ = serving_point(r, params)
    probe_roc(1.0, distance, params)
    engine = PVEngine(kernel_for(params, distance), s, cfg)
    value, error = rate_from_coverage(lambda t: engine.values(t)["b"], cfg)
    return RateResult(float(value[0]), float(error[0]))


def distance_rule(params: SystemParams, n: int = 16):
    """Gauss rule for ``int_{R_c}^inf (.) 2 pi lambda r exp(-pi lambda r^2) dr``.

    The weights sum to the probability ``exp(-pi lambda R_c^2)`` of the
    nearest BS lying beyond the guard radius.
    """
    lam = params.lambda_bs
    if not lam > 0:
        raise ParameterError("the typical-UE rate needs lambda_bs > 0")
    rc = params.r_guard
    r_max = math.sqrt(rc * rc + 40.0 / (math.pi * lam))
    t, w = roots_legendre(40)
    edges = np.linspace(rc, r_max, 41)
    lo, hi = edges[:-1, None], edges[1:, None]
    r = (0.5 * (lo + hi) + 0.5 * (hi - lo) * t).ravel()
    wr = (0.5 * (hi - lo) * w).ravel() * 2 * math.pi * lam * r * np.exp(-math.pi * lam * r * r)
    nodes, weights = discrete_gauss(r, wr, n)
    return nodes, weights


def typical_integrand(params: SystemParams, cfg=None, want=("b",), n_radial: int = 16):
    """Batched ``t -> int P_c(t|r) f(r) dr`` (and density derivatives) for the typical UE.

    Returned columns follow ``want``: ``"b"`` gives the coverage average;
    ``"d_bs"`` the integrand of the lambda_bs derivative of the rate,
    including the distance-density term; ``"d_ris"`` the lambda_ris one.
    """
    p = params
    if p.scenario is not Scenario.THROUGHPUT:
        raise ParameterError("the distance-averaged rate is defined for the throughput scenario")
    nodes, weights = distance_rule(p, n_radial)
    engines = []
    for r in nodes:
        probe_roc(1.0, r, p)
        engines.append(PVEngine(kernel_for(p, r), 1.0 / (p.p0 * float(pathloss(r, p))), cfg))
    need = tuple(dict.fromkeys(("b",) + tuple(want)))

    def f(t):
        t = np.asarray(t, dtype=float)
        cols = {name: np.zeros(t.size) for name in want}
        for r, w, eng in zip(nodes, weights, engines):
            vals = eng.values(t, need)
            pc = np.clip(vals["b"], 0.0, 1.0)
            if "b" in cols:
                cols["b"] += w * pc
            if "d_ris" in cols:
                cols["d_ris"] += w * vals["d_ris"]
            if "d_bs" in cols:
                cols["d_bs"] += w * (vals["d_bs"] + pc * (1.0 - math.pi * r * r * p.lambda_bs) / p.lambda_bs)
        return np.stack([cols[name] for name in want], axis=1)

    return f


def ergodic_rate_typical(params: SystemParams, cfg=None, conditional: bool = False,
                         n_radial: int = 16) -> RateResult:
    """Mean ergodic rate of a typical UE with the guard zone.

    By default UEs inside the guard zone count with zero rate (the
    distance density is integrated without renormalization); with
    ``conditional`` the result is divided by ``P(r >= R_c)``.
    """
    p = params
    if not p.r_guard >= 0:
        raise ParameterError("guard radius must be non-negative")
    mass = math.exp(-math.pi * p.lambda_bs * p.r_guard ** 2)
    if mass < 1e-300:
        return RateResult(0.0, 0.0)
    f = typical_integrand(p, cfg, ("b",), n_radial)
    value, error = rate_from_coverage(lambda t: f(t) / mass, cfg)
    scale = 1.0 if conditional else mass
    return RateResult(float(value[0]) * scale, float(error[0]) * scale)
