"""One-dimensional quadrature primitives.

Everything here is built around a vectorized, globally adaptive
Gauss-Kronrod (7/15) rule.  Integrands receive a 1-D array of abscissae
and return an array whose leading axis matches it; trailing axes are
treated as independent components that share one interval partition.
That lets the transform code integrate a whole grid of complex arguments
in a single adaptive run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, ParameterError, QuadratureError, SingularityError

__all__ = [
    "QuadratureConfig",
    "adaptive_gk",
    "integrate_finite",
    "integrate_semi_infinite",
    "principal_value_symmetric",
    "truncation_point",
    "central_difference",
    "discrete_gauss",
]


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances shared by every integrator.

    The defaults are engineering choices, not values taken from any
    reference computation.  ``pv_epsilon_floor`` is relative to the PV
    upper limit; ``tail_safety`` multiplies the estimated truncation point.
    """

    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_subdivisions: int = 4000
    pv_epsilon_floor: float = 1e-9
    tail_safety: float = 1.5

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ParameterError("rel_tol and abs_tol must be positive")
        if self.max_subdivisions < 1:
            raise ParameterError("max_subdivisions must be >= 1")
        if self.tail_safety < 1:
            raise ParameterError("tail_safety must be >= 1")
        if not self.pv_epsilon_floor > 0:
            raise ParameterError("pv_epsilon_floor must be positive")

    def tightened(self, factor: float) -> "QuadratureConfig":
        """Copy with both tolerances divided by ``factor``."""
        return QuadratureConfig(
            rel_tol=self.rel_tol / factor,
            abs_tol=self.abs_tol / factor,
            max_subdivisions=self.max_subdivisions,
            pv_epsilon_floor=self.pv_epsilon_floor,
            tail_safety=self.tail_safety,
        )


# Kronrod abscissae on [-1, 1] (positive half, descending) and weights.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
# Gauss weights for the odd-indexed Kronrod nodes (0.949..., 0.741..., 0.405..., 0).
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_WK15 = np.concatenate([_WGK[:-1], _WGK[::-1]])
_WG15 = np.zeros(15)
# Gauss nodes sit at kronrod indices 1, 3, 5 on each side plus the centre.
_WG15[[1, 3, 5]] = _WG[:3]
_WG15[[13, 11, 9]] = _WG[:3]
_WG15[7] = _WG[3]


def _call(f, x):
    y = np.asarray(f(x))
    if y.shape[:1] != x.shape:
        # scalar-only integrand
        y = np.asarray([f(float(xi)) for xi in x])
    return y


def _gk_panels(f, lo, hi):
    centre = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    x = (centre[:, None] + half[:, None] * _NODES[None, :]).ravel()
    y = _call(f, x)
    out_shape = y.shape[1:]
    y = y.reshape((lo.size, 15) + out_shape)
    if not np.all(np.isfinite(y)):
        raise QuadratureError("integrand returned a non-finite value")
    expand = (slice(None), slice(None)) + (None,) * len(out_shape)
    wk = _WK15[None, :][expand]
    wg = _WG15[None, :][expand]
    hs = half.reshape((-1,) + (1,) * len(out_shape))
    kron = hs * np.sum(wk * y, axis=1)
    gauss = hs * np.sum(wg * y, axis=1)
    mean = kron / np.where(hs == 0, 1.0, 2 * hs)
    resasc = np.abs(hs) * np.sum(wk * np.abs(y - mean[:, None]), axis=1)
    diff = np.abs(kron - gauss)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = resasc * np.minimum(1.0, (200.0 * diff / resasc) ** 1.5)
    err = np.where(resasc > 0, scaled, diff)
    return kron, err


def adaptive_gk(f, a, b, *, rel_tol=1e-8, abs_tol=1e-10, max_intervals=4000,
                breakpoints=None, raise_on_failure=True):
    """Globally adaptive G7/K15 quadrature of a (possibly vector-valued) ``f``.

    Returns ``(value, error)``; both carry the trailing shape of ``f``'s
    output.  Convergence requires every component to satisfy
    ``error <= max(abs_tol, rel_tol * |value|)``.
    """
    a = float(a)
    b = float(b)
    if not b > a:
        raise ParameterError(f"need a < b, got [{a}, {b}]")
    edges = [a]
    if breakpoints is not None:
        edges += sorted(float(p) for p in breakpoints if a < p < b)
    edges.append(b)
    lo = np.array(edges[:-1])
    hi = np.array(edges[1:])
    kron, err = _gk_panels(f, lo, hi)
    while True:
        total = kron.sum(axis=0)
        err_total = err.sum(axis=0)
        tol = np.maximum(abs_tol, rel_tol * np.abs(total))
        if np.all(err_total <= tol):
            return total, err_total
        if lo.size >= max_intervals:
            if raise_on_failure:
                raise QuadratureError(
                    f"no convergence after {lo.size} subintervals "
                    f"(max error {float(np.max(err_total)):.3g})",
                    estimate=total, error=err_total)
            return total, err_total
        score = err / tol
        if score.ndim > 1:
            score = score.reshape(lo.size, -1).max(axis=1)
        threshold = max(score.max() * 0.05, 0.5 / lo.size)
        split = np.flatnonzero(score >= threshold)
        room = max_intervals - lo.size
        if split.size > room:
            split = split[np.argsort(score[split])[::-1][:room]]
        keep = np.ones(lo.size, dtype=bool)
        keep[split] = False
        mid = 0.5 * (lo[split] + hi[split])
        new_lo = np.concatenate([lo[split], mid])
        new_hi = np.concatenate([mid, hi[split]])
        k_new, e_new = _gk_panels(f, new_lo, new_hi)
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        kron = np.concatenate([kron[keep], k_new])
        err = np.concatenate([err[keep], e_new])


def integrate_finite(f, a, b, cfg: QuadratureConfig | None = None, breakpoints=None):
    """Adaptive estimate of the integral of ``f`` over ``[a, b]``.

    Returns ``(value, error)``.  Raises :class:`QuadratureError` carrying the
    best estimate when ``cfg.max_subdivisions`` is exhausted.
    """
    cfg = cfg or QuadratureConfig()
    value, error = adaptive_gk(f, a, b, rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol,
                               max_intervals=cfg.max_subdivisions, breakpoints=breakpoints)
    if np.ndim(value) == 0:
        return float(value) if np.isrealobj(value) else complex(value), float(error)
    return value, error


def integrate_semi_infinite(f, a, cfg: QuadratureConfig | None = None, scale=1.0,
                            upper_hint=None, max_doublings=40):
    """Integral of ``f`` over ``[a, inf)``.

    The half line is mapped by ``x = a + scale * (exp(w) - 1)`` and the
    ``w`` range is doubled until the last increment is below tolerance.
    ``upper_hint`` (in ``x`` units) seeds the first truncation point.
    Increments that refuse to shrink raise :class:`DivergenceError`.
    Returns ``(value, error)``.
    """
    cfg = cfg or QuadratureConfig()
    if not scale > 0:
        raise ParameterError("scale must be positive")

    def mapped(w):
        ew = np.exp(w)
        y = np.asarray(_call(f, a + scale * (ew - 1.0)))
        jac = (scale * ew).reshape((-1,) + (1,) * (y.ndim - 1))
        return y * jac

    w_hi = 2.0 if upper_hint is None else max(0.5, math.log1p(max(upper_hint - a, 0.0) / scale))
    value, error = adaptive_gk(mapped, 0.0, w_hi, rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol,
                               max_intervals=cfg.max_subdivisions)
    increments = []
    for _ in range(max_doublings):
        inc, inc_err = adaptive_gk(mapped, w_hi, 2 * w_hi, rel_tol=cfg.rel_tol,
                                   abs_tol=cfg.abs_tol, max_intervals=cfg.max_subdivisions)
        value = value + inc
        error = error + inc_err
        w_hi *= 2
        size = float(np.max(np.abs(inc)))
        increments.append(size)
        tol = max(cfg.abs_tol, cfg.rel_tol * float(np.max(np.abs(value))))
        if size <= tol:
            if np.ndim(value) == 0:
                return float(value) if np.isrealobj(value) else complex(value), float(error)
            return value, error
        if len(increments) >= 4 and increments[-1] >= 0.9 * increments[-4]:
            raise DivergenceError(
                f"integral over [{a}, inf) does not converge: increments "
                f"{increments[-4:]} are not shrinking", estimate=value, error=error)
        if w_hi > 700:
            break
    raise DivergenceError("truncation point overflowed before convergence",
                          estimate=value, error=error)


def principal_value_symmetric(h, cfg: QuadratureConfig | None = None, u_max=1.0,
                              scale=None, check_origin=True):
    """Integrate a folded principal-value integrand ``h`` over ``(0, u_max]``.

    ``h(u)`` is the odd part of an original ``F(u)/u`` integrand folded onto
    the positive axis, so it must tend to a finite limit at ``0``.  The
    strip ``(0, eps]`` with ``eps = pv_epsilon_floor * u_max`` is filled
    with that limit; the remainder is integrated adaptively.  ``scale``
    marks where ``h`` has its small-argument structure and seeds a
    geometric set of breakpoints between it and ``u_max``.
    """
    cfg = cfg or QuadratureConfig()
    if not u_max > 0:
        raise ParameterError("u_max must be positive")
    eps = cfg.pv_epsilon_floor * u_max
    probe = np.array([eps, eps / 2, eps / 4])
    near = np.asarray(_call(h, probe))
    if not np.all(np.isfinite(near)):
        raise SingularityError("integrand is not finite next to the origin")
    if check_origin:
        spread = np.max(np.abs(near[0] - near[2]))
        level = max(1.0, float(np.max(np.abs(near[0]))))
        if spread > 1e-3 * level:
            raise SingularityError(
                f"integrand does not settle near 0 (spread {spread:.3g} at eps={eps:.3g})")
    breaks = None
    if scale is not None and eps < scale < u_max:
        n = int(np.ceil(np.log10(u_max / scale))) + 1
        breaks = np.geomspace(scale * 1e-2, u_max, n + 2)[:-1]
    value, error = adaptive_gk(h, eps, u_max, rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol,
                               max_intervals=cfg.max_subdivisions, breakpoints=breaks)
    value = value + eps * near[1]
    if np.ndim(value) == 0:
        return float(value), float(error)
    return value, error


def truncation_point(alpha: float, decay_scale: float, cfg: QuadratureConfig | None = None):
    """Upper limit where ``exp(-decay_scale * u**(2/alpha))`` drops below ``abs_tol``.

    The result is multiplied by ``cfg.tail_safety``.
    """
    cfg = cfg or QuadratureConfig()
    if not alpha > 2:
        raise ParameterError("alpha must exceed 2")
    if not decay_scale > 0:
        raise ParameterError("decay_scale must be positive")
    return (math.log(1.0 / cfg.abs_tol) / decay_scale) ** (alpha / 2.0) * cfg.tail_safety


def central_difference(f, x: float, h: float) -> float:
    """Symmetric difference quotient ``(f(x+h) - f(x-h)) / 2h``."""
    return (f(x + h) - f(x - h)) / (2.0 * h)


def discrete_gauss(x, w, n: int):
    """``n``-point Gauss rule for the discrete measure ``sum_i w_i delta(x - x_i)``.

    The returned nodes and positive weights integrate every polynomial of
    degree ``< 2n`` exactly against the measure.  Built with the Lanczos
    recursion (with full reorthogonalization) on the affinely scaled
    nodes, then Golub-Welsch.  Measures with ``n`` or fewer atoms are
    returned unchanged.
    """
    x = np.asarray(x, dtype=float).ravel()
    w = np.asarray(w, dtype=float).ravel()
    if np.any(w < 0):
        raise ParameterError("discrete_gauss needs non-negative weights")
    keep = w > 0
    x, w = x[keep], w[keep]
    if x.size <= n:
        return x.copy(), w.copy()
    lo, hi = float(x.min()), float(x.max())
    if hi == lo:
        return np.array([lo]), np.array([w.sum()])
    centre = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    t = (x - centre) / half
    total = float(w.sum())
    basis = np.zeros((x.size, n))
    q = np.sqrt(w / total)
    diag = np.zeros(n)
    off = np.zeros(max(n - 1, 0))
    q_prev = np.zeros_like(q)
    b_prev = 0.0
    size = n
    for k in range(n):
        basis[:, k] = q
        v = t * q
        diag[k] = q @ v
        v = v - diag[k] * q - b_prev * q_prev
        v -= basis[:, :k + 1] @ (basis[:, :k + 1].T @ v)
        if k == n - 1:
            break
        b = float(np.linalg.norm(v))
        if b < 1e-13:
            size = k + 1
            break
        off[k] = b
        q_prev, q, b_prev = q, v / b, b
    diag = diag[:size]
    off = off[:size - 1]
    jac = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    theta, vecs = np.linalg.eigh(jac)
    weights = total * vecs[0, :] ** 2
    return centre + half * theta, weights
