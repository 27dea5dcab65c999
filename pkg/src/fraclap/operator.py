"""The fractional Laplacian by principal-value quadrature and by Fourier symbol,
plus the pairing, delta and Picard diagnostics built on top of them."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy import ndimage

from ._quadrature import (
    composite_gauss,
    gauss_legendre_interval,
    geometric_panels,
    sphere_area,
    sphere_rule,
)
from .core import (
    GridField,
    NonFiniteEvaluation,
    NotPeriodic,
    Params,
    ProfileSpec,
    SmoothnessViolation,
    TailUnbounded,
)
from .kernels import _exterior_power_integral, riesz_normalization, weighted_riesz


@dataclass(frozen=True)
class PVScheme:
    """Quadrature settings for the principal-value integral.

    The ball of radius ``inner_radius`` around x is handled by a second-order
    Taylor expansion; the shell up to ``far_radius`` by Gauss quadrature in
    polar coordinates; everything beyond by a substitution that is exact for
    constants.  ``tail_decay`` overrides the profile's declared decay.
    """

    inner_radius: float = 0.05
    far_radius: float = 12.0
    tail_decay: Optional[float] = None
    radial_order: int = 16
    angular_order: int = 24
    max_panel: float = 0.5
    tail_order: int = 24

    def __post_init__(self):
        if not 0 < self.inner_radius < self.far_radius:
            raise ValueError("need 0 < inner_radius < far_radius")

    @classmethod
    def for_grid(cls, h: float, **kw) -> "PVScheme":
        """Scheme whose near-field radius tracks a grid spacing, so its error
        falls like h^{4-alpha} under refinement."""
        return cls(inner_radius=h, **kw)


class PVResult(NamedTuple):
    value: np.ndarray
    error_estimate: np.ndarray


def _check_profile(u: ProfileSpec, scheme: PVScheme, params: Params) -> float:
    if u.smoothness_order < 2:
        raise SmoothnessViolation(f"{u.name}: principal-value quadrature needs two derivatives")
    decay = scheme.tail_decay if scheme.tail_decay is not None else u.decay_exponent
    if decay is None:
        raise TailUnbounded(f"{u.name}: no decay declared, the far tail cannot be bounded")
    if decay <= -params.a:
        raise TailUnbounded(f"{u.name}: decay {decay} too slow for the operator to converge")
    return float(decay)


def fraclap_pv(u: ProfileSpec, x, scheme: PVScheme, params: Params) -> PVResult:
    """(-Delta)^{alpha/2} u at one point or an array of points (trailing axis n)."""
    _check_profile(u, scheme, params)
    n, a = params.n, params.a
    C = riesz_normalization(params).C_op
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x).reshape(-1, n)
    S = sphere_area(n)
    d = scheme.inner_radius
    R = scheme.far_radius

    ux = u(X)
    # near field: the odd part of u(x) - u(x+z) integrates to zero on the
    # ball, the quadratic part leaves -Delta u/(2n) * int |z|^{2-n-alpha}
    eye = np.eye(n)
    lap = sum(u(X + d * e) - 2.0 * ux + u(X - d * e) for e in eye) / d**2
    near = -lap / (2 * n) * S * d ** (2 - a) / (2 - a)

    # mid field, averaged over antipodal directions
    theta, wt = sphere_rule(n, scheme.angular_order)
    edges = geometric_panels(d, R, ratio=2.0, max_width=scheme.max_panel)
    r, wr = composite_gauss(edges, scheme.radial_order)
    mid = np.zeros(len(X))
    for ri, wi in zip(r, wr):
        y = X[:, None, :] + ri * theta[None, :, :]
        avg = (u(y) @ wt) / S
        mid += wi * ri ** (-1.0 - a) * S * (ux - avg)

    # far field: int_R^inf F(r) r^{-1-alpha} dr = R^{-alpha}/alpha * int_0^1 F(R v^{-1/alpha}) dv
    def far_field(order):
        v, wv = gauss_legendre_interval(order, 0.0, 1.0)
        out = ux * S * R ** (-a) / a
        for vi, wi in zip(v, wv):
            y = X[:, None, :] + R * vi ** (-1.0 / a) * theta[None, :, :]
            out = out - wi * R ** (-a) / a * (u(y) @ wt)
        return out

    far = far_field(scheme.tail_order)
    value = C * (near + mid + far)
    if not np.all(np.isfinite(value)):
        raise NonFiniteEvaluation(f"{u.name}: non-finite operator value")

    # error: next Taylor order relative to the near term, plus the change of
    # the far field under a coarser rule
    err = np.abs(C * near) * d * d + C * np.abs(far - far_field(max(2, scheme.tail_order // 2)))
    if single:
        return PVResult(float(value[0]), float(err[0]))
    shape = x.shape[:-1]
    return PVResult(value.reshape(shape), err.reshape(shape))


def spectral_fraclap(u: GridField, params: Optional[Params] = None, order: Optional[float] = None,
                     return_residue: bool = False):
    """Apply the symbol |xi|^order on the periodic box (order defaults to alpha).

    ``order=2`` is accepted so the symbol can be checked against the
    finite-difference Laplacian.
    """
    if not u.periodic:
        raise NotPeriodic("spectral_fraclap needs a periodic GridField")
    s = float(params.alpha) if order is None else float(order)
    xi = [2.0 * np.pi * np.fft.fftfreq(u.N, d=u.h)] * u.dim
    grids = np.meshgrid(*xi, indexing="ij")
    mag = np.sqrt(sum(g * g for g in grids))
    out = np.fft.ifftn(mag**s * np.fft.fftn(u.values))
    residue = float(np.max(np.abs(out.imag)))
    field = u.with_values(out.real)
    return (field, residue) if return_residue else field


def periodic_image_correction(points, mass: float, L: float, params: Params, shells: int = 40) -> np.ndarray:
    """Leading-order effect of the periodic copies of a compact bump.

    Far from its support the operator applied to a bump of total mass M is
    ``-C_op M |x|^{-n-alpha}``; summing this over the copies at ``2 L m``,
    ``m != 0``, gives what the periodic spectral result adds to the
    free-space value at ``points``.
    """
    n, a = params.n, params.a
    C = riesz_normalization(params).C_op
    pts = np.asarray(points, dtype=float).reshape(-1, n)
    ks = np.arange(-shells, shells + 1)
    m = np.stack(np.meshgrid(*([ks] * n), indexing="ij"), axis=-1).reshape(-1, n)
    m = m[np.any(m != 0, axis=1)] * (2.0 * L)
    total = np.zeros(len(pts))
    for start in range(0, len(m), 4096):
        diff = pts[:, None, :] + m[None, start:start + 4096, :]
        total += np.sum(np.linalg.norm(diff, axis=-1) ** (-n - a), axis=1)
    # lattice beyond the shells, as an integral over the cube complement
    total += _exterior_power_integral(n, n + a, shells + 0.5) * (2.0 * L) ** (-n - a)
    return -C * mass * total.reshape(np.shape(points)[:-1])


def _ball_rule(n: int, radius: float, center, radial_order: int = 24, angular_order: int = 16, panels: int = 4):
    r, wr = composite_gauss(np.linspace(0.0, radius, panels + 1), radial_order)
    theta, wt = sphere_rule(n, angular_order)
    pts = np.asarray(center, dtype=float) + r[:, None, None] * theta[None, :, :]
    w = (wr * r ** (n - 1))[:, None] * wt[None, :]
    return pts.reshape(-1, n), w.ravel()


def _chunked_pv(u: ProfileSpec, pts: np.ndarray, scheme: PVScheme, params: Params, chunk: int = 256) -> np.ndarray:
    out = np.empty(len(pts))
    for s in range(0, len(pts), chunk):
        out[s:s + chunk] = fraclap_pv(u, pts[s:s + chunk], scheme, params).value
    return out


def profile_mass(phi: ProfileSpec, params: Params, radius: float, center=None) -> float:
    c = np.zeros(params.n) if center is None else center
    pts, w = _ball_rule(params.n, radius, c)
    return float(np.sum(w * phi(pts)))


def pairing_residual(u: ProfileSpec, g: ProfileSpec, phi: ProfileSpec, params: Params,
                     scheme: Optional[PVScheme] = None, outer_factor: float = 3.0) -> float:
    """| int u (-Delta)^{alpha/2} phi - int g phi | for a compactly supported phi."""
    if phi.support_radius is None:
        raise ValueError("phi must declare its support radius")
    scheme = scheme or PVScheme()
    n, a = params.n, params.a
    rho = phi.support_radius
    c = np.zeros(n)
    rhs_pts, rhs_w = _ball_rule(n, rho, c)
    rhs = float(np.sum(rhs_w * g(rhs_pts) * phi(rhs_pts)))

    R = outer_factor * rho
    pts, w = _ball_rule(n, R, c, panels=8)
    lhs = float(np.sum(w * u(pts) * _chunked_pv(phi, pts, scheme, params)))
    # beyond R the operator applied to phi is -C_op M |x|^{-n-alpha}
    if u.decay_exponent is None:
        raise TailUnbounded(f"{u.name}: no decay declared")
    C = riesz_normalization(params).C_op
    M = profile_mass(phi, params, rho)
    theta, wt = sphere_rule(n, 16)
    v, wv = gauss_legendre_interval(32, 0.0, 1.0)
    tail = 0.0
    for vi, wi in zip(v, wv):
        r = R * vi ** (-1.0 / a)
        # dr r^{n-1} r^{-n-alpha} = R^{-alpha}/alpha dv
        tail += wi * (u(r * theta) @ wt)
    lhs += -C * M * R ** (-a) / a * tail
    return abs(lhs - rhs)


def delta_identity_check(y, phi: ProfileSpec, params: Params, scheme: Optional[PVScheme] = None,
                         radius: float = 8.0, radial_order: int = 16, angular_order: int = 12,
                         center=None) -> float:
    """| int G_inf(x, y) (-Delta)^{alpha/2} phi(x) dx - phi(y) |.

    Integrated in polar coordinates about y, which turns the kernel into the
    integrable weight r^{alpha-1}.  ``center`` locates phi (default: the
    origin); the polar ball reaches ``radius`` beyond it, and outside the
    ball the operator is replaced by its far-field form
    ``-C_op M |x - center|^{-n-alpha}`` with M the mass of phi.
    """
    scheme = scheme or PVScheme()
    n, a = params.n, params.a
    norm = riesz_normalization(params)
    y = np.asarray(y, dtype=float)
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    offset = float(np.linalg.norm(y - c))
    R = radius + offset
    # a bump seen from far away subtends a small angle
    theta, wt = sphere_rule(n, int(math.ceil(angular_order * (1.0 + offset / 2.0))))
    edges = np.concatenate([[0.0], geometric_panels(0.125, R, ratio=2.0, max_width=0.5)])
    t, wtt = gauss_legendre_interval(radial_order, 0.0, 1.0)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if lo == 0.0:
            # r^{alpha-1} on the first panel: substitute r = hi * s^{1/alpha}
            r = hi * t ** (1.0 / a)
            wr = wtt * hi**a / a
        else:
            r, wr = gauss_legendre_interval(radial_order, lo, hi)
            wr = wr * r ** (a - 1.0)
        pts = (y + r[:, None, None] * theta[None, :, :]).reshape(-1, n)
        L = _chunked_pv(phi, pts, scheme, params).reshape(len(r), -1)
        total += np.sum(wr * (L @ wt))
    support = phi.support_radius or 0.5 * radius
    M = profile_mass(phi, params, support, c)
    # int_R^inf r^{alpha-1} dr with r = R v^{-1/alpha}
    v, wv = gauss_legendre_interval(radial_order, 0.0, 1.0)
    for vi, wi in zip(v, wv):
        r = R * vi ** (-1.0 / a)
        far = np.linalg.norm(y + r * theta - c, axis=-1) ** (-n - a)
        total += -norm.C_op * M * wi * R**a / a * vi ** (-2.0) * (far @ wt)
    value = norm.A * total
    return abs(value - float(phi(y)))


class PicardResult(NamedTuple):
    norms: list
    verdict: str  # "Zero", "Decaying", "Growing", "Bounded" or "Diverged"


def picard_probe(u0: GridField, params: Params, iterations: int, z_truncation: Optional[float] = None,
                 f=None) -> PicardResult:
    """Sup-norms of u_{k+1} = weighted_riesz(u_k) on a grid.

    Purely diagnostic: positive solutions do not exist in the subcritical
    range, so no convergence is expected.
    """
    if np.any(u0.values < 0):
        raise ValueError("picard_probe needs u0 >= 0")
    Z = z_truncation if z_truncation is not None else u0.L * math.sqrt(u0.dim)
    norms = [float(np.max(u0.values))]
    u = u0
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(iterations):
            try:
                u = weighted_riesz(u, params, Z, f=f)
            except NonFiniteEvaluation:
                norms.append(math.inf)
                return PicardResult(norms, "Diverged")
            s = float(np.max(np.abs(u.values)))
            norms.append(s)
            if not math.isfinite(s) or s > 1e300:
                return PicardResult(norms, "Diverged")
    if norms[-1] == 0:
        verdict = "Zero"
    elif norms[-1] < norms[0] and all(b <= a for a, b in zip(norms[1:], norms[2:])):
        verdict = "Decaying"
    elif all(b >= a for a, b in zip(norms[1:], norms[2:])):
        verdict = "Growing"
    else:
        verdict = "Bounded"
    return PicardResult(norms, verdict)


def pv_spectral_discrepancy(u: ProfileSpec, params: Params, L: float, N: int,
                            probe_radius: float = 2.0, scheme: Optional[PVScheme] = None,
                            image_correction: bool = True) -> float:
    """Relative max discrepancy between the two operator evaluations on the
    grid nodes within ``probe_radius`` of the origin.

    The spectral side sees the periodised profile; its copies are accounted
    for by :func:`periodic_image_correction` unless disabled.
    """
    grid = GridField.from_function(u, params.n, L, N, periodic=True)
    edge = np.concatenate([grid.values[0].ravel(), grid.values[..., 0].ravel()])
    if np.max(np.abs(edge)) > 1e-12:
        raise NotPeriodic("profile is not negligible on the box boundary")
    spec = spectral_fraclap(grid, params).values
    pts = grid.points()
    sel = np.sum(pts**2, axis=-1) <= probe_radius**2
    scheme = scheme or PVScheme.for_grid(grid.h)
    pv = _chunked_pv(u, pts[sel], scheme, params)
    if image_correction:
        mass = float(np.sum(grid.values)) * grid.cell_volume
        pv = pv + periodic_image_correction(pts[sel], mass, L, params)
    return float(np.max(np.abs(pv - spec[sel])) / np.max(np.abs(spec[sel])))


def interpolate_periodic(field: GridField) -> ProfileSpec:
    """Cubic-spline interpolant of a periodic grid field as a profile."""
    coeffs = ndimage.spline_filter(field.values, order=3, mode="grid-wrap")

    def ev(x):
        x = np.asarray(x, dtype=float)
        idx = [(x[..., i] - (field.center[i] - field.L)) / field.h for i in range(field.dim)]
        flat = [i.ravel() for i in idx]
        vals = ndimage.map_coordinates(coeffs, flat, order=3, mode="grid-wrap", prefilter=False)
        return vals.reshape(x.shape[:-1])

    return ProfileSpec(ev, field.dim, smoothness_order=2, decay_exponent=0.0, name="interpolant")
