"""Riesz and ball Green's kernels, weighted Riesz potentials, the 1-D
reduction constant and the Hardy-Littlewood-Sobolev probe."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy import special
from scipy.signal import fftconvolve

from ._quadrature import (
    cube_singular_rule,
    gauss_jacobi_unit,
    gauss_legendre,
    gauss_legendre_interval,
    sphere_area,
    sphere_rule,
)
from .core import (
    CoincidentPoints,
    DivergentReduction,
    GridField,
    NegativeRatio,
    Params,
    ProfileSpec,
    TruncationTooSmall,
    Variant,
    ZeroInput,
)


@dataclass(frozen=True)
class RieszNormalization:
    A: float  # Riesz potential constant, inverse of the symbol |xi|^alpha
    C_op: float  # principal-value constant for the symbol |xi|^alpha


def riesz_normalization(params: Params) -> RieszNormalization:
    n, a = params.n, params.a
    A = special.gamma((n - a) / 2) / (2**a * np.pi ** (n / 2) * special.gamma(a / 2))
    C = 2**a * special.gamma((n + a) / 2) / (np.pi ** (n / 2) * abs(special.gamma(-a / 2)))
    return RieszNormalization(float(A), float(C))


def green_free(x, y, params: Params, constant: Optional[float] = None):
    """A_{n,alpha} |x - y|^{alpha - n}; pass ``constant=1`` for the unit kernel."""
    A = riesz_normalization(params).A if constant is None else constant
    d = np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float), axis=-1)
    if np.any(d == 0):
        raise CoincidentPoints("Riesz kernel evaluated at coincident points")
    out = A * d ** (params.a - params.n)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# ball Green's function


def inner_integral(ratio: float, params: Params, nodes: int = 24) -> float:
    """int_0^ratio (ratio - b)^{(n-2)/2} b^{-alpha/2} / (1 + b) db.

    With ``b = w^k``, ``k = 2/(2 - alpha)``, the ``b^{-alpha/2}`` singularity
    disappears: the integrand becomes ``k (ratio - w^k)^{(n-2)/2} / (1 + w^k)``
    on ``[0, ratio^{1/k}]``.  That range is covered by geometrically growing
    Gauss-Legendre panels, except the last half which carries the
    ``(W - w)^{(n-2)/2}`` endpoint factor as a Gauss-Jacobi weight.
    """
    if ratio < 0:
        raise NegativeRatio(f"ratio must be nonnegative, got {ratio}")
    if ratio == 0:
        return 0.0
    n, a = params.n, params.a
    k = 2.0 / (2.0 - a)
    beta = (n - 2) / 2.0
    W = ratio ** (1.0 / k)

    total = 0.0
    # regular part [0, W/2]
    split = 0.5 * W
    # w^k is not smooth at 0 unless k is an integer: grade panels toward 0
    edge = min(1.0, split) * 2.0**-30
    edges = [0.0]
    while True:
        edges.append(edge)
        if edge >= split:
            break
        edge = min(4.0 * edge, split)
    for lo, hi in zip(edges[:-1], edges[1:]):
        w, wt = gauss_legendre_interval(nodes, lo, hi)
        b = w**k
        total += np.sum(wt * k * (ratio - b) ** beta / (1.0 + b))
    # endpoint panel [W/2, W] with weight (W - w)^beta
    t, wt = gauss_jacobi_unit(nodes, 0.0, beta)
    w = split + t * (W - split)
    q = w / W
    # (ratio - w^k)/(W - w) = (ratio/W) * (1 - q^k)/(1 - q), evaluated stably
    lq = np.log(q)
    frac = np.where(q < 1.0, np.expm1(k * lq) / np.expm1(lq), k)
    reg = (ratio / W * frac) ** beta
    total += (W - split) ** (beta + 1.0) * np.sum(wt * k * reg / (1.0 + w**k))
    return float(total)


def dirichlet_limit_constant(params: Params) -> float:
    """The value of B that zeroes the bracket in the limit of a boundary point."""
    return math.sin(math.pi * params.a / 2.0) / math.pi


@dataclass(frozen=True)
class BallGreenSpec:
    R: float
    B: float
    quadrature_nodes: int = 24
    probe_gap: float = 1e-3


def _bracket_deficit(ratio: float, params: Params, nodes: int) -> float:
    """(1 + ratio)^{-(n-2)/2} * inner_integral(ratio)."""
    return (1.0 + ratio) ** (-(params.n - 2) / 2.0) * inner_integral(ratio, params, nodes)


def probe_ratio(probe_gap: float) -> float:
    """s_R/t_R for y at the center and x at relative distance probe_gap from the sphere."""
    r = 1.0 - probe_gap
    return r * r / (1.0 - r * r)


def calibrate_ball_green(params: Params, R: float, probe_gap: float = 1e-3,
                         nodes: int = 24, tol: float = 1e-10) -> BallGreenSpec:
    """Fix B by bisection so that G_R vanishes (to ``tol`` relative to G_inf)
    at the probe pair y = 0, x = (1 - probe_gap) R e_1."""
    if not 0 < probe_gap < 1:
        raise ValueError("probe_gap must lie in (0, 1)")
    J = _bracket_deficit(probe_ratio(probe_gap), params, nodes)
    lo, hi = 0.0, 1.0
    while 1.0 - hi * J > 0:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        val = 1.0 - mid * J
        if abs(val) < tol:
            break
        if val > 0:
            lo = mid
        else:
            hi = mid
    return BallGreenSpec(R=float(R), B=mid, quadrature_nodes=nodes, probe_gap=probe_gap)


def green_ball(x, y, spec: BallGreenSpec, params: Params, constant: Optional[float] = None,
               clip: bool = True) -> float:
    """Green's function of the ball B_R in the (n-2)/2-exponent representation.

    Returns 0 when either point lies outside the open ball. With a single
    calibrated B the bracket dips below zero for a few off-centre pairs near
    the boundary; ``clip`` clamps those to 0, ``clip=False`` returns the raw value.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    R = spec.R
    d = float(np.linalg.norm(x - y))
    if d == 0:
        raise CoincidentPoints("ball Green's function evaluated at coincident points")
    tx = 1.0 - float(x @ x) / R**2
    ty = 1.0 - float(y @ y) / R**2
    if tx <= 0 or ty <= 0:
        return 0.0
    ratio = (d * d / R**2) / (tx * ty)
    A = riesz_normalization(params).A if constant is None else constant
    bracket = 1.0 - spec.B * _bracket_deficit(ratio, params, spec.quadrature_nodes)
    if clip:
        bracket = max(bracket, 0.0)
    return A * d ** (params.a - params.n) * bracket


def green_ball_boggio(x, y, R: float, params: Params) -> float:
    """Classical Boggio form, kept as a diagnostic against :func:`green_ball`."""
    n, a = params.n, params.a
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d2 = float(np.sum((x - y) ** 2)) / R**2
    t = (1.0 - float(x @ x) / R**2) * (1.0 - float(y @ y) / R**2)
    if t <= 0:
        return 0.0
    if d2 == 0:
        raise CoincidentPoints("ball Green's function evaluated at coincident points")
    r0 = t / d2
    kappa = special.gamma(n / 2) / (2**a * np.pi ** (n / 2) * special.gamma(a / 2) ** 2)
    # int_0^r0 u^{a/2-1} (1+u)^{-n/2} du via the regularised incomplete beta
    p, q = a / 2, n / 2 - a / 2
    integral = special.beta(p, q) * special.betainc(p, q, r0 / (1.0 + r0))
    return float(kappa * R ** (a - n) * d2 ** ((a - n) / 2) * integral)


# ---------------------------------------------------------------------------
# weighted Riesz potentials


def weight_function(variant: Variant, f: Optional[Callable] = None) -> Callable:
    if variant is Variant.QUADRATIC:
        return lambda t: t * t
    if f is None:
        raise ValueError("the general variant needs the weight function f")
    return f


def _cell_offsets(n: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = gauss_legendre(order)
    g = np.meshgrid(*([x] * n), indexing="ij")
    gw = np.meshgrid(*([w] * n), indexing="ij")
    pts = 0.5 * np.stack([a.ravel() for a in g], axis=-1)
    wts = np.prod(np.stack([a.ravel() for a in gw], axis=-1), axis=-1) / 2.0**n
    return pts, wts


def riesz_potential(density: Callable[[np.ndarray], np.ndarray], x, params: Params,
                    z_truncation: float, h: float = 0.25, order: int = 6,
                    block: int = 1, constant: Optional[float] = None,
                    halfspace: Optional[float] = None, chunk: int = 200_000) -> float:
    """int_{|y| <= Z} A |x - y|^{alpha-n} density(y) dy at a single point x.

    Cells of side ``h`` are centred on the lattice ``x + h Z^n`` so the cube of
    ``(2 block + 1)^n`` cells around ``x`` can be integrated with the
    pyramid (polar) rule.  Every other cell gets an ``order^n`` Gauss rule.
    With ``halfspace=lam`` the domain is cut to ``y_1 < lam``; ``lam - x_1``
    must then be a positive half-integer multiple of ``h`` so the cut follows
    cell faces (the singular block shrinks if the plane is closer than it).
    """
    n, a = params.n, params.a
    A = riesz_normalization(params).A if constant is None else constant
    x = np.asarray(x, dtype=float)
    kmax = int(math.ceil((z_truncation + np.linalg.norm(x)) / h)) + 1
    ks = np.arange(-kmax, kmax + 1)
    if halfspace is not None:
        shift = (halfspace - x[0]) / h - 0.5
        if abs(shift - round(shift)) > 1e-9 or round(shift) < 0:
            raise ValueError("half-space cut must fall on a cell face on the far side of x")
        kcut = int(round(shift))
        block = min(block, kcut)
    H = (block + 0.5) * h

    total = 0.0
    # near block: pyramid rule scaled to the cube of half-width H
    zb, wb = cube_singular_rule(n, a, 20, 10, 2)
    yb = x + H * zb
    mask = np.sum(yb**2, axis=-1) <= z_truncation**2
    total += H**a * np.sum(wb[mask] * density(yb[mask]))

    # far cells, streamed over slabs in the first coordinate
    off, woff = _cell_offsets(n, order)
    rest = np.stack(np.meshgrid(*([ks] * (n - 1)), indexing="ij"), axis=-1).reshape(-1, n - 1)
    for k0 in ks:
        if halfspace is not None and k0 > kcut:
            break
        kk = np.concatenate([np.full((len(rest), 1), k0), rest], axis=1)
        far = np.max(np.abs(kk), axis=1) > block
        centers = x + h * kk[far]
        keep = np.sum(centers**2, axis=-1) <= (z_truncation + h * math.sqrt(n)) ** 2
        centers = centers[keep]
        if len(centers) == 0:
            continue
        for start in range(0, len(centers), max(1, chunk // len(woff))):
            c = centers[start:start + max(1, chunk // len(woff))]
            y = c[:, None, :] + h * off[None, :, :]
            r = np.linalg.norm(y - x, axis=-1)
            inside = np.sum(y**2, axis=-1) <= z_truncation**2
            vals = np.where(inside, density(y), 0.0)
            total += h**n * np.sum(woff[None, :] * vals * r ** (a - n))
    return float(A * total)


def _tail_estimate(density_on_sphere: float, decay: float, Z: float, params: Params, A: float) -> float:
    """Bound on the contribution of |y| > Z for evaluation points with |x| <= Z/2,
    assuming the density decays like |y|^{-decay} beyond Z."""
    n, a = params.n, params.a
    gamma = decay if np.isfinite(decay) else a + 1.0
    if gamma <= a:
        return math.inf
    return A * 2.0 ** (n - a) * sphere_area(n) * density_on_sphere * Z**a / (gamma - a)


def weighted_riesz(u, params: Params, z_truncation: float, points=None, weight: Optional[Variant] = None,
                   f: Optional[Callable] = None, weight_growth: Optional[float] = None,
                   tail_tol: float = 1e-6, h: float = 0.25, order: int = 6):
    """v(x) = int_{|y|<=Z} G_inf(x, y) w(y_n) u(y)^p dy.

    ``u`` is either a :class:`ProfileSpec` (evaluated at ``points``, or at the
    nodes of ``points`` when it is a GridField template) or a
    :class:`GridField`, in which case the potential is returned on the same
    grid via FFT convolution with exact cell weights.
    """
    variant = params.variant if weight is None else weight
    wfun = weight_function(variant, f)
    p = params.p
    if isinstance(u, GridField):
        return _weighted_riesz_grid(u, params, wfun, z_truncation)

    def density(y):
        uy = u(y)
        return wfun(y[..., -1]) * np.sign(uy) * np.abs(uy) ** p

    template = points if isinstance(points, GridField) else None
    pts = points.points().reshape(-1, params.n) if template is not None else np.atleast_2d(points)
    A = riesz_normalization(params).A
    vals = np.array([riesz_potential(density, x, params, z_truncation, h=h, order=order) for x in pts])

    # tail check from the declared decay of u
    if u.decay_exponent is None:
        raise TruncationTooSmall("no decay declared; cannot bound the truncated tail")
    if np.max(np.linalg.norm(pts, axis=-1)) > 0.5 * z_truncation:
        raise TruncationTooSmall("evaluation points must satisfy |x| <= z_truncation/2")
    theta, _ = sphere_rule(params.n, 8)
    on_sphere = float(np.max(np.abs(density(z_truncation * theta))))
    growth = 2.0 if variant is Variant.QUADRATIC else (weight_growth or 0.0)
    tail = _tail_estimate(on_sphere, u.decay_exponent * p - growth, z_truncation, params, A)
    scale = max(float(np.max(np.abs(vals))), np.finfo(float).tiny)
    if tail > tail_tol * scale:
        raise TruncationTooSmall(f"estimated tail {tail:.3e} exceeds tolerance at Z={z_truncation}")
    if template is not None:
        return template.with_values(vals)
    return vals


# ---------------------------------------------------------------------------
# exact cell weights for grid convolutions


@lru_cache(maxsize=16)
def cell_kernel_weights(n: int, gamma: float, half: int) -> np.ndarray:
    """W_k = int_{cell k} |z|^{gamma-n} dz for unit cells centred at k in [-half, half]^n.

    For cells of side h the weights scale exactly as h^gamma.
    """
    ks = np.arange(-half, half + 1)
    grid = np.stack(np.meshgrid(*([ks] * n), indexing="ij"), axis=-1).reshape(-1, n).astype(float)
    cheb = np.max(np.abs(grid), axis=1)
    W = np.zeros(len(grid))
    # exact-ish polar treatment of the centre cell
    zc, wc = cube_singular_rule(n, gamma, 24, 12, 2)
    W[cheb == 0] = 0.5**gamma * np.sum(wc)
    for lo, hi, order in ((1, 3, 10), (4, 12, 5), (13, np.inf, 3)):
        sel = (cheb >= lo) & (cheb <= hi)
        if not np.any(sel):
            continue
        off, woff = _cell_offsets(n, order)
        idx = np.nonzero(sel)[0]
        for start in range(0, len(idx), 50_000):
            part = idx[start:start + 50_000]
            y = grid[part][:, None, :] + off[None, :, :]
            r = np.linalg.norm(y, axis=-1)
            W[part] = np.sum(woff[None, :] * r ** (gamma - n), axis=1)
    W = W.reshape((2 * half + 1,) * n)
    W.flags.writeable = False
    return W


def riesz_convolve(values: np.ndarray, h: float, n: int, gamma: float) -> np.ndarray:
    """sum_j W_{i-j} values_j with cell weights for side h (no normalisation constant)."""
    N = values.shape[0]
    W = cell_kernel_weights(n, float(gamma), N - 1) * h**gamma
    return fftconvolve(values, W, mode="same")


def _weighted_riesz_grid(u: GridField, params: Params, wfun: Callable, z_truncation: float) -> GridField:
    pts = u.points()
    dens = wfun(pts[..., -1]) * np.sign(u.values) * np.abs(u.values) ** params.p
    dens = np.where(np.sum(pts**2, axis=-1) <= z_truncation**2, dens, 0.0)
    A = riesz_normalization(params).A
    v = A * riesz_convolve(dens, u.h, params.n, params.a)
    return u.with_values(v)


# ---------------------------------------------------------------------------
# 1-D reduction


def reduction_constant(params: Params, method: str = "closed_form") -> float:
    """c with int_{R^{n-1}} dy' / |x - y|^{n-alpha} = c |x_n - y_n|^{alpha-1}.

    Finite only for alpha < 1; otherwise :class:`DivergentReduction` is raised.
    """
    n, a = params.n, params.a
    if a >= 1:
        raise DivergentReduction(
            f"transverse integral diverges for alpha={params.alpha} (integrand ~ s^(alpha-2))")
    angular = sphere_area(n - 1)
    if method == "closed_form":
        radial = 0.5 * special.beta((n - 1) / 2, (1 - a) / 2)
    elif method == "quadrature":
        from scipy.integrate import quad

        radial = quad(lambda s: s ** (n - 2) * (1 + s * s) ** (-(n - a) / 2), 0, 1,
                      epsabs=0, epsrel=1e-13, limit=200)[0]
        # s = 1/v on (1, inf) turns the slow algebraic tail into the endpoint weight v^{-alpha}
        radial += quad(lambda v: (1 + v * v) ** (-(n - a) / 2), 0, 1, weight="alg", wvar=(-a, 0.0),
                       epsabs=0, epsrel=1e-13, limit=200)[0]
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(angular * radial)


def transverse_integral(params: Params, t: float, step: float = 0.04, span: float = 5.0) -> float:
    """Direct (n-1)-dimensional Cartesian quadrature of int dy' / (|y'|^2 + t^2)^{(n-alpha)/2}.

    A product sinh-sinh trapezoid rule; it never uses polar coordinates, so it
    is independent of :func:`reduction_constant`.
    """
    n, a = params.n, params.a
    tau = np.arange(-span, span + step / 2, step)
    inner = 0.5 * np.pi * np.sinh(tau)
    y = t * np.sinh(inner)
    w = t * step * 0.5 * np.pi * np.cosh(tau) * np.cosh(inner)
    d = n - 1
    total = 0.0
    # sum slab by slab over the first axis to bound memory
    if d == 1:
        return float(np.sum(w * (y * y + t * t) ** (-(n - a) / 2)))
    g = np.meshgrid(*([y] * (d - 1)), indexing="ij")
    gw = np.meshgrid(*([w] * (d - 1)), indexing="ij")
    r2 = sum(x * x for x in g)
    ww = np.prod(np.stack(gw), axis=0)
    for yi, wi in zip(y, w):
        total += wi * np.sum(ww * (r2 + yi * yi + t * t) ** (-(n - a) / 2))
    return float(total)


# ---------------------------------------------------------------------------
# Hardy-Littlewood-Sobolev probe


def _exterior_power_integral(n: int, gamma_exp: float, H: float) -> float:
    """int over R^n minus the cube [-H, H]^n of |x|^{-gamma_exp} dx (gamma_exp > n)."""
    x, w = gauss_legendre(24)
    if n == 1:
        face = 1.0
    else:
        g = np.meshgrid(*([x] * (n - 1)), indexing="ij")
        gw = np.meshgrid(*([w] * (n - 1)), indexing="ij")
        r2 = sum(a * a for a in g)
        face = float(np.sum(np.prod(np.stack(gw), axis=0) * (1.0 + r2) ** (-gamma_exp / 2)))
    return 2 * n * face * H ** (n - gamma_exp) / (gamma_exp - n)


def hls_ratio(g: GridField, q: float, params: Params, pad: int = 2) -> float:
    """||T g||_{L^q(R^n)} / ||g||_{L^r}, r = nq/(n + alpha q), T the unit Riesz potential.

    ``g`` is piecewise constant on the cells of its grid.  ``Tg`` is computed
    exactly on the cells (up to the cell-weight quadrature) on a window ``pad``
    times the support size around the support, and beyond the window through
    its leading far-field term ``(int g) |x - c|^{alpha-n}``.
    """
    n, a = params.n, params.a
    if q <= n / (n - a):
        raise ValueError(f"q must exceed n/(n-alpha) = {n / (n - a)}")
    vals = g.values
    if not np.any(vals):
        raise ZeroInput("hls_ratio of the zero function")
    r = n * q / (n + a * q)
    h = g.h
    # crop to the support bounding box
    nz = np.nonzero(vals)
    sl = tuple(slice(int(np.min(i)), int(np.max(i)) + 1) for i in nz)
    core = vals[sl]
    ext = max(core.shape)
    margin = pad * ext
    padded = np.zeros(tuple(s + 2 * margin for s in core.shape))
    padded[tuple(slice(margin, margin + s) for s in core.shape)] = core
    W = cell_kernel_weights(n, float(a), max(padded.shape) - 1) * h**a
    Tg = fftconvolve(padded, W, mode="same")
    tq = h**n * np.sum(np.abs(Tg) ** q)
    # far field beyond the window, about the centre of mass of |g|
    mass = h**n * np.sum(core)
    half_window = 0.5 * min(padded.shape) * h
    tq += abs(mass) ** q * _exterior_power_integral(n, (n - a) * q, half_window)
    gr = h**n * np.sum(np.abs(core) ** r)
    return float(tq ** (1.0 / q) / gr ** (1.0 / r))


def dilate(g: GridField, lam: float) -> GridField:
    """The field x -> g(lam x): same samples on a box shrunk by lam."""
    c = tuple(ci / lam for ci in g.center)
    return GridField(g.dim, g.L / lam, g.N, g.values, g.periodic, c)
