"""Kelvin transform, reflections across moving planes and the symmetry
diagnostics built on them."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from ._quadrature import gauss_legendre, sphere_rule
from .core import (
    CoincidentPoints,
    EvaluationAtCenter,
    GridField,
    InvalidParams,
    Params,
    ProfileSpec,
    SingularCell,
    TruncationTooSmall,
    Variant,
)
from .kernels import _cell_offsets, _tail_estimate, riesz_normalization, riesz_potential


@dataclass(frozen=True)
class KelvinCenter:
    z0: tuple

    def __post_init__(self):
        z = tuple(float(v) for v in self.z0)
        if len(z) < 2:
            raise InvalidParams("center needs at least two coordinates")
        if z[-1] != 0.0:
            raise InvalidParams(f"center must lie on the boundary hyperplane, got last coordinate {z[-1]}")
        object.__setattr__(self, "z0", z)

    @property
    def point(self) -> np.ndarray:
        return np.asarray(self.z0)


@dataclass(frozen=True)
class PlaneConfig:
    lam: float
    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InvalidParams("excluded radius epsilon must be positive")


@dataclass(frozen=True)
class TransformedWeight:
    variant: Variant
    beta: float

    @classmethod
    def for_params(cls, params: Params) -> "TransformedWeight":
        return cls(params.variant, transformed_beta(params))


def transformed_beta(params: Params):
    """Power of |y - z0| left over after transforming the weighted equation."""
    shift = (params.n - params.alpha) * (params.tau - params.p)
    return 4 + shift if params.variant is Variant.QUADRATIC else shift


def _inversion(x: np.ndarray, z0: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d = x - z0
    r2 = np.sum(d * d, axis=-1)
    if np.any(r2 == 0):
        raise EvaluationAtCenter("Kelvin transform evaluated at its center")
    return d / r2[..., None] + z0, r2


def kelvin_transform(u: ProfileSpec, center: KelvinCenter, params: Params) -> ProfileSpec:
    """x -> |x - z0|^{alpha-n} u(z0 + (x - z0)/|x - z0|^2)."""
    z0 = center.point
    n, a = params.n, params.a
    ev = u.evaluator

    def kelvin(x):
        x = np.asarray(x, dtype=float)
        xi, r2 = _inversion(x, z0)
        return r2 ** ((a - n) / 2.0) * ev(xi)

    return ProfileSpec(kelvin, u.dim, u.smoothness_order, decay_exponent=n - a,
                       singular_point=tuple(z0), name=f"kelvin({u.name})")


def reflect(x, lam: float) -> np.ndarray:
    x = np.array(x, dtype=float)
    x[..., 0] = 2.0 * lam - x[..., 0]
    return x


def transformed_weight_eval(y, weight: TransformedWeight, center: KelvinCenter, params: Params,
                            f: Optional[Callable] = None):
    y = np.asarray(y, dtype=float)
    d = y - center.point
    r2 = np.sum(d * d, axis=-1)
    if np.any(r2 == 0):
        raise EvaluationAtCenter("transformed weight evaluated at the Kelvin center")
    damp = r2 ** (-float(weight.beta) / 2.0)
    if weight.variant is Variant.QUADRATIC:
        return y[..., -1] ** 2 * damp
    if f is None:
        raise ValueError("the general variant needs the weight function f")
    return f(y[..., -1] / r2) * damp


def _excluded(points: np.ndarray, centres, radius: float) -> np.ndarray:
    out = np.zeros(points.shape[:-1], dtype=bool)
    for c in centres:
        out |= np.sum((points - c) ** 2, axis=-1) < radius**2
    return out


def w_lambda_field(ubar: ProfileSpec, lam: float, grid: GridField, center: KelvinCenter,
                   exclusion: Optional[float] = None) -> GridField:
    """ubar(x^lam) - ubar(x) on the nodes with x_1 < lam.

    Nodes on the other side of the plane, and nodes within ``exclusion``
    (default 2h) of z0 or its reflection, carry the value 0.
    """
    h = grid.h
    eps = 2.0 * h if exclusion is None else exclusion
    if eps < h:
        raise SingularCell(f"exclusion radius {eps} is smaller than one cell ({h})")
    pts = grid.points()
    z0 = center.point
    keep = (pts[..., 0] < lam) & ~_excluded(pts, (z0, reflect(z0, lam)), eps)
    vals = np.zeros(pts.shape[:-1])
    sel = pts[keep]
    vals[keep] = ubar(reflect(sel, lam)) - ubar(sel)
    return grid.with_values(vals)


class SigmaMinus(NamedTuple):
    measure: float
    fraction: float
    cell_volume: float
    n_cells: int


def sigma_minus_measure(w: GridField, config: PlaneConfig, center: KelvinCenter, tol: float = 1e-12) -> SigmaMinus:
    """Volume of the cells in {x_1 < lam} outside B_eps(z0^lam) where w < -tol.

    ``fraction`` is relative to the whole half-box on the near side of the
    plane, so w = -1 gives one minus the share of the excluded ball.
    """
    pts = w.points()
    side = pts[..., 0] < config.lam
    ball = _excluded(pts, (reflect(center.point, config.lam),), config.epsilon)
    neg = side & ~ball & (w.values < -tol)
    count = int(np.count_nonzero(neg))
    total = int(np.count_nonzero(side))
    measure = count * w.cell_volume
    return SigmaMinus(measure, count / total if total else 0.0, w.cell_volume, count)


def kernel_difference_positivity(x, y, lam: float, params: Params) -> float:
    """G_inf(x, y) - G_inf(x^lam, y); positive when x and y lie strictly on the same side."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.array_equal(x, y):
        raise CoincidentPoints("kernel difference at coincident points")
    A = riesz_normalization(params).A
    e = params.a - params.n
    d1 = np.linalg.norm(x - y, axis=-1)
    d2 = np.linalg.norm(reflect(x, lam) - y, axis=-1)
    return A * (d1**e - d2**e)


class DifferenceIdentity(NamedTuple):
    lhs: float
    rhs: float
    residual: float
    tail: float


def difference_identity_residual(ubar: ProfileSpec, lam: float, x, weight: TransformedWeight,
                                 center: KelvinCenter, params: Params, truncation: float,
                                 f: Optional[Callable] = None, h: float = 0.25, order: int = 8,
                                 tail_tol: float = 1e-6) -> DifferenceIdentity:
    """Compare the two sides of the half-space difference identity.

    With F = W ubar^p and V = G_inf * F, the left side is V(x) - V(x^lam),
    each a full-space potential.  The right side is the integral over
    {y_1 < lam} of [G(x,y) - G(x^lam,y)] [F(y) - F(y^lam)].  For a solution
    V equals ubar.  ``lam - x_1`` must be a half-integer multiple of ``h``.
    """
    n, a, p = params.n, params.a, params.p
    x = np.asarray(x, dtype=float)
    if not x[0] < lam:
        raise ValueError("x must lie on the near side of the plane")
    z0 = center.point
    A = riesz_normalization(params).A

    def F(y):
        y = np.asarray(y, dtype=float)
        r2 = np.sum((y - z0) ** 2, axis=-1)
        out = np.zeros(y.shape[:-1])
        ok = r2 > 0
        out[ok] = transformed_weight_eval(y[ok], weight, center, params, f) * ubar(y[ok]) ** p
        return out

    def D(y):
        return F(y) - F(reflect(y, lam))

    Z = truncation
    if np.linalg.norm(x) > 0.5 * Z or abs(lam) > 0.5 * Z:
        raise TruncationTooSmall("x and the plane must lie well inside the truncation ball")
    xl = reflect(x, lam)
    lhs = (riesz_potential(F, x, params, Z, h=h, order=order)
           - riesz_potential(F, xl, params, Z, h=h, order=order))

    # right side: the G(x, .) part carries the singularity at x; the
    # G(x^lam, .) part is smooth on the half-space
    first = riesz_potential(D, x, params, Z, h=h, order=order, halfspace=lam)
    second = _halfspace_smooth(lambda y: np.linalg.norm(y - xl, axis=-1) ** (a - n) * D(y),
                               x, lam, Z, h, order + 4, n)
    rhs = first - A * second

    theta, _ = sphere_rule(n, 8)
    on_sphere = float(np.max(np.abs(F(Z * theta))))
    decay = (n - a) * p + float(weight.beta) - (2.0 if weight.variant is Variant.QUADRATIC else 0.0)
    tail = float(2.0 * _tail_estimate(on_sphere, decay, Z, params, A))
    scale = max(abs(lhs), abs(rhs), np.finfo(float).tiny)
    if tail > tail_tol * scale and tail > 1e-14:
        raise TruncationTooSmall(f"estimated tail {tail:.3e} exceeds tolerance at Z={Z}")
    return DifferenceIdentity(float(lhs), float(rhs), float(abs(lhs - rhs)), tail)


def _halfspace_smooth(g, x, lam, Z, h, order, n):
    """Tensor Gauss quadrature of a smooth g over {y_1 < lam, |y| <= Z} on cells centred at x + h Z^n."""
    off, woff = _cell_offsets(n, order)
    kcut = int(round((lam - x[0]) / h - 0.5))
    kmax = int(math.ceil((Z + np.linalg.norm(x)) / h)) + 1
    ks = np.arange(-kmax, kmax + 1)
    rest = np.stack(np.meshgrid(*([ks] * (n - 1)), indexing="ij"), axis=-1).reshape(-1, n - 1)
    total = 0.0
    for k0 in ks[ks <= kcut]:
        kk = np.concatenate([np.full((len(rest), 1), k0), rest], axis=1)
        c = x + h * kk
        c = c[np.sum(c**2, axis=-1) <= (Z + h * math.sqrt(n)) ** 2]
        if len(c) == 0:
            continue
        y = c[:, None, :] + h * off[None, :, :]
        inside = np.sum(y**2, axis=-1) <= Z**2
        vals = np.where(inside, g(y), 0.0)
        total += h**n * np.sum(woff[None, :] * vals)
    return float(total)


def symmetry_scan(ubar: ProfileSpec, center: KelvinCenter, lambda_range, grid: GridField,
                  strip_cells: Optional[int] = None, exclusion: Optional[float] = None):
    """Scan planes x_1 = lam and return (lam*, min_lam ||w_lam||_1).

    Every lam is judged on a strip of the same width to the left of its
    plane, sampled at half-cell offsets, with the transverse nodes of
    ``grid``; the scan steps by the grid spacing.
    """
    lo, hi = (float(v) for v in lambda_range)
    h = grid.h
    K = strip_cells if strip_cells is not None else grid.N // 2
    eps = 2.0 * h if exclusion is None else exclusion
    if eps < h:
        raise SingularCell(f"exclusion radius {eps} is smaller than one cell ({h})")
    z0 = center.point
    count = int(math.floor((hi - lo) / h + 1e-9)) + 1
    lams = lo + h * np.arange(count)
    trans = [grid.axis(i) for i in range(1, grid.dim)]
    offs = (np.arange(K) + 0.5) * h
    best_lam, best = None, math.inf
    for lam in lams:
        axes = [lam - offs] + trans
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, grid.dim)
        pts = pts[~_excluded(pts, (z0, reflect(z0, lam)), eps)]
        w = ubar(reflect(pts, lam)) - ubar(pts)
        l1 = float(np.sum(np.abs(w))) * h**grid.dim
        if l1 < best:
            best_lam, best = float(lam), l1
    return best_lam, best
