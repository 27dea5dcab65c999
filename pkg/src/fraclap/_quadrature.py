"""Quadrature building blocks shared by the kernel, operator and HLS code.

Everything here returns plain ``(nodes, weights)`` numpy arrays so callers can
vectorise evaluations over all nodes at once.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import special


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere S^{n-1} in R^n."""
    return 2.0 * np.pi ** (n / 2.0) / special.gamma(n / 2.0)


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def gauss_legendre_interval(order: int, a: float, b: float):
    x, w = gauss_legendre(order)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


@lru_cache(maxsize=None)
def gauss_jacobi_unit(order: int, left: float, right: float):
    """Nodes/weights on [0, 1] for the weight t**left * (1 - t)**right."""
    x, w = special.roots_jacobi(order, right, left)
    t = 0.5 * (x + 1.0)
    w = w / 2.0 ** (left + right + 1.0)
    t.flags.writeable = False
    w.flags.writeable = False
    return t, w


@lru_cache(maxsize=None)
def sphere_rule(n: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Product rule on S^{n-1}; weights sum to the sphere area.

    S^1 uses the equispaced trapezoid rule (spectrally accurate for periodic
    integrands).  Higher spheres are built recursively by splitting off the
    last coordinate ``c`` with Gauss-Jacobi weight ``(1 - c^2)^{(n-3)/2}``.
    """
    if n < 2:
        raise ValueError("sphere rule needs n >= 2")
    if n == 2:
        m = 2 * order
        theta = 2.0 * np.pi * (np.arange(m) + 0.5) / m
        pts = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        wts = np.full(m, 2.0 * np.pi / m)
    else:
        a = (n - 3) / 2.0
        c, wc = special.roots_jacobi(order, a, a)
        sub_pts, sub_w = sphere_rule(n - 1, order)
        rad = np.sqrt(1.0 - c**2)
        pts = np.concatenate(
            [
                np.concatenate([rad[i] * sub_pts, np.full((len(sub_w), 1), c[i])], axis=1)
                for i in range(order)
            ]
        )
        wts = np.concatenate([wc[i] * sub_w for i in range(order)])
    pts.flags.writeable = False
    wts.flags.writeable = False
    return pts, wts


@lru_cache(maxsize=None)
def cube_singular_rule(n: int, gamma: float, t_order: int, s_order: int, s_panels: int = 1):
    """Rule for the weakly singular integral over the cube [-1, 1]^n.

    Returns ``(z, w)`` with ``sum(w * f(z)) ~ int_{[-1,1]^n} f(z) |z|^{gamma-n} dz``
    for smooth ``f`` and ``gamma > 0``.  The cube is split into the 2n
    pyramids with apex at the origin; on each, ``z = t * (face point)`` so the
    Jacobian ``t^{n-1}`` absorbs the singularity into a Gauss-Jacobi weight
    ``t^{gamma-1}``.
    """
    t, wt = gauss_jacobi_unit(t_order, gamma - 1.0, 0.0)
    # composite Gauss-Legendre on the face coordinates
    edges = np.linspace(-1.0, 1.0, s_panels + 1)
    s1, ws1 = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        x, w = gauss_legendre_interval(s_order, a, b)
        s1.append(x)
        ws1.append(w)
    s1 = np.concatenate(s1)
    ws1 = np.concatenate(ws1)
    if n > 1:
        grids = np.meshgrid(*([s1] * (n - 1)), indexing="ij")
        s = np.stack([g.ravel() for g in grids], axis=-1)
        wgrids = np.meshgrid(*([ws1] * (n - 1)), indexing="ij")
        ws = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
    else:
        s = np.zeros((1, 0))
        ws = np.ones(1)
    pts, wts = [], []
    for axis in range(n):
        for sign in (-1.0, 1.0):
            face = np.insert(s, axis, sign, axis=1)
            norm = np.linalg.norm(face, axis=1)
            fw = ws * norm ** (gamma - n)
            pts.append((t[:, None, None] * face[None, :, :]).reshape(-1, n))
            wts.append((wt[:, None] * fw[None, :]).ravel())
    z = np.concatenate(pts)
    w = np.concatenate(wts)
    z.flags.writeable = False
    w.flags.writeable = False
    return z, w


def geometric_panels(r0: float, r1: float, ratio: float = 2.0, max_width: float | None = None):
    """Panel edges from r0 to r1 growing geometrically, capped at max_width."""
    edges = [r0]
    r = r0
    while r < r1:
        width = r * (ratio - 1.0) if r > 0 else r1
        if max_width is not None:
            width = min(width, max_width)
        r = min(r + width, r1)
        edges.append(r)
    return np.asarray(edges)


def composite_gauss(edges: np.ndarray, order: int):
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        x, w = gauss_legendre_interval(order, a, b)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)
