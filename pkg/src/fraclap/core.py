"""Problem parameters, field carriers and the shared error types."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real
from typing import Callable, Optional

import numpy as np

from ._quadrature import composite_gauss, geometric_panels, sphere_rule


class FraclapError(Exception):
    """Base class for every error raised by this package."""


class InvalidParams(FraclapError, ValueError):
    pass


class NonFiniteEvaluation(FraclapError):
    pass


class CoincidentPoints(FraclapError, ValueError):
    pass


class NegativeRatio(FraclapError, ValueError):
    pass


class TruncationTooSmall(FraclapError):
    pass


class DivergentReduction(FraclapError):
    """The transverse integral in the 1-D reduction diverges (alpha >= 1)."""


class ZeroInput(FraclapError, ValueError):
    pass


class SmoothnessViolation(FraclapError):
    pass


class TailUnbounded(FraclapError):
    pass


class NotPeriodic(FraclapError, ValueError):
    pass


class EvaluationAtCenter(FraclapError, ValueError):
    pass


class SingularCell(FraclapError):
    pass


class MMaxExceeded(FraclapError):
    pass


class ConfigInvalid(FraclapError, ValueError):
    pass


class Variant(enum.Enum):
    QUADRATIC = "quadratic"  # f(x_n) = x_n^2
    GENERAL_F = "general_f"  # f increasing and positive

    @classmethod
    def parse(cls, text: str) -> "Variant":
        key = text.strip().lower().replace("-", "_")
        aliases = {"quadratic": cls.QUADRATIC, "generalf": cls.GENERAL_F, "general_f": cls.GENERAL_F,
                   "general": cls.GENERAL_F, "f": cls.GENERAL_F}
        try:
            return aliases[key]
        except KeyError:
            raise ConfigInvalid(f"unknown weight variant {text!r}") from None


@dataclass(frozen=True)
class Params:
    """The triple (n, alpha, p) plus the weight variant.

    ``alpha`` and ``p`` may be floats or exact ``Fraction`` values; the exact
    engine in :mod:`fraclap.bootstrap` insists on the latter.
    """

    n: int
    alpha: Real
    p: Real
    variant: Variant = Variant.QUADRATIC

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise InvalidParams(f"dimension must be an integer >= 2, got {self.n}")
        if not 0 < self.alpha < 2:
            raise InvalidParams(f"alpha must lie in (0, 2), got {self.alpha}")
        if not self.p > 1:
            raise InvalidParams(f"p must exceed 1, got {self.p}")
        if isinstance(self.variant, str):
            object.__setattr__(self, "variant", Variant.parse(self.variant))

    @property
    def a(self) -> float:
        return float(self.alpha)

    @property
    def tau(self):
        return critical_exponent(self).tau

    def exact(self) -> "Params":
        """Copy with alpha and p promoted to exact rationals."""
        return Params(self.n, to_fraction(self.alpha), to_fraction(self.p), self.variant)


@dataclass(frozen=True)
class CriticalExponent:
    tau: Real

    def __post_init__(self):
        if not self.tau > 1:
            raise InvalidParams(f"critical exponent must exceed 1, got {self.tau}")


def to_fraction(x) -> Fraction:
    """Exact rational from an int, Fraction, decimal string or 'a/b' string.

    Floats are converted through their shortest repr so that 0.1 becomes 1/10.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(repr(x))
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigInvalid(f"not a rational number: {x!r}") from exc
    return Fraction(x)


def critical_exponent(params: Params) -> CriticalExponent:
    n, a = params.n, params.alpha
    if isinstance(a, Fraction):
        return CriticalExponent(Fraction(n + a, n - a))
    return CriticalExponent((n + a) / (n - a))


def subcritical_check(params: Params) -> bool:
    return 1 < params.p < critical_exponent(params).tau


@dataclass(frozen=True, eq=False)
class GridField:
    """Samples on the uniform grid ``center - L + j*h``, ``j = 0..N-1`` per axis."""

    dim: int
    L: float
    N: int
    values: np.ndarray
    periodic: bool = False
    center: tuple = field(default=None)

    def __post_init__(self):
        if self.L <= 0:
            raise ValueError("box half-width must be positive")
        if self.N < 4:
            raise ValueError("need at least 4 points per axis")
        vals = np.array(self.values, dtype=float)
        if vals.size != self.N**self.dim:
            raise ValueError(f"expected {self.N**self.dim} values, got {vals.size}")
        vals = vals.reshape((self.N,) * self.dim)
        if not np.all(np.isfinite(vals)):
            raise NonFiniteEvaluation("grid field contains non-finite values")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        c = (0.0,) * self.dim if self.center is None else tuple(float(v) for v in self.center)
        if len(c) != self.dim:
            raise ValueError("center has the wrong dimension")
        object.__setattr__(self, "center", c)

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    def axis(self, i: int = 0) -> np.ndarray:
        return self.center[i] - self.L + self.h * np.arange(self.N)

    def points(self) -> np.ndarray:
        """Grid nodes as an array of shape (N, ..., N, dim)."""
        axes = [self.axis(i) for i in range(self.dim)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def with_values(self, values) -> "GridField":
        return GridField(self.dim, self.L, self.N, values, self.periodic, self.center)

    @classmethod
    def from_function(cls, fn, dim, L, N, periodic=False, center=None, supersample: int = 1):
        """Sample ``fn`` at the nodes, or average it over each cell when supersample > 1."""
        proto = cls(dim, L, N, np.zeros(N**dim), periodic, center)
        pts = proto.points()
        if supersample <= 1:
            vals = np.asarray(fn(pts), dtype=float)
        else:
            h = proto.h
            offs = (np.arange(supersample) + 0.5) / supersample - 0.5
            grids = np.meshgrid(*([offs] * dim), indexing="ij")
            shifts = np.stack([g.ravel() for g in grids], axis=-1) * h
            vals = np.zeros(pts.shape[:-1])
            for s in shifts:
                vals += np.asarray(fn(pts + s), dtype=float)
            vals /= len(shifts)
        return proto.with_values(vals)


@dataclass(frozen=True, eq=False)
class ProfileSpec:
    """A black-box function on R^n with declared regularity and decay.

    ``evaluator`` maps an array of points with trailing axis n to an array of
    values.  ``decay_exponent`` d asserts ``|u(x)| <= C (1 + |x|)^{-d}``; it is
    ``None`` when nothing is known about the behaviour at infinity.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    dim: int
    smoothness_order: int = 2
    decay_exponent: Optional[float] = None
    support_radius: Optional[float] = None
    singular_point: Optional[tuple] = None
    name: str = "profile"

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.asarray(self.evaluator(x), dtype=float)

    def scaled(self, c: float) -> "ProfileSpec":
        ev = self.evaluator
        return ProfileSpec(lambda x: c * ev(x), self.dim, self.smoothness_order,
                           self.decay_exponent, self.support_radius, self.singular_point,
                           f"{c}*{self.name}")

    def translated(self, a) -> "ProfileSpec":
        """The profile x -> u(x - a)."""
        a = np.asarray(a, dtype=float)
        ev = self.evaluator
        sp = None if self.singular_point is None else tuple(np.asarray(self.singular_point) + a)
        return ProfileSpec(lambda x: ev(np.asarray(x) - a), self.dim, self.smoothness_order,
                           self.decay_exponent, self.support_radius, sp,
                           f"{self.name}(.-a)")


def combine(a: float, u: ProfileSpec, b: float, w: ProfileSpec) -> ProfileSpec:
    """The linear combination a*u + b*w, keeping the weaker metadata."""
    decay = None
    if u.decay_exponent is not None and w.decay_exponent is not None:
        decay = min(u.decay_exponent, w.decay_exponent)
    return ProfileSpec(lambda x: a * u.evaluator(x) + b * w.evaluator(x), u.dim,
                       min(u.smoothness_order, w.smoothness_order), decay,
                       name=f"{a}*{u.name}+{b}*{w.name}")


def gaussian_profile(dim: int, width: float = 1.0, amplitude: float = 1.0, center=None) -> ProfileSpec:
    c = np.zeros(dim) if center is None else np.asarray(center, dtype=float)

    def ev(x):
        r2 = np.sum((np.asarray(x) - c) ** 2, axis=-1)
        return amplitude * np.exp(-r2 / width**2)

    return ProfileSpec(ev, dim, smoothness_order=99, decay_exponent=np.inf,
                       name="gaussian")


def constant_profile(dim: int, value: float = 1.0) -> ProfileSpec:
    return ProfileSpec(lambda x: np.full(np.shape(x)[:-1], value), dim,
                       smoothness_order=99, decay_exponent=0.0, name="constant")


def bump_profile(dim: int, radius: float = 1.0, amplitude: float = 1.0) -> ProfileSpec:
    """The C-infinity bump amplitude*exp(1 - 1/(1 - |x/radius|^2)) supported in the ball."""

    def ev(x):
        r2 = np.sum(np.asarray(x) ** 2, axis=-1) / radius**2
        out = np.zeros_like(r2)
        inside = r2 < 1.0
        out[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
        return out

    return ProfileSpec(ev, dim, smoothness_order=99, decay_exponent=np.inf,
                       support_radius=radius, name="bump")


def l_alpha_membership_probe(profile: ProfileSpec, params: Params, R_max: float,
                             radial_order: int = 16, angular_order: int = 12) -> float:
    """Truncated integral of |u| / (1 + |x|^{n+alpha}) over the ball of radius R_max.

    Saturation of the returned value as ``R_max`` grows is the numerical proxy
    for membership in the weighted space.
    """
    if R_max <= 0:
        raise ValueError("R_max must be positive")
    n, a = params.n, params.a
    edges = np.concatenate([[0.0], geometric_panels(min(1.0, R_max), R_max)]) if R_max > 1 else np.array([0.0, R_max])
    r, wr = composite_gauss(edges, radial_order)
    theta, wt = sphere_rule(n, angular_order)
    pts = r[:, None, None] * theta[None, :, :]
    vals = profile(pts)
    if not np.all(np.isfinite(vals)):
        raise NonFiniteEvaluation(f"{profile.name} returned a non-finite value")
    radial = np.abs(vals) @ wt
    return float(np.sum(wr * r ** (n - 1) * radial / (1.0 + r ** (n + a))))
