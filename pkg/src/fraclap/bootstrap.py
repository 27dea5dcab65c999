"""Exact exponent bookkeeping for the growth bootstrap.

Starting from the one-dimensional lower bound u(x_n) >= C x_n^{alpha-1},
each substitution into the reduced integral inequality raises the exponent
by the affine map e -> p e + alpha + 2 (weight y_n^2) or e -> p e + alpha
(increasing weight f).  Everything here runs on ``fractions.Fraction``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Optional, Sequence

from .core import (
    DivergentReduction,
    InvalidParams,
    MMaxExceeded,
    Params,
    Variant,
    subcritical_check,
    to_fraction,
)

INDEX_CONVENTION = (
    "e_0 = alpha - 1 is the base bound; one substitution gives e_1; m further "
    "substitutions give e_{m+1}; tau = e_{m+1} + shift with shift = alpha + 2 "
    "(quadratic) or alpha (general_f)"
)


def _increment(variant: Variant, alpha: Fraction) -> Fraction:
    return alpha + 2 if variant is Variant.QUADRATIC else alpha


def shift(variant: Variant, alpha) -> Fraction:
    """Power of x_n multiplying u^p in the decay condition along a sequence."""
    return _increment(variant, to_fraction(alpha))


def _geom(p: Fraction, k: int) -> Fraction:
    """sum_{j=0}^{k} p^j."""
    if k < 0:
        return Fraction(0)
    if p == 1:
        return Fraction(k + 1)
    return (p ** (k + 1) - 1) / (p - 1)


def _geom_explicit(p: Fraction, k: int) -> Fraction:
    total, term = Fraction(0), Fraction(1)
    for _ in range(k + 1):
        total += term
        term *= p
    return total


def sum_form(variant: Variant, p, alpha, k: int, explicit: bool = False) -> Fraction:
    """e_k as a combination of geometric sums.

    quadratic: 3 (1 + ... + p^{k-1}) + (alpha - 1)(1 + ... + p^k)
    general_f: alpha (1 + ... + p^k) - p^k
    """
    p, alpha = to_fraction(p), to_fraction(alpha)
    g = _geom_explicit if explicit else _geom
    if variant is Variant.QUADRATIC:
        return 3 * g(p, k - 1) + (alpha - 1) * g(p, k)
    return alpha * g(p, k) - p**k


@dataclass(frozen=True)
class ExponentSeries:
    variant: Variant
    p: Fraction
    alpha: Fraction
    m: int
    e: tuple  # e_0 .. e_{m+1}


def exponent_recursion(variant, p, alpha, m: int) -> ExponentSeries:
    """e_0 .. e_{m+1} from the recursion, checked term by term against the sum form."""
    variant = Variant.parse(variant) if isinstance(variant, str) else variant
    p, alpha = to_fraction(p), to_fraction(alpha)
    if not p > 1:
        raise InvalidParams("p must exceed 1")
    if m < 0:
        raise InvalidParams("m must be nonnegative")
    inc = _increment(variant, alpha)
    e = [alpha - 1]
    for _ in range(m + 1):
        e.append(p * e[-1] + inc)
    # geometric sums accumulated term by term: prev = 1 + ... + p^{k-1}, cur = prev + p^k
    prev, term = Fraction(0), Fraction(1)
    for k, ek in enumerate(e):
        cur = prev + term
        sf = 3 * prev + (alpha - 1) * cur if variant is Variant.QUADRATIC else alpha * cur - term
        prev, term = cur, term * p
        if ek != sf:
            raise ArithmeticError(f"recursion and sum form disagree at k={k}: {ek} != {sf}")
    return ExponentSeries(variant, p, alpha, m, tuple(e))


def tau(variant, p, alpha, m: int) -> Fraction:
    variant = Variant.parse(variant) if isinstance(variant, str) else variant
    p, alpha = to_fraction(p), to_fraction(alpha)
    return sum_form(variant, p, alpha, m + 1) + _increment(variant, alpha)


def product_exponent(variant, p, alpha, m: int) -> Fraction:
    """Exponent of x_n in u^p x_n^shift when u >= D x_n^{e_{m+1}}: p e_{m+1} + shift."""
    variant = Variant.parse(variant) if isinstance(variant, str) else variant
    p, alpha = to_fraction(p), to_fraction(alpha)
    return p * sum_form(variant, p, alpha, m + 1) + _increment(variant, alpha)


# ---------------------------------------------------------------------------
# published closed forms


@dataclass(frozen=True)
class FormulaCheck:
    name: str
    closed: Optional[Fraction]
    reference: Fraction
    verdict: str  # "match" | "mismatch" | "not-checked"


def closed_form_check(variant, p, alpha, m: int) -> list:
    """Evaluate the closed forms for e_{m+1} and tau exactly and compare with the sums.

    Each entry also identifies what the closed form equals when it does
    not match; the tau closed forms coincide with :func:`product_exponent`.
    """
    variant = Variant.parse(variant) if isinstance(variant, str) else variant
    p, alpha = to_fraction(p), to_fraction(alpha)
    out = []
    if variant is Variant.QUADRATIC:
        specs = [
            ("u_exponent", lambda: (p ** (m + 1) * (p - p * alpha - 3) + 2 + alpha) / (1 - p),
             sum_form(variant, p, alpha, m + 1)),
            ("tau", lambda: (p ** (m + 2) * (p - p * alpha - 3) + 2 * p + alpha) / (1 - p) + 2,
             tau(variant, p, alpha, m)),
        ]
    else:
        specs = [
            ("tau", lambda: (alpha - p ** (m + 2) - (alpha - 1) * p ** (m + 3)) / (1 - p),
             tau(variant, p, alpha, m)),
        ]
    for name, closed, ref in specs:
        if p == 1:
            out.append(FormulaCheck(name, None, ref, "not-checked"))
            continue
        val = closed()
        out.append(FormulaCheck(name, val, ref, "match" if val == ref else "mismatch"))
    return out


def displayed_derivative(variant, p, alpha, m: int) -> Fraction:
    """The published closed expression for d tau / dp, evaluated exactly."""
    variant = Variant.parse(variant) if isinstance(variant, str) else variant
    p, alpha = to_fraction(p), to_fraction(alpha)
    if variant is Variant.QUADRATIC:
        inner = (m * (p * (alpha - 1) + 3) * (p - 1) + 6 * p - 3 * alpha * p
                 + 2 * alpha * p**2 - 2 * p**2 - 6)
        return (p ** (m + 1) * inner + 2 + alpha) / (1 - p) ** 2
    inner = m * (p * (alpha - 1) + 1) * (p - 1) + 4 * p**2 * (alpha - 1) + 3 * p * (2 - alpha) - 2
    return (p ** (m + 1) * inner - alpha) / (1 - p) ** 2


# ---------------------------------------------------------------------------
# exact polynomials and Sturm sequences


def tau_polynomial(variant: Variant, alpha: Fraction, m: int) -> list:
    """Coefficients (low to high) of tau as a polynomial in p."""
    alpha = to_fraction(alpha)
    if variant is Variant.QUADRATIC:
        c = [Fraction(3) + (alpha - 1) + alpha + 2] + [alpha + 2] * m + [alpha - 1]
    else:
        c = [2 * alpha] + [alpha] * m + [alpha - 1]
    return c


def poly_derivative(c: Sequence[Fraction]) -> list:
    return [k * c[k] for k in range(1, len(c))] or [Fraction(0)]


def poly_eval(c: Sequence[Fraction], x: Fraction) -> Fraction:
    acc = Fraction(0)
    for coef in reversed(c):
        acc = acc * x + coef
    return acc


def _trim(c: list) -> list:
    while len(c) > 1 and c[-1] == 0:
        c.pop()
    return c


def _poly_rem(a: list, b: list) -> list:
    a = list(a)
    db = len(b) - 1
    lead = b[-1]
    while len(a) - 1 >= db and any(a):
        if a[-1] == 0:
            a.pop()
            continue
        q = a[-1] / lead
        shift_ = len(a) - 1 - db
        for i, bc in enumerate(b):
            a[shift_ + i] -= q * bc
        a.pop()
    return _trim(a) if a else [Fraction(0)]


def _deflate(c: list, root: Fraction) -> list:
    """Divide by (x - root), assuming root is a root (synthetic division)."""
    out = [Fraction(0)] * (len(c) - 1)
    acc = Fraction(0)
    for k in range(len(c) - 1, 0, -1):
        acc = acc * root + c[k]
        out[k - 1] = acc
    return out


def sturm_sequence(c: Sequence[Fraction]) -> list:
    """p_0 = c, p_1 = c', p_{k+1} = -rem(p_{k-1}, p_k); remainders rescaled by positive factors."""
    seq = [_trim(list(c))]
    d = _trim(poly_derivative(seq[0]))
    if len(seq[0]) == 1:
        return seq
    seq.append(d)
    while len(seq[-1]) > 1:
        r = _poly_rem(seq[-2], seq[-1])
        if len(r) == 1 and r[0] == 0:
            break
        scale = abs(r[-1])
        seq.append([-x / scale for x in r])
    return seq


def _sign_changes(seq: list, x: Fraction) -> int:
    signs = [s for s in (poly_eval(q, x) for q in seq) if s != 0]
    return sum(1 for a, b in zip(signs, signs[1:]) if (a > 0) != (b > 0))


def count_roots_open(c: Sequence[Fraction], a: Fraction, b: Fraction) -> int:
    """Number of distinct real roots in the open interval (a, b)."""
    c = _trim(list(c))
    if len(c) == 1:
        if c[0] == 0:
            raise ValueError("zero polynomial")
        return 0
    for end in (a, b):
        while len(c) > 1 and poly_eval(c, end) == 0:
            c = _deflate(c, end)
    if len(c) == 1:
        return 0
    seq = sturm_sequence(c)
    return _sign_changes(seq, a) - _sign_changes(seq, b)


@dataclass(frozen=True)
class TauPrimeVerdict:
    variant: Variant
    alpha: Fraction
    n: int
    minimal_m: Optional[int]
    interval: tuple  # (1, critical exponent)
    reached: bool
    limit_at_one: Optional[Fraction] = None  # d tau/dp at p = 1 for minimal_m


def derivative_positive(variant: Variant, alpha, n: int, m: int) -> bool:
    """Exact check that d tau/dp > 0 on the open interval (1, (n+alpha)/(n-alpha))."""
    alpha = to_fraction(alpha)
    lo, hi = Fraction(1), Fraction(n) + alpha
    hi = hi / (n - alpha)
    d = poly_derivative(tau_polynomial(variant, alpha, m))
    if count_roots_open(d, lo, hi) > 0:
        return False
    return poly_eval(d, (lo + hi) / 2) > 0


@lru_cache(maxsize=None)
def tau_prime(variant, alpha, n: int, m_max: int = 10000) -> TauPrimeVerdict:
    """Smallest m for which d tau/dp > 0 on the whole subcritical interval.

    Uses a doubling search followed by bisection, then re-verifies that
    m_min passes and m_min - 1 fails.  Raises MMaxExceeded past ``m_max``.
    """
    variant = Variant.parse(variant) if isinstance(variant, str) else variant
    alpha = to_fraction(alpha)
    if not 0 < alpha < 1:
        raise InvalidParams("the derivative analysis needs 0 < alpha < 1")
    interval = (Fraction(1), (n + alpha) / (n - alpha))
    test = lambda m: derivative_positive(variant, alpha, n, m)  # noqa: E731
    if test(0):
        m_min = 0
    else:
        lo, hi = 0, 1
        while not test(hi):
            lo, hi = hi, 2 * hi
            if lo >= m_max:
                raise MMaxExceeded(f"no positive derivative up to m={m_max}")
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if test(mid):
                hi = mid
            else:
                lo = mid
        m_min = hi
        if test(m_min - 1):
            raise ArithmeticError("positivity is not monotone in m near the reported minimum")
    if m_min > m_max:
        raise MMaxExceeded(f"no positive derivative up to m={m_max}")
    at_one = poly_eval(poly_derivative(tau_polynomial(variant, alpha, m_min)), Fraction(1))
    return TauPrimeVerdict(variant, alpha, n, m_min, interval, True, at_one)


def factor_positive(variant, alpha, n: int) -> bool:
    """(p(alpha-1) + c)(p - 1) > 0 on (1, tau_crit) with c = 3 (quadratic) or 1.

    Both factors are affine in p, so the endpoints decide.
    """
    variant = Variant.parse(variant) if isinstance(variant, str) else variant
    alpha = to_fraction(alpha)
    c = 3 if variant is Variant.QUADRATIC else 1
    hi = (n + alpha) / (n - alpha)
    return all(q * (alpha - 1) + c >= 0 for q in (Fraction(1), hi)) and (Fraction(1) * (alpha - 1) + c) > 0


# ---------------------------------------------------------------------------
# certificates


@dataclass(frozen=True)
class ExponentCertificate:
    n: int
    alpha: Fraction
    p: Fraction
    variant: Variant
    kind: str  # "DivergentReduction" | "TauNonnegative"
    minimal_m: Optional[int] = None
    tau: Optional[Fraction] = None
    tau_prime: Optional[TauPrimeVerdict] = None
    closed_forms: tuple = ()
    first_exponent: Optional[Fraction] = None
    index_convention: str = INDEX_CONVENTION
    notes: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind == "TauNonnegative" and not (self.tau is not None and self.tau >= 0):
            raise ValueError("a TauNonnegative certificate needs tau >= 0")

    def to_dict(self) -> dict:
        return _jsonable(self)


def _frac_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def _jsonable(obj):
    if isinstance(obj, Fraction):
        return _frac_str(obj)
    if isinstance(obj, Variant):
        return obj.value
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if hasattr(obj, "__dataclass_fields__"):
        return {k: _jsonable(getattr(obj, k)) for k in obj.__dataclass_fields__}
    return obj


def minimal_m_for_tau(variant: Variant, p: Fraction, alpha: Fraction, m_max: int = 10000) -> int:
    """Smallest m with tau >= 0 (tau increases with m in the subcritical range)."""
    if tau(variant, p, alpha, 0) >= 0:
        return 0
    lo, hi = 0, 1
    while tau(variant, p, alpha, hi) < 0:
        lo, hi = hi, 2 * hi
        if lo >= m_max:
            raise MMaxExceeded(f"tau stays negative up to m={m_max}")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if tau(variant, p, alpha, mid) >= 0:
            hi = mid
        else:
            lo = mid
    if hi > m_max:
        raise MMaxExceeded(f"tau stays negative up to m={m_max}")
    # every step on the way must have been an increase
    if not tau(variant, p, alpha, hi - 1) < tau(variant, p, alpha, hi):
        raise ArithmeticError("tau failed to increase with m")
    return hi


def liouville_certificate(params: Params, m_max: int = 10000, with_tau_prime: bool = True,
                          require_subcritical: bool = True) -> ExponentCertificate:
    """Exact nonexistence certificate for a subcritical parameter triple.

    ``require_subcritical=False`` runs the exponent arithmetic outside the
    subcritical range too; the certificate then carries a note saying so.
    """
    P = params.exact()
    notes = ()
    if not subcritical_check(P):
        if require_subcritical:
            raise InvalidParams(f"p={P.p} is not in the subcritical range (1, {P.tau})")
        notes = (f"p={_frac_str(P.p)} lies outside the subcritical range (1, {_frac_str(P.tau)})",)
    n, alpha, p, variant = P.n, P.alpha, P.p, P.variant
    e1 = sum_form(variant, p, alpha, 1)
    if alpha >= 1:
        return ExponentCertificate(
            n, alpha, p, variant, "DivergentReduction", first_exponent=e1,
            notes=notes + ("transverse integral diverges for alpha >= 1",
                           "exponents e_k are nondecreasing from e_0 = alpha - 1 >= 0, "
                           "so u^p x_n^shift is unbounded"),
        )
    m = minimal_m_for_tau(variant, p, alpha, m_max)
    tp = tau_prime(variant, alpha, n, m_max) if with_tau_prime else None
    checks = tuple(closed_form_check(variant, p, alpha, m))
    return ExponentCertificate(n, alpha, p, variant, "TauNonnegative", minimal_m=m,
                               tau=tau(variant, p, alpha, m), tau_prime=tp, closed_forms=checks,
                               first_exponent=e1, notes=notes)


# ---------------------------------------------------------------------------
# numerical companions


def decay_sequence_probe(ys: Sequence[float], us: Sequence[float], p: float, exponent_shift: float) -> float:
    """inf_k u_k^p y_k^shift over a table with increasing y and positive u.

    A positive solution needs this to approach 0 along some sequence; a
    table whose infimum stays bounded away from 0 is incompatible.
    """
    ys = [float(y) for y in ys]
    us = [float(u) for u in us]
    if any(b <= a for a, b in zip(ys, ys[1:])):
        raise ValueError("y values must increase")
    if any(u <= 0 for u in us):
        raise ValueError("u values must be positive")
    p, s = float(p), float(exponent_shift)
    # in logs to survive large tables
    return math.exp(min(p * math.log(u) + s * math.log(y) for y, u in zip(ys, us)))


@dataclass(frozen=True)
class GrowthTrace:
    exponents: tuple  # exact e_0 .. e_steps
    log_constants: tuple  # log c_k with u(x) >= c_k x^{e_k}

    def bound(self, k: int, x: float) -> float:
        return math.exp(self.log_constants[k] + float(self.exponents[k]) * math.log(x))


def growth_iteration(x_n: float, steps: int, params: Params, c0: float = 1.0, f_min: float = 1.0) -> GrowthTrace:
    """Push u(x) >= c_k x^{e_k} through one substitution at a time.

    With x = 2R and y in [R/2, R]: |x - y|^{alpha-1} >= (3R/2)^{alpha-1}
    (alpha < 1), y^{p e_k} >= min((R/2)^{p e_k}, R^{p e_k}), and the weight
    is at least (R/2)^2 or ``f_min``.  Exponents stay exact; constants are
    floats.  ``x_n`` is where the bounds are meant to be used (x_n >= 4).
    """
    from .kernels import reduction_constant, riesz_normalization

    P = params.exact()
    if P.alpha >= 1:
        raise DivergentReduction(f"no finite reduction constant for alpha={P.alpha}")
    if x_n < 4:
        raise ValueError("growth bounds need x_n >= 4")
    a, p = float(P.alpha), float(P.p)
    C = riesz_normalization(params).A * reduction_constant(params)
    quad = P.variant is Variant.QUADRATIC
    inc = _increment(P.variant, P.alpha)
    e = [P.alpha - 1]
    logc = [math.log(c0)]
    for _ in range(steps):
        pe = float(P.p * e[-1])
        # constants in terms of R, then converted with R = x/2
        lc = math.log(C) + p * logc[-1]
        lc += min(0.0, -pe * math.log(2.0))  # y^{pe} >= 2^{-max(pe,0)} R^{pe}
        lc += (a - 1.0) * math.log(1.5)  # |x - y|^{alpha-1}
        lc += math.log(0.5)  # interval length R/2
        lc += -2.0 * math.log(2.0) if quad else math.log(f_min)
        # R^{e_new} = 2^{-e_new} x^{e_new}
        e_new = P.p * e[-1] + inc
        lc += -float(e_new) * math.log(2.0)
        e.append(e_new)
        logc.append(lc)
    return GrowthTrace(tuple(e), tuple(logc))
