import json
import math
from fractions import Fraction

import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from fraclap import bootstrap as B
from fraclap.core import DivergentReduction, InvalidParams, MMaxExceeded, Params, Variant

Q, G = Variant.QUADRATIC, Variant.GENERAL_F

ps = st.fractions(Fraction(101, 100), Fraction(3))
unit_alphas = st.fractions(Fraction(1, 50), Fraction(49, 50))
variants = st.sampled_from(list(Variant))


def test_worked_examples():
    assert B.exponent_recursion(Q, 2, Fraction(1, 2), 3).e[4] == Fraction(59, 2)
    assert B.tau(Q, 2, Fraction(1, 2), 3) == 32
    for m in range(30):
        assert B.tau(G, 2, Fraction(1, 2), m) == 0


@given(unit_alphas, st.integers(0, 40))
def test_tau_at_p_one(a, m):
    assert B.tau(Q, 1, a, m) == (2 + a) * m + 3 * (a + 1)


@given(variants, ps, unit_alphas, st.integers(0, 30))
def test_recursion_equals_sum_forms(v, p, a, m):
    e = B.exponent_recursion(v, p, a, m).e
    assert len(e) == m + 2
    assert all(e[k] == B.sum_form(v, p, a, k) == B.sum_form(v, p, a, k, explicit=True) for k in range(m + 2))


def test_recursion_rejects_bad_input():
    with pytest.raises(InvalidParams):
        B.exponent_recursion(Q, 1, Fraction(1, 2), 2)
    with pytest.raises(InvalidParams):
        B.exponent_recursion(Q, 2, Fraction(1, 2), -1)


@settings(max_examples=60)
@given(variants, st.integers(2, 6), unit_alphas, st.fractions(Fraction(1, 100), Fraction(99, 100)))
def test_tau_increases_after_turning_nonnegative(v, n, a, s):
    p = 1 + s * (Fraction(n + a, n - a) - 1)
    m = B.minimal_m_for_tau(v, p, a)
    assert B.tau(v, p, a, m) >= 0
    if m:
        assert B.tau(v, p, a, m - 1) < 0
    ts = [B.tau(v, p, a, k) for k in range(m, m + 10)]
    assert all(x < y for x, y in zip(ts, ts[1:]))


@given(variants, ps.filter(lambda p: p != 1), unit_alphas, st.integers(0, 20))
def test_tau_closed_forms_are_the_product_exponent(v, p, a, m):
    checks = {c.name: c for c in B.closed_form_check(v, p, a, m)}
    assert checks["tau"].closed == B.product_exponent(v, p, a, m)
    if v is Q:
        assert checks["u_exponent"].verdict == "match"


def test_closed_form_verdicts():
    q = {c.name: c for c in B.closed_form_check(Q, 2, Fraction(1, 2), 3)}
    assert (q["tau"].closed, q["tau"].reference, q["tau"].verdict) == (Fraction(123, 2), 32, "mismatch")
    (g,) = B.closed_form_check(G, 2, Fraction(1, 2), 1)
    assert (g.closed, g.reference, g.verdict) == (Fraction(-1, 2), 0, "mismatch")
    assert B.closed_form_check(Q, 1, Fraction(1, 2), 3)[0].verdict == "not-checked"


@given(ps.filter(lambda p: p != 1), unit_alphas, st.integers(0, 15))
def test_displayed_derivative_of_quadratic_form(p, a, m):
    # the displayed expression differentiates the tau closed form (the product exponent)
    x = sympy.Symbol("x")
    pe = (x ** (m + 2) * (x - x * a - 3) + 2 * x + a) / (1 - x) + 2
    ref = sympy.Rational(str(sympy.diff(pe, x).subs(x, sympy.Rational(p.numerator, p.denominator))))
    assert B.displayed_derivative(Q, p, a, m) == Fraction(int(ref.p), int(ref.q))


# ---------------------------------------------------------------------------
# Sturm machinery against sympy

coeffs = st.lists(st.fractions(Fraction(-5), Fraction(5), max_denominator=7), min_size=2, max_size=7)


@settings(max_examples=80)
@given(coeffs, st.fractions(Fraction(-3), Fraction(3), max_denominator=5), st.fractions(Fraction(1, 5), Fraction(4)))
def test_count_roots_matches_sympy(c, a, width):
    if all(x == 0 for x in c[1:]):
        return
    b = a + width
    x = sympy.Symbol("x")
    poly = sympy.Poly(sum(sympy.Rational(k.numerator, k.denominator) * x**i for i, k in enumerate(c)), x)
    sa, sb = (sympy.Rational(e.numerator, e.denominator) for e in (a, b))
    # sympy counts closed-interval roots; remove any on the endpoints
    ref = len([r for r in set(poly.real_roots()) if sa < r < sb])
    assert B.count_roots_open(c, a, b) == ref


def test_count_roots_with_root_on_endpoint():
    c = [Fraction(-2), Fraction(1), Fraction(1)]  # (x - 1)(x + 2)
    assert B.count_roots_open(c, Fraction(1), Fraction(3)) == 0
    assert B.count_roots_open(c, Fraction(-3), Fraction(1)) == 1
    with pytest.raises(ValueError):
        B.count_roots_open([Fraction(0)], Fraction(0), Fraction(1))


@given(variants, unit_alphas, st.integers(0, 25))
def test_tau_polynomial_evaluates_tau(v, a, m):
    c = B.tau_polynomial(v, a, m)
    for p in (Fraction(11, 10), Fraction(3, 2), Fraction(5, 2)):
        assert B.poly_eval(c, p) == B.tau(v, p, a, m)


@pytest.mark.parametrize("v", list(Variant))
@pytest.mark.parametrize("n", [2, 3, 6])
@pytest.mark.parametrize("a", [Fraction(1, 10), Fraction(1, 2), Fraction(9, 10)])
def test_tau_prime_minimal_and_stable(v, n, a):
    t = B.tau_prime(v, a, n)
    m = t.minimal_m
    assert t.reached and t.interval == (1, Fraction(n + a, n - a))
    for k in range(m, m + 6):
        assert B.derivative_positive(v, a, n, k)
    if m:
        assert not B.derivative_positive(v, a, n, m - 1)
    # d tau/dp at p = 1 is the coefficient sum of k c_k
    c = B.tau_polynomial(v, a, m)
    assert t.limit_at_one == sum(k * ck for k, ck in enumerate(c))


def test_tau_prime_limits():
    assert B.tau_prime(Q, Fraction(1, 2), 3).minimal_m == 1
    with pytest.raises(MMaxExceeded):
        B.tau_prime(G, Fraction(1, 10), 2, m_max=50)
    with pytest.raises(InvalidParams):
        B.tau_prime(Q, Fraction(3, 2), 3)


@given(variants, unit_alphas, st.integers(2, 6))
def test_factor_positive(v, a, n):
    assert B.factor_positive(v, a, n)


# ---------------------------------------------------------------------------
# certificates


def test_certificate_branches():
    c = B.liouville_certificate(Params(3, Fraction(3, 2), 2))
    assert c.kind == "DivergentReduction" and c.minimal_m is None
    c = B.liouville_certificate(Params(3, Fraction(1, 2), Fraction(11, 10)))
    assert c.kind == "TauNonnegative" and c.tau >= 0 and c.minimal_m is not None
    with pytest.raises(InvalidParams):
        B.liouville_certificate(Params(3, Fraction(1, 2), 2, G))
    c = B.liouville_certificate(Params(3, Fraction(1, 2), 2, G), require_subcritical=False)
    assert (c.minimal_m, c.tau) == (0, 0)
    assert c.notes and "subcritical" in c.notes[0]


def test_certificate_json_round_trip():
    c = B.liouville_certificate(Params(4, Fraction(3, 10), Fraction(11, 10), G))
    d = json.loads(json.dumps(c.to_dict()))
    assert d["variant"] == "general_f"
    assert Fraction(d["tau"]) == c.tau
    assert d["index_convention"] == B.INDEX_CONVENTION


def test_certificate_search_limit():
    with pytest.raises(MMaxExceeded):
        B.minimal_m_for_tau(G, Fraction(1001, 1000), Fraction(1, 10), m_max=4)


def test_tau_nonnegative_invariant():
    with pytest.raises(ValueError):
        B.ExponentCertificate(3, Fraction(1, 2), Fraction(6, 5), Q, "TauNonnegative", tau=Fraction(-1))


# ---------------------------------------------------------------------------
# numerical companions


def test_decay_probe_examples():
    ys = [2.0**k for k in range(1, 40)]
    assert B.decay_sequence_probe(ys, [y**-3 for y in ys], 1.5, 2.5) < 1e-10
    assert B.decay_sequence_probe(ys, [1.0] * len(ys), 1.5, 2.5) == pytest.approx(2.0**2.5)
    with pytest.raises(ValueError):
        B.decay_sequence_probe([2.0, 1.0], [1.0, 1.0], 1.5, 1.0)
    with pytest.raises(ValueError):
        B.decay_sequence_probe([1.0, 2.0], [1.0, 0.0], 1.5, 1.0)


@pytest.mark.parametrize("v", list(Variant))
def test_growth_iteration_tracks_exact_exponents(v):
    P = Params(3, Fraction(1, 2), Fraction(3, 2), v)
    tr = B.growth_iteration(8.0, 20, P)
    assert list(tr.exponents) == list(B.exponent_recursion(v, P.p, P.alpha, 19).e)
    assert all(math.isfinite(c) for c in tr.log_constants)
    assert tr.exponents[1] == B.sum_form(v, P.p, P.alpha, 1)


def test_growth_bound_blocks_decay():
    P = Params(3, Fraction(1, 2), Fraction(6, 5))
    m = B.liouville_certificate(P).minimal_m
    # one more step than the certificate so that p e + shift is nonnegative
    k = m + 2
    assert B.product_exponent(P.variant, P.p, P.alpha, k - 1) >= 0
    tr = B.growth_iteration(8.0, k, P)
    ys = [4.0 * 1.5**j for j in range(60)]
    us = [tr.bound(k, y) for y in ys]
    D = B.decay_sequence_probe(ys, us, float(P.p), float(B.shift(P.variant, P.alpha)))
    assert D == pytest.approx(us[0] ** float(P.p) * 4.0 ** float(B.shift(P.variant, P.alpha)))
    assert D > 0


def test_growth_iteration_guards():
    with pytest.raises(DivergentReduction):
        B.growth_iteration(8.0, 3, Params(3, Fraction(3, 2), 2))
    with pytest.raises(ValueError):
        B.growth_iteration(2.0, 3, Params(3, Fraction(1, 2), Fraction(6, 5)))
