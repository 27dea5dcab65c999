import math

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from fraclap import kernels as K
from fraclap.core import (
    CoincidentPoints,
    DivergentReduction,
    GridField,
    NegativeRatio,
    Params,
    TruncationTooSmall,
    Variant,
    ZeroInput,
    gaussian_profile,
)

# ---------------------------------------------------------------------------
# constants


def test_riesz_constants_classical_cases():
    # (-Delta)^{1/2} in R^3 has Green's function 1/(2 pi^2 |x|^2)
    assert K.riesz_normalization(Params(3, 1.0, 1.5)).A == pytest.approx(1 / (2 * math.pi**2), rel=1e-14)
    # the half-Laplacian in R^2 has principal-value constant 1/(2 pi)
    assert K.riesz_normalization(Params(2, 1.0, 1.5)).C_op == pytest.approx(1 / (2 * math.pi), rel=1e-14)


@given(st.integers(2, 6), st.floats(0.05, 1.95))
def test_constants_multiply_to_symbol_identity(n, a):
    # A_{n,a} C_{n,a} = -Gamma((n+a)/2) Gamma((n-a)/2) / (pi^n Gamma(a/2) Gamma(-a/2))
    N = K.riesz_normalization(Params(n, a, 1.5))
    ref = special.gamma((n + a) / 2) * special.gamma((n - a) / 2) / (
        math.pi**n * special.gamma(a / 2) * abs(special.gamma(-a / 2)))
    assert N.A * N.C_op == pytest.approx(ref, rel=1e-12)


# ---------------------------------------------------------------------------
# free kernel

points3 = st.lists(st.floats(-10, 10), min_size=3, max_size=3)


@given(points3, points3, st.floats(0.1, 1.9))
def test_green_free_symmetric_positive(x, y, a):
    assume(np.linalg.norm(np.subtract(x, y)) > 1e-6)
    P = Params(3, a, 1.5)
    g = K.green_free(x, y, P)
    assert g > 0
    assert g == K.green_free(y, x, P)


@given(st.floats(0.01, 50), st.floats(1.01, 10), st.floats(0.1, 1.9))
def test_green_free_decreasing(r, factor, a):
    P = Params(3, a, 1.5)
    assert K.green_free([r, 0, 0], [0, 0, 0], P) > K.green_free([r * factor, 0, 0], [0, 0, 0], P)


def test_green_free_coincident():
    with pytest.raises(CoincidentPoints):
        K.green_free([1, 2], [1, 2], Params(2, 0.5, 1.5))


# ---------------------------------------------------------------------------
# inner integral of the ball Green's function


def _inner_closed_form(rho, n, a):
    mpmath.mp.dps = 30
    X = mpmath.mpf(rho) / (1 + rho)
    val = (X ** ((n - a) / 2) * mpmath.beta(1 - mpmath.mpf(a) / 2, mpmath.mpf(n) / 2)
           * mpmath.hyp2f1((n - a) / 2, 1 - mpmath.mpf(a) / 2, (n + 2 - a) / 2, X) * (1 + rho) ** ((n - 2) / 2))
    return float(val)


@pytest.mark.parametrize("n,a", [(2, 0.5), (3, 0.5), (3, 1.0), (3, 1.5), (4, 0.3), (5, 1.2)])
@pytest.mark.parametrize("rho", [1e-6, 0.3, 1.0, 25.0, 4.99e5])
def test_inner_integral_matches_hypergeometric(n, a, rho):
    got = K.inner_integral(rho, Params(n, a, 1.5))
    assert got == pytest.approx(_inner_closed_form(rho, n, a), rel=1e-12)


def test_inner_integral_direct_quadrature():
    # independent of the hypergeometric form: tanh-sinh quadrature at 30 digits
    n, a, rho = 3, 1.0, 2.0
    mpmath.mp.dps = 30
    ref = mpmath.quad(lambda b: (rho - b) ** ((n - 2) / 2) * b ** (-a / 2) / (1 + b), [0, 1, rho])
    assert K.inner_integral(rho, Params(n, a, 1.5)) == pytest.approx(float(ref), rel=1e-12)


def test_inner_integral_edge_cases():
    assert K.inner_integral(0.0, Params(3, 1.0, 1.5)) == 0.0
    with pytest.raises(NegativeRatio):
        K.inner_integral(-1.0, Params(3, 1.0, 1.5))


# ---------------------------------------------------------------------------
# ball Green's function


def test_calibration_approaches_limit_constant():
    P = Params(3, 1.0, 1.5)
    B1 = K.calibrate_ball_green(P, 10.0, probe_gap=1e-2).B
    B3 = K.calibrate_ball_green(P, 10.0, probe_gap=1e-4).B
    lim = K.dirichlet_limit_constant(P)
    assert abs(B3 - lim) < abs(B1 - lim)
    assert K.calibrate_ball_green(P, 10.0).B == K.calibrate_ball_green(P, 55.0).B


def _in_ball(v, R):
    v = np.asarray(v, dtype=float)
    return v / (1 + np.linalg.norm(v)) * R


vec3 = st.lists(st.floats(-5, 5), min_size=3, max_size=3)


@settings(max_examples=60, deadline=None)
@given(vec3, vec3, st.sampled_from([0.5, 1.0, 1.5]))
def test_green_ball_below_free(u, v, a):
    P = Params(3, a, 1.5)
    spec = K.calibrate_ball_green(P, 10.0)
    x, y = _in_ball(u, 10.0), _in_ball(v, 10.0)
    assume(np.linalg.norm(x - y) > 1e-6)
    assert K.green_ball(x, y, spec, P) <= K.green_free(x, y, P)


@settings(max_examples=60, deadline=None)
@given(vec3, vec3, st.floats(1.01, 8.0), st.sampled_from([0.5, 1.0, 1.5]))
def test_green_ball_domain_monotone(u, v, growth, a):
    P = Params(3, a, 1.5)
    R = 10.0
    x, y = _in_ball(u, R), _in_ball(v, R)
    assume(np.linalg.norm(x - y) > 1e-6)
    small = K.green_ball(x, y, K.calibrate_ball_green(P, R), P)
    big = K.green_ball(x, y, K.calibrate_ball_green(P, R * growth), P)
    assert big >= small


def test_green_ball_nonnegative_and_raw_sign():
    P = Params(3, 0.5, 1.5)
    spec = K.calibrate_ball_green(P, 10.0)
    rng = np.random.default_rng(0)
    raw = []
    for _ in range(2000):
        x, y = (_in_ball(v, 10.0) for v in rng.normal(scale=20.0, size=(2, 3)))
        assert K.green_ball(x, y, spec, P) >= 0
        raw.append(K.green_ball(x, y, spec, P, clip=False))
    # the unclipped bracket does go negative for some off-centre pairs
    assert min(raw) < 0


def test_green_ball_outside_and_coincident():
    P = Params(3, 1.0, 1.5)
    spec = K.calibrate_ball_green(P, 2.0)
    assert K.green_ball([3, 0, 0], [0, 0, 0], spec, P) == 0.0
    with pytest.raises(CoincidentPoints):
        K.green_ball([0.5, 0, 0], [0.5, 0, 0], spec, P)


def test_boggio_form_converges_to_free():
    P = Params(3, 1.0, 1.5)
    x, y = np.array([0.5, 0, 0]), np.array([-0.5, 0, 0])
    rel = [1 - K.green_ball_boggio(x, y, R, P) / K.green_free(x, y, P) for R in (10, 100)]
    assert 0 < rel[1] < rel[0] < 0.1


# ---------------------------------------------------------------------------
# weighted potentials


def test_weighted_riesz_gaussian_origin():
    P = Params(2, 1.0, 1.5)
    A = K.riesz_normalization(P).A
    exact = A * math.pi * special.gamma(1.5) / (2 * 1.5**1.5)
    v = K.weighted_riesz(gaussian_profile(2), P, 8.0, points=[[0.0, 0.0]])[0]
    assert v == pytest.approx(exact, rel=1e-10)


def test_weighted_riesz_off_origin_dblquad():
    P = Params(2, 0.5, 2.0)
    A = K.riesz_normalization(P).A
    x = np.array([0.7, -0.4])
    u = gaussian_profile(2, center=[0.2, 0.3])

    def integrand(r, t):
        y = x + r * np.array([math.cos(t), math.sin(t)])
        return r ** (P.a - 1) * y[1] ** 2 * float(u(y)) ** 2

    ref = A * integrate.dblquad(integrand, 0, 2 * math.pi, 0, 9, epsabs=1e-13, epsrel=1e-11)[0]
    v = K.weighted_riesz(u, P, 8.0, points=[x])[0]
    assert v == pytest.approx(ref, rel=1e-8)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.1, 2.0), st.floats(1.0, 2.0), st.floats(-1.5, 1.5))
def test_weighted_riesz_monotone(amp, ratio, shift):
    P = Params(2, 1.0, 1.5, Variant.GENERAL_F)
    f = lambda t: 1 + np.tanh(t)
    x = [[shift, 0.5]]
    u1 = gaussian_profile(2, amplitude=amp)
    u2 = gaussian_profile(2, amplitude=amp * ratio, width=1.2)
    v1 = K.weighted_riesz(u1, P, 10.0, points=x, f=f, h=0.5, order=4)[0]
    v2 = K.weighted_riesz(u2, P, 10.0, points=x, f=f, h=0.5, order=4)[0]
    assert v1 <= v2


def test_weighted_riesz_grid_matches_pointwise():
    P = Params(2, 1.0, 1.5)
    u = gaussian_profile(2)
    g = GridField.from_function(u, 2, 6.0, 96)
    vg = K.weighted_riesz(g, P, 6.0)
    i = 48 + 8  # node x = (1, 0)
    x = g.points()[i, 48]
    direct = K.weighted_riesz(u, P, 6.0, points=[x])[0]
    assert vg.values[i, 48] == pytest.approx(direct, rel=2e-3)


def test_weighted_riesz_tail_guard():
    P = Params(2, 1.0, 1.5)
    slow = gaussian_profile(2)
    slow = type(slow)(lambda x: (1 + np.sum(np.asarray(x) ** 2, -1)) ** -1.0, 2, decay_exponent=2.0)
    with pytest.raises(TruncationTooSmall):
        K.weighted_riesz(slow, P, 4.0, points=[[0.0, 0.0]])
    with pytest.raises(TruncationTooSmall):
        K.weighted_riesz(gaussian_profile(2), P, 4.0, points=[[3.0, 0.0]])


def test_riesz_potential_halfspace_cut_must_be_a_face():
    P = Params(2, 1.0, 1.5)
    dens = lambda y: np.exp(-np.sum(y**2, -1))
    with pytest.raises(ValueError):
        K.riesz_potential(dens, [0.0, 0.0], P, 6.0, h=0.25, halfspace=0.3)
    # a cut next to x leaves only one singular cell, so the neighbours need a richer rule
    half = K.riesz_potential(dens, [0.0, 0.0], P, 6.0, h=0.25, order=16, halfspace=0.125)
    # polar about x: the radial integral of e^{-r^2} up to the cut is an error function
    A = K.riesz_normalization(P).A
    radial = lambda t: 0.5 * math.sqrt(math.pi) * (math.erf(0.125 / math.cos(t)) if math.cos(t) > 0 else 1.0)
    ref = A * integrate.quad(radial, 0, 2 * math.pi, points=[0.5 * math.pi, 1.5 * math.pi],
                             epsabs=1e-14, limit=200)[0]
    assert half == pytest.approx(ref, rel=1e-11)


def test_cell_weights_scale_and_sum():
    W = K.cell_kernel_weights(2, 1.0, 20)
    assert W.shape == (41, 41)
    # the weights integrate |z|^{-1} over the square of half-width 20.5
    edge = 20.5
    ref = 8 * edge * math.asinh(1.0)
    assert W.sum() == pytest.approx(ref, rel=1e-6)


# ---------------------------------------------------------------------------
# reduction constant


@given(st.integers(2, 6), st.floats(0.02, 0.98))
def test_reduction_closed_form_equals_quadrature(n, a):
    P = Params(n, a, 1.5)
    assert K.reduction_constant(P) == pytest.approx(K.reduction_constant(P, "quadrature"), rel=1e-8)


def test_reduction_constant_value_and_divergence():
    # n = 3, alpha = 1/2: 2 pi * B(1, 1/4)/2 = 4 pi
    assert K.reduction_constant(Params(3, 0.5, 1.5)) == pytest.approx(4 * math.pi, rel=1e-14)
    for a in (1.0, 1.5):
        with pytest.raises(DivergentReduction):
            K.reduction_constant(Params(3, a, 1.5))


@pytest.mark.parametrize("n,a,t", [(2, 0.5, 1.0), (3, 0.5, 0.25), (3, 0.2, 4.0)])
def test_transverse_integral_scaling(n, a, t):
    P = Params(n, a, 1.5)
    assert K.transverse_integral(P, t) == pytest.approx(K.reduction_constant(P) * t ** (a - 1), rel=1e-7)


# ---------------------------------------------------------------------------
# HLS probe


def _ball(N):
    return GridField.from_function(lambda x: (np.sum(x**2, -1) < 1).astype(float), 2, 2.0, N, supersample=4)


def test_hls_invariances():
    P = Params(2, 0.5, 1.5)
    q = 4.0
    g = _ball(32)
    r = K.hls_ratio(g, q, P)
    assert K.hls_ratio(K.dilate(g, 0.37), q, P) == pytest.approx(r, rel=1e-12)
    assert K.hls_ratio(g.with_values(np.roll(g.values, (5, 1), axis=(0, 1))), q, P) == pytest.approx(r, rel=1e-12)
    assert K.hls_ratio(g.with_values(3.0 * g.values), q, P) == pytest.approx(r, rel=1e-12)


def test_hls_refinement_converges():
    P = Params(2, 1.0, 1.5)
    r = [K.hls_ratio(_ball(N), 4.0, P) for N in (32, 64, 128)]
    assert abs(r[2] - r[1]) < abs(r[1] - r[0])


def test_hls_rejects_bad_input():
    P = Params(2, 1.0, 1.5)
    with pytest.raises(ZeroInput):
        K.hls_ratio(GridField(2, 1.0, 8, np.zeros((8, 8))), 4.0, P)
    with pytest.raises(ValueError):
        K.hls_ratio(_ball(16), 1.5, P)
