"""Verification suites behind ``fraclap run``: configuration, cases and reports."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from . import __version__
from .core import (
    ConfigInvalid,
    GridField,
    Params,
    ProfileSpec,
    Variant,
    bump_profile,
    constant_profile,
    gaussian_profile,
    to_fraction,
)

SUITES = ("kernels", "operator", "kelvin", "bootstrap", "hls")


@dataclass
class RunConfig:
    suite: str = "kernels"
    n: int = 3
    alpha: Fraction = Fraction(1, 2)
    p: Fraction = Fraction(11, 10)
    variant: Variant = Variant.QUADRATIC
    L: float = 8.0
    N: int = 64
    delta: float = 0.05
    far_radius: float = 12.0
    nodes: int = 24
    seed: int = 0
    samples: int = 20
    output: Optional[str] = None
    trace: Optional[str] = None
    record_time: bool = False

    def validate(self) -> "RunConfig":
        if self.suite not in SUITES:
            raise ConfigInvalid(f"unknown suite {self.suite!r}; choose from {', '.join(SUITES)}")
        if not 2 <= self.n <= 6:
            raise ConfigInvalid("n must lie in 2..6")
        if not 0 < self.alpha < 2:
            raise ConfigInvalid("alpha must lie in (0, 2)")
        if not self.p > 1:
            raise ConfigInvalid("p must exceed 1")
        if not self.L > 0:
            raise ConfigInvalid("L must be positive")
        if not 8 <= self.N <= 512 or self.N % 2:
            raise ConfigInvalid("N must be even and within 8..512")
        if not 0 < self.delta < self.far_radius:
            raise ConfigInvalid("need 0 < delta < far_radius")
        if not 4 <= self.nodes <= 200:
            raise ConfigInvalid("nodes must lie in 4..200")
        if not 1 <= self.samples <= 10_000:
            raise ConfigInvalid("samples must lie in 1..10000")
        return self

    @property
    def params(self) -> Params:
        return Params(self.n, self.alpha, self.p, self.variant)

    def echo(self) -> dict:
        out = {}
        for k, v in asdict(self).items():
            if isinstance(v, Fraction):
                v = f"{v.numerator}/{v.denominator}"
            elif isinstance(v, Variant):
                v = v.value
            out[k] = v
        return out


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigInvalid(f"not a boolean: {text!r}")


_PARSERS: dict[str, Callable[[str], object]] = {
    "suite": str.strip,
    "n": int,
    "alpha": to_fraction,
    "p": to_fraction,
    "variant": Variant.parse,
    "L": float,
    "N": int,
    "delta": float,
    "far_radius": float,
    "nodes": int,
    "seed": int,
    "samples": int,
    "output": str.strip,
    "trace": str.strip,
    "record_time": _parse_bool,
}


def parse_config(text: str, **overrides) -> RunConfig:
    """Line-oriented ``key = value`` configuration; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigInvalid(f"line {lineno}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _PARSERS:
            raise ConfigInvalid(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _PARSERS[key](val)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigInvalid(f"line {lineno}: bad value for {key}: {val!r}") from exc
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values).validate()


# ---------------------------------------------------------------------------
# reports


@dataclass
class Case:
    name: str
    inputs: dict
    expected: object
    provenance: str  # "PAPER" | "TRIVIAL" | "DERIVED" | "DIAGNOSTIC"
    got: object
    tolerance: Optional[float]
    passed: bool
    detail: str = ""


@dataclass
class Report:
    suite: str
    config: dict
    environment: dict
    cases: list
    traces: dict = field(default_factory=dict)
    wall_time: Optional[float] = None

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.cases)

    def to_dict(self) -> dict:
        out = {
            "suite": self.suite,
            "config": self.config,
            "environment": self.environment,
            "cases": [_clean(asdict(c)) for c in self.cases],
            "summary": {"total": len(self.cases), "passed": sum(c.passed for c in self.cases)},
        }
        if self.wall_time is not None:
            out["wall_time"] = self.wall_time
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"

    def traces_csv(self) -> dict:
        out = {}
        for name, (header, rows) in sorted(self.traces.items()):
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
            out[name] = buf.getvalue()
        return out


def _clean(obj):
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, Variant):
        return obj.value
    return obj


def _rel(a, b) -> float:
    return abs(a - b) / abs(b) if b != 0 else abs(a)


def _case(name, inputs, expected, provenance, got, tolerance=None, passed=None, detail=""):
    if passed is None:
        passed = _rel(got, expected) <= tolerance
    return Case(name, inputs, expected, provenance, got, tolerance, bool(passed), detail)


# ---------------------------------------------------------------------------
# suites; each returns a list of (name, thunk) plus trace producers


def _kernels_cases(cfg: RunConfig):
    from scipy import special
    from . import kernels as K

    P = cfg.params
    traces = {}

    def riesz():
        A = K.riesz_normalization(Params(3, 1.0, 1.5)).A
        return _case("riesz_constant_n3_a1", {"n": 3, "alpha": 1}, 1 / (2 * math.pi**2), "DERIVED", A, 1e-14)

    def unit_kernel():
        g = K.green_free([0, 0, 0], [2, 0, 0], Params(3, 1.0, 1.5), constant=1.0)
        return _case("green_free_unit_distance2", {"n": 3, "alpha": 1}, 0.25, "TRIVIAL", g, 1e-15)

    def inner():
        n, a = 3, 1.0
        X = 0.5
        ref = (X ** ((n - a) / 2) * special.beta(1 - a / 2, n / 2)
               * special.hyp2f1((n - a) / 2, 1 - a / 2, (n + 2 - a) / 2, X) * 2 ** ((n - 2) / 2))
        got = K.inner_integral(1.0, Params(3, 1.0, 1.5), cfg.nodes)
        return _case("inner_integral_ratio1", {"n": 3, "alpha": 1, "ratio": 1}, float(ref), "DERIVED", got, 1e-10)

    def boundary():
        R = 10.0
        spec = K.calibrate_ball_green(P, R, nodes=cfg.nodes)
        rng = np.random.default_rng(cfg.seed)
        y = np.zeros(P.n)
        worst = 0.0
        for _ in range(cfg.samples):
            d = rng.normal(size=P.n)
            x = (1 - 1e-3) * R * d / np.linalg.norm(d)
            for a, b in ((x, y), (y, x)):
                worst = max(worst, abs(K.green_ball(a, b, spec, P)) / K.green_free(a, b, P))
        return _case("ball_green_boundary", {"R": R, "gap": 1e-3, "partner": "center"}, 0.0, "DERIVED", worst,
                     1e-3, passed=worst <= 1e-3)

    def convergence():
        x = np.zeros(P.n)
        x[0] = 0.5
        rows, prev, mono = [], math.inf, True
        for R in (10.0, 20.0, 40.0, 50.0, 80.0):
            spec = K.calibrate_ball_green(P, R, nodes=cfg.nodes)
            rel = 1.0 - K.green_ball(x, -x, spec, P) / K.green_free(x, -x, P)
            boggio = 1.0 - K.green_ball_boggio(x, -x, R, P) / K.green_free(x, -x, P)
            rows.append([R, repr(rel), repr(boggio)])
            if R != 50.0:
                mono &= rel < prev
                prev = rel
        traces["green_ball_convergence"] = (["R", "relative_deficit", "boggio_relative_deficit"], rows)
        at50 = float(rows[3][1])
        return _case("ball_green_limit", {"distance": 1.0, "R": [r[0] for r in rows]}, 0.0, "DERIVED",
                     at50, 1e-2, passed=mono and at50 <= 1e-2)

    def reduction():
        c = K.reduction_constant(Params(3, 0.5, 1.1))
        return _case("reduction_constant_n3_a1/2", {"n": 3, "alpha": "1/2"}, 4 * math.pi, "DERIVED", c, 1e-12)

    def identity():
        Pr = Params(3, 0.5, 1.1)
        direct = K.transverse_integral(Pr, 2.0)
        return _case("reduction_identity_t2", {"n": 3, "alpha": "1/2", "t": 2}, K.reduction_constant(Pr) * 2**-0.5,
                     "DERIVED", direct, 1e-6)

    def potential():
        Pw = Params(2, 1.0, 1.5)
        A = K.riesz_normalization(Pw).A
        exact = A * math.pi * special.gamma(1.5) / (2 * 1.5**1.5)
        v = K.weighted_riesz(gaussian_profile(2), Pw, 8.0, points=[[0.0, 0.0]])[0]
        return _case("weighted_riesz_gaussian_origin", {"n": 2, "alpha": 1, "p": 1.5}, exact, "DERIVED", v, 1e-6)

    thunks = [riesz, unit_kernel, inner, boundary, convergence, reduction, identity, potential]
    return thunks, traces


def _operator_cases(cfg: RunConfig):
    from scipy import special
    from . import operator as O

    P = Params(cfg.n, cfg.alpha, cfg.p, cfg.variant)
    n, a = P.n, P.a
    scheme = O.PVScheme(inner_radius=cfg.delta, far_radius=cfg.far_radius)

    def constant():
        v = O.fraclap_pv(constant_profile(n, 2.0), np.zeros(n), scheme, P).value
        return _case("pv_annihilates_constants", {"value": 2.0}, 0.0, "TRIVIAL", v, 1e-10, passed=abs(v) <= 1e-10)

    def gaussian():
        exact = 2**a * special.gamma((n + a) / 2) / special.gamma(n / 2)
        v = O.fraclap_pv(gaussian_profile(n), np.zeros(n), scheme, P).value
        return _case("pv_gaussian_origin", {"n": n, "alpha": a}, exact, "DERIVED", v, 1e-3)

    def eigenmode():
        L, N = cfg.L, cfg.N
        g = GridField.from_function(lambda x: np.cos(np.pi * x[..., 0] / L), 2, L, N, periodic=True)
        out = O.spectral_fraclap(g, P).values
        err = float(np.max(np.abs(out - (np.pi / L) ** a * g.values)))
        return _case("spectral_single_mode", {"L": L, "N": N}, 0.0, "TRIVIAL", err, 1e-10, passed=err <= 1e-10)

    def discrepancy():
        P2 = Params(2, cfg.alpha, cfg.p, cfg.variant)
        d = O.pv_spectral_discrepancy(gaussian_profile(2), P2, cfg.L, cfg.N)
        return _case("pv_vs_spectral", {"n": 2, "L": cfg.L, "N": cfg.N}, 0.0, "DERIVED", d, 1e-3, passed=d <= 1e-3)

    def delta():
        light = O.PVScheme(inner_radius=cfg.delta, far_radius=8.0, radial_order=8, angular_order=6,
                           max_panel=1.0, tail_order=8)
        r = O.delta_identity_check(np.zeros(n), gaussian_profile(n), P, scheme=light, radial_order=8,
                                   angular_order=4)
        return _case("delta_identity", {"n": n, "alpha": a}, 0.0, "DERIVED", r, 1e-2, passed=r <= 1e-2)

    return [constant, gaussian, eigenmode, discrepancy, delta], {}


def _kelvin_cases(cfg: RunConfig):
    from . import kelvin_mp as M

    P = cfg.params
    n = P.n

    def involution():
        rng = np.random.default_rng(cfg.seed)
        z0 = np.zeros(n)
        z0[0] = 0.25
        c = M.KelvinCenter(tuple(z0))
        u = gaussian_profile(n, center=np.r_[np.full(n - 1, 0.2), 1.0])
        back = M.kelvin_transform(M.kelvin_transform(u, c, P), c, P)
        x = rng.normal(size=(1000, n)) * 2.0
        x = x[np.linalg.norm(x - z0, axis=1) > 1e-3]
        err = float(np.max(np.abs(back(x) - u(x)) / np.abs(u(x))))
        return _case("kelvin_involution", {"points": 1000, "seed": cfg.seed}, 0.0, "TRIVIAL", err, 1e-12,
                     passed=err <= 1e-12)

    def scan():
        z0 = np.zeros(n)
        z0[0] = 0.5
        c = M.KelvinCenter(tuple(z0))
        ub = M.kelvin_transform(_axial_bump(n, z0), c, P)
        N = cfg.N if n == 2 else min(cfg.N, 32)
        grid = GridField(n, 4.0, N, np.zeros(N**n))
        lam, asym = M.symmetry_scan(ub, c, (-1.0, 2.0), grid)
        ok = abs(lam - z0[0]) <= grid.h + 1e-12 and asym <= 1e-10
        return _case("symmetry_scan_axial", {"z0_1": 0.5}, 0.5, "TRIVIAL", lam, grid.h, passed=ok,
                     detail=f"asymmetry={asym!r}")

    def sigma():
        z0 = np.zeros(n)
        z0[0] = 0.5
        c = M.KelvinCenter(tuple(z0))
        ub = M.kelvin_transform(_axial_bump(n, z0), c, P)
        N = cfg.N if n == 2 else min(cfg.N, 32)
        grid = GridField(n, 4.0, N, np.zeros(N**n))
        w = M.w_lambda_field(ub, 0.5, grid, c)
        s = M.sigma_minus_measure(w, M.PlaneConfig(0.5, 2 * grid.h), c)
        return _case("sigma_minus_at_center", {"lambda": 0.5}, 0.0, "DERIVED", s.measure, s.cell_volume,
                     passed=s.measure <= s.cell_volume)

    def positivity():
        rng = np.random.default_rng(cfg.seed + 1)
        lam = 0.3
        x = rng.uniform(-5, lam, size=(10_000, n))
        y = rng.uniform(-5, lam, size=(10_000, n))
        vals = M.kernel_difference_positivity(x, y, lam, P)
        worst = float(np.min(vals))
        return _case("kernel_difference_positive", {"pairs": 10_000}, 0.0, "TRIVIAL", worst, None, passed=worst > 0)

    def beta():
        b = M.transformed_beta(Params(3, Fraction(1), Fraction(3, 2)))
        return _case("beta_n3_a1_p3/2", {"n": 3, "alpha": 1, "p": "3/2"}, Fraction(5), "TRIVIAL", b, None,
                     passed=b == 5)

    return [involution, scan, sigma, positivity, beta], {}


def _axial_bump(n: int, z0: np.ndarray) -> ProfileSpec:
    c = z0.copy()
    c[-1] = 2.0
    b = bump_profile(n, 1.0)
    return ProfileSpec(lambda x: b(np.asarray(x) - c), n, 99, np.inf, support_radius=1.0, name="axial_bump")


def _bootstrap_cases(cfg: RunConfig):
    from . import bootstrap as B

    P = cfg.params.exact()
    traces = {}

    def certificate():
        try:
            cert = B.liouville_certificate(P)
        except Exception as exc:  # recorded, not raised
            return _case("liouville_certificate", _clean(cfg.echo()), "certificate", "DERIVED", repr(exc), None,
                         passed=False)
        return _case("liouville_certificate", {"n": P.n, "alpha": P.alpha, "p": P.p, "variant": P.variant.value},
                     "certificate", "DERIVED", cert.to_dict(), None, passed=True)

    def recursion():
        ok = True
        for m in range(0, 51, 10):
            ok &= len(B.exponent_recursion(P.variant, P.p, P.alpha, m).e) == m + 2
        return _case("recursion_equals_sum_form", {"m_max": 50}, True, "DERIVED", ok, None, passed=ok)

    def single_step():
        q = B.sum_form(Variant.QUADRATIC, P.p, P.alpha, 1)
        g = B.sum_form(Variant.GENERAL_F, P.p, P.alpha, 1)
        ok = q == (P.alpha - 1) * (P.p + 1) + 3 and g == P.alpha + P.alpha * P.p - P.p
        return _case("single_step_exponents", {"p": P.p, "alpha": P.alpha}, [(P.alpha - 1) * (P.p + 1) + 3,
                     P.alpha + P.alpha * P.p - P.p], "PAPER", [q, g], None, passed=ok)

    def closed_forms():
        checks = B.closed_form_check(Variant.QUADRATIC, 2, Fraction(1, 2), 3) + \
            B.closed_form_check(Variant.GENERAL_F, 2, Fraction(1, 2), 1)
        verdicts = [c.verdict for c in checks]
        return _case("closed_form_cross_check", {"points": ["(2,1/2,3)", "(2,1/2,1)"]},
                     ["match", "mismatch", "mismatch"], "DERIVED", verdicts, None,
                     passed=verdicts == ["match", "mismatch", "mismatch"])

    def trajectory():
        rows = []
        if P.alpha < 1:
            for m in range(0, 21):
                t = B.tau(P.variant, P.p, P.alpha, m)
                rows.append([m, f"{t.numerator}/{t.denominator}", repr(float(t))])
        traces["tau_trajectory"] = (["m", "tau_exact", "tau"], rows)
        inc = all(Fraction(a[1]) < Fraction(b[1]) for a, b in zip(rows, rows[1:]))
        return _case("tau_increasing_in_m", {"m": "0..20"}, True, "DERIVED", inc, None, passed=inc or not rows)

    return [certificate, recursion, single_step, closed_forms, trajectory], traces


def _hls_cases(cfg: RunConfig):
    from . import kernels as K

    n = 2
    P = Params(n, cfg.alpha, cfg.p)
    q = 2.0 * n / (n - P.a)  # twice the smallest admissible exponent

    def ball_field(N):
        return GridField.from_function(lambda x: (np.sum(x**2, -1) < 1).astype(float), n, 2.0, N, supersample=4)

    base = {}

    def baseline():
        r = K.hls_ratio(ball_field(cfg.N), q, P)
        base["r"] = r
        fine = K.hls_ratio(ball_field(2 * cfg.N), q, P)
        return _case("hls_indicator_ball_refinement", {"q": q, "N": [cfg.N, 2 * cfg.N]}, r, "DERIVED", fine, 5e-3)

    def invariance():
        g = ball_field(cfg.N)
        r = K.hls_ratio(g, q, P)
        dil = K.hls_ratio(K.dilate(g, 2.5), q, P)
        shifted = g.with_values(np.roll(g.values, (3, -2), axis=(0, 1)))
        tr = K.hls_ratio(shifted, q, P)
        err = max(_rel(dil, r), _rel(tr, r))
        return _case("hls_invariance", {"lambda": 2.5, "shift": [3, -2]}, 0.0, "TRIVIAL", err, 1e-6, passed=err <= 1e-6)

    def random_probe():
        r0 = K.hls_ratio(ball_field(cfg.N), q, P)
        rng = np.random.default_rng(cfg.seed)
        worst = 0.0
        for _ in range(cfg.samples):
            vals = np.zeros((cfg.N, cfg.N))
            k = cfg.N // 4
            vals[k:3 * k, k:3 * k] = rng.random((2 * k, 2 * k)) * (rng.random((2 * k, 2 * k)) < 0.5)
            if not vals.any():
                continue
            worst = max(worst, K.hls_ratio(GridField(n, 2.0, cfg.N, vals), q, P))
        return _case("hls_random_bounded", {"samples": cfg.samples, "seed": cfg.seed}, 3 * r0, "DERIVED", worst, None,
                     passed=worst < 3 * r0, detail=f"empirical_sup={worst!r}")

    return [baseline, invariance, random_probe], {}


_BUILDERS = {
    "kernels": _kernels_cases,
    "operator": _operator_cases,
    "kelvin": _kelvin_cases,
    "bootstrap": _bootstrap_cases,
    "hls": _hls_cases,
}


def worker_count() -> int:
    env = os.environ.get("FRACLAP_THREADS")
    if env is None:
        return 1
    try:
        k = int(env)
    except ValueError as exc:
        raise ConfigInvalid(f"FRACLAP_THREADS must be an integer, got {env!r}") from exc
    return max(1, k)


def _run_thunk(thunk) -> Case:
    try:
        return thunk()
    except Exception as exc:  # a crashing case is a failing case
        return Case(thunk.__name__, {}, None, "DERIVED", f"{type(exc).__name__}: {exc}", None, False)


def run_suite(cfg: RunConfig) -> Report:
    cfg.validate()
    start = time.perf_counter()
    thunks, traces = _BUILDERS[cfg.suite](cfg)
    workers = min(worker_count(), len(thunks))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cases = list(pool.map(_run_thunk, thunks))
    else:
        cases = [_run_thunk(t) for t in thunks]
    cases.sort(key=lambda c: c.name)
    env = {"fraclap": __version__, "numpy": np.__version__, "python": platform.python_version()}
    report = Report(cfg.suite, cfg.echo(), env, cases, traces)
    if cfg.record_time:
        report.wall_time = time.perf_counter() - start
    return report


def config_fields() -> list:
    return [f.name for f in fields(RunConfig)]
