"""Verification harness: curves, concavity, linearity, kernels, identities.

Everything here consumes the lower-level solvers and produces report
dataclasses with explicit margins, so that a test (or the command line
driver) can assert each claim at a stated tolerance instead of trusting
a bare boolean.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial, pi
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import gamma as gamma_fn

from . import polynomials as poly
from .domains import DomainModel, PhiSpec, RadialProfile, diagonal_moment
from .minimizer import ExtensionProblem, bergman_kernel, minimal_integral
from .quadrature import integrate
from .weights import WeightFunction, build_tail_transform


class AnalysisError(ValueError):
    """Invalid analysis request or degenerate input curve."""


# ---------------------------------------------------------------------------
# minimal-integral curves


@dataclass
class MinimalIntegralCurve:
    """G(t) along a t-grid together with the tail-transform coordinate r."""

    t: np.ndarray
    values: np.ndarray
    r: np.ndarray
    value_at_origin: float
    r_at_origin: float
    origin: float

    @property
    def slope(self) -> float:
        """Chord slope G(T)/g(T) of the transformed curve at the left end."""
        return self.value_at_origin / self.r_at_origin

    def sorted_by_r(self):
        order = np.argsort(self.r)
        return self.r[order], self.values[order]


def compute_curve(problem: ExtensionProblem, t_grid=None, *,
                  method: str = "radial", resolution: int = 64,
                  t_max: float = 8.0, n_points: int = 81) -> MinimalIntegralCurve:
    """Solve the minimal integral along a grid and attach r = g(t)."""
    T = problem.weight.T
    if t_grid is None:
        t_grid = np.linspace(T, T + t_max, n_points)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size < 2 or np.any(np.diff(t_grid) <= 0):
        raise AnalysisError("t grid must be strictly increasing with >= 2 nodes")
    if t_grid[0] < T:
        raise AnalysisError("t grid starts before the weight origin")
    vals = np.array([minimal_integral(problem, t, method=method,
                                      resolution=resolution,
                                      check_degree_shift=False).value
                     for t in t_grid])
    if not np.all(np.isfinite(vals)):
        raise AnalysisError("minimal integral is infinite along the grid")
    r = np.array([problem.weight.tail_integral(t) for t in t_grid])
    g0 = problem.weight.tail_integral(T)
    v0 = (vals[0] if t_grid[0] == T else
          minimal_integral(problem, T, method=method, resolution=resolution,
                           check_degree_shift=False).value)
    if v0 <= 0:
        raise AnalysisError("degenerate curve: minimal integral vanishes at the origin")
    return MinimalIntegralCurve(t=t_grid, values=vals, r=r,
                                value_at_origin=float(v0),
                                r_at_origin=float(g0), origin=float(T))


def compute_curve_at_r(problem: ExtensionProblem, r_grid, *,
                       method: str = "radial",
                       resolution: int = 64) -> MinimalIntegralCurve:
    """Same curve, but sampled at prescribed values of r = g(t)."""
    transform = build_tail_transform(problem.weight)
    r_grid = np.asarray(r_grid, dtype=float)
    ts = np.array([transform.inverse(r) for r in r_grid])
    order = np.argsort(ts)
    return compute_curve(problem, ts[order], method=method, resolution=resolution)


# ---------------------------------------------------------------------------
# concavity and linearity of the transformed curve


@dataclass
class ConcavityReport:
    """Shape of G as a function of r, judged through chord slopes."""

    concave: bool
    strictly_concave: bool
    linear: bool
    slope: float
    max_slope_increase: float
    min_slope_decrease: float
    max_chord_deviation: float
    tol: float


def check_concavity(curve: MinimalIntegralCurve, *, tol: float = 1e-8,
                    strict_floor: float = 1e-12) -> ConcavityReport:
    """Concavity of r -> G through monotonicity of consecutive chord slopes.

    Slopes are compared with tolerance tol * slope scale; this keeps the
    verdict stable where r-spacing underflows the curvature signal.
    """
    r, g = curve.sorted_by_r()
    if r.size < 3:
        raise AnalysisError("need at least 3 grid points for concavity")
    slopes = np.diff(g) / np.diff(r)
    k = curve.slope
    steps = np.diff(slopes)
    scale = abs(k)
    concave = bool(np.all(steps <= tol * scale))
    strictly = bool(np.all(steps < -strict_floor * scale))
    chord_dev = float(np.max(np.abs(g - k * r))) / curve.value_at_origin
    linear = bool(concave and np.max(np.abs(slopes - k)) <= 10 * tol * scale
                  and chord_dev <= 10 * tol)
    return ConcavityReport(concave=concave, strictly_concave=strictly,
                           linear=linear, slope=float(k),
                           max_slope_increase=float(np.max(steps)),
                           min_slope_decrease=float(np.min(steps)),
                           max_chord_deviation=chord_dev, tol=tol)


@dataclass
class MonotoneLimitsReport:
    """Monotonicity in t and decay of the minimal integral."""

    nonincreasing: bool
    end_ratio: float
    vanishing: bool
    r_nonincreasing: bool
    tol: float


def check_monotone_limits(curve: MinimalIntegralCurve, *, tol: float = 1e-12,
                          decay_bound: float = 1e-4) -> MonotoneLimitsReport:
    g = curve.values
    noninc = bool(np.all(np.diff(g) <= tol * g[0]))
    ratio = float(g[-1] / curve.value_at_origin)
    r_noninc = bool(np.all(np.diff(curve.r) <= tol * curve.r_at_origin))
    return MonotoneLimitsReport(nonincreasing=noninc, end_ratio=ratio,
                                vanishing=bool(ratio <= decay_bound),
                                r_nonincreasing=r_noninc, tol=tol)


@dataclass
class LinearityReport:
    """Three equivalent statements of linearity of the transformed curve."""

    global_linear: bool
    interior_touch: bool
    limit_match: bool
    consistent: bool
    slope: float
    limit_estimate: float
    limit_stalled: bool
    max_global_deviation: float
    min_interior_deviation: float
    tol: float


def check_linearity_equivalence(curve: MinimalIntegralCurve, *,
                                tol: float = 1e-8,
                                limit_tol: float = 1e-4,
                                near_margin: float = 1e-3) -> LinearityReport:
    """Global proportionality, interior chord contact, and the r -> 0 limit.

    The three statements are equivalent for concave curves through the
    origin; the report records each verdict so a disagreement (within
    tolerances) is visible instead of silently collapsed.
    """
    k = curve.slope
    g0 = curve.value_at_origin
    dev = np.abs(curve.values - k * curve.r) / g0
    global_linear = bool(np.max(dev) <= tol)
    interior = curve.t >= curve.origin + near_margin
    if not np.any(interior):
        raise AnalysisError("no interior grid points for the contact statement")
    min_int_dev = float(np.min(dev[interior]))
    interior_touch = bool(min_int_dev <= tol)
    q = curve.values / curve.r
    stalled = False
    if curve.r.size >= 3:
        d1, d2 = q[-2] - q[-3], q[-1] - q[-2]
        stalled = bool(abs(d2) > abs(d1) + 1e-15)
    r_last, r_prev = curve.r[-1], curve.r[-2]
    limit = float(q[-1] + (q[-1] - q[-2]) * r_last / (r_prev - r_last))
    if stalled:
        limit = float(q[-1])
    limit_match = bool(abs(limit - k) <= limit_tol * abs(k))
    flags = (global_linear, interior_touch, limit_match)
    return LinearityReport(global_linear=global_linear,
                           interior_touch=interior_touch,
                           limit_match=limit_match,
                           consistent=bool(len(set(flags)) == 1),
                           slope=float(k), limit_estimate=limit,
                           limit_stalled=stalled,
                           max_global_deviation=float(np.max(dev)),
                           min_interior_deviation=min_int_dev, tol=tol)


@dataclass
class EffectiveLinearityReport:
    """Exact linearity for a weight tuned to the datum, with a frozen minimizer."""

    slope: float
    max_deviation: float
    coefficient_drift: float
    linear: bool
    tol: float


def check_effective_linearity(problem: ExtensionProblem, t_grid=None, *,
                              method: str = "radial",
                              tol: float = 1e-8) -> EffectiveLinearityReport:
    """Verify G(t) = slope * g(t) along the grid and a t-independent minimizer."""
    T = problem.weight.T
    if t_grid is None:
        t_grid = np.linspace(T, T + 6.0, 25)
    t_grid = np.asarray(t_grid, dtype=float)
    curve = compute_curve(problem, t_grid, method=method)
    k = curve.slope
    dev = float(np.max(np.abs(curve.values - k * curve.r))) / curve.value_at_origin
    base = minimal_integral(problem, float(t_grid[0]), method=method,
                            check_degree_shift=False).coefficients
    drift = 0.0
    for t in (float(t_grid[t_grid.size // 2]), float(t_grid[-1])):
        other = minimal_integral(problem, t, method=method,
                                 check_degree_shift=False).coefficients
        keys = set(base) | set(other)
        drift = max(drift, max((abs(base.get(a, 0.0) - other.get(a, 0.0))
                                for a in keys), default=0.0))
    return EffectiveLinearityReport(slope=float(k), max_deviation=dev,
                                    coefficient_drift=float(drift),
                                    linear=bool(dev <= tol and drift <= tol),
                                    tol=tol)


@dataclass
class QuotientReport:
    """Monotonicity of q(t) = G(t)/g(t), with equality bookkeeping."""

    nondecreasing: bool
    min_step: float
    equality_count: int
    all_equal: bool
    tol: float


def quotient_monotonicity(curve: MinimalIntegralCurve, *,
                          tol: float = 1e-10) -> QuotientReport:
    if curve.value_at_origin <= 0:
        raise AnalysisError("quotient monotonicity needs a nonzero datum")
    q = curve.values / curve.r
    steps = np.diff(q)
    scale = float(np.max(np.abs(q)))
    nondec = bool(np.all(steps >= -tol * scale))
    eq = int(np.sum(np.abs(steps) <= tol * scale))
    return QuotientReport(nondecreasing=nondec, min_step=float(np.min(steps)),
                          equality_count=eq,
                          all_equal=bool(eq == steps.size), tol=tol)


# ---------------------------------------------------------------------------
# kernel restriction law


@dataclass
class RestrictionReport:
    """Kernel-times-minimum duality and the kernel growth ratio law."""

    ts: list
    products: list
    max_product_residual: float
    ratios: list
    max_ratio_residual: float
    passed: bool
    tol: float


def bergman_restriction_check(dom: DomainModel, phi: PhiSpec,
                              weight: WeightFunction, ts: Sequence[float], *,
                              degree: int = 6, method: str = "radial",
                              resolution: int = 64,
                              tol: float = 1e-8) -> RestrictionReport:
    """K(o,o) on {psi < -t} must invert the minimal integral; ratios follow g.

    The second law: K_t(o,o)/K_T(o,o) = g(T)/g(t), which for the constant
    weight is exactly e^{t-T}.
    """
    T = weight.T
    datum = {(0,) * dom.n: 1.0}
    problem = ExtensionProblem(domain=dom, phi=phi, weight=weight,
                               datum=datum, degree=degree)
    k0 = bergman_kernel(dom, phi, weight, T, degree=degree, method=method,
                        resolution=resolution).real
    g_origin = weight.tail_integral(T)
    products, ratios = [], []
    prod_res, ratio_res = 0.0, 0.0
    for t in ts:
        if t < T:
            raise AnalysisError("kernel ratio needs t >= the weight origin")
        gval = minimal_integral(problem, t, method=method, resolution=resolution,
                                check_degree_shift=False).value
        kval = bergman_kernel(dom, phi, weight, t, degree=degree, method=method,
                              resolution=resolution).real
        products.append(kval * gval)
        prod_res = max(prod_res, abs(kval * gval - 1.0))
        ratio = kval / k0
        ratios.append(ratio)
        expected = g_origin / weight.tail_integral(t)
        ratio_res = max(ratio_res, abs(ratio / expected - 1.0))
    return RestrictionReport(ts=list(ts), products=products,
                             max_product_residual=float(prod_res),
                             ratios=ratios,
                             max_ratio_residual=float(ratio_res),
                             passed=bool(max(prod_res, ratio_res) <= tol),
                             tol=tol)


# ---------------------------------------------------------------------------
# measure-theoretic identities


@dataclass
class LayerCakeReport:
    lhs: float
    rhs: float
    residual: float
    passed: bool
    tol: float


def layer_cake_check(dom: DomainModel, phi: PhiSpec, fn: Callable,
                     dfn: Callable, *, t_span: float = 12.0,
                     n_grid: int = 241, tol: float = 1e-6) -> LayerCakeReport:
    """Sublevel-mass form of the layer-cake identity on a finite s-window.

    lhs integrates fn(-psi) directly; rhs rebuilds it from the cumulative
    sublevel mass m(t) (sampled, then splined) through
    fn(0) m(0) - fn(L) m(L) + int fn' m.
    """
    grid = np.linspace(0.0, t_span, n_grid)
    mass = np.array([diagonal_moment(dom, phi, (0,) * dom.n,
                                     RadialProfile(fn=lambda s: np.ones_like(s)),
                                     float(t), t_hi=t_span + 1.0)
                     for t in grid])
    spline = CubicSpline(grid, mass)
    lhs = diagonal_moment(dom, phi, (0,) * dom.n,
                          RadialProfile(fn=lambda s: np.asarray(fn(s), float)),
                          0.0, t_hi=t_span)
    corr = integrate(lambda s: np.asarray(dfn(s), float) * spline(s),
                     0.0, t_span, rtol=1e-10)
    rhs = float(fn(0.0)) * float(mass[0]) - float(fn(t_span)) * float(mass[-1]) + corr
    residual = abs(lhs - rhs) / max(abs(lhs), 1e-300)
    return LayerCakeReport(lhs=float(lhs), rhs=float(rhs),
                           residual=float(residual),
                           passed=bool(residual <= tol), tol=tol)


def integration_by_parts_residual(weight: WeightFunction, a_fn: Callable,
                                  da_fn: Callable, t0: float, *,
                                  t_max: Optional[float] = None) -> float:
    """Signed defect of int c e^{-s} a - int g a' - g(t0) a(t0) over [t0, inf).

    Here g(s) is the tail integral of the weight; the identity is exact
    whenever a grows slower than the tail decays.
    """
    if t0 < weight.T:
        raise AnalysisError("integration by parts starts before the weight origin")
    hi = t_max if t_max is not None else weight.tail.cutoff(t0, rtol=1e-14) + 10.0

    def mass_term(s):
        s = np.asarray(s, dtype=float)
        return weight(s) * np.exp(-s) * np.asarray(a_fn(s), dtype=float)

    def tail_term(s):
        s = np.asarray(s, dtype=float)
        g = np.array([weight.tail_integral(float(x)) for x in np.ravel(s)])
        return g.reshape(s.shape) * np.asarray(da_fn(s), dtype=float)

    term1 = weight.piecewise_integrate(mass_term, t0, hi)
    term2 = weight.piecewise_integrate(tail_term, t0, hi)
    term3 = weight.tail_integral(t0) * float(a_fn(t0))
    return float(term1 - term2 - term3)


# ---------------------------------------------------------------------------
# boundary measure and optimal extension equalities


def _sphere_area(m: int) -> float:
    """Surface measure of the unit m-sphere in R^{m+1}."""
    return float(2.0 * pi ** ((m + 1) / 2.0) / gamma_fn((m + 1) / 2.0))


def boundary_measure(dom: DomainModel, phi: PhiSpec, datum: dict, t: float, *,
                     width: float = 1.0) -> float:
    """Strip-normalized squared mass of a slice datum near the pole set.

    Computes 2(n-k)/sigma_{2(n-k)-1} * (1/width) * int over the strip
    {t < -psi < t+width} of |f|^2 e^{-phi} e^{-psi}.  The datum must
    depend only on the free coordinates of a slice pole (k < n).
    """
    k = dom.pole_codim
    if dom.kind == "ball" or k >= dom.n:
        raise AnalysisError("boundary measure needs a slice pole of codimension < n")
    if width <= 0:
        raise AnalysisError("strip width must be positive")
    datum = poly.normalize(datum, dom.n)
    if any(sum(a[dom.free_count:]) != 0 for a in datum):
        raise AnalysisError("slice datum must not involve pole coordinates")
    prefactor = 2.0 * (dom.n - k) / _sphere_area(2 * (dom.n - k) - 1)
    grow = RadialProfile(fn=np.exp)
    total = sum(abs(v) ** 2 * diagonal_moment(dom, phi, a, grow, t, t_hi=t + width)
                for a, v in datum.items())
    return float(prefactor * total / width)


@dataclass
class OptimalExtensionReport:
    """Minimal integrals against the product-case closed form."""

    ts: list
    lhs: list
    rhs: list
    max_residual: float
    coefficient_drift: float
    passed: bool
    tol: float


def optimal_extension_check(problem: ExtensionProblem, ts=None, *,
                            width: float = 1.0,
                            tol: float = 1e-9) -> OptimalExtensionReport:
    """G(t) = g(t) * pi^k/k! * boundary measure, plus a frozen minimizer.

    Exact on polydiscs with a flat weight exponent; the report carries the
    residuals so deviations under other weights are visible.
    """
    dom, weight = problem.domain, problem.weight
    k = dom.pole_codim
    T = weight.T
    ts = np.linspace(T, T + 4.0, 9) if ts is None else np.asarray(ts, dtype=float)
    lhs, rhs = [], []
    drift = 0.0
    worst = 0.0
    for t in ts:
        res = minimal_integral(problem, float(t), check_degree_shift=False)
        if not res.feasible:
            raise AnalysisError("optimal extension check needs a feasible problem")
        bm = boundary_measure(dom, problem.phi, problem.datum, float(t),
                              width=width)
        left = res.value
        right = weight.tail_integral(float(t)) * pi ** k / factorial(k) * bm
        lhs.append(left)
        rhs.append(right)
        worst = max(worst, abs(left - right) / max(abs(left), 1e-300))
        drift = max(drift, max((abs(res.coefficients.get(a, 0.0) - v)
                                for a, v in problem.datum.items()), default=0.0))
    return OptimalExtensionReport(ts=[float(t) for t in ts], lhs=lhs, rhs=rhs,
                                  max_residual=float(worst),
                                  coefficient_drift=float(drift),
                                  passed=bool(worst <= tol and drift <= tol),
                                  tol=tol)
