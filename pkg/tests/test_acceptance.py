"""Acceptance gate: every headline claim at its stated tolerance.

Each test prints one pass/fail line. Tolerances here are the contract and
must not be loosened; the module test suites probe the same machinery at
tighter, implementation-level tolerances.
"""

import time
from math import exp, factorial, pi

import numpy as np

from minl2 import weights as wt
from minl2.analysis import (bergman_restriction_check, boundary_measure,
                            check_linearity_equivalence, check_monotone_limits,
                            compute_curve, compute_curve_at_r,
                            integration_by_parts_residual, layer_cake_check,
                            optimal_extension_check)
from minl2.domains import DomainModel, PhiSpec
from minl2.minimizer import (ExtensionProblem, IdealSpec, bergman_kernel,
                             minimal_integral, verify_extension_inequality,
                             verify_pythagoras)
from minl2.ode import solve_closed_form, verify_residuals
from minl2.smoothing import MaxSmoother, SmoothedCutoff


def report(num, desc, ok):
    print(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'} - {desc}")
    assert ok, f"criterion {num} failed: {desc}"


def disk_problem(weight=None, phi=None, datum=None, order=1, degree=8):
    return ExtensionProblem(domain=DomainModel.disk(),
                            phi=phi or PhiSpec.zero(),
                            weight=weight or wt.constant(1.0),
                            datum=datum or {(0,): 1.0},
                            ideal=IdealSpec(order), degree=degree)


def test_c01_disk_linear_law():
    start = time.perf_counter()
    prob = disk_problem()
    ts = np.linspace(0.0, 10.0, 101)
    exact = pi * np.exp(-ts)

    curve = compute_curve(prob, ts)
    radial_err = np.max(np.abs(curve.values / exact - 1.0))

    raw_err = 0.0
    for t in np.linspace(0.0, 10.0, 21):
        val = minimal_integral(prob, t, method="quadrature",
                               resolution=256).value
        raw_err = max(raw_err, abs(val / (pi * exp(-t)) - 1.0))
    elapsed = time.perf_counter() - start

    ok = radial_err <= 1e-6 and raw_err <= 1e-3 and elapsed < 5.0
    report(1, f"disk G = pi e^-t (radial {radial_err:.2e} <= 1e-6, "
              f"raw-256 {raw_err:.2e} <= 1e-3, {elapsed:.2f} s < 5 s)", ok)


def test_c02_strict_concavity_margin():
    prob = disk_problem(phi=PhiSpec.radial_power(1.0))
    h = 0.05
    r_grid = np.arange(1, 21) * h
    curve = compute_curve_at_r(prob, r_grid)
    order = np.argsort(curve.r)
    r = curve.r[order]
    g = curve.values[order]

    oracle = pi * (1.0 - np.exp(-r))
    value_err = np.max(np.abs(g / oracle - 1.0))

    d2 = g[2:] - 2.0 * g[1:-1] + g[:-2]
    margin = 0.5 * pi * np.exp(-r[1:-1]) * h * h
    sep = np.max(d2 + margin)

    ok = value_err <= 1e-3 and np.all(d2 <= -margin)
    report(2, f"Gaussian disk concavity (value err {value_err:.2e} <= 1e-3, "
              f"second differences clear the margin by {-sep:.2e})", ok)


def test_c03_ode_residuals():
    cases = (wt.constant(1.0), wt.exp_rate(0.5),
             wt.rational([1.0], [1.0, 0.0, 1.0]))
    worst = 0.0
    min_pos = np.inf
    for c in cases:
        grid = c.T + np.linspace(0.1, 10.0, 100)
        rep = verify_residuals(solve_closed_form(c), grid)
        worst = max(worst, rep.max_res_mult, rep.max_res_lin)
        min_pos = min(min_pos, rep.min_positivity)
    ok = worst <= 1e-8 and min_pos > 0
    report(3, f"ODE residuals <= 1e-8 for three weights "
              f"(worst {worst:.2e}, positivity floor {min_pos:.2e})", ok)


def test_c04_bergman_restriction_law():
    c = wt.constant(1.0)
    phi = PhiSpec.zero()
    ts = [0.5, 1.0, 2.0]
    samples = {
        DomainModel.disk(): (10, [
            np.array([0.05 + 0.0j]), np.array([0.1 + 0.1j]),
            np.array([-0.2 + 0.0j]), np.array([0.25j]),
            np.array([-0.15 - 0.2j])]),
        DomainModel.ball(2): (4, [
            np.array([0.2 + 0.0j, 0.1j]), np.array([-0.3 + 0.0j, 0.2 + 0.0j]),
            np.array([0.1 + 0.1j, -0.2j]), np.array([0.4 + 0.0j, 0.1 + 0.0j]),
            np.array([0.25j, 0.35 + 0.0j])]),
    }
    prod_err = 0.0
    ratio_err = 0.0
    for dom, (degree, pts) in samples.items():
        rep = bergman_restriction_check(dom, phi, c, ts, degree=degree)
        prod_err = max(prod_err, rep.max_product_residual)
        for z in pts:
            base = bergman_kernel(dom, phi, c, 0.0, z=z, degree=degree).real
            for t in ts:
                kt = bergman_kernel(dom, phi, c, t, z=z, degree=degree).real
                ratio_err = max(ratio_err, abs(kt / base / exp(t) - 1.0))
    ok = prod_err <= 1e-8 and ratio_err <= 1e-6
    report(4, f"kernel duality {prod_err:.2e} <= 1e-8 and restriction "
              f"ratio e^t at 5 points/domain {ratio_err:.2e} <= 1e-6", ok)


def test_c05_linearity_equivalence_matrix():
    members = [
        ("disk", disk_problem(), True),
        ("ball2", ExtensionProblem(domain=DomainModel.ball(2),
                                   phi=PhiSpec.zero(),
                                   weight=wt.constant(1.0),
                                   datum={(0, 0): 1.0}, degree=4), True),
        ("polydisc2", ExtensionProblem(domain=DomainModel.polydisc(2),
                                       phi=PhiSpec.zero(),
                                       weight=wt.constant(1.0),
                                       datum={(0, 0): 1.0}, degree=4), True),
        ("gaussian", disk_problem(phi=PhiSpec.radial_power(1.0)), False),
    ]
    disagreements = 0
    wrong = []
    for name, prob, expect_linear in members:
        rep = check_linearity_equivalence(compute_curve(prob, n_points=41))
        if not rep.consistent:
            disagreements += 1
        if rep.global_linear is not expect_linear:
            wrong.append(name)
    ok = disagreements == 0 and not wrong
    report(5, "three linearity criteria agree on all members "
              f"(0 disagreements over {len(members)}; "
              "linear on disk/ball/polydisc, not under Gaussian phi)", ok)


def test_c06_effective_linearity():
    c_tilde = wt.exp_rate(0.5)
    datum = {(0,): 1.0, (1,): 2.0}
    value_err = 0.0
    coeff_err = 0.0
    for t in (0.0, 1.0, 2.0):
        val = minimal_integral(disk_problem(weight=c_tilde), t).value
        value_err = max(value_err, abs(val / (2.0 * pi * exp(-t / 2.0)) - 1.0))
        base = minimal_integral(disk_problem(datum=datum, order=2), t)
        tilted = minimal_integral(disk_problem(weight=c_tilde, datum=datum,
                                               order=2), t)
        for key in set(base.coefficients) | set(tilted.coefficients):
            coeff_err = max(coeff_err,
                            abs(base.coefficients.get(key, 0.0)
                                - tilted.coefficients.get(key, 0.0)))
    ok = value_err <= 1e-6 and coeff_err <= 1e-8
    report(6, f"effective weight e^(s/2): value 2 pi e^(-t/2) "
              f"({value_err:.2e} <= 1e-6), minimizer coefficients match "
              f"({coeff_err:.2e} <= 1e-8)", ok)


def test_c07_layer_cake():
    disk = DomainModel.disk()
    rep = layer_cake_check(disk, PhiSpec.zero(), fn=lambda s: np.exp(-s),
                           dfn=lambda s: -np.exp(-s))
    base_err = max(abs(rep.lhs / (pi / 2.0) - 1.0),
                   abs(rep.rhs / (pi / 2.0) - 1.0))

    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(20):
        a, b = rng.uniform(0.3, 2.0, size=2)
        beta, gam = rng.uniform(0.5, 2.5, size=2)
        rep_i = layer_cake_check(
            disk, PhiSpec.zero(),
            fn=lambda s: a * np.exp(-beta * s) + b * np.exp(-gam * s),
            dfn=lambda s: (-a * beta * np.exp(-beta * s)
                           - b * gam * np.exp(-gam * s)))
        worst = max(worst, rep_i.residual)
    ok = base_err <= 1e-6 and worst <= 1e-6
    report(7, f"layer cake: disk value pi/2 ({base_err:.2e} <= 1e-6), "
              f"20 random profiles (worst {worst:.2e} <= 1e-6)", ok)


def test_c08_integration_by_parts():
    instances = (
        (wt.constant(1.0), lambda s: 1.0 - np.exp(-s),
         lambda s: np.exp(-s), 0.0),
        (wt.exp_rate(0.5), lambda s: 1.0 - np.exp(-s / 4.0),
         lambda s: np.exp(-s / 4.0) / 4.0, 1.0),
        (wt.constant(1.0), lambda s: s, lambda s: np.ones_like(s), 0.7),
    )
    worst = max(abs(integration_by_parts_residual(c, a_fn=a, da_fn=da, t0=t0))
                for c, a, da, t0 in instances)
    ok = worst <= 1e-9
    report(8, f"integration by parts on 3 closed-form instances "
              f"(worst residual {worst:.2e} <= 1e-9)", ok)


def test_c09_optimal_extension_equality():
    dom = DomainModel.slice_pole(2, 1)
    prob = ExtensionProblem(domain=dom, phi=PhiSpec.zero(),
                            weight=wt.constant(1.0), datum={(0, 0): 1.0},
                            degree=4)
    ts = np.linspace(0.0, 2.0, 5)

    bms = np.array([boundary_measure(dom, PhiSpec.zero(), {(0, 0): 1.0}, t)
                    for t in ts])
    bm_err = np.max(np.abs(bms - pi))

    rep = optimal_extension_check(prob, ts)
    lhs = np.asarray(rep.lhs)
    equality_err = abs(lhs[0] - pi ** 2)
    decay_err = np.max(np.abs(lhs / (pi ** 2 * np.exp(-ts)) - 1.0))

    ok = (bm_err <= 1e-3 and equality_err <= 1e-3 and decay_err <= 1e-3
          and rep.coefficient_drift <= 1e-8)
    report(9, f"bidisc slice: boundary measure pi +/- {bm_err:.2e}, "
              f"equality pi^2 +/- {equality_err:.2e}, decay pi^2 e^-t "
              f"({decay_err:.2e} rel), coefficients drift "
              f"{rep.coefficient_drift:.2e} <= 1e-8", ok)


def _max_smoother_trials(n_trials=200, seed=5):
    rng = np.random.default_rng(seed)
    tol = 1e-9
    gap_c = MaxSmoother(1.0).max_gap_constant
    for _ in range(n_trials):
        eps = rng.uniform(0.05, 1.5)
        m = MaxSmoother(eps)
        x1, x2 = np.sort(rng.uniform(-3.0, 3.0, size=2))
        y = rng.uniform(-3.0, 3.0)
        # (a1) nondecreasing plus midpoint convexity along a random segment
        if m.value(x1, y) > m.value(x2, y) + 1e-12:
            return False, "a1 monotone"
        p = rng.uniform(-3.0, 3.0, size=2)
        q = rng.uniform(-3.0, 3.0, size=2)
        mid = 0.5 * (p + q)
        if m.value(*mid) > 0.5 * (m.value(*p) + m.value(*q)) + tol:
            return False, "a1 convex"
        # (a2) nondecreasing in the smoothing width
        e1, e2 = np.sort(rng.uniform(0.05, 1.5, size=2))
        if MaxSmoother(e1).value(x1, y) > \
                MaxSmoother(e2).value(x1, y) + 1e-12:
            return False, "a2"
        # (a3) collapse to max as the width shrinks
        for eps_k in (1.0, 0.1, 0.01, 0.001):
            gap = abs(MaxSmoother(eps_k).value(x1, y) - max(x1, y))
            if gap > eps_k * gap_c + 1e-12:
                return False, "a3"
        # (a4)/(a5) exact regions, against the quadrature cross-check
        d = rng.uniform(2.0 * eps, 4.0 * eps)
        if m.value(y + d, y) != y + d or m.value(y - d, y) != y:
            return False, "a4/a5"
        # quadrature cross-check carries ~2e-4*eps kink error by design
        if abs(m.value_tensor(x1, y) - m.value(x1, y)) > 5e-4 * eps:
            return False, "tensor cross-check"
        # (a6)/(a7) dominates both arguments
        if m.value(x1, y) < x1 - 1e-12 or m.value(x1, y) < y - 1e-12:
            return False, "a6/a7"
    return True, ""


def _cutoff_grid_ok(t0, B, eps):
    tol = 1e-9
    t = np.linspace(-t0 - B - 2.0, 2.0, 4001)
    v = SmoothedCutoff(t0, B, eps)
    vals, first, second = v.value(t), v.first(t), v.second(t)
    # 1) identity above the ramp
    upper = t >= -t0 - eps
    if np.max(np.abs(vals[upper] - t[upper])) > tol:
        return False
    # 2) curvature confined to the open ramp with the 2/B cap
    inside = (t > -t0 - B + eps) & (t < -t0 - eps)
    if np.any(second < -tol) or np.max(second) > 2.0 / B + tol:
        return False
    if np.max(np.abs(second[~inside])) > tol:
        return False
    # 3) slope between 0 and 1
    return not (np.any(first < -tol) or np.any(first > 1.0 + tol))


def test_c10_structure_properties():
    pyth = verify_pythagoras(disk_problem(), 0.5, trials=20, seed=0,
                             tol=1e-10)

    decay_ok = True
    for dom in (DomainModel.disk(), DomainModel.ball(2),
                DomainModel.polydisc(2)):
        prob = ExtensionProblem(domain=dom, phi=PhiSpec.zero(),
                                weight=wt.constant(1.0),
                                datum={(0,) * dom.n: 1.0}, degree=4)
        curve = compute_curve(prob, np.linspace(0.0, 10.0, 51))
        rep = check_monotone_limits(curve)
        decay_ok &= rep.nonincreasing and rep.end_ratio <= 1e-4

    smoother_ok, smoother_why = _max_smoother_trials()

    cutoff_ok = (_cutoff_grid_ok(1.0, 1.0, 0.1)
                 and _cutoff_grid_ok(0.5, 2.0, 0.2))

    feas_ok = all(
        verify_extension_inequality(disk_problem(), t0=1.0, B=B).passed
        for B in (1.0, 0.5, 0.25))

    ok = (pyth.passed and decay_ok and smoother_ok and cutoff_ok
          and feas_ok)
    detail = (f"pythagoras {pyth.max_residual:.2e} <= 1e-10, decay to 1e-4, "
              f"max-smoother 200 trials, cutoff grids, extension "
              f"feasibility B in {{1, 1/2, 1/4}}")
    if not smoother_ok:
        detail += f" [smoother failed: {smoother_why}]"
    report(10, detail, ok)
