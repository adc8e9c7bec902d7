"""Gram matrices, constrained minimal integrals, and kernel evaluations.

The central object is the minimal weighted integral

    min { int_{psi < -t} |F|^2 e^{-phi} c(-psi) : F holomorphic,
          F - f in the ideal attached to the pole set }

computed over a truncated monomial basis.  On the model domains every
weight in scope is invariant under independent coordinate rotations, so
Gram matrices are diagonal along the fast path and the constrained
minimum reduces to exact block algebra; a raw tensor-grid path assembles
the same Gram matrix by quadrature as an independent check.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from math import inf, isfinite
from typing import Optional

import numpy as np
from scipy import linalg

from . import polynomials as poly
from .domains import (DomainModel, PhiSpec, RadialProfile, build_sublevel_grid,
                      diagonal_moment)
from .smoothing import CutoffProfile
from .weights import WeightFunction


class MinimizerError(ValueError):
    """Invalid extension-problem data."""


class GramError(RuntimeError):
    """Gram matrix failed a structural check (Hermitian, positive definite)."""


@dataclass(frozen=True)
class IdealSpec:
    """Power of the maximal ideal in the pole-block coordinates.

    Membership pins every coefficient whose total degree over the pole
    coordinates is below ``order``; for a point pole that is the full jet
    of order < ``order`` at the origin, and for a slice pole the normal
    jet along the slice.
    """

    order: int = 1

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 1:
            raise MinimizerError("ideal order must be a positive integer")
        object.__setattr__(self, "order", int(self.order))

    def pins(self, alpha, dom: DomainModel) -> bool:
        return sum(alpha[dom.free_count:]) < self.order

    def contains(self, coeffs: dict, dom: DomainModel) -> bool:
        """Whether the polynomial lies in the ideal (all pinned coefficients vanish)."""
        coeffs = poly.normalize(coeffs, dom.n)
        return all(not self.pins(a, dom) for a in coeffs)


@dataclass(frozen=True)
class ExtensionProblem:
    """Datum, weights, and truncation data for one minimal-integral solve."""

    domain: DomainModel
    phi: PhiSpec
    weight: WeightFunction
    datum: dict
    ideal: IdealSpec = IdealSpec(1)
    degree: int = 8

    def __post_init__(self):
        object.__setattr__(self, "datum", poly.normalize(self.datum, self.domain.n))
        if int(self.degree) != self.degree or self.degree < 0:
            raise MinimizerError("basis degree must be a nonnegative integer")
        object.__setattr__(self, "degree", int(self.degree))
        self.phi.shift_exponents(self.domain.n)

    def basis(self) -> list:
        return poly.multi_indices(self.domain.n, self.degree)

    def pinned_mask(self, alphas) -> np.ndarray:
        return np.array([self.ideal.pins(a, self.domain) for a in alphas])


@dataclass
class GramSystem:
    """Hermitian Gram matrix of the monomial basis in the weighted space."""

    matrix: np.ndarray
    alphas: list
    method: str
    hermitian_defect: float = 0.0

    @property
    def diagonal(self) -> np.ndarray:
        return np.real(np.diag(self.matrix))


def monomial_values(alphas, pts: np.ndarray) -> np.ndarray:
    """Matrix of z^alpha over the rows of alphas, columns of points."""
    out = np.empty((len(alphas), pts.shape[0]), dtype=complex)
    for row, alpha in enumerate(alphas):
        acc = np.ones(pts.shape[0], dtype=complex)
        for i, k in enumerate(alpha):
            if k:
                acc = acc * pts[:, i] ** k
        out[row] = acc
    return out


def assemble_gram(problem: ExtensionProblem, t: float, *, method: str = "radial",
                  resolution: int = 64,
                  angular_nodes: Optional[int] = None,
                  alphas: Optional[list] = None) -> GramSystem:
    """Gram matrix of the truncated basis on {psi < -t}.

    method "radial" computes exact-diagonal entries through single
    s-integrals; "quadrature" assembles the full matrix on a raw grid.
    """
    dom, phi, weight = problem.domain, problem.phi, problem.weight
    alphas = problem.basis() if alphas is None else list(alphas)
    if method == "radial":
        prof = RadialProfile.from_weight(weight)
        diag = [diagonal_moment(dom, phi, a, prof, t) for a in alphas]
        return GramSystem(matrix=np.diag(np.array(diag, dtype=complex)),
                          alphas=alphas, method="radial")
    if method != "quadrature":
        raise MinimizerError(f"unknown gram method {method!r}")
    grid = build_sublevel_grid(dom, t, resolution, angular_nodes)
    vals = monomial_values(alphas, grid.points)
    wq = grid.weights * phi.weight_values(grid.points) * weight(-dom.psi(grid.points))
    g = (vals * wq) @ vals.conj().T
    defect = float(np.max(np.abs(g - g.conj().T))) if g.size else 0.0
    scale = float(np.max(np.abs(g))) if g.size else 0.0
    if scale > 0 and defect > 1e-12 * scale:
        raise GramError(f"Gram matrix is not Hermitian: defect {defect:.3e}")
    g = 0.5 * (g + g.conj().T)
    return GramSystem(matrix=g, alphas=alphas, method="quadrature",
                      hermitian_defect=defect)


@dataclass
class MinimalIntegralResult:
    """Outcome of one constrained minimum-norm solve."""

    value: float
    coefficients: dict
    feasible: bool
    converged: bool
    degree: int
    method: str
    diagnostics: dict


def _constrained_minimum(gram: GramSystem, pinned: np.ndarray, target: np.ndarray):
    """Minimum of x^H G x over x with the pinned coordinates fixed to target.

    Returns (value, x).  Basis elements with infinite squared norm are
    forced to zero; a pinned one with a nonzero target makes the value
    infinite.
    """
    diag = gram.diagonal
    finite = np.isfinite(diag)
    if np.any(pinned & ~finite & (np.abs(target) > 0)):
        return inf, None
    x = np.zeros(len(gram.alphas), dtype=complex)
    keep_p = pinned & finite
    keep_f = ~pinned & finite
    x[keep_p] = target[keep_p]
    y = target[keep_p]
    gpp = gram.matrix[np.ix_(keep_p, keep_p)]
    value = float(np.real(np.vdot(y, gpp @ y)))
    if np.any(keep_f) and y.size:
        gfp = gram.matrix[np.ix_(keep_f, keep_p)]
        gff = gram.matrix[np.ix_(keep_f, keep_f)]
        rhs = gfp @ y
        if np.max(np.abs(rhs)) > 0:
            try:
                cho = linalg.cho_factor(gff)
            except linalg.LinAlgError as exc:
                raise GramError(f"free Gram block is not positive definite: {exc}")
            xf = -linalg.cho_solve(cho, rhs)
            x[keep_f] = xf
            value += float(np.real(np.vdot(y, gfp.conj().T @ xf)))
    return max(value, 0.0), x


def _missing_pinned(problem: ExtensionProblem) -> list:
    return [a for a in problem.datum
            if problem.ideal.pins(a, problem.domain) and sum(a) > problem.degree]


def _solve_at_degree(problem: ExtensionProblem, t: float, method: str,
                     resolution: int, angular_nodes) -> tuple:
    alphas = problem.basis()
    gram = assemble_gram(problem, t, method=method, resolution=resolution,
                         angular_nodes=angular_nodes)
    pinned = problem.pinned_mask(alphas)
    target = np.array([problem.datum.get(a, 0.0) for a in alphas], dtype=complex)
    missing = _missing_pinned(problem)
    if missing:
        return inf, None, gram, pinned, missing
    value, x = _constrained_minimum(gram, pinned, target)
    return value, x, gram, pinned, missing


def minimal_integral(problem: ExtensionProblem, t: float, *,
                     method: str = "radial", resolution: int = 64,
                     angular_nodes: Optional[int] = None,
                     check_degree_shift: bool = True) -> MinimalIntegralResult:
    """Minimal weighted integral over {psi < -t} with the jet constraint.

    Returns value +inf (feasible=False) when the truncated basis cannot
    carry the pinned jet.  ``converged`` reports stability of the value
    under raising the truncation degree by one.
    """
    value, x, gram, pinned, missing = _solve_at_degree(
        problem, t, method, resolution, angular_nodes)
    feasible = isfinite(value)
    coeffs = {}
    if x is not None and feasible:
        coeffs = {a: complex(v) for a, v in zip(gram.alphas, x) if v != 0}
    delta = None
    converged = feasible
    if check_degree_shift and feasible:
        bumped = replace(problem, degree=problem.degree + 1)
        value2 = _solve_at_degree(bumped, t, method, resolution, angular_nodes)[0]
        delta = value - value2
        converged = bool(abs(delta) <= max(1e-12, 1e-9 * abs(value)))
    diagnostics = {"degree_shift_delta": delta,
                   "hermitian_defect": gram.hermitian_defect,
                   "basis_size": len(gram.alphas),
                   "pinned_count": int(np.sum(pinned)),
                   "missing_pinned": missing}
    return MinimalIntegralResult(value=value, coefficients=coeffs,
                                 feasible=feasible, converged=converged,
                                 degree=problem.degree, method=method,
                                 diagnostics=diagnostics)


def weighted_norm2(problem: ExtensionProblem, t: float, coeffs: dict, *,
                   method: str = "radial", resolution: int = 64,
                   angular_nodes: Optional[int] = None) -> float:
    """Squared norm of a polynomial in the weighted space over {psi < -t}."""
    coeffs = poly.normalize(coeffs, problem.domain.n)
    degree = max(problem.degree, poly.degree(coeffs))
    alphas = poly.multi_indices(problem.domain.n, degree)
    gram = assemble_gram(problem, t, method=method, resolution=resolution,
                         angular_nodes=angular_nodes, alphas=alphas)
    x = np.array([coeffs.get(a, 0.0) for a in alphas], dtype=complex)
    live = np.abs(x) > 0
    if np.any(~np.isfinite(gram.diagonal) & live):
        return inf
    x = np.where(np.isfinite(gram.diagonal), x, 0.0)
    return float(np.real(np.vdot(x, gram.matrix @ x)))


def bergman_kernel(dom: DomainModel, phi: PhiSpec, weight: WeightFunction,
                   t: float, z=None, w=None, *, degree: int = 10,
                   method: str = "radial", resolution: int = 64,
                   angular_nodes: Optional[int] = None) -> complex:
    """Reproducing kernel of the weighted space on {psi < -t}, truncated.

    Basis elements of infinite norm are dropped (they are not members of
    the space).  Defaults evaluate at the pole point.
    """
    z = np.zeros(dom.n, dtype=complex) if z is None else np.asarray(z, dtype=complex)
    w = np.zeros(dom.n, dtype=complex) if w is None else np.asarray(w, dtype=complex)
    problem = ExtensionProblem(domain=dom, phi=phi, weight=weight,
                               datum={}, degree=degree)
    gram = assemble_gram(problem, t, method=method, resolution=resolution,
                         angular_nodes=angular_nodes)
    keep = np.isfinite(gram.diagonal)
    alphas = [a for a, k in zip(gram.alphas, keep) if k]
    mz = monomial_values(alphas, z[None, :])[:, 0]
    mw = monomial_values(alphas, w[None, :])[:, 0]
    g = gram.matrix[np.ix_(keep, keep)]
    try:
        cho = linalg.cho_factor(g)
    except linalg.LinAlgError as exc:
        raise GramError(f"Gram matrix is not positive definite: {exc}")
    return complex(np.vdot(mw, linalg.cho_solve(cho, mz)))


@dataclass
class PythagorasReport:
    """Orthogonality of the constrained minimizer against free perturbations."""

    value: float
    max_residual: float
    trials: int
    passed: bool
    tol: float


def verify_pythagoras(problem: ExtensionProblem, t: float, *, trials: int = 20,
                      seed: int = 0, method: str = "radial",
                      resolution: int = 64, tol: float = 1e-10) -> PythagorasReport:
    """Check norm(x* + d)^2 = norm(x*)^2 + norm(d)^2 for free perturbations d.

    The minimizer is orthogonal to every competitor direction that keeps
    the pinned jet, so the squared norms must split exactly; the residual
    is relative to the perturbed norm.
    """
    if _missing_pinned(problem):
        raise MinimizerError("Pythagoras check needs a feasible problem")
    alphas = problem.basis()
    gram = assemble_gram(problem, t, method=method, resolution=resolution)
    pinned = problem.pinned_mask(alphas)
    target = np.array([problem.datum.get(a, 0.0) for a in alphas], dtype=complex)
    value, x = _constrained_minimum(gram, pinned, target)
    if not isfinite(value) or x is None:
        raise MinimizerError("Pythagoras check needs a feasible problem")
    free = ~pinned & np.isfinite(gram.diagonal)
    rng = np.random.default_rng(seed)
    scale = 0.5 * (1.0 + float(np.linalg.norm(x)))
    worst = 0.0
    for _ in range(trials):
        d = np.zeros_like(x)
        d[free] = scale * (rng.standard_normal(int(np.sum(free)))
                           + 1j * rng.standard_normal(int(np.sum(free))))
        lhs = float(np.real(np.vdot(x + d, gram.matrix @ (x + d))))
        rhs = value + float(np.real(np.vdot(d, gram.matrix @ d)))
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), 1.0))
    return PythagorasReport(value=value, max_residual=worst, trials=trials,
                            passed=bool(worst <= tol), tol=tol)


@dataclass
class ExtensionFeasibilityReport:
    """Outcome of the cutoff-extension inequality check."""

    lhs: float
    rhs: float
    constant: float
    passed: bool
    pole_weighted: bool
    t0: float
    width: float
    coefficients: dict
    tol: float


def verify_extension_inequality(problem: ExtensionProblem, *, t0: float = 1.0,
                                B: float = 1.0, pole_weighted: bool = True,
                                tol: float = 1e-9) -> ExtensionFeasibilityReport:
    """Feasibility of the cutoff-extension bound for the problem datum.

    Minimizes int |F - (1-b(psi)) f|^2 e^{-phi + v(psi)} c(-v(psi)) over
    candidates F and compares against C * int_T^{t0+B} c(s) e^{-s} ds with
    C = (1/B) int_{strip} |f|^2 e^{-phi}.  With ``pole_weighted`` both
    weights additionally carry e^{-psi} and F is constrained to match the
    datum jet; without it the minimum is unconstrained.  PASS means the
    minimum is below the right-hand side.
    """
    dom, phi, c = problem.domain, problem.phi, problem.weight
    T = c.T
    if B <= 0:
        raise MinimizerError("strip width B must be positive")
    if t0 < T:
        raise MinimizerError("cutoff level t0 must not precede the weight origin")
    cut = CutoffProfile(t0=t0, B=B)
    kinks = (t0, t0 + B)
    s_far = T + t0 + B + 60.0 * dom.pole_codim

    def base(s):
        s = np.asarray(s, dtype=float)
        out = np.exp(cut.v(-s)) * c(-cut.v(-s))
        if pole_weighted:
            out = out * np.exp(s)
        return out

    def prof(shape_fn):
        return RadialProfile(fn=lambda s: shape_fn(cut.b(-s)) * base(s),
                             breakpoints=kinks)

    bump_prof = prof(lambda b: b * b)
    tail_sq = prof(lambda b: (1.0 - b) ** 2)
    tail_lin = prof(lambda b: 1.0 - b)
    plain = prof(lambda b: np.ones_like(b))

    basis = set(problem.basis())
    lhs = 0.0
    coeffs = {}
    for alpha, fa in problem.datum.items():
        wa = abs(fa) ** 2
        pin = pole_weighted and problem.ideal.pins(alpha, dom)
        if pin:
            lhs += wa * diagonal_moment(dom, phi, alpha, bump_prof, T, t_hi=t0 + B)
            coeffs[alpha] = complex(fa)
            continue
        a_mom = diagonal_moment(dom, phi, alpha, tail_sq, T, t_hi=s_far)
        if alpha in basis:
            b_mom = diagonal_moment(dom, phi, alpha, tail_lin, T, t_hi=s_far)
            c_mom = diagonal_moment(dom, phi, alpha, plain, T, t_hi=s_far)
            lhs += wa * (a_mom - b_mom * b_mom / c_mom)
            coeffs[alpha] = complex(fa) * b_mom / c_mom
        else:
            lhs += wa * a_mom

    strip_prof = RadialProfile(fn=(np.exp if pole_weighted
                                   else lambda s: np.ones_like(np.asarray(s, float))))
    constant = sum(abs(fa) ** 2
                   * diagonal_moment(dom, phi, alpha, strip_prof, t0, t_hi=t0 + B)
                   for alpha, fa in problem.datum.items()) / B
    rhs = constant * (c.tail_integral(T) - c.tail_integral(t0 + B))
    passed = bool(lhs <= rhs * (1.0 + tol))
    return ExtensionFeasibilityReport(lhs=float(lhs), rhs=float(rhs),
                                      constant=float(constant), passed=passed,
                                      pole_weighted=pole_weighted, t0=t0,
                                      width=B, coefficients=coeffs, tol=tol)
