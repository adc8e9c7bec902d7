"""Closed-form solution pair of the cutoff ODE system.

For a weight c on (T, infinity), the pair

    u(t) = -log( integral of c(s)e^{-s} over (T, t) )
    s(t) = ( double integral of c e^{-sigma} ) / ( integral of c e^{-sigma} )

solves the coupled system

    (s + s'^2 / (u'' s - s'')) * e^{u - t} = 1 / c(t)
    s' - s u' = 1

whenever u'' s - s'' stays positive, which is exactly the strict inequality
checked by `weights.check_ode_admissible`. The residual verifier evaluates
both equations from the analytic derivative accessors; residuals measure
only the accuracy of the underlying integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .weights import WeightFunction

NEAR_MARGIN = 1e-3


class OdeDomainError(ValueError):
    """Evaluation requested below the usable left margin."""


class OdeSingularityError(ArithmeticError):
    """u''s - s'' lost positivity on the verification grid."""


@dataclass(frozen=True)
class OdeSolution:
    """Analytic accessors for u, s and their first two derivatives.

    All methods accept scalars or ndarrays with t >= T + left_margin. The
    limit of u at infinity is -log(total tail mass).
    """

    weight: WeightFunction
    left_margin: float = NEAR_MARGIN

    @property
    def T(self) -> float:
        return self.weight.T

    def _guard(self, t):
        ts = np.asarray(t, dtype=float)
        if np.any(ts < self.T + self.left_margin):
            raise OdeDomainError(
                f"evaluation below usable margin t >= {self.T + self.left_margin}"
                f" (left integral underflows at T)")
        return ts

    def _pieces(self, t):
        ts = self._guard(t)
        i1 = np.atleast_1d(self.weight.left_integral(ts))
        i2 = np.atleast_1d(self.weight.left_double_integral(ts))
        c = np.atleast_1d(self.weight(ts))
        dc = np.atleast_1d(self.weight.deriv(ts))
        e = np.exp(-np.atleast_1d(ts))
        p = c * e            # d/dt of the left integral
        q = (dc - c) * e     # second derivative of the left integral
        return i1, i2, p, q

    def _shape(self, t, arr):
        return arr if np.ndim(t) else float(arr[0])

    def u(self, t):
        i1, _, _, _ = self._pieces(t)
        return self._shape(t, -np.log(i1))

    def u1(self, t):
        i1, _, p, _ = self._pieces(t)
        return self._shape(t, -p / i1)

    def u2(self, t):
        i1, _, p, q = self._pieces(t)
        return self._shape(t, -q / i1 + (p / i1) ** 2)

    def s(self, t):
        i1, i2, _, _ = self._pieces(t)
        return self._shape(t, i2 / i1)

    def s1(self, t):
        i1, i2, p, _ = self._pieces(t)
        return self._shape(t, 1.0 - i2 * p / i1 ** 2)

    def s2(self, t):
        i1, i2, p, q = self._pieces(t)
        return self._shape(
            t, -(i1 ** 2 * p + i1 * i2 * q - 2.0 * i2 * p ** 2) / i1 ** 3)

    def limit_u(self) -> float:
        """lim of u at infinity: -log of the total tail mass."""
        return -math.log(self.weight.tail_integral(self.T))


def solve_closed_form(c: WeightFunction,
                      left_margin: float = NEAR_MARGIN) -> OdeSolution:
    """Build the closed-form solution pair for an admissible weight.

    The caller is expected to have checked `check_ode_admissible`; the
    residual verifier enforces positivity pointwise regardless.
    """
    if left_margin <= 0:
        raise ValueError("left_margin must be positive")
    return OdeSolution(weight=c, left_margin=left_margin)


@dataclass(frozen=True)
class OdeResidualReport:
    """Pointwise residuals of both equations plus positivity diagnostics.

    Arrays t / res_mult / res_lin / positivity align; nodes below the left
    margin were skipped (n_skipped). max_* and min_* summarize the kept
    nodes.
    """

    t: np.ndarray = field(repr=False)
    res_mult: np.ndarray = field(repr=False)
    res_lin: np.ndarray = field(repr=False)
    positivity: np.ndarray = field(repr=False)
    max_res_mult: float
    max_res_lin: float
    min_positivity: float
    min_s: float
    n_skipped: int


def verify_residuals(sol: OdeSolution, grid) -> OdeResidualReport:
    """Evaluate both ODE residuals on the grid from analytic accessors.

    Nodes below T + left_margin are skipped (the left integral underflows
    there). Raises OdeSingularityError if u''s - s'' <= 0 at a kept node.
    """
    grid = np.asarray(grid, dtype=float)
    keep = grid >= sol.T + sol.left_margin
    kept = grid[keep]
    n_skipped = int((~keep).sum())
    if kept.size == 0:
        raise OdeDomainError("all grid nodes fall below the usable margin")

    i1, i2, p, q = sol._pieces(kept)
    u1 = -p / i1
    u2 = -q / i1 + (p / i1) ** 2
    s = i2 / i1
    s1 = 1.0 - i2 * p / i1 ** 2
    s2 = -(i1 ** 2 * p + i1 * i2 * q - 2.0 * i2 * p ** 2) / i1 ** 3

    positivity = u2 * s - s2
    if np.any(positivity <= 0.0):
        bad = int(np.argmin(positivity))
        raise OdeSingularityError(
            f"u''s - s'' = {positivity[bad]:.3e} <= 0 at t = {kept[bad]}")

    c = np.atleast_1d(sol.weight(kept))
    e_u_minus_t = np.exp(-kept) / i1
    res_mult = np.abs((s + s1 ** 2 / positivity) * e_u_minus_t * c - 1.0)
    res_lin = np.abs(s1 - s * u1 - 1.0)

    return OdeResidualReport(
        t=kept, res_mult=res_mult, res_lin=res_lin, positivity=positivity,
        max_res_mult=float(res_mult.max()), max_res_lin=float(res_lin.max()),
        min_positivity=float(positivity.min()), min_s=float(s.min()),
        n_skipped=n_skipped)
