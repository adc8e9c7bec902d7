"""Weight families on a half-line and their tail transform.

A weight is a positive function c on (T, infinity) entering integrals of the
form integral of c(s)*exp(-s). Two admissibility checks are provided:

* `check_admissible` - the class under which the reparametrized minimal
  integral is concave: finite tail integral, nonincreasing c(t)*exp(-t),
  and a positive lower bound for c on the tail (simplified liminf form).
* `check_ode_admissible` - the weaker class under which the closed-form
  cutoff ODE pair exists: finite tail integral plus the strict inequality
  (integral of c e^{-s} on (T,t))^2 > c(t) e^{-t} * (double integral).

`TailTransform` wraps r(t) = integral of c(s) e^{-s} over (t, infinity),
strictly decreasing from its total mass down to zero, with a bisection
inverse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

from .quadrature import TailBound, TailBoundError, integrate

TAU_MONO = 1e-12
TAU_STRICT = 1e-12


class WeightError(ValueError):
    """Invalid weight construction (nonpositive values, bad table, ...)."""


@dataclass(frozen=True)
class WeightFunction:
    """Positive weight c on (T, infinity) from a named family.

    family_tag is one of "constant", "exp_rate", "rational", "tabulated".
    `fn` and `dfn` evaluate c and c' on ndarrays. `tail_fn` returns a
    TailBound dominating c(s)*exp(-s) for s >= T, or raises TailBoundError
    when no such bound exists (e.g. exp_rate with alpha >= 1).
    """

    family_tag: str
    T: float
    params: dict
    fn: Callable = field(repr=False)
    dfn: Callable = field(repr=False)
    tail_fn: Callable = field(repr=False)
    # interior knots where the weight is only C^1 (tabulated family);
    # quadratures split at these so each piece is smooth
    breakpoints: tuple = ()

    def __call__(self, t):
        return self.fn(np.asarray(t, dtype=float))

    def deriv(self, t):
        return self.dfn(np.asarray(t, dtype=float))

    @property
    def tail(self) -> TailBound:
        return self.tail_fn()

    # ---- integrals of c(s) exp(-s) ----------------------------------

    def piecewise_integrate(self, f, a: float, b: float, **kw) -> float:
        """Integrate f over [a, b], split at the weight's breakpoints."""
        cuts = [a] + [x for x in self.breakpoints if a < x < b] + [b]
        return sum(integrate(f, lo, hi, **kw)
                   for lo, hi in zip(cuts[:-1], cuts[1:]))

    def tail_integral(self, t: float) -> float:
        """Integral of c(s) exp(-s) over (t, infinity)."""
        t = float(t)
        closed = _closed_tail(self, t)
        if closed is not None:
            return closed
        t_max = self.tail.cutoff(t)
        return self.piecewise_integrate(
            lambda s: self(s) * np.exp(-s), t, t_max)

    def left_integral(self, t) -> np.ndarray | float:
        """Integral of c(s) exp(-s) over (T, t); scalar or elementwise."""
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        closed = _closed_left(self, ts)
        if closed is None:
            closed = np.array([
                self.piecewise_integrate(
                    lambda s: self(s) * np.exp(-s), self.T, ti)
                for ti in ts])
        return closed if np.ndim(t) else float(closed[0])

    def left_double_integral(self, t) -> np.ndarray | float:
        """Integral over (T, t) of the left_integral, via Fubini:
        integral of (t - s) c(s) exp(-s) over (T, t)."""
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        closed = _closed_double(self, ts)
        if closed is None:
            closed = np.array([
                self.piecewise_integrate(
                    lambda s: (ti - s) * self(s) * np.exp(-s), self.T, ti)
                for ti in ts])
        return closed if np.ndim(t) else float(closed[0])


# ---- family constructors -------------------------------------------------


def constant(value: float = 1.0, T: float = 0.0) -> WeightFunction:
    if value <= 0:
        raise WeightError(f"constant weight must be positive, got {value}")
    return WeightFunction(
        "constant", float(T), {"value": float(value)},
        fn=lambda t: np.full_like(t, value, dtype=float),
        dfn=lambda t: np.zeros_like(t, dtype=float),
        tail_fn=lambda: TailBound(value, 1.0))


def exp_rate(alpha: float, T: float = 0.0) -> WeightFunction:
    """c(t) = exp(alpha * t). Integrable against exp(-t) iff alpha < 1."""
    alpha = float(alpha)

    def tail_fn():
        if alpha >= 1.0:
            raise TailBoundError(
                f"exp_rate({alpha}): c(s)e^-s does not decay (alpha >= 1)")
        return TailBound(math.exp(-(1.0 - alpha) * T) if T > 0 else 1.0,
                         1.0 - alpha)

    return WeightFunction(
        "exp_rate", float(T), {"alpha": alpha},
        fn=lambda t: np.exp(alpha * t),
        dfn=lambda t: alpha * np.exp(alpha * t),
        tail_fn=tail_fn)


def rational(num, den, T: float = 0.0) -> WeightFunction:
    """c(t) = p(t)/q(t) with ascending coefficient lists.

    q must not vanish on [T, infinity) and c must stay positive there
    (validated on a dense sample). Default instance 1/(1+t^2) via
    rational([1], [1, 0, 1]).
    """
    p = np.polynomial.Polynomial(num)
    q = np.polynomial.Polynomial(den)
    T = float(T)
    sample = np.linspace(T, T + 200.0, 4001)
    qs = q(sample)
    if np.any(qs == 0) or np.any(np.sign(qs) != np.sign(qs[0])):
        raise WeightError("rational weight: denominator changes sign on tail")
    cs = p(sample) / qs
    if np.any(cs <= 0):
        raise WeightError("rational weight: nonpositive values on tail")
    dp, dq = p.deriv(), q.deriv()
    deg_gap = (len(p.trim().coef) - 1) - (len(q.trim().coef) - 1)

    def tail_fn():
        if deg_gap <= 0:
            # bounded on the tail: sup of samples with a safety factor
            return TailBound(2.0 * float(cs.max()), 1.0)
        return TailBound(
            2.0 * float((cs * np.exp(-sample / 2.0)).max()), 0.5)

    return WeightFunction(
        "rational", T, {"num": list(map(float, num)),
                        "den": list(map(float, den))},
        fn=lambda t: p(t) / q(t),
        dfn=lambda t: (dp(t) * q(t) - p(t) * dq(t)) / q(t) ** 2,
        tail_fn=tail_fn)


def tabulated(ts, cs) -> WeightFunction:
    """Monotone-cubic interpolation of sampled (t, c) pairs.

    T is the first sample node. Beyond the last node the weight holds its
    final value (constant extrapolation), so the tail bound is
    max(cs) * exp(-s).
    """
    ts = np.asarray(ts, dtype=float)
    cs = np.asarray(cs, dtype=float)
    if ts.ndim != 1 or ts.size < 2 or ts.shape != cs.shape:
        raise WeightError("tabulated weight needs matching 1-D arrays, n >= 2")
    if np.any(np.diff(ts) <= 0):
        raise WeightError("tabulated weight nodes must be increasing")
    if np.any(cs <= 0):
        raise WeightError("tabulated weight values must be positive")
    interp = PchipInterpolator(ts, cs, extrapolate=False)
    dinterp = interp.derivative()
    t_hi, c_hi = float(ts[-1]), float(cs[-1])

    def fn(t):
        t = np.asarray(t, dtype=float)
        out = np.where(t >= t_hi, c_hi, interp(np.clip(t, ts[0], t_hi)))
        return out

    def dfn(t):
        t = np.asarray(t, dtype=float)
        inner = dinterp(np.clip(t, ts[0], t_hi))
        return np.where(t >= t_hi, 0.0, inner)

    return WeightFunction(
        "tabulated", float(ts[0]),
        {"ts": ts.tolist(), "cs": cs.tolist()},
        fn=fn, dfn=dfn,
        tail_fn=lambda: TailBound(float(cs.max()), 1.0),
        breakpoints=tuple(float(x) for x in ts[1:]))


# ---- closed forms where the family admits them ---------------------------


def _closed_tail(w: WeightFunction, t: float) -> Optional[float]:
    if w.family_tag == "constant":
        return w.params["value"] * math.exp(-t)
    if w.family_tag == "exp_rate":
        beta = 1.0 - w.params["alpha"]
        if beta <= 0:
            raise TailBoundError("exp_rate tail integral diverges")
        return math.exp(-beta * t) / beta
    return None


def _closed_left(w: WeightFunction, ts: np.ndarray) -> Optional[np.ndarray]:
    if w.family_tag == "constant":
        v, T = w.params["value"], w.T
        return v * (math.exp(-T) - np.exp(-ts))
    if w.family_tag == "exp_rate":
        # finite-interval integral, valid for every rate
        beta = 1.0 - w.params["alpha"]
        if beta == 0.0:
            return ts - w.T
        return (math.exp(-beta * w.T) - np.exp(-beta * ts)) / beta
    return None


def _closed_double(w: WeightFunction, ts: np.ndarray) -> Optional[np.ndarray]:
    if w.family_tag == "constant":
        v, T = w.params["value"], w.T
        return v * ((ts - T) * math.exp(-T) - (math.exp(-T) - np.exp(-ts)))
    if w.family_tag == "exp_rate":
        beta = 1.0 - w.params["alpha"]
        if beta == 0.0:
            return (ts - w.T) ** 2 / 2.0
        eT = math.exp(-beta * w.T)
        return (ts - w.T) * eT / beta - (eT - np.exp(-beta * ts)) / beta ** 2
    return None


# ---- class reports -------------------------------------------------------


@dataclass(frozen=True)
class ClassReport:
    """Outcome of a membership or margin check.

    in_class is the conjunction of condition_flags. witness records the
    worst offending (or tightest) point per condition. n_indeterminate
    counts grid points too close to degenerate to call either way.
    """

    in_class: bool
    condition_flags: dict
    witness: dict
    tolerances: dict
    n_indeterminate: int = 0


def check_admissible(c: WeightFunction, grid, liminf_floor: float) -> ClassReport:
    """Membership in the concavity class (simplified positivity form).

    Conditions: (1) finite integral of c(s)e^{-s} over (T, inf);
    (2) c(t)e^{-t} nonincreasing along the grid; (3) min of c over the tail
    quarter of the grid exceeds liminf_floor > 0.
    """
    if liminf_floor <= 0:
        raise WeightError("liminf_floor must be positive")
    grid = np.asarray(grid, dtype=float)
    flags, witness = {}, {}

    try:
        total = c.tail_integral(c.T)
        flags["finite_tail_integral"] = bool(np.isfinite(total))
        witness["total"] = total
    except TailBoundError as exc:
        flags["finite_tail_integral"] = False
        witness["total"] = math.inf
        witness["tail_error"] = str(exc)

    ce = c(grid) * np.exp(-grid)
    diffs = np.diff(ce)
    scale = max(float(ce.max()), 1e-300)
    worst = int(np.argmax(diffs)) if diffs.size else 0
    flags["decreasing_density"] = bool(
        diffs.size == 0 or float(diffs.max()) <= TAU_MONO * scale)
    witness["decreasing_density"] = {
        "t": float(grid[worst]), "increase": float(diffs[worst]) if diffs.size else 0.0}

    tail_start = grid.size - max(1, grid.size // 4)
    tail_min = float(c(grid[tail_start:]).min())
    flags["positive_floor"] = bool(tail_min > liminf_floor)
    witness["positive_floor"] = {"tail_min": tail_min, "floor": liminf_floor}

    return ClassReport(
        in_class=all(flags.values()), condition_flags=flags, witness=witness,
        tolerances={"tau_mono": TAU_MONO, "liminf_floor": liminf_floor})


def check_ode_admissible(c: WeightFunction, grid) -> ClassReport:
    """Membership in the class admitting the closed-form cutoff ODE pair.

    Requires the finite tail integral and, at every determinate grid point,
    (left integral)^2 > c(t)e^{-t} * (left double integral) strictly.
    Points where both sides underflow (t -> T+) are flagged indeterminate
    rather than failed.
    """
    grid = np.asarray(grid, dtype=float)
    flags, witness = {}, {}

    try:
        total = c.tail_integral(c.T)
        flags["finite_tail_integral"] = bool(np.isfinite(total))
        witness["total"] = total
    except TailBoundError as exc:
        flags["finite_tail_integral"] = False
        witness["total"] = math.inf
        witness["tail_error"] = str(exc)

    i1 = np.atleast_1d(c.left_integral(grid))
    i2 = np.atleast_1d(c.left_double_integral(grid))
    lhs = i1 ** 2
    rhs = np.asarray(c(grid) * np.exp(-grid) * i2)
    local = np.maximum(lhs, rhs)
    global_scale = max(float(local.max()), 1e-300)
    indeterminate = local < 1e-13 * global_scale
    margin = lhs - rhs
    ok = margin > TAU_STRICT * np.maximum(local, 1e-300)
    determinate_ok = bool(np.all(ok[~indeterminate]))
    flags["strict_inequality"] = determinate_ok and bool(np.any(~indeterminate))
    if np.any(~indeterminate):
        rel = np.where(indeterminate, np.inf, margin / np.maximum(local, 1e-300))
        worst = int(np.argmin(rel))
        witness["strict_inequality"] = {
            "t": float(grid[worst]), "lhs": float(lhs[worst]),
            "rhs": float(rhs[worst]), "margin": float(margin[worst])}

    return ClassReport(
        in_class=all(flags.values()), condition_flags=flags, witness=witness,
        tolerances={"tau_strict": TAU_STRICT},
        n_indeterminate=int(indeterminate.sum()))


def log_derivative_margin(c: WeightFunction, grid, bound: float) -> ClassReport:
    """Check (log c)'(t) <= bound along the grid; reports the worst margin.

    Used to certify weights eligible as comparison weights in the effective
    linearity identity (bound strictly below 1)."""
    grid = np.asarray(grid, dtype=float)
    logd = c.deriv(grid) / c(grid)
    worst = int(np.argmax(logd))
    margin = bound - float(logd[worst])
    flags = {"log_derivative_below_bound": bool(margin > 0.0)}
    return ClassReport(
        in_class=all(flags.values()), condition_flags=flags,
        witness={"t": float(grid[worst]), "log_derivative": float(logd[worst]),
                 "margin": margin},
        tolerances={"bound": bound})


# ---- tail transform ------------------------------------------------------


@dataclass(frozen=True)
class TailTransform:
    """r(t) = integral of c(s)exp(-s) over (t, infinity): strictly decreasing
    from `total` = r(T) to 0, with a bisection inverse."""

    weight: WeightFunction
    total: float

    @property
    def T(self) -> float:
        return self.weight.T

    def value(self, t):
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.array([self.weight.tail_integral(ti) for ti in ts])
        return out if np.ndim(t) else float(out[0])

    def inverse(self, r: float, *, xtol: float = 1e-12) -> float:
        """t with value(t) = r, for r in (0, total]. Bisection."""
        if not (0.0 < r <= self.total * (1.0 + 1e-12)):
            raise ValueError(
                f"inverse needs r in (0, total={self.total}], got {r}")
        if r >= self.total:
            return self.T
        lo, hi = self.T, self.T + 1.0
        while self.value(hi) > r:
            lo, hi = hi, self.T + 2.0 * (hi - self.T)
            if hi - self.T > 1e6:
                raise ValueError("inverse bracket expansion failed")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if hi - lo <= xtol * max(1.0, abs(mid)):
                break
            if self.value(mid) > r:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


def build_tail_transform(c: WeightFunction, t_max: Optional[float] = None,
                         n_nodes: int = 32) -> TailTransform:
    """Construct the tail transform, validating the truncation certificate.

    When t_max is given, the declared tail bound must certify a remainder
    below 1e-12 relative to the total mass at t_max, else TailBoundError.
    """
    tail = c.tail  # raises TailBoundError when the family admits none
    total = c.tail_integral(c.T)
    if t_max is not None and tail.remainder(t_max) > 1e-12 * max(total, 1e-300):
        raise TailBoundError(
            f"remainder {tail.remainder(t_max):.3e} at t_max={t_max} exceeds "
            f"1e-12 relative tolerance")
    return TailTransform(weight=c, total=total)
