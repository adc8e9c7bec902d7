"""Cutoff profiles, mollifiers, smoothed cutoffs, and a max smoother.

The base mollifier is the even bump N*exp(-1/(1-t^2)) on (-1, 1) with unit
mass. Its CDF and two further antiderivatives are tabulated once as spline
antiderivatives (error ~1e-12), with exact polynomial tails outside (-1, 1),
so every construction below evaluates in closed form over these tables:

* `CutoffProfile`      - the piecewise-linear ramp b and its anchored
                         antiderivative v with v(0) = 0.
* `SmoothedCutoff`     - the two-parameter mollified ramp family: second
                         derivative is a mollified plateau indicator, the
                         value agrees with t above the ramp and is constant
                         below it.
* `MaxSmoother`        - max(x, y) convolved with a product mollifier.
                         Reduced exactly to one dimension via
                         M(x,y) = (x + y + E|x - y - Z|)/2 where Z has the
                         self-convolution density; a tensor-quadrature
                         evaluator is kept as a cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline

from .quadrature import _leggauss


# ---- base bump tables -----------------------------------------------------


class _BumpTables:
    """Normalized bump, its antiderivative chain, and the self-convolution.

    rho: density on (-1,1); P = CDF; Q = int P; Q2 = int Q. kappa is the
    density of the difference of two independent bump variables on (-2,2),
    with CDF `ka` and first-moment antiderivative `kb`.
    """

    def __init__(self):
        x = np.linspace(-1.0, 1.0, 4001)
        vals = np.zeros_like(x)
        core = x[1:-1]
        vals[1:-1] = np.exp(-1.0 / (1.0 - core ** 2))
        raw = CubicSpline(x, vals, bc_type="clamped")
        self.mass_unnormalized = float(raw.antiderivative()(1.0))
        self.rho_spline = CubicSpline(x, vals / self.mass_unnormalized,
                                      bc_type="clamped")
        self.P_spline = self.rho_spline.antiderivative()
        self.Q_spline = self.P_spline.antiderivative()
        self.Q2_spline = self.Q_spline.antiderivative()
        self.p1 = float(self.P_spline(1.0))    # ~1
        self.q1 = float(self.Q_spline(1.0))    # ~1 (parts: 1 - int t rho = 1)
        self.q21 = float(self.Q2_spline(1.0))  # (1 + second moment)/2

        # difference density kappa = rho * rho(-.) on [-2, 2]
        w = np.linspace(-2.0, 2.0, 1601)
        gx, gw = _leggauss(64)
        kv = np.zeros_like(w)
        for i, wi in enumerate(w):
            lo, hi = max(-1.0, wi - 1.0), min(1.0, wi + 1.0)
            if hi - lo <= 0:
                continue
            y = 0.5 * (lo + hi) + 0.5 * (hi - lo) * gx
            kv[i] = 0.5 * (hi - lo) * float(
                np.dot(gw, self.rho(y) * self.rho(wi - y)))
        self.kappa_spline = CubicSpline(w, kv, bc_type="clamped")
        self.ka_spline = self.kappa_spline.antiderivative()
        self.kb_spline = CubicSpline(w, w * kv, bc_type="clamped").antiderivative()
        self.ka2 = float(self.ka_spline(2.0))   # ~1
        self.kb2 = float(self.kb_spline(2.0))   # ~0 (symmetry)
        # E max(s,t) = E|s-t|/2 for centered iid: the uniform gap constant
        self.gap_constant = 0.5 * float(self.e_abs(0.0))

    def rho(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.abs(x) < 1.0
        out = np.zeros_like(x)
        out[inside] = self.rho_spline(x[inside])
        return out

    def P(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= -1.0, 0.0,
                        np.where(x >= 1.0, self.p1,
                                 self.P_spline(np.clip(x, -1.0, 1.0))))

    def Q(self, x):
        x = np.asarray(x, dtype=float)
        right = self.q1 + self.p1 * (x - 1.0)
        return np.where(x <= -1.0, 0.0,
                        np.where(x >= 1.0, right,
                                 self.Q_spline(np.clip(x, -1.0, 1.0))))

    def Q2(self, x):
        x = np.asarray(x, dtype=float)
        right = (self.q21 + self.q1 * (x - 1.0)
                 + 0.5 * self.p1 * (x - 1.0) ** 2)
        return np.where(x <= -1.0, 0.0,
                        np.where(x >= 1.0, right,
                                 self.Q2_spline(np.clip(x, -1.0, 1.0))))

    def e_abs(self, a):
        """E|a - Z| for Z with density kappa (support [-2, 2])."""
        a = np.asarray(a, dtype=float)
        clipped = np.clip(a, -2.0, 2.0)
        ka = self.ka_spline(clipped)
        kb = self.kb_spline(clipped)
        inner = 2.0 * a * ka - 2.0 * kb + self.kb2 - a * self.ka2
        return np.where(a >= 2.0, a * self.ka2 - self.kb2,
                        np.where(a <= -2.0, -a * self.ka2 + self.kb2, inner))


@lru_cache(maxsize=1)
def _tables() -> _BumpTables:
    return _BumpTables()


# ---- mollifier ------------------------------------------------------------


@dataclass(frozen=True)
class Mollifier:
    """Even bump of unit mass scaled to support (-eps, eps)."""

    eps: float = 1.0

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("mollifier width must be positive")

    def rho(self, t):
        return _tables().rho(np.asarray(t, dtype=float) / self.eps) / self.eps

    def cdf(self, t):
        return _tables().P(np.asarray(t, dtype=float) / self.eps)

    @property
    def mass(self) -> float:
        return _tables().p1


# ---- piecewise-linear cutoff ---------------------------------------------


@dataclass(frozen=True)
class CutoffProfile:
    """Ramp b rising 0 -> 1 over (-t0-B, -t0) and its antiderivative v.

    v(t) = integral of b from 0 to t, so v(t) = t wherever b = 1 (t >= -t0)
    and v is constant -t0 - B/2 below the ramp. The sandwich
    max(t, -t0-B) <= v(t) <= max(t, -t0) holds everywhere.
    """

    t0: float
    B: float

    def __post_init__(self):
        if self.t0 < 0:
            raise ValueError("cutoff level t0 must be >= 0")
        if self.B <= 0:
            raise ValueError("ramp width B must be positive")

    def b(self, t):
        t = np.asarray(t, dtype=float)
        return np.clip((t + self.t0 + self.B) / self.B, 0.0, 1.0)

    def v(self, t):
        t = np.asarray(t, dtype=float)
        y = t + self.t0 + self.B
        ramp = y ** 2 / (2.0 * self.B)
        upper = self.B / 2.0 + (t + self.t0)
        w = np.where(t <= -self.t0 - self.B, 0.0,
                     np.where(t >= -self.t0, upper, ramp))
        return w - (self.B / 2.0 + self.t0)


# ---- smoothed cutoff family ----------------------------------------------


@dataclass(frozen=True)
class SmoothedCutoff:
    """Mollified cutoff: value' rises 0 -> 1 across the ramp, smoothly.

    second derivative = (1/(B-4eps)) * (plateau indicator on
    (-t0-B+2eps, -t0-2eps)) convolved with a mollifier of width eps/4;
    value is anchored so value(0) = 0, giving value(t) = t exactly for
    t >= -t0 - eps and a constant below -t0 - B + eps. Requires
    0 < eps < B/8.
    """

    t0: float
    B: float
    eps: float

    def __post_init__(self):
        if self.t0 < 0:
            raise ValueError("cutoff level t0 must be >= 0")
        if self.B <= 0:
            raise ValueError("ramp width B must be positive")
        if not (0.0 < self.eps < self.B / 8.0):
            raise ValueError(
                f"smoothing width must satisfy 0 < eps < B/8 = {self.B / 8}")

    @property
    def _plateau(self):
        a = -self.t0 - self.B + 2.0 * self.eps
        b = -self.t0 - 2.0 * self.eps
        return a, b, self.eps / 4.0, 1.0 / (self.B - 4.0 * self.eps)

    def second(self, t):
        a, b, delta, h = self._plateau
        t = np.asarray(t, dtype=float)
        tb = _tables()
        return h * (tb.P((t - a) / delta) - tb.P((t - b) / delta))

    def first(self, t):
        a, b, delta, h = self._plateau
        t = np.asarray(t, dtype=float)
        tb = _tables()
        return h * delta * (tb.Q((t - a) / delta) - tb.Q((t - b) / delta))

    def value(self, t):
        a, b, delta, h = self._plateau
        t = np.asarray(t, dtype=float)
        tb = _tables()

        def raw(x):
            return h * delta ** 2 * (tb.Q2((x - a) / delta)
                                     - tb.Q2((x - b) / delta))

        return raw(t) - raw(np.asarray(0.0))


# ---- max smoother ---------------------------------------------------------


@dataclass(frozen=True)
class MaxSmoother:
    """max(x, y) regularized by a product mollifier of width eps.

    value(x, y) = double integral of max(x-s, y-u) against
    rho_eps(s) rho_eps(u), computed exactly as
    (x + y + eps * E|(x-y)/eps - Z|) / 2 with Z the difference of two
    independent bump variables. Exact regions: value = x when x - y >= 2 eps,
    value = y when y - x >= 2 eps (short-circuited). value_tensor is the
    direct tensor-quadrature evaluation, kept as a cross-check.
    """

    eps: float

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("smoothing width must be positive")

    def value(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        x, y = np.broadcast_arrays(x, y)
        d = x - y
        inner = 0.5 * (x + y + self.eps * _tables().e_abs(d / self.eps))
        out = np.where(d >= 2.0 * self.eps, x,
                       np.where(d <= -2.0 * self.eps, y, inner))
        return out if out.ndim else float(out)

    def value_tensor(self, x: float, y: float, nodes: int = 48) -> float:
        """Tensor Gauss-Legendre over the support square (cross-check path)."""
        if x - y >= 2.0 * self.eps:
            return float(x)
        if y - x >= 2.0 * self.eps:
            return float(y)
        gx, gw = _leggauss(nodes)
        w = gw * _tables().rho(gx)
        w = w / w.sum()  # renormalize quadrature mass of the bump
        xs = x - self.eps * gx[:, None]
        ys = y - self.eps * gx[None, :]
        vals = np.maximum(xs, ys)
        return float(w @ vals @ w)

    @property
    def max_gap_constant(self) -> float:
        """C with |value(x,y) - max(x,y)| <= C * eps (attained at x = y)."""
        return _tables().gap_constant
