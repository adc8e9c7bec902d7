"""Model domains with pole functions and weighted sublevel integrals.

Three bounded models are supported: the unit disk, the unit ball in C^n,
and polydiscs with arbitrary radii.  Each carries a plurisubharmonic pole
function psi with a logarithmic singularity along a distinguished analytic
set: the origin for the disk and ball, and for a polydisc either the
origin or a coordinate subspace {last k coordinates = 0}.

On the polydisc with pole codimension k,

    psi(z) = 2k * max_i log(|z_i| / R_i)   (max over the k pole coordinates)

and on the ball psi(z) = 2n * log|z|.  The sublevel set {psi < -t} shrinks
the pole-block radii by e^{-t/(2k)} and leaves free coordinates alone, so
its Lebesgue measure scales exactly like e^{-t}.

Weighted integrals over sublevel sets and strips come in two flavors: a
one-dimensional reduction for radial data (everything collapses to single
integrals in s = -psi, with angular factors in closed form) and raw
tensor-product grids used as an independent cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial, pi
from typing import Callable, Optional

import numpy as np
from scipy.special import gammainc

from .quadrature import TailBound, integrate, panel_nodes
from .weights import ClassReport, WeightFunction


class DomainError(ValueError):
    """Invalid domain data or an unsupported domain/operation pairing."""


class RefinementError(RuntimeError):
    """Grid refinement failed to stabilize a raw integral."""


# ---------------------------------------------------------------------------
# weight exponents


@dataclass(frozen=True)
class PhiSpec:
    """Weight exponent; integrals carry the density e^{-phi}.

    tag "zero": phi = 0.
    tag "radial_power": phi(z) = coeff * |z|^2 (squared Euclidean norm).
    tag "log_modulus": phi(z) = 2 log|z^monomial|, a pole along the axes.
    """

    tag: str = "zero"
    coeff: float = 0.0
    monomial: tuple = ()

    def __post_init__(self):
        if self.tag not in ("zero", "radial_power", "log_modulus"):
            raise DomainError(f"unknown weight tag {self.tag!r}")
        if self.tag == "radial_power" and not np.isfinite(self.coeff):
            raise DomainError("radial_power needs a finite coefficient")
        mono = tuple(int(m) for m in self.monomial)
        if self.tag == "log_modulus":
            if not mono or any(m < 0 for m in mono):
                raise DomainError("log_modulus needs nonnegative exponents")
        object.__setattr__(self, "monomial", mono)
        object.__setattr__(self, "coeff", float(self.coeff))

    @classmethod
    def zero(cls) -> "PhiSpec":
        return cls()

    @classmethod
    def radial_power(cls, coeff: float) -> "PhiSpec":
        return cls(tag="radial_power", coeff=float(coeff))

    @classmethod
    def log_modulus(cls, monomial) -> "PhiSpec":
        return cls(tag="log_modulus", monomial=tuple(monomial))

    def values(self, z: np.ndarray) -> np.ndarray:
        """phi at points of shape (npts, n)."""
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        if self.tag == "zero":
            return np.zeros(z.shape[0])
        if self.tag == "radial_power":
            return self.coeff * np.sum(np.abs(z) ** 2, axis=-1)
        self._check_dim(z.shape[-1])
        with np.errstate(divide="ignore"):
            out = np.zeros(z.shape[0])
            for i, m in enumerate(self.monomial):
                if m:
                    out += 2.0 * m * np.log(np.abs(z[:, i]))
        return out

    def weight_values(self, z: np.ndarray) -> np.ndarray:
        """e^{-phi} at points; may be +inf on the poles of a log_modulus tag."""
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        if self.tag == "zero":
            return np.ones(z.shape[0])
        if self.tag == "radial_power":
            return np.exp(-self.values(z))
        self._check_dim(z.shape[-1])
        with np.errstate(divide="ignore"):
            out = np.ones(z.shape[0])
            for i, m in enumerate(self.monomial):
                if m:
                    out = out * np.abs(z[:, i]) ** (-2.0 * m)
        return out

    def shift_exponents(self, n: int) -> tuple:
        """Per-coordinate monomial-degree shift absorbed into radial moments."""
        if self.tag != "log_modulus":
            return (0,) * n
        self._check_dim(n)
        return self.monomial

    def radial_coeff(self) -> float:
        return self.coeff if self.tag == "radial_power" else 0.0

    def _check_dim(self, n: int) -> None:
        if self.tag == "log_modulus" and len(self.monomial) != n:
            raise DomainError(
                f"log_modulus exponents have length {len(self.monomial)}, domain has n={n}")


# ---------------------------------------------------------------------------
# domains


@dataclass(frozen=True)
class DomainModel:
    """A model domain together with its pole function psi."""

    kind: str
    n: int
    radii: tuple
    pole_codim: int

    def __post_init__(self):
        if self.kind not in ("disk", "ball", "polydisc"):
            raise DomainError(f"unknown domain kind {self.kind!r}")
        if self.n < 1:
            raise DomainError("dimension must be at least 1")
        radii = tuple(float(r) for r in self.radii)
        if len(radii) != self.n or any(not np.isfinite(r) or r <= 0 for r in radii):
            raise DomainError("need one positive finite radius per coordinate")
        if not 1 <= self.pole_codim <= self.n:
            raise DomainError("pole codimension must lie in [1, n]")
        if self.kind == "ball" and any(r != 1.0 for r in radii):
            raise DomainError("the ball model is the unit ball")
        if self.kind == "ball" and self.pole_codim != self.n:
            raise DomainError("the ball model only carries the point pole")
        if self.kind == "disk" and self.n != 1:
            raise DomainError("the disk model is one-dimensional")
        object.__setattr__(self, "radii", radii)

    @classmethod
    def disk(cls) -> "DomainModel":
        return cls(kind="disk", n=1, radii=(1.0,), pole_codim=1)

    @classmethod
    def ball(cls, n: int) -> "DomainModel":
        if n == 1:
            return cls.disk()
        return cls(kind="ball", n=n, radii=(1.0,) * n, pole_codim=n)

    @classmethod
    def polydisc(cls, n: int, radii=None) -> "DomainModel":
        radii = (1.0,) * n if radii is None else tuple(radii)
        return cls(kind="polydisc", n=n, radii=radii, pole_codim=n)

    @classmethod
    def slice_pole(cls, n: int, codim: int, radii=None) -> "DomainModel":
        """Polydisc whose pole set is the subspace {last codim coordinates = 0}."""
        radii = (1.0,) * n if radii is None else tuple(radii)
        return cls(kind="polydisc", n=n, radii=radii, pole_codim=codim)

    # -- geometry ----------------------------------------------------------

    @property
    def free_count(self) -> int:
        return self.n - self.pole_codim

    def psi(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        single = z.ndim == 1
        z2 = np.atleast_2d(z)
        if z2.shape[-1] != self.n:
            raise DomainError(f"points have {z2.shape[-1]} coordinates, expected {self.n}")
        with np.errstate(divide="ignore"):
            if self.kind == "ball":
                val = 2.0 * self.n * np.log(np.linalg.norm(z2, axis=-1))
            else:
                k = self.pole_codim
                scaled = np.abs(z2[:, self.n - k:]) / np.asarray(self.radii[self.n - k:])
                val = 2.0 * k * np.log(np.max(scaled, axis=-1))
        return float(val[0]) if single else val

    def contains(self, z: np.ndarray) -> np.ndarray:
        z2 = np.atleast_2d(np.asarray(z, dtype=complex))
        if self.kind == "ball":
            return np.linalg.norm(z2, axis=-1) < 1.0
        return np.all(np.abs(z2) < np.asarray(self.radii), axis=-1)

    def pole_scale(self, t: float) -> float:
        """Radial shrink factor of the pole block on {psi < -t}."""
        return float(np.exp(-t / (2.0 * self.pole_codim)))


# ---------------------------------------------------------------------------
# radial integrands


@dataclass(frozen=True)
class RadialProfile:
    """An integrand h(-psi) depending on the pole function only.

    ``tail`` must bound h(s) e^{-s} (the profile against the natural
    e^{-s} decay of sublevel measure) and is required whenever the
    integration range is unbounded.
    """

    fn: Callable
    tail: Optional[TailBound] = None
    breakpoints: tuple = ()

    def __call__(self, s):
        return np.asarray(self.fn(np.asarray(s, dtype=float)), dtype=float)

    @classmethod
    def from_weight(cls, weight: WeightFunction) -> "RadialProfile":
        return cls(fn=weight.__call__, tail=weight.tail,
                   breakpoints=weight.breakpoints)


def unit_profile() -> RadialProfile:
    """The constant profile 1, i.e. plain weighted Lebesgue measure."""
    return RadialProfile(fn=lambda s: np.ones_like(np.asarray(s, dtype=float)),
                         tail=TailBound(1.0, 1.0))


def _split_integrate(fn, a: float, b: float, points, rtol: float) -> float:
    cuts = [a] + [float(p) for p in sorted(points) if a < p < b] + [b]
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi > lo:
            total += integrate(fn, lo, hi, rtol=rtol)
    return total


def _profile_cutoff(dom: DomainModel, phi: PhiSpec, profile: RadialProfile,
                    t: float) -> float:
    if profile.tail is None:
        raise DomainError("integration to infinity needs a profile tail bound")
    slack = 5.0
    if phi.tag == "radial_power":
        slack += abs(phi.coeff) * sum(r * r for r in dom.radii)
    return profile.tail.cutoff(t, rtol=1e-14) + slack


def _coord_moment(alpha_eff: float, a: float, x) -> np.ndarray:
    """Incomplete radial moment of one disk coordinate.

    Computes int_0^x r^(2*alpha_eff+1) e^{-a r^2} dr, vectorized over x.
    Returns +inf when the exponent makes the integral divergent at 0.
    """
    x = np.asarray(x, dtype=float)
    if alpha_eff <= -1:
        return np.full_like(x, np.inf)
    if a == 0.0:
        p = 2.0 * alpha_eff + 2.0
        return x ** p / p
    if a > 0.0 and float(alpha_eff).is_integer() and alpha_eff >= 0:
        m = int(alpha_eff)
        return factorial(m) / (2.0 * a ** (m + 1)) * gammainc(m + 1, a * x * x)
    flat = np.ravel(x)
    vals = np.array([
        integrate(lambda r: r ** (2.0 * alpha_eff + 1.0) * np.exp(-a * r * r),
                  0.0, xi, rtol=1e-12) if xi > 0 else 0.0
        for xi in flat])
    return vals.reshape(x.shape)


def _ball_weight_factor(phi: PhiSpec, n: int):
    if phi.tag == "zero":
        return lambda s: 1.0
    if phi.tag == "radial_power":
        a = phi.coeff
        return lambda s: np.exp(-a * np.exp(-s / n))
    raise DomainError("log_modulus weights on the ball need the raw grid path")


def diagonal_moment(dom: DomainModel, phi: PhiSpec, alpha, profile: RadialProfile,
                    t: float, t_hi: Optional[float] = None,
                    rtol: float = 1e-11) -> float:
    """Weighted moment of |z^alpha|^2 against profile(-psi) over {psi < -t}.

    With ``t_hi`` given, the region becomes the strip {t < -psi < t_hi}.
    The angular integrals are exact; only a single s-integral is done
    numerically.  Returns +inf when the weight makes the moment diverge.
    """
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != dom.n or any(a < 0 for a in alpha):
        raise DomainError(f"bad moment index {alpha} for n={dom.n}")
    s_hi = float(t_hi) if t_hi is not None else _profile_cutoff(dom, phi, profile, t)
    if s_hi <= t:
        return 0.0

    if dom.kind == "ball":
        wfac = _ball_weight_factor(phi, dom.n)
        k = sum(alpha)
        const = pi ** dom.n * np.prod([factorial(a) for a in alpha]) \
            / (dom.n * factorial(dom.n - 1 + k))
        rate = 1.0 + k / dom.n

        def integrand(s):
            return np.exp(-rate * s) * wfac(s) * profile(s)

        return float(const * _split_integrate(integrand, t, s_hi,
                                              profile.breakpoints, rtol))

    # disk / polydisc: per-coordinate factorization plus pole-block sectors
    shifts = phi.shift_exponents(dom.n)
    a = phi.radial_coeff()
    eff = [alpha[i] - shifts[i] for i in range(dom.n)]
    if any(e <= -1 for e in eff):
        return float("inf")
    nf = dom.free_count
    k = dom.pole_codim

    free_factor = 1.0
    for i in range(nf):
        free_factor *= 2.0 * pi * float(_coord_moment(eff[i], a, dom.radii[i]))

    pole_radii = dom.radii[nf:]
    pole_eff = eff[nf:]
    total = 0.0
    for j in range(k):
        aj = pole_eff[j]
        rj = pole_radii[j]

        def sector(s, aj=aj, rj=rj, j=j):
            x = np.exp(-s / (2.0 * k))
            out = rj ** (2 * aj + 2) / (2.0 * k) \
                * np.exp(-(aj + 1.0) * s / k) * profile(s)
            if a != 0.0:
                out = out * np.exp(-a * (rj * x) ** 2)
            for i in range(k):
                if i != j:
                    out = out * _coord_moment(pole_eff[i], a, pole_radii[i] * x)
            return out

        total += _split_integrate(sector, t, s_hi, profile.breakpoints, rtol)
    return float(free_factor * (2.0 * pi) ** k * total)


# ---------------------------------------------------------------------------
# raw tensor grids


@dataclass(frozen=True)
class QuadratureGrid:
    """Flattened tensor grid: complex points (npts, n) and positive weights."""

    points: np.ndarray
    weights: np.ndarray
    label: str = ""

    @property
    def size(self) -> int:
        return self.points.shape[0]


def _radial_axis(r_lo: float, r_hi: float, nodes: int):
    panels = max(1, int(np.ceil(nodes / 32)))
    return panel_nodes(r_lo, r_hi, panels, nodes=min(nodes, 32))


def _disk_cloud(r_lo: float, r_hi: float, n_rad: int, n_ang: int):
    """Point cloud for one coordinate disk or annulus, weights include r dr dtheta."""
    r, wr = _radial_axis(r_lo, r_hi, n_rad)
    theta = 2.0 * pi * np.arange(n_ang) / n_ang
    pts = (r[:, None] * np.exp(1j * theta)[None, :]).ravel()
    wts = (wr[:, None] * r[:, None] * (2.0 * pi / n_ang)
           * np.ones(n_ang)[None, :]).ravel()
    return pts, wts


def _combine_clouds(clouds):
    pts = clouds[0][0][:, None]
    wts = clouds[0][1]
    for p, w in clouds[1:]:
        m = p.shape[0]
        pts = np.concatenate([np.repeat(pts, m, axis=0),
                              np.tile(p, pts.shape[0])[:, None]], axis=1)
        wts = (wts[:, None] * w[None, :]).ravel()
    return pts, wts


def build_sublevel_grid(dom: DomainModel, t: float, radial_nodes: int = 64,
                        angular_nodes: Optional[int] = None) -> QuadratureGrid:
    """Tensor quadrature grid on the sublevel region {psi < -t}."""
    n_ang = angular_nodes or min(radial_nodes, 32)
    if dom.kind == "ball":
        return _ball_grid(dom, dom.pole_scale(t), 0.0, radial_nodes, n_ang)
    scale = dom.pole_scale(t)
    clouds = []
    for i, r in enumerate(dom.radii):
        outer = r * scale if i >= dom.free_count else r
        clouds.append(_disk_cloud(0.0, outer, radial_nodes, n_ang))
    pts, wts = _combine_clouds(clouds)
    return QuadratureGrid(points=pts, weights=wts,
                          label=f"sublevel t={t:g} res={radial_nodes}x{n_ang}")


def build_strip_grid(dom: DomainModel, t: float, width: float = 1.0,
                     radial_nodes: int = 64,
                     angular_nodes: Optional[int] = None) -> QuadratureGrid:
    """Tensor grid on the strip {t < -psi < t+width}.

    Supported where the strip is a product region: disk, ball, and
    polydiscs with pole codimension 1.
    """
    n_ang = angular_nodes or min(radial_nodes, 32)
    if width <= 0:
        raise DomainError("strip width must be positive")
    if dom.kind == "ball":
        return _ball_grid(dom, dom.pole_scale(t), dom.pole_scale(t + width),
                          radial_nodes, n_ang)
    if dom.pole_codim != 1:
        raise DomainError("raw strip grids need pole codimension 1; "
                          "use the radial path for deeper poles")
    clouds = []
    for i, r in enumerate(dom.radii):
        if i == dom.n - 1:
            clouds.append(_disk_cloud(r * dom.pole_scale(t + width),
                                      r * dom.pole_scale(t), radial_nodes, n_ang))
        else:
            clouds.append(_disk_cloud(0.0, r, radial_nodes, n_ang))
    pts, wts = _combine_clouds(clouds)
    return QuadratureGrid(points=pts, weights=wts,
                          label=f"strip t={t:g} w={width:g} res={radial_nodes}x{n_ang}")


def _ball_grid(dom: DomainModel, r_hi: float, r_lo: float,
               radial_nodes: int, n_ang: int) -> QuadratureGrid:
    if dom.n != 2:
        raise DomainError("raw ball grids are implemented for n = 2 only")
    v, wv = _radial_axis(r_lo, r_hi, radial_nodes)
    gnodes = max(8, radial_nodes // 2)
    g, wg = _radial_axis(0.0, pi / 2.0, gnodes)
    th = 2.0 * pi * np.arange(n_ang) / n_ang
    vv, gg, t1, t2 = np.meshgrid(v, g, th, th, indexing="ij")
    wvv, wgg = np.meshgrid(wv, wg, indexing="ij")
    z1 = vv * np.cos(gg) * np.exp(1j * t1)
    z2 = vv * np.sin(gg) * np.exp(1j * t2)
    jac = vv ** 3 * np.cos(gg) * np.sin(gg)
    w = (wvv[:, :, None, None] * wgg[:, :, None, None]
         * jac * (2.0 * pi / n_ang) ** 2)
    pts = np.stack([z1.ravel(), z2.ravel()], axis=1)
    return QuadratureGrid(points=pts, weights=w.ravel(),
                          label=f"ball res={radial_nodes}x{gnodes}x{n_ang}")


# ---------------------------------------------------------------------------
# public integral operations


def _raw_value(dom, t, t_hi, integrand, phi, radial_nodes, angular_nodes):
    if t_hi is None:
        grid = build_sublevel_grid(dom, t, radial_nodes, angular_nodes)
    else:
        grid = build_strip_grid(dom, t, t_hi - t, radial_nodes, angular_nodes)
    vals = np.asarray(integrand(grid.points), dtype=float)
    vals = vals * phi.weight_values(grid.points)
    return float(vals @ grid.weights)


def _region_integral(dom, t, integrand, phi, t_hi, resolution, angular_nodes,
                     refine_rtol):
    phi = phi if phi is not None else PhiSpec.zero()
    if isinstance(integrand, RadialProfile):
        return diagonal_moment(dom, phi, (0,) * dom.n, integrand, t, t_hi=t_hi)
    if not callable(integrand):
        raise DomainError("integrand must be a RadialProfile or a callable on points")
    coarse = _raw_value(dom, t, t_hi, integrand, phi, resolution, angular_nodes)
    if refine_rtol is None:
        return coarse
    fine_ang = None if angular_nodes is None else min(2 * angular_nodes, 256)
    fine = _raw_value(dom, t, t_hi, integrand, phi, 2 * resolution, fine_ang)
    scale = max(abs(fine), abs(coarse), 1e-300)
    if abs(fine - coarse) > refine_rtol * scale:
        raise RefinementError(
            f"raw integral moved by {abs(fine - coarse):.3e} "
            f"(relative {abs(fine - coarse) / scale:.3e}) under refinement")
    return fine


def sublevel_integral(dom: DomainModel, t: float, integrand, *,
                      phi: Optional[PhiSpec] = None, resolution: int = 64,
                      angular_nodes: Optional[int] = None,
                      refine_rtol: Optional[float] = None) -> float:
    """Integral of the integrand times e^{-phi} over {psi < -t}.

    A RadialProfile integrand uses the exact one-dimensional reduction;
    a callable on points uses the raw tensor grid, optionally validated
    by doubling the resolution (RefinementError on failure).
    """
    return _region_integral(dom, t, integrand, phi, None, resolution,
                            angular_nodes, refine_rtol)


def strip_integral(dom: DomainModel, t: float, integrand, *, width: float = 1.0,
                   phi: Optional[PhiSpec] = None, resolution: int = 64,
                   angular_nodes: Optional[int] = None,
                   refine_rtol: Optional[float] = None) -> float:
    """Integral of the integrand times e^{-phi} over the strip {t < -psi < t+width}."""
    if width <= 0:
        raise DomainError("strip width must be positive")
    return _region_integral(dom, t, integrand, phi, t + width, resolution,
                            angular_nodes, refine_rtol)


# ---------------------------------------------------------------------------
# compact lower-bound check


def check_compact_floor(dom: DomainModel, phi: PhiSpec, weight: WeightFunction,
                        *, compact_radius: float = 0.9,
                        pole_clearance: float = 1e-3, samples: int = 4096,
                        floor: float = 0.0, seed: int = 0) -> ClassReport:
    """Sample e^{-phi} c(-psi) on a compact away from the pole set.

    The compact is the closed region scaled by ``compact_radius`` with a
    ``pole_clearance`` neighborhood of the pole set removed.  Reports the
    sampled minimum and where it occurs; the class flag asks for a strictly
    positive floor.
    """
    if not 0 < compact_radius < 1:
        raise DomainError("compact_radius must lie in (0, 1)")
    if not 0 < pole_clearance < compact_radius:
        raise DomainError("pole_clearance must lie in (0, compact_radius)")
    rng = np.random.default_rng(seed)
    if dom.kind == "ball":
        raw = rng.standard_normal((samples, 2 * dom.n))
        dirs = raw[:, ::2] + 1j * raw[:, 1::2]
        dirs /= np.linalg.norm(dirs, axis=1)[:, None]
        radius = compact_radius * rng.random(samples) ** (1.0 / (2 * dom.n))
        z = dirs * radius[:, None]
        clear = np.linalg.norm(z, axis=1) >= pole_clearance
    else:
        r = np.asarray(dom.radii)
        radius = compact_radius * r[None, :] * np.sqrt(rng.random((samples, dom.n)))
        angle = 2.0 * pi * rng.random((samples, dom.n))
        z = radius * np.exp(1j * angle)
        k = dom.pole_codim
        scaled = np.abs(z[:, dom.n - k:]) / r[None, dom.n - k:]
        clear = np.max(scaled, axis=1) >= pole_clearance
    z = z[clear]
    if z.shape[0] == 0:
        raise DomainError("no sample points survived the pole clearance")
    vals = phi.weight_values(z) * weight(-dom.psi(z))
    idx = int(np.argmin(vals))
    lowest = float(vals[idx])
    ok = bool(np.isfinite(lowest) and lowest > floor)
    return ClassReport(
        in_class=ok,
        condition_flags={"positive_floor_on_compacts": ok},
        witness={"value": lowest,
                 "point": [complex(c) for c in z[idx]],
                 "samples": int(z.shape[0])},
        tolerances={"compact_radius": compact_radius,
                    "pole_clearance": pole_clearance, "floor": floor},
    )
