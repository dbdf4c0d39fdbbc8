"""Analytic charge distributions and octupole constructions.

Four element kinds are supported: point charges, circular rings, infinite
straight lines and semi-infinite straight lines.  Potentials are exact for
points and lines; rings are integrated numerically around the loop.

Line potentials are only defined up to an additive constant.  A
:class:`ChargeSet` carries a ``reference_radius`` which fixes that gauge; only
potential differences and derivatives are physical.

All functions accept arrays of evaluation points of shape ``(..., 3)`` and
preserve the floating dtype of the input, so passing ``np.longdouble`` points
gives extended-precision potentials (used by the Taylor extraction).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np
from scipy import integrate

from .constants import EPS0, K_E
from .errors import (
    ConfigError,
    ConstructionInfeasibleError,
    DegenerateConstructionError,
    QuadratureError,
    SingularPointError,
)

KINDS = ("point", "ring", "infinite-line", "semi-infinite-line")

_SINGULAR_REL = 1e-12


def _unit(v) -> tuple[float, float, float]:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if not np.isfinite(n) or n == 0.0:
        raise ConfigError(f"orientation must be a non-zero finite vector, got {v!r}")
    return tuple(float(c) for c in v / n)


@dataclass(frozen=True)
class ChargeElement:
    """One analytic charge element.

    ``strength`` is a charge [C] for points and a linear density [C/m] for
    rings and lines.  ``position`` is the point location, ring centre, an
    anchor point on an infinite line, or the end point of a semi-infinite
    line.  ``orientation`` is the ring axis or the line direction; for a
    semi-infinite line it points from the end point along the charge.
    """

    kind: str
    strength: float
    position: tuple[float, float, float] = (0.0, 0.0, 0.0)
    orientation: tuple[float, float, float] = (0.0, 0.0, 1.0)
    radius: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown charge kind {self.kind!r}; expected one of {KINDS}")
        pos = tuple(float(c) for c in np.asarray(self.position, dtype=float).reshape(3))
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "orientation", _unit(self.orientation))
        object.__setattr__(self, "strength", float(self.strength))
        if self.kind == "ring":
            if self.radius is None or not self.radius > 0:
                raise ConfigError("ring charges need a positive radius")
            object.__setattr__(self, "radius", float(self.radius))
        elif self.radius is not None:
            raise ConfigError(f"{self.kind} elements take no radius")

    @property
    def length_scale(self) -> float:
        return float(np.linalg.norm(self.position)) + (self.radius or 0.0)

    def reflected(self, signs) -> "ChargeElement":
        s = np.asarray(signs, dtype=float)
        return ChargeElement(
            self.kind,
            self.strength,
            tuple(np.asarray(self.position) * s),
            tuple(np.asarray(self.orientation) * s),
            self.radius,
        )

    def scaled(self, factor: float) -> "ChargeElement":
        """Return the element with its strength multiplied by ``factor``."""
        return ChargeElement(self.kind, self.strength * factor, self.position,
                             self.orientation, self.radius)

    def translated(self, offset) -> "ChargeElement":
        return ChargeElement(self.kind, self.strength,
                             tuple(np.asarray(self.position) + np.asarray(offset, dtype=float)),
                             self.orientation, self.radius)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "strength": self.strength,
             "position": list(self.position), "orientation": list(self.orientation)}
        if self.radius is not None:
            d["radius"] = self.radius
        return d


def point(q, position) -> ChargeElement:
    return ChargeElement("point", q, position)


def ring(lam, center, axis, radius) -> ChargeElement:
    return ChargeElement("ring", lam, center, axis, radius)


def line(lam, anchor, direction) -> ChargeElement:
    return ChargeElement("infinite-line", lam, anchor, direction)


def semi_line(lam, end, direction) -> ChargeElement:
    return ChargeElement("semi-infinite-line", lam, end, direction)


@dataclass(frozen=True)
class ChargeSet:
    """An immutable collection of charge elements."""

    elements: tuple[ChargeElement, ...] = ()
    reference_radius: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        if not self.reference_radius > 0:
            raise ConfigError("reference_radius must be positive")

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __add__(self, other: "ChargeSet") -> "ChargeSet":
        return ChargeSet(self.elements + other.elements, self.reference_radius)

    def scaled(self, factor: float) -> "ChargeSet":
        return ChargeSet([e.scaled(factor) for e in self.elements], self.reference_radius)

    def translated(self, offset) -> "ChargeSet":
        return ChargeSet([e.translated(offset) for e in self.elements], self.reference_radius)

    @property
    def length_scale(self) -> float:
        s = max((e.length_scale for e in self.elements), default=0.0)
        return s if s > 0 else 1.0

    def potential(self, points) -> np.ndarray:
        return potential_at(self, points)

    __call__ = potential

    def to_records(self) -> list[dict]:
        return [e.to_dict() for e in self.elements]

    @classmethod
    def from_records(cls, records: Iterable[dict], reference_radius: float = 1.0,
                     length_unit: float = 1.0) -> "ChargeSet":
        """Build a set from plain records, scaling lengths by ``length_unit``.

        Strengths are taken as given (SI).
        """
        elems = []
        for rec in records:
            radius = rec.get("radius")
            elems.append(ChargeElement(
                rec["kind"], rec["strength"],
                tuple(np.asarray(rec.get("position", (0, 0, 0)), dtype=float) * length_unit),
                tuple(rec.get("orientation", (0, 0, 1))),
                None if radius is None else radius * length_unit,
            ))
        return cls(elems, reference_radius)


# --------------------------------------------------------------------------
# element kernels
# --------------------------------------------------------------------------

def _as_points(points):
    p = np.asarray(points)
    if not np.issubdtype(p.dtype, np.floating):
        p = p.astype(float)
    if p.shape[-1] != 3:
        raise ValueError(f"points must have a trailing dimension of 3, got shape {p.shape}")
    return p


def _basis(axis):
    """Two unit vectors orthogonal to ``axis`` (right-handed triad)."""
    n = np.asarray(axis, dtype=float)
    trial = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = trial - n * (trial @ n)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    return e1, e2


@lru_cache(maxsize=None)
def _gauss_loop(npanels: int, order: int = 8):
    """Composite Gauss-Legendre nodes and weights on [0, 2 pi)."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, 2.0 * np.pi, npanels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _ring_quadrature(elem: ChargeElement, p, integrand, tol: float):
    """Integrate ``integrand(d, dist)`` around a ring, doubling panels to ``tol``.

    ``d`` are the vectors from ring points to the evaluation points with shape
    ``(..., nq, 3)``.  Convergence is judged on the whole batch at once so all
    points share a single rule and the result is a smooth function of
    position.
    """
    c = np.asarray(elem.position, dtype=p.dtype)
    e1, e2 = (np.asarray(v, dtype=p.dtype) for v in _basis(elem.orientation))
    R = elem.radius
    prev = None
    err = scale = 0.0
    npanels = 4
    while npanels <= 4096:
        phi, w = _gauss_loop(npanels)
        phi = phi.astype(p.dtype)
        w = w.astype(p.dtype)
        src = c + R * (np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2)
        d = p[..., None, :] - src
        dist = np.sqrt(np.sum(d * d, axis=-1))
        vals = integrand(d, dist)
        val = np.sum(vals * w, axis=-1) * (K_E * elem.strength * R)
        if prev is not None:
            # against the integral of |f| so components that cancel to zero converge
            scale = np.max(np.sum(np.abs(vals) * w, axis=-1)) * abs(K_E * elem.strength * R) \
                if np.size(val) else 0.0
            err = np.max(np.abs(val - prev)) if np.size(val) else 0.0
            if err <= tol * max(scale, np.finfo(float).tiny):
                return val
        prev = val
        npanels *= 2
    achieved = float(err / scale) if scale else float("inf")
    raise QuadratureError(f"ring quadrature did not reach rel. tol {tol:g}", achieved=achieved)


def _check_singular(elem: ChargeElement, p, scale: float):
    d = p - np.asarray(elem.position, dtype=p.dtype)
    tiny = _SINGULAR_REL * scale
    u = np.asarray(elem.orientation, dtype=p.dtype)
    if elem.kind == "point":
        dist = np.sqrt(np.sum(d * d, axis=-1))
    elif elem.kind == "ring":
        along = d @ u
        radial = np.sqrt(np.maximum(np.sum(d * d, axis=-1) - along ** 2, 0))
        dist = np.hypot(radial - elem.radius, along)
    else:
        along = d @ u
        perp = np.sqrt(np.maximum(np.sum(d * d, axis=-1) - along ** 2, 0))
        if elem.kind == "semi-infinite-line":
            dist = np.where(along >= 0, perp, np.sqrt(np.sum(d * d, axis=-1)))
        else:
            dist = perp
    if np.any(dist <= tiny):
        raise SingularPointError(f"evaluation point lies on a {elem.kind} charge")


def _element_potential(elem: ChargeElement, p, rref, tol):
    d = p - np.asarray(elem.position, dtype=p.dtype)
    u = np.asarray(elem.orientation, dtype=p.dtype)
    k = K_E * elem.strength
    if elem.kind == "point":
        return k / np.sqrt(np.sum(d * d, axis=-1))
    if elem.kind == "infinite-line":
        along = d @ u
        perp2 = np.sum(d * d, axis=-1) - along ** 2
        return -k * np.log(perp2 / rref ** 2)  # -(lam/2 pi eps0) ln(rho/rref)
    if elem.kind == "semi-infinite-line":
        return -k * np.log(_semi_s(d, u) / rref)
    # ring
    return _ring_quadrature(elem, p, lambda dd, dist: 1.0 / dist, tol)


def _semi_s(d, u):
    """r + z in the frame where the line lies on the negative z axis."""
    r = np.sqrt(np.sum(d * d, axis=-1))
    z = -(d @ u)
    perp2 = np.maximum(r * r - z * z, 0)
    # r + z loses all precision behind the line end; use rho^2/(r - z) there
    return np.where(z >= 0, r + z, perp2 / np.where(z >= 0, 1.0, r - z))


def potential_at(charges: ChargeSet, points, tol: float = 1e-13) -> np.ndarray:
    """Electrostatic potential [V] of ``charges`` at ``points``.

    Parameters
    ----------
    charges : ChargeSet
    points : array_like, shape (..., 3)
    tol : float
        Relative tolerance for ring quadrature (batch-wise).

    Raises
    ------
    SingularPointError
        If a point lies on a charge element.
    QuadratureError
        If a ring integral fails to converge.
    """
    p = _as_points(points)
    out = np.zeros(p.shape[:-1], dtype=p.dtype)
    scale = charges.length_scale
    for elem in charges.elements:
        _check_singular(elem, p, scale)
        out = out + _element_potential(elem, p, charges.reference_radius, tol)
    return out


def field_at(charges: ChargeSet, points, tol: float = 1e-13) -> np.ndarray:
    """Electric field E = -grad V [V/m] at ``points`` (analytic)."""
    p = _as_points(points)
    out = np.zeros(p.shape, dtype=p.dtype)
    scale = charges.length_scale
    for elem in charges.elements:
        _check_singular(elem, p, scale)
        d = p - np.asarray(elem.position, dtype=p.dtype)
        u = np.asarray(elem.orientation, dtype=p.dtype)
        k = K_E * elem.strength
        if elem.kind == "point":
            r = np.sqrt(np.sum(d * d, axis=-1))[..., None]
            out = out + k * d / r ** 3
        elif elem.kind == "infinite-line":
            perp = d - (d @ u)[..., None] * u
            out = out + 2 * k * perp / np.sum(perp * perp, axis=-1)[..., None]
        elif elem.kind == "semi-infinite-line":
            r = np.sqrt(np.sum(d * d, axis=-1))[..., None]
            s = _semi_s(d, u)[..., None]
            out = out + k * (d / r - u) / s
        else:
            out = out + _ring_field(elem, p, tol)
    return out


def _ring_field(elem, p, tol):
    comps = []
    for i in range(3):
        comps.append(_ring_quadrature(elem, p, lambda dd, dist, i=i: dd[..., i] / dist ** 3, tol))
    return np.stack(comps, axis=-1)


def hessian_at(charges: ChargeSet, points, tol: float = 1e-13) -> np.ndarray:
    """Second-derivative matrix of the potential [V/m^2], shape (..., 3, 3)."""
    p = _as_points(points)
    out = np.zeros(p.shape + (3,), dtype=p.dtype)
    eye = np.eye(3, dtype=p.dtype)
    scale = charges.length_scale
    for elem in charges.elements:
        _check_singular(elem, p, scale)
        d = p - np.asarray(elem.position, dtype=p.dtype)
        u = np.asarray(elem.orientation, dtype=p.dtype)
        k = K_E * elem.strength
        if elem.kind == "point":
            r2 = np.sum(d * d, axis=-1)[..., None, None]
            out = out + k * (3 * d[..., :, None] * d[..., None, :] - r2 * eye) / r2 ** 2.5
        elif elem.kind == "infinite-line":
            perp = d - (d @ u)[..., None] * u
            rho2 = np.sum(perp * perp, axis=-1)[..., None, None]
            proj = eye - np.outer(u, u)
            out = out - 2 * k * (proj / rho2 - 2 * perp[..., :, None] * perp[..., None, :] / rho2 ** 2)
        elif elem.kind == "semi-infinite-line":
            r = np.sqrt(np.sum(d * d, axis=-1))[..., None, None]
            s = _semi_s(d, u)[..., None, None]
            g = d / r[..., 0] - u
            ddt = d[..., :, None] * d[..., None, :]
            out = out - k * ((eye / r - ddt / r ** 3) / s - g[..., :, None] * g[..., None, :] / s ** 2)
        else:
            comps = np.empty(p.shape + (3,), dtype=p.dtype)
            for i in range(3):
                for j in range(i, 3):
                    def f(dd, dist, i=i, j=j):
                        return (3 * dd[..., i] * dd[..., j] - (i == j) * dist ** 2) / dist ** 5
                    comps[..., i, j] = comps[..., j, i] = _ring_quadrature(elem, p, f, tol)
            out = out + comps
    return out


# --------------------------------------------------------------------------
# constructions
# --------------------------------------------------------------------------

_SIGNS = [(sx, sy, sz) for sx in (1, -1) for sy in (1, -1) for sz in (1, -1)]


def symmetrize(charges: ChargeSet) -> ChargeSet:
    """Sum of the eight reflections of ``charges`` in the coordinate planes.

    Elements lying on a mirror plane are duplicated rather than merged; the
    potential is the plain superposition either way.
    """
    return ChargeSet([e.reflected(s) for s in _SIGNS for e in charges.elements],
                     charges.reference_radius)


def rescale_subtract(charges: ChargeSet, f: float) -> ChargeSet:
    """Return ``charges`` minus a copy blown up by the factor ``f``.

    The outer copy has every position multiplied by ``f``; point charges are
    multiplied by ``f**3`` and line and ring densities by ``f**2`` (the same
    volume density evaluated at ``r/f``), then negated.  For a reflection
    symmetric input all second derivatives of the result vanish at the origin
    and every fourth derivative is multiplied by ``1 - 1/f**2``.
    """
    if not f > 0:
        raise ConfigError(f"scale factor must be positive, got {f}")
    if abs(f - 1.0) < 1e-12:
        raise DegenerateConstructionError("f = 1 cancels the distribution identically")
    outer = []
    for e in charges.elements:
        power = 3 if e.kind == "point" else 2
        outer.append(ChargeElement(
            e.kind, -e.strength * f ** power,
            tuple(f * np.asarray(e.position)), e.orientation,
            None if e.radius is None else e.radius * f,
        ))
    return ChargeSet(charges.elements + tuple(outer), charges.reference_radius)


def _direction(theta, phi):
    return np.array([math.sin(theta) * math.cos(phi),
                     math.sin(theta) * math.sin(phi),
                     math.cos(theta)])


def _newton2(residual, x0, *, step=1e-6, tol=1e-10, max_iter=100, max_halvings=8):
    """Damped Newton iteration on a 2-vector residual with a forward-difference
    Jacobian.  Returns the root or None."""
    x = np.asarray(x0, dtype=float)
    r = residual(x)
    for _ in range(max_iter):
        if np.max(np.abs(r)) < tol:
            return x
        J = np.empty((2, 2))
        for j in range(2):
            dx = np.zeros(2)
            dx[j] = step
            J[:, j] = (residual(x + dx) - r) / step
        try:
            delta = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            return None
        lam = 1.0
        for _ in range(max_halvings + 1):
            x_new = x + lam * delta
            r_new = residual(x_new)
            if np.all(np.isfinite(r_new)) and np.linalg.norm(r_new) < np.linalg.norm(r):
                break
            lam *= 0.5
        else:
            return None
        x, r = x_new, r_new
    return x if np.max(np.abs(r)) < tol else None


_DEFAULT_STARTS = [(t, p) for t in (math.pi / 4, math.acos(1 / math.sqrt(3)), math.pi / 3, math.pi / 6)
                   for p in (math.pi / 4, math.pi / 3, math.pi / 6, 3 * math.pi / 8)]


def solve_displacement(base: ChargeSet, *, distance: float = 1.0, initial=None,
                       tol: float = 1e-10) -> np.ndarray:
    """Find the displacement that turns ``symmetrize(base shifted)`` into an octupole.

    The base distribution is moved by ``distance * n`` for a unit vector
    ``n``; the two angles of ``n`` are adjusted until the diagonal second
    derivatives d2V/dx2 and d2V/dy2 of the shifted base vanish at the origin
    (d2V/dz2 then vanishes by Laplace's equation, and reflection symmetry
    removes the rest).

    Parameters
    ----------
    base : ChargeSet
        The distribution before displacement.
    distance : float
        Magnitude of the displacement [m].  For scale-free bases (a point, a
        line ending at the origin) only the direction matters.
    initial : array_like, optional
        Starting direction.  Without it a fixed set of positive-octant
        directions is tried in order.

    Returns
    -------
    numpy.ndarray
        The unit displacement direction.

    Raises
    ------
    ConstructionInfeasibleError
        If no start converges.
    """
    origin = np.zeros(3)

    def residual(angles):
        r0 = distance * _direction(*angles)
        shifted = base.translated(r0)
        try:
            H = hessian_at(shifted, origin)
            g = field_at(shifted, origin)
        except Exception:  # landed on a charge; report as a bad step
            return np.array([np.nan, np.nan])
        norm = np.linalg.norm(H) + np.linalg.norm(g) / distance
        if not norm > 0:
            return np.array([np.nan, np.nan])
        return np.array([H[0, 0], H[1, 1]]) / norm

    starts = []
    if initial is not None:
        v = np.asarray(initial, dtype=float)
        v = v / np.linalg.norm(v)
        starts.append((math.acos(np.clip(v[2], -1, 1)), math.atan2(v[1], v[0])))
    starts += _DEFAULT_STARTS
    for s in starts:
        sol = _newton2(residual, s, tol=tol)
        if sol is not None:
            return _direction(*sol)
    raise ConstructionInfeasibleError("no displacement found that nulls the second derivatives")


def solve_weights(rho0: ChargeSet, rho1: ChargeSet, rho2: ChargeSet,
                  max_condition: float = 1e12) -> tuple[float, float]:
    """Weights (f1, f2) so that ``symmetrize(rho0 + f1 rho1 + f2 rho2)`` is an octupole.

    Solves the 2x2 linear system for d2V/dx2 = d2V/dz2 = 0 at the origin.
    """
    origin = np.zeros(3)
    H = [hessian_at(s, origin) for s in (rho0, rho1, rho2)]
    M = np.array([[H[1][0, 0], H[2][0, 0]], [H[1][2, 2], H[2][2, 2]]])
    rhs = -np.array([H[0][0, 0], H[0][2, 2]])
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > max_condition:
        raise DegenerateConstructionError(f"weight system is singular (condition number {cond:.3g})")
    f1, f2 = np.linalg.solve(M, rhs)
    return float(f1), float(f2)


def combine(rho0: ChargeSet, rho1: ChargeSet, rho2: ChargeSet, f1: float, f2: float) -> ChargeSet:
    """Symmetrized ``rho0 + f1 rho1 + f2 rho2``."""
    return symmetrize(rho0 + rho1.scaled(f1) + rho2.scaled(f2))


# --------------------------------------------------------------------------
# catalogue of octupole configurations
# --------------------------------------------------------------------------

def _p4(c):
    return (35 * c ** 4 - 30 * c ** 2 + 3) / 8


def _p2(c):
    return (3 * c ** 2 - 1) / 2


def _line_quartic(end, direction):
    """z^4 Taylor coefficient at the origin of a unit-density semi-infinite line
    divided by 1/(4 pi eps0), from the Legendre series integrated along the line."""
    end = np.asarray(end, dtype=float)
    u = np.asarray(direction, dtype=float)

    def f(t):
        p = end + t * u
        R = np.linalg.norm(p)
        return _p4(p[2] / R) / R ** 5

    scale = np.linalg.norm(end)
    val = 0.0
    for lo, hi in ((0, scale), (scale, 10 * scale), (10 * scale, np.inf)):
        v, _ = integrate.quad(f, lo, hi, epsabs=0, epsrel=1e-13, limit=200)
        val += v
    return val


CATALOG = (
    "cube-points", "coplanar-points", "ring-pair", "four-ring", "cube-diagonal-lines",
    "two-plane-lines", "four-infinite-lines", "cube-edge-lines", "coplanar-lines",
)


def catalog_octupole(name: str, *, a: float = 1.0, d: float | None = None, f: float = 2.0,
                     q: float = 1.0, lam: float = 1.0, phi: float = math.pi / 4):
    """Closed-form octupole charge configurations.

    Parameters
    ----------
    name : str
        One of :data:`CATALOG`.
    a : float
        Length scale [m] (half the cube side, ring radius, ...).
    d : float, optional
        Axial offset [m] for ``coplanar-points`` (default ``a``) and the
        half-separation of the inner pair for ``four-ring`` (default ``a/2``).
    f : float
        Blow-up factor for the two-group constructions.
    q, lam : float
        Point charge [C] or linear density [C/m].
    phi : float
        Angle between the lines and the z axis for ``two-plane-lines``.

    Returns
    -------
    (ChargeSet, float)
        The configuration and its z^4 coefficient beta [V/m^4] at the origin.
    """
    if not a > 0 or (d is not None and not d > 0) or not f > 0:
        raise ConfigError("catalog lengths and factors must be positive")
    pi = math.pi
    s2, s3 = math.sqrt(2), math.sqrt(3)

    if name == "cube-points":
        cs = symmetrize(ChargeSet([point(q, (a, a, a))]))
        return cs, -7 * q / (81 * s3 * pi * EPS0 * a ** 5)

    if name == "coplanar-points":
        d = a if d is None else d
        inner = ChargeSet([point(q, (sx * a, 0.0, sz * d)) for sx in (1, -1) for sz in (1, -1)])
        cs = rescale_subtract(inner, f)
        R = math.hypot(a, d)
        beta = 4 * K_E * q * _p4(d / R) / R ** 5 * (1 - 1 / f ** 2)
        return cs, beta

    if name == "ring-pair":
        z0 = a / s2
        cs = ChargeSet([ring(lam, (0, 0, z0), (0, 0, 1), a), ring(lam, (0, 0, -z0), (0, 0, 1), a)])
        return cs, -14 * math.sqrt(2 / 3) * lam / (81 * EPS0 * a ** 4)

    if name == "four-ring":
        z1 = a / 2 if d is None else d
        z2 = f * z1
        if abs(z1 - a / s2) < 1e-12 * a or abs(z2 - a / s2) < 1e-12 * a:
            raise ConfigError("a pair at the special separation needs no partner")
        R1, R2 = math.hypot(a, z1), math.hypot(a, z2)
        # second pair density nulls d2V/dz2 at the origin
        lam2 = -lam * (_p2(z1 / R1) / R1 ** 3) / (_p2(z2 / R2) / R2 ** 3)
        cs = ChargeSet([ring(lam, (0, 0, s * z1), (0, 0, 1), a) for s in (1, -1)]
                       + [ring(lam2, (0, 0, s * z2), (0, 0, 1), a) for s in (1, -1)])
        beta = 2 * 2 * pi * a * K_E * (lam * _p4(z1 / R1) / R1 ** 5 + lam2 * _p4(z2 / R2) / R2 ** 5)
        return cs, beta

    if name == "cube-diagonal-lines":
        u = np.ones(3) / s3
        cs = symmetrize(ChargeSet([semi_line(lam, (a, a, a), u)]))
        return cs, -56 * lam / (2592 * pi * EPS0 * a ** 4)

    if name == "two-plane-lines":
        u = np.array([math.sin(phi), 0.0, math.cos(phi)])
        n = solve_displacement(ChargeSet([semi_line(lam, (0, 0, 0), u)]))
        n = n / n[1]  # y = 1 sets the scale, as in the tabulated solutions
        end = a * n
        cs = symmetrize(ChargeSet([semi_line(lam, end, u)]))
        beta = K_E * lam * sum(_line_quartic(end * np.array(s), u * np.array(s)) for s in _SIGNS)
        return cs, beta

    if name == "four-infinite-lines":
        # lines parallel to y through the corners of a square of side 2a whose
        # diagonals lie on the x and z axes
        r = s2 * a
        corners = [(r, 0, 0), (-r, 0, 0), (0, 0, r), (0, 0, -r)]
        cs = ChargeSet([line(lam, c, (0, 1, 0)) for c in corners])
        return cs, lam / (8 * pi * EPS0 * a ** 4)

    if name == "cube-edge-lines":
        # the four cube edges parallel to x
        cs = ChargeSet([line(lam, (0, sy * a, sz * a), (1, 0, 0)) for sy in (1, -1) for sz in (1, -1)])
        return cs, -lam / (8 * pi * EPS0 * a ** 4)

    if name == "coplanar-lines":
        inner = ChargeSet([semi_line(lam, (sx * a, 0.0, sz * a), (sx, 0.0, 0.0))
                           for sx in (1, -1) for sz in (1, -1)])
        cs = rescale_subtract(inner, f)
        beta = (32 - 25 * s2) * lam / (128 * pi * EPS0 * a ** 4) * (1 - 1 / f ** 2)
        return cs, beta

    raise ConfigError(f"unknown catalog entry {name!r}; known: {', '.join(CATALOG)}")
