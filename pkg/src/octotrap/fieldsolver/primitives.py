"""Electrode primitives: parametric surfaces, exact signed distances and areas.

Every primitive is described in a local frame and placed by a pose: the
local z axis is ``axis`` and the local x axis is ``ref`` (orthogonalized).

=====================  ==============================================================
kind                   dimensions (local frame)
=====================  ==============================================================
sphere                 radius
capsule                radius, length (between hemisphere centres, along z)
cuboid                 size = (lx, ly, lz), centred
slab                   thickness (along y), length (along +x from the rounded edge),
                       width (along z); the x = 0 edge is a hemicylinder of radius
                       thickness/2 about the z axis.  thickness 0 gives a sheet.
half-plane-slab        slab with length and width defaulting to 20 and 40 scale units
torus                  tube_radius, ring_radius (ring in the x-y plane)
rectangular-loop       tube_radius, lx, ly (centre-line sides), corner_radius
=====================  ==============================================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from .mesh import Patch, SizeField, SurfaceMesh, mesh_patches

PI = math.pi
Q = PI / 4


def _frame(axis, ref):
    ez = np.asarray(axis, float)
    ez = ez / np.linalg.norm(ez)
    ex = np.asarray(ref, float) if ref is not None else None
    if ex is None or abs(np.dot(ex, ez)) > 0.999 * np.linalg.norm(ex):
        trial = np.array([1.0, 0, 0]) if abs(ez[0]) < 0.9 else np.array([0, 1.0, 0])
        ex = trial
    ex = ex - ez * (ex @ ez)
    ex /= np.linalg.norm(ex)
    ey = np.cross(ez, ex)
    return np.stack([ex, ey, ez], axis=1)


def _stack(x, y, z):
    x, y, z = np.broadcast_arrays(x, y, z)
    return np.stack([x, y, z], axis=-1)


# --- surface pieces in local coordinates ----------------------------------

def _cube_face(k, s, R, center=(0.0, 0.0, 0.0), v_half=False):
    """Equiangular cube-sphere face ``s * e_k`` of a sphere of radius R.

    With ``v_half`` only the half towards +z is kept (hemisphere side faces).
    """
    a, b = [(1, 2), (2, 0), (0, 1)][k]
    c = np.asarray(center, float)

    def fun(u, v):
        u, v = np.broadcast_arrays(u, v)
        p = np.zeros(u.shape + (3,))
        p[..., k] = s
        p[..., a] = np.tan(u)
        p[..., b] = np.tan(v)
        return R * p / np.linalg.norm(p, axis=-1, keepdims=True) + c

    return fun


def _sphere_patches(R, center=(0, 0, 0), n=2):
    return [Patch(_cube_face(k, s, R, center), (-Q, Q), (-Q, Q), n_init=(n, n))
            for k in range(3) for s in (1.0, -1.0)]


def _hemisphere_patches(R, z0, sign, n=2):
    """Hemisphere of radius R centred at (0,0,z0) bulging towards sign*z."""
    c = (0.0, 0.0, z0)
    patches = [Patch(_cube_face(2, sign, R, c), (-Q, Q), (-Q, Q), n_init=(n, n))]
    # side faces: for k = 0 (x): (a, b) = (y, z); for k = 1 (y): (a, b) = (z, x)
    for s in (1.0, -1.0):
        rng = (0.0, Q) if sign > 0 else (-Q, 0.0)
        patches.append(Patch(_cube_face(0, s, R, c), (-Q, Q), rng, n_init=(n, max(1, n // 2))))
        patches.append(Patch(_cube_face(1, s, R, c), rng, (-Q, Q), n_init=(max(1, n // 2), n)))
    return patches


def _cylinder_patch(r, z0, z1, phi0=0.0, phi1=2 * PI, sharp=(False, False, False, False), n=4):
    def fun(phi, z):
        return _stack(r * np.cos(phi), r * np.sin(phi), z + 0 * phi)
    return Patch(fun, (phi0, phi1), (z0, z1), sharp=sharp, n_init=(n, 1))


def _rect_patch(origin, eu, ev, lu, lv, sharp=(True, True, True, True), n=(1, 1)):
    o, eu, ev = (np.asarray(x, float) for x in (origin, eu, ev))

    def fun(s, t):
        s, t = np.broadcast_arrays(s, t)
        return o + s[..., None] * eu + t[..., None] * ev
    return Patch(fun, (0.0, lu), (0.0, lv), sharp=sharp, n_init=n)


def _torus_patch(r, R, phi0=0.0, phi1=2 * PI, center=(0.0, 0.0), n=(4, 4)):
    cx, cy = center

    def fun(phi, th):
        rho = R + r * np.cos(th)
        return _stack(cx + rho * np.cos(phi), cy + rho * np.sin(phi), r * np.sin(th))
    return Patch(fun, (phi0, phi1), (0.0, 2 * PI), n_init=n)


# --- primitives ------------------------------------------------------------

@dataclass
class Primitive:
    kind: str
    dims: dict
    position: tuple = (0.0, 0.0, 0.0)
    axis: tuple = (0.0, 0.0, 1.0)
    ref: tuple | None = None
    R: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown primitive kind {self.kind!r}; expected one of {sorted(KINDS)}")
        self.position = np.asarray(self.position, float).reshape(3)
        self.R = _frame(self.axis, self.ref)
        self.dims = dict(self.dims)
        KINDS[self.kind].validate(self.dims)

    # frame helpers
    def to_global(self, p):
        return p @ self.R.T + self.position

    def to_local(self, p):
        return (np.asarray(p, float) - self.position) @ self.R

    def patches(self):
        return KINDS[self.kind].patches(self.dims)

    def sdf(self, p):
        """Signed distance to the surface (negative inside; sheets are never inside)."""
        return KINDS[self.kind].sdf(self.dims, self.to_local(p))

    @property
    def is_sheet(self):
        return KINDS[self.kind].is_sheet(self.dims)

    @property
    def has_sharp_edges(self):
        return self.kind == "cuboid"

    def exact_area(self):
        return KINDS[self.kind].area(self.dims)

    def sampling_points(self):
        """Points where the surface field is sampled for the maximum-field estimate
        (only for primitives with sharp edges)."""
        pts = KINDS[self.kind].sampling(self.dims)
        return self.to_global(pts) if len(pts) else np.empty((0, 3))

    def mesh(self, size: SizeField, owner: int = 0) -> SurfaceMesh:
        return mesh_patches(self.patches(), self.to_global, size, sdf=self.sdf, owner=owner,
                            sheet=self.is_sheet)

    def bounding_box(self):
        pts = KINDS[self.kind].corners(self.dims)
        g = self.to_global(pts)
        return g.min(axis=0), g.max(axis=0)


def _positive(dims, *names):
    for n in names:
        if n not in dims:
            raise ConfigError(f"missing dimension {n!r}")
        if not dims[n] > 0:
            raise ConfigError(f"dimension {n!r} must be positive, got {dims[n]}")


def _box_corners(hx, hy, hz):
    return np.array([[sx * hx, sy * hy, sz * hz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)])


class _Sphere:
    @staticmethod
    def validate(d):
        _positive(d, "radius")

    @staticmethod
    def patches(d):
        return _sphere_patches(d["radius"])

    @staticmethod
    def sdf(d, p):
        return np.linalg.norm(p, axis=-1) - d["radius"]

    is_sheet = staticmethod(lambda d: False)
    area = staticmethod(lambda d: 4 * PI * d["radius"] ** 2)
    sampling = staticmethod(lambda d: np.empty((0, 3)))
    corners = staticmethod(lambda d: _box_corners(d["radius"], d["radius"], d["radius"]))


class _Capsule:
    @staticmethod
    def validate(d):
        _positive(d, "radius")
        if d.get("length", 0) < 0:
            raise ConfigError("capsule length must be non-negative")

    @staticmethod
    def patches(d):
        r, L = d["radius"], d.get("length", 0.0)
        h = L / 2
        out = _hemisphere_patches(r, h, +1) + _hemisphere_patches(r, -h, -1)
        if L > 0:
            out.append(_cylinder_patch(r, -h, h))
        return out

    @staticmethod
    def sdf(d, p):
        h = d.get("length", 0.0) / 2
        z = np.clip(p[..., 2], -h, h)
        q = p.copy()
        q[..., 2] = p[..., 2] - z
        return np.linalg.norm(q, axis=-1) - d["radius"]

    is_sheet = staticmethod(lambda d: False)
    area = staticmethod(lambda d: 4 * PI * d["radius"] ** 2 + 2 * PI * d["radius"] * d.get("length", 0.0))
    sampling = staticmethod(lambda d: np.empty((0, 3)))
    corners = staticmethod(lambda d: _box_corners(d["radius"], d["radius"], d["radius"] + d.get("length", 0) / 2))


class _Cuboid:
    @staticmethod
    def validate(d):
        if "size" not in d or len(d["size"]) != 3 or min(d["size"]) <= 0:
            raise ConfigError("cuboid needs size = [lx, ly, lz] with positive entries")

    @staticmethod
    def patches(d):
        lx, ly, lz = d["size"]
        L = np.array([lx, ly, lz])
        out = []
        for k in range(3):
            a, b = [(1, 2), (2, 0), (0, 1)][k]
            for s in (1.0, -1.0):
                o = -L / 2
                o[k] = s * L[k] / 2
                eu = np.zeros(3)
                ev = np.zeros(3)
                eu[a] = 1
                ev[b] = 1
                out.append(_rect_patch(o, eu, ev, L[a], L[b]))
        return out

    @staticmethod
    def sdf(d, p):
        h = np.asarray(d["size"], float) / 2
        q = np.abs(p) - h
        return np.linalg.norm(np.maximum(q, 0), axis=-1) + np.minimum(q.max(axis=-1), 0)

    is_sheet = staticmethod(lambda d: False)

    @staticmethod
    def area(d):
        a, b, c = d["size"]
        return 2 * (a * b + b * c + c * a)

    @staticmethod
    def sampling(d):
        """Face centres, plus points inset by the smallest dimension from each
        edge midpoint (clamped to the face centre on narrow faces)."""
        L = np.asarray(d["size"], float)
        delta = L.min()
        pts = []
        for k in range(3):
            a, b = [(1, 2), (2, 0), (0, 1)][k]
            for s in (1.0, -1.0):
                c = np.zeros(3)
                c[k] = s * L[k] / 2
                pts.append(c.copy())
                for ax in (a, b):
                    off = max(L[ax] / 2 - delta, 0.0)
                    for sg in (1.0, -1.0):
                        q = c.copy()
                        q[ax] = sg * off
                        pts.append(q)
        return np.unique(np.round(np.array(pts), 15), axis=0)

    corners = staticmethod(lambda d: _box_corners(*(np.asarray(d["size"]) / 2)))


class _Slab:
    @staticmethod
    def validate(d):
        _positive(d, "length", "width")
        if d.get("thickness", 0.0) < 0:
            raise ConfigError("slab thickness must be non-negative")

    @staticmethod
    def is_sheet(d):
        return d.get("thickness", 0.0) == 0.0

    @staticmethod
    def patches(d):
        T, L, W = d.get("thickness", 0.0), d["length"], d["width"]
        if T == 0.0:
            return [_rect_patch((0, 0, -W / 2), (1, 0, 0), (0, 0, 1), L, W, n=(2, 2))]
        r = T / 2
        out = [
            # top and bottom faces: the x = 0 side joins the hemicylinder smoothly
            _rect_patch((0, r, -W / 2), (1, 0, 0), (0, 0, 1), L, W, sharp=(False, True, True, True), n=(2, 2)),
            _rect_patch((0, -r, -W / 2), (1, 0, 0), (0, 0, 1), L, W, sharp=(False, True, True, True), n=(2, 2)),
            # far end
            _rect_patch((L, -r, -W / 2), (0, 1, 0), (0, 0, 1), T, W, n=(2, 2)),
        ]

        def hemi(psi, z):
            return _stack(r * np.cos(psi), r * np.sin(psi), z + 0 * psi)
        out.append(Patch(hemi, (PI / 2, 3 * PI / 2), (-W / 2, W / 2), sharp=(False, False, True, True),
                         n_init=(2, 2)))
        for s in (1.0, -1.0):
            out.append(_rect_patch((0, -r, s * W / 2), (1, 0, 0), (0, 1, 0), L, T,
                                   sharp=(False, True, True, True), n=(2, 2)))

            def disc(rr, psi, s=s):
                return _stack(rr * np.cos(psi), rr * np.sin(psi), s * W / 2 + 0 * rr)
            out.append(Patch(disc, (0.0, r), (PI / 2, 3 * PI / 2), sharp=(False, True, False, False),
                             n_init=(1, 2)))
        return out

    @staticmethod
    def sdf(d, p):
        T, L, W = d.get("thickness", 0.0), d["length"], d["width"]
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        if T == 0.0:
            dx = np.maximum(np.maximum(-x, x - L), 0)
            dz = np.maximum(np.abs(z) - W / 2, 0)
            return np.sqrt(dx ** 2 + y ** 2 + dz ** 2)
        r = T / 2
        qx, qy = np.abs(x - L / 2) - L / 2, np.abs(y) - r
        box = np.hypot(np.maximum(qx, 0), np.maximum(qy, 0)) + np.minimum(np.maximum(qx, qy), 0)
        disc = np.hypot(x, y) - r
        d2 = np.minimum(box, disc)
        dz = np.abs(z) - W / 2
        return np.hypot(np.maximum(d2, 0), np.maximum(dz, 0)) + np.minimum(np.maximum(d2, dz), 0)

    @staticmethod
    def area(d):
        T, L, W = d.get("thickness", 0.0), d["length"], d["width"]
        if T == 0.0:
            return L * W
        r = T / 2
        return 2 * L * W + T * W + PI * r * W + 2 * (L * T + PI * r * r / 2)

    sampling = staticmethod(lambda d: np.empty((0, 3)))

    @staticmethod
    def corners(d):
        T, L, W = d.get("thickness", 0.0), d["length"], d["width"]
        r = T / 2
        return np.array([[x, y, z] for x in (-r, L) for y in (-r, r) for z in (-W / 2, W / 2)])


class _Torus:
    @staticmethod
    def validate(d):
        _positive(d, "tube_radius", "ring_radius")
        if d["tube_radius"] >= d["ring_radius"]:
            raise ConfigError("torus tube radius must be smaller than the ring radius")

    @staticmethod
    def patches(d):
        return [_torus_patch(d["tube_radius"], d["ring_radius"])]

    @staticmethod
    def sdf(d, p):
        rho = np.hypot(p[..., 0], p[..., 1])
        return np.hypot(rho - d["ring_radius"], p[..., 2]) - d["tube_radius"]

    is_sheet = staticmethod(lambda d: False)
    area = staticmethod(lambda d: 4 * PI ** 2 * d["tube_radius"] * d["ring_radius"])
    sampling = staticmethod(lambda d: np.empty((0, 3)))

    @staticmethod
    def corners(d):
        R = d["ring_radius"] + d["tube_radius"]
        return _box_corners(R, R, d["tube_radius"])


class _RectLoop:
    """Tube of circular cross section following a rounded rectangle in the x-y plane."""

    @staticmethod
    def validate(d):
        _positive(d, "tube_radius", "lx", "ly")
        rc = d.setdefault("corner_radius", 2 * d["tube_radius"])
        if not d["tube_radius"] < rc <= min(d["lx"], d["ly"]) / 2:
            raise ConfigError("rectangular-loop corner radius must exceed the tube radius and fit the sides")

    @staticmethod
    def patches(d):
        r, rc = d["tube_radius"], d["corner_radius"]
        hx, hy = d["lx"] / 2 - rc, d["ly"] / 2 - rc
        out = []
        # straight runs along x (at y = +-(hy + rc)) and along y
        for s in (1.0, -1.0):
            yc = s * (hy + rc)

            def run_x(t, th, yc=yc, s=s):
                return _stack(t, yc + s * r * np.cos(th), r * np.sin(th))
            if hx > 0:
                out.append(Patch(run_x, (-hx, hx), (0, 2 * PI), n_init=(1, 4)))
            xc = s * (hx + rc)

            def run_y(t, th, xc=xc, s=s):
                return _stack(xc + s * r * np.cos(th), t, r * np.sin(th))
            if hy > 0:
                out.append(Patch(run_y, (-hy, hy), (0, 2 * PI), n_init=(1, 4)))
        for k, (sx, sy) in enumerate(((1, 1), (-1, 1), (-1, -1), (1, -1))):
            out.append(_torus_patch(r, rc, k * PI / 2, (k + 1) * PI / 2, center=(sx * hx, sy * hy), n=(2, 4)))
        return out

    @staticmethod
    def sdf(d, p):
        r, rc = d["tube_radius"], d["corner_radius"]
        h = np.array([d["lx"] / 2 - rc, d["ly"] / 2 - rc])
        q = np.abs(p[..., :2]) - h
        rr = np.linalg.norm(np.maximum(q, 0), axis=-1) + np.minimum(q.max(axis=-1), 0) - rc
        return np.hypot(rr, p[..., 2]) - r

    is_sheet = staticmethod(lambda d: False)

    @staticmethod
    def area(d):
        r, rc = d["tube_radius"], d["corner_radius"]
        straight = 2 * (d["lx"] - 2 * rc) + 2 * (d["ly"] - 2 * rc)
        return 2 * PI * r * straight + 4 * PI ** 2 * r * rc

    sampling = staticmethod(lambda d: np.empty((0, 3)))

    @staticmethod
    def corners(d):
        r = d["tube_radius"]
        return _box_corners(d["lx"] / 2 + r, d["ly"] / 2 + r, r)


KINDS = {
    "sphere": _Sphere,
    "capsule": _Capsule,
    "cylinder-hemisphere-capped": _Capsule,
    "cuboid": _Cuboid,
    "slab": _Slab,
    "slab-rounded-edge": _Slab,
    "half-plane-slab": _Slab,
    "torus": _Torus,
    "rectangular-loop": _RectLoop,
}


def half_plane_slab(thickness, scale, position, axis=(0, 0, 1), ref=(1, 0, 0), extent=20.0) -> Primitive:
    """A semi-infinite plate modelled as a slab reaching ``extent`` scale units
    away from its rounded edge and ``extent`` either side along the edge."""
    return Primitive("half-plane-slab", {"thickness": thickness, "length": extent * scale,
                                         "width": 2 * extent * scale}, position, axis, ref)
