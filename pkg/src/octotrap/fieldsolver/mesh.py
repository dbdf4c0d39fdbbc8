"""Panel meshes built from parametric surface patches.

A patch is a smooth map (u, v) -> R^3 on a rectangle of parameters.  Cells
of the parameter rectangle are split until their physical size is below a
target width that grows away from the trap centre, and until the surface
normal turns by less than ``max_turn`` across a cell.  Neighbouring cells need
not share vertices: constant-density collocation does not care about
conformity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import GeometryError

_G2 = np.polynomial.legendre.leggauss(2)
_G4 = np.polynomial.legendre.leggauss(4)


@dataclass
class Patch:
    fun: Callable  # (u, v) arrays -> (..., 3) points, local frame
    u_range: tuple
    v_range: tuple
    sharp: tuple = (False, False, False, False)  # sides u0, u1, v0, v1 on a sharp edge
    n_init: tuple = (1, 1)
    flip: bool = False  # reverse the (r_u x r_v) normal


@dataclass
class SizeField:
    """Target panel width h(r) = h0 * (1 + grading * max(0, |r - c| - r0) / r0), capped."""

    h0: float
    center: np.ndarray
    r0: float
    grading: float = 1.5
    h_max: float = np.inf
    max_turn: float = np.radians(30.0)

    def __call__(self, pts):
        d = np.linalg.norm(pts - self.center, axis=-1)
        h = self.h0 * (1 + self.grading * np.maximum(0.0, d - self.r0) / self.r0)
        return np.minimum(h, self.h_max)


@dataclass
class SurfaceMesh:
    """Flat arrays describing N panels.

    ``sub2``/``sub4`` hold 2x2 and 4x4 Gauss points with area weights; the
    collocation point (``centroids``) is the image of the parametric cell
    centre, so it lies on the surface.
    """

    centroids: np.ndarray
    normals: np.ndarray
    areas: np.ndarray
    edge: np.ndarray
    side_u: np.ndarray
    side_v: np.ndarray
    sub2: np.ndarray
    w2: np.ndarray
    sub4: np.ndarray
    w4: np.ndarray
    owner: np.ndarray
    sheet: np.ndarray

    def __len__(self):
        return len(self.areas)

    @property
    def widths(self):
        return np.sqrt(self.areas)

    @classmethod
    def concatenate(cls, meshes):
        meshes = list(meshes)
        if not meshes:
            raise GeometryError("no panels to concatenate")
        fields = cls.__dataclass_fields__
        return cls(**{f: np.concatenate([getattr(m, f) for m in meshes]) for f in fields})

    def to_csv(self, sigma=None) -> str:
        cols = "x,y,z,nx,ny,nz,area,edge,owner" + (",sigma" if sigma is not None else "")
        lines = [cols]
        for i in range(len(self)):
            row = [*self.centroids[i], *self.normals[i], self.areas[i]]
            s = ",".join(f"{v:.10g}" for v in row) + f",{int(self.edge[i])},{int(self.owner[i])}"
            if sigma is not None:
                s += f",{sigma[i]:.10g}"
            lines.append(s)
        return "\n".join(lines) + "\n"


def _jacobian(fun, u, v, du, dv):
    ru = (fun(u + du, v) - fun(u - du, v)) / (2 * du)[..., None]
    rv = (fun(u, v + dv) - fun(u, v - dv)) / (2 * dv)[..., None]
    return ru, rv


def _refine(patch: Patch, to_global, size: SizeField, max_depth=14):
    """Adaptive split of one patch; returns arrays (u0, u1, v0, v1)."""
    (ua, ub), (va, vb) = patch.u_range, patch.v_range
    nu, nv = patch.n_init
    ue = np.linspace(ua, ub, nu + 1)
    ve = np.linspace(va, vb, nv + 1)
    U0, V0 = np.meshgrid(ue[:-1], ve[:-1], indexing="ij")
    U1, V1 = np.meshgrid(ue[1:], ve[1:], indexing="ij")
    cells = np.stack([U0.ravel(), U1.ravel(), V0.ravel(), V1.ravel()], axis=1)
    done = []
    f = lambda u, v: to_global(patch.fun(u, v))
    for depth in range(max_depth + 1):
        if len(cells) == 0:
            break
        u0, u1, v0, v1 = cells.T
        um, vm = 0.5 * (u0 + u1), 0.5 * (v0 + v1)
        # 3x3 samples for arc lengths
        us = np.stack([u0, um, u1], axis=1)
        vs = np.stack([v0, vm, v1], axis=1)
        P = f(us[:, :, None] + 0 * vs[:, None, :], vs[:, None, :] + 0 * us[:, :, None])
        seg_u = np.linalg.norm(np.diff(P, axis=1), axis=-1).sum(axis=1).max(axis=1)
        seg_v = np.linalg.norm(np.diff(P, axis=2), axis=-1).sum(axis=2).max(axis=1)
        h = size(P[:, 1, 1])
        # normal turning along each direction, sampled just inside the cell
        du, dv = 1e-4 * (u1 - u0), 1e-4 * (v1 - v0)
        inset_u, inset_v = 0.05 * (u1 - u0), 0.05 * (v1 - v0)

        def normal(uu, vv):
            ru, rv = _jacobian(f, uu, vv, du, dv)
            n = np.cross(ru, rv)
            return n / np.maximum(np.linalg.norm(n, axis=-1, keepdims=True), 1e-300)

        cos_u = np.sum(normal(u0 + inset_u, vm) * normal(u1 - inset_u, vm), axis=-1)
        cos_v = np.sum(normal(um, v0 + inset_v) * normal(um, v1 - inset_v), axis=-1)
        cmax = np.cos(size.max_turn)
        split_u = (seg_u > h) | (cos_u < cmax) | (seg_u > 4 * seg_v)
        split_v = (seg_v > h) | (cos_v < cmax) | (seg_v > 4 * seg_u)
        if depth == max_depth:
            split_u[:] = split_v[:] = False
        keep = ~(split_u | split_v)
        done.append(cells[keep])
        new = []
        for su, sv in ((True, False), (False, True), (True, True)):
            m = (split_u == su) & (split_v == sv)
            if not np.any(m):
                continue
            c = cells[m]
            a0, a1, b0, b1 = c.T
            am, bm = 0.5 * (a0 + a1), 0.5 * (b0 + b1)
            if su and sv:
                new += [np.stack(x, 1) for x in ((a0, am, b0, bm), (am, a1, b0, bm),
                                                  (a0, am, bm, b1), (am, a1, bm, b1))]
            elif su:
                new += [np.stack((a0, am, b0, b1), 1), np.stack((am, a1, b0, b1), 1)]
            else:
                new += [np.stack((a0, a1, b0, bm), 1), np.stack((a0, a1, bm, b1), 1)]
        cells = np.concatenate(new) if new else np.empty((0, 4))
    return np.concatenate(done) if done else np.empty((0, 4))


def _gauss_cells(f, cells, rule):
    x, w = rule
    u0, u1, v0, v1 = cells.T
    hu, hv = 0.5 * (u1 - u0), 0.5 * (v1 - v0)
    um, vm = 0.5 * (u0 + u1), 0.5 * (v0 + v1)
    U = um[:, None, None] + hu[:, None, None] * x[None, :, None]
    V = vm[:, None, None] + hv[:, None, None] * x[None, None, :]
    U, V = np.broadcast_arrays(U, V)
    U = U.reshape(len(cells), -1)
    V = V.reshape(len(cells), -1)
    du = np.broadcast_to((1e-4 * hu)[:, None], U.shape)
    dv = np.broadcast_to((1e-4 * hv)[:, None], V.shape)
    ru, rv = _jacobian(f, U, V, du, dv)
    jac = np.linalg.norm(np.cross(ru, rv), axis=-1)
    W = (w[:, None] * w[None, :]).ravel()[None, :] * (hu * hv)[:, None] * jac
    return f(U, V), W


def mesh_patches(patches, to_global, size: SizeField, sdf=None, owner: int = 0,
                 sheet: bool = False) -> SurfaceMesh:
    """Mesh a list of patches of one primitive.

    ``to_global`` maps local points to the assembly frame.  ``sdf`` (signed
    distance, negative inside) orients normals outward; sheets keep the
    patch orientation.
    """
    parts = []
    for patch in patches:
        f = lambda u, v, patch=patch: to_global(patch.fun(u, v))
        cells = _refine(patch, to_global, size)
        if len(cells) == 0:
            continue
        u0, u1, v0, v1 = cells.T
        um, vm = 0.5 * (u0 + u1), 0.5 * (v0 + v1)
        du, dv = 1e-4 * (u1 - u0), 1e-4 * (v1 - v0)
        mid = f(um, vm)
        ru, rv = _jacobian(f, um, vm, du, dv)
        n = np.cross(ru, rv)
        n /= np.maximum(np.linalg.norm(n, axis=-1, keepdims=True), 1e-300)
        if patch.flip:
            n = -n
        sub2, w2 = _gauss_cells(f, cells, _G2)
        sub4, w4 = _gauss_cells(f, cells, _G4)
        area = w4.sum(axis=1)
        lu = np.linalg.norm(ru, axis=-1) * (u1 - u0)
        lv = np.linalg.norm(rv, axis=-1) * (v1 - v0)
        stretch = np.sqrt(area / np.maximum(lu * lv, 1e-300))
        pu0, pu1 = patch.u_range
        pv0, pv1 = patch.v_range
        tol_u, tol_v = 1e-12 * (pu1 - pu0), 1e-12 * (pv1 - pv0)
        edge = ((patch.sharp[0] & (np.abs(u0 - pu0) < tol_u)) | (patch.sharp[1] & (np.abs(u1 - pu1) < tol_u))
                | (patch.sharp[2] & (np.abs(v0 - pv0) < tol_v)) | (patch.sharp[3] & (np.abs(v1 - pv1) < tol_v)))
        parts.append(SurfaceMesh(mid, n, area, edge, lu * stretch, lv * stretch, sub2, w2, sub4, w4,
                                 np.full(len(area), owner), np.full(len(area), sheet)))
    mesh = SurfaceMesh.concatenate(parts)
    if sdf is not None and not sheet:
        probe = sdf(mesh.centroids + 1e-3 * mesh.widths[:, None] * mesh.normals)
        flip = probe < 0
        mesh.normals[flip] *= -1
    return mesh
