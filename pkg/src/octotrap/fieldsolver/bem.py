"""Surface-charge collocation solver.

Each panel carries a constant surface density.  The potential at panel
centroid i due to unit density on panel j is

* far pairs: a 2x2 Gauss rule over the curved panel,
* near pairs (centroid distance below two widths of panel j): a 4x4 rule,
* self terms: the flat-rectangle integral 4[A asinh(B/A) + B asinh(A/B)]
  (half sides A, B) plus a curvature correction from the 4x4 rule.

One LU factorization serves every voltage group: the system is solved once
with a unit-voltage right-hand side per group, and any voltage assignment is
a linear combination of those columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import linalg
from scipy.spatial import cKDTree

from ..constants import EPS0, K_E
from ..errors import ConfigError, GeometryError, SolverError
from .mesh import SizeField, SurfaceMesh
from .primitives import Primitive

MAX_PANELS = 8000
DEFAULT_RESOLUTION = 16.0  # panels per scale^2 near the trap centre
_BLOCK = 1024


@dataclass
class Electrode:
    """One conductor made of one or more primitives sharing a voltage group."""

    id: str
    primitives: list
    role: str = "dc"
    group: str | None = None
    parent_group: str | None = None  # original group of an electrode split off for study

    def __post_init__(self):
        if self.role not in ("dc", "rf"):
            raise ConfigError(f"electrode {self.id}: role must be 'dc' or 'rf', got {self.role!r}")
        if not self.primitives:
            raise ConfigError(f"electrode {self.id} has no primitives")
        if self.group is None:
            self.group = self.id


@dataclass
class TrapAssembly:
    """Electrodes, the length scale ``a`` [m] and meshing controls.

    ``grading_radius`` (in units of ``scale``) is the radius around
    ``center`` inside which panels keep their finest size.
    """

    electrodes: list
    scale: float
    center: tuple = (0.0, 0.0, 0.0)
    symmetry: tuple = ()
    resolution: float = DEFAULT_RESOLUTION
    grading_radius: float = 3.0
    grading: float = 1.5
    name: str = ""
    max_turn_deg: float = 45.0

    def __post_init__(self):
        if not self.electrodes:
            raise ConfigError("assembly has no electrodes")
        if not self.scale > 0:
            raise ConfigError("scale must be positive")
        if not self.resolution > 0:
            raise ConfigError("resolution must be positive")
        ids = [e.id for e in self.electrodes]
        if len(set(ids)) != len(ids):
            raise ConfigError("electrode ids must be unique")
        self.center = np.asarray(self.center, float)

    @property
    def groups(self) -> list:
        out = []
        for e in self.electrodes:
            if e.group not in out:
                out.append(e.group)
        return out

    def group_role(self, group) -> str:
        roles = {e.role for e in self.electrodes if e.group == group}
        if len(roles) != 1:
            raise ConfigError(f"group {group!r} mixes dc and rf electrodes")
        return roles.pop()

    def electrode(self, eid) -> Electrode:
        for e in self.electrodes:
            if e.id == eid:
                return e
        raise ConfigError(f"no electrode with id {eid!r}")

    @property
    def primitives(self):
        return [(i, p) for i, e in enumerate(self.electrodes) for p in e.primitives]

    def size_field(self) -> SizeField:
        h0 = self.scale / math.sqrt(self.resolution)
        return SizeField(h0=h0, center=self.center, r0=self.grading_radius * self.scale,
                         grading=self.grading, h_max=4 * self.scale, max_turn=math.radians(self.max_turn_deg))

    def rho(self, point=None) -> float:
        """Distance from ``point`` (default the centre) to the nearest electrode surface [m]."""
        x = self.center if point is None else np.asarray(point, float)
        return float(min(p.sdf(x[None, :])[0] for _, p in self.primitives))

    @cached_property
    def mesh(self) -> SurfaceMesh:
        return self._build_mesh()

    @cached_property
    def panel_electrode(self) -> np.ndarray:
        prim_to_el = np.array([i for i, _ in self.primitives])
        return prim_to_el[self.mesh.owner]

    def _build_mesh(self) -> SurfaceMesh:
        size = self.size_field()
        prims = self.primitives
        meshes = [p.mesh(size, owner=k) for k, (_, p) in enumerate(prims)]
        boxes = [p.bounding_box() for _, p in prims]
        tol = 1e-9 * self.scale
        keep = [np.ones(len(m), bool) for m in meshes]
        for a, (ea, pa) in enumerate(prims):
            for b, (eb, pb) in enumerate(prims):
                if a == b or np.any(boxes[a][1] < boxes[b][0]) or np.any(boxes[b][1] < boxes[a][0]):
                    continue
                dist = pb.sdf(meshes[a].centroids)
                inside = dist < -tol
                if not np.any(inside):
                    continue
                # a surface wholly enclosed by another conductor is a nested shell, not a clash
                if ea != eb and np.any(dist > tol):
                    raise GeometryError(
                        f"electrodes {self.electrodes[ea].id!r} and {self.electrodes[eb].id!r} intersect")
                if ea == eb:
                    keep[a] &= ~inside  # union of primitives of one conductor: drop buried panels
        parts = []
        for m, k in zip(meshes, keep):
            parts.append(SurfaceMesh(**{f: getattr(m, f)[k] for f in SurfaceMesh.__dataclass_fields__}))
        mesh = SurfaceMesh.concatenate(parts)
        if len(mesh) > MAX_PANELS:
            raise SolverError(
                f"{len(mesh)} panels exceed the dense-solver limit of {MAX_PANELS}; "
                f"lower the resolution (now {self.resolution:g} per scale^2) or the extent of far electrodes")
        return mesh

    def rescaled(self, factor: float) -> "TrapAssembly":
        """Copy with every length multiplied by ``factor``."""
        els = []
        for e in self.electrodes:
            prims = []
            for p in e.primitives:
                dims = {k: (list(np.asarray(v) * factor) if isinstance(v, (list, tuple, np.ndarray)) else v * factor)
                        for k, v in p.dims.items()}
                prims.append(Primitive(p.kind, dims, np.asarray(p.position) * factor, p.axis, p.ref))
            els.append(Electrode(e.id, prims, e.role, e.group, e.parent_group))
        return TrapAssembly(els, self.scale * factor, np.asarray(self.center) * factor, self.symmetry,
                            self.resolution, self.grading_radius, self.grading, self.name,
                            self.max_turn_deg)

    def with_electrode_moved(self, eid, offset) -> "TrapAssembly":
        els = []
        for e in self.electrodes:
            if e.id == eid:
                prims = [Primitive(p.kind, p.dims, np.asarray(p.position) + np.asarray(offset, float), p.axis, p.ref)
                         for p in e.primitives]
                e = Electrode(e.id, prims, e.role, e.group, e.parent_group)
            els.append(e)
        return TrapAssembly(els, self.scale, self.center, (), self.resolution, self.grading_radius,
                            self.grading, self.name, self.max_turn_deg)

    def isolated(self, eid) -> "TrapAssembly":
        """Copy with electrode ``eid`` moved to its own voltage group, remembering the old one."""
        el = self.electrode(eid)
        if el.group == eid:
            return self
        els = [Electrode(e.id, e.primitives, e.role, eid, e.group) if e.id == eid else e
               for e in self.electrodes]
        return TrapAssembly(els, self.scale, self.center, (), self.resolution, self.grading_radius,
                            self.grading, self.name, self.max_turn_deg)

    def regrouped(self, mapping: dict) -> "TrapAssembly":
        """Copy with electrode ids in ``mapping`` moved to new voltage groups."""
        els = [Electrode(e.id, e.primitives, e.role, mapping.get(e.id, e.group), e.parent_group)
               for e in self.electrodes]
        return TrapAssembly(els, self.scale, self.center, self.symmetry, self.resolution,
                            self.grading_radius, self.grading, self.name, self.max_turn_deg)


# --------------------------------------------------------------------------
# kernels
# --------------------------------------------------------------------------

def _flat_self(lu, lv):
    A, B = lu / 2, lv / 2
    return 4 * (A * np.arcsinh(B / A) + B * np.arcsinh(A / B))


def _flat_gauss_self(lu, lv):
    x, w = np.polynomial.legendre.leggauss(4)
    X, Y = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w)
    r = np.sqrt((X[None] * lu[:, None, None] / 2) ** 2 + (Y[None] * lv[:, None, None] / 2) ** 2)
    return np.sum(W[None] / r, axis=(1, 2)) * lu * lv / 4


def _quad_potential(points, sub, w, dtype=float):
    """sum_k w[j,k] / |x_i - y[j,k]| for all i, j -> (M, N)."""
    d = points[:, None, None, :].astype(dtype) - sub[None, :, :, :].astype(dtype)
    r = np.sqrt(np.sum(d * d, axis=-1))
    return np.sum(w[None].astype(dtype) / r, axis=-1)


def influence_matrix(mesh: SurfaceMesh) -> np.ndarray:
    """Collocation matrix A[i, j] = potential at centroid i per unit density on panel j [V m^2/C]."""
    N = len(mesh)
    A = np.empty((N, N))
    for s in range(0, N, _BLOCK):
        A[s:s + _BLOCK] = _quad_potential(mesh.centroids[s:s + _BLOCK], mesh.sub2, mesh.w2)
    tree = cKDTree(mesh.centroids)
    w = mesh.widths
    pairs = tree.query_pairs(2 * w.max(), output_type="ndarray")
    if len(pairs):
        pairs = np.concatenate([pairs, pairs[:, ::-1]])
        dist = np.linalg.norm(mesh.centroids[pairs[:, 0]] - mesh.centroids[pairs[:, 1]], axis=1)
        pairs = pairs[dist < 2 * w[pairs[:, 1]]]
        i, j = pairs.T
        d = mesh.centroids[i][:, None, :] - mesh.sub4[j]
        A[i, j] = np.sum(mesh.w4[j] / np.linalg.norm(d, axis=-1), axis=-1)
    # self terms: flat rectangle + curvature correction
    d = mesh.centroids[:, None, :] - mesh.sub4
    curved = np.sum(mesh.w4 / np.linalg.norm(d, axis=-1), axis=-1)
    lu, lv = mesh.side_u, mesh.side_v
    A[np.arange(N), np.arange(N)] = _flat_self(lu, lv) + (curved - _flat_gauss_self(lu, lv))
    return A * K_E


@dataclass
class UnitSolutions:
    """Panel densities for 1 V on each voltage group (others grounded)."""

    assembly: TrapAssembly
    mesh: SurfaceMesh
    groups: list
    sigma_unit: np.ndarray  # (N, G)
    rcond: float
    residual: float

    def voltage_vector(self, voltages) -> np.ndarray:
        if isinstance(voltages, dict):
            unknown = set(voltages) - set(self.groups)
            if unknown:
                raise ConfigError(f"unknown voltage groups {sorted(unknown)}")
            return np.array([float(voltages.get(g, 0.0)) for g in self.groups])
        v = np.asarray(voltages, float)
        if v.shape != (len(self.groups),):
            raise ConfigError(f"expected {len(self.groups)} voltages, got shape {v.shape}")
        return v

    def solution(self, voltages) -> "ChargeSolution":
        v = self.voltage_vector(voltages)
        return ChargeSolution(self, v, self.sigma_unit @ v)

    def unit_potentials(self, points) -> np.ndarray:
        """Potential at ``points`` for each unit group solution, shape (M, G).

        Keeps the dtype of ``points`` (use ``np.longdouble`` for Taylor extraction).
        """
        pts = np.asarray(points)
        if not np.issubdtype(pts.dtype, np.floating):
            pts = pts.astype(float)
        K = _eval_kernel(self.mesh, pts.reshape(-1, 3))
        out = K @ self.sigma_unit.astype(K.dtype)
        return (out * K_E).reshape(pts.shape[:-1] + (len(self.groups),))

    def unit_fields(self, points) -> np.ndarray:
        """Electric field for each unit group solution, shape (M, 3, G)."""
        pts = np.asarray(points, float).reshape(-1, 3)
        out = np.zeros((len(pts), 3, len(self.groups)))
        for s in range(0, len(pts), 256):
            G = _eval_field_kernel(self.mesh, pts[s:s + 256])  # (m, 3, N)
            out[s:s + 256] = np.einsum("mcn,ng->mcg", G, self.sigma_unit)
        return out * K_E


def _eval_kernel(mesh, pts):
    dtype = pts.dtype
    N = len(mesh)
    K = np.empty((len(pts), N), dtype=dtype)
    for s in range(0, len(pts), 64):
        K[s:s + 64] = _quad_potential(pts[s:s + 64], mesh.sub2, mesh.w2, dtype)
    # refine panels that are close to an evaluation point
    tree = cKDTree(mesh.centroids)
    near = tree.query_ball_point(np.asarray(pts, float), 2 * mesh.widths.max())
    for m, js in enumerate(near):
        if not js:
            continue
        js = np.asarray(js)
        d = np.linalg.norm(np.asarray(pts[m], float) - mesh.centroids[js], axis=1)
        js = js[d < 2 * mesh.widths[js]]
        if len(js):
            dd = pts[m][None, None, :] - mesh.sub4[js].astype(dtype)
            K[m, js] = np.sum(mesh.w4[js].astype(dtype) / np.sqrt(np.sum(dd * dd, axis=-1)), axis=-1)
    return K


def _eval_field_kernel(mesh, pts):
    d = pts[:, None, None, :] - mesh.sub2[None]
    r3 = np.sum(d * d, axis=-1) ** 1.5
    return np.einsum("mnkc,nk->mcn", d / r3[..., None], mesh.w2)


@dataclass
class ChargeSolution:
    units: UnitSolutions
    voltages: np.ndarray
    sigma: np.ndarray

    @property
    def assembly(self):
        return self.units.assembly

    @property
    def mesh(self):
        return self.units.mesh

    def total_charge(self, electrode_ids=None) -> float:
        m = self.mesh
        if electrode_ids is None:
            return float(np.sum(self.sigma * m.areas))
        idx = [i for i, e in enumerate(self.assembly.electrodes) if e.id in set(electrode_ids)]
        sel = np.isin(self.assembly.panel_electrode, idx)
        return float(np.sum(self.sigma[sel] * m.areas[sel]))

    def potential(self, points):
        return self.units.unit_potentials(points) @ self.voltages.astype(np.asarray(points).dtype
                                                                          if np.issubdtype(np.asarray(points).dtype, np.floating)
                                                                          else float)

    def field(self, points):
        return self.units.unit_fields(points) @ self.voltages


def factorize(assembly: TrapAssembly) -> UnitSolutions:
    """Assemble and factor the collocation system; solve one column per group.

    Raises
    ------
    SolverError
        If the matrix is numerically singular or the collocation residual
        exceeds 1e-6 of the applied voltage.
    """
    mesh = assembly.mesh
    A = influence_matrix(mesh)
    groups = assembly.groups
    el_group = np.array([groups.index(e.group) for e in assembly.electrodes])
    pg = el_group[assembly.panel_electrode]
    rhs = np.zeros((len(mesh), len(groups)))
    rhs[np.arange(len(mesh)), pg] = 1.0
    anorm = np.linalg.norm(A, 1)
    lu, piv = linalg.lu_factor(A, check_finite=False)
    rcond, info = linalg.lapack.dgecon(lu, anorm, norm="1")
    if info != 0 or not rcond > 1e-15:
        raise SolverError(f"collocation matrix is singular to working precision (rcond = {rcond:.2e})")
    sigma = linalg.lu_solve((lu, piv), rhs, check_finite=False)
    res = float(np.max(np.abs(A @ sigma - rhs)))
    if res > 1e-6:
        raise SolverError(f"collocation residual {res:.2e} exceeds 1e-6 (rcond = {rcond:.2e})")
    return UnitSolutions(assembly, mesh, groups, sigma, float(rcond), res)


def solve_charges(assembly: TrapAssembly, voltages) -> ChargeSolution:
    """Panel charge densities for the given group voltages (dict or sequence)."""
    return factorize(assembly).solution(voltages)


def evaluate(sol: ChargeSolution, points):
    """Potential [V] and field [V/m] at ``points``.

    Returns ``(potential, field, too_close)`` where ``too_close`` flags points
    nearer than one local panel width to a conductor, where accuracy degrades.
    """
    pts = np.asarray(points, float).reshape(-1, 3)
    tree = cKDTree(sol.mesh.centroids)
    dist, idx = tree.query(pts)
    too_close = dist < sol.mesh.widths[idx]
    return sol.potential(pts), sol.field(pts), too_close


def max_surface_field(sol: ChargeSolution, radius: float | None = None):
    """Largest surface field magnitude [V/m] and its location.

    Smooth conductors use |sigma|/eps0 on every panel that is not next to a
    sharp edge; sheets carry charge on both faces and use |sigma|/(2 eps0).
    Primitives with sharp edges (cuboids) are sampled only at their face
    sampling points, taking the panel containing each point.

    ``radius`` [m] limits the search to panels that close to the trap centre,
    which keeps the artificial ends of truncated electrodes out of the result.
    """
    m = sol.mesh
    asm = sol.assembly
    prims = [p for _, p in asm.primitives]
    E = np.abs(sol.sigma) / EPS0
    E = np.where(m.sheet, E / 2, E)
    candidate = ~m.edge.copy()
    sharp_prims = [k for k, p in enumerate(prims) if p.has_sharp_edges]
    if sharp_prims:
        candidate &= ~np.isin(m.owner, sharp_prims)
        for k in sharp_prims:
            sel = np.flatnonzero(m.owner == k)
            if not len(sel):
                continue
            tree = cKDTree(m.centroids[sel])
            _, j = tree.query(prims[k].sampling_points())
            candidate[sel[np.unique(j)]] = True
    if radius is not None:
        candidate &= np.linalg.norm(m.centroids - asm.center, axis=1) <= radius
    if not np.any(candidate):
        raise SolverError("no panels eligible for the surface-field maximum")
    idx = np.flatnonzero(candidate)
    best = idx[np.argmax(E[idx])]
    return float(E[best]), m.centroids[best].copy()


def capacitance_matrix(units: UnitSolutions) -> np.ndarray:
    """C[g, h] = charge on group g per volt on group h [F]."""
    asm = units.assembly
    el_group = np.array([units.groups.index(e.group) for e in asm.electrodes])
    pg = el_group[asm.panel_electrode]
    G = len(units.groups)
    C = np.zeros((G, G))
    q = units.sigma_unit * units.mesh.areas[:, None]
    for g in range(G):
        C[g] = q[pg == g].sum(axis=0)
    return C
