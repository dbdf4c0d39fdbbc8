"""Local Taylor analysis of a potential up to fourth order.

Coefficients are obtained from tensor-product central differences on a
5x5x5 grid at two step sizes, combined by one Richardson step.  The source is
evaluated on ``np.longdouble`` points; the fourth derivatives at ``h = 0.01
scale`` lose about 8 digits to cancellation, which double precision cannot
afford when 1e-6 agreement is wanted.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import IndeterminateError

ORDER = 4

#: all exponent triples with total order <= 4, sorted by order then lexically
INDICES = tuple(sorted(((i, j, k) for i in range(5) for j in range(5) for k in range(5)
                        if i + j + k <= ORDER), key=lambda t: (sum(t), tuple(-x for x in t))))

# five-point central stencils on offsets -2..2 and their truncation orders
_STENCILS = {
    0: (np.array([0, 0, 1, 0, 0]), 1, None),
    1: (np.array([1, -8, 0, 8, -1]), 12, 4),
    2: (np.array([-1, 16, -30, 16, -1]), 12, 4),
    3: (np.array([-1, 2, 0, -2, 1]), 2, 2),
    4: (np.array([1, -4, 6, -4, 1]), 1, 2),
}

OCTUPOLE_CONSTRAINTS = tuple(t for t in INDICES if 1 <= sum(t) <= 3)


@dataclass(frozen=True)
class TaylorExpansion4:
    """Taylor coefficients c[i,j,k] with V ~ sum c[i,j,k] x^i y^j z^k about ``center``."""

    center: tuple
    scale: float
    coeffs: dict
    errors: dict
    warnings: tuple = ()

    def __getitem__(self, ijk):
        return self.coeffs[tuple(ijk)]

    def derivative(self, i, j, k) -> float:
        """Partial derivative d^(i+j+k) V / dx^i dy^j dz^k at the centre."""
        return self.coeffs[(i, j, k)] * math.factorial(i) * math.factorial(j) * math.factorial(k)

    def error(self, i, j, k) -> float:
        return self.errors[(i, j, k)]

    @property
    def beta(self) -> float:
        return self.coeffs[(0, 0, 4)]

    @property
    def alpha(self) -> float:
        return self.coeffs[(0, 0, 2)]

    def hessian(self) -> np.ndarray:
        c = self.coeffs
        return np.array([
            [2 * c[(2, 0, 0)], c[(1, 1, 0)], c[(1, 0, 1)]],
            [c[(1, 1, 0)], 2 * c[(0, 2, 0)], c[(0, 1, 1)]],
            [c[(1, 0, 1)], c[(0, 1, 1)], 2 * c[(0, 0, 2)]],
        ])

    def __call__(self, r):
        d = np.asarray(r, dtype=float) - np.asarray(self.center, dtype=float)
        out = 0.0
        for (i, j, k), v in self.coeffs.items():
            out = out + v * d[..., 0] ** i * d[..., 1] ** j * d[..., 2] ** k
        return out

    def laplace_residuals(self) -> dict:
        """Coefficients of the Taylor series of the Laplacian, up to order 2.

        All ten vanish for a harmonic potential; each entry is reported
        relative to the largest term that enters it.
        """
        out = {}
        for (i, j, k) in INDICES:
            if i + j + k > ORDER - 2:
                continue
            terms = [
                (i + 2) * (i + 1) * self.coeffs[(i + 2, j, k)],
                (j + 2) * (j + 1) * self.coeffs[(i, j + 2, k)],
                (k + 2) * (k + 1) * self.coeffs[(i, j, k + 2)],
            ]
            size = max(abs(t) for t in terms)
            out[(i, j, k)] = abs(sum(terms)) / size if size > 0 else 0.0
        return out

    def to_rows(self):
        return [(i, j, k, self.coeffs[(i, j, k)], self.errors[(i, j, k)]) for (i, j, k) in INDICES]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("i,j,k,value,error\n")
        for i, j, k, v, e in self.to_rows():
            buf.write(f"{i},{j},{k},{v:.17g},{e:.3g}\n")
        return buf.getvalue()


def _weights_1d(order, h):
    w, denom, _ = _STENCILS[order]
    return w.astype(np.longdouble) / (denom * np.longdouble(h) ** order)


def _grid_values(source, center, h):
    offs = np.arange(-2, 3, dtype=np.longdouble) * np.longdouble(h)
    X, Y, Z = np.meshgrid(offs, offs, offs, indexing="ij")
    pts = np.stack([X, Y, Z], axis=-1) + np.asarray(center, dtype=np.longdouble)
    vals = np.asarray(source(pts.reshape(-1, 3)))
    if vals.dtype != np.longdouble:
        vals = vals.astype(np.longdouble)
    return vals.reshape(5, 5, 5)


def _stencil_derivatives(vals, h):
    out = {}
    for (i, j, k) in INDICES:
        d = np.einsum("abc,a,b,c->", vals, _weights_1d(i, h), _weights_1d(j, h), _weights_1d(k, h))
        out[(i, j, k)] = d
    return out


def expand(source: Callable, center=(0.0, 0.0, 0.0), scale: float = 1.0,
           step: float = 0.02) -> TaylorExpansion4:
    """Extract all Taylor coefficients of order <= 4 of ``source`` at ``center``.

    Parameters
    ----------
    source : callable
        Maps an ``(N, 3)`` array of points to ``N`` potentials.  Extended
        precision is used if the callable honours the input dtype.
    center : array_like
    scale : float
        Characteristic length of the problem [m]; sets the step and the
        normalization of error reports.
    step : float
        Coarse step in units of ``scale``; the fine step is half of it.

    Returns
    -------
    TaylorExpansion4
        Errors combine the Richardson difference with a round-off floor.
    """
    if not scale > 0:
        raise ValueError("scale must be positive")
    h = step * scale
    coarse_vals = _grid_values(source, center, h)
    fine_vals = _grid_values(source, center, h / 2)
    coarse = _stencil_derivatives(coarse_vals, h)
    fine = _stencil_derivatives(fine_vals, h / 2)
    vmax = float(np.max(np.abs(fine_vals)))
    eps = float(np.finfo(np.longdouble).eps)

    coeffs, errors = {}, {}
    for idx in INDICES:
        orders = [_STENCILS[n][2] for n in idx if n > 0]
        p = min(orders) if orders else None
        fact = math.factorial(idx[0]) * math.factorial(idx[1]) * math.factorial(idx[2])
        if p is None:
            d, err = fine[idx], np.longdouble(0)
        else:
            diff = (fine[idx] - coarse[idx]) / (2 ** p - 1)
            d = fine[idx] + diff
            err = abs(diff)
        # round-off of the fine stencil, with a safety factor of 10
        wsum = 1.0
        for n in idx:
            w, denom, _ = _STENCILS[n]
            wsum *= float(np.sum(np.abs(w))) / denom
        floor = 10 * eps * vmax * wsum / (h / 2) ** sum(idx)
        coeffs[idx] = float(d) / fact
        errors[idx] = (float(err) + floor) / fact

    size = max(abs(v) * scale ** sum(ijk) for ijk, v in coeffs.items())
    notes = []
    for ijk in INDICES:
        if sum(ijk) <= 2 and size > 0 and errors[ijk] * scale ** sum(ijk) > 1e-4 * size:
            notes.append(f"coefficient {ijk} has relative error estimate above 1e-4")
    return TaylorExpansion4(tuple(float(c) for c in center), float(scale), coeffs, errors, tuple(notes))


@dataclass(frozen=True)
class OctupoleReport:
    satisfied: bool
    residuals: dict
    beta: float
    indeterminate: bool = False
    tol: float = 1e-6

    @property
    def worst(self):
        key = max(self.residuals, key=self.residuals.get)
        return key, self.residuals[key]


def octupole_check(T: TaylorExpansion4, tol: float = 1e-6, raise_on_indeterminate: bool = False
                   ) -> OctupoleReport:
    """Test the 19 vanishing-derivative conditions of an axial octupole at T.center.

    Residuals are ``|c| scale^n / (|beta| scale^4)`` for every coefficient of
    order n = 1..3.  If beta is not resolved (below 1000 times its error
    estimate) the report is marked indeterminate and never satisfied.
    """
    beta = T.beta
    indeterminate = abs(beta) < 1e3 * T.error(0, 0, 4)
    if indeterminate and raise_on_indeterminate:
        raise IndeterminateError(f"beta = {beta:.3g} is not resolved (error {T.error(0, 0, 4):.3g})")
    norm = abs(beta) * T.scale ** 4
    residuals = {}
    for ijk in OCTUPOLE_CONSTRAINTS:
        c = abs(T[ijk]) * T.scale ** sum(ijk)
        residuals[ijk] = c / norm if norm > 0 else math.inf
    ok = (not indeterminate) and all(r < tol for r in residuals.values())
    return OctupoleReport(ok, residuals, beta, indeterminate, tol)


def trap_coefficients(T: TaylorExpansion4) -> dict:
    """Axial double-well parameters V ~ V0 - E0 z + alpha z^2 + beta z^4 and the
    diagonal quadrupole strengths."""
    c = T.coeffs
    return {
        "V0": c[(0, 0, 0)],
        "E0": -c[(0, 0, 1)],
        "alpha": c[(0, 0, 2)],
        "beta": c[(0, 0, 4)],
        "alpha_x": c[(2, 0, 0)],
        "alpha_y": c[(0, 2, 0)],
        "alpha_z": c[(0, 0, 2)],
        "alpha_xy": c[(1, 1, 0)],
    }


def superpose(expansions, weights) -> TaylorExpansion4:
    """Linear combination of expansions about the same centre.

    Potentials are linear in electrode voltages, so the expansion for any
    voltage assignment follows from one expansion per unit-voltage solution.
    Error estimates add in absolute value.
    """
    expansions = list(expansions)
    weights = [float(w) for w in weights]
    if not expansions or len(expansions) != len(weights):
        raise ValueError("need one weight per expansion")
    ref = expansions[0]
    coeffs = {k: sum(w * T.coeffs[k] for T, w in zip(expansions, weights)) for k in INDICES}
    errors = {k: sum(abs(w) * T.errors[k] for T, w in zip(expansions, weights)) for k in INDICES}
    notes = tuple(dict.fromkeys(n for T in expansions for n in T.warnings))
    return TaylorExpansion4(ref.center, ref.scale, coeffs, errors, notes)
