"""Two-ion double-well physics and the geometric figures of merit.

The closed-form part covers the quartic axial model
V = V0 - E0 z + alpha z^2 + beta z^4, the two-ion equilibrium and normal
modes, the radial pseudopotential and the scaling of all of these with the
electrode distance rho.  The assembly part turns boundary-element solutions
into the dimensionless factors gamma = rho^3 beta / E_max and
mu = Q_ac rho / E_max.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq

from .constants import AMU, E_CHARGE, EPS0
from .errors import (AntiConfinedError, ConfigError, ConvergenceError, IndeterminateError,
                     UnderdeterminedDesignError)
from .multipole import INDICES, OCTUPOLE_CONSTRAINTS, TaylorExpansion4, expand, octupole_check, superpose

#: rf-to-dc voltage ratio used when extracting the radial quadrupole
RF_RATIO = 1e6

QUADRUPOLE = ((2, 0, 0), (0, 2, 0), (0, 0, 2), (1, 1, 0), (1, 0, 1), (0, 1, 1))
CONSTRAINT_SETS = {
    "octupole": OCTUPOLE_CONSTRAINTS,
    "quadrupole": QUADRUPOLE,
    "diagonal-quadrupole": ((2, 0, 0), (0, 2, 0), (0, 0, 2)),
    "axial": ((0, 0, 2),),
    # trap above a surface: quadrupoles, the vertical field and its cubic term
    "planar": QUADRUPOLE + ((0, 1, 0), (0, 3, 0)),
}


# ---------------------------------------------------------------------------
# species and closed forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IonSpecies:
    mass_number: float
    charge_state: int = 1

    def __post_init__(self):
        if not self.mass_number > 0:
            raise ConfigError("mass number must be positive")
        if int(self.charge_state) != self.charge_state or self.charge_state < 1:
            raise ConfigError("charge state must be an integer >= 1")

    @property
    def mass(self) -> float:
        return self.mass_number * AMU

    @property
    def charge(self) -> float:
        return self.charge_state * E_CHARGE

    @classmethod
    def parse(cls, text: str) -> "IonSpecies":
        """Parse ``"A:charge"`` (e.g. ``"43:1"``) or a bare mass number."""
        try:
            parts = str(text).split(":")
            A = float(parts[0])
            z = int(parts[1]) if len(parts) > 1 else 1
        except (ValueError, IndexError) as exc:
            raise ConfigError(f"species must look like 'A:charge', got {text!r}") from exc
        return cls(A, z)


CA43 = IonSpecies(43)
CD111 = IonSpecies(111)
BE9 = IonSpecies(9)


@dataclass(frozen=True)
class WellGeometry:
    s: float
    depth: float
    tipover: float
    tipover_exact: float


def well_geometry(alpha: float, beta: float) -> WellGeometry:
    """Well half-separation s, barrier depth and the tip-over field.

    ``tipover`` is the customary estimate (4/3)|alpha| s; ``tipover_exact``
    is the field at which d2V/dz2 vanishes at a well centre,
    4|alpha| s / (3 sqrt 3).
    """
    if not beta > 0:
        raise ConfigError("beta must be positive")
    if alpha >= 0:
        return WellGeometry(0.0, 0.0, 0.0, 0.0)
    s = math.sqrt(-alpha / (2 * beta))
    return WellGeometry(s, -alpha * s * s / 2, 4 / 3 * -alpha * s, 4 * -alpha * s / (3 * math.sqrt(3)))


def equilibrium_separation(alpha: float, beta: float, species: IonSpecies = CA43) -> float:
    """Positive root d of beta d^5 + 2 alpha d^3 = q / (2 pi eps0)."""
    if not beta > 0:
        raise ConfigError("beta must be positive")
    C = species.charge / (2 * math.pi * EPS0)
    # work in units of the pure-octupole separation to keep the numbers O(1)
    d0 = (C / beta) ** 0.2
    a = 2 * alpha * d0 ** 3 / C

    def f(x):
        return x ** 5 + a * x ** 3 - 1.0

    hi = 1.0
    while f(hi) <= 0:
        hi *= 2
    root = brentq(f, 0.0, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=500)
    return root * d0


@dataclass(frozen=True)
class ModeSpectrum:
    omega_1: float
    omega_2: float
    epsilon_tilde: float
    d: float
    s: float
    epsilon: float


def normal_modes(alpha: float, beta: float, species: IonSpecies = CA43) -> ModeSpectrum:
    """Centre-of-mass and breathing frequencies of an ion pair in the double well."""
    q, m = species.charge, species.mass
    d = equilibrium_separation(alpha, beta, species)
    w1sq = (2 * alpha + 3 * beta * d * d) * q / m
    if not w1sq > 0:
        raise AntiConfinedError(f"omega_1^2 = {w1sq:.3g} <= 0: the pair is not confined")
    et = q * q / (math.pi * EPS0 * m * w1sq * d ** 3)
    s = well_geometry(alpha, beta).s
    denom = 4 * math.pi * EPS0 * abs(alpha) * (2 * s) ** 3
    eps = q / denom if alpha < 0 and denom > 0 else math.inf
    return ModeSpectrum(math.sqrt(w1sq), math.sqrt(w1sq * (1 + et)), et, d, s, eps)


def octupole_frequency(beta: float, species: IonSpecies = CA43) -> float:
    """Closed-form centre-of-mass frequency at alpha = 0 [rad/s]."""
    q, m = species.charge, species.mass
    return math.sqrt(3 * q / m) * (q / (2 * math.pi * EPS0)) ** 0.2 * beta ** 0.3


@dataclass(frozen=True)
class RadialSecular:
    omega_r: float
    Omega: float


def radial_secular(Q_ac: float, q_r: float, species: IonSpecies = CA43) -> RadialSecular:
    """Radial secular frequency and the drive frequency implied by (Q_ac, q_r)."""
    if not 0 < q_r <= 0.5:
        raise ConfigError(f"q_r = {q_r} is outside the supported range (0, 0.5]")
    if not Q_ac > 0:
        raise ConfigError("Q_ac must be positive")
    q, m = species.charge, species.mass
    Omega = math.sqrt(4 * q * Q_ac / (q_r * m))
    return RadialSecular(q_r * Omega / (2 * math.sqrt(2)), Omega)


def required_Qac(freq_ratio: float, q_r: float, beta: float, species: IonSpecies = CA43) -> float:
    """Smallest Q_ac [V/m^2] giving omega_r = freq_ratio * omega_1 at the octupole condition."""
    q = species.charge
    return freq_ratio ** 2 * 6 / q_r * (q / (2 * math.pi * EPS0)) ** 0.4 * beta ** 0.6


@dataclass(frozen=True)
class Stability:
    stable: bool
    margin: float


def stability_condition(gamma: float, mu: float, q_r: float) -> Stability:
    """Radial confinement beats the dc quadrupole when mu > 4 gamma / q_r."""
    if gamma <= 0 or mu <= 0 or q_r <= 0:
        raise ConfigError("gamma, mu and q_r must be positive")
    margin = mu * q_r / (4 * gamma)
    return Stability(margin > 1, margin)


def tilt_tolerance(beta: float, d: float) -> float:
    """Largest stray axial field [V/m] that keeps the pair within one separation, d^3 beta."""
    return d ** 3 * beta


# ---------------------------------------------------------------------------
# scaling with rho
# ---------------------------------------------------------------------------

def length_scale_L0(E_max: float, species: IonSpecies = CA43) -> float:
    """Material length 36 (3q / (pi eps0 E_max))^(1/2) [m]."""
    return 36 * math.sqrt(3 * species.charge / (math.pi * EPS0 * E_max))


def omega1_scaling_mhz(A: float, gamma: float, E_max_v_per_um: float, rho_um: float) -> float:
    """Engineering form of the octupole frequency, omega_1/2pi in MHz."""
    return 840 / math.sqrt(A) * (gamma * E_max_v_per_um) ** 0.3 / rho_um ** 0.9


def heating_exponent(k: int) -> Fraction:
    """Exponent p in omega_1 ~ gamma^p at fixed heating per split, p = 3k/(10k - 9)."""
    k = Fraction(k)
    return 3 * k / (10 * k - 9)


@dataclass(frozen=True)
class ScaleAnalysis:
    gamma: float
    mu: float
    E_max: float  # [V/m]
    q_r: float
    freq_ratio: float
    species: IonSpecies

    def omega_1(self, rho):
        beta = self.gamma * self.E_max / np.asarray(rho, float) ** 3
        q, m = self.species.charge, self.species.mass
        return np.sqrt(3 * q / m) * (q / (2 * math.pi * EPS0)) ** 0.2 * beta ** 0.3

    def omega_r(self, rho):
        Q = self.mu * self.E_max / np.asarray(rho, float)
        return np.sqrt(self.q_r * self.species.charge * Q / (2 * self.species.mass))

    @property
    def L0(self) -> float:
        return length_scale_L0(self.E_max, self.species)

    @property
    def rho_c(self) -> float:
        g, u = self.gamma, self.mu
        return (g / u) * (1 / (g * u)) ** 0.25 * (1 / (6 * self.q_r)) ** 1.25 * self.freq_ratio ** 2.5 * self.L0

    def separation(self, rho):
        rho = np.asarray(rho, float)
        return rho / 6 * (self.L0 ** 2 / (self.gamma * rho ** 2)) ** 0.2

    @staticmethod
    def heating_rho_exponent(k) -> Fraction:
        """Exponent of rho in the phonons gained per split time."""
        return -Fraction(k) + Fraction(9, 10)

    @staticmethod
    def heating_gamma_exponent() -> Fraction:
        return Fraction(-3, 10)

    @staticmethod
    def omega1_gamma_exponent(k) -> Fraction:
        return heating_exponent(k)


def scale_analysis(gamma, mu, species=CA43, q_r=0.3, freq_ratio=2.0, E_max=1e8) -> ScaleAnalysis:
    if gamma <= 0 or mu <= 0:
        raise ConfigError("gamma and mu must be positive for the scaling analysis")
    return ScaleAnalysis(gamma, mu, E_max, q_r, freq_ratio, species)


# ---------------------------------------------------------------------------
# assembly-level figures of merit
# ---------------------------------------------------------------------------

def unit_expansions(units, center=None, step=0.01) -> dict:
    """Taylor expansion of every unit-voltage group solution about ``center``."""
    asm = units.assembly
    center = asm.center if center is None else np.asarray(center, float)
    cache = {}

    def values(pts):
        key = pts.tobytes()
        if key not in cache:
            cache[key] = units.unit_potentials(pts)
        return cache[key]

    return {g: expand(lambda p, k=k: values(p)[:, k], center=center, scale=asm.scale, step=step)
            for k, g in enumerate(units.groups)}


def find_rf_null(units, rf_groups, axis: int = 1, bracket=(0.3, 3.0)) -> np.ndarray:
    """Point on the line through the assembly centre along ``axis`` where the
    rf field component along that axis vanishes (the rf quadrupole centre of
    a surface trap).  ``bracket`` is in units of the scale."""
    asm = units.assembly
    idx = [units.groups.index(g) for g in rf_groups]

    def point(s):
        p = np.array(asm.center, float)
        p[axis] = s * asm.scale
        return p

    def component(s):
        return float(units.unit_fields(point(s)[None, :])[0, axis, idx].sum())

    lo, hi = bracket
    if component(lo) * component(hi) > 0:
        raise ConvergenceError(f"rf field along axis {axis} does not change sign between {lo} and {hi} (scale units)")
    return point(brentq(component, lo, hi, xtol=1e-9))


def _constraint_list(constraints):
    if isinstance(constraints, str):
        if constraints not in CONSTRAINT_SETS:
            raise ConfigError(f"unknown constraint set {constraints!r}; choose from {sorted(CONSTRAINT_SETS)}")
        constraints = CONSTRAINT_SETS[constraints]
    out = []
    for c in constraints:
        if len(c) == 2 and not isinstance(c[0], (int, np.integer)):
            idx, target = tuple(c[0]), float(c[1])
        else:
            idx, target = tuple(c), 0.0
        if idx not in INDICES or sum(idx) == 0:
            raise ConfigError(f"constraint index {idx} must be a Taylor index of order 1..4")
        out.append((idx, target))
    return out


@dataclass
class ConstraintSolution:
    voltages: dict
    residuals: dict
    iterations: int
    rank: int


def solve_voltage_constraints(expansions: dict, free, constraints="octupole", fixed=None,
                              tol=1e-8, max_iter=50, max_halvings=8, initial=None) -> ConstraintSolution:
    """Free group voltages that zero (or hit targets for) chosen Taylor coefficients.

    ``expansions`` maps every group to its unit-voltage expansion.  Groups
    not in ``free`` keep their ``fixed`` voltage (default 0).  A coefficient of
    order n is normalized by scale^-n times the largest scaled derivative
    any group produces, at the voltage scale of the problem.  Potentials are linear
    in the voltages so the Jacobian is constant; the damped Newton loop
    converges in one step unless targets depend on the voltages.

    Raises
    ------
    UnderdeterminedDesignError
        The free voltages cannot reach the targets (rank-deficient Jacobian).
    ConvergenceError
        No convergence within ``max_iter`` iterations.
    """
    groups = list(expansions)
    free = list(free)
    fixed = dict(fixed or {})
    for g in list(free) + list(fixed):
        if g not in expansions:
            raise ConfigError(f"unknown voltage group {g!r}")
    if set(free) & set(fixed):
        raise ConfigError(f"groups {sorted(set(free) & set(fixed))} are both free and fixed")
    cons = _constraint_list(constraints)
    if not free:
        raise ConfigError("no free voltages")
    scale = next(iter(expansions.values())).scale
    vscale = max([abs(v) for v in fixed.values()] + [1.0 if not fixed else 0.0]) or 1.0

    size = max(abs(T.coeffs[k]) * scale ** sum(k) for T in expansions.values() for k in INDICES if sum(k) > 0)
    if not size > 0:
        raise UnderdeterminedDesignError("every group expansion vanishes")
    norms = np.array([size * vscale / scale ** sum(idx) for idx, _ in cons])
    # a lever smaller than three times its fit error is indistinguishable from none
    J = np.array([[expansions[g].coeffs[idx] if abs(expansions[g].coeffs[idx]) > 3 * expansions[g].errors[idx]
                   else 0.0 for g in free] for idx, _ in cons]) / norms[:, None]
    base = {g: fixed.get(g, 0.0) for g in groups}

    def residual(vfree):
        v = dict(base)
        v.update(zip(free, vfree))
        return np.array([(sum(v[g] * expansions[g].coeffs[idx] for g in groups) - t) for idx, t in cons]) / norms

    def noise(vfree):
        # a coefficient cannot be zeroed more finely than the fit uncertainty allows
        v = dict(base)
        v.update(zip(free, vfree))
        return np.array([3 * sum(abs(v[g]) * expansions[g].errors[idx] for g in groups) for idx, _ in cons]) / norms

    x = np.array([float((initial or {}).get(g, 0.0)) for g in free])
    U, S, Vt = np.linalg.svd(J, full_matrices=False)
    rank = int(np.sum(S > 1e-9 * S.max())) if S.size and S.max() > 0 else 0
    if rank == 0:
        raise UnderdeterminedDesignError("the free voltages do not influence any constrained coefficient")
    Sinv = np.where(S > 1e-9 * S.max(), 1 / np.where(S > 0, S, 1), 0.0)
    pinv = (Vt.T * Sinv) @ U.T
    r = residual(x)
    for it in range(1, max_iter + 1):
        if np.all(np.abs(r) < np.maximum(tol, noise(x))):
            break
        step = -pinv @ r
        lam = 1.0
        for _ in range(max_halvings + 1):
            r_new = residual(x + lam * step)
            if np.linalg.norm(r_new) < np.linalg.norm(r) or lam < 2 ** -max_halvings:
                break
            lam /= 2
        if np.linalg.norm(r_new) >= np.linalg.norm(r):
            break  # no further progress possible
        x, r = x + lam * step, r_new
    else:
        it = max_iter
    limit = np.maximum(tol, noise(x))
    if np.any(np.abs(r) >= limit):
        worst = int(np.argmax(np.abs(r) / limit))
        msg = (f"constraint {cons[worst][0]} left at normalized residual {abs(r[worst]):.2e} "
               f"(Jacobian rank {rank} for {len(free)} free voltages)")
        if rank < min(len(free), len(cons)) or rank < np.linalg.matrix_rank(np.column_stack([J, r]), 1e-9):
            raise UnderdeterminedDesignError(msg)
        raise ConvergenceError(msg)
    volts = dict(base)
    volts.update(zip(free, (float(v) for v in x)))
    return ConstraintSolution(volts, {idx: float(v) for (idx, _), v in zip(cons, r)}, it, rank)


@dataclass
class TrapMetrics:
    gamma: float
    mu_x: float
    mu_y: float
    beta: float  # [V/m^4] at the dc voltages
    E_max: float  # [V/m], dc octupole solution
    E_max_mu: float  # [V/m], rf-dominated solution
    rho: float  # [m]
    scale: float  # [m]
    voltages: dict
    rf_voltages: dict
    rotated: bool
    rotation_angle: float
    alpha_z_rf: float
    octupole_residual: float
    E_max_location: tuple
    notes: list = field(default_factory=list)
    rho_c: float | None = None
    L0: float | None = None

    @property
    def mu(self) -> float:
        return min(self.mu_x, self.mu_y)

    def paper_units(self) -> dict:
        """beta in 1e-4 V/a^4, E_max in V/a, gamma in 1e-3, rho in a."""
        a = self.scale
        return {"beta_1e-4_V_per_a4": self.beta * a ** 4 * 1e4, "E_max_V_per_a": self.E_max * a,
                "gamma_1e-3": self.gamma * 1e3, "rho_a": self.rho / a,
                "E_max_mu_1e6_V_per_a": self.E_max_mu * a / 1e6}


def radial_quadrupole(T: TaylorExpansion4):
    """Principal radial curvatures of an expansion.

    Returns ``(q_x, q_y, angle, rotated)`` where V ~ q_x x'^2 + q_y y'^2 near the
    axis and x' is the principal axis closest to x.
    """
    c = T.coeffs
    H = np.array([[c[(2, 0, 0)], c[(1, 1, 0)] / 2], [c[(1, 1, 0)] / 2, c[(0, 2, 0)]]])
    w, V = np.linalg.eigh(H)
    ix = int(np.argmax(np.abs(V[0])))
    iy = 1 - ix
    vx = V[:, ix] * np.sign(V[0, ix] or 1.0)
    angle = math.atan2(vx[1], vx[0])
    size = max(abs(w).max(), 1e-300)
    rotated = abs(c[(1, 1, 0)]) > 1e-6 * size
    return float(w[ix]), float(w[iy]), angle, bool(rotated)


def geometry_factors(units, free, rf_groups=None, fixed=None, constraints="octupole", center=None,
                     step=0.01, rf_ratio=RF_RATIO, check_tol=1e-3, field_radius=None) -> TrapMetrics:
    """Compute gamma and mu for a factorized assembly.

    Parameters
    ----------
    units : fieldsolver.UnitSolutions
    free : list of dc group ids adjusted to satisfy ``constraints``
        (may be empty when the geometry alone provides the octupole).
    rf_groups : rf group ids; default every group whose electrodes are rf.
    fixed : dc voltages held constant, e.g. ``{"V3": 1.4}``.
    field_radius : search radius [m] for E_max; None searches every panel.
    """
    from .fieldsolver import max_surface_field

    asm = units.assembly
    groups = units.groups
    if rf_groups is None:
        rf_groups = [g for g in groups if asm.group_role(g) == "rf"]
    for g in rf_groups:
        if g not in groups:
            raise ConfigError(f"unknown rf group {g!r}")
    fixed = dict(fixed or {})
    exps = unit_expansions(units, center, step)
    dc_groups = [g for g in groups if g not in rf_groups]
    notes = []
    if free:
        dc_exps = {g: exps[g] for g in groups}
        sol = solve_voltage_constraints(dc_exps, free, constraints,
                                        fixed={**{g: 0.0 for g in rf_groups}, **fixed})
        volts = sol.voltages
    else:
        volts = {g: fixed.get(g, 0.0) for g in groups}
    for g in rf_groups:
        volts[g] = 0.0
    rho = asm.rho(center)
    vec = [volts[g] for g in groups]
    gamma = beta = E_max = residual = math.nan
    loc = (math.nan,) * 3
    if any(vec):
        T = superpose([exps[g] for g in groups], vec)
        report = octupole_check(T, tol=check_tol)
        if report.indeterminate:
            raise IndeterminateError(f"beta = {T.beta:.3g} is not resolved by the expansion")
        if not report.satisfied:
            key, val = report.worst
            notes.append(f"octupole residual {val:.2e} at coefficient {key}")
        E_max, loc = max_surface_field(units.solution(vec), field_radius)
        beta, residual = T.beta, report.worst[1]
        gamma = rho ** 3 * beta / E_max
    elif not rf_groups:
        raise ConfigError("no free voltages, no fixed dc voltage and no rf electrodes: nothing to evaluate")

    mu_x = mu_y = math.nan
    E_mu = math.nan
    angle, rotated, alpha_z = 0.0, False, math.nan
    rf_volts = {}
    if rf_groups:
        vdc = max(abs(volts[g]) for g in dc_groups) if dc_groups else 1.0
        rf_amp = rf_ratio * (vdc or 1.0)
        rf_volts = {**volts, **{g: rf_amp for g in rf_groups}}
        vec_rf = [rf_volts[g] for g in groups]
        T_rf = superpose([exps[g] for g in groups], vec_rf)
        qx, qy, angle, rotated = radial_quadrupole(T_rf)
        E_mu, _ = max_surface_field(units.solution(vec_rf), field_radius)
        mu_x = abs(qx) * rho / E_mu
        mu_y = abs(qy) * rho / E_mu
        alpha_z = T_rf.coeffs[(0, 0, 2)] / rf_amp
        if qx * qy > 0:
            notes.append("rf quadrupole is not a saddle in the radial plane")
    return TrapMetrics(float(gamma), float(mu_x), float(mu_y), float(beta), float(E_max), float(E_mu),
                       float(rho), float(asm.scale), volts, rf_volts, rotated, float(angle), float(alpha_z),
                       float(residual), tuple(float(x) for x in loc), notes)


# ---------------------------------------------------------------------------
# manufacturing imprecision
# ---------------------------------------------------------------------------

@dataclass
class ImprecisionResult:
    voltages: dict
    E_z: float  # [V/m] at the centre after the quadrupole solve
    z_c: float  # [m] centre-of-mass shift of the pair
    V_null: float  # [V] on the displaced electrode alone
    tolerance: float  # [V/m] d^3 beta
    quadrupole_after_null: dict  # Taylor coefficients [V/m^2]
    beta: float
    d: float


def imprecision_study(units, electrode_id: str, free, fixed, constraints="diagonal-quadrupole",
                      species: IonSpecies = CA43, center=None, step=0.01) -> ImprecisionResult:
    """Stray field from a displaced electrode and the voltage that cancels it.

    ``units`` must come from an assembly in which the displaced electrode has
    its own voltage group named ``electrode_id``; it is tied to the voltage of
    its original group (``parent``) while the other dc voltages are solved,
    then varied alone to null the axial field.
    """
    asm = units.assembly
    el = asm.electrode(electrode_id)
    if el.group != electrode_id:
        raise ConfigError(f"electrode {electrode_id!r} must be in its own voltage group for the study")
    parent = getattr(el, "parent_group", None)
    if parent is None or parent not in units.groups:
        raise ConfigError(f"electrode {electrode_id!r} has no parent group to tie its voltage to")
    exps = unit_expansions(units, center, step)
    tied = {g: T for g, T in exps.items() if g != electrode_id}
    tied[parent] = superpose([exps[parent], exps[electrode_id]], [1.0, 1.0])
    sol = solve_voltage_constraints(tied, free, constraints, fixed=fixed)
    volts = dict(sol.voltages)
    volts[electrode_id] = volts[parent]
    groups = list(exps)
    T = superpose([exps[g] for g in groups], [volts[g] for g in groups])
    E_z = -T.coeffs[(0, 0, 1)]
    beta = T.beta
    if not beta > 0:
        raise IndeterminateError(f"beta = {beta:.3g} must be positive for the pair-displacement estimate")
    d = equilibrium_separation(0.0, beta, species)
    z_c = E_z / (3 * beta * d * d)  # = q E_z / (m omega_1^2) at alpha = 0
    e_disp = -exps[electrode_id].coeffs[(0, 0, 1)]
    if e_disp == 0:
        raise IndeterminateError("the displaced electrode has no axial-field lever at the centre")
    V_null = volts[parent] - E_z / e_disp
    volts_null = dict(volts)
    volts_null[electrode_id] = V_null
    T_null = superpose([exps[g] for g in groups], [volts_null[g] for g in groups])
    quad = {k: T_null.coeffs[k] for k in QUADRUPOLE}
    return ImprecisionResult(volts, float(E_z), float(z_c), float(V_null), tilt_tolerance(beta, d), quad,
                             float(beta), float(d))


def radial_frequency_shift(omega_r: float, quadrupole: dict, species: IonSpecies = CA43):
    """Radial secular frequencies [rad/s] with a dc quadrupole added to the rf confinement.

    ``quadrupole`` holds Taylor coefficients [V/m^2] keyed by index; the
    curvature matrix of the x-y block adds q*lambda/m to omega_r^2 along each
    of its eigenvectors.  Returns the two frequencies, larger first.
    """
    c = lambda k: float(quadrupole.get(k, 0.0))
    hess = np.array([[2 * c((2, 0, 0)), c((1, 1, 0))], [c((1, 1, 0)), 2 * c((0, 2, 0))]])
    lam = np.linalg.eigvalsh(hess)[::-1]
    w2 = omega_r ** 2 + species.charge * lam / species.mass
    if np.any(w2 <= 0):
        raise AntiConfinedError("the dc quadrupole overwhelms the radial rf confinement")
    return float(np.sqrt(w2[0])), float(np.sqrt(w2[1]))


def displacement_study(assembly, electrode_id: str, axis: int, fraction: float, free, fixed,
                       rho_target: float | None = None, constraints="diagonal-quadrupole",
                       species: IonSpecies = CA43) -> ImprecisionResult:
    """Move one electrode by ``fraction`` * rho along ``axis`` and run the imprecision study.

    With ``rho_target`` [m] the assembly is first rescaled so the nearest
    electrode lies that far from the centre.
    """
    from .fieldsolver import factorize

    asm = assembly
    if rho_target is not None:
        asm = asm.rescaled(rho_target / asm.rho())
    offset = np.zeros(3)
    offset[axis] = fraction * asm.rho()
    moved = asm.isolated(electrode_id).with_electrode_moved(electrode_id, offset)
    return imprecision_study(factorize(moved), electrode_id, free, fixed, constraints, species)
