"""Axial motion of one or two ions in the driven quartic potential.

The potential on the axis is

    V(z, t) = -E0 z + alpha z^2 + beta z^4 + (alpha_z z^2 + beta_r z^4) cos(Omega t)

and the ions repel through the full Coulomb force.  Radial motion is frozen.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp

from .constants import EPS0, HBAR
from .errors import AntiConfinedError, CollisionError, ConfigError, ConvergenceError, IndeterminateError
from .trap import CA43, IonSpecies, equilibrium_separation, normal_modes

COLLISION_DISTANCE = 1e-9  # [m]


@dataclass(frozen=True)
class DriveSpec:
    Omega: float  # [rad/s]
    alpha_z: float = 0.0  # oscillating quadrupole [V/m^2]
    beta_r: float = 0.0  # oscillating octupole [V/m^4]
    alpha: float = 0.0  # static [V/m^2]
    beta: float = 0.0  # static [V/m^4]
    E0: float = 0.0  # static tilt [V/m]

    def __post_init__(self):
        if not self.Omega > 0:
            raise ConfigError("drive frequency Omega must be positive")

    @property
    def driven(self) -> bool:
        return self.alpha_z != 0 or self.beta_r != 0


@dataclass(frozen=True)
class MathieuParameters:
    a_z: float
    q_z: float
    alpha_prime: float  # static alpha plus the pseudopotential of the drive [V/m^2]


def mathieu_parameters(drive: DriveSpec, d: float, species: IonSpecies = CA43) -> MathieuParameters:
    """Centre-of-mass Mathieu parameters for a pair at separation ``d``.

    The oscillating octupole is dropped: it is smaller than the oscillating
    quadrupole by the square of d over the electrode scale.
    """
    k = 4 * species.charge / (species.mass * drive.Omega ** 2)
    a_z = k * (2 * drive.alpha + 3 * drive.beta * d * d)
    q_z = -k * drive.alpha_z
    return MathieuParameters(a_z, q_z, drive.alpha + abs(q_z * drive.alpha_z) / 4)


def pseudopotential_alpha(drive: DriveSpec, species: IonSpecies = CA43) -> float:
    """Static alpha' that the drive adds to alpha."""
    return mathieu_parameters(drive, 0.0, species).alpha_prime


def predicted_secular_frequency(drive: DriveSpec, species: IonSpecies = CA43) -> float:
    """omega_c = sqrt((q/m)(2 alpha + 3 beta d^2 + |q_z alpha_z| / 2)) with d at the pseudopotential equilibrium."""
    ap = pseudopotential_alpha(drive, species)
    d = equilibrium_separation(ap, drive.beta, species) if drive.beta > 0 else 0.0
    mp = mathieu_parameters(drive, d, species)
    w2 = species.charge / species.mass * (2 * drive.alpha + 3 * drive.beta * d * d + abs(mp.q_z * drive.alpha_z) / 2)
    if w2 <= 0:
        raise AntiConfinedError("no secular confinement for this drive")
    return math.sqrt(w2)


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    t: np.ndarray  # [s]
    z: np.ndarray  # (n_ions, n_samples) [m]
    v: np.ndarray  # (n_ions, n_samples) [m/s]
    drive: DriveSpec
    species: IonSpecies
    tol: float
    method: str = "DOP853"
    alpha_schedule: object = None  # callable t -> alpha, or None for constant
    energy_ledger: np.ndarray = field(default=None)  # (n_periods, 2): period mid-time, mean energy [J]

    @property
    def n_ions(self) -> int:
        return self.z.shape[0]

    def alpha_at(self, t):
        if self.alpha_schedule is None:
            return np.full_like(np.asarray(t, float), self.drive.alpha)
        return self.alpha_schedule(t)

    def energy(self) -> np.ndarray:
        """Instantaneous total energy [J] including the oscillating potential."""
        return _energy(self.z, self.v, self.t, self.drive, self.species, self.alpha_at(self.t), static_only=False)

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = ["t"] + [f"z{i + 1}" for i in range(self.n_ions)] + [f"v{i + 1}" for i in range(self.n_ions)]
        buf.write(",".join(cols) + "\n")
        data = np.vstack([self.t, self.z, self.v]).T
        np.savetxt(buf, data, delimiter=",", fmt="%.12e")
        return buf.getvalue()


def _potential(z, t, drive, alpha, static_only):
    V = -drive.E0 * z + alpha * z ** 2 + drive.beta * z ** 4
    if not static_only:
        V = V + (drive.alpha_z * z ** 2 + drive.beta_r * z ** 4) * np.cos(drive.Omega * t)
    return V


def _energy(z, v, t, drive, species, alpha, static_only):
    q, m = species.charge, species.mass
    E = 0.5 * m * np.sum(v ** 2, axis=0) + q * np.sum(_potential(z, t, drive, alpha, static_only), axis=0)
    if z.shape[0] == 2:
        E = E + q * q / (4 * math.pi * EPS0 * np.abs(z[1] - z[0]))
    return E


def integrate_two_ion(drive: DriveSpec, species: IonSpecies = CA43, z0=(0.0, 0.0), v0=None,
                      duration: float = 0.0, tol: float = 1e-10, samples_per_period: int = 32,
                      alpha_schedule=None, t0: float = 0.0) -> Trajectory:
    """Integrate the axial equations of motion with an adaptive 8th-order Runge-Kutta.

    ``z0`` holds one or two initial positions [m]; ``alpha_schedule`` makes the
    static alpha time dependent.  Samples are taken ``samples_per_period``
    times per drive period.  Raises CollisionError when two ions come within
    1 nm of each other.
    """
    if not 1e-12 <= tol <= 1e-6:
        raise ConfigError(f"tol = {tol} is outside [1e-12, 1e-6]")
    if not duration > 0:
        raise ConfigError("duration must be positive")
    z0 = np.atleast_1d(np.asarray(z0, float))
    n = len(z0)
    if n not in (1, 2):
        raise ConfigError("one or two ions are supported")
    if n == 2 and abs(z0[1] - z0[0]) < COLLISION_DISTANCE:
        raise ConfigError("the ions must start separated")
    v0 = np.zeros(n) if v0 is None else np.atleast_1d(np.asarray(v0, float))
    q, m = species.charge, species.mass
    kc = q * q / (4 * math.pi * EPS0 * m)
    Om = drive.Omega
    alpha_of = (lambda t: drive.alpha) if alpha_schedule is None else alpha_schedule

    def rhs(t, y):
        z, v = y[:n], y[n:]
        c = math.cos(Om * t)
        a = -(q / m) * (-drive.E0 + 2 * (alpha_of(t) + drive.alpha_z * c) * z
                        + 4 * (drive.beta + drive.beta_r * c) * z ** 3)
        if n == 2:
            dz = z[1] - z[0]
            f = kc * math.copysign(1.0, dz) / (dz * dz)
            a = a + np.array([-f, f])
        return np.concatenate([v, a])

    events = None
    if n == 2:
        def collide(t, y):
            return abs(y[1] - y[0]) - COLLISION_DISTANCE
        collide.terminal = True
        events = [collide]

    # sample on an exact sub-multiple of the drive period so boxcar averages are exact
    dt = 2 * math.pi / Om / samples_per_period
    t_eval = t0 + dt * np.arange(int(math.floor(duration / dt * (1 + 1e-12))) + 1)
    t_eval = t_eval[t_eval <= t0 + duration]
    # absolute tolerances on the natural scales of the problem
    L = max(float(np.max(np.abs(z0))), float(np.ptp(z0)) if n == 2 else 0.0, 1e-9)
    atol = np.concatenate([np.full(n, tol * L), np.full(n, tol * L * Om)])
    sol = solve_ivp(rhs, (t0, t0 + duration), np.concatenate([z0, v0]), method="DOP853", t_eval=t_eval,
                    rtol=tol, atol=atol, events=events, first_step=dt / 8)
    if sol.status == 1:
        raise CollisionError(f"ions closer than {COLLISION_DISTANCE:g} m at t = {sol.t_events[0][0]:.6g} s")
    if sol.status != 0:
        raise ConvergenceError(f"integration failed: {sol.message}")
    traj = Trajectory(sol.t, sol.y[:n], sol.y[n:], drive, species, tol, "DOP853", alpha_schedule)
    traj.energy_ledger = _ledger(traj, samples_per_period)
    return traj


def _ledger(traj: Trajectory, per: int) -> np.ndarray:
    """Energy averaged over each complete drive period."""
    E = traj.energy()
    k = (len(E) - 1) // per
    if k == 0:
        return np.empty((0, 2))
    Eb = E[: k * per].reshape(k, per).mean(axis=1)
    tb = traj.t[: k * per].reshape(k, per).mean(axis=1)
    return np.column_stack([tb, Eb])


# ---------------------------------------------------------------------------
# spectral analysis
# ---------------------------------------------------------------------------

def secular_frequency(traj: Trajectory, mode: str = "com") -> float:
    """Dominant sub-drive angular frequency of the centre-of-mass (or stretch) coordinate.

    Hann-windowed periodogram, refined by a parabola through the log
    magnitudes of the peak bin and its neighbours.
    """
    if mode == "com":
        x = traj.z.mean(axis=0)
    elif mode == "stretch":
        if traj.n_ions != 2:
            raise ConfigError("the stretch mode needs two ions")
        x = traj.z[1] - traj.z[0]
    else:
        raise ConfigError(f"unknown mode {mode!r}")
    dt = traj.t[1] - traj.t[0]
    x = x - x.mean()
    spec = np.abs(np.fft.rfft(x * np.hanning(len(x))))
    freqs = 2 * math.pi * np.fft.rfftfreq(len(x), dt)
    limit = traj.drive.Omega / 2
    band = (freqs > 0) & (freqs < limit)
    if not np.any(band) or not np.any(spec[band] > 0):
        raise IndeterminateError("no spectral power below half the drive frequency")
    idx = np.flatnonzero(band)
    k = idx[np.argmax(spec[idx])]
    if k <= 1 or k >= len(spec) - 1:
        raise IndeterminateError("secular peak at the edge of the spectrum; integrate for longer")
    la, lb, lc = np.log(spec[k - 1:k + 2] + 1e-300)
    shift = 0.5 * (la - lc) / (la - 2 * lb + lc)
    w = freqs[k] + shift * (freqs[1] - freqs[0])
    periods = (traj.t[-1] - traj.t[0]) * w / (2 * math.pi)
    if periods < 20:
        raise IndeterminateError(f"only {periods:.1f} secular periods in the trajectory; need 20")
    if traj.drive.driven and traj.drive.Omega < 5 * w:
        raise IndeterminateError("secular and drive frequencies are within a factor of 5")
    return float(w)


# ---------------------------------------------------------------------------
# separation ramps
# ---------------------------------------------------------------------------

class PiecewiseLinearRamp:
    """alpha(t) interpolated linearly through (t, alpha) knots, held constant outside."""

    def __init__(self, knots):
        knots = sorted((float(t), float(a)) for t, a in knots)
        if len(knots) < 2:
            raise ConfigError("a ramp needs at least two (t, alpha) knots")
        self.t = np.array([k[0] for k in knots])
        self.alpha = np.array([k[1] for k in knots])
        if np.any(np.diff(self.t) <= 0):
            raise ConfigError("ramp times must be strictly increasing")

    def __call__(self, t):
        return np.interp(t, self.t, self.alpha) if np.ndim(t) else float(np.interp(t, self.t, self.alpha))

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    @classmethod
    def linear(cls, alpha_start, alpha_end, duration):
        return cls([(0.0, alpha_start), (duration, alpha_end)])

    @classmethod
    def smooth(cls, alpha_start, alpha_end, duration):
        return SmoothRamp(alpha_start, alpha_end, duration)


class SmoothRamp(PiecewiseLinearRamp):
    """Smootherstep profile 6u^5 - 15u^4 + 10u^3 from alpha_start to alpha_end.

    Evaluated analytically: its first two derivatives vanish at both ends and
    it has no interior kinks, so slow ramps leave the ions unexcited.
    """

    def __init__(self, alpha_start, alpha_end, duration):
        if duration <= 0:
            raise ConfigError("ramp duration must be positive")
        super().__init__([(0.0, alpha_start), (duration, alpha_end)])

    def __call__(self, t):
        u = np.clip(np.asarray(t, float) / self.t[-1], 0.0, 1.0)
        a = self.alpha[0] + (self.alpha[1] - self.alpha[0]) * u ** 3 * (10 - 15 * u + 6 * u * u)
        return a if np.ndim(t) else float(a)


@dataclass
class SeparationResult:
    excitation: float  # secular energy gained, in quanta of the final omega_1
    energy_gain: float  # [J]
    separated: bool
    diagnostic: str
    omega_1_final: float
    trajectory: Trajectory


def _pair_equilibrium(alpha, beta, species, E0=0.0):
    """Static equilibrium positions of the pair (tilt field included by relaxation)."""
    d = equilibrium_separation(alpha, beta, species)
    if E0 == 0:
        return np.array([-d / 2, d / 2])
    from scipy.optimize import fsolve

    q = species.charge
    kc = q / (4 * math.pi * EPS0)

    def grad(z):
        dz = z[1] - z[0]
        f = kc / (dz * dz)
        g = -E0 + 2 * alpha * z + 4 * beta * z ** 3
        return g + np.array([f, -f])

    return fsolve(grad, np.array([-d / 2, d / 2]), xtol=1e-14)


def periodic_orbit(drive: DriveSpec, species: IonSpecies, z_guess, tol: float = 1e-12):
    """Initial positions and velocities at t = 0 of the pair orbit that repeats every drive period.

    Newton shooting over one period, started from the first-order micromotion
    of the static (pseudopotential) equilibrium ``z_guess``.
    """
    from scipy.optimize import fsolve

    z_guess = np.asarray(z_guess, float)
    mp = mathieu_parameters(drive, 0.0, species)
    z_first = z_guess * (1 - mp.q_z / 2)
    T = 2 * math.pi / drive.Omega
    L = float(np.ptp(z_guess))
    V = L * drive.Omega

    def flow(y):
        z0, v0 = y[:2] * L, y[2:] * V
        tr = integrate_two_ion(drive, species, z0, v0, T, tol, samples_per_period=1)
        return np.concatenate([(tr.z[:, -1] - z0) / L, (tr.v[:, -1] - v0) / V])

    y0 = np.concatenate([z_first / L, np.zeros(2)])
    y, info, ier, msg = fsolve(flow, y0, full_output=True, xtol=1e-12)
    if ier != 1 or np.max(np.abs(flow(y))) > 1e-9:
        raise ConvergenceError(f"no drive-periodic orbit found: {msg}")
    return y[:2] * L, y[2:] * V


def simulate_separation(ramp: PiecewiseLinearRamp, drive: DriveSpec, species: IonSpecies = CA43,
                        settle_periods: float = 20.0, tol: float = 1e-10,
                        samples_per_period: int = 16) -> SeparationResult:
    """Run a pair through a separation ramp of the static alpha and measure the heating.

    The pair starts on the drive-periodic orbit for the initial alpha (at
    rest at the static equilibrium when undriven), so it carries no secular
    energy and the reported excitation is the final energy alone.  After the ramp the final alpha is held
    for ``settle_periods`` periods of the final omega_1.  The energy of each
    normal mode is m_eff omega^2 times the variance of its drive-averaged
    coordinate over the hold, which ignores static offsets of the orbit.
    """
    if not drive.beta > 0:
        raise ConfigError("simulate_separation needs beta > 0")
    shift = pseudopotential_alpha(replace(drive, alpha=0.0), species)
    a_start, a_end = ramp.alpha[0], ramp.alpha[-1]
    if not a_start > 0 or not a_end < 0:
        raise ConfigError("the ramp must start with alpha > 0 and end with alpha < 0")
    z_start = _pair_equilibrium(a_start + shift, drive.beta, species, drive.E0)
    v_start = None
    if drive.driven:
        z_start, v_start = periodic_orbit(replace(drive, alpha=a_start), species, z_start)
    final = normal_modes(a_end + shift, drive.beta, species)
    hold = settle_periods * 2 * math.pi / final.omega_1
    t0 = ramp.t[0]
    traj = integrate_two_ion(replace(drive, alpha=a_start), species, z_start, v_start,
                             ramp.duration + hold, tol, samples_per_period, ramp, t0=t0)
    per = samples_per_period
    n_per = int(hold * drive.Omega / (2 * math.pi))
    if n_per < 2:
        raise ConfigError("hold time shorter than two drive periods")
    end = len(traj.t) - 1
    window = slice(end - n_per * per, end)
    zb = traj.z[:, window].reshape(2, n_per, per).mean(axis=2)
    # energy of each normal mode from the variance of its drive-averaged coordinate
    com = zb.mean(axis=0)
    stretch = zb[1] - zb[0]
    m = species.mass
    gain = float(2 * m * final.omega_1 ** 2 * com.var() + 0.5 * m * final.omega_2 ** 2 * stretch.var())
    quanta = gain / (HBAR * final.omega_1)
    zf = traj.z[:, -1]
    separated = bool(zf[0] < 0 < zf[1] or zf[1] < 0 < zf[0])
    diag = "ok"
    if not separated:
        diag = "both ions ended in one well: the residual tilt field tipped the double well over"
    return SeparationResult(quanta, gain, separated, diag, final.omega_1, traj)
