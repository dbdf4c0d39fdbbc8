"""Physical constants (SI) used throughout the package."""

from scipy import constants as _c

EPS0 = _c.epsilon_0
E_CHARGE = _c.elementary_charge
AMU = _c.atomic_mass
HBAR = _c.hbar

#: Coulomb constant 1/(4 pi eps0).
K_E = 1.0 / (4.0 * _c.pi * EPS0)
