import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from octotrap import charges as c
from octotrap.constants import EPS0
from octotrap.errors import AntiConfinedError, ConfigError, UnderdeterminedDesignError
from octotrap.multipole import expand, superpose
from octotrap.trap import (BE9, CA43, CD111, IonSpecies, ScaleAnalysis, equilibrium_separation, heating_exponent,
                           length_scale_L0, normal_modes, octupole_frequency, omega1_scaling_mhz,
                           radial_frequency_shift, radial_secular, required_Qac, scale_analysis,
                           solve_voltage_constraints, stability_condition, tilt_tolerance, well_geometry)

from oracles import quintic_separation

species_st = st.sampled_from([CA43, CD111, BE9, IonSpecies(40, 2)])
beta_st = st.floats(1e14, 1e24)


# --- species -------------------------------------------------------------

def test_species_parse():
    assert IonSpecies.parse("43:1") == CA43
    assert IonSpecies.parse("40:2").charge == pytest.approx(2 * CA43.charge)
    assert IonSpecies.parse("9") == BE9
    for bad in ("x:1", "43:y", "0:1", "43:0"):
        with pytest.raises(ConfigError):
            IonSpecies.parse(bad)


# --- double well ------------------------------------------------------------

def test_well_geometry():
    w = well_geometry(-1.0, 1.0)
    assert w.s == pytest.approx(1 / math.sqrt(2), rel=1e-15)
    assert well_geometry(0.5, 1.0).s == 0.0
    assert well_geometry(0.5, 1.0).depth == 0.0
    # 1 MHz Ca-43 curvature with wells 10 um from the centre
    w = well_geometry(-4e6, 4e6 / (2 * 1e-10))
    assert w.s == pytest.approx(10e-6, rel=1e-12)
    assert w.depth == pytest.approx(0.2e-3, rel=1e-12)
    assert w.tipover == pytest.approx(40 * 4 / 3, rel=1e-12)
    with pytest.raises(ConfigError):
        well_geometry(-1.0, 0.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(-1e9, 1e9), beta_st, species_st)
def test_separation_against_companion_matrix(alpha, beta, sp):
    d = equilibrium_separation(alpha, beta, sp)
    assert d == pytest.approx(quintic_separation(alpha, beta, sp.charge), rel=1e-9)
    C = sp.charge / (2 * math.pi * EPS0)
    terms = (beta * d ** 5, 2 * alpha * d ** 3, C)
    assert abs(sum(terms[:2]) - C) < 1e-10 * max(map(abs, terms))


@settings(max_examples=30, deadline=None)
@given(st.floats(-1e8, 1e8), beta_st, st.floats(1.1, 10.0))
def test_separation_monotone(alpha, beta, factor):
    assert equilibrium_separation(alpha, beta * factor) < equilibrium_separation(alpha, beta)


def test_separation_limits():
    beta = 1e19
    C = CA43.charge / (2 * math.pi * EPS0)
    assert equilibrium_separation(0.0, beta) == pytest.approx((C / beta) ** 0.2, rel=1e-12)
    # strong single well: two ions in a harmonic well
    alpha = 1e10
    assert equilibrium_separation(alpha, beta) == pytest.approx((C / 2 / alpha) ** (1 / 3), rel=0.01)
    # well separated double well with eps = 0.01: d = s (2 + eps)
    alpha = -1e7
    s = 10e-6
    beta = -alpha / (2 * s * s)
    eps = CA43.charge / (4 * math.pi * EPS0 * -alpha * (2 * s) ** 3)
    d = equilibrium_separation(alpha, beta)
    assert d == pytest.approx(s * (2 + eps), rel=0.005)
    assert normal_modes(alpha, beta).epsilon == pytest.approx(eps, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(beta_st, species_st)
def test_closed_form_frequency_matches_general(beta, sp):
    m = normal_modes(0.0, beta, sp)
    assert octupole_frequency(beta, sp) == pytest.approx(m.omega_1, rel=1e-10)
    assert m.epsilon_tilde == pytest.approx(2 / 3, rel=1e-12)
    assert m.omega_2 == pytest.approx(m.omega_1 * math.sqrt(5 / 3), rel=1e-12)


def test_mode_limits():
    beta = 1e19
    strong = normal_modes(1e11, beta)
    assert strong.epsilon_tilde == pytest.approx(2.0, rel=0.01)
    assert strong.omega_2 / strong.omega_1 == pytest.approx(math.sqrt(3), rel=0.01)
    s = 20e-6
    alpha = -2e7
    sep = normal_modes(alpha, -alpha / (2 * s * s))
    assert sep.epsilon < 0.01
    assert sep.omega_2 / sep.omega_1 - 1 == pytest.approx(sep.epsilon / 2, rel=0.05)
    assert sep.d > 2 * sep.s


@settings(max_examples=30, deadline=None)
@given(st.floats(-1e8, 1e9), beta_st)
def test_mode_invariants(alpha, beta):
    try:
        m = normal_modes(alpha, beta)
    except AntiConfinedError:
        return
    assert m.omega_2 >= m.omega_1
    assert 0 < m.epsilon_tilde <= 2 + 1e-12


# --- radial confinement and scaling -------------------------------------------

@pytest.mark.parametrize("sp,khz", [(CA43, 923), (CD111, 574), (BE9, 2017)])
def test_radial_secular_examples(sp, khz):
    r = radial_secular(1e8, 0.3, sp)
    assert r.omega_r / (2 * math.pi) / 1e3 == pytest.approx(khz, rel=0.005)
    assert radial_secular(4e8, 0.3, sp).omega_r == pytest.approx(2 * r.omega_r, rel=1e-12)


def test_radial_secular_range():
    for q_r in (0.0, 0.6, -0.1):
        with pytest.raises(ConfigError):
            radial_secular(1e8, q_r)


@settings(max_examples=30, deadline=None)
@given(beta_st, st.floats(1.2, 5.0), st.floats(0.05, 0.5), species_st)
def test_required_Qac_gives_requested_ratio(beta, ratio, q_r, sp):
    Q = required_Qac(ratio, q_r, beta, sp)
    w_r = radial_secular(Q, q_r, sp).omega_r
    assert w_r == pytest.approx(ratio * octupole_frequency(beta, sp), rel=1e-10)


def test_stability_condition():
    s = stability_condition(0.1, 0.1, 0.3)
    assert not s.stable and s.margin == pytest.approx(0.075)
    assert stability_condition(0.198e-3, 0.0104, 0.3).stable
    # threshold q_r = 4 gamma / mu for gamma = 0.0024, mu = 0.11
    q_min = 4 * 0.0024 / 0.11
    assert stability_condition(0.0024, 0.11, q_min * 1.001).stable
    assert not stability_condition(0.0024, 0.11, q_min * 0.999).stable
    with pytest.raises(ConfigError):
        stability_condition(-1.0, 0.1, 0.3)


def test_tilt_tolerance():
    assert tilt_tolerance(2.5e21, 1e-6) == pytest.approx(2500.0, rel=1e-12)


def test_length_scale_and_exponents():
    assert length_scale_L0(1e9) == pytest.approx(0.15e-6, rel=0.05)
    assert heating_exponent(2) == Fraction(6, 11)
    assert heating_exponent(4) == Fraction(12, 31)
    assert round(float(heating_exponent(2)), 3) == 0.545
    assert round(float(heating_exponent(4)), 3) == 0.387


def test_engineering_frequency_formula():
    gamma, E, rho = 0.02, 1e8, 50e-6
    beta = gamma * E / rho ** 3
    mhz = omega1_scaling_mhz(43, gamma, E * 1e-6, rho * 1e6)
    assert mhz == pytest.approx(octupole_frequency(beta) / (2 * math.pi) / 1e6, rel=0.01)


def test_scale_analysis_separation_and_crossing():
    sa = scale_analysis(0.02, 0.1, CA43, q_r=0.3, freq_ratio=2.0, E_max=1e8)
    # separation formula is the alpha = 0 root with beta = gamma E / rho^3
    for rho in (1e-6, 30e-6, 300e-6):
        beta = sa.gamma * sa.E_max / rho ** 3
        assert sa.separation(rho) == pytest.approx(equilibrium_separation(0.0, beta), rel=1e-12)
    # rho_c is where omega_r = freq_ratio * omega_1
    f = lambda r: math.log(sa.omega_r(r) / (sa.freq_ratio * sa.omega_1(r)))
    crossing = brentq(f, 1e-12, 1.0, xtol=1e-20, rtol=1e-14)
    assert sa.rho_c == pytest.approx(crossing, rel=0.01)
    # d equals rho at 16 nm for gamma = 0.02, L0 = 0.2 um
    E = 3 * CA43.charge / (math.pi * EPS0) * (36 / 0.2e-6) ** 2
    sb = scale_analysis(0.02, 0.1, E_max=E)
    assert sb.L0 == pytest.approx(0.2e-6, rel=1e-12)
    assert sb.separation(16e-9) / 16e-9 == pytest.approx(1.0, rel=0.02)
    assert ScaleAnalysis.heating_rho_exponent(2) == Fraction(-11, 10)
    assert ScaleAnalysis.heating_gamma_exponent() == Fraction(-3, 10)


# --- voltage constraints ------------------------------------------------------

@pytest.fixture(scope="module")
def ring_groups():
    """Three coaxial ring pairs; each pair is one voltage group (unit density)."""
    out = {}
    for name, z in (("A", 0.6), ("B", 1.2), ("C", 2.0)):
        cs = c.ChargeSet([c.ring(1e-12, (0, 0, s * z), (0, 0, 1), 1.0) for s in (1, -1)])
        out[name] = expand(lambda p, cs=cs: c.potential_at(cs, p), scale=1.0, step=0.01)
    return out


def test_axial_pair_reaches_octupole(ring_groups):
    sol = solve_voltage_constraints(ring_groups, ["A"], "octupole", fixed={"B": 1.0})
    T = superpose([ring_groups[g] for g in "ABC"], [sol.voltages[g] for g in "ABC"])
    assert abs(T.alpha) < 1e-8 * abs(T.beta)
    assert sol.rank == 1
    assert sol.voltages["C"] == 0.0


def test_solution_is_linear(ring_groups):
    one = solve_voltage_constraints(ring_groups, ["A"], "axial", fixed={"B": 1.0, "C": -0.3})
    two = solve_voltage_constraints(ring_groups, ["A"], "axial", fixed={"B": 2.0, "C": -0.6})
    assert two.voltages["A"] == pytest.approx(2 * one.voltages["A"], rel=1e-12)


def test_targets_and_errors(ring_groups):
    target = 5e-3
    sol = solve_voltage_constraints(ring_groups, ["A", "C"], [((0, 0, 2), target), ((0, 0, 4), 0.0)],
                                    fixed={"B": 1.0})
    T = superpose([ring_groups[g] for g in "ABC"], [sol.voltages[g] for g in "ABC"])
    assert T.alpha == pytest.approx(target, rel=1e-7)
    with pytest.raises(UnderdeterminedDesignError):
        solve_voltage_constraints(ring_groups, ["A"], [((1, 0, 0), 1.0)], fixed={"B": 1.0})
    with pytest.raises(UnderdeterminedDesignError):
        solve_voltage_constraints(ring_groups, ["A"], [((0, 0, 2), 0.0), ((0, 0, 4), 0.0)], fixed={"B": 1.0})
    with pytest.raises(ConfigError):
        solve_voltage_constraints(ring_groups, ["A"], "nonsense", fixed={"B": 1.0})
    with pytest.raises(ConfigError):
        solve_voltage_constraints(ring_groups, ["A"], "axial", fixed={"A": 1.0})
    with pytest.raises(ConfigError):
        solve_voltage_constraints(ring_groups, ["Z"], "axial")


# --- radial shift from a residual quadrupole ------------------------------------

def test_radial_frequency_shift():
    w = 2 * math.pi * 45e6
    k = CA43.charge / CA43.mass
    hi, lo = radial_frequency_shift(w, {(2, 0, 0): 1e9, (0, 2, 0): -1e9})
    assert hi == pytest.approx(math.sqrt(w * w + 2 * k * 1e9), rel=1e-12)
    assert lo == pytest.approx(math.sqrt(w * w - 2 * k * 1e9), rel=1e-12)
    # an xy cross term splits the modes along the diagonals by the same amount
    hi2, lo2 = radial_frequency_shift(w, {(1, 1, 0): 2e9})
    assert (hi2, lo2) == pytest.approx((hi, lo), rel=1e-12)
    # axial-only terms leave the radial modes alone
    assert radial_frequency_shift(w, {(0, 0, 2): 1e10}) == pytest.approx((w, w), rel=1e-15)
    with pytest.raises(AntiConfinedError):
        radial_frequency_shift(w, {(2, 0, 0): -1e13})


# --- assembly pipeline -------------------------------------------------------------

@pytest.mark.slow
def test_gamma_invariant_under_rescaling():
    from octotrap.cli import evaluate_geometry
    from octotrap.fieldsolver.geometry_file import load_geometry

    spec = load_geometry("standard-toroidal", resolution=8)
    base = evaluate_geometry(spec).metrics
    spec.assembly = spec.assembly.rescaled(10.0)
    big = evaluate_geometry(spec).metrics
    assert big.gamma == pytest.approx(base.gamma, rel=0.005)
    doubled = evaluate_geometry(load_geometry("standard-toroidal", resolution=8), fixed={"rings": -0.8554,
                                                                                        "caps": 2.0}).metrics
    assert doubled.gamma == pytest.approx(base.gamma, rel=1e-9)
    assert doubled.voltages["ring0"] == pytest.approx(2 * base.voltages["ring0"], rel=1e-9)


@pytest.mark.slow
def test_mu_invariant_under_rescaling():
    from octotrap.cli import evaluate_geometry
    from octotrap.fieldsolver.geometry_file import load_geometry

    spec = load_geometry("standard-four-cylinder", resolution=8)
    base = evaluate_geometry(spec).metrics
    spec.assembly = spec.assembly.rescaled(0.1)
    small = evaluate_geometry(spec).metrics
    assert small.mu_x == pytest.approx(base.mu_x, rel=0.005)
    a = stability_condition(0.1, base.mu_x, 0.3).margin
    b = stability_condition(0.1, small.mu_x, 0.3).margin
    assert a == pytest.approx(b, rel=0.005)


@pytest.mark.slow
def test_undisplaced_electrode_needs_no_null():
    from octotrap.fieldsolver.geometry_file import load_geometry
    from octotrap.trap import displacement_study

    spec = load_geometry("four-rod-octupole-2-2", resolution=4)
    res = displacement_study(spec.assembly, "e2", 2, 0.0, ["V1", "V2"], {"V3": 1.4, "rf": 0.0})
    scale = abs(res.voltages["V2"]) / spec.assembly.scale
    assert abs(res.E_z) < 1e-6 * scale
    assert res.V_null == pytest.approx(res.voltages["V2"], rel=1e-6)
