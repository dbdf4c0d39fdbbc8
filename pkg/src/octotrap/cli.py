"""Command-line front end.

Every command reads its inputs from flags and a geometry file, writes one
table (CSV or JSON) and stamps it with the package version and the mesh
resolution.  Numbers are printed to 12 significant digits so repeated runs
are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .errors import (ConfigError, ConvergenceError, GeometryError, OctotrapError)

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CONVERGENCE = 0, 2, 3, 4
AXES = "xyz"


# ---------------------------------------------------------------------------
# pipeline shared by metrics, sweep and the acceptance tests
# ---------------------------------------------------------------------------

@dataclass
class GeometryRun:
    spec: object  # GeometrySpec
    units: object  # UnitSolutions
    center: np.ndarray
    metrics: object  # TrapMetrics


def evaluate_geometry(spec, free=None, constraints=None, fixed=None, rf=None) -> GeometryRun:
    """Factorize a loaded geometry and compute its figures of merit.

    Arguments left as None fall back to the geometry's ``analysis`` block.
    A ``center_search`` entry there moves the expansion point to the rf null.
    """
    from .fieldsolver import factorize
    from .trap import find_rf_null, geometry_factors

    an = spec.analysis
    free = an.free if free is None else free
    constraints = an.constraints if constraints is None else constraints
    fixed = an.fixed if fixed is None else fixed
    rf = an.rf if rf is None else rf
    units = factorize(spec.assembly)
    center = np.asarray(spec.assembly.center, float)
    if an.center_search:
        cs = an.center_search
        if not rf:
            raise ConfigError("center_search needs rf groups")
        center = find_rf_null(units, rf, int(cs.get("axis", 1)), tuple(cs.get("range", (0.3, 3.0))))
    m = geometry_factors(units, free, rf_groups=rf, fixed=fixed, constraints=constraints, center=center,
                         field_radius=an.field_radius)
    return GeometryRun(spec, units, center, m)


def metrics_row(run: GeometryRun, species, q_r: float, paper_units: bool = False) -> dict:
    from .trap import scale_analysis, stability_condition

    m = run.metrics
    asm = run.spec.assembly
    row = {"geometry": asm.name, "panels": len(asm.mesh)}
    if paper_units:
        row.update(m.paper_units())
    else:
        row.update({"gamma": m.gamma, "beta_V_per_m4": m.beta, "E_max_V_per_m": m.E_max, "rho_m": m.rho})
    row.update({"mu_x": m.mu_x, "mu_y": m.mu_y, "rotated": m.rotated})
    for g, v in m.voltages.items():
        if g in (run.spec.analysis.rf or []):
            continue
        row[f"V_{g}"] = v
    g_abs, mu = abs(m.gamma), m.mu
    if g_abs > 0 and mu > 0 and math.isfinite(g_abs) and math.isfinite(mu):
        st = stability_condition(g_abs, mu, q_r)
        sa = scale_analysis(g_abs, mu, species, q_r)
        row.update({"stable": st.stable, "margin": st.margin, "rho_c_m": sa.rho_c, "L0_m": sa.L0})
    else:
        row.update({"stable": "", "margin": "", "rho_c_m": "", "L0_m": ""})
    row["octupole_residual"] = m.octupole_residual
    row["notes"] = "; ".join(m.notes)
    return row


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if not math.isfinite(v) else float(f"{v:.12g}")
    if isinstance(v, (int, np.integer)):
        return int(v)
    return v


def render(rows: list, fmt: str, stamp: dict) -> str:
    rows = [{k: _fmt(v) for k, v in r.items()} for r in rows]
    if fmt == "json":
        return json.dumps({**stamp, "rows": rows}, indent=2, allow_nan=True) + "\n"
    buf = io.StringIO()
    buf.write("# " + " ".join(f"{k}={v}" for k, v in stamp.items()) + "\n")
    fields = []
    for r in rows:
        fields += [k for k in r if k not in fields]
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def _emit(args, rows, extra_stamp=None):
    stamp = {"octotrap": __version__, "command": args.command}
    if getattr(args, "_resolution", None) is not None:
        stamp["resolution"] = args._resolution
    stamp.update(extra_stamp or {})
    text = render(rows, args.format, stamp)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _load(args, overrides=None):
    from .fieldsolver.geometry_file import load_geometry

    if not args.geometry:
        raise ConfigError("--geometry is required")
    spec = load_geometry(args.geometry, overrides, args.resolution)
    args._resolution = spec.assembly.resolution
    return spec


def _parse_voltages(items) -> dict:
    out = {}
    for item in items or []:
        for part in item.split(","):
            if "=" not in part:
                raise ConfigError(f"voltage assignments look like GROUP=VALUE, got {part!r}")
            k, v = part.split("=", 1)
            try:
                out[k.strip()] = float(v)
            except ValueError:
                raise ConfigError(f"voltage for {k!r} is not a number: {v!r}") from None
    return out


def _free(args):
    if args.free is None:
        return None
    return [g for item in args.free for g in item.split(",") if g]


def cmd_catalog(args):
    from .charges import CATALOG, catalog_octupole, potential_at
    from .multipole import expand, octupole_check

    names = [args.name] if args.name else list(CATALOG)
    rows = []
    for name in names:
        kw = {"a": args.a, "f": args.f, "q": args.q, "lam": args.q}
        if args.d is not None:
            kw["d"] = args.d
        cs, beta = catalog_octupole(name, **kw)
        row = {"name": name, "elements": len(cs), "beta_V_per_m4": beta}
        if args.check:
            T = expand(lambda p: potential_at(cs, p), scale=args.a, step=0.01)
            rep = octupole_check(T)
            row.update({"beta_extracted": T.beta, "octupole_satisfied": rep.satisfied})
        if args.charges:
            row["charges"] = json.dumps(cs.to_records(), sort_keys=True)
        rows.append(row)
    _emit(args, rows)


def cmd_analyze(args):
    from .fieldsolver import factorize
    from .multipole import octupole_check, superpose
    from .trap import unit_expansions

    spec = _load(args)
    volts = dict(spec.analysis.fixed)
    volts.update(_parse_voltages(args.voltages))
    units = factorize(spec.assembly)
    unknown = set(volts) - set(units.groups)
    if unknown:
        raise ConfigError(f"unknown voltage groups {sorted(unknown)}; groups are {units.groups}")
    if not any(volts.values()):
        raise ConfigError("every voltage is zero; give --voltages GROUP=VALUE")
    exps = unit_expansions(units)
    T = superpose([exps[g] for g in units.groups], [volts.get(g, 0.0) for g in units.groups])
    rep = octupole_check(T)
    rows = [{"i": i, "j": j, "k": k, "coefficient": v, "error": e} for i, j, k, v, e in T.to_rows()]
    _emit(args, rows, {"beta": f"{T.beta:.12g}", "octupole": rep.satisfied,
                       "worst": f"{rep.worst[0]}:{rep.worst[1]:.3g}"})


def cmd_solve(args):
    from .fieldsolver import factorize
    from .trap import solve_voltage_constraints, unit_expansions

    spec = _load(args)
    an = spec.analysis
    free = _free(args) if args.free is not None else an.free
    fixed = {**an.fixed, **_parse_voltages(args.fixed)}
    for g in an.rf or []:
        fixed.setdefault(g, 0.0)
    units = factorize(spec.assembly)
    sol = solve_voltage_constraints(unit_expansions(units), free, args.constraints or an.constraints, fixed)
    rows = [{"group": g, "voltage": v, "free": g in free} for g, v in sol.voltages.items()]
    _emit(args, rows, {"iterations": sol.iterations, "rank": sol.rank})


def cmd_metrics(args):
    from .trap import IonSpecies

    spec = _load(args)
    run = evaluate_geometry(spec, _free(args), args.constraints)
    _emit(args, [metrics_row(run, IonSpecies.parse(args.species), args.qr, args.paper_units)])


def _parse_sweep(text):
    try:
        name, rng = text.split("=", 1)
        lo, hi, n = rng.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise ConfigError(f"--sweep expects param=lo:hi:n, got {text!r}") from None
    if n < 1 or (n > 1 and lo == hi):
        raise ConfigError(f"sweep range for {name!r} is empty")
    return name.strip(), list(np.linspace(lo, hi, n)) if n > 1 else [lo]


def _sweep_point(job):
    from .fieldsolver.geometry_file import load_geometry
    from .trap import IonSpecies

    geometry, overrides, resolution, free, constraints, species, q_r, paper = job
    row = {k: v for k, v in overrides.items()}
    try:
        spec = load_geometry(geometry, overrides, resolution)
        run = evaluate_geometry(spec, free, constraints)
        row.update(metrics_row(run, IonSpecies.parse(species), q_r, paper))
        row["error"] = ""
    except (ConfigError, GeometryError):
        raise
    except OctotrapError as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def cmd_sweep(args):
    if not args.sweep:
        raise ConfigError("give at least one --sweep param=lo:hi:n")
    if len(args.sweep) > 2:
        raise ConfigError("sweeps take one or two parameters")
    axes = [_parse_sweep(s) for s in args.sweep]
    spec = _load(args)  # validates the file and the parameter names up front
    for name, _ in axes:
        if name not in spec.parameters:
            raise ConfigError(f"unknown sweep parameter {name!r}; known: {sorted(spec.parameters)}")
    grid = [{axes[0][0]: float(v)} for v in axes[0][1]]
    if len(axes) == 2:
        grid = [{**g, axes[1][0]: float(v)} for g in grid for v in axes[1][1]]
    jobs = [(args.geometry, g, args.resolution, _free(args), args.constraints, args.species, args.qr,
             args.paper_units) for g in grid]
    workers = args.workers or os.cpu_count() or 1
    if workers == 1 or len(jobs) == 1:
        rows = [_sweep_point(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, jobs))  # map keeps input order
    _emit(args, rows)


def cmd_dynamics(args):
    from .dynamics import DriveSpec, PiecewiseLinearRamp, simulate_separation
    from .trap import IonSpecies

    species = IonSpecies.parse(args.species)
    Omega = 2 * math.pi * args.drive_mhz * 1e6
    alpha_z = -args.qz * species.mass * Omega ** 2 / (4 * species.charge)
    drive = DriveSpec(Omega, alpha_z=alpha_z, beta=args.beta, E0=args.E0)
    make = PiecewiseLinearRamp.linear if args.ramp == "linear" else PiecewiseLinearRamp.smooth
    rows = []
    for T in args.duration:
        r = simulate_separation(make(args.alpha_start, args.alpha_end, T), drive, species,
                                settle_periods=args.settle, tol=args.tol)
        rows.append({"duration_s": T, "excitation_quanta": r.excitation, "energy_gain_J": r.energy_gain,
                     "separated": r.separated, "omega_1_final_rad_s": r.omega_1_final,
                     "diagnostic": r.diagnostic})
        if args.trajectory:
            base, ext = os.path.splitext(args.trajectory)
            path = args.trajectory if len(args.duration) == 1 else f"{base}_{T:.6g}{ext or '.csv'}"
            with open(path, "w", newline="") as fh:
                fh.write(r.trajectory.to_csv())
    _emit(args, rows, {"qz": args.qz, "drive_mhz": args.drive_mhz, "tol": args.tol})


def cmd_imprecision(args):
    from .trap import IonSpecies, displacement_study, radial_frequency_shift

    spec = _load(args)
    an = spec.analysis
    block = dict(an.imprecision or {})
    electrode = args.electrode or block.get("electrode")
    if not electrode:
        raise ConfigError("no electrode to displace: give --electrode or an analysis.imprecision block")
    fraction = args.fraction if args.fraction is not None else float(block.get("displacement", 0.05))
    fixed = {**an.fixed, **{str(k): float(v) for k, v in (block.get("fixed_volts") or {}).items()}}
    fixed.update(_parse_voltages(args.fixed))
    for g in an.rf or []:
        fixed.setdefault(g, 0.0)
    rho_um = args.rho_um if args.rho_um is not None else block.get("scale_um")
    species = IonSpecies.parse(args.species)
    free = _free(args) if args.free is not None else an.free
    omega_r = 2 * math.pi * args.radial_mhz * 1e6
    rows = []
    for ax in args.axis:
        res = displacement_study(spec.assembly, electrode, AXES.index(ax), fraction, free, fixed,
                                 None if rho_um is None else float(rho_um) * 1e-6,
                                 args.constraints or "diagonal-quadrupole", species)
        parent = spec.assembly.electrode(electrode).group
        hi, lo = radial_frequency_shift(omega_r, res.quadrupole_after_null, species)
        row = {"axis": ax, "fraction": fraction, f"V_{parent}": res.voltages[parent],
               "E_z_V_per_m": res.E_z, "z_c_m": res.z_c, "V_null": res.V_null,
               "tolerance_V_per_m": res.tolerance, "beta_V_per_m4": res.beta}
        for (i, j, k), v in res.quadrupole_after_null.items():
            row[f"c{i}{j}{k}_V_per_m2"] = v
        row["radial_shift_hi_Hz"] = (hi - omega_r) / (2 * math.pi)
        row["radial_shift_lo_Hz"] = (lo - omega_r) / (2 * math.pi)
        rows.append(row)
    _emit(args, rows, {"electrode": electrode})


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write the table here instead of stdout")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--species", default="43:1", help="mass number and charge state, A:charge")

    geo = argparse.ArgumentParser(add_help=False)
    geo.add_argument("--geometry", help="geometry file or bundled geometry name")
    geo.add_argument("--resolution", type=float, help="panels per a^2 near the centre")
    geo.add_argument("--constraints", help="constraint set name (octupole, quadrupole, planar, ...)")
    geo.add_argument("--free", action="append", help="free voltage groups, comma separated")
    geo.add_argument("--qr", type=float, default=0.3, help="radial Mathieu q parameter")
    geo.add_argument("--paper-units", action="store_true",
                     help="report beta in 1e-4 V/a^4, E_max in V/a, gamma in 1e-3, rho in a")

    p = argparse.ArgumentParser(prog="octotrap", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"octotrap {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("catalog", parents=[common], help="closed-form octupole charge configurations")
    c.add_argument("name", nargs="?", help="catalog entry; omit to list all")
    c.add_argument("--a", type=float, default=1.0, help="length scale [m]")
    c.add_argument("--q", type=float, default=1.0, help="charge [C] or line density [C/m]")
    c.add_argument("--d", type=float)
    c.add_argument("--f", type=float, default=2.0)
    c.add_argument("--check", action="store_true", help="also extract beta numerically")
    c.add_argument("--charges", action="store_true", help="include the charge records")
    c.set_defaults(func=cmd_catalog)

    a = sub.add_parser("analyze", parents=[common, geo], help="Taylor expansion and octupole report at the centre")
    a.add_argument("--voltages", action="append", help="GROUP=VALUE assignments")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("solve", parents=[common, geo], help="voltages meeting a constraint set")
    s.add_argument("--fixed", action="append", help="GROUP=VALUE held constant")
    s.set_defaults(func=cmd_solve)

    m = sub.add_parser("metrics", parents=[common, geo], help="gamma, mu, rho_c and stability")
    m.set_defaults(func=cmd_metrics)

    w = sub.add_parser("sweep", parents=[common, geo], help="metrics over one or two geometry parameters")
    w.add_argument("--sweep", action="append", help="param=lo:hi:n")
    w.add_argument("--workers", type=int, default=None, help="worker processes (default: logical cores)")
    w.set_defaults(func=cmd_sweep)

    d = sub.add_parser("dynamics", parents=[common], help="two-ion separation ramp")
    d.add_argument("--beta", type=float, required=True, help="octupole coefficient [V/m^4]")
    d.add_argument("--alpha-start", type=float, required=True, help="[V/m^2], > 0")
    d.add_argument("--alpha-end", type=float, required=True, help="[V/m^2], < 0")
    d.add_argument("--duration", type=float, action="append", required=True, help="ramp time [s]; repeatable")
    d.add_argument("--ramp", choices=("smooth", "linear"), default="smooth")
    d.add_argument("--drive-mhz", type=float, default=20.0)
    d.add_argument("--qz", type=float, default=0.0, help="axial Mathieu q of the rf drive")
    d.add_argument("--E0", type=float, default=0.0, help="stray axial field [V/m]")
    d.add_argument("--settle", type=float, default=20.0, help="hold after the ramp, in final secular periods")
    d.add_argument("--tol", type=float, default=1e-10)
    d.add_argument("--trajectory", help="write the trajectory CSV here")
    d.set_defaults(func=cmd_dynamics)

    i = sub.add_parser("imprecision", parents=[common, geo], help="displaced-electrode study")
    i.add_argument("--electrode")
    i.add_argument("--fraction", type=float, help="displacement in units of rho")
    i.add_argument("--axis", default="xyz", help="any of x, y, z")
    i.add_argument("--fixed", action="append", help="GROUP=VALUE held constant")
    i.add_argument("--rho-um", type=float, help="rescale so rho is this many micrometres")
    i.add_argument("--radial-mhz", type=float, default=45.0, help="radial frequency for the shift estimate")
    i.set_defaults(func=cmd_imprecision)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args._resolution = getattr(args, "resolution", None)
    if getattr(args, "axis", None) is not None and set(args.axis) - set(AXES):
        print(f"octotrap: error: --axis takes letters from 'xyz', got {args.axis!r}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        args.func(args)
    except (ConfigError, GeometryError) as exc:
        print(f"octotrap {args.command}: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"octotrap {args.command}: no convergence: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except OctotrapError as exc:
        print(f"octotrap {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
