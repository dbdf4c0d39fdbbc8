"""Geometry files: versioned YAML describing a trap assembly.

Lengths are in units of the declared scale ``a`` (metres).  Any numeric
field may be an arithmetic expression over the ``parameters`` block, so a
sweep only has to override parameters.  An electrode may list ``images``,
mirror copies that join its voltage group: ``x`` reflects x -> -x, ``xz``
reflects both x and z (a half turn about y), and so on.

Minimal example::

    schema: octotrap-geometry/1
    units: {a: 1.0e-4}
    parameters: {r: 0.3}
    electrodes:
      - id: rod
        role: dc
        group: V1
        images: [x]
        primitives:
          - {kind: capsule, radius: r, length: 6, position: [4, 0, 0], axis: [1, 0, 0]}
"""

from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from ..errors import ConfigError
from .bem import DEFAULT_RESOLUTION, Electrode, TrapAssembly
from .primitives import KINDS, Primitive, half_plane_slab

SCHEMA = "octotrap-geometry/1"

_IMAGES = {
    "x": (-1, 1, 1), "y": (1, -1, 1), "z": (1, 1, -1),
    "xy": (-1, -1, 1), "xz": (-1, 1, -1), "yz": (1, -1, -1), "xyz": (-1, -1, -1),
}
_DIM_KEYS = ("radius", "length", "size", "thickness", "width", "tube_radius", "ring_radius",
             "lx", "ly", "corner_radius", "extent")


class _LineLoader(yaml.SafeLoader):
    """Safe loader that records the source line of every mapping."""


def _construct_mapping(loader, node, deep=False):
    mapping = yaml.SafeLoader.construct_mapping(loader, node, deep=True)
    mapping["__line__"] = node.start_mark.line + 1
    return mapping


_LineLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


def _where(node) -> str:
    return f"line {node['__line__']}" if isinstance(node, dict) and "__line__" in node else "geometry file"


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv,
           ast.Pow: operator.pow}
_FUNCS = {"sqrt": math.sqrt, "sin": math.sin, "cos": math.cos, "tan": math.tan, "atan": math.atan,
          "abs": abs, "min": min, "max": max}
_CONSTS = {"pi": math.pi}


def evaluate_expression(text, params: dict, where: str = "") -> float:
    """Evaluate an arithmetic expression over named parameters (no other Python)."""
    if isinstance(text, bool):
        raise ConfigError(f"{where}: expected a number, got {text!r}")
    if isinstance(text, (int, float)):
        return float(text)
    try:
        tree = ast.parse(str(text), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"{where}: cannot parse expression {text!r}") from exc

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id in params:
                return float(params[node.id])
            if node.id in _CONSTS:
                return _CONSTS[node.id]
            raise ConfigError(f"{where}: unknown parameter {node.id!r} in {text!r}")
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS:
            return float(_FUNCS[node.func.id](*[ev(a) for a in node.args]))
        raise ConfigError(f"{where}: unsupported syntax in expression {text!r}")

    return ev(tree)


@dataclass
class AnalysisSpec:
    """Default analysis settings stored with a geometry."""

    free: list = field(default_factory=list)
    fixed: dict = field(default_factory=dict)
    rf: list | None = None
    constraints: object = "octupole"
    center_search: dict | None = None
    imprecision: dict | None = None
    field_radius: float | None = None  # [m]


@dataclass
class GeometrySpec:
    assembly: TrapAssembly
    analysis: AnalysisSpec
    parameters: dict
    source: str
    raw: dict


def _vec(value, params, where, n=3):
    if not isinstance(value, (list, tuple)) or len(value) != n:
        raise ConfigError(f"{where}: expected a list of {n} numbers, got {value!r}")
    return [evaluate_expression(v, params, where) for v in value]


def _primitive(node, params, scale_units=1.0) -> Primitive:
    where = _where(node)
    if not isinstance(node, dict) or "kind" not in node:
        raise ConfigError(f"{where}: primitive needs a 'kind'")
    kind = node["kind"]
    if kind not in KINDS:
        raise ConfigError(f"{where}: unknown primitive kind {kind!r}; expected one of {sorted(KINDS)}")
    unknown = set(node) - set(_DIM_KEYS) - {"kind", "position", "axis", "ref", "__line__"}
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)} for primitive {kind!r}")
    pos = _vec(node.get("position", [0, 0, 0]), params, where)
    axis = _vec(node.get("axis", [0, 0, 1]), params, where)
    ref = _vec(node["ref"], params, where) if "ref" in node else None
    dims = {}
    for k in _DIM_KEYS:
        if k in node:
            v = node[k]
            dims[k] = _vec(v, params, where) if k == "size" else evaluate_expression(v, params, where)
    try:
        if kind == "half-plane-slab" and ("length" not in dims or "width" not in dims):
            extent = dims.pop("extent", 20.0)
            return half_plane_slab(dims.get("thickness", 0.0), 1.0, pos, axis, ref or (1, 0, 0), extent)
        dims.pop("extent", None)
        return Primitive(kind, dims, pos, axis, ref)
    except ConfigError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _image(p: Primitive, signs) -> Primitive:
    S = np.asarray(signs, float)
    ex = p.R[:, 0] * S
    return Primitive(p.kind, dict(p.dims), p.position * S, p.R[:, 2] * S, ex)


def _scaled(p: Primitive, a: float) -> Primitive:
    dims = {k: ([x * a for x in v] if isinstance(v, list) else v * a) for k, v in p.dims.items()}
    return Primitive(p.kind, dims, p.position * a, p.R[:, 2], p.R[:, 0])


def load_geometry(source, overrides: dict | None = None, resolution: float | None = None) -> GeometrySpec:
    """Parse a geometry file (path, bundled name or YAML text) into an assembly.

    ``overrides`` replaces entries of the ``parameters`` block; ``resolution``
    (panels per a^2) overrides the file's value.
    """
    text, label = _read_source(source)
    try:
        raw = yaml.load(text, Loader=_LineLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        loc = f"line {mark.line + 1}" if mark else label
        raise ConfigError(f"{label}: {loc}: invalid YAML ({getattr(exc, 'problem', exc)})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{label}: top level must be a mapping")
    if raw.get("schema") != SCHEMA:
        raise ConfigError(f"{label}: {_where(raw)}: schema must be {SCHEMA!r}, got {raw.get('schema')!r}")
    units = raw.get("units")
    if not isinstance(units, dict) or "a" not in units:
        raise ConfigError(f"{label}: a 'units' block declaring the scale 'a' in metres is mandatory")
    a = units["a"]
    if isinstance(a, str):  # YAML 1.1 reads 1e-5 (no dot) as a string
        try:
            a = float(a)
        except ValueError:
            pass
    if isinstance(a, bool) or not isinstance(a, (int, float)) or not a > 0:
        raise ConfigError(f"{label}: {_where(units)}: units.a must be a positive length in metres")
    a = float(a)

    params = {k: v for k, v in (raw.get("parameters") or {}).items() if k != "__line__"}
    for k in (overrides or {}):
        if k not in params:
            raise ConfigError(f"{label}: cannot override unknown parameter {k!r}; known: {sorted(params)}")
    params.update(overrides or {})
    resolved = {}
    for k, v in params.items():  # parameters may refer to earlier ones
        resolved[k] = evaluate_expression(v, resolved, f"{label}: parameter {k}")

    els_raw = raw.get("electrodes")
    if not els_raw:
        raise ConfigError(f"{label}: no electrodes")
    electrodes = []
    seen = set()
    for node in els_raw:
        where = f"{label}: {_where(node)}"
        if not isinstance(node, dict):
            raise ConfigError(f"{where}: electrode entries must be mappings")
        for key in ("id", "primitives"):
            if key not in node:
                raise ConfigError(f"{where}: electrode needs '{key}'")
        eid = str(node["id"])
        role = node.get("role", "dc")
        group = str(node.get("group", eid))
        prims = [_primitive(p, resolved) for p in node["primitives"]]
        images = node.get("images", [])
        for im in images:
            if im not in _IMAGES:
                raise ConfigError(f"{where}: unknown image {im!r}; expected one of {sorted(_IMAGES)}")
        copies = [(eid, prims)] + [(f"{eid}.{im}", [_image(p, _IMAGES[im]) for p in prims]) for im in images]
        for cid, cp in copies:
            if cid in seen:
                raise ConfigError(f"{where}: duplicate electrode id {cid!r}")
            seen.add(cid)
            try:
                electrodes.append(Electrode(cid, [_scaled(p, a) for p in cp], role, group))
            except ConfigError as exc:
                raise ConfigError(f"{where}: {exc}") from None

    center = _vec(raw.get("center", [0, 0, 0]), resolved, f"{label}: center")
    res = float(resolution if resolution is not None else raw.get("resolution", DEFAULT_RESOLUTION))
    asm = TrapAssembly(electrodes, a, np.asarray(center) * a, tuple(raw.get("symmetry", ())), res,
                       float(raw.get("grading_radius", 3.0)), float(raw.get("grading", 1.5)),
                       str(raw.get("name", label)), float(raw.get("max_turn_deg", 45.0)))

    an = raw.get("analysis") or {}
    groups = set(asm.groups)
    spec = AnalysisSpec(
        free=[str(g) for g in an.get("free", [])],
        fixed={str(k): evaluate_expression(v, resolved, f"{label}: analysis.fixed")
               for k, v in (an.get("fixed") or {}).items() if k != "__line__"},
        rf=[str(g) for g in an["rf"]] if "rf" in an else None,
        constraints=_constraints_from_yaml(an.get("constraints", "octupole"), label),
        center_search={k: v for k, v in an["center_search"].items() if k != "__line__"}
        if "center_search" in an else None,
        imprecision={k: v for k, v in an["imprecision"].items() if k != "__line__"}
        if "imprecision" in an else None,
        field_radius=evaluate_expression(an["field_radius"], resolved, f"{label}: analysis.field_radius") * a
        if "field_radius" in an else None,
    )
    for g in list(spec.free) + list(spec.fixed) + list(spec.rf or []):
        if g not in groups:
            raise ConfigError(f"{label}: {_where(an)}: analysis refers to unknown group {g!r}; "
                              f"groups are {sorted(groups)}")
    return GeometrySpec(asm, spec, resolved, label, raw)


def _constraints_from_yaml(value, label):
    if isinstance(value, str):
        return value
    if isinstance(value, list):
        out = []
        for item in value:
            if isinstance(item, list) and len(item) == 3:
                out.append(tuple(int(v) for v in item))
            else:
                raise ConfigError(f"{label}: constraints must be a set name or a list of [i, j, k]")
        return out
    raise ConfigError(f"{label}: constraints must be a set name or a list of [i, j, k]")


def bundled_geometries() -> list:
    root = resources.files("octotrap") / "geometries"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def _read_source(source):
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        path = Path(source)
        if path.exists():
            return path.read_text(), str(path)
        name = str(source)
        if name in bundled_geometries():
            return (resources.files("octotrap") / "geometries" / f"{name}.yaml").read_text(), name
        raise ConfigError(f"geometry {source!r} is neither a file nor a bundled geometry "
                          f"({', '.join(bundled_geometries())})")
    return str(source), "<text>"
