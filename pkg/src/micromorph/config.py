"""Scenario files: YAML to :class:`~micromorph.scenarios.Scenario` and back.

A scenario file has these top-level keys (only ``material``, ``fields``,
``domain`` and ``integration`` are required)::

    name, description
    provenance              manufactured | prescribed
    material                isotropic: {A, B, C, E} | anisotropic: {A..G}, optional scale
    fields                  u, phi (and body_force, body_couple if prescribed)
    domain                  {box: {min, max}} | {ball: {center, radius}}
    integration             region, surface_order, volume_order
    scaling                 n, optional d_u, d_phi
    energy_without_sources  bool
    tolerances              overrides of DEFAULT_TOLERANCES
    expectations            J, L, M -> zero | nonzero | kappa_m

Anisotropic tensors are flat lists in row-major (C) order, so entry
``A_ijkl`` sits at index ``27*i + 9*j + 3*k + l`` (zero-based).  Entries
and coefficients may be numbers or expressions in x1, x2, x3.

Every error raised while reading a file is a :class:`ConfigError` that
knows the line and column it refers to.
"""

from __future__ import annotations

import warnings
from pathlib import Path

import numpy as np
import yaml

from .currents import ScalingDims
from .expr import ExpressionSyntaxError, ExprArray, parse, to_expr
from .geometry import Ball, Box
from .integrals import QuadratureRule
from .material import NAMES, RANKS, IsotropicSpec, MaterialModel, make_anisotropic, make_isotropic
from .scenarios import DEFAULT_TOLERANCES, Scenario, manufacture, prescribed

EXPECTATIONS = ("zero", "nonzero", "kappa_m")
TOP_LEVEL = (
    "name", "description", "provenance", "material", "fields", "domain", "integration",
    "scaling", "energy_without_sources", "tolerances", "expectations",
)


class ConfigError(ValueError):
    """Malformed or inconsistent scenario file."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None, source: str | None = None):
        self.message, self.line, self.column, self.source = message, line, column, source
        super().__init__(self._render())

    def _render(self) -> str:
        where = self.source or "<config>"
        if self.line is not None:
            where += f":{self.line}"
            if self.column is not None:
                where += f":{self.column}"
        return f"{where}: {self.message}"

    def located(self, source: str) -> "ConfigError":
        return ConfigError(self.message, self.line, self.column, source)


# --- loading with positions ---------------------------------------------------

class _Str(str):
    mark = None


class _List(list):
    mark = None


class _Dict(dict):
    mark = None


class _Loader(yaml.SafeLoader):
    pass


def _tag(obj, node):
    obj.mark = node.start_mark
    return obj


_Loader.add_constructor("tag:yaml.org,2002:str", lambda ld, n: _tag(_Str(ld.construct_scalar(n)), n))
_Loader.add_constructor("tag:yaml.org,2002:seq", lambda ld, n: _tag(_List(ld.construct_sequence(n, deep=True)), n))
_Loader.add_constructor("tag:yaml.org,2002:map", lambda ld, n: _tag(_Dict(ld.construct_mapping(n, deep=True)), n))


def _err(message: str, obj=None, offset: int = 0) -> ConfigError:
    mark = getattr(obj, "mark", None)
    if mark is None:
        return ConfigError(message)
    # offset into a plain scalar; quoted scalars start one column later
    col = mark.column + 1 + offset + (1 if mark.buffer and mark.buffer[mark.pointer : mark.pointer + 1] in "'\"" else 0)
    return ConfigError(message, mark.line + 1, col)


def loads(text: str, source: str | None = None) -> Scenario:
    """Build a scenario from YAML text."""
    try:
        data = yaml.load(text, Loader=_Loader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        raise ConfigError(
            f"YAML syntax error: {exc.problem or exc.context}",
            mark.line + 1 if mark else None,
            mark.column + 1 if mark else None,
            source,
        ) from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"YAML error: {exc}", source=source) from None
    try:
        return scenario_from_dict(data)
    except ConfigError as exc:
        raise exc.located(source) if source else exc from None


def load(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file: {exc.strerror}", source=str(path)) from None
    return loads(text, str(path))


# --- dict -> scenario -----------------------------------------------------------

def _expect(obj, kind, what: str, ctx=None):
    if not isinstance(obj, kind):
        names = {dict: "a mapping", list: "a list", str: "a string", bool: "true or false"}
        raise _err(f"{what} must be {names.get(kind, kind.__name__)}", obj if hasattr(obj, "mark") else ctx)
    return obj


def _mapping(obj, what: str, allowed, ctx=None) -> dict:
    _expect(obj, dict, what, ctx)
    for key in obj:
        if key not in allowed:
            raise _err(f"unknown key {key!r} in {what}; allowed: {', '.join(allowed)}", key)
    return obj


def _scalar_expr(v, what: str, ctx):
    if isinstance(v, bool) or v is None:
        raise _err(f"{what} must be a number or an expression", ctx)
    if isinstance(v, (int, float)):
        return to_expr(float(v))
    if isinstance(v, str):
        try:
            return parse(v)
        except ExpressionSyntaxError as exc:
            raise _err(f"{what}: {exc.message}", v, (exc.position or 1) - 1) from None
    raise _err(f"{what} must be a number or an expression", ctx)


def _expr_list(obj, n: int, what: str, ctx) -> list:
    _expect(obj, list, what, ctx)
    if len(obj) != n:
        raise _err(f"{what} needs {n} entries, got {len(obj)}", obj)
    return [_scalar_expr(v, f"{what}[{k}]", obj) for k, v in enumerate(obj)]


def _expr_matrix(obj, what: str, ctx) -> list:
    _expect(obj, list, what, ctx)
    if len(obj) != 3:
        raise _err(f"{what} needs 3 rows, got {len(obj)}", obj)
    return [_expr_list(row, 3, f"{what}[{i}]", obj) for i, row in enumerate(obj)]


def _number(v, what: str, ctx, positive: bool = False) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise _err(f"{what} must be a number", v if hasattr(v, "mark") else ctx)
    if positive and not v > 0:
        raise _err(f"{what} must be positive", ctx)
    return float(v)


def _vector(obj, what: str, ctx) -> tuple:
    _expect(obj, list, what, ctx)
    if len(obj) != 3:
        raise _err(f"{what} needs 3 entries", obj)
    return tuple(_number(v, what, obj) for v in obj)


def _region(obj, what: str, ctx):
    _mapping(obj, what, ("box", "ball"), ctx)
    if len(obj) != 1:
        raise _err(f"{what} needs exactly one of 'box' or 'ball'", obj)
    (kind, spec), = obj.items()
    try:
        if kind == "box":
            _mapping(spec, f"{what}.box", ("min", "max"), obj)
            return Box(_vector(spec.get("min"), f"{what}.box.min", spec), _vector(spec.get("max"), f"{what}.box.max", spec))
        _mapping(spec, f"{what}.ball", ("center", "radius"), obj)
        return Ball(_vector(spec.get("center"), f"{what}.ball.center", spec), _number(spec.get("radius"), f"{what}.ball.radius", spec, True))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise _err(str(exc), spec) from None


def _material(obj, ctx) -> MaterialModel:
    _mapping(obj, "material", ("isotropic", "anisotropic", "scale"), ctx)
    kinds = [k for k in ("isotropic", "anisotropic") if k in obj]
    if len(kinds) != 1:
        raise _err("material needs exactly one of 'isotropic' or 'anisotropic'", obj)
    kind = kinds[0]
    body = obj[kind]
    if kind == "isotropic":
        _mapping(body, "material.isotropic", ("A", "B", "C", "E"), obj)
        sizes = {"A": 3, "B": 3, "C": 15, "E": 3}
        coeffs = {k: _expr_list(body[k], n, f"material.isotropic.{k}", body) if k in body else [0.0] * n for k, n in sizes.items()}
        mat = make_isotropic(IsotropicSpec(**coeffs))
    else:
        _mapping(body, "material.anisotropic", NAMES, obj)
        tensors = {}
        for name in NAMES:
            shape = (3,) * RANKS[name]
            if name not in body:
                tensors[name] = np.zeros(shape)
                continue
            entries = _expr_list(body[name], 3 ** RANKS[name], f"material.anisotropic.{name}", body)
            if all(e.is_const for e in entries):
                tensors[name] = np.array([e.value for e in entries]).reshape(shape)
            else:
                tensors[name] = ExprArray(entries, shape)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            mat = make_anisotropic(**tensors)
        for w in caught:
            warnings.warn(w.message, w.category, stacklevel=3)
    if "scale" in obj:
        scale = _mapping(obj["scale"], "material.scale", NAMES, obj)
        mat = mat.scaled({k: _scalar_expr(v, f"material.scale.{k}", scale) for k, v in scale.items()})
    return mat


def scenario_from_dict(data) -> Scenario:
    """Validate a parsed scenario mapping and build the scenario."""
    _mapping(data, "scenario file", TOP_LEVEL)
    for key in ("material", "fields", "domain", "integration"):
        if key not in data:
            raise _err(f"missing required key {key!r}", data)
    name = str(data.get("name", "scenario"))
    description = str(data.get("description", ""))
    provenance = data.get("provenance", "manufactured")
    if provenance not in ("manufactured", "prescribed"):
        raise _err("provenance must be 'manufactured' or 'prescribed'", provenance)

    material = _material(data["material"], data)

    field_keys = ("u", "phi", "body_force", "body_couple") if provenance == "prescribed" else ("u", "phi")
    fields = _mapping(data["fields"], "fields", field_keys, data)
    for key in ("u", "phi"):
        if key not in fields:
            raise _err(f"fields.{key} is required", fields)
    u = _expr_list(fields["u"], 3, "fields.u", fields)
    phi = _expr_matrix(fields["phi"], "fields.phi", fields)
    domain = _region(data["domain"], "domain", data)

    integ = _mapping(data["integration"], "integration", ("region", "surface_order", "volume_order"), data)
    if "region" not in integ:
        raise _err("integration.region is required", integ)
    orders = {}
    for key in ("surface_order", "volume_order"):
        if key in integ:
            v = integ[key]
            if isinstance(v, bool) or not isinstance(v, int) or v < 2:
                raise _err(f"integration.{key} must be an integer >= 2", integ)
            orders[key] = v
    rule = QuadratureRule(_region(integ["region"], "integration.region", integ), **orders)
    if not domain.contains_region(rule.geometry):
        raise _err("integration region must lie strictly inside the domain", integ)

    scaling = _mapping(data.get("scaling", {}), "scaling", ("n", "d_u", "d_phi"), data)
    n = scaling.get("n", 3)
    if n != 3:
        raise _err("only n = 3 space dimensions are supported", scaling)
    try:
        dims = ScalingDims(3, *(None if k not in scaling else _number(scaling[k], f"scaling.{k}", scaling) for k in ("d_u", "d_phi")))
    except ValueError as exc:
        raise _err(str(exc), scaling) from None

    ews = data.get("energy_without_sources", False)
    _expect(ews, bool, "energy_without_sources", data)
    tol_in = _mapping(data.get("tolerances", {}), "tolerances", tuple(DEFAULT_TOLERANCES), data)
    tolerances = {k: _number(v, f"tolerances.{k}", tol_in, True) for k, v in tol_in.items()}
    exp_in = _mapping(data.get("expectations", {}), "expectations", ("J", "L", "M"), data)
    for k, v in exp_in.items():
        if v not in EXPECTATIONS:
            raise _err(f"expectations.{k} must be one of {', '.join(EXPECTATIONS)}", v if hasattr(v, "mark") else exp_in)
    expectations = {str(k): str(v) for k, v in exp_in.items()}

    kw = dict(
        name=name, dims=dims, tolerances=tolerances, energy_without_sources=ews,
        expectations=expectations, description=description,
    )
    try:
        if provenance == "manufactured":
            return manufacture(material, u, phi, domain, rule, **kw)
        F = _expr_list(fields["body_force"], 3, "fields.body_force", fields) if "body_force" in fields else None
        L = _expr_matrix(fields["body_couple"], "fields.body_couple", fields) if "body_couple" in fields else None
        return prescribed(material, u, phi, domain, rule, body_force=F, body_couple=L, **kw)
    except ConfigError:
        raise
    except ValueError as exc:
        raise _err(str(exc), data["fields"]) from None


# --- scenario -> dict -------------------------------------------------------------

def _plain(v):
    """Number when the text is a constant, otherwise the expression text."""
    e = to_expr(v)
    return e.value if e.is_const else str(e)


def material_to_dict(m: MaterialModel) -> dict:
    desc = m.description
    kind = desc.get("kind")
    if kind == "isotropic":
        out = {"isotropic": {k: [_plain(c) for c in desc[k]] for k in ("A", "B", "C", "E")}}
    elif kind == "anisotropic" and "tensors" in desc:
        out = {"anisotropic": {k: list(desc["tensors"][k]) for k in NAMES}}
    else:
        raise ValueError("material has no serializable description")
    if desc.get("scale"):
        out["scale"] = {str(k): str(v) for k, v in desc["scale"].items()}
    return out


def scenario_to_dict(sc: Scenario) -> dict:
    fs = sc.fields
    fields = {"u": fs.u.to_strings(), "phi": fs.phi.to_strings()}
    if sc.provenance == "prescribed":
        fields["body_force"] = fs.body_force.to_strings()
        fields["body_couple"] = fs.body_couple.to_strings()
    changed_tol = {k: v for k, v in sc.tolerances.items() if DEFAULT_TOLERANCES.get(k) != v}
    out = {
        "name": sc.name,
        "description": sc.description,
        "provenance": sc.provenance,
        "material": material_to_dict(sc.material),
        "fields": fields,
        "domain": fs.domain.to_dict(),
        "integration": {
            "region": sc.rule.geometry.to_dict(),
            "surface_order": sc.rule.surface_order,
            "volume_order": sc.rule.volume_order,
        },
        "scaling": {"n": sc.dims.n},
        "energy_without_sources": sc.energy_without_sources,
        "tolerances": changed_tol,
        "expectations": dict(sc.expectations),
    }
    return out


_COMMENTS = {
    "name": "Scenario name used in reports.",
    "provenance": (
        "manufactured: body force and couple are derived from u and phi so that the\n"
        "field equations hold exactly.  prescribed: sources are given under fields\n"
        "(body_force, body_couple; zero when omitted)."
    ),
    "material": (
        "isotropic: coefficients of delta products.  A, B, E take three numbers for\n"
        "d_ij d_kl, d_ik d_jl, d_il d_jk; C takes fifteen, one per pairing of its six\n"
        "slots in lexicographic order.  F and G vanish.\n"
        "anisotropic: A, B, C, E, F, G as flat row-major lists (81, 81, 729, 81, 243,\n"
        "243 entries); the package symmetrizes them and warns if that changed them.\n"
        "scale: optional scalar expression multiplying a tensor (inhomogeneity)."
    ),
    "fields": "Expressions in x1, x2, x3 using + - * / ^, sin, cos, exp and pi.",
    "domain": "Region where the fields are defined: box {min, max} or ball {center, radius}.",
    "integration": (
        "Closed region for the J, L, M integrals; must lie strictly inside the domain.\n"
        "Orders are Gauss points per direction (polynomial exactness 2*order - 1)."
    ),
    "scaling": "Space dimension; scaling dimensions default to d_u = -(n-2)/2, d_phi = -n/2.",
    "energy_without_sources": "Drop the source terms from the energy density (sensitivity studies only).",
    "tolerances": "Overrides of the default tolerances: " + ", ".join(DEFAULT_TOLERANCES) + ".",
    "expectations": (
        "Per integral: zero (conserved, |value| <= conservation), nonzero\n"
        "(|value| >= nonzero_min) or kappa_m (M equals -int kappa:m dV, and is nonzero)."
    ),
}


def dumps(sc: Scenario, annotate: bool = True, header: str = "") -> str:
    """YAML text for a scenario; with ``annotate`` each section gets a comment."""
    data = scenario_to_dict(sc)
    chunks = ["".join(f"# {line}".rstrip() + "\n" for line in header.splitlines())] if header else []
    for key, value in data.items():
        flow = None if isinstance(value, (dict, list)) and value else False
        text = yaml.safe_dump({key: value}, sort_keys=False, default_flow_style=flow, width=96)
        if annotate and key in _COMMENTS:
            text = "".join(f"# {line}\n" for line in _COMMENTS[key].splitlines()) + text
        chunks.append(text)
    return ("\n" if annotate else "").join(chunks)


def dump(sc: Scenario, path, annotate: bool = True, header: str = "") -> None:
    Path(path).write_text(dumps(sc, annotate, header))
