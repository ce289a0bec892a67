"""Command-line front end.

    micromorph list-scenarios
    micromorph validate --scenario FILE_OR_NAME
    micromorph run [check-el] [check-balance] [integrals] [convergence] --scenario ...

Exit status of ``run``: 0 when every checked quantity is within tolerance,
1 when some check fails (the failing quantities are named on stderr), 2
when the scenario cannot be loaded (no report is written).

Report rows share one set of columns (see :data:`COLUMNS`).  Pointwise
checks leave the surface and volume columns empty and put the max-norm in
``discrepancy``.  For rows named ``*.nonzero`` the tolerance is a lower
bound; for every other row it is an upper bound.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import config
from .currents import balance_residuals, isotropy_bracket
from .geometry import DomainError
from .integrals import IntegralResult, integral_report, kappa_m_integral
from .kinetics import euler_lagrange_residual
from .scenarios import ALIASES, BUILTINS, Scenario, builtin

COMMANDS = ("check-el", "check-balance", "integrals", "convergence")
FORMATS = ("table", "csv", "json")
COLUMNS = ("quantity", "component", "surface_value", "volume_value", "discrepancy", "tolerance", "pass")

EXIT_OK, EXIT_FAIL, EXIT_PARSE = 0, 1, 2


@dataclass(frozen=True)
class RunConfig:
    scenario: str
    commands: tuple = COMMANDS
    out: str | None = None
    format: str = "table"
    points: int = 100
    seed: int = 0
    surface_order: int | None = None
    volume_order: int | None = None
    energy_without_sources: bool = False

    def __post_init__(self):
        bad = [c for c in self.commands if c not in COMMANDS]
        if bad:
            raise ValueError(f"unknown command(s) {', '.join(bad)}")
        if self.format not in FORMATS:
            raise ValueError(f"unknown format {self.format!r}")
        if self.points < 1:
            raise ValueError("points must be positive")


@dataclass(frozen=True)
class Row:
    quantity: str
    component: str
    surface_value: float | None
    volume_value: float | None
    discrepancy: float
    tolerance: float | None
    passed: bool

    @property
    def label(self) -> str:
        return f"{self.quantity}[{self.component}]" if self.component else self.quantity


@dataclass
class Report:
    header: dict
    rows: list = field(default_factory=list)

    @property
    def failures(self) -> list:
        return [r.label for r in self.rows if not r.passed]

    @property
    def status(self) -> int:
        return EXIT_FAIL if self.failures else EXIT_OK


def _upper(quantity, component, value, tol, surface=None, volume=None) -> Row:
    value = float(value)
    return Row(quantity, component, surface, volume, value, tol, bool(value <= tol))


def load_scenario(source: str) -> Scenario:
    """A built-in name or alias, or a path to a scenario file."""
    if source in BUILTINS or source in ALIASES:
        return builtin(source)
    path = Path(source)
    if not path.exists():
        raise config.ConfigError(
            f"no such scenario file, and not a built-in (choose from {', '.join(BUILTINS)})", source=source
        )
    return config.load(path)


def _sample(sc: Scenario, points: int, seed: int) -> np.ndarray:
    return sc.fields.domain.sample(np.random.default_rng(seed), points)


def _check_el(sc: Scenario, pts) -> list:
    r1, r2 = euler_lagrange_residual(sc.fields, sc.material, pts)
    tol = sc.tol("el")
    return [_upper("el.force", "max", np.max(np.abs(r1)), tol), _upper("el.couple", "max", np.max(np.abs(r2)), tol)]


def _check_balance(sc: Scenario, pts) -> list:
    ws = not sc.energy_without_sources
    rows = []
    with warnings.catch_warnings():
        # the EL row already reports non-solutions
        warnings.simplefilter("ignore")
        for method, key in (("exact", "balance_exact"), ("fd", "balance_fd")):
            res = balance_residuals(
                sc.fields, sc.material, pts, sc.dims, method=method, h=sc.tol("fd_step"), with_sources=ws
            )
            for name in ("momentum", "angular", "scaling"):
                rows.append(_upper(f"balance.{name}", method, np.max(np.abs(getattr(res, name))), sc.tol(key)))
    bracket = float(np.max(np.abs(isotropy_bracket(sc.fields, sc.material, pts))))
    if sc.material.isotropic:
        rows.append(_upper("isotropy_bracket", "max", bracket, sc.tol("isotropy")))
    else:
        rows.append(Row("isotropy_bracket", "max", None, None, bracket, None, True))
    return rows


def _integral_rows(name: str, res: IntegralResult, sc: Scenario) -> list:
    s, v = np.atleast_1d(res.surface), np.atleast_1d(res.volume)
    denom = max(float(np.max(np.abs(s))), float(np.max(np.abs(v))), res.scale, np.finfo(float).tiny)
    tol = sc.tol("integral_rel")
    comps = [str(k + 1) for k in range(s.size)] if s.size > 1 else [""]
    return [
        _upper(name, c, abs(a - b) / denom, tol, float(a), float(b)) for c, a, b in zip(comps, s, v)
    ]


def _expectation_rows(name: str, res: IntegralResult, sc: Scenario, rule) -> list:
    kind = sc.expectations.get(name)
    s = np.atleast_1d(res.surface)
    mag = float(np.max(np.abs(s)))
    if kind == "zero":
        return [_upper(f"{name}.conservation", "max", mag, sc.tol("conservation"))]
    rows = []
    if kind in ("nonzero", "kappa_m"):
        lo = sc.tol("nonzero_min")
        rows.append(Row(f"{name}.nonzero", "max", None, None, mag, lo, bool(mag >= lo)))
    if kind == "kappa_m":
        km = kappa_m_integral(sc, rule)
        sv = float(s[0])
        rel = abs(sv - km) / max(abs(sv), abs(km), np.finfo(float).tiny)
        rows.append(_upper(f"{name}.kappa_m", "", rel, sc.tol("integral_rel"), sv, km))
    return rows


def _integrals(sc: Scenario, want_values: bool, want_refinement: bool) -> list:
    rep = integral_report(sc, refine=want_refinement)
    rows = []
    if want_values:
        for name in ("J", "L", "M"):
            res = getattr(rep, name)
            rows += _integral_rows(name, res, sc)
            rows += _expectation_rows(name, res, sc, rep.rule)
    if want_refinement:
        tol = sc.tol("refinement")
        rows += [_upper("refinement", key, delta, tol) for key, delta in rep.refinement.items()]
    return rows


def execute(cfg: RunConfig, sc: Scenario) -> Report:
    """Run the requested commands on an already loaded scenario."""
    if cfg.surface_order is not None or cfg.volume_order is not None:
        sc = sc.with_rule(surface_order=cfg.surface_order, volume_order=cfg.volume_order)
    if cfg.energy_without_sources:
        sc = replace(sc, energy_without_sources=True)
    commands = [c for c in COMMANDS if c in cfg.commands]
    header = {
        "scenario": sc.name,
        "provenance": sc.provenance,
        "commands": commands,
        "points": cfg.points,
        "seed": cfg.seed,
        "surface_order": sc.rule.surface_order,
        "volume_order": sc.rule.volume_order,
        "energy_without_sources": sc.energy_without_sources,
    }
    report = Report(header)
    pts = _sample(sc, cfg.points, cfg.seed)
    if "check-el" in commands:
        report.rows += _check_el(sc, pts)
    if "check-balance" in commands:
        report.rows += _check_balance(sc, pts)
    if "integrals" in commands or "convergence" in commands:
        report.rows += _integrals(sc, "integrals" in commands, "convergence" in commands)
    return report


# --- formatting -------------------------------------------------------------------

def _g17(x) -> str:
    return "" if x is None else f"{x:.17g}"


def _row_cells(r: Row) -> list:
    return [
        r.quantity, r.component, _g17(r.surface_value), _g17(r.volume_value),
        _g17(r.discrepancy), _g17(r.tolerance), "true" if r.passed else "false",
    ]


def format_csv(report: Report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in report.rows:
        w.writerow(_row_cells(r))
    return buf.getvalue()


def _json_value(v) -> str:
    # floats at 17 significant digits, which json.dumps does not offer
    if isinstance(v, bool) or v is None or isinstance(v, (int, str)):
        return json.dumps(v)
    if isinstance(v, float):
        return f"{v:.17g}" if math.isfinite(v) else "null"
    if isinstance(v, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_json_value(x)}" for k, x in v.items()) + "}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_json_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v).__name__}")


def format_json(report: Report) -> str:
    lines = ["{"]
    for k, v in report.header.items():
        lines.append(f"  {json.dumps(k)}: {_json_value(v)},")
    lines.append(f'  "status": {report.status},')
    lines.append(f'  "failures": {_json_value(report.failures)},')
    lines.append('  "rows": [')
    rows = [
        "    " + _json_value({
            "quantity": r.quantity, "component": r.component, "surface_value": r.surface_value,
            "volume_value": r.volume_value, "discrepancy": r.discrepancy, "tolerance": r.tolerance,
            "pass": r.passed,
        })
        for r in report.rows
    ]
    lines.append(",\n".join(rows))
    lines += ["  ]", "}"]
    return "\n".join(lines) + "\n"


def format_table(report: Report) -> str:
    def num(x):
        return "-" if x is None else f"{x:.6e}"

    head = ("quantity", "component", "surface", "volume", "discrepancy", "tolerance", "")
    body = [
        (r.quantity, r.component or "-", num(r.surface_value), num(r.volume_value), num(r.discrepancy),
         num(r.tolerance), "ok" if r.passed else "FAIL")
        for r in report.rows
    ]
    widths = [max(len(row[i]) for row in [head] + body) for i in range(len(head))]
    h = report.header
    out = [
        f"scenario {h['scenario']} ({h['provenance']}), {h['points']} points, seed {h['seed']}, "
        f"orders {h['surface_order']}/{h['volume_order']}",
        "  ".join(c.ljust(w) for c, w in zip(head, widths)).rstrip(),
    ]
    out += ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in body]
    out.append("all checks passed" if report.status == EXIT_OK else f"FAILED: {', '.join(report.failures)}")
    return "\n".join(out) + "\n"


FORMATTERS = {"table": format_table, "csv": format_csv, "json": format_json}


def run(cfg: RunConfig, stdout=None, stderr=None) -> int:
    """Load, check, write the report; returns the exit status."""
    stdout, stderr = stdout or sys.stdout, stderr or sys.stderr
    try:
        sc = load_scenario(cfg.scenario)
    except (config.ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_PARSE
    try:
        report = execute(cfg, sc)
    except (DomainError, ValueError) as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_PARSE
    text = FORMATTERS[cfg.format](report)
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        stdout.write(text)
    for label in report.failures:
        print(f"check failed: {label}", file=stderr)
    return report.status


def validate(source: str, stdout=None, stderr=None) -> int:
    """Parse a scenario and check its invariants without running any checks."""
    stdout, stderr = stdout or sys.stdout, stderr or sys.stderr
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            sc = load_scenario(source)
    except (config.ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_PARSE
    for w in caught:
        print(f"warning: {w.message}", file=stderr)
    kind = "isotropic" if sc.material.isotropic else "anisotropic"
    homog = "homogeneous" if sc.material.homogeneous else "inhomogeneous"
    print(f"{sc.name}: valid ({sc.provenance}, {kind} {homog} material)", file=stdout)
    return EXIT_OK


def list_scenarios(stdout=None) -> int:
    stdout = stdout or sys.stdout
    alias = {v: k for k, v in ALIASES.items()}
    for name in BUILTINS:
        sc = builtin(name)
        tag = f" ({alias[name]})" if name in alias else ""
        print(f"{name}{tag}: {sc.description}", file=stdout)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="micromorph", description="Balance-law and J/L/M-integral checks.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("list-scenarios", help="list built-in scenarios")
    v = sub.add_parser("validate", help="parse a scenario and check its invariants")
    v.add_argument("--scenario", required=True, help="built-in name/alias or scenario file")
    r = sub.add_parser("run", help="run checks and write a report")
    r.add_argument("checks", nargs="*", metavar="CHECK", help=f"any of {', '.join(COMMANDS)} (default: all)")
    r.add_argument("--scenario", required=True, help="built-in name/alias or scenario file")
    r.add_argument("--out", help="report file (default: stdout)")
    r.add_argument("--format", choices=FORMATS, default="table")
    r.add_argument("--points", type=int, default=100, help="random interior points for pointwise checks (default: 100)")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--surface-order", type=int)
    r.add_argument("--volume-order", type=int)
    r.add_argument("--energy-without-sources", action="store_true", help="drop source terms from the energy density")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list-scenarios":
        return list_scenarios()
    if args.command == "validate":
        return validate(args.scenario)
    try:
        cfg = RunConfig(
            scenario=args.scenario,
            commands=tuple(args.checks) or COMMANDS,
            out=args.out,
            format=args.format,
            points=args.points,
            seed=args.seed,
            surface_order=args.surface_order,
            volume_order=args.volume_order,
            energy_without_sources=args.energy_without_sources,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    return run(cfg)


if __name__ == "__main__":
    raise SystemExit(main())
