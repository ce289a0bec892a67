"""Acceptance suite: ten criteria at their stated tolerances.

Each criterion is a function returning ``(passed, detail)``.  The pytest
wrappers assert on it; every outcome also lands in ``RESULTS``, which the
terminal-summary hook in ``conftest.py`` prints as one line per criterion.
Run this file directly for the same lines without pytest.
"""

import itertools
import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from conftest import interior_points, random_fields, random_material, random_tensors  # noqa: E402

from micromorph.cli import main as cli_main  # noqa: E402
from micromorph.currents import (  # noqa: E402
    ScalingDims,
    angular_momentum,
    angular_momentum_canonical,
    balance_residuals,
    eshelby_stress,
    eshelby_stress_canonical,
    general_flux,
    isotropy_bracket,
    rotation_generators,
    scaling_flux,
    scaling_flux_canonical,
    scaling_generators,
    translation_generators,
)
from micromorph.fields import evaluate_jet, fd_gradient  # noqa: E402
from micromorph.geometry import Ball, Box  # noqa: E402
from micromorph.integrals import QuadratureRule, integral_report, kappa_m_integral, volume_integral  # noqa: E402
from micromorph.kinetics import StrainState, euler_lagrange_residual, stresses  # noqa: E402
from micromorph.material import IsotropicSpec, MaterialTensors, make_anisotropic, make_isotropic  # noqa: E402
from micromorph.scenarios import anisotropic_material, builtin, builtin_scenarios  # noqa: E402

RESULTS: dict[int, tuple[str, bool, str]] = {}
N_RANDOM = 10


def _record(n: int, title: str, checks: list) -> tuple[bool, str]:
    """``checks``: (label, measured, bound, kind) with kind "<=" or ">="."""
    ok, parts = True, []
    for label, value, bound, kind in checks:
        good = value <= bound if kind == "<=" else value >= bound
        ok &= bool(good)
        parts.append(f"{label} {value:.2e} {kind} {bound:.0e}")
    detail = "; ".join(parts)
    RESULTS[n] = (title, ok, detail)
    return ok, detail


def _amax(a) -> float:
    return float(np.max(np.abs(a)))


# --- criteria -----------------------------------------------------------------

def criterion_1():
    checks = []
    for sc in builtin_scenarios():
        pts = interior_points(np.random.default_rng(1), 100, sc.fields.domain)
        r1, r2 = euler_lagrange_residual(sc.fields, sc.material, pts)
        checks.append((sc.name, max(_amax(r1), _amax(r2)), 1e-10, "<="))
    return _record(1, "Euler-Lagrange closure", checks)


def criterion_2():
    sc = builtin("full")
    pts = interior_points(np.random.default_rng(2), 100, sc.fields.domain)
    ex = balance_residuals(sc.fields, sc.material, pts)
    fd = balance_residuals(sc.fields, sc.material, pts, method="fd")
    checks = [("exact", max(_amax(r) for r in ex[:3]), 1e-8, "<="), ("fd", max(_amax(r) for r in fd[:3]), 1e-5, "<=")]
    return _record(2, "balance-law closure, scenario full", checks)


def criterion_3():
    sc = builtin("isotropic").with_rule(surface_order=8)
    rep = integral_report(sc)
    km = kappa_m_integral(sc)
    M = float(rep.M.surface)
    checks = [
        ("|J|", _amax(rep.J.surface), 1e-8, "<="),
        ("|L|", _amax(rep.L.surface), 1e-8, "<="),
        ("|M|", abs(M), 1e-3, ">="),
        ("M vs -int k:m", abs(M - km) / max(abs(M), abs(km)), 1e-6, "<="),
    ]
    return _record(3, "conservation specialization, scenario isotropic", checks)


def criterion_4():
    checks = []
    for sc in builtin_scenarios():
        rep = integral_report(sc)
        checks.append((sc.name, rep.max_discrepancy(), 1e-6, "<="))
    return _record(4, "divergence-theorem consistency", checks)


def _random_isotropic(rng):
    return make_isotropic(IsotropicSpec(*(rng.uniform(-1, 1, size=n) for n in (3, 3, 15, 3))))


def criterion_5():
    iso = 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        fs = random_fields(rng, sources=False)
        iso = max(iso, _amax(isotropy_bracket(fs, _random_isotropic(rng), interior_points(rng, 20))))
    rng = np.random.default_rng(0)
    aniso = _amax(isotropy_bracket(random_fields(rng, sources=False), anisotropic_material(), interior_points(rng, 20)))
    return _record(5, "isotropy bracket", [("isotropic", iso, 1e-10, "<="), ("anisotropic", aniso, 1e-3, ">=")])


def _random_cases():
    for seed in range(N_RANDOM):
        rng = np.random.default_rng(100 + seed)
        yield random_fields(rng), random_material(rng, inhomogeneous=True), interior_points(rng, 30)


def criterion_6():
    worst = {"P": 0.0, "M": 0.0, "Y": 0.0, "Morb+Mspin": 0.0}
    for fs, m, x in _random_cases():
        M, Mo, Ms = angular_momentum(fs, m, x)
        worst["P"] = max(worst["P"], _amax(general_flux(translation_generators(), fs, m, x) - eshelby_stress(fs, m, x)))
        worst["M"] = max(worst["M"], _amax(general_flux(rotation_generators(), fs, m, x) - M))
        worst["Y"] = max(worst["Y"], _amax(general_flux(scaling_generators(), fs, m, x)[:, 0] - scaling_flux(fs, m, x)))
        worst["Morb+Mspin"] = max(worst["Morb+Mspin"], _amax(M - (Mo + Ms)))
    return _record(6, "flux specialization identities", [(k, v, 1e-12, "<=") for k, v in worst.items()])


def criterion_7():
    worst = {"P": 0.0, "M": 0.0, "Y": 0.0}
    for fs, m, x in _random_cases():
        worst["P"] = max(worst["P"], _amax(eshelby_stress_canonical(fs, m, x) - eshelby_stress(fs, m, x)))
        worst["M"] = max(worst["M"], _amax(angular_momentum_canonical(fs, m, x) - angular_momentum(fs, m, x)[0]))
        worst["Y"] = max(worst["Y"], _amax(scaling_flux_canonical(fs, m, x) - scaling_flux(fs, m, x)))
    return _record(7, "dual-formula identities", [(k, v, 1e-14, "<=") for k, v in worst.items()])


def criterion_8():
    d = ScalingDims()
    err = abs(d.d_u + 0.5) + abs(d.d_phi + 1.5)
    general = max(abs(ScalingDims(n).d_u + (n - 2) / 2) + abs(ScalingDims(n).d_phi + n / 2) for n in range(1, 8))
    return _record(8, "scaling dimensions", [("n=3", err, 0.0, "<="), ("n=1..7", general, 0.0, "<=")])


def _naive_stresses(T, g, e, k):
    R = range(3)
    t, s, m = np.zeros((3, 3)), np.zeros((3, 3)), np.zeros((3, 3, 3))
    for i, j, a, b in itertools.product(R, R, R, R):
        t[i, j] += T.A[i, j, a, b] * g[a, b] + T.E[i, j, a, b] * e[a, b]
        s[i, j] += T.E[a, b, i, j] * g[a, b] + T.B[i, j, a, b] * e[a, b]
        for c in R:
            t[i, j] += T.F[i, j, a, b, c] * k[a, b, c]
            s[i, j] += T.G[i, j, a, b, c] * k[a, b, c]
    for i, j, l, a, b in itertools.product(R, R, R, R, R):
        m[i, j, l] += T.F[a, b, i, j, l] * g[a, b] + T.G[a, b, i, j, l] * e[a, b]
        for c in R:
            m[i, j, l] += T.C[i, j, l, a, b, c] * k[a, b, c]
    return t, s, m


def _box_monomial(lo, hi, powers):
    return math.prod((h ** (p + 1) - l ** (p + 1)) / (p + 1) for l, h, p in zip(lo, hi, powers))


def _ball_monomial(r, powers):
    if any(p % 2 for p in powers):
        return 0.0
    g, d = math.gamma, sum(powers)
    return 2.0 * math.prod(g((p + 1) / 2) for p in powers) / g((d + 3) / 2) * r ** (d + 3) / (d + 3)


def criterion_9():
    contraction = 0.0
    for seed in range(3):
        rng = np.random.default_rng(seed)
        m = make_anisotropic(**random_tensors(rng))
        T = MaterialTensors(*(v.constant_value() for v in m.tensors().values()))
        g, e, k = rng.normal(size=(3, 3)), rng.normal(size=(3, 3)), rng.normal(size=(3, 3, 3))
        e = (e + e.T) / 2
        ss = stresses(T, StrainState(g, e, k))
        for got, want in zip((ss.t, ss.s, ss.m), _naive_stresses(T, g, e, k)):
            contraction = max(contraction, _amax(got - want) / max(1.0, _amax(want)))

    jets = 0.0
    for seed in range(3):
        rng = np.random.default_rng(seed)
        fs, pts = random_fields(rng), interior_points(rng, 100)
        jet = evaluate_jet(fs, pts)
        for name in ("u", "phi", "body_force", "body_couple"):
            arr, j = getattr(fs, name), getattr(jet, name)
            for f, want in ((arr.evaluate, j.gradient), (arr.grad().evaluate, j.hessian)):
                scale = _amax(want)
                if scale > 0.0:
                    jets = max(jets, _amax(fd_gradient(f, pts, 1e-5) - want) / scale)

    quad = 0.0
    lo, hi = (-0.7, 0.1, -1.2), (0.4, 1.3, 0.5)
    for order in (2, 4, 8):
        top = 2 * order - 1
        box, ball = QuadratureRule(Box(lo, hi), order, order), QuadratureRule(Ball((0, 0, 0), 0.8), order, order)
        for p in itertools.product(range(top + 1), repeat=3):
            if sum(p) > top:
                continue
            f = lambda x, p=p: x[:, 0] ** p[0] * x[:, 1] ** p[1] * x[:, 2] ** p[2]
            want = _box_monomial(lo, hi, p)
            quad = max(quad, abs(volume_integral(f, box) - want) / max(1.0, abs(want)))
            quad = max(quad, abs(volume_integral(f, ball) - _ball_monomial(0.8, p)))
    checks = [("contractions", contraction, 1e-12, "<="), ("jets", jets, 1e-6, "<="), ("quadrature", quad, 1e-12, "<=")]
    return _record(9, "oracles", checks)


def criterion_10(tmp: Path):
    argv = ["run", "--scenario", "full", "--points", "100", "--seed", "3"]
    diffs = 0
    for fmt in ("json", "csv"):
        outs = []
        for k in range(2):
            p = tmp / f"report{k}.{fmt}"
            cli_main(argv + ["--format", fmt, "--out", str(p)])
            outs.append(p.read_bytes())
        diffs += outs[0] != outs[1]
    return _record(10, "deterministic reports", [("differing reports", float(diffs), 0.0, "<=")])


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9]


@pytest.mark.parametrize("crit", CRITERIA, ids=[f"criterion_{k + 1}" for k in range(len(CRITERIA))])
def test_criterion(crit):
    ok, detail = crit()
    print(detail)
    assert ok, detail


def test_criterion_10(tmp_path):
    ok, detail = criterion_10(tmp_path)
    assert ok, detail


def summary_lines() -> list[str]:
    return [f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}" for n, (title, ok, detail) in sorted(RESULTS.items())]


if __name__ == "__main__":
    import tempfile

    for crit in CRITERIA:
        crit()
    with tempfile.TemporaryDirectory() as d:
        criterion_10(Path(d))
    print("\n".join(summary_lines()))
    raise SystemExit(0 if all(ok for _, ok, _ in RESULTS.values()) else 1)
