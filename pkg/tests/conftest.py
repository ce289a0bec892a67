import sys
import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from micromorph.expr import X, add, const, mul, power
from micromorph.fields import FieldSet
from micromorph.geometry import Box
from micromorph.material import NAMES, RANKS, SYMMETRIES, make_anisotropic
from micromorph.scenarios import manufacture
from micromorph.tensor_core import symmetrize

settings.register_profile(
    "default", max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

UNIT_BOX = Box((-1.0, -1.0, -1.0), (1.0, 1.0, 1.0))


def random_tensors(rng, scale=0.3):
    """Random constitutive tensors that already carry the required symmetries."""
    out = {}
    for name in NAMES:
        t = rng.uniform(-scale, scale, size=(3,) * RANKS[name])
        out[name] = symmetrize(t, SYMMETRIES[name])
    # diagonal dominance is not needed anywhere, but keeps numbers O(1)
    out["A"] = out["A"] + symmetrize(np.einsum("ik,jl->ijkl", np.eye(3), np.eye(3)), SYMMETRIES["A"])
    return out


def random_material(rng, inhomogeneous=False):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        m = make_anisotropic(**random_tensors(rng))
    if inhomogeneous:
        c = rng.uniform(-0.2, 0.2, size=3).round(3)
        m = m.scaled({
            "A": f"1 + {c[0]}*x1 + {c[1]}*x2*x3",
            "C": f"1 + {c[2]}*x3^2",
            "F": "1 + 0.1*x1",
        })
    return m


def random_poly(rng, degree=3, terms=4, scale=0.3):
    """Random polynomial expression in x1, x2, x3."""
    out = []
    for _ in range(terms):
        powers = rng.integers(0, degree + 1, size=3)
        while powers.sum() > degree:
            powers[np.argmax(powers)] -= 1
        c = float(np.round(rng.uniform(-scale, scale), 4))
        out.append(mul(const(c), *(power(X[i], int(p)) for i, p in enumerate(powers))))
    return add(*out)


def random_fields(rng, degree=3, sources=True, domain=UNIT_BOX) -> FieldSet:
    u = [random_poly(rng, degree) for _ in range(3)]
    phi = [[random_poly(rng, degree) for _ in range(3)] for _ in range(3)]
    F = [random_poly(rng, 2) for _ in range(3)] if sources else None
    L = [[random_poly(rng, 2) for _ in range(3)] for _ in range(3)] if sources else None
    return FieldSet.create(u, phi, domain, F, L)


def random_manufactured(rng, inhomogeneous=True, degree=3):
    m = random_material(rng, inhomogeneous)
    u = [random_poly(rng, degree) for _ in range(3)]
    phi = [[random_poly(rng, degree) for _ in range(3)] for _ in range(3)]
    return manufacture(m, u, phi, UNIT_BOX)


def interior_points(rng, n=20, domain=UNIT_BOX):
    return domain.sample(rng, n)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
