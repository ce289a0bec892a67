"""Manufactured solutions and the built-in scenarios.

``manufacture`` takes any smooth ``u`` and ``phi`` and defines the body
force and couple so that both field equations hold identically::

    F_a  = -div t_a
    L_ab = -div m_ab - (t_ab - s_ab)

The sources are closed-form expressions, so their x-gradients (which enter
the inhomogeneity force) are exact as well.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .currents import ScalingDims
from .expr import ExprArray, sym_einsum
from .fields import FieldSet
from .geometry import Ball, Box
from .integrals import QuadratureRule
from .material import IsotropicSpec, MaterialModel, make_anisotropic, make_isotropic
from .tensor_core import isotropic_matchings, symmetrize

DEFAULT_TOLERANCES = {
    "el": 1e-10,  # max field-equation residual
    "balance_exact": 1e-8,  # balance residuals, exact derivatives
    "balance_fd": 1e-5,  # balance residuals, central differences
    "integral_rel": 1e-6,  # surface vs volume, relative
    "conservation": 1e-8,  # |J|, |L| where they must vanish
    "nonzero_min": 1e-3,  # |M| where it must not vanish
    "isotropy": 1e-10,  # rotational bracket of isotropic materials
    "refinement": 1e-8,  # change when quadrature orders double
    "fd_step": 1e-5,
}


@dataclass(frozen=True)
class Scenario:
    name: str
    material: MaterialModel
    fields: FieldSet
    rule: QuadratureRule
    dims: ScalingDims = field(default_factory=ScalingDims)
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    provenance: str = "manufactured"
    energy_without_sources: bool = False
    expectations: dict = field(default_factory=dict)
    description: str = ""

    def __post_init__(self):
        if self.provenance not in ("manufactured", "prescribed"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if not self.fields.domain.contains_region(self.rule.geometry):
            raise ValueError("integration region must lie strictly inside the field domain")
        object.__setattr__(self, "tolerances", {**DEFAULT_TOLERANCES, **self.tolerances})

    def tol(self, key: str) -> float:
        return float(self.tolerances[key])

    def with_rule(self, **orders) -> "Scenario":
        return replace(self, rule=self.rule.with_orders(**orders))


def _tensor_for_symbolic(arr: ExprArray):
    return arr.constant_value() if arr.is_constant else arr


def symbolic_stresses(m: MaterialModel, u: ExprArray, phi: ExprArray):
    """Force stress, micro-stress and moment stress as expression arrays."""
    T = {k: _tensor_for_symbolic(v) for k, v in m.tensors().items()}
    gamma = u.grad() - phi
    e = (phi + phi.transpose()).scale(0.5)
    kappa = phi.grad()
    t = sym_einsum("ijkl,kl->ij", T["A"], gamma) + sym_einsum("ijkl,kl->ij", T["E"], e) + sym_einsum("ijklm,klm->ij", T["F"], kappa)
    s = sym_einsum("klij,kl->ij", T["E"], gamma) + sym_einsum("ijkl,kl->ij", T["B"], e) + sym_einsum("ijklm,klm->ij", T["G"], kappa)
    s = (s + s.transpose()).scale(0.5)
    mm = (
        sym_einsum("lmijk,lm->ijk", T["F"], gamma)
        + sym_einsum("lmijk,lm->ijk", T["G"], e)
        + sym_einsum("ijklmn,lmn->ijk", T["C"], kappa)
    )
    return t, s, mm


def manufacture(
    material: MaterialModel,
    u,
    phi,
    domain: Box | Ball,
    rule: QuadratureRule | None = None,
    name: str = "manufactured",
    **kwargs,
) -> Scenario:
    """Scenario whose sources make ``(u, phi)`` an exact solution."""
    u = ExprArray(u, (3,))
    phi = ExprArray(phi, (3, 3))
    t, s, m = symbolic_stresses(material, u, phi)
    body_force = -t.divergence()
    body_couple = -(m.divergence() + t - s)
    fs = FieldSet(u, phi, body_force, body_couple, domain)
    return Scenario(name, material, fs, rule or QuadratureRule(domain.shrunk()), provenance="manufactured", **kwargs)


def prescribed(material, u, phi, domain, rule=None, body_force=None, body_couple=None, name="prescribed", **kwargs) -> Scenario:
    """Scenario with user-given sources; not necessarily a solution."""
    fs = FieldSet.create(u, phi, domain, body_force, body_couple)
    return Scenario(name, material, fs, rule or QuadratureRule(domain.shrunk()), provenance="prescribed", **kwargs)


# --- built-in materials -------------------------------------------------------

_KAPPA_IDENTITY = ((0, 3), (1, 4), (2, 5))


def _c_coefficients() -> list[float]:
    coeffs = []
    for k, mt in enumerate(isotropic_matchings(6)):
        coeffs.append(1.0 if mt == _KAPPA_IDENTITY else 0.05 * ((k % 4) - 1))
    return coeffs


def isotropic_material() -> MaterialModel:
    return make_isotropic(
        IsotropicSpec(A=(1.0, 2.0, 0.5), B=(1.2, 2.0, 2.5), C=_c_coefficients(), E=(0.3, 0.25, 0.25))
    )


def anisotropic_material(seed: int = 7) -> MaterialModel:
    """A generic anisotropic model: isotropic core plus seeded random perturbations."""
    rng = np.random.default_rng(seed)
    iso = isotropic_material()
    tensors = {}
    for name in ("A", "B", "C", "E", "F", "G"):
        base = getattr(iso, name).constant_value()
        noise = np.round(rng.uniform(-0.2, 0.2, size=base.shape), 3)
        tensors[name] = base + noise
    return make_anisotropic(**_presymmetrized(tensors), description={"kind": "anisotropic", "seed": seed})


def _presymmetrized(tensors):
    from .material import SYMMETRIES

    return {k: symmetrize(v, SYMMETRIES[k]) for k, v in tensors.items()}


def deviatoric_ratio(m: MaterialModel) -> float:
    """``k`` with ``(A - E^T) k D = (B - E) D`` for the traceless symmetric D = e1e2 + e2e1.

    Only meaningful for homogeneous isotropic materials.
    """
    D = np.zeros((3, 3))
    D[0, 1] = D[1, 0] = 1.0
    A, B, E = (getattr(m, k).constant_value() for k in ("A", "B", "E"))
    lhs = np.einsum("ijkl,kl->ij", A, D) - np.einsum("klij,kl->ij", E, D)
    rhs = np.einsum("ijkl,kl->ij", B, D) - np.einsum("ijkl,kl->ij", E, D)
    return float(rhs[0, 1] / lhs[0, 1])


# --- built-in scenarios ---------------------------------------------------------

def isotropic_source_free(kappa: bool = True) -> Scenario:
    """An exact source-free solution in a homogeneous isotropic body.

    The micro-strain is ``e = x3 D`` (or ``D`` for the kappa-free variant)
    with ``D = e1e2 + e2e1``; ``gamma = k e`` with ``k`` from
    :func:`deviatoric_ratio`; ``u`` and the micro-rotation follow from
    ``grad u = gamma + phi``.  Then ``t = s``, ``div t = 0`` and the moment
    stress is constant, so no sources are needed.
    """
    mat = isotropic_material()
    c = 1.0 + deviatoric_ratio(mat)
    if kappa:
        u = [f"{c!r}*x2*x3", f"{c!r}*x1*x3", f"{-c!r}*x1*x2"]
        phi = [["0", "x3", f"{c!r}*x2"], ["x3", "0", f"{c!r}*x1"], [f"{-c!r}*x2", f"{-c!r}*x1", "0"]]
        name, desc = "isotropic", "isotropic homogeneous source-free solution with constant non-zero wryness"
        expectations = {"J": "zero", "L": "zero", "M": "kappa_m"}
    else:
        u = [f"{c!r}*x2", f"{c!r}*x1", "0"]
        phi = [["0", "1", "0"], ["1", "0", "0"], ["0", "0", "0"]]
        name, desc = "isotropic-kappa0", "isotropic homogeneous source-free solution with zero wryness"
        expectations = {"J": "zero", "L": "zero", "M": "zero"}
    domain = Box((-1.5,) * 3, (1.5,) * 3)
    rule = QuadratureRule(Ball((0.1, -0.2, 0.15), 0.9))
    return prescribed(mat, u, phi, domain, rule, name=name, expectations=expectations, description=desc)


_POLY_U = ["0.3*x1^2 - 0.2*x2*x3 + 0.1*x1*x2*x3", "0.25*x1*x2^2 - 0.15*x3 + 0.2*x1*x3", "0.1*x3^3 + 0.2*x1*x2 - 0.3*x2"]
_POLY_PHI = [
    ["0.1*x1 + 0.05*x2^2", "0.2*x3 - 0.1*x1*x2", "0.15*x2*x3"],
    ["-0.1*x3 + 0.2*x1^2", "0.05*x2 + 0.1*x1*x3", "0.3*x1 - 0.05*x3^2"],
    ["0.1*x1*x2", "-0.2*x1 + 0.1*x2^2", "0.2*x3 + 0.05*x1*x3"],
]
_TRIG_U = ["0.3*sin(x1 + 0.5*x2) - 0.2*x2*x3", "0.25*x1*x2^2 + 0.1*exp(0.3*x3)", "0.2*cos(x1 - x3) + 0.2*x1*x2"]
_TRIG_PHI = [
    ["0.1*x1 + 0.05*sin(x2)", "0.2*x3 - 0.1*x1*x2", "0.15*cos(x2 + x3)"],
    ["-0.1*x3 + 0.2*x1^2", "0.05*exp(0.2*x2)", "0.3*x1 - 0.05*x3^2"],
    ["0.1*sin(x1*x2)", "-0.2*x1 + 0.1*x2^2", "0.2*x3 + 0.05*x1*x3"],
]


def anisotropic_homogeneous() -> Scenario:
    mat = anisotropic_material()
    domain = Box((-1.2,) * 3, (1.2,) * 3)
    rule = QuadratureRule(Box((-0.9, -0.8, -1.0), (1.0, 0.7, 0.9)))
    return manufacture(
        mat, _POLY_U, _POLY_PHI, domain, rule, name="anisotropic",
        description="anisotropic homogeneous material, manufactured polynomial solution",
    )


def inhomogeneous() -> Scenario:
    mat = isotropic_material().scaled({"A": "1 + 0.3*x1 - 0.2*x2 + 0.1*x3^2"})
    domain = Ball((0.0, 0.0, 0.0), 1.5)
    rule = QuadratureRule(Ball((0.05, 0.1, -0.1), 1.0))
    return manufacture(
        mat, _POLY_U, _POLY_PHI, domain, rule, name="inhomogeneous",
        description="isotropic material with position-dependent A, manufactured polynomial solution",
    )


def full() -> Scenario:
    mat = anisotropic_material().scaled(
        {"A": "1 + 0.3*x1 - 0.2*x2*x3", "C": "1 + 0.2*sin(x2)", "E": "0.8 + 0.1*x3", "G": "1 - 0.25*x1"}
    )
    domain = Box((-1.2,) * 3, (1.2,) * 3)
    rule = QuadratureRule(Box((-1.0, -0.9, -0.8), (0.9, 1.0, 1.1)))
    return manufacture(
        mat, _TRIG_U, _TRIG_PHI, domain, rule, name="full",
        description="anisotropic inhomogeneous material with body forces and couples, manufactured trigonometric solution",
    )


BUILTINS = {
    "isotropic": lambda: isotropic_source_free(True),
    "isotropic-kappa0": lambda: isotropic_source_free(False),
    "anisotropic": anisotropic_homogeneous,
    "inhomogeneous": inhomogeneous,
    "full": full,
}

ALIASES = {"a": "isotropic", "b": "anisotropic", "c": "inhomogeneous", "d": "full"}


def builtin_scenarios() -> list[Scenario]:
    return [make() for make in BUILTINS.values()]


def builtin(name: str) -> Scenario:
    key = ALIASES.get(name, name)
    if key not in BUILTINS:
        raise KeyError(f"unknown built-in scenario {name!r}; choose from {', '.join(BUILTINS)}")
    return BUILTINS[key]()
