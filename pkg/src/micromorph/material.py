"""Constitutive tensors of linear anisotropic micromorphic elasticity.

The energy couples the relative distortion ``gamma``, the micro-strain
``e`` and the wryness ``kappa`` through six tensors::

    t_ij  = A_ijkl g_kl + E_ijkl e_kl + F_ijklm k_klm
    s_ij  = E_klij g_kl + B_ijkl e_kl + G_ijklm k_klm
    m_ijk = F_lmijk g_lm + G_lmijk e_lm + C_ijklmn k_lmn

Note the transposed placement ``E_klij`` in the micro-stress.  For ``s`` to
be symmetric, ``E`` must be symmetric in its last slot pair as well as in
its first pair, so both are imposed.

Each tensor is an :class:`~micromorph.expr.ExprArray`, constant or
position dependent, so x-gradients are exact.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .expr import ExprArray, add, mul, to_expr
from .fields import as_points, _unbatch
from .tensor_core import SymmetrySpec, isotropic_basis, symmetrize

NAMES = ("A", "B", "C", "E", "F", "G")
RANKS = {"A": 4, "B": 4, "C": 6, "E": 4, "F": 5, "G": 5}

SYMMETRIES = {
    "A": SymmetrySpec.of(4, blocks=[((0, 1), (2, 3))]),
    "B": SymmetrySpec.of(4, pairs=[(0, 1), (2, 3)], blocks=[((0, 1), (2, 3))]),
    "C": SymmetrySpec.of(6, blocks=[((0, 1, 2), (3, 4, 5))]),
    "E": SymmetrySpec.of(4, pairs=[(0, 1), (2, 3)]),
    "F": SymmetrySpec(5),
    "G": SymmetrySpec.of(5, pairs=[(0, 1)]),
}

ASYMMETRY_TOL = 1e-12


class MaterialSymmetryWarning(UserWarning):
    """Input constitutive data had to be symmetrized noticeably."""


class MaterialTensors(NamedTuple):
    A: object
    B: object
    C: object
    E: object
    F: object
    G: object


def _as_field(data, rank: int) -> ExprArray:
    shape = (3,) * rank
    if isinstance(data, ExprArray):
        arr = data
    elif isinstance(data, np.ndarray) and data.dtype != object:
        arr = ExprArray.constant(np.asarray(data, dtype=float).reshape(shape))
    else:
        arr = ExprArray(list(np.asarray(data, dtype=object).ravel()), shape)
    if arr.shape != shape:
        raise ValueError(f"expected rank {rank} (shape {shape}), got shape {arr.shape}")
    return arr


def symmetrize_field(arr: ExprArray, spec: SymmetrySpec) -> tuple[ExprArray, bool]:
    """Group-average an expression tensor; also report whether it changed."""
    if arr.is_constant:
        t = arr.constant_value()
        s = symmetrize(t, spec)
        return ExprArray.constant(s), bool(np.max(np.abs(s - t), initial=0.0) > ASYMMETRY_TOL)
    group = spec.group()
    obj = arr.to_object_array()
    perms = [obj.transpose(g) for g in group]
    w = 1.0 / len(group)
    out, changed = [], False
    for idx in np.ndindex(*arr.shape):
        orbit = [p[idx] for p in perms]
        if all(o is orbit[0] for o in orbit):
            out.append(orbit[0])
            continue
        if all(o.is_const for o in orbit):
            vals = [o.value for o in orbit]
            changed |= max(vals) - min(vals) > ASYMMETRY_TOL
        else:
            changed = True
        out.append(mul(w, add(*orbit)))
    return ExprArray(out, arr.shape), changed


@dataclass(frozen=True)
class MaterialModel:
    A: ExprArray
    B: ExprArray
    C: ExprArray
    E: ExprArray
    F: ExprArray
    G: ExprArray
    symmetry_warning: bool = False
    isotropic: bool = False
    description: dict = field(default_factory=dict, compare=False)

    def tensors(self) -> dict[str, ExprArray]:
        return {n: getattr(self, n) for n in NAMES}

    @property
    def homogeneous(self) -> bool:
        return all(getattr(self, n).is_constant for n in NAMES)

    def at(self, x) -> MaterialTensors:
        """Tensors at points ``(N, 3)``; a Dual ``x`` yields Duals for position-dependent tensors."""
        return MaterialTensors(*(getattr(self, n)(x) for n in NAMES))

    def scaled(self, factors: dict) -> "MaterialModel":
        """Multiply selected tensors by scalar expressions, e.g. ``{"A": "1 + x1"}``."""
        kw = self.tensors()
        for name, f in factors.items():
            kw[name] = kw[name].scale(to_expr(f))
        desc = dict(self.description)
        scale = dict(desc.get("scale", {}))
        for k, v in factors.items():
            scale[k] = str(mul(to_expr(scale[k]), to_expr(v)) if k in scale else to_expr(v))
        desc["scale"] = scale
        return MaterialModel(**kw, symmetry_warning=self.symmetry_warning, isotropic=self.isotropic, description=desc)


def make_anisotropic(A, B, C, E, F, G, description: dict | None = None) -> MaterialModel:
    """Symmetrize and wrap six constitutive tensors (constants or expression arrays)."""
    raw = dict(zip(NAMES, (A, B, C, E, F, G)))
    kw, changed = {}, []
    for name in NAMES:
        arr = _as_field(raw[name], RANKS[name])
        kw[name], c = symmetrize_field(arr, SYMMETRIES[name])
        if c:
            changed.append(name)
    if changed:
        warnings.warn(f"symmetrized constitutive tensors {', '.join(changed)}", MaterialSymmetryWarning, stacklevel=2)
    desc = {"kind": "anisotropic", **(description or {})}
    desc["tensors"] = {n: _entries(kw[n]) for n in NAMES}
    return MaterialModel(**kw, symmetry_warning=bool(changed), description=desc)


def _entries(arr: ExprArray) -> list:
    if arr.is_constant:
        return arr.constant_value().ravel().tolist()
    return [e.value if e.is_const else str(e) for e in arr.entries]


@dataclass(frozen=True)
class IsotropicSpec:
    """Coefficients of isotropic delta-product bases (numbers or expressions).

    ``A``, ``B``, ``E``: three coefficients for ``d_ij d_kl, d_ik d_jl,
    d_il d_jk``.  ``C``: fifteen coefficients in the order of
    :func:`~micromorph.tensor_core.isotropic_matchings`.
    """

    A: Sequence = (0.0, 0.0, 0.0)
    B: Sequence = (0.0, 0.0, 0.0)
    C: Sequence = (0.0,) * 15
    E: Sequence = (0.0, 0.0, 0.0)

    def __post_init__(self):
        for name, n in (("A", 3), ("B", 3), ("C", 15), ("E", 3)):
            if len(getattr(self, name)) != n:
                raise ValueError(f"isotropic {name} needs {n} coefficients, got {len(getattr(self, name))}")


def _combine(coeffs, basis) -> ExprArray:
    cs = [to_expr(c) for c in coeffs]
    if all(c.is_const for c in cs):
        return ExprArray.constant(sum(c.value * b for c, b in zip(cs, basis)))
    entries = [add(*(mul(float(b[idx]), c) for c, b in zip(cs, basis) if b[idx] != 0.0)) for idx in np.ndindex(*basis[0].shape)]
    return ExprArray(entries, basis[0].shape)


def make_isotropic(spec: IsotropicSpec) -> MaterialModel:
    """Isotropic model; the odd-rank couplings F and G vanish identically."""
    b4, b6 = isotropic_basis(4), isotropic_basis(6)
    kw = {
        "A": _combine(spec.A, b4),
        "B": _combine(spec.B, b4),
        "C": _combine(spec.C, b6),
        "E": _combine(spec.E, b4),
        "F": ExprArray.zeros((3,) * 5),
        "G": ExprArray.zeros((3,) * 5),
    }
    for name in ("A", "B", "C", "E"):
        kw[name], _ = symmetrize_field(kw[name], SYMMETRIES[name])
    desc = {"kind": "isotropic", **{k: [str(to_expr(c)) for c in getattr(spec, k)] for k in ("A", "B", "C", "E")}}
    return MaterialModel(**kw, isotropic=True, description=desc)


def material_gradient(m: MaterialModel, x) -> MaterialTensors:
    """Exact x-gradients of the six tensors; the derivative slot comes last."""
    pts, single = as_points(x)
    return MaterialTensors(*(_unbatch(getattr(m, n).grad().evaluate(pts), single) for n in NAMES))


def energy_min_eigenvalue(m: MaterialModel, x) -> np.ndarray:
    """Smallest eigenvalue of the quadratic strain energy at each point.

    Diagnostic only: nothing in the package requires a positive-definite
    energy.  The micro-strain block is restricted to symmetric tensors.
    """
    pts, single = as_points(x)
    T = m.at(pts)
    n = pts.shape[0]
    H = np.zeros((n, 45, 45))
    H[:, :9, :9] = T.A.reshape(n, 9, 9)
    H[:, :9, 9:18] = T.E.reshape(n, 9, 9)
    H[:, :9, 18:] = T.F.reshape(n, 9, 27)
    H[:, 9:18, 9:18] = T.B.reshape(n, 9, 9)
    H[:, 9:18, 18:] = T.G.reshape(n, 9, 27)
    H[:, 18:, 18:] = T.C.reshape(n, 27, 27)
    H = np.triu(H) + np.swapaxes(np.triu(H, 1), 1, 2)
    # basis of (gamma, sym e, kappa)
    sym = []
    for i in range(3):
        for j in range(i, 3):
            b = np.zeros((3, 3))
            b[i, j] = b[j, i] = 1.0 / np.sqrt(2.0) if i != j else 1.0
            sym.append(b.ravel())
    Q = np.zeros((45, 42))
    Q[:9, :9] = np.eye(9)
    Q[9:18, 9:15] = np.array(sym).T
    Q[18:, 15:] = np.eye(27)
    lam = np.linalg.eigvalsh(Q.T @ H @ Q)[:, 0]
    return _unbatch(lam, single)
