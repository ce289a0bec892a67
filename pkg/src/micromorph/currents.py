"""Configurational currents of micromorphic elasticity and their sources.

Translations give the Eshelby stress ``P``, rotations the angular momentum
tensor ``M`` (orbital plus spin part), dilatations the scaling flux ``Y``.
Their divergences are balanced by the inhomogeneity force, the rotational
source and the scaling source; :func:`balance_residuals` measures how well
that holds at given points.

Every function accepts one point ``(3,)`` or a batch ``(N, 3)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .dual import Dual, divergence, ein, embed, seed, value
from .fields import DEFAULT_STEP, FieldPoint, FieldSet, _unbatch, as_points, fd_divergence, field_point
from .kinetics import StrainState, StressState, energy, euler_lagrange_residual, strains, stresses
from .material import MaterialModel
from .tensor_core import DELTA, EPSILON

EL_PRECONDITION_TOL = 1e-8


class BalanceWarning(UserWarning):
    """Balance residuals requested for fields that do not solve the field equations."""


@dataclass(frozen=True)
class ScalingDims:
    """Scaling dimensions of ``u`` and ``phi`` in ``n`` space dimensions."""

    n: int = 3
    d_u: float | None = None
    d_phi: float | None = None

    def __post_init__(self):
        du, dp = -(self.n - 2) / 2.0, -self.n / 2.0
        if self.d_u is None:
            object.__setattr__(self, "d_u", du)
        if self.d_phi is None:
            object.__setattr__(self, "d_phi", dp)
        if self.d_u != du or self.d_phi != dp:
            raise ValueError(f"scaling dimensions for n={self.n} must be d_u={du}, d_phi={dp}")


@dataclass(frozen=True)
class PointState:
    """Everything evaluated at a batch of points (arrays or Duals)."""

    fields: FieldPoint
    strain: StrainState
    stress: StressState
    W: object
    P: object
    M_orbital: object
    M_spin: object
    M: object
    Y: object


def _state(fp: FieldPoint, m: MaterialModel, dims: ScalingDims, with_sources: bool) -> PointState:
    st = strains(fp.grad_u, fp.phi, fp.grad_phi)
    ss = stresses(m.at(fp.x), st)
    W = energy(st, ss, fp.u, fp.phi, fp.body_force, fp.body_couple, with_sources)
    P = eshelby_from_stress(W, fp.grad_u, fp.grad_phi, ss.t, ss.m)
    Mo = ein("kjn,j,ni->ki", EPSILON, fp.x, P)
    Ms = (
        ein("kjn,j,ni->ki", EPSILON, fp.u, ss.t)
        + ein("kjn,lj,lni->ki", EPSILON, fp.phi, ss.m)
        + ein("kjn,jl,nli->ki", EPSILON, fp.phi, ss.m)
    )
    Y = ein("j,ji->i", fp.x, P) + ein("j,ji->i", fp.u, ss.t) * dims.d_u + ein("jl,jli->i", fp.phi, ss.m) * dims.d_phi
    return PointState(fp, st, ss, W, P, Mo, Ms, Mo + Ms, Y)


def eshelby_from_stress(W, grad_u, grad_phi, t, m):
    return ein(",ki->ki", W, DELTA) - ein("ak,ai->ki", grad_u, t) - ein("abk,abi->ki", grad_phi, m)


def point_state(
    fs: FieldSet, m: MaterialModel, x, dims: ScalingDims | None = None, with_sources: bool = True, mode: str = "value"
) -> PointState:
    """Evaluate strains, stresses, energy and currents at a batch of points."""
    pts, _ = as_points(x)
    fs.check_domain(pts)
    return _state(field_point(fs, pts, mode), m, dims or ScalingDims(), with_sources)


def eshelby_stress(fs, m, x, with_sources: bool = True):
    """``P_ki = W d_ki - u_a,k t_ai - phi_ab,k m_abi``."""
    pts, single = as_points(x)
    return _unbatch(point_state(fs, m, pts, with_sources=with_sources).P, single)


def angular_momentum(fs, m, x, with_sources: bool = True):
    """Total, orbital and spin angular momentum tensors ``(M, M_orb, M_spin)``."""
    pts, single = as_points(x)
    s = point_state(fs, m, pts, with_sources=with_sources)
    return _unbatch((s.M, s.M_orbital, s.M_spin), single)


def scaling_flux(fs, m, x, dims: ScalingDims | None = None, with_sources: bool = True):
    pts, single = as_points(x)
    return _unbatch(point_state(fs, m, pts, dims, with_sources).Y, single)


# --- canonical forms: fluxes built from derivatives of W ---------------------

class EnergyDerivatives(NamedTuple):
    W: np.ndarray
    dW_dgrad_u: np.ndarray
    dW_dgrad_phi: np.ndarray


def energy_derivatives(fs, m, x, with_sources: bool = True) -> EnergyDerivatives:
    """``W``, ``dW/du_a,i`` and ``dW/dphi_ab,i`` by differentiating the energy itself."""
    pts, single = as_points(x)
    fs.check_domain(pts)
    fp = field_point(fs, pts, "value")
    gu = embed(seed(fp.grad_u), 0, 36)
    gphi = embed(seed(fp.grad_phi), 9, 36)
    st = strains(gu, fp.phi, gphi)
    ss = stresses(m.at(pts), st)
    W = energy(st, ss, fp.u, fp.phi, fp.body_force, fp.body_couple, with_sources)
    n = pts.shape[0]
    out = EnergyDerivatives(W.v, W.d[:, :9].reshape(n, 3, 3), W.d[:, 9:].reshape(n, 3, 3, 3))
    return _unbatch(out, single)


def _canonical(fs, m, x, with_sources):
    pts, single = as_points(x)
    fp = field_point(fs, pts, "value")
    return pts, single, fp, energy_derivatives(fs, m, pts, with_sources)


def eshelby_stress_canonical(fs, m, x, with_sources: bool = True):
    """Eshelby stress from ``dW/du_a,i`` and ``dW/dphi_ab,i`` rather than from the stresses."""
    pts, single, fp, ed = _canonical(fs, m, x, with_sources)
    return _unbatch(eshelby_from_stress(ed.W, fp.grad_u, fp.grad_phi, ed.dW_dgrad_u, ed.dW_dgrad_phi), single)


def angular_momentum_canonical(fs, m, x, with_sources: bool = True):
    pts, single, fp, ed = _canonical(fs, m, x, with_sources)
    tu, tp = ed.dW_dgrad_u, ed.dW_dgrad_phi
    M = (
        ein("kji,j,->ki", EPSILON, pts, ed.W)
        + ein("kja,j,ai->ki", EPSILON, fp.u, tu)
        + ein("kja,jl,ali->ki", EPSILON, fp.phi, tp)
        + ein("kja,lj,lai->ki", EPSILON, fp.phi, tp)
        - ein("kjn,j,an,ai->ki", EPSILON, pts, fp.grad_u, tu)
        - ein("kjn,j,abn,abi->ki", EPSILON, pts, fp.grad_phi, tp)
    )
    return _unbatch(M, single)


def scaling_flux_canonical(fs, m, x, dims: ScalingDims | None = None, with_sources: bool = True):
    dims = dims or ScalingDims()
    pts, single, fp, ed = _canonical(fs, m, x, with_sources)
    lever_u = fp.u * dims.d_u - ein("k,ak->a", pts, fp.grad_u)
    lever_phi = fp.phi * dims.d_phi - ein("k,abk->ab", pts, fp.grad_phi)
    Y = ein("i,->i", pts, ed.W) + ein("a,ai->i", lever_u, ed.dW_dgrad_u) + ein("ab,abi->i", lever_phi, ed.dW_dgrad_phi)
    return _unbatch(Y, single)


# --- generators and the general flux ----------------------------------------

@dataclass(frozen=True)
class GeneratorTriple:
    """Infinitesimal generators of a symmetry family with ``K`` parameters.

    Each callable receives batched ``(x, u, phi)`` and returns arrays of
    shape ``(N, K, 3)`` (X and U) or ``(N, K, 3, 3)`` (Phi).
    """

    X: Callable
    U: Callable
    Phi: Callable


def translation_generators() -> GeneratorTriple:
    def X(x, u, phi):
        return np.broadcast_to(DELTA, (x.shape[0], 3, 3))

    def U(x, u, phi):
        return np.zeros((x.shape[0], 3, 3))

    def Phi(x, u, phi):
        return np.zeros((x.shape[0], 3, 3, 3))

    return GeneratorTriple(X, U, Phi)


def rotation_generators() -> GeneratorTriple:
    # component k of each generator is stored in axis 1
    def X(x, u, phi):
        return np.einsum("ikj,nj->nki", EPSILON, x)

    def U(x, u, phi):
        return np.einsum("akb,nb->nka", EPSILON, u)

    def Phi(x, u, phi):
        return np.einsum("akj,njb->nkab", EPSILON, phi) + np.einsum("bkj,naj->nkab", EPSILON, phi)

    return GeneratorTriple(X, U, Phi)


def scaling_generators(dims: ScalingDims | None = None) -> GeneratorTriple:
    dims = dims or ScalingDims()
    return GeneratorTriple(
        lambda x, u, phi: x[:, None, :],
        lambda x, u, phi: dims.d_u * u[:, None, :],
        lambda x, u, phi: dims.d_phi * phi[:, None, :, :],
    )


def general_flux(g: GeneratorTriple, fs, m, x, with_sources: bool = True) -> np.ndarray:
    """Noether flux of a generator family; result shape ``(N, K, 3)``."""
    pts, single = as_points(x)
    s = point_state(fs, m, pts, with_sources=with_sources)
    fp, t, mm = s.fields, s.stress.t, s.stress.m
    Xg, Ug, Pg = g.X(pts, fp.u, fp.phi), g.U(pts, fp.u, fp.phi), g.Phi(pts, fp.u, fp.phi)
    A = (
        np.einsum("nka,nai->nki", Ug, t)
        + np.einsum("nkab,nabi->nki", Pg, mm)
        + Xg * s.W[:, None, None]
        - np.einsum("nkj,naj,nai->nki", Xg, fp.grad_u, t)
        - np.einsum("nkj,nabj,nabi->nki", Xg, fp.grad_phi, mm)
    )
    return _unbatch(A, single)


# --- sources -----------------------------------------------------------------

def inhomogeneity_force(fs, m, x, with_sources: bool = True):
    """``-dW/dx_k`` at frozen fields, including the x-dependence of the sources."""
    pts, single = as_points(x)
    return _unbatch(_inhomogeneity(fs, m, pts, with_sources), single)


def _inhomogeneity(fs, m, pts, with_sources):
    fs.check_domain(pts)
    fp = field_point(fs, pts, "explicit")
    st = strains(fp.grad_u, fp.phi, fp.grad_phi)
    ss = stresses(m.at(fp.x), st)
    W = energy(st, ss, fp.u, fp.phi, fp.body_force, fp.body_couple, with_sources)
    return -W.d if isinstance(W, Dual) else np.zeros((pts.shape[0], 3))


def _bracket(st: StrainState, ss: StressState):
    g, e, k = value(st.gamma), value(st.e), value(st.kappa)
    t, s, m = value(ss.t), value(ss.s), value(ss.m)
    return (
        ein("kjn,ij,in->k", EPSILON, g, t)
        + ein("kjn,ji,ni->k", EPSILON, g, t)
        + ein("kjn,ij,in->k", EPSILON, e, s) * 2.0
        + ein("kjn,ijl,inl->k", EPSILON, k, m)
        + ein("kjn,jli,nli->k", EPSILON, k, m)
        + ein("kjn,lij,lin->k", EPSILON, k, m)
    )


def isotropy_bracket(fs, m, x):
    """The constitutive part of the rotational source; zero for isotropic materials."""
    pts, single = as_points(x)
    s = point_state(fs, m, pts)
    return _unbatch(_bracket(s.strain, s.stress), single)


def _rotational(s: PointState, f_inh):
    fp = s.fields
    x, u, phi, F, L = (value(a) for a in (fp.x, fp.u, fp.phi, fp.body_force, fp.body_couple))
    external = (
        ein("kjn,j,n->k", EPSILON, x, f_inh)
        + ein("kjn,j,n->k", EPSILON, u, F)
        + ein("kjn,ji,ni->k", EPSILON, phi, L)
        + ein("kjn,ij,in->k", EPSILON, phi, L)
    )
    return _bracket(s.strain, s.stress) - external


def _scaling(s: PointState, f_inh, dims: ScalingDims):
    fp = s.fields
    x, u, phi, F, L = (value(a) for a in (fp.x, fp.u, fp.phi, fp.body_force, fp.body_couple))
    n = dims.n
    return (
        -ein("abi,abi->", value(s.strain.kappa), value(s.stress.m))
        - ein("i,i->", x, f_inh)
        - ein("a,a->", u, F) * ((n + 2) / 2.0)
        - ein("ab,ab->", phi, L) * (n / 2.0)
    )


def rotational_source(fs, m, x, with_sources: bool = True):
    """Right-hand side of the angular momentum balance."""
    pts, single = as_points(x)
    s = point_state(fs, m, pts, with_sources=with_sources)
    return _unbatch(_rotational(s, _inhomogeneity(fs, m, pts, with_sources)), single)


def scaling_source(fs, m, x, dims: ScalingDims | None = None, with_sources: bool = True):
    """Right-hand side of the scalar moment balance."""
    dims = dims or ScalingDims()
    pts, single = as_points(x)
    s = point_state(fs, m, pts, dims, with_sources)
    return _unbatch(_scaling(s, _inhomogeneity(fs, m, pts, with_sources), dims), single)


class BalanceResiduals(NamedTuple):
    momentum: np.ndarray  # D_i P_ki + f_k
    angular: np.ndarray  # D_i M_ki - rotational source
    scaling: np.ndarray  # D_i Y_i - scaling source
    el_max: float  # field-equation residual at the same points


def balance_residuals(
    fs: FieldSet,
    m: MaterialModel,
    x,
    dims: ScalingDims | None = None,
    method: str = "exact",
    h: float = DEFAULT_STEP,
    with_sources: bool = True,
) -> BalanceResiduals:
    """Residuals of the three balance laws; near zero on solutions.

    ``method="exact"`` differentiates the currents with Duals,
    ``method="fd"`` with central differences of step ``h``.
    """
    dims = dims or ScalingDims()
    pts, single = as_points(x)
    fs.check_domain(pts)
    r1, r2 = euler_lagrange_residual(fs, m, pts)
    el_max = float(max(np.max(np.abs(r1), initial=0.0), np.max(np.abs(r2), initial=0.0)))
    if el_max > EL_PRECONDITION_TOL:
        warnings.warn(
            f"fields do not satisfy the field equations (residual {el_max:.2e}); balance residuals are not expected to vanish",
            BalanceWarning,
            stacklevel=2,
        )
    if method == "exact":
        s = point_state(fs, m, pts, dims, with_sources, mode="total")
        divP, divM, divY = divergence(s.P), divergence(s.M), divergence(s.Y)
    elif method == "fd":
        s = point_state(fs, m, pts, dims, with_sources)

        def field_of(attr):
            return lambda p: getattr(point_state(fs, m, p, dims, with_sources), attr)

        divP, divM, divY = (fd_divergence(field_of(a), pts, h) for a in ("P", "M", "Y"))
    else:
        raise ValueError(f"unknown method {method!r}")
    f = _inhomogeneity(fs, m, pts, with_sources)
    res = BalanceResiduals(
        divP + f,
        divM - _rotational(s, f),
        divY - _scaling(s, f, dims),
        el_max,
    )
    return res._replace(**{k: _unbatch(getattr(res, k), single) for k in ("momentum", "angular", "scaling")})
