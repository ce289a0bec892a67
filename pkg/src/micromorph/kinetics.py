"""Pointwise kinematics, stresses, energy and field-equation residuals.

All functions accept batched arrays (leading point axis) or Duals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dual import divergence, ein, value
from .fields import FieldSet, _unbatch, as_points, field_point
from .material import MaterialModel, MaterialTensors

SYMMETRY_TOL = 1e-12


class ConstitutiveError(ArithmeticError):
    """The micro-stress came out non-symmetric: the material data is inconsistent."""


@dataclass(frozen=True)
class StrainState:
    gamma: object
    e: object
    kappa: object


@dataclass(frozen=True)
class StressState:
    t: object
    s: object
    m: object


def _T(a):
    return ein("kl->lk", a)


def strains(grad_u, phi, grad_phi) -> StrainState:
    """Relative distortion, micro-strain and wryness."""
    return StrainState(grad_u - phi, (phi + _T(phi)) * 0.5, grad_phi)


def stresses(mt: MaterialTensors, st: StrainState) -> StressState:
    g, e, k = st.gamma, st.e, st.kappa
    t = ein("ijkl,kl->ij", mt.A, g) + ein("ijkl,kl->ij", mt.E, e) + ein("ijklm,klm->ij", mt.F, k)
    s = ein("klij,kl->ij", mt.E, g) + ein("ijkl,kl->ij", mt.B, e) + ein("ijklm,klm->ij", mt.G, k)
    m = ein("lmijk,lm->ijk", mt.F, g) + ein("lmijk,lm->ijk", mt.G, e) + ein("ijklmn,lmn->ijk", mt.C, k)
    sv = value(s)
    skew = np.max(np.abs(sv - np.swapaxes(sv, -1, -2)), initial=0.0)
    if skew > SYMMETRY_TOL * max(1.0, np.max(np.abs(sv), initial=0.0)):
        raise ConstitutiveError(f"micro-stress is not symmetric (max skew {skew:.3e})")
    s = (s + _T(s)) * 0.5
    return StressState(t, s, m)


def energy(st: StrainState, ss: StressState, u, phi, body_force, body_couple, with_sources: bool = True):
    """Strain energy density, including the potential of the sources."""
    W = (ein("kl,kl->", ss.t, st.gamma) + ein("kl,kl->", ss.s, st.e) + ein("ijk,ijk->", ss.m, st.kappa)) * 0.5
    if with_sources:
        W = W - ein("a,a->", u, body_force) - ein("ab,ab->", phi, body_couple)
    return W


def quadratic_energy(mt: MaterialTensors, st: StrainState):
    """The elastic energy expanded directly in the constitutive tensors."""
    g, e, k = st.gamma, st.e, st.kappa
    return (
        ein("ij,ijkl,kl->", g, mt.A, g) * 0.5
        + ein("ij,ijkl,kl->", g, mt.E, e)
        + ein("ij,ijkl,kl->", e, mt.B, e) * 0.5
        + ein("ij,ijklm,klm->", g, mt.F, k)
        + ein("ij,ijklm,klm->", e, mt.G, k)
        + ein("ijk,ijklmn,lmn->", k, mt.C, k) * 0.5
    )


def pointwise_stress(fs: FieldSet, m: MaterialModel, pts: np.ndarray, mode: str = "value"):
    fp = field_point(fs, pts, mode)
    st = strains(fp.grad_u, fp.phi, fp.grad_phi)
    return fp, st, stresses(m.at(fp.x), st)


def euler_lagrange_residual(fs: FieldSet, m: MaterialModel, x):
    """Residuals ``(D_i t_ai + F_a, D_i m_abi + t_ab - s_ab + L_ab)``."""
    pts, single = as_points(x)
    fs.check_domain(pts)
    fp, _, ss = pointwise_stress(fs, m, pts, "total")
    r1 = divergence(ss.t) + value(fp.body_force)
    r2 = divergence(ss.m) + value(ss.t) - value(ss.s) + value(fp.body_couple)
    return _unbatch(r1, single), _unbatch(r2, single)
