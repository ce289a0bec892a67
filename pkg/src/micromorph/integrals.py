"""Surface and volume quadrature, and the J, L and M integrals.

Each integral is computed twice: as the outward flux of its current through
a closed surface, and as the volume integral of the corresponding source.
The two paths share no quadrature machinery beyond the Gauss nodes, so
their agreement is a divergence-theorem check of the whole pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .currents import _inhomogeneity, _rotational, _scaling, point_state
from .geometry import Ball, Box, DomainError

DEFAULT_ORDER = 8


@dataclass(frozen=True)
class QuadratureRule:
    geometry: Box | Ball
    surface_order: int = DEFAULT_ORDER
    volume_order: int = DEFAULT_ORDER

    def __post_init__(self):
        if self.surface_order < 2 or self.volume_order < 2:
            raise ValueError("quadrature orders must be at least 2")

    def refined(self, factor: int = 2) -> "QuadratureRule":
        return QuadratureRule(self.geometry, self.surface_order * factor, self.volume_order * factor)

    def with_orders(self, surface_order=None, volume_order=None) -> "QuadratureRule":
        return QuadratureRule(
            self.geometry,
            self.surface_order if surface_order is None else surface_order,
            self.volume_order if volume_order is None else volume_order,
        )

    def to_dict(self) -> dict:
        return {"geometry": self.geometry.to_dict(), "surface_order": self.surface_order, "volume_order": self.volume_order}


def surface_integral(flux: Callable, rule: QuadratureRule, magnitude: bool = False) -> np.ndarray:
    """Outward flux ``oint flux_{...i} n_i dS`` of a batched point function.

    With ``magnitude=True`` the absolute value of the integrand is
    integrated instead, a scale for judging cancellation.
    """
    pts, normals, w = rule.geometry.surface_rule(rule.surface_order)
    vals = np.asarray(flux(pts), dtype=float)
    fn = np.einsum("n...i,ni->n...", vals, normals)
    if magnitude:
        fn = np.abs(fn)
    return np.einsum("n...,n->...", fn, w)


def volume_integral(density: Callable, rule: QuadratureRule) -> np.ndarray:
    pts, w = rule.geometry.volume_rule(rule.volume_order)
    vals = np.asarray(density(pts), dtype=float)
    return np.einsum("n...,n->...", vals, w)


class IntegralResult(NamedTuple):
    surface: np.ndarray
    volume: np.ndarray
    discrepancy: float  # relative, see relative_discrepancy
    scale: float


def relative_discrepancy(surface, volume, scale: float) -> float:
    """``max|surface - volume|`` over ``max(|surface|, |volume|, scale)``.

    ``scale`` is the integral of the absolute normal flux; it keeps the
    measure meaningful when both sides vanish.
    """
    s, v = np.atleast_1d(surface), np.atleast_1d(volume)
    denom = max(float(np.max(np.abs(s))), float(np.max(np.abs(v))), scale, np.finfo(float).tiny)
    return float(np.max(np.abs(s - v)) / denom)


def _check(scenario, rule):
    if not scenario.fields.domain.contains_region(rule.geometry):
        raise DomainError("integration region is not strictly inside the field domain")


def _integral(scenario, rule, current: str, source: Callable) -> IntegralResult:
    rule = rule or scenario.rule
    _check(scenario, rule)
    ws = not scenario.energy_without_sources
    fs, m = scenario.fields, scenario.material

    def flux(p):
        return getattr(point_state(fs, m, p, scenario.dims, ws), current)

    pts, normals, w = rule.geometry.surface_rule(rule.surface_order)
    vals = flux(pts)
    fn = np.einsum("n...i,ni->n...", vals, normals)
    surf = np.einsum("n...,n->...", fn, w)
    scale = float(np.max(np.einsum("n...,n->...", np.abs(fn), w), initial=0.0))
    vol = volume_integral(lambda p: source(fs, m, p, ws), rule)
    return IntegralResult(surf, vol, relative_discrepancy(surf, vol, scale), scale)


def _j_source(scenario):
    def src(fs, m, p, ws):
        return -_inhomogeneity(fs, m, p, ws)

    return src


def _l_source(scenario):
    def src(fs, m, p, ws):
        s = point_state(fs, m, p, scenario.dims, ws)
        return _rotational(s, _inhomogeneity(fs, m, p, ws))

    return src


def _m_source(scenario):
    def src(fs, m, p, ws):
        s = point_state(fs, m, p, scenario.dims, ws)
        return _scaling(s, _inhomogeneity(fs, m, p, ws), scenario.dims)

    return src


def j_integral(scenario, rule: QuadratureRule | None = None) -> IntegralResult:
    """``oint P_ki n_i dS`` against ``-int f_inh_k dV``."""
    return _integral(scenario, rule, "P", _j_source(scenario))


def l_integral(scenario, rule: QuadratureRule | None = None) -> IntegralResult:
    """``oint M_ki n_i dS`` against the volume integral of the rotational source."""
    return _integral(scenario, rule, "M", _l_source(scenario))


def m_integral(scenario, rule: QuadratureRule | None = None) -> IntegralResult:
    """``oint Y_i n_i dS`` against the volume integral of the scaling source."""
    return _integral(scenario, rule, "Y", _m_source(scenario))


def kappa_m_integral(scenario, rule: QuadratureRule | None = None) -> float:
    """``-int kappa_abi m_abi dV``: the M integral of a homogeneous source-free body."""
    rule = rule or scenario.rule

    def dens(p):
        s = point_state(scenario.fields, scenario.material, p, scenario.dims)
        return -np.einsum("nabi,nabi->n", s.strain.kappa, s.stress.m)

    return float(volume_integral(dens, rule))


@dataclass(frozen=True)
class IntegralReport:
    J: IntegralResult
    L: IntegralResult
    M: IntegralResult
    rule: QuadratureRule
    refinement: dict = field(default_factory=dict)

    def max_discrepancy(self) -> float:
        return max(self.J.discrepancy, self.L.discrepancy, self.M.discrepancy)


def integral_report(scenario, rule: QuadratureRule | None = None, refine: bool = False) -> IntegralReport:
    """J, L and M with both evaluation paths; optionally an order-doubling study.

    ``refinement`` maps ``"J.surface"`` etc. to the max change when both
    quadrature orders are doubled.
    """
    rule = rule or scenario.rule
    res = {k: f(scenario, rule) for k, f in (("J", j_integral), ("L", l_integral), ("M", m_integral))}
    refinement = {}
    if refine:
        fine = rule.refined(2)
        for k, f in (("J", j_integral), ("L", l_integral), ("M", m_integral)):
            r2 = f(scenario, fine)
            refinement[f"{k}.surface"] = float(np.max(np.abs(np.atleast_1d(r2.surface - res[k].surface))))
            refinement[f"{k}.volume"] = float(np.max(np.abs(np.atleast_1d(r2.volume - res[k].volume))))
    return IntegralReport(res["J"], res["L"], res["M"], rule, refinement)
