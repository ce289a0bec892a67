"""Closed-form field configurations and derivatives along them.

A :class:`FieldSet` holds the displacement ``u`` (3 entries), the
micro-distortion ``phi`` (3x3), the body force (3) and the body couple
(3x3) as expressions over x1, x2, x3, together with the domain on which
they are meant to be used.

Every divergence in this package contracts the LAST slot of its argument.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .dual import Dual, seed, value
from .expr import ExprArray
from .geometry import Ball, Box, DomainError

DEFAULT_STEP = 1e-5
_DOMAIN_SLACK = 1e-9


def as_points(x) -> tuple[np.ndarray, bool]:
    """Return ``(points of shape (N, 3), was_single_point)``."""
    x = np.asarray(x, dtype=float)
    if x.shape == (3,):
        return x[None, :], True
    if x.ndim != 2 or x.shape[1] != 3:
        raise ValueError(f"points must have shape (3,) or (N, 3), got {x.shape}")
    return x, False


def _unbatch(a, single: bool):
    if not single:
        return a
    if isinstance(a, tuple):
        return tuple(_unbatch(b, single) for b in a)
    return a[0]


@dataclass(frozen=True)
class FieldSet:
    u: ExprArray
    phi: ExprArray
    body_force: ExprArray
    body_couple: ExprArray
    domain: Box | Ball

    def __post_init__(self):
        shapes = {"u": (3,), "phi": (3, 3), "body_force": (3,), "body_couple": (3, 3)}
        for name, shape in shapes.items():
            arr = getattr(self, name)
            arr = arr if isinstance(arr, ExprArray) else ExprArray(arr, shape)
            if arr.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
            object.__setattr__(self, name, arr)
        grid = self.domain.grid(5)
        for name in shapes:
            if not np.all(np.isfinite(getattr(self, name).evaluate(grid))):
                raise ValueError(f"{name} is not finite on the domain")

    @classmethod
    def create(cls, u, phi, domain, body_force=None, body_couple=None) -> "FieldSet":
        """Build from expressions or strings; missing sources are zero."""
        return cls(
            ExprArray(u, (3,)),
            ExprArray(phi, (3, 3)),
            ExprArray.zeros((3,)) if body_force is None else ExprArray(body_force, (3,)),
            ExprArray.zeros((3, 3)) if body_couple is None else ExprArray(body_couple, (3, 3)),
            domain,
        )

    @property
    def source_free(self) -> bool:
        return self.body_force.is_zero and self.body_couple.is_zero

    def check_domain(self, x: np.ndarray) -> None:
        inside = self.domain.contains(x, tol=_DOMAIN_SLACK * self.domain.size)
        if not np.all(inside):
            bad = x[~inside][0]
            raise DomainError(f"point {bad.tolist()} lies outside the field domain")


@dataclass(frozen=True)
class Jet:
    """Value, gradient and Hessian of a field; derivative slots come last."""

    value: np.ndarray
    gradient: np.ndarray
    hessian: np.ndarray | None = None


@dataclass(frozen=True)
class FieldJets:
    u: Jet
    phi: Jet
    body_force: Jet
    body_couple: Jet


def _jet(arr: ExprArray, x, order: int, single: bool) -> Jet:
    v = arr.evaluate(x)
    g = arr.grad().evaluate(x) if order >= 1 else None
    h = arr.grad().grad().evaluate(x) if order >= 2 else None
    return Jet(*(_unbatch(a, single) if a is not None else None for a in (v, g, h)))


def evaluate_jet(fs: FieldSet, x, order: int = 2, source_order: int | None = None) -> FieldJets:
    """Exact jets of ``u``, ``phi`` and the sources at ``x``.

    ``source_order`` (default: ``order``) limits how far the body force and
    couple are differentiated.
    """
    pts, single = as_points(x)
    fs.check_domain(pts)
    so = order if source_order is None else source_order
    return FieldJets(
        _jet(fs.u, pts, order, single),
        _jet(fs.phi, pts, order, single),
        _jet(fs.body_force, pts, so, single),
        _jet(fs.body_couple, pts, so, single),
    )


class FieldPoint(NamedTuple):
    """Arguments of a pointwise quantity, each an array or a Dual."""

    x: object
    u: object
    phi: object
    grad_u: object
    grad_phi: object
    body_force: object
    body_couple: object


def field_point(fs: FieldSet, x: np.ndarray, mode: str = "value") -> FieldPoint:
    """Field arguments at the points ``x`` (shape ``(N, 3)``).

    ``mode``:
      * ``"value"``    plain arrays;
      * ``"total"``    Duals carrying the total x-derivative along the fields;
      * ``"explicit"`` only ``x`` and the prescribed sources vary, the field
        arguments are frozen (the partial derivative at fixed fields).
    """
    if mode == "value":
        return FieldPoint(x, fs.u(x), fs.phi(x), fs.u.grad()(x), fs.phi.grad()(x), fs.body_force(x), fs.body_couple(x))
    xd = seed(x)
    if mode == "total":
        return FieldPoint(
            xd, fs.u(xd), fs.phi(xd), fs.u.grad()(xd), fs.phi.grad()(xd), fs.body_force(xd), fs.body_couple(xd)
        )
    if mode == "explicit":
        return FieldPoint(
            xd, fs.u(x), fs.phi(x), fs.u.grad()(x), fs.phi.grad()(x), fs.body_force(xd), fs.body_couple(xd)
        )
    raise ValueError(f"unknown mode {mode!r}")


def total_derivative(
    g: Callable, fs: FieldSet, x, i: int | None = None, method: str = "exact", h: float = DEFAULT_STEP
):
    """Total derivative ``D_i g`` of ``g(x, u, phi, grad_u, grad_phi)`` along ``fs``.

    The exact path feeds Duals through ``g``; when ``g`` cannot handle them
    (or ``method="fd"``) a central difference of the composite map
    ``x -> g(x, fields(x))`` is used instead.  With ``i=None`` the full
    gradient (derivative slot last) is returned.
    """
    pts, single = as_points(x)
    fs.check_domain(pts)

    def composite(p):
        fp = field_point(fs, p, "value")
        return np.asarray(g(fp.x, fp.u, fp.phi, fp.grad_u, fp.grad_phi), dtype=float)

    grad = None
    if method == "exact":
        fp = field_point(fs, pts, "total")
        try:
            out = g(fp.x, fp.u, fp.phi, fp.grad_u, fp.grad_phi)
        except TypeError:
            out = None
        if isinstance(out, Dual):
            grad = out.d
        elif out is not None:
            out = np.asarray(out, dtype=float)
            grad = np.zeros(out.shape + (3,))
    elif method != "fd":
        raise ValueError(f"unknown method {method!r}")
    if grad is None:
        grad = fd_gradient(composite, pts, h)
    if i is not None:
        grad = grad[..., i]
    return _unbatch(grad, single)


def fd_gradient(f: Callable, x, h: float = DEFAULT_STEP) -> np.ndarray:
    """Central-difference gradient of a batched point function; slot appended last."""
    pts, single = as_points(x)
    if h <= 0:
        raise ValueError("step must be positive")
    n = pts.shape[0]
    shifted = []
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        if np.any(pts[:, i] + h == pts[:, i]) or np.any(pts[:, i] - h == pts[:, i]):
            raise FloatingPointError("finite-difference step underflows at these coordinates")
        shifted += [pts + e, pts - e]
    vals = np.asarray(value(f(np.concatenate(shifted))), dtype=float)
    vals = vals.reshape((6, n) + vals.shape[1:])
    grad = np.stack([(vals[2 * i] - vals[2 * i + 1]) / (2.0 * h) for i in range(3)], axis=-1)
    return _unbatch(grad, single)


def fd_divergence(T: Callable, x, h: float = DEFAULT_STEP) -> np.ndarray:
    """Central-difference divergence over the last slot of ``T``."""
    g = fd_gradient(T, x, h)
    return np.trace(g, axis1=-2, axis2=-1)
