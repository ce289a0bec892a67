"""First-order forward-mode derivatives for batched tensor expressions.

A :class:`Dual` pairs a value of shape ``(N,) + S`` with derivatives of
shape ``(N,) + S + (Z,)``: ``Z`` directions, usually the three coordinate
directions.  Pointwise physics is written once in terms of :func:`ein` and
ordinary arithmetic and then runs on plain arrays or on Duals.

Subscripts passed to :func:`ein` never mention the batch axis; it is added
as a leading ellipsis.
"""

from __future__ import annotations

import numpy as np

_SPARE = "zyxwvutsrq"


class Dual:
    __slots__ = ("v", "d")
    __array_ufunc__ = None  # make ndarray operators defer to ours

    def __init__(self, v, d):
        self.v = np.asarray(v, dtype=float)
        self.d = np.asarray(d, dtype=float)
        if self.d.shape[:-1] != self.v.shape:
            raise ValueError(f"derivative shape {self.d.shape} does not extend value shape {self.v.shape}")

    @property
    def shape(self):
        return self.v.shape

    @property
    def ndirections(self) -> int:
        return self.d.shape[-1]

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.v + other.v, self.d + other.d)
        return Dual(self.v + other, np.broadcast_to(self.d, np.broadcast_shapes(self.v.shape, np.shape(other)) + self.d.shape[-1:]))

    __radd__ = __add__

    def __neg__(self):
        return Dual(-self.v, -self.d)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, c):
        if isinstance(c, Dual) or np.ndim(c) != 0:
            raise TypeError("use ein() for products of tensors")
        return Dual(self.v * c, self.d * c)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / c)

    def __repr__(self):
        return f"Dual(shape={self.v.shape}, directions={self.ndirections})"


def value(a):
    return a.v if isinstance(a, Dual) else a


def derivative(a, ndir: int = 3):
    """Derivative part of ``a``; zeros for plain arrays."""
    if isinstance(a, Dual):
        return a.d
    a = np.asarray(a)
    return np.zeros(a.shape + (ndir,))


def ein(spec: str, *ops):
    """``numpy.einsum`` with a leading batch ellipsis and the product rule."""
    ins, out = spec.replace(" ", "").split("->")
    ins = ins.split(",")
    if len(ins) != len(ops):
        raise ValueError("operand count does not match the subscripts")
    vals = [value(o) for o in ops]
    bspec = ",".join("..." + s for s in ins) + "->..." + out
    v = np.einsum(bspec, *vals, optimize=len(ops) > 2)
    duals = [k for k, o in enumerate(ops) if isinstance(o, Dual)]
    if not duals:
        return v
    z = next(c for c in _SPARE if c not in spec)
    d = None
    for k in duals:
        subs = ["..." + s + (z if j == k else "") for j, s in enumerate(ins)]
        args = [ops[j].d if j == k else vals[j] for j in range(len(ops))]
        term = np.einsum(",".join(subs) + "->..." + out + z, *args, optimize=len(ops) > 2)
        d = term if d is None else d + term
    return Dual(v, d)


def seed(x) -> Dual:
    """Dual with identity derivative: ``x`` varies along itself.

    ``x`` has shape ``(N,) + S``; the result has ``prod(S)`` directions.
    """
    x = np.asarray(x, dtype=float)
    shape = x.shape[1:]
    size = int(np.prod(shape, dtype=int))
    eye = np.eye(size).reshape(shape + (size,))
    return Dual(x, np.broadcast_to(eye, x.shape + (size,)))


def embed(a: Dual, offset: int, total: int) -> Dual:
    """Place the directions of ``a`` at ``offset`` within ``total`` directions."""
    d = np.zeros(a.d.shape[:-1] + (total,))
    d[..., offset : offset + a.d.shape[-1]] = a.d
    return Dual(a.v, d)


def divergence(a):
    """Trace of the last value slot against the derivative directions.

    Plain arrays are constant along x and have zero divergence.
    """
    if not isinstance(a, Dual):
        a = np.asarray(a)
        return np.zeros(a.shape[:-1])
    if a.ndirections != a.v.shape[-1]:
        raise ValueError("divergence needs as many directions as the last slot")
    return np.trace(a.d, axis1=-2, axis2=-1)
