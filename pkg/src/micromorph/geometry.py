"""Axis-aligned boxes and balls: membership, sampling and Gauss rules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss


class DomainError(ValueError):
    """A point or region lies outside the domain it must belong to."""


def _gauss(order: int, a: float, b: float):
    t, w = leggauss(order)
    return 0.5 * (b - a) * t + 0.5 * (b + a), 0.5 * (b - a) * w


@dataclass(frozen=True)
class Box:
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != 3 or len(hi) != 3 or any(a >= b for a, b in zip(lo, hi)):
            raise ValueError(f"invalid box {lo} .. {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def size(self) -> float:
        return float(max(np.subtract(self.hi, self.lo)))

    def contains(self, x, tol: float = 0.0) -> np.ndarray:
        x = np.atleast_2d(x)
        return np.all((x >= np.array(self.lo) - tol) & (x <= np.array(self.hi) + tol), axis=-1)

    def contains_region(self, other) -> bool:
        """True when ``other`` (Box or Ball) lies strictly inside."""
        lo, hi = other.bounds()
        return bool(np.all(np.array(lo) > self.lo) and np.all(np.array(hi) < self.hi))

    def bounds(self):
        return self.lo, self.hi

    def shrunk(self, factor: float = 0.9) -> "Box":
        """Concentric box scaled by ``factor``."""
        c = 0.5 * (np.array(self.lo) + self.hi)
        half = 0.5 * factor * (np.array(self.hi) - self.lo)
        return Box(tuple(c - half), tuple(c + half))

    def sample(self, rng: np.random.Generator, n: int, shrink: float = 0.9) -> np.ndarray:
        c = 0.5 * (np.array(self.lo) + self.hi)
        half = 0.5 * shrink * (np.array(self.hi) - self.lo)
        return c + rng.uniform(-1.0, 1.0, size=(n, 3)) * half

    def grid(self, n: int) -> np.ndarray:
        axes = [np.linspace(a, b, n) for a, b in zip(self.lo, self.hi)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)

    @property
    def volume(self) -> float:
        return float(np.prod(np.subtract(self.hi, self.lo)))

    def volume_rule(self, order: int):
        """Tensor-product Gauss-Legendre points and weights."""
        rules = [_gauss(order, a, b) for a, b in zip(self.lo, self.hi)]
        pts = np.stack(np.meshgrid(*[r[0] for r in rules], indexing="ij"), axis=-1).reshape(-1, 3)
        w = np.einsum("i,j,k->ijk", *[r[1] for r in rules]).ravel()
        return pts, w

    def surface_rule(self, order: int):
        """Gauss-Legendre rule on each of the six faces, outward normals."""
        pts, normals, weights = [], [], []
        for axis in range(3):
            a, b = [k for k in range(3) if k != axis]
            ta, wa = _gauss(order, self.lo[a], self.hi[a])
            tb, wb = _gauss(order, self.lo[b], self.hi[b])
            ga, gb = np.meshgrid(ta, tb, indexing="ij")
            w = np.outer(wa, wb).ravel()
            for side, coord in ((-1.0, self.lo[axis]), (1.0, self.hi[axis])):
                p = np.empty((ga.size, 3))
                p[:, axis] = coord
                p[:, a] = ga.ravel()
                p[:, b] = gb.ravel()
                n = np.zeros((ga.size, 3))
                n[:, axis] = side
                pts.append(p)
                normals.append(n)
                weights.append(w)
        return np.concatenate(pts), np.concatenate(normals), np.concatenate(weights)

    def to_dict(self) -> dict:
        return {"box": {"min": list(self.lo), "max": list(self.hi)}}


@dataclass(frozen=True)
class Ball:
    center: tuple[float, float, float]
    radius: float

    def __post_init__(self):
        c = tuple(float(v) for v in self.center)
        if len(c) != 3 or not float(self.radius) > 0.0:
            raise ValueError(f"invalid ball center={c} radius={self.radius}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def size(self) -> float:
        return 2.0 * self.radius

    def contains(self, x, tol: float = 0.0) -> np.ndarray:
        x = np.atleast_2d(x)
        return np.linalg.norm(x - np.array(self.center), axis=-1) <= self.radius + tol

    def contains_region(self, other) -> bool:
        if isinstance(other, Ball):
            gap = np.linalg.norm(np.subtract(other.center, self.center)) + other.radius
            return bool(gap < self.radius)
        corners = np.array(np.meshgrid(*zip(other.lo, other.hi), indexing="ij")).reshape(3, -1).T
        return bool(np.all(np.linalg.norm(corners - np.array(self.center), axis=-1) < self.radius))

    def bounds(self):
        c = np.array(self.center)
        return tuple(c - self.radius), tuple(c + self.radius)

    def shrunk(self, factor: float = 0.9) -> "Ball":
        return Ball(self.center, factor * self.radius)

    def sample(self, rng: np.random.Generator, n: int, shrink: float = 0.9) -> np.ndarray:
        d = rng.standard_normal((n, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        r = shrink * self.radius * rng.uniform(0.0, 1.0, size=(n, 1)) ** (1.0 / 3.0)
        return np.array(self.center) + r * d

    def grid(self, n: int) -> np.ndarray:
        t = np.linspace(-1.0, 1.0, n) * self.radius / np.sqrt(3.0)
        g = np.stack(np.meshgrid(t, t, t, indexing="ij"), axis=-1).reshape(-1, 3)
        return g + np.array(self.center)

    @property
    def volume(self) -> float:
        return 4.0 / 3.0 * np.pi * self.radius**3

    def _sphere(self, order: int):
        # Gauss in cos(theta), trapezoid in azimuth: exact for polynomials of
        # degree <= 2*order - 1 on the sphere
        ct, wt = leggauss(order)
        m = 2 * order
        az = 2.0 * np.pi * np.arange(m) / m
        st = np.sqrt(1.0 - ct**2)
        dirs = np.stack(
            [np.outer(st, np.cos(az)), np.outer(st, np.sin(az)), np.outer(ct, np.ones(m))], axis=-1
        ).reshape(-1, 3)
        w = np.outer(wt, np.full(m, 2.0 * np.pi / m)).ravel()
        return dirs, w

    def surface_rule(self, order: int):
        dirs, w = self._sphere(order)
        return np.array(self.center) + self.radius * dirs, dirs, w * self.radius**2

    def volume_rule(self, order: int):
        """Radial Gauss (order + 2 points, weight r^2) times the sphere rule."""
        dirs, wa = self._sphere(order)
        r, wr = _gauss(order + 2, 0.0, self.radius)
        pts = np.array(self.center) + (r[:, None, None] * dirs[None, :, :]).reshape(-1, 3)
        w = np.outer(wr * r**2, wa).ravel()
        return pts, w

    def to_dict(self) -> dict:
        return {"ball": {"center": list(self.center), "radius": self.radius}}


def region_from_dict(d: dict):
    if not isinstance(d, dict) or len(d) != 1:
        raise ValueError("region must have exactly one of the keys 'box' or 'ball'")
    (kind, spec), = d.items()
    if kind == "box":
        return Box(tuple(spec["min"]), tuple(spec["max"]))
    if kind == "ball":
        return Ball(tuple(spec["center"]), spec["radius"])
    raise ValueError(f"unknown region kind {kind!r}")
