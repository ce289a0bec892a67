"""Small dense tensors in three dimensions.

Tensors are plain ``numpy`` arrays of shape ``(3,) * rank``.  C ordering is
used throughout, so component ``(i1, ..., ir)`` (zero-based) sits at flat
offset ``sum(i_k * 3**(r - k))``, i.e. ``t.ravel()`` is the row-major entry
list used in scenario files.

Slots are numbered from zero in every API of this module.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass

import numpy as np

DIM = 3
MAX_RANK = 6
MAX_GROUP_ORDER = 10_000

DELTA = np.eye(DIM)


def _levi_civita() -> np.ndarray:
    eps = np.zeros((DIM, DIM, DIM))
    for i, j, k in itertools.permutations(range(DIM)):
        eps[i, j, k] = np.linalg.det(np.eye(DIM)[[i, j, k]])
    return eps


EPSILON = _levi_civita()


class ContractionError(ValueError):
    """Raised when a contraction pairs invalid or mismatched slots."""


class SymmetryError(ValueError):
    """Raised when a symmetry relation does not fit a tensor."""


def as_tensor(a, rank: int | None = None) -> np.ndarray:
    """Validate ``a`` as a finite real tensor over dimension 3."""
    t = np.asarray(a, dtype=float)
    if t.ndim > MAX_RANK or any(n != DIM for n in t.shape):
        raise ValueError(f"expected a tensor of shape (3,)*r with r <= {MAX_RANK}, got {t.shape}")
    if rank is not None and t.ndim != rank:
        raise ValueError(f"expected rank {rank}, got rank {t.ndim}")
    if not np.all(np.isfinite(t)):
        raise ValueError("tensor has non-finite entries")
    return t


def from_flat(entries, rank: int) -> np.ndarray:
    """Rebuild a tensor from its row-major entry list."""
    flat = np.asarray(entries, dtype=float).ravel()
    if flat.size != DIM**rank:
        raise ValueError(f"rank-{rank} tensor needs {DIM**rank} entries, got {flat.size}")
    return as_tensor(flat.reshape((DIM,) * rank))


@dataclass(frozen=True)
class SymmetrySpec:
    """Index symmetries of a tensor, stored as slot permutations.

    Each relation ``p`` states ``t == t.transpose(p)``.  Use :meth:`pair`
    and :meth:`block` to build relations rather than writing permutations
    by hand.
    """

    rank: int
    relations: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self):
        for p in self.relations:
            if sorted(p) != list(range(self.rank)):
                raise SymmetryError(f"relation {p} is not a permutation of {self.rank} slots")

    @staticmethod
    def pair(rank: int, i: int, j: int) -> tuple[int, ...]:
        """Exchange of slots ``i`` and ``j``."""
        if not (0 <= i < rank and 0 <= j < rank) or i == j:
            raise SymmetryError(f"invalid pair ({i}, {j}) for rank {rank}")
        p = list(range(rank))
        p[i], p[j] = j, i
        return tuple(p)

    @staticmethod
    def block(rank: int, first, second) -> tuple[int, ...]:
        """Exchange of two equally long slot blocks, e.g. (0,1,2) <-> (3,4,5)."""
        first, second = tuple(first), tuple(second)
        slots = first + second
        if len(first) != len(second) or len(set(slots)) != len(slots):
            raise SymmetryError(f"invalid block exchange {first} <-> {second}")
        if any(not 0 <= s < rank for s in slots):
            raise SymmetryError(f"block exchange {first} <-> {second} out of range for rank {rank}")
        p = list(range(rank))
        for a, b in zip(first, second):
            p[a], p[b] = b, a
        return tuple(p)

    @classmethod
    def of(cls, rank: int, pairs=(), blocks=()) -> "SymmetrySpec":
        rels = [cls.pair(rank, i, j) for i, j in pairs]
        rels += [cls.block(rank, a, b) for a, b in blocks]
        return cls(rank, tuple(rels))

    def group(self) -> list[tuple[int, ...]]:
        """All permutations generated by the relations (identity first)."""
        identity = tuple(range(self.rank))
        seen = {identity: None}
        queue = deque([identity])
        while queue:
            g = queue.popleft()
            for r in self.relations:
                h = tuple(g[k] for k in r)
                if h not in seen:
                    if len(seen) >= MAX_GROUP_ORDER:
                        raise SymmetryError("symmetry group too large")
                    seen[h] = None
                    queue.append(h)
        return list(seen)


def contract(a, b, pairing=()) -> np.ndarray:
    """Sum over paired slots of ``a`` and ``b``.

    ``pairing`` is a list of ``(slot_of_a, slot_of_b)``.  Free slots of
    ``a`` come first in the result, then those of ``b``, each in their
    original order.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    pairing = list(pairing)
    sa = [p[0] for p in pairing]
    sb = [p[1] for p in pairing]
    for s, t in ((sa, a), (sb, b)):
        if any(not 0 <= k < t.ndim for k in s) or len(set(s)) != len(s):
            raise ContractionError(f"invalid slots {s} for a rank-{t.ndim} tensor")
    if any(a.shape[i] != b.shape[j] for i, j in pairing):
        raise ContractionError("paired slots differ in dimension")
    return np.tensordot(a, b, axes=(sa, sb))


def check_symmetry(t, spec: SymmetrySpec, tol: float = 1e-12) -> bool:
    t = np.asarray(t)
    if t.ndim != spec.rank:
        return False
    return all(np.max(np.abs(t - t.transpose(p)), initial=0.0) <= tol for p in spec.relations)


def symmetrize(t, spec: SymmetrySpec) -> np.ndarray:
    """Average ``t`` over the permutation group generated by ``spec``."""
    t = np.asarray(t, dtype=float)
    if t.ndim != spec.rank:
        raise SymmetryError(f"spec is for rank {spec.rank}, tensor has rank {t.ndim}")
    group = spec.group()
    if all(np.array_equal(t, t.transpose(g)) for g in group):
        return t.copy()
    out = np.zeros_like(t)
    for g in group:
        out += t.transpose(g)
    out /= len(group)
    # summation order differs across an orbit; copy one representative so the
    # result is exactly symmetric, not just to rounding
    return out.ravel()[_orbit_representatives(t.shape, group)].reshape(t.shape)


def _orbit_representatives(shape, group) -> np.ndarray:
    idx = np.arange(int(np.prod(shape))).reshape(shape)
    rep = idx
    for g in group:
        rep = np.minimum(rep, idx.transpose(g))
    return rep.ravel()


def _matchings(slots):
    if not slots:
        yield ()
        return
    first, rest = slots[0], slots[1:]
    for k, partner in enumerate(rest):
        remaining = rest[:k] + rest[k + 1 :]
        for m in _matchings(remaining):
            yield ((first, partner),) + m


def delta_product(matching, rank: int) -> np.ndarray:
    """Product of Kronecker deltas joining the slot pairs in ``matching``."""
    letters = "abcdef"[:rank]
    subs = ",".join(letters[i] + letters[j] for i, j in matching)
    return np.einsum(f"{subs}->{letters}", *([DELTA] * len(matching)))


def isotropic_basis(rank: int) -> list[np.ndarray]:
    """Kronecker-delta products spanning the isotropic tensors of even rank.

    Rank 4 gives ``d_ij d_kl, d_ik d_jl, d_il d_jk`` in that order; rank 6
    gives the 15 perfect matchings of six slots in lexicographic order of
    :func:`isotropic_matchings`.
    """
    return [delta_product(m, rank) for m in isotropic_matchings(rank)]


def isotropic_matchings(rank: int) -> list[tuple[tuple[int, int], ...]]:
    if rank not in (4, 6):
        raise ValueError(f"isotropic basis available for ranks 4 and 6 only, got {rank}")
    return list(_matchings(tuple(range(rank))))


def is_orthogonal(R, tol: float = 1e-10) -> bool:
    R = np.asarray(R, dtype=float)
    return R.shape == (DIM, DIM) and np.allclose(R.T @ R, DELTA, rtol=0.0, atol=tol)


def rotate(t, R) -> np.ndarray:
    """Apply the orthogonal map ``R`` to every slot of ``t``."""
    R = np.asarray(R, dtype=float)
    if not is_orthogonal(R):
        raise ValueError("rotation matrix is not orthogonal")
    out = np.asarray(t, dtype=float)
    for k in range(out.ndim):
        out = np.moveaxis(np.tensordot(R, out, axes=(1, k)), 0, k)
    return out


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed proper rotation."""
    q, r = np.linalg.qr(rng.standard_normal((DIM, DIM)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q
