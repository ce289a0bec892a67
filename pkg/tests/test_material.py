import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from micromorph.expr import ExprArray
from micromorph.fields import fd_gradient
from micromorph.kinetics import StrainState, quadratic_energy
from micromorph.material import (
    NAMES,
    SYMMETRIES,
    IsotropicSpec,
    MaterialSymmetryWarning,
    energy_min_eigenvalue,
    make_anisotropic,
    make_isotropic,
    material_gradient,
)
from micromorph.scenarios import anisotropic_material, isotropic_material
from micromorph.tensor_core import DELTA, check_symmetry, random_rotation, rotate

from conftest import random_material, random_tensors

seeds = st.integers(0, 2**32 - 1)
ZERO_TENSORS = {n: np.zeros((3,) * r) for n, r in zip(NAMES, (4, 4, 6, 4, 5, 5))}


def test_zero_model():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        m = make_anisotropic(**ZERO_TENSORS)
    assert m.homogeneous and not m.symmetry_warning
    assert all(not getattr(m, n).constant_value().any() for n in NAMES)


def test_major_symmetric_delta_product_accepted_unchanged():
    A = np.einsum("ik,jl->ijkl", DELTA, DELTA)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        m = make_anisotropic(**{**ZERO_TENSORS, "A": A})
    assert np.array_equal(m.A.constant_value(), A)


def test_unsymmetrized_input_is_symmetrized_with_warning(rng):
    B = rng.normal(size=(3, 3, 3, 3))
    with pytest.warns(MaterialSymmetryWarning, match="B"):
        m = make_anisotropic(**{**ZERO_TENSORS, "B": B})
    b = m.B.constant_value()
    assert np.array_equal(b, b.transpose(1, 0, 2, 3))
    assert np.array_equal(b, b.transpose(0, 1, 3, 2))
    assert np.array_equal(b, b.transpose(2, 3, 0, 1))
    assert m.symmetry_warning


def test_tiny_asymmetry_does_not_warn():
    A = np.einsum("ij,kl->ijkl", DELTA, DELTA)
    A[0, 0, 1, 1] += 1e-14
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        make_anisotropic(**{**ZERO_TENSORS, "A": A})


def test_coupling_tensor_gets_both_pair_symmetries(rng):
    with pytest.warns(MaterialSymmetryWarning):
        m = make_anisotropic(**{**ZERO_TENSORS, "E": rng.normal(size=(3, 3, 3, 3))})
    e = m.E.constant_value()
    assert np.array_equal(e, e.transpose(1, 0, 2, 3)) and np.array_equal(e, e.transpose(0, 1, 3, 2))


def test_wrong_rank_rejected():
    with pytest.raises(ValueError):
        make_anisotropic(**{**ZERO_TENSORS, "C": np.zeros((3, 3, 3, 3))})


@given(seeds)
def test_constructed_models_satisfy_symmetries_everywhere(seed):
    rng = np.random.default_rng(seed)
    m = random_material(rng, inhomogeneous=True)
    pts = rng.uniform(-1, 1, size=(100, 3))
    T = m.at(pts)
    for name in NAMES:
        vals = getattr(T, name)
        for p in SYMMETRIES[name].relations:
            perm = (0,) + tuple(k + 1 for k in p)
            assert np.max(np.abs(vals - vals.transpose(perm))) <= 1e-12


def test_symbolic_symmetrization_of_position_dependent_tensor():
    entries = np.full((3, 3, 3, 3, 3), "0", dtype=object)
    entries[0, 1, 2, 2, 2] = "x1"
    with pytest.warns(MaterialSymmetryWarning):
        m = make_anisotropic(**{**ZERO_TENSORS, "G": ExprArray(entries.tolist(), (3,) * 5)})
    assert str(m.G[0, 1, 2, 2, 2]) == str(m.G[1, 0, 2, 2, 2]) == "0.5*x1"


def test_isotropic_zero_coefficients():
    m = make_isotropic(IsotropicSpec())
    assert all(not getattr(m, n).constant_value().any() for n in NAMES)
    assert m.isotropic


def test_isotropic_contraction_with_identity():
    lam, mu, nu = 1.3, 0.7, 0.4
    m = make_isotropic(IsotropicSpec(A=(lam, mu, nu)))
    t = np.einsum("ijkl,kl->ij", m.A.constant_value(), DELTA)
    assert np.allclose(t, (3 * lam + mu + nu) * DELTA, rtol=0, atol=1e-14)


def test_isotropic_rotation_invariance():
    m = isotropic_material()
    rng = np.random.default_rng(3)
    for _ in range(50):
        R = random_rotation(rng)
        for n in NAMES:
            t = getattr(m, n).constant_value()
            assert np.max(np.abs(rotate(t, R) - t)) <= 1e-10


def test_isotropic_models_satisfy_symmetries(rng):
    m = make_isotropic(IsotropicSpec(A=rng.normal(size=3), B=rng.normal(size=3), C=rng.normal(size=15), E=rng.normal(size=3)))
    for n in NAMES:
        assert check_symmetry(getattr(m, n).constant_value(), SYMMETRIES[n], tol=0.0)


def test_isotropic_spec_lengths():
    with pytest.raises(ValueError):
        IsotropicSpec(A=(1.0, 2.0))


def test_position_dependent_isotropic_coefficients():
    m = make_isotropic(IsotropicSpec(A=("1 + x1", 0.0, 0.0)))
    g = material_gradient(m, [0.2, 0.1, 0.0])
    assert np.allclose(g.A[..., 0], np.einsum("ij,kl->ijkl", DELTA, DELTA))


def test_homogeneous_gradient_is_zero():
    g = material_gradient(anisotropic_material(), np.zeros((4, 3)))
    assert all(not getattr(g, n).any() for n in NAMES)


def test_linear_scaling_gradient():
    base = anisotropic_material()
    m = base.scaled({"A": "1 + x1"})
    g = material_gradient(m, [0.3, -0.2, 0.5])
    assert np.allclose(g.A[..., 0], base.A.constant_value(), rtol=0, atol=1e-15)
    assert not g.A[..., 1:].any() and not g.B.any()


@given(seeds)
def test_gradient_matches_central_differences(seed):
    rng = np.random.default_rng(seed)
    m = random_material(rng, inhomogeneous=True).scaled({"E": "sin(x1 + x2) + 2", "G": "exp(0.3*x3)"})
    pts = rng.uniform(-0.9, 0.9, size=(10, 3))
    g = material_gradient(m, pts)
    for n in NAMES:
        fd = fd_gradient(lambda p: getattr(m, n)(p), pts, 1e-5)
        assert np.max(np.abs(fd - getattr(g, n))) <= 1e-7


def test_scaling_composes():
    m = isotropic_material().scaled({"A": "1 + x1"}).scaled({"A": "2"})
    assert m.description["scale"]["A"] == "2*(1 + x1)"
    x = np.array([[0.5, 0.0, 0.0]])
    assert np.allclose(m.A(x)[0], 3.0 * isotropic_material().A.constant_value())


def test_energy_min_eigenvalue_matches_quadratic_form(rng):
    m = make_anisotropic(**random_tensors(rng))
    x = np.zeros(3)
    T = m.at(x[None])
    # Hessian of the expanded energy over (gamma, sym e, kappa) coordinates
    basis = []
    for k in range(9):
        g = np.zeros(9)
        g[k] = 1
        basis.append((g.reshape(3, 3), np.zeros((3, 3)), np.zeros((3, 3, 3))))
    for i in range(3):
        for j in range(i, 3):
            e = np.zeros((3, 3))
            e[i, j] = e[j, i] = 1.0 if i == j else 1.0 / np.sqrt(2.0)
            basis.append((np.zeros((3, 3)), e, np.zeros((3, 3, 3))))
    for k in range(27):
        kk = np.zeros(27)
        kk[k] = 1
        basis.append((np.zeros((3, 3)), np.zeros((3, 3)), kk.reshape(3, 3, 3)))

    def q(a):
        return float(quadratic_energy(T, StrainState(a[0][None], a[1][None], a[2][None]))[0])

    n = len(basis)
    H = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            s = tuple(basis[i][k] + basis[j][k] for k in range(3))
            d = tuple(basis[i][k] - basis[j][k] for k in range(3))
            H[i, j] = (q(s) - q(d)) / 2.0  # polarization: bilinear form of 2*q/2
    want = np.linalg.eigvalsh(H)[0]
    assert abs(energy_min_eigenvalue(m, x) - want) <= 1e-10 * max(1.0, abs(want))


def test_isotropic_builtin_is_positive_definite():
    assert energy_min_eigenvalue(isotropic_material(), np.zeros(3)) > 0
