import math
from fractions import Fraction

import numpy as np
import pytest
from numpy.testing import assert_allclose

from spinphase.errors import (
    DimensionMismatchError,
    HalfIntegerError,
    InvalidStateError,
    NonHermitianWarning,
)
from spinphase.su2_core import (
    DensityMatrix,
    HalfInt,
    MomentVector,
    basis_state,
    cat_state,
    clebsch_gordan,
    commutator_check,
    expand,
    moment_index,
    random_density_matrix,
    reconstruct,
    rotation_operator,
    spin_matrices,
    tensor_basis,
)

SPINS = [HalfInt(n) for n in range(0, 7)]
SPINS_TO_5 = [HalfInt(n) for n in range(1, 11)]
SPINS_TO_10 = [HalfInt(n) for n in range(0, 21)]


def test_half_int_parsing():
    assert HalfInt.parse("3/2").twoJ == 3
    assert HalfInt.parse("1").twoJ == 2
    assert HalfInt.parse(2).twoJ == 4
    assert HalfInt.parse(Fraction(1, 2)).twoJ == 1
    assert str(HalfInt(3)) == "3/2"
    assert str(HalfInt(4)) == "2"


@pytest.mark.parametrize("bad", [0.5, "0.5", "1/3", "-1", -1, Fraction(1, 3), True])
def test_half_int_rejects(bad):
    with pytest.raises(HalfIntegerError):
        HalfInt.parse(bad)


def test_spin_half_matrices_are_pauli_over_two():
    ops = spin_matrices(HalfInt(1))
    assert_allclose(ops.jz, np.diag([0.5, -0.5]))
    assert_allclose(ops.jx, [[0, 0.5], [0.5, 0]])
    assert_allclose(ops.jy, [[0, -0.5j], [0.5j, 0]])
    assert_allclose(ops.jx @ ops.jy - ops.jy @ ops.jx, 1j * ops.jz, atol=1e-15)
    assert_allclose(ops.j_squared, 0.75 * np.eye(2), atol=1e-15)


def test_raising_operator_on_spin_one():
    J = HalfInt(2)
    ops = spin_matrices(J)
    assert_allclose(ops.jplus @ basis_state(J, 0), math.sqrt(2) * basis_state(J, 1))


@pytest.mark.parametrize("J", SPINS)
def test_casimir(J):
    ops = spin_matrices(J)
    assert_allclose(ops.j_squared, J.value * (J.value + 1) * np.eye(J.dim), atol=1e-12)


def test_clebsch_gordan_values():
    assert clebsch_gordan("1/2", "1/2", "1/2", "1/2", 1, 1) == pytest.approx(1.0)
    assert clebsch_gordan("1/2", "1/2", "1/2", "-1/2", 0, 0) == pytest.approx(1 / math.sqrt(2))
    assert clebsch_gordan(1, 1, 1, -1, 1, 0) == pytest.approx(1 / math.sqrt(2))
    assert clebsch_gordan(1, 1, 1, 1, 1, 1) == 0.0  # M != m1 + m2
    assert clebsch_gordan(1, 0, 1, 0, 3, 0) == 0.0  # triangle


def test_clebsch_gordan_rejects_bad_projection():
    with pytest.raises(HalfIntegerError):
        clebsch_gordan(1, 2, 1, 0, 1, 2)
    with pytest.raises(HalfIntegerError):
        clebsch_gordan(1, "1/2", 1, 0, 1, "1/2")


def test_clebsch_gordan_orthogonal_block():
    # 1 x 3/2 at M = 1/2: rows m1, columns J
    j1, j2, M = 1, Fraction(3, 2), Fraction(1, 2)
    m1s = [-1, 0, 1]
    Js = [Fraction(1, 2), Fraction(3, 2), Fraction(5, 2)]
    C = np.array([[clebsch_gordan(j1, m1, j2, M - m1, J, M) for J in Js] for m1 in m1s])
    assert_allclose(C.T @ C, np.eye(3), atol=1e-14)


@pytest.mark.parametrize("tj1", range(0, 9))
def test_clebsch_gordan_orthogonality_sweep(tj1):
    for tj2 in range(0, 9):
        for tM in range(-(tj1 + tj2), tj1 + tj2 + 1, 2):
            m1s = [tm1 for tm1 in range(-tj1, tj1 + 1, 2) if abs(tM - tm1) <= tj2]
            Js = [tJ for tJ in range(abs(tj1 - tj2), tj1 + tj2 + 1, 2) if tJ >= abs(tM)]
            assert len(m1s) == len(Js)
            C = np.array(
                [
                    [
                        clebsch_gordan(
                            Fraction(tj1, 2), Fraction(tm1, 2),
                            Fraction(tj2, 2), Fraction(tM - tm1, 2),
                            Fraction(tJ, 2), Fraction(tM, 2),
                        )
                        for tJ in Js
                    ]
                    for tm1 in m1s
                ]
            )
            eye = np.eye(len(Js))
            assert_allclose(C.T @ C, eye, atol=1e-13)
            assert_allclose(C @ C.T, eye, atol=1e-13)


def test_spin_one_tensor_operators():
    J = HalfInt(2)
    basis = tensor_basis(J)
    ops = spin_matrices(J)
    assert_allclose(basis.op(0, 0), np.eye(3) / math.sqrt(3), atol=1e-15)
    assert_allclose(basis.op(1, 0), ops.jz / math.sqrt(2), atol=1e-15)
    assert_allclose(basis.op(2, 2), ops.jplus @ ops.jplus / 2, atol=1e-15)
    assert_allclose(basis.op(2, -2), ops.jminus @ ops.jminus / 2, atol=1e-15)


@pytest.mark.parametrize("J", SPINS_TO_10)
def test_tensor_basis_orthonormal(J):
    ops = tensor_basis(J).ops
    gram = np.einsum("aij,bij->ab", ops.conj(), ops)
    assert_allclose(gram, np.eye(J.n_moments), atol=1e-12)


@pytest.mark.parametrize("J", SPINS[1:5])
def test_tensor_adjoint_rule(J):
    basis = tensor_basis(J)
    for (L, k), T in basis:
        assert_allclose(T.conj().T, (-1) ** k * basis.op(L, -k), atol=1e-13)


def test_tensor_basis_is_read_only():
    basis = tensor_basis(HalfInt(2))
    with pytest.raises(ValueError):
        basis.ops[0, 0, 0] = 1.0
    with pytest.raises(IndexError):
        basis.op(3, 0)


@pytest.mark.parametrize("twoJ, tol", [(2, 1e-12), (10, 1e-11)])
def test_commutator_relations(twoJ, tol):
    J = HalfInt(twoJ)
    report = commutator_check(tensor_basis(J), spin_matrices(J))
    assert report.max_residual <= tol


def test_scalar_operator_commutes():
    J = HalfInt(3)
    ops = spin_matrices(J)
    T = tensor_basis(J).op(0, 0)
    for j in (ops.jz, ops.jplus, ops.jminus):
        assert np.all(j @ T - T @ j == 0)


def test_commutator_check_rejects_mixed_spins():
    with pytest.raises(DimensionMismatchError):
        commutator_check(tensor_basis(HalfInt(1)), spin_matrices(HalfInt(2)))


def test_expand_maximally_mixed():
    for J in SPINS:
        m = expand(DensityMatrix.maximally_mixed(J), tensor_basis(J))
        expected = np.zeros(J.n_moments)
        expected[0] = 1 / math.sqrt(J.dim)
        assert_allclose(m.coeffs, expected, atol=1e-14)


def test_expand_spin_up():
    J = HalfInt(1)
    m = expand(DensityMatrix.from_pure(basis_state(J, "1/2")), tensor_basis(J))
    assert_allclose(m.coeffs, [1 / math.sqrt(2), 0, 1 / math.sqrt(2), 0], atol=1e-15)
    assert m[1, 0] == pytest.approx(1 / math.sqrt(2))


def test_expand_matches_direct_trace():
    J = HalfInt(2)
    rho = DensityMatrix.from_pure(cat_state(J))
    basis = tensor_basis(J)
    m = expand(rho, basis)
    for (L, k), T in basis:
        assert m[L, k] == pytest.approx(np.trace(T.conj().T @ rho.mat), abs=1e-14)


@pytest.mark.parametrize("J", SPINS_TO_5)
def test_round_trip_random_states(J):
    rng = np.random.default_rng(J.twoJ)
    basis = tensor_basis(J)
    for _ in range(100):
        rho = random_density_matrix(J, rng)
        m = expand(rho, basis)
        assert m.hermiticity_gap <= 1e-13
        assert_allclose(reconstruct(m, basis).mat, rho.mat, atol=1e-12)


def test_reconstruct_only_monopole():
    J = HalfInt(3)
    coeffs = np.zeros(J.n_moments)
    coeffs[0] = 1 / math.sqrt(J.dim)
    rho = reconstruct(MomentVector(J, coeffs), tensor_basis(J))
    assert_allclose(rho.mat, np.eye(J.dim) / J.dim, atol=1e-15)


def test_reconstruct_warns_on_broken_image_rule():
    J = HalfInt(2)
    coeffs = np.zeros(J.n_moments, dtype=complex)
    coeffs[0] = 1 / math.sqrt(3)
    coeffs[moment_index(1, 1)] = 0.3
    with pytest.warns(NonHermitianWarning):
        rho = reconstruct(MomentVector(J, coeffs), tensor_basis(J))
    assert rho.hermiticity_gap > 0.1


def test_moment_vector_shape_checked():
    with pytest.raises(DimensionMismatchError):
        MomentVector(HalfInt(2), np.zeros(4))
    with pytest.raises(DimensionMismatchError):
        expand(np.eye(2) / 2, tensor_basis(HalfInt(2)))


def test_density_matrix_validation():
    with pytest.raises(InvalidStateError):
        DensityMatrix.from_array(np.array([[0.5, 0.2], [0.0, 0.5]]))
    with pytest.raises(InvalidStateError):
        DensityMatrix.from_array(np.eye(2))
    with pytest.raises(InvalidStateError):
        DensityMatrix.from_array(np.diag([1.5, -0.5]))
    with pytest.raises(DimensionMismatchError):
        DensityMatrix.from_array(np.eye(3) / 3, J=HalfInt(1))

    rho = DensityMatrix.from_array(np.diag([0.25, 0.75]))
    assert rho.J == HalfInt(1)
    assert rho.purity == pytest.approx(0.625)
    assert not rho.mat.flags.writeable


def test_random_density_matrix_rank():
    rho = random_density_matrix(HalfInt(4), np.random.default_rng(7), rank=2)
    eigs = np.linalg.eigvalsh(rho.mat)
    assert np.sum(eigs > 1e-12) == 2
    assert rho.trace == pytest.approx(1.0)


def test_rotation_by_pi_flips_jz():
    J = HalfInt(3)
    ops = spin_matrices(J)
    R = rotation_operator(J, [1.0, 0.0, 0.0], math.pi)
    assert_allclose(R @ R.conj().T, np.eye(J.dim), atol=1e-13)
    assert_allclose(R @ ops.jz @ R.conj().T, -ops.jz, atol=1e-13)
