import math
import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose

from spinphase.channels import (
    LindbladParams,
    check_positivity,
    decay_rates,
    half_spin_equivalent_time,
    hilbert_schmidt_adjoint_gap,
    lindblad_generator,
    lindblad_generator_ladder,
    lindblad_propagate_analytic,
    lindblad_propagate_matrix,
    lindblad_propagate_numeric,
    povm_apply_quadrature,
    povm_apply_spectral,
    povm_eigenvalues,
    povm_iterate,
    povm_iterate_state,
    povm_rate_large_J,
    ratio_statistic,
)
from spinphase.coherent import binomial_ratio_exact, build_quadrature, default_quadrature
from spinphase.errors import (
    DimensionMismatchError,
    NegativeStateWarning,
    QuadratureDegreeError,
    RatioVarianceWarning,
    TimeStepWarning,
    UndefinedRatioError,
)
from spinphase.su2_core import (
    DensityMatrix,
    HalfInt,
    basis_state,
    expand,
    random_density_matrix,
    reconstruct,
    tensor_basis,
)

POVM_SPINS = [HalfInt(n) for n in (1, 2, 3, 4, 6, 8)]


def spin_up(J):
    return DensityMatrix.from_pure(basis_state(J, J.fraction))


# ----------------------------------------------------------------------
# Lindblad
# ----------------------------------------------------------------------

def test_generator_annihilates_identity():
    J = HalfInt(4)
    params = LindbladParams(gamma=0.7, J=J)
    assert_allclose(lindblad_generator(np.eye(J.dim) / J.dim, params), 0, atol=1e-15)


@pytest.mark.parametrize("twoJ", range(0, 11))
def test_tensor_operators_are_lindblad_eigenoperators(twoJ):
    J = HalfInt(twoJ)
    params = LindbladParams(gamma=1.3, J=J)
    for (L, k), T in tensor_basis(J):
        expected = -0.5 * params.gamma * L * (L + 1) * T
        assert_allclose(lindblad_generator(T, params), expected, atol=1e-11)


def test_ladder_form_matches_double_commutator():
    J = HalfInt(5)
    params = LindbladParams(gamma=0.9, J=J)
    rng = np.random.default_rng(2)
    a = rng.standard_normal((J.dim, J.dim)) + 1j * rng.standard_normal((J.dim, J.dim))
    assert_allclose(lindblad_generator_ladder(a, params), lindblad_generator(a, params), atol=1e-12)


def test_spin_half_generator_on_spin_up():
    J = HalfInt(1)
    out = lindblad_generator(spin_up(J), LindbladParams(gamma=1.0, J=J))
    assert_allclose(out, np.diag([-0.5, 0.5]), atol=1e-15)


def test_analytic_limits():
    J = HalfInt(4)
    params = LindbladParams(gamma=1.0, J=J)
    rho = random_density_matrix(J, np.random.default_rng(1))
    assert_allclose(lindblad_propagate_matrix(rho, 0.0, params).mat, rho.mat, atol=1e-12)
    assert_allclose(lindblad_propagate_matrix(rho, 50.0, params).mat, np.eye(J.dim) / J.dim, atol=1e-12)


def test_analytic_argument_checks():
    J = HalfInt(2)
    m = expand(spin_up(J), tensor_basis(J))
    with pytest.raises(ValueError):
        lindblad_propagate_analytic(m, -1.0, LindbladParams(gamma=1.0, J=J))
    with pytest.raises(DimensionMismatchError):
        lindblad_propagate_analytic(m, 1.0, LindbladParams(gamma=1.0, J=HalfInt(3)))
    with pytest.raises(ValueError):
        LindbladParams(gamma=0.0, J=J)
    with pytest.raises(ValueError):
        LindbladParams(gamma=math.inf, J=J)


@pytest.mark.parametrize("twoJ", [1, 2, 4, 6, 8])
def test_rk4_matches_analytic(twoJ):
    J = HalfInt(twoJ)
    params = LindbladParams(gamma=1.0, J=J)
    rho = random_density_matrix(J, np.random.default_rng(twoJ))
    numeric = lindblad_propagate_numeric(rho, 1.0, params, steps=1000)
    exact = lindblad_propagate_matrix(rho, 1.0, params)
    assert np.max(np.abs(numeric.mat - exact.mat)) <= 1e-10


def test_rk4_is_fourth_order():
    J = HalfInt(2)
    params = LindbladParams(gamma=1.0, J=J)
    rho = random_density_matrix(J, np.random.default_rng(4))
    exact = lindblad_propagate_matrix(rho, 1.0, params).mat
    coarse = np.max(np.abs(lindblad_propagate_numeric(rho, 1.0, params, steps=40).mat - exact))
    fine = np.max(np.abs(lindblad_propagate_numeric(rho, 1.0, params, steps=80).mat - exact))
    assert 12.0 <= coarse / fine <= 20.0


def test_rk4_callback_and_checks():
    J = HalfInt(2)
    params = LindbladParams(gamma=1.0, J=J)
    seen = []
    lindblad_propagate_numeric(spin_up(J), 0.1, params, steps=5, callback=lambda i, m: seen.append(i))
    assert seen == [0, 1, 2, 3, 4]
    with pytest.raises(ValueError):
        lindblad_propagate_numeric(spin_up(J), 0.1, params, steps=0)
    with pytest.warns(TimeStepWarning):
        lindblad_propagate_numeric(spin_up(J), 1.0, params, steps=1)


# ----------------------------------------------------------------------
# POVM
# ----------------------------------------------------------------------

@pytest.mark.parametrize("J", POVM_SPINS)
def test_tensor_operators_are_povm_eigenoperators(J):
    quad = default_quadrature(J)
    for (L, k), T in tensor_basis(J):
        ratio = float(binomial_ratio_exact(J, L))
        assert np.max(np.abs(povm_apply_quadrature(T, quad).mat - ratio * T)) <= 1e-11


def test_povm_eigenvalues_spin_one():
    assert_allclose(povm_eigenvalues(HalfInt(2)), [1.0, 0.5, 0.1])


def test_povm_fixed_point_and_spectral_agreement():
    J = HalfInt(3)
    quad = default_quadrature(J)
    uniform = DensityMatrix.maximally_mixed(J)
    assert_allclose(povm_apply_quadrature(uniform, quad).mat, uniform.mat, atol=1e-13)

    basis = tensor_basis(J)
    rho = random_density_matrix(J, np.random.default_rng(9))
    spectral = povm_apply_spectral(expand(rho, basis))
    assert_allclose(expand(povm_apply_quadrature(rho, quad), basis).coeffs, spectral.coeffs, atol=1e-12)


def test_povm_quadrature_refusals():
    J = HalfInt(3)
    rho = DensityMatrix.maximally_mixed(J)
    with pytest.raises(QuadratureDegreeError):
        povm_apply_quadrature(rho, build_quadrature(J, 5))
    with pytest.raises(DimensionMismatchError):
        povm_apply_quadrature(rho, default_quadrature(HalfInt(2)))
    with pytest.raises(ValueError):
        povm_iterate(expand(rho, tensor_basis(J)), -1)


@pytest.mark.parametrize("twoJ", [1, 2, 4, 6, 8])
def test_channels_commute(twoJ):
    J = HalfInt(twoJ)
    params = LindbladParams(gamma=0.8, J=J)
    quad = default_quadrature(J)
    rho = random_density_matrix(J, np.random.default_rng(20 + twoJ))
    first = povm_apply_quadrature(lindblad_propagate_matrix(rho, 0.6, params), quad)
    second = lindblad_propagate_matrix(povm_apply_quadrature(rho, quad), 0.6, params)
    assert np.max(np.abs(first.mat - second.mat)) <= 1e-11


@pytest.mark.parametrize("gamma", [1.0, 0.25])
def test_spin_half_models_coincide(gamma):
    J = HalfInt(1)
    params = LindbladParams(gamma=gamma, J=J)
    m0 = expand(random_density_matrix(J, np.random.default_rng(3)), tensor_basis(J))
    for n in range(11):
        povm = povm_iterate(m0, n)
        lind = lindblad_propagate_analytic(m0, half_spin_equivalent_time(n, gamma), params)
        assert_allclose(povm.coeffs, lind.coeffs, atol=1e-12)


def test_channels_are_self_adjoint():
    J = HalfInt(3)
    params = LindbladParams(gamma=1.0, J=J)
    quad = default_quadrature(J)
    rng = np.random.default_rng(0)
    assert hilbert_schmidt_adjoint_gap(lambda a: lindblad_generator(a, params), J, rng) <= 1e-10
    assert hilbert_schmidt_adjoint_gap(lambda a: povm_apply_quadrature(a, quad).mat, J, rng) <= 1e-10




# ----------------------------------------------------------------------
# Positivity of channel outputs
# ----------------------------------------------------------------------

@pytest.mark.parametrize("twoJ", [1, 2, 3, 5, 8])
def test_channel_outputs_stay_positive(twoJ):
    J = HalfInt(twoJ)
    rng = np.random.default_rng(300 + twoJ)
    params = LindbladParams(gamma=1.0, J=J)
    quad = default_quadrature(J)
    with warnings.catch_warnings():
        warnings.simplefilter("error", NegativeStateWarning)
        for i in range(50):
            rho = random_density_matrix(J, rng, rank=1 + i % J.dim)
            outputs = [
                lindblad_propagate_matrix(rho, 0.1, params),
                lindblad_propagate_matrix(rho, 2.0, params),
                povm_iterate_state(rho, 1),
                povm_iterate_state(rho, 3),
                povm_apply_quadrature(rho, quad),
            ]
            for out in outputs:
                assert out.min_eigenvalue >= -1e-10
                assert out.trace == pytest.approx(1.0, abs=1e-12)


def test_povm_iterate_state_matches_moment_path():
    J = HalfInt(4)
    rho = random_density_matrix(J, np.random.default_rng(12))
    basis = tensor_basis(J)
    expected = reconstruct(povm_iterate(expand(rho, basis), 2), basis)
    assert_allclose(povm_iterate_state(rho, 2).mat, expected.mat, atol=1e-14)


def test_check_positivity_warns_and_logs(caplog):
    bad = DensityMatrix(J=HalfInt(1), mat=np.diag([1.2, -0.2]))
    with pytest.warns(NegativeStateWarning):
        assert check_positivity(bad, "test map") is bad
    assert "test map" in caplog.text

    good = DensityMatrix.maximally_mixed(HalfInt(2))
    with warnings.catch_warnings():
        warnings.simplefilter("error", NegativeStateWarning)
        assert check_positivity(good, "test map") is good
# ----------------------------------------------------------------------
# Rates and the ratio statistic
# ----------------------------------------------------------------------

def test_decay_rates_spin_one():
    table = decay_rates(HalfInt(2), 1.0)
    assert table.lindblad == {0: 0.0, 1: 1.0, 2: 3.0}
    assert table.povm[0] == 0.0
    assert table.povm[1] == pytest.approx(math.log(2), abs=1e-12)
    assert table.povm[2] == pytest.approx(math.log(10), abs=1e-12)
    assert table.lindblad[2] / table.lindblad[1] == pytest.approx(3.0, abs=1e-12)
    assert table.povm[2] / table.povm[1] == pytest.approx(3.321928094887362, abs=1e-12)


@pytest.mark.parametrize("twoJ", range(1, 21))
def test_decay_rates_increase_with_rank(twoJ):
    J = HalfInt(twoJ)
    table = decay_rates(J, 1.0 / J.value)
    lind = np.array([table.lindblad[L] for L in range(twoJ + 1)])
    povm = np.array([table.povm[L] for L in range(twoJ + 1)])
    assert np.all(np.diff(lind) > 0)
    assert np.all(np.diff(povm) > 0)
    if twoJ > 1:
        assert povm[1] < lind[1]
        assert not np.allclose(povm, lind)


def test_spin_half_povm_rate_is_log3():
    assert decay_rates(HalfInt(1), 1.0).povm[1] == pytest.approx(math.log(3), abs=1e-12)
    with pytest.raises(ValueError):
        decay_rates(HalfInt(1), 0.0)


@pytest.mark.parametrize("twoJ", [20, 100, 200])
def test_large_spin_rates_converge(twoJ):
    J = HalfInt(twoJ)
    table = decay_rates(J, 1.0 / J.value)
    gap = abs(table.povm[1] - table.lindblad[1]) / table.lindblad[1]
    assert gap <= 1.2 / (2 * J.value)


@pytest.mark.parametrize("L", [1, 2])
def test_large_spin_expansion_error_scaling(L):
    spins = [HalfInt(2 * j) for j in (10, 20, 40, 80, 160)]
    errors = [abs(povm_rate_large_J(J, L) - decay_rates(J, 1.0).povm[L]) for J in spins]
    slope = np.polyfit(np.log([J.value for J in spins]), np.log(errors), 1)[0]
    assert slope == pytest.approx(-4.0, abs=0.3)


def test_ratio_statistic_lindblad_is_three():
    J = HalfInt(4)
    params = LindbladParams(gamma=0.37, J=J)
    m0 = expand(spin_up(J), tensor_basis(J))
    series = [lindblad_propagate_analytic(m0, t, params) for t in (0.0, 0.5, 1.0, 2.0)]
    result = ratio_statistic([m[1, 0] for m in series], [m[2, 0] for m in series])
    assert result.value == pytest.approx(3.0, abs=1e-10)
    assert not result.flagged


def test_ratio_statistic_povm_spin_one():
    J = HalfInt(2)
    m0 = expand(spin_up(J), tensor_basis(J))
    series = [povm_iterate(m0, n) for n in range(5)]
    result = ratio_statistic([m[1, 0] for m in series], [m[2, 0] for m in series])
    assert result.value == pytest.approx(math.log(10) / math.log(2), abs=1e-10)


def test_ratio_statistic_failures():
    with pytest.raises(UndefinedRatioError):
        ratio_statistic([0.0, 0.1], [1.0, 0.5])
    with pytest.raises(UndefinedRatioError):
        ratio_statistic([1.0], [1.0])
    with pytest.raises(UndefinedRatioError):
        ratio_statistic([1.0, 1.0], [1.0, 0.5])
    with pytest.raises(UndefinedRatioError):
        ratio_statistic([1.0, 0.5, 0.2], [1.0, 0.5])


def test_ratio_statistic_flags_variation():
    s1 = [1.0, math.exp(-1.0), math.exp(-2.0)]
    s2 = [1.0, math.exp(-3.0), math.exp(-5.0)]
    with pytest.warns(RatioVarianceWarning):
        result = ratio_statistic(s1, s2)
    assert result.flagged
    assert_allclose(result.samples, [3.0, 2.5])
