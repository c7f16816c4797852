"""
The two isotropic decoherence channels.

Lindblad:  d rho/dt = -(gamma/2) sum_i [J_i, [J_i, rho]],  T_{L,k} decays at gamma L(L+1)/2.
POVM:      Phi[rho] = integral <z|rho|z> |z><z| dmu^J,   T_{L,k} scales by C(2J,L)/C(2J+L+1,L).

Each channel has a spectral realization (diagonal in the tensor basis) and a
brute-force one (RK4 on the matrix ODE, exact quadrature of the POVM integral);
the two are each other's oracle.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .coherent import (
    SphericalQuadrature,
    binomial_ratios,
    coherent_states_on,
    log_binomial_ratio,
)
from .errors import (
    DimensionMismatchError,
    NegativeStateWarning,
    RatioVarianceWarning,
    TimeStepWarning,
    UndefinedRatioError,
)
from .su2_core import (
    DensityMatrix,
    HalfInt,
    MomentVector,
    _J_of,
    _matrix_of,
    expand,
    reconstruct,
    spin_matrices,
    tensor_basis,
)

logger = logging.getLogger(__name__)

Operator = Union[DensityMatrix, np.ndarray]

POSITIVITY_FLOOR = -1e-10
LOG3 = math.log(3.0)


@dataclass(frozen=True)
class LindbladParams:
    gamma: float
    J: HalfInt

    def __post_init__(self) -> None:
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ValueError(f"gamma must be a positive finite rate, got {self.gamma}")


@dataclass(frozen=True)
class DecayRateTable:
    J: HalfInt
    lindblad: Dict[int, float] = field(default_factory=dict)
    povm: Dict[int, float] = field(default_factory=dict)

    def rows(self) -> List[Tuple[int, float, float]]:
        return [(L, self.lindblad[L], self.povm[L]) for L in sorted(self.lindblad)]


def _check_J(rho: Operator, J: HalfInt) -> None:
    if _J_of(rho) != J:
        raise DimensionMismatchError(f"operator J={_J_of(rho)} but channel J={J}")


def check_positivity(rho: DensityMatrix, what: str) -> DensityMatrix:
    """Log and warn when rho has an eigenvalue below POSITIVITY_FLOOR; rho passes through."""
    low = rho.min_eigenvalue
    if low < POSITIVITY_FLOOR:
        logger.warning("%s produced eigenvalue %.3e below floor %.0e", what, low, POSITIVITY_FLOOR)
        warnings.warn(
            f"{what} produced eigenvalue {low:.3e} below floor {POSITIVITY_FLOOR:.0e}",
            NegativeStateWarning,
            stacklevel=3,
        )
    return rho


# ----------------------------------------------------------------------
# Lindblad channel
# ----------------------------------------------------------------------

def lindblad_generator(rho: Operator, params: LindbladParams) -> np.ndarray:
    """Double-commutator form -(gamma/2) sum_i [J_i, [J_i, rho]]."""
    _check_J(rho, params.J)
    mat = _matrix_of(rho)
    out = np.zeros_like(mat)
    for j in spin_matrices(params.J).cartesian:
        inner = j @ mat - mat @ j
        out -= j @ inner - inner @ j
    return 0.5 * params.gamma * out


def lindblad_generator_ladder(rho: Operator, params: LindbladParams) -> np.ndarray:
    """Ladder form gamma (J+ rho J-/2 + J- rho J+/2 + Jz rho Jz - J(J+1) rho)."""
    _check_J(rho, params.J)
    mat = _matrix_of(rho)
    ops = spin_matrices(params.J)
    jj = params.J.value * (params.J.value + 1)
    out = (
        0.5 * ops.jplus @ mat @ ops.jminus
        + 0.5 * ops.jminus @ mat @ ops.jplus
        + ops.jz @ mat @ ops.jz
        - jj * mat
    )
    return params.gamma * out


def lindblad_rates(J: HalfInt, gamma: float) -> np.ndarray:
    L = np.arange(J.twoJ + 1)
    return 0.5 * gamma * L * (L + 1)


def lindblad_propagate_analytic(m: MomentVector, t: float, params: LindbladParams) -> MomentVector:
    """rho_{L,k} <- exp(-(gamma/2) L(L+1) t) rho_{L,k}."""
    if t < 0:
        raise ValueError(f"propagation time must be >= 0, got {t}")
    if m.J != params.J:
        raise DimensionMismatchError(f"moments J={m.J} but channel J={params.J}")
    return m.scaled(np.exp(-lindblad_rates(m.J, params.gamma) * t))


def lindblad_propagate_matrix(rho: DensityMatrix, t: float, params: LindbladParams) -> DensityMatrix:
    basis = tensor_basis(params.J)
    evolved = reconstruct(lindblad_propagate_analytic(expand(rho, basis), t, params), basis)
    return check_positivity(evolved, "lindblad propagation")


def stable_step(params: LindbladParams) -> float:
    """Largest RK4 step that resolves the stiffest mode, 0.1 / Gamma_{2J}."""
    L_max = params.J.twoJ
    stiffest = 0.5 * params.gamma * L_max * (L_max + 1)
    return math.inf if stiffest == 0 else 0.1 / stiffest


def lindblad_propagate_numeric(
    rho: Operator,
    t: float,
    params: LindbladParams,
    steps: int,
    callback: Optional[Callable[[int, np.ndarray], None]] = None,
) -> DensityMatrix:
    """Classical fixed-step RK4 on the matrix ODE; callback(step, matrix) after each step."""
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if t < 0:
        raise ValueError(f"propagation time must be >= 0, got {t}")
    _check_J(rho, params.J)

    dt = t / steps
    if dt > stable_step(params):
        warnings.warn(
            f"RK4 step {dt:.3g} exceeds {stable_step(params):.3g} for J={params.J}",
            TimeStepWarning,
            stacklevel=2,
        )

    def rhs(mat: np.ndarray) -> np.ndarray:
        return lindblad_generator(mat, params)

    mat = np.array(_matrix_of(rho), dtype=complex)
    for step in range(steps):
        k1 = rhs(mat)
        k2 = rhs(mat + 0.5 * dt * k1)
        k3 = rhs(mat + 0.5 * dt * k2)
        k4 = rhs(mat + dt * k3)
        mat = mat + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if callback is not None:
            callback(step, mat)
    return DensityMatrix(J=params.J, mat=mat)


# ----------------------------------------------------------------------
# POVM channel
# ----------------------------------------------------------------------

def povm_eigenvalues(J: HalfInt) -> np.ndarray:
    return binomial_ratios(J)


def povm_apply_spectral(m: MomentVector) -> MomentVector:
    return m.scaled(povm_eigenvalues(m.J))


def povm_iterate(m: MomentVector, n: int) -> MomentVector:
    """n successive nonselective measurements."""
    if n < 0:
        raise ValueError(f"iteration count must be >= 0, got {n}")
    return m.scaled(povm_eigenvalues(m.J) ** n)


def povm_iterate_state(rho: Operator, n: int) -> DensityMatrix:
    """n measurements applied to a matrix; the reconstruction is checked for positivity."""
    basis = tensor_basis(_J_of(rho))
    evolved = reconstruct(povm_iterate(expand(rho, basis), n), basis)
    return check_positivity(evolved, f"povm iteration n={n}")


def povm_apply_quadrature(rho: Operator, quad: SphericalQuadrature) -> DensityMatrix:
    """sum_nodes w <z|rho|z> |z><z| with dmu^J weights; needs degree >= 4J."""
    J = _J_of(rho)
    if J != quad.J:
        raise DimensionMismatchError(f"operator J={J} but quadrature J={quad.J}")
    quad.require_degree(2 * J.twoJ, "povm_apply_quadrature")

    amps = coherent_states_on(J, quad).reshape(-1, J.dim)
    mat = _matrix_of(rho)
    overlap = np.einsum("ni,ij,nj->n", amps.conj(), mat, amps)
    weighted = quad.measure_weights.reshape(-1) * overlap
    out = DensityMatrix(J=J, mat=(amps.T * weighted) @ amps.conj())
    # bare operators need not be positive
    return check_positivity(out, "povm quadrature") if isinstance(rho, DensityMatrix) else out


# ----------------------------------------------------------------------
# Rates and the discrimination statistic
# ----------------------------------------------------------------------

def decay_rates(J: HalfInt, gamma: float) -> DecayRateTable:
    if not gamma > 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    L = np.arange(J.twoJ + 1)
    lind = lindblad_rates(J, gamma)
    povm = -log_binomial_ratio(J, L)
    povm[0] = 0.0
    return DecayRateTable(
        J=J,
        lindblad={int(l): float(v) for l, v in zip(L, lind)},
        povm={int(l): float(v) for l, v in zip(L, povm)},
    )


def povm_rate_large_J(J: HalfInt, L: int) -> float:
    """Three-term large-J expansion of the POVM rate at fixed L."""
    if L == 0:
        return 0.0
    j = J.value
    ll = L * (L + 1)
    return ll / (2 * j) - ll / (4 * j * j) + ll * (L * L + L + 6) / (48 * j ** 3)


def half_spin_equivalent_time(n: int, gamma: float) -> float:
    """Lindblad time matching n POVM iterations at J = 1/2."""
    return n * LOG3 / gamma


@dataclass(frozen=True)
class RatioResult:
    value: float
    samples: np.ndarray
    variance: float
    flagged: bool


def ratio_statistic(
    series1: Sequence[complex],
    series2: Sequence[complex],
    tolerance: float = 1e-10,
) -> RatioResult:
    """
    R = log(|rho_2(t)|/|rho_2(0)|) / log(|rho_1(t)|/|rho_1(0)|) at every sample t > 0.

    Element 0 of each series is the t = 0 value. `flagged` is set when the
    per-sample values vary by more than `tolerance`.
    """
    s1 = np.abs(np.asarray(series1, dtype=complex))
    s2 = np.abs(np.asarray(series2, dtype=complex))
    if s1.shape != s2.shape or s1.ndim != 1:
        raise UndefinedRatioError("series must be one-dimensional and sampled at the same times")
    if s1.size < 2:
        raise UndefinedRatioError("need at least one sample after t = 0")
    if s1[0] == 0 or s2[0] == 0:
        raise UndefinedRatioError("initial moment is zero; ratio undefined")
    if np.any(s1[1:] == 0) or np.any(s2[1:] == 0):
        raise UndefinedRatioError("a sampled moment vanished; ratio undefined")

    denom = np.log(s1[1:] / s1[0])
    if np.any(denom == 0):
        raise UndefinedRatioError("rank-1 moment did not decay; ratio undefined")
    samples = np.log(s2[1:] / s2[0]) / denom
    variance = float(np.var(samples))
    flagged = variance > tolerance
    if flagged:
        warnings.warn(
            f"ratio varies across samples (variance {variance:.3e})",
            RatioVarianceWarning,
            stacklevel=2,
        )
    return RatioResult(value=float(np.mean(samples)), samples=samples, variance=variance, flagged=flagged)


def hilbert_schmidt_adjoint_gap(
    superop: Callable[[np.ndarray], np.ndarray],
    J: HalfInt,
    rng: np.random.Generator,
    trials: int = 5,
) -> float:
    """max |tr(B^dagger S(A)) - tr(S(B)^dagger A)| over random complex A, B."""
    d = J.dim
    worst = 0.0
    for _ in range(trials):
        a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        b = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        lhs = np.trace(b.conj().T @ superop(a))
        rhs = np.trace(superop(b).conj().T @ a)
        worst = max(worst, float(abs(lhs - rhs)))
    return worst
