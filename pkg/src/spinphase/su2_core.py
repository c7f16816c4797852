"""
Exact SU(2) building blocks: half-integers, spin matrices, Clebsch-Gordan
coefficients and the irreducible tensor operator basis T^J_{L,k}.

Conventions:
    - Hilbert-space rows are ordered m = J, J-1, ..., -J (row 0 is |J,J>).
    - Clebsch-Gordan coefficients carry the Condon-Shortley phase.
    - Moments are stored flat, index(L, k) = L*L + L + k.
"""

import logging
import math
import re
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import (
    DimensionMismatchError,
    HalfIntegerError,
    InvalidStateError,
    NonHermitianWarning,
)

logger = logging.getLogger(__name__)

_HALF_INT_RE = re.compile(r"^\s*(\d+)\s*(/\s*2)?\s*$")

Number = Union[int, float, Fraction, str]


# ----------------------------------------------------------------------
# Half-integers
# ----------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class HalfInt:
    """Non-negative half-integer spin quantum number, stored as 2J."""

    twoJ: int

    def __post_init__(self) -> None:
        if isinstance(self.twoJ, bool) or not isinstance(self.twoJ, int):
            raise HalfIntegerError(f"twoJ must be an int, got {self.twoJ!r}")
        if self.twoJ < 0:
            raise HalfIntegerError(f"twoJ must be >= 0, got {self.twoJ}")

    @classmethod
    def parse(cls, value: Union["HalfInt", int, Fraction, str]) -> "HalfInt":
        """
        Accepts a HalfInt, an int, an exact Fraction, or a string "n" / "p/2".

        Floats are rejected on purpose: "0.5" style input would hide rounding.
        """
        if isinstance(value, HalfInt):
            return value
        if isinstance(value, bool):
            raise HalfIntegerError(f"not a half-integer: {value!r}")
        if isinstance(value, int):
            return cls(2 * value) if value >= 0 else cls(-1)
        if isinstance(value, Fraction):
            doubled = 2 * value
            if doubled.denominator != 1:
                raise HalfIntegerError(f"not a half-integer: {value}")
            return cls(int(doubled))
        if isinstance(value, str):
            match = _HALF_INT_RE.match(value)
            if not match:
                raise HalfIntegerError(f"not a half-integer string: {value!r}")
            numerator = int(match.group(1))
            return cls(numerator if match.group(2) else 2 * numerator)
        raise HalfIntegerError(f"unsupported half-integer input: {value!r}")

    @property
    def value(self) -> float:
        return self.twoJ / 2

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.twoJ, 2)

    @property
    def dim(self) -> int:
        return self.twoJ + 1

    @property
    def n_moments(self) -> int:
        return self.dim * self.dim

    def __str__(self) -> str:
        if self.twoJ % 2 == 0:
            return str(self.twoJ // 2)
        return f"{self.twoJ}/2"


def twice(value: Number) -> int:
    """Return 2*value as an int, rejecting anything that is not a half-integer."""
    if isinstance(value, bool):
        raise HalfIntegerError(f"not a half-integer: {value!r}")
    try:
        frac = Fraction(value)
    except (TypeError, ValueError) as exc:
        raise HalfIntegerError(f"not a half-integer: {value!r}") from exc
    doubled = 2 * frac
    if doubled.denominator != 1:
        raise HalfIntegerError(f"not a half-integer: {value!r}")
    return int(doubled)


def moment_index(L: int, k: int) -> int:
    return L * L + L + k


def moment_labels(J: HalfInt) -> List[Tuple[int, int]]:
    return [(L, k) for L in range(J.twoJ + 1) for k in range(-L, L + 1)]


def algebra_tolerance(J: HalfInt) -> float:
    """1e-12 for J <= 10, relaxed by the dimension beyond."""
    return 1e-12 if J.twoJ <= 20 else 1e-12 * J.dim


# ----------------------------------------------------------------------
# Spin operators
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class SpinOperators:
    J: HalfInt
    jx: np.ndarray
    jy: np.ndarray
    jz: np.ndarray
    jplus: np.ndarray
    jminus: np.ndarray
    j_squared: np.ndarray

    @property
    def cartesian(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.jx, self.jy, self.jz


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=complex)
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=None)
def spin_matrices(J: HalfInt) -> SpinOperators:
    """Spin matrices in the m-descending J_z eigenbasis (hbar = 1)."""
    J = HalfInt.parse(J)
    d = J.dim
    m = (J.twoJ - 2 * np.arange(d)) / 2.0
    jz = np.diag(m).astype(complex)

    jplus = np.zeros((d, d), dtype=complex)
    for col in range(1, d):
        # J+ |J,m> = sqrt((J-m)(J+m+1)) |J,m+1>, and m+1 sits one row up.
        jplus[col - 1, col] = math.sqrt((J.value - m[col]) * (J.value + m[col] + 1))
    jminus = jplus.conj().T

    jx = (jplus + jminus) / 2
    jy = (jplus - jminus) / 2j
    j_squared = jx @ jx + jy @ jy + jz @ jz

    return SpinOperators(
        J=J,
        jx=_frozen(jx),
        jy=_frozen(jy),
        jz=_frozen(jz),
        jplus=_frozen(jplus),
        jminus=_frozen(jminus),
        j_squared=_frozen(j_squared),
    )


# ----------------------------------------------------------------------
# Clebsch-Gordan coefficients (Racah's closed form, exact integers)
# ----------------------------------------------------------------------

def clebsch_gordan(j1: Number, m1: Number, j2: Number, m2: Number, J: Number, M: Number) -> float:
    """
    Condon-Shortley Clebsch-Gordan coefficient C^{J M}_{j1 m1 j2 m2}.

    All arguments may be ints, Fractions, half-integer strings, floats that are
    exact half-integers, or (for j's) HalfInt instances.

    Returns 0 when M != m1 + m2 or the triangle condition fails. Raises
    HalfIntegerError for malformed input (non half-integer, |m| > j, or j - m
    not an integer).
    """
    tj1, tj2, tJ = (
        j.twoJ if isinstance(j, HalfInt) else twice(j) for j in (j1, j2, J)
    )
    tm1, tm2, tM = twice(m1), twice(m2), twice(M)

    for tj, tm in ((tj1, tm1), (tj2, tm2), (tJ, tM)):
        if tj < 0:
            raise HalfIntegerError("angular momentum must be non-negative")
        if abs(tm) > tj or (tj - tm) % 2:
            raise HalfIntegerError(f"projection {tm}/2 incompatible with j = {tj}/2")

    if tM != tm1 + tm2:
        return 0.0
    if tJ < abs(tj1 - tj2) or tJ > tj1 + tj2 or (tj1 + tj2 + tJ) % 2:
        return 0.0
    return _racah(tj1, tm1, tj2, tm2, tJ, tM)


@lru_cache(maxsize=200_000)
def _racah(tj1: int, tm1: int, tj2: int, tm2: int, tJ: int, tM: int) -> float:
    f = math.factorial

    s12 = (tj1 + tj2 - tJ) // 2
    sJ1 = (tJ + tj1 - tj2) // 2
    sJ2 = (tJ - tj1 + tj2) // 2
    total = (tj1 + tj2 + tJ) // 2 + 1

    j1_minus = (tj1 - tm1) // 2
    j1_plus = (tj1 + tm1) // 2
    j2_minus = (tj2 - tm2) // 2
    j2_plus = (tj2 + tm2) // 2
    big_plus = (tJ + tM) // 2
    big_minus = (tJ - tM) // 2

    prefactor = Fraction((tJ + 1) * f(sJ1) * f(sJ2) * f(s12), f(total))
    prefactor *= (
        f(big_plus) * f(big_minus) * f(j1_minus) * f(j1_plus) * f(j2_minus) * f(j2_plus)
    )

    a = (tJ - tj2 + tm1) // 2
    b = (tJ - tj1 - tm2) // 2
    k_min = max(0, -a, -b)
    k_max = min(s12, j1_minus, j2_plus)

    series = Fraction(0)
    for k in range(k_min, k_max + 1):
        denom = f(k) * f(s12 - k) * f(j1_minus - k) * f(j2_plus - k) * f(a + k) * f(b + k)
        series += Fraction(-1 if k % 2 else 1, denom)

    if series == 0:
        return 0.0
    # prefactor * series**2 is the exact square of the coefficient
    return math.copysign(math.sqrt(float(prefactor * series * series)), series)


# ----------------------------------------------------------------------
# Irreducible tensor operators
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class TensorBasis:
    """Hilbert-Schmidt orthonormal basis T^J_{L,k}, stacked as ops[index(L, k)]."""

    J: HalfInt
    ops: np.ndarray

    @property
    def labels(self) -> List[Tuple[int, int]]:
        return moment_labels(self.J)

    def op(self, L: int, k: int) -> np.ndarray:
        if not (0 <= L <= self.J.twoJ and -L <= k <= L):
            raise IndexError(f"(L, k) = ({L}, {k}) outside the spin-{self.J} basis")
        return self.ops[moment_index(L, k)]

    def __len__(self) -> int:
        return self.ops.shape[0]

    def __iter__(self) -> Iterator[Tuple[Tuple[int, int], np.ndarray]]:
        for label, mat in zip(self.labels, self.ops):
            yield label, mat


@lru_cache(maxsize=None)
def tensor_basis(J: HalfInt) -> TensorBasis:
    """
    <J,m'|T_{L,k}|J,m> = sqrt((2L+1)/(2J+1)) C^{J m'}_{J m L k}.

    Built once per J and cached; the returned stack is read-only.
    """
    J = HalfInt.parse(J)
    d = J.dim
    ops = np.zeros((J.n_moments, d, d), dtype=complex)
    for L in range(J.twoJ + 1):
        scale = math.sqrt((2 * L + 1) / d)
        for k in range(-L, L + 1):
            idx = moment_index(L, k)
            for col in range(d):
                row = col - k
                if not 0 <= row < d:
                    continue
                tm = J.twoJ - 2 * col
                cg = clebsch_gordan(J, Fraction(tm, 2), L, k, J, Fraction(tm + 2 * k, 2))
                ops[idx, row, col] = scale * cg
    ops.setflags(write=False)
    logger.debug("built tensor basis for J=%s (%d operators)", J, len(ops))
    return TensorBasis(J=J, ops=ops)


@dataclass(frozen=True)
class CommutatorReport:
    jz_residual: float
    jplus_residual: float
    jminus_residual: float

    @property
    def max_residual(self) -> float:
        return max(self.jz_residual, self.jplus_residual, self.jminus_residual)


def commutator_check(basis: TensorBasis, ops: SpinOperators) -> CommutatorReport:
    """Frobenius residuals of [J_z, T] = kT and [J_+-, T_{L,k}] = c T_{L,k+-1}."""
    if basis.J != ops.J:
        raise DimensionMismatchError(f"basis J={basis.J} but operators J={ops.J}")

    worst = {"z": 0.0, "+": 0.0, "-": 0.0}
    for (L, k), T in basis:
        jz_comm = ops.jz @ T - T @ ops.jz - k * T
        worst["z"] = max(worst["z"], float(np.linalg.norm(jz_comm)))

        for sign, ladder in (("+", ops.jplus), ("-", ops.jminus)):
            step = 1 if sign == "+" else -1
            coeff = math.sqrt(max((L - step * k) * (L + step * k + 1), 0))
            target = basis.op(L, k + step) if abs(k + step) <= L else np.zeros_like(T)
            resid = ladder @ T - T @ ladder - coeff * target
            worst[sign] = max(worst[sign], float(np.linalg.norm(resid)))

    return CommutatorReport(worst["z"], worst["+"], worst["-"])


# ----------------------------------------------------------------------
# States and moments
# ----------------------------------------------------------------------

def _infer_J(dim: int) -> HalfInt:
    if dim < 1:
        raise DimensionMismatchError("empty matrix")
    return HalfInt(dim - 1)


@dataclass(frozen=True)
class DensityMatrix:
    """(2J+1)x(2J+1) matrix in the m-descending basis.

    Construction does not validate; use `from_array(..., validate=True)` or
    `validate()` when the density-matrix invariants must hold.
    """

    J: HalfInt
    mat: np.ndarray

    def __post_init__(self) -> None:
        mat = np.array(self.mat, dtype=complex)
        if mat.shape != (self.J.dim, self.J.dim):
            raise DimensionMismatchError(
                f"matrix shape {mat.shape} does not match J={self.J} (d={self.J.dim})"
            )
        mat.setflags(write=False)
        object.__setattr__(self, "mat", mat)

    @classmethod
    def from_array(
        cls,
        mat: np.ndarray,
        J: Optional[HalfInt] = None,
        validate: bool = True,
    ) -> "DensityMatrix":
        mat = np.asarray(mat, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise DimensionMismatchError(f"expected a square matrix, got {mat.shape}")
        rho = cls(J=J if J is not None else _infer_J(mat.shape[0]), mat=mat)
        return rho.validate() if validate else rho

    @classmethod
    def from_pure(cls, psi: np.ndarray, J: Optional[HalfInt] = None) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls.from_array(np.outer(psi, psi.conj()), J=J)

    @classmethod
    def maximally_mixed(cls, J: HalfInt) -> "DensityMatrix":
        return cls(J=J, mat=np.eye(J.dim) / J.dim)

    @property
    def hermiticity_gap(self) -> float:
        return float(np.max(np.abs(self.mat - self.mat.conj().T)))

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.mat))

    @property
    def min_eigenvalue(self) -> float:
        herm = (self.mat + self.mat.conj().T) / 2
        return float(np.linalg.eigvalsh(herm)[0])

    @property
    def purity(self) -> float:
        return float(np.real(np.trace(self.mat @ self.mat)))

    def violations(self, atol: Optional[float] = None, eig_floor: float = -1e-10) -> List[str]:
        atol = algebra_tolerance(self.J) if atol is None else atol
        problems: List[str] = []
        if self.hermiticity_gap > atol:
            problems.append(f"not Hermitian (gap {self.hermiticity_gap:.2e})")
        if abs(self.trace - 1) > atol:
            problems.append(f"trace {self.trace:.12g} != 1")
        if not problems and self.min_eigenvalue < eig_floor:
            problems.append(f"negative eigenvalue {self.min_eigenvalue:.2e}")
        return problems

    def validate(self, atol: Optional[float] = None, eig_floor: float = -1e-10) -> "DensityMatrix":
        problems = self.violations(atol=atol, eig_floor=eig_floor)
        if problems:
            raise InvalidStateError("; ".join(problems))
        return self


@dataclass(frozen=True)
class MomentVector:
    """Coefficients rho_{L,k} = tr(T_{L,k}^dagger rho), stored flat."""

    J: HalfInt
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        coeffs = np.array(self.coeffs, dtype=complex).reshape(-1)
        if coeffs.shape != (self.J.n_moments,):
            raise DimensionMismatchError(
                f"{coeffs.size} moments do not match J={self.J} ({self.J.n_moments} expected)"
            )
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    def __getitem__(self, label: Tuple[int, int]) -> complex:
        L, k = label
        if not (0 <= L <= self.J.twoJ and -L <= k <= L):
            raise IndexError(f"(L, k) = ({L}, {k}) outside the spin-{self.J} moments")
        return complex(self.coeffs[moment_index(L, k)])

    def items(self) -> Iterator[Tuple[Tuple[int, int], complex]]:
        for label, value in zip(moment_labels(self.J), self.coeffs):
            yield label, complex(value)

    def scaled(self, factors: np.ndarray) -> "MomentVector":
        """Multiply each rank-L block by factors[L]."""
        per_moment = np.repeat(np.asarray(factors), [2 * L + 1 for L in range(self.J.twoJ + 1)])
        return MomentVector(J=self.J, coeffs=self.coeffs * per_moment)

    @property
    def hermiticity_gap(self) -> float:
        """max |rho_{L,-k} - (-1)^k conj(rho_{L,k})|."""
        gap = 0.0
        for L in range(self.J.twoJ + 1):
            for k in range(0, L + 1):
                lhs = self.coeffs[moment_index(L, -k)]
                rhs = (-1) ** k * np.conj(self.coeffs[moment_index(L, k)])
                gap = max(gap, float(abs(lhs - rhs)))
        return gap


def _matrix_of(rho: Union[DensityMatrix, np.ndarray]) -> np.ndarray:
    return rho.mat if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)


def _J_of(rho: Union[DensityMatrix, np.ndarray]) -> HalfInt:
    return rho.J if isinstance(rho, DensityMatrix) else _infer_J(np.shape(rho)[0])


def expand(rho: Union[DensityMatrix, np.ndarray], basis: TensorBasis) -> MomentVector:
    """rho_{L,k} = tr(T_{L,k}^dagger rho) for every (L, k)."""
    J = _J_of(rho)
    if J != basis.J:
        raise DimensionMismatchError(f"state J={J} but basis J={basis.J}")
    mat = _matrix_of(rho)
    coeffs = np.einsum("aij,ij->a", basis.ops.conj(), mat)
    return MomentVector(J=J, coeffs=coeffs)


def reconstruct(m: MomentVector, basis: TensorBasis) -> DensityMatrix:
    """sum rho_{L,k} T_{L,k}; warns (NonHermitianWarning) when the image rule fails."""
    if m.J != basis.J:
        raise DimensionMismatchError(f"moments J={m.J} but basis J={basis.J}")
    gap = m.hermiticity_gap
    if gap > algebra_tolerance(m.J):
        logger.warning("moments violate the Hermiticity image rule (gap %.2e)", gap)
        warnings.warn(
            f"moments violate the Hermiticity image rule (gap {gap:.2e}); "
            "reconstructed matrix is not Hermitian",
            NonHermitianWarning,
            stacklevel=2,
        )
    mat = np.einsum("a,aij->ij", m.coeffs, basis.ops)
    return DensityMatrix(J=m.J, mat=mat)


# ----------------------------------------------------------------------
# State constructors used by tests and the CLI
# ----------------------------------------------------------------------

def basis_state(J: HalfInt, m: Number) -> np.ndarray:
    """|J, m> as a vector in the m-descending basis."""
    tm = twice(m)
    if abs(tm) > J.twoJ or (J.twoJ - tm) % 2:
        raise HalfIntegerError(f"m = {m} is not a projection of J = {J}")
    psi = np.zeros(J.dim, dtype=complex)
    psi[(J.twoJ - tm) // 2] = 1.0
    return psi


def cat_state(J: HalfInt) -> np.ndarray:
    """(|J, J> + |J, -J>)/sqrt(2); for J = 0 this is just |0, 0>."""
    psi = np.zeros(J.dim, dtype=complex)
    psi[0] += 1.0
    psi[-1] += 1.0
    return psi / np.linalg.norm(psi)


def random_density_matrix(
    J: HalfInt,
    rng: np.random.Generator,
    rank: Optional[int] = None,
) -> DensityMatrix:
    """Ginibre random state of the given rank (full rank by default)."""
    d = J.dim
    rank = d if rank is None else rank
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    mat = g @ g.conj().T
    mat = (mat + mat.conj().T) / 2
    return DensityMatrix.from_array(mat / np.trace(mat).real, J=J)


def rotation_operator(J: HalfInt, axis: Sequence[float], angle: float) -> np.ndarray:
    """exp(-i angle n.J) for a unit axis n, via eigendecomposition."""
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    ops = spin_matrices(J)
    gen = n[0] * ops.jx + n[1] * ops.jy + n[2] * ops.jz
    vals, vecs = np.linalg.eigh(gen)
    return (vecs * np.exp(-1j * angle * vals)) @ vecs.conj().T
