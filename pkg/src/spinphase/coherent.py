"""
SU(2) coherent states, spherical grids/quadratures, the Husimi function and
the coherent-state expansion coefficients c_{L,k}.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, List, Tuple, Union

import numpy as np
from scipy.special import gammaln

from .errors import DimensionMismatchError, QuadratureDegreeError, ResolutionWarning
from .harmonics import spherical_harmonic
from .su2_core import DensityMatrix, HalfInt, _J_of, _matrix_of, tensor_basis

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class PhasePoint:
    theta: float
    phi: float

    def __post_init__(self) -> None:
        theta = float(self.theta)
        if not -1e-12 <= theta <= math.pi + 1e-12:
            raise ValueError(f"theta = {theta} outside [0, pi]")
        object.__setattr__(self, "theta", min(max(theta, 0.0), math.pi))
        object.__setattr__(self, "phi", float(self.phi) % TWO_PI)

    @property
    def z(self) -> complex:
        """tan(theta/2) e^{i phi}; infinite at the south pole."""
        if self.theta >= math.pi:
            return complex(math.inf, 0.0)
        return math.tan(self.theta / 2) * complex(math.cos(self.phi), math.sin(self.phi))

    @property
    def unit_vector(self) -> np.ndarray:
        st = math.sin(self.theta)
        return np.array([st * math.cos(self.phi), st * math.sin(self.phi), math.cos(self.theta)])


NORTH_POLE = PhasePoint(0.0, 0.0)


def geodesic_cosine(p1: PhasePoint, p2: PhasePoint) -> float:
    """cos(eta) = cos t cos t' + sin t sin t' cos(phi - phi')."""
    return float(
        math.cos(p1.theta) * math.cos(p2.theta)
        + math.sin(p1.theta) * math.sin(p2.theta) * math.cos(p1.phi - p2.phi)
    )


# ----------------------------------------------------------------------
# Grids and quadrature
# ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PhaseGrid:
    """Product grid theta x phi; sampled values have shape (n_theta, n_phi)."""

    theta: np.ndarray
    phi: np.ndarray

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.theta.size, self.phi.size)

    @property
    def size(self) -> int:
        return self.theta.size * self.phi.size

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.theta, self.phi, indexing="ij")

    def point(self, i: int, j: int) -> PhasePoint:
        return PhasePoint(float(self.theta[i]), float(self.phi[j]))

    def points(self) -> List[PhasePoint]:
        return [self.point(i, j) for i in range(self.theta.size) for j in range(self.phi.size)]


@dataclass(frozen=True, eq=False)
class SphericalQuadrature(PhaseGrid):
    """
    Gauss-Legendre (in cos theta) x trapezoid (in phi) rule.

    `weights` integrate against dmu0 and sum to 1; multiply by 2J+1 for dmu^J.
    Integrates every Y^k_L with L <= degree exactly.
    """

    theta_weights: np.ndarray = field(default_factory=lambda: np.ones(1))
    phi_weights: np.ndarray = field(default_factory=lambda: np.ones(1))
    degree: int = 0
    J: HalfInt = HalfInt(0)

    @property
    def weights(self) -> np.ndarray:
        return np.outer(self.theta_weights, self.phi_weights)

    @property
    def measure_weights(self) -> np.ndarray:
        """Weights for dmu^J (total mass 2J+1)."""
        return self.J.dim * self.weights

    @property
    def nodes(self) -> List[Tuple[PhasePoint, float]]:
        w = self.weights
        return [
            (self.point(i, j), float(w[i, j]))
            for i in range(self.theta.size)
            for j in range(self.phi.size)
        ]

    def integrate(self, values: np.ndarray) -> complex:
        """integral f dmu0 for f sampled on the nodes."""
        return complex(np.sum(self.weights * np.asarray(values)))

    def require_degree(self, needed: int, what: str) -> None:
        if self.degree < needed:
            raise QuadratureDegreeError(
                f"{what} needs quadrature degree >= {needed}, got {self.degree}"
            )


def build_quadrature(J: HalfInt, degree: int) -> SphericalQuadrature:
    """n_theta = ceil((degree+1)/2) Gauss nodes in cos theta, n_phi = degree+1 uniform."""
    if degree < 0:
        raise ValueError(f"degree must be >= 0, got {degree}")
    J = HalfInt.parse(J)
    n_theta = max(1, math.ceil((degree + 1) / 2))
    n_phi = degree + 1
    x, w = np.polynomial.legendre.leggauss(n_theta)
    # leggauss is ascending in x; flip so theta ascends from the north pole
    x, w = x[::-1], w[::-1]
    theta = np.arccos(x)
    phi = TWO_PI * np.arange(n_phi) / n_phi
    return SphericalQuadrature(
        theta=theta,
        phi=phi,
        theta_weights=w / 2.0,
        phi_weights=np.full(n_phi, 1.0 / n_phi),
        degree=degree,
        J=J,
    )


def default_quadrature(J: HalfInt) -> SphericalQuadrature:
    """Degree 4J + 2: exact for the POVM integrand with margin."""
    return build_quadrature(J, 2 * J.twoJ + 2)


def equiangular_grid(n_theta: int = 181, n_phi: int = 360) -> PhaseGrid:
    """Display grid including both poles; row 0 is theta = 0."""
    if n_theta < 2 or n_phi < 1:
        raise ValueError("equiangular grid needs n_theta >= 2 and n_phi >= 1")
    return PhaseGrid(
        theta=np.linspace(0.0, math.pi, n_theta),
        phi=TWO_PI * np.arange(n_phi) / n_phi,
    )


# ----------------------------------------------------------------------
# Coherent states
# ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CoherentState:
    J: HalfInt
    amplitudes: np.ndarray
    point: PhasePoint

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())


def coherent_amplitudes(J: HalfInt, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """
    Coherent-state components in half-angle form, shape theta.shape + (2J+1,).

    Row i (m = J - i) is sqrt(C(2J, i)) cos^{2J-i}(theta/2) sin^i(theta/2) e^{i i phi},
    which is regular at the south pole and real-positive on |J,J>.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    n = J.twoJ
    i = np.arange(n + 1)
    log_binom = 0.5 * (gammaln(n + 1) - gammaln(i + 1) - gammaln(n - i + 1))
    c = np.cos(theta / 2)[..., None]
    s = np.sin(theta / 2)[..., None]
    magnitude = np.exp(log_binom) * np.power(c, n - i) * np.power(s, i)
    return magnitude * np.exp(1j * phi[..., None] * i)


def coherent_state(J: HalfInt, p: PhasePoint) -> CoherentState:
    amps = coherent_amplitudes(J, np.array(p.theta), np.array(p.phi))
    return CoherentState(J=J, amplitudes=amps, point=p)


def coherent_states_on(J: HalfInt, grid: PhaseGrid) -> np.ndarray:
    """Amplitudes at every grid node, shape (n_theta, n_phi, 2J+1)."""
    th, ph = grid.mesh()
    return coherent_amplitudes(J, th, ph)


# ----------------------------------------------------------------------
# Husimi function and region probabilities
# ----------------------------------------------------------------------

def husimi(rho: Union[DensityMatrix, np.ndarray], p: PhasePoint) -> float:
    """<z|rho|z> at a phase-space point."""
    J = _J_of(rho)
    psi = coherent_state(J, p).amplitudes
    return float(np.real(psi.conj() @ _matrix_of(rho) @ psi))


def husimi_on(rho: Union[DensityMatrix, np.ndarray], grid: PhaseGrid) -> np.ndarray:
    J = _J_of(rho)
    amps = coherent_states_on(J, grid)
    return np.real(np.einsum("tpi,ij,tpj->tp", amps.conj(), _matrix_of(rho), amps))


def region_probability(
    rho: Union[DensityMatrix, np.ndarray],
    region: Callable[[PhasePoint], bool],
    quad: SphericalQuadrature,
) -> float:
    """P(z in A) = integral_A <z|rho|z> dmu^J, restricted to the quadrature nodes in A."""
    J = _J_of(rho)
    if J != quad.J:
        raise DimensionMismatchError(f"state J={J} but quadrature J={quad.J}")
    quad.require_degree(2 * J.twoJ, "region_probability")

    mask = np.array(
        [[bool(region(quad.point(i, j))) for j in range(quad.phi.size)] for i in range(quad.theta.size)]
    )
    if not mask.any():
        logger.warning("region contains no quadrature nodes; raise the quadrature degree")
        warnings.warn("region contains no quadrature nodes", ResolutionWarning, stacklevel=2)
        return 0.0
    density = husimi_on(rho, quad)
    return float(np.sum(quad.measure_weights[mask] * density[mask]))


# ----------------------------------------------------------------------
# Binomial ratios and the c_{L,k} coefficients
# ----------------------------------------------------------------------

def log_binomial_ratio(J: HalfInt, L: Union[int, np.ndarray]) -> np.ndarray:
    """log[C(2J, L) / C(2J+L+1, L)] via log-gamma."""
    n = J.twoJ
    L = np.asarray(L, dtype=float)
    return gammaln(n + 1) + gammaln(n + 2) - gammaln(n - L + 1) - gammaln(n + L + 2)


def binomial_ratio(J: HalfInt, L: Union[int, np.ndarray]) -> np.ndarray:
    """C(2J, L) / C(2J+L+1, L): the POVM eigenvalue on rank-L moments."""
    return np.exp(log_binomial_ratio(J, L))


def binomial_ratio_exact(J: HalfInt, L: int) -> Fraction:
    n = J.twoJ
    return Fraction(math.comb(n, L), math.comb(n + L + 1, L))


def binomial_ratios(J: HalfInt) -> np.ndarray:
    """Ratios for L = 0..2J; the exact rational path is used up to J = 15."""
    if J.twoJ <= 30:
        return np.array([float(binomial_ratio_exact(J, L)) for L in range(J.twoJ + 1)])
    return binomial_ratio(J, np.arange(J.twoJ + 1))


def ck_coefficient(J: HalfInt, L: int, k: int, p: PhasePoint) -> complex:
    """
    c_{L,k}(z) = <z|T_{L,k}^dagger|z> in closed form.

    With the m-descending amplitudes above the phase is e^{-ik phi}, so the
    harmonic enters conjugated.
    """
    if not (0 <= L <= J.twoJ and -L <= k <= L):
        raise IndexError(f"(L, k) = ({L}, {k}) outside the spin-{J} range")
    prefactor = math.sqrt(float(binomial_ratio_exact(J, L)) / J.dim)
    return complex(prefactor * np.conj(spherical_harmonic(L, k, p.theta, p.phi)))


def ck_coefficient_brute(J: HalfInt, L: int, k: int, p: PhasePoint) -> complex:
    """<z|T_{L,k}^dagger|z> by direct matrix element (oracle for ck_coefficient)."""
    psi = coherent_state(J, p).amplitudes
    T = tensor_basis(J).op(L, k)
    return complex(psi.conj() @ T.conj().T @ psi)
