"""
Stratonovich-Weyl quasidistributions F^sigma on the sphere and their flow.

A QuasiDist keeps its spectral coefficients g_{L,k} = r_L^{-sigma/2} rho_{L,k}
(r_L the POVM binomial ratio) and optionally its values on a grid; the
function itself is F = a_J sum g_{L,k} Y^k_L with a_J = (2J+1)^{-1/2}.

Under the Lindblad flow every F^sigma obeys dF/dt = (gamma/2) Lap F, and one
POVM iteration lowers sigma by 2.
"""

import logging
import math
import warnings
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from scipy.special import gammaln

from .coherent import (
    PhaseGrid,
    PhasePoint,
    SphericalQuadrature,
    binomial_ratios,
    equiangular_grid,
)
from .errors import DimensionMismatchError, ResolutionWarning, TimeStepWarning
from .harmonics import (
    analyze,
    degree_ranks,
    harmonic_matrix,
    synthesize,
)
from .harmonics import spherical_harmonic as _harmonic
from .harmonics import zonal_harmonic  # noqa: F401  (re-exported)
from .su2_core import (
    DensityMatrix,
    HalfInt,
    _J_of,
    _matrix_of,
    expand,
    moment_index,
    tensor_basis,
)

logger = logging.getLogger(__name__)

POSITIVITY_THRESHOLD = -1e-9
REFINEMENT_TOLERANCE = 1e-6

_ALIASES = {"q": -1.0, "husimi": -1.0, "w": 0.0, "wigner": 0.0, "p": 1.0, "glauber": 1.0}


@dataclass(frozen=True)
class SigmaIndex:
    """Ordering parameter: -1 Husimi Q, 0 Wigner W, +1 Glauber-Sudarshan P."""

    sigma: float

    def __post_init__(self) -> None:
        value = float(self.sigma)
        if not math.isfinite(value):
            raise ValueError(f"sigma must be finite, got {self.sigma}")
        object.__setattr__(self, "sigma", value)

    @classmethod
    def parse(cls, value: Union["SigmaIndex", float, int, str]) -> "SigmaIndex":
        if isinstance(value, SigmaIndex):
            return value
        if isinstance(value, str):
            key = value.strip().lower()
            if key in _ALIASES:
                return cls(_ALIASES[key])
            try:
                return cls(float(key))
            except ValueError:
                raise ValueError(f"unknown sigma {value!r}; use a number or q/w/p") from None
        return cls(float(value))

    @property
    def name(self) -> str:
        return {-1.0: "husimi", 0.0: "wigner", 1.0: "glauber"}.get(self.sigma, f"sigma={self.sigma:g}")

    def __float__(self) -> float:
        return self.sigma


SigmaLike = Union[SigmaIndex, float, int, str]


def _rank_weights(J: HalfInt, sigma: float) -> np.ndarray:
    """r_L^{-sigma/2} for L = 0..2J."""
    return binomial_ratios(J) ** (-0.5 * sigma)


def _per_moment(J: HalfInt, per_rank: np.ndarray) -> np.ndarray:
    return np.asarray(per_rank)[degree_ranks(J.twoJ)]


def spherical_harmonic(L: int, k: int, p: PhasePoint) -> complex:
    return complex(_harmonic(L, k, p.theta, p.phi))


# ----------------------------------------------------------------------
# Quasidistributions
# ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class QuasiDist:
    J: HalfInt
    sigma: SigmaIndex
    spectral: np.ndarray
    grid: Optional[PhaseGrid] = None
    values: Optional[np.ndarray] = None
    time_label: float = 0.0

    def __post_init__(self) -> None:
        g = np.array(self.spectral, dtype=complex).reshape(-1)
        if g.size != self.J.n_moments:
            raise DimensionMismatchError(
                f"{g.size} coefficients do not match J={self.J} ({self.J.n_moments} expected)"
            )
        object.__setattr__(self, "spectral", g)

    @property
    def a_J(self) -> float:
        return 1.0 / math.sqrt(self.J.dim)

    def coefficient(self, L: int, k: int) -> complex:
        if not (0 <= L <= self.J.twoJ and -L <= k <= L):
            raise IndexError(f"(L, k) = ({L}, {k}) outside the spin-{self.J} range")
        return complex(self.spectral[moment_index(L, k)])

    @property
    def reality_gap(self) -> float:
        """max |g_{L,-k} - (-1)^k conj(g_{L,k})|; zero iff F is real."""
        gap = 0.0
        for L in range(self.J.twoJ + 1):
            for k in range(L + 1):
                lhs = self.spectral[moment_index(L, -k)]
                rhs = (-1) ** k * np.conj(self.spectral[moment_index(L, k)])
                gap = max(gap, float(abs(lhs - rhs)))
        return gap

    @property
    def normalization(self) -> complex:
        """integral F dmu^J."""
        return complex(math.sqrt(self.J.dim) * self.spectral[0])

    def evaluate(self, grid: PhaseGrid) -> np.ndarray:
        """Complex values on a product grid, shape (n_theta, n_phi)."""
        return self.a_J * synthesize(self.spectral, self.J.twoJ, grid.theta, grid.phi)

    def at(self, p: PhasePoint) -> float:
        return float(np.real(self.evaluate(PhaseGrid(np.array([p.theta]), np.array([p.phi])))[0, 0]))

    def with_grid(self, grid: PhaseGrid) -> "QuasiDist":
        return replace(self, grid=grid, values=self.evaluate(grid))

    def _respectral(self, spectral: np.ndarray, **changes) -> "QuasiDist":
        out = replace(self, spectral=spectral, values=None, **changes)
        return out.with_grid(out.grid) if out.grid is not None else out

    def records(self) -> List[Dict[str, float]]:
        """Spectral coefficients as {"L", "k", "re", "im"} rows."""
        rows = []
        for L in range(self.J.twoJ + 1):
            for k in range(-L, L + 1):
                g = self.spectral[moment_index(L, k)]
                rows.append({"L": L, "k": k, "re": float(g.real), "im": float(g.imag)})
        return rows


@dataclass(frozen=True)
class SWKernel:
    """w^sigma(p) = a_J sum r_L^{-sigma/2} conj(Y^k_L(p)) T_{L,k}; at sigma = -1 this is |z><z|."""

    J: HalfInt
    sigma: SigmaIndex

    def __call__(self, p: PhasePoint) -> np.ndarray:
        basis = tensor_basis(self.J)
        ys = harmonic_matrix(self.J.twoJ, np.array(p.theta), np.array(p.phi))
        coeffs = np.conj(ys) * _per_moment(self.J, _rank_weights(self.J, self.sigma.sigma))
        return np.einsum("a,aij->ij", coeffs, basis.ops) / math.sqrt(self.J.dim)


def sw_kernel_matrix(J: HalfInt, sigma: SigmaLike, p: PhasePoint) -> np.ndarray:
    return SWKernel(J=J, sigma=SigmaIndex.parse(sigma))(p)


def quasidistribution(
    rho: Union[DensityMatrix, np.ndarray],
    sigma: SigmaLike,
    grid: Optional[PhaseGrid] = None,
    time_label: float = 0.0,
) -> QuasiDist:
    """
    F^sigma of rho. Spectral coefficients come from the moment expansion;
    grid values come independently from tr(rho w^sigma) at the nodes.
    """
    J = _J_of(rho)
    sigma = SigmaIndex.parse(sigma)
    basis = tensor_basis(J)
    weights = _per_moment(J, _rank_weights(J, sigma.sigma))
    g = expand(rho, basis).coeffs * weights

    values = None
    if grid is not None:
        traces = np.einsum("aij,ji->a", basis.ops, _matrix_of(rho))
        values = synthesize(traces * weights, J.twoJ, grid.theta, grid.phi, conjugate=True) / math.sqrt(J.dim)
    return QuasiDist(J=J, sigma=sigma, spectral=g, grid=grid, values=values, time_label=time_label)


# ----------------------------------------------------------------------
# Heat flow
# ----------------------------------------------------------------------

def _heat_factors(J: HalfInt, t: float, gamma: float) -> np.ndarray:
    L = np.arange(J.twoJ + 1)
    return np.exp(-0.5 * gamma * L * (L + 1) * t)


def heat_propagate_spectral(F: QuasiDist, t: float, gamma: float) -> QuasiDist:
    """g_{L,k} <- exp(-(gamma/2) L(L+1) t) g_{L,k}."""
    if t < 0:
        raise ValueError(f"propagation time must be >= 0, got {t}")
    damped = F.spectral * _per_moment(F.J, _heat_factors(F.J, t, gamma))
    return F._respectral(damped, time_label=F.time_label + t)


def project_grid(values: np.ndarray, quad: SphericalQuadrature, J: HalfInt) -> np.ndarray:
    """Grid samples of F -> g_{L,k}; exact when quad.degree >= 4J."""
    quad.require_degree(2 * J.twoJ, "project_grid")
    values = np.asarray(values, dtype=complex)
    # g = (1/a_J) integral F conj(Y) dmu0
    return math.sqrt(J.dim) * analyze(values, quad, J.twoJ)


def _node_harmonics(J: HalfInt, quad: SphericalQuadrature) -> np.ndarray:
    """Y^k_L at every quadrature node, shape (n_nodes, n_moments)."""
    th, ph = quad.mesh()
    return harmonic_matrix(J.twoJ, th.reshape(-1), ph.reshape(-1))


def heat_kernel(J: HalfInt, t: float, gamma: float, quad: SphericalQuadrature) -> np.ndarray:
    """
    K[p, p'] = sum_L exp(-(gamma/2) L(L+1) t) (2L+1) P_L(cos eta) between quadrature nodes.

    Assembled as Y diag(h) Y^H through the addition theorem
    sum_k Y^k_L(p) conj(Y^k_L(p')) = (2L+1) P_L(cos eta).
    """
    Y = _node_harmonics(J, quad)
    h = _per_moment(J, _heat_factors(J, t, gamma))
    return np.real((Y * h) @ Y.conj().T)


def heat_propagate_kernel(F: QuasiDist, t: float, gamma: float, quad: SphericalQuadrature) -> QuasiDist:
    """
    Zonal-kernel form: F(p, t) = integral K_t(p, p') F(p', 0) dmu0(p') on the quadrature.

    The kernel is applied in its factored form and never materialized, so
    memory stays at n_nodes x n_moments.
    """
    if t < 0:
        raise ValueError(f"propagation time must be >= 0, got {t}")
    if quad.J != F.J:
        raise DimensionMismatchError(f"distribution J={F.J} but quadrature J={quad.J}")
    quad.require_degree(2 * F.J.twoJ, "heat_propagate_kernel")

    values = F.values if (F.grid is quad and F.values is not None) else F.evaluate(quad)
    Y = _node_harmonics(F.J, quad)
    h = _per_moment(F.J, _heat_factors(F.J, t, gamma))
    weighted = quad.weights.reshape(-1) * values.reshape(-1)
    out = ((Y * h) @ (Y.conj().T @ weighted)).reshape(quad.shape)
    return QuasiDist(
        J=F.J,
        sigma=F.sigma,
        spectral=project_grid(out, quad, F.J),
        grid=quad,
        values=out,
        time_label=F.time_label + t,
    )


def laplace_beltrami(F: QuasiDist) -> QuasiDist:
    """Spectral Laplacian on the unit sphere: g_{L,k} <- -L(L+1) g_{L,k}."""
    L = degree_ranks(F.J.twoJ)
    return F._respectral(-(L * (L + 1)) * F.spectral)


def heat_residual(path: Sequence[QuasiDist], gamma: float) -> float:
    """
    max |dF/dt - (gamma/2) Lap F| at the middle of three equally spaced samples.

    dF/dt is the central difference of the grid values; Lap F is spectral.
    """
    if len(path) != 3:
        raise ValueError("heat_residual needs samples at t - dt, t, t + dt")
    before, middle, after = path
    if any(F.grid is None or F.values is None for F in path):
        raise ValueError("every sample needs grid values")
    dt_back = middle.time_label - before.time_label
    dt_fwd = after.time_label - middle.time_label
    if not (dt_back > 0 and math.isclose(dt_back, dt_fwd, rel_tol=1e-6)):
        raise ValueError("samples must be equally spaced in time")

    L_max = middle.J.twoJ
    stiffest = 0.5 * gamma * L_max * (L_max + 1)
    if dt_fwd * stiffest > 0.05:
        warnings.warn(
            f"time step {dt_fwd:.3g} is coarse for rate {stiffest:.3g}; residual is O(dt^2) dominated",
            TimeStepWarning,
            stacklevel=2,
        )

    dFdt = (after.values - before.values) / (2.0 * dt_fwd)
    lap = laplace_beltrami(middle).evaluate(middle.grid)
    return float(np.max(np.abs(dFdt - 0.5 * gamma * lap)))


# ----------------------------------------------------------------------
# POVM sigma shift and positivity
# ----------------------------------------------------------------------

def povm_sigma_shift(F: QuasiDist, n: int) -> QuasiDist:
    """F^sigma after n POVM iterations, relabelled as F^{sigma-2n} of the original state."""
    if n < 0:
        raise ValueError(f"iteration count must be >= 0, got {n}")
    scaled = F.spectral * _per_moment(F.J, binomial_ratios(F.J) ** n)
    return F._respectral(scaled, sigma=SigmaIndex(F.sigma.sigma - 2 * n))


def refine_grid(grid: PhaseGrid) -> PhaseGrid:
    """Insert midpoints in theta and in (periodic) phi."""
    theta = np.sort(np.concatenate([grid.theta, 0.5 * (grid.theta[1:] + grid.theta[:-1])]))
    phi_next = np.append(grid.phi[1:], grid.phi[0] + 2 * math.pi)
    phi = np.sort(np.concatenate([grid.phi, 0.5 * (grid.phi + phi_next)]) % (2 * math.pi))
    return PhaseGrid(theta=theta, phi=phi)


@dataclass(frozen=True)
class PositivityScan:
    minimum: float
    argmin: PhasePoint
    refinement_delta: float


def positivity_scan(F: QuasiDist, grid: Optional[PhaseGrid] = None) -> PositivityScan:
    """Minimum of F over a grid plus the change seen on the midpoint-refined grid."""
    grid = grid or F.grid or equiangular_grid()
    values = np.real(F.evaluate(grid))
    i, j = np.unravel_index(int(np.argmin(values)), values.shape)
    minimum = float(values[i, j])
    fine_min = float(np.min(np.real(F.evaluate(refine_grid(grid)))))
    delta = abs(fine_min - minimum)
    if delta > REFINEMENT_TOLERANCE:
        logger.warning("scan minimum moved by %.2e under refinement", delta)
        warnings.warn(
            f"grid too coarse: refinement moved the minimum by {delta:.2e}",
            ResolutionWarning,
            stacklevel=2,
        )
    return PositivityScan(minimum=minimum, argmin=grid.point(i, j), refinement_delta=delta)


def positivity_iterations(sigma: SigmaLike) -> int:
    """ceil((sigma+1)/2) POVM iterations, floored at 0."""
    s = SigmaIndex.parse(sigma).sigma
    return max(0, math.ceil((s + 1) / 2 - 1e-12))


@dataclass(frozen=True)
class PositivityTime:
    t_star: float
    kind: str
    asymptotic: Optional[float] = None


def positivity_time(J: HalfInt, sigma: SigmaLike, gamma: float) -> PositivityTime:
    if not gamma > 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    s = SigmaIndex.parse(sigma).sigma
    if J.twoJ == 0:
        return PositivityTime(t_star=0.0, kind="exact")
    if J.twoJ == 1:
        return PositivityTime(t_star=math.log(3.0) / gamma * positivity_iterations(s), kind="exact")

    j = J.value
    log_binom = gammaln(4 * j + 2) - gammaln(2 * j + 1) - gammaln(2 * j + 2)
    bound = max(0.0, (s + 1) / (2 * gamma * j * (2 * j + 1)) * float(log_binom))
    asymptotic = None
    if j >= 10:
        asymptotic = max(
            0.0, (s + 1) / (4 * gamma * j * j) * (4 * j * math.log(2.0) - 0.5 * math.log(2 * math.pi * j))
        )
    return PositivityTime(t_star=bound, kind="bound", asymptotic=asymptotic)


def damped_kernel_positive(J: HalfInt, sigma: SigmaLike, gamma: float, t: float) -> bool:
    """exp(-(gamma/2) L(L+1) t) r_L^{-sigma/2} <= r_L^{1/2} for every L."""
    s = SigmaIndex.parse(sigma).sigma
    r = binomial_ratios(J)
    lhs = _heat_factors(J, t, gamma) * r ** (-0.5 * s)
    return bool(np.all(lhs <= np.sqrt(r) * (1 + 1e-12)))


def _is_positive(F: QuasiDist, grid: PhaseGrid) -> bool:
    return float(np.min(np.real(F.evaluate(grid)))) >= POSITIVITY_THRESHOLD


def first_positive_time(
    F: QuasiDist,
    gamma: float,
    grid: Optional[PhaseGrid] = None,
    rel_tol: float = 1e-3,
    t_guess: Optional[float] = None,
    max_doublings: int = 60,
) -> Optional[float]:
    """Bisection for the first Lindblad time at which the grid minimum reaches -1e-9."""
    grid = grid or equiangular_grid()
    if _is_positive(F, grid):
        return 0.0
    if not gamma > 0:
        return None

    lo, hi = 0.0, t_guess if t_guess and t_guess > 0 else 1.0 / gamma
    for _ in range(max_doublings):
        if _is_positive(heat_propagate_spectral(F, hi, gamma), grid):
            break
        lo, hi = hi, 2.0 * hi
    else:
        logger.warning("distribution never became positive up to t = %.3g", hi)
        return None

    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if _is_positive(heat_propagate_spectral(F, mid, gamma), grid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def first_positive_iteration(
    F: QuasiDist,
    grid: Optional[PhaseGrid] = None,
    max_iterations: int = 100,
) -> Optional[int]:
    """Smallest n with the POVM-iterated distribution nonnegative on the grid."""
    grid = grid or equiangular_grid()
    for n in range(max_iterations + 1):
        if _is_positive(povm_sigma_shift(F, n), grid):
            return n
    return None
