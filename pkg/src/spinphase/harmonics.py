"""
Spherical harmonics in the unit-probability convention (Y^0_0 = 1).

Y^k_L = sqrt(4 pi) * (Condon-Shortley Y), so that
    integral Y^k_L conj(Y^k'_L') dmu0 = delta_LL' delta_kk'
with dmu0 = sin(theta) dtheta dphi / (4 pi).

Associated Legendre functions use the upward recurrence in L at fixed k,
seeded at L = k from the double-factorial closed form in log space.
"""

from typing import TYPE_CHECKING, Union

import numpy as np
from scipy.special import gammaln

from .su2_core import moment_index

if TYPE_CHECKING:
    from .coherent import SphericalQuadrature

ArrayLike = Union[float, np.ndarray]


def n_coeffs(lmax: int) -> int:
    return (lmax + 1) ** 2


def degree_orders(lmax: int) -> np.ndarray:
    """k for every flat index up to lmax."""
    return np.array([k for L in range(lmax + 1) for k in range(-L, L + 1)], dtype=int)


def degree_ranks(lmax: int) -> np.ndarray:
    """L for every flat index up to lmax."""
    return np.repeat(np.arange(lmax + 1), [2 * L + 1 for L in range(lmax + 1)])


def legendre_table(lmax: int, x: ArrayLike) -> np.ndarray:
    """
    Normalized associated Legendre functions Q[..., L, k] for 0 <= k <= L <= lmax,
    with (1/2) integral_{-1}^{1} Q_{L,k}^2 dx = 1 and no Condon-Shortley phase.
    """
    x = np.asarray(x, dtype=float)
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    with np.errstate(divide="ignore"):
        log_s = np.log(s)

    Q = np.zeros(x.shape + (lmax + 1, lmax + 1))
    for k in range(lmax + 1):
        if k == 0:
            q_kk = np.ones_like(x)
        else:
            log_norm = (
                0.5 * np.log(2 * k + 1)
                + 0.5 * gammaln(2 * k + 1)
                - k * np.log(2.0)
                - gammaln(k + 1)
            )
            q_kk = np.exp(log_norm + k * log_s)
        Q[..., k, k] = q_kk
        if k + 1 > lmax:
            continue
        Q[..., k + 1, k] = np.sqrt(2 * k + 3) * x * q_kk
        for L in range(k + 2, lmax + 1):
            a = np.sqrt((2 * L + 1) * (2 * L - 1) / ((L - k) * (L + k)))
            b = np.sqrt(
                (2 * L + 1) * (L + k - 1) * (L - k - 1) / ((2 * L - 3) * (L - k) * (L + k))
            )
            Q[..., L, k] = a * x * Q[..., L - 1, k] - b * Q[..., L - 2, k]
    return Q


def theta_table(lmax: int, theta: ArrayLike) -> np.ndarray:
    """Real polar factors, Y^k_L(theta, phi) = out[..., index(L, k)] * exp(i k phi)."""
    theta = np.asarray(theta, dtype=float)
    Q = legendre_table(lmax, np.cos(theta))
    out = np.zeros(theta.shape + (n_coeffs(lmax),))
    for L in range(lmax + 1):
        for k in range(L + 1):
            out[..., moment_index(L, k)] = (-1) ** k * Q[..., L, k]
            out[..., moment_index(L, -k)] = Q[..., L, k]
    return out


def spherical_harmonic(L: int, k: int, theta: ArrayLike, phi: ArrayLike) -> np.ndarray:
    """Y^k_L(theta, phi) with Y^0_0 = 1; scalar in, complex scalar out."""
    if L < 0 or abs(k) > L:
        raise IndexError(f"(L, k) = ({L}, {k}) is not a valid harmonic index")
    polar = theta_table(L, theta)[..., moment_index(L, k)]
    value = polar * np.exp(1j * k * np.asarray(phi, dtype=float))
    return value[()] if np.ndim(value) == 0 else value


def harmonic_matrix(lmax: int, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """All Y^k_L up to lmax at scattered points: shape (..., (lmax+1)^2)."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    polar = theta_table(lmax, theta)
    ks = degree_orders(lmax)
    return polar * np.exp(1j * phi[..., None] * ks)


def synthesize(
    coeffs: np.ndarray,
    lmax: int,
    theta: np.ndarray,
    phi: np.ndarray,
    conjugate: bool = False,
) -> np.ndarray:
    """
    sum_{L,k} c_{L,k} Y^k_L on the product grid theta x phi (shape (n_theta, n_phi)).

    With conjugate=True the harmonics enter conjugated.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    polar = theta_table(lmax, theta)
    ks = degree_orders(lmax)
    onehot = np.zeros((ks.size, 2 * lmax + 1))
    onehot[np.arange(ks.size), ks + lmax] = 1.0
    per_order = (polar * coeffs) @ onehot
    sign = -1.0 if conjugate else 1.0
    phases = np.exp(sign * 1j * np.outer(np.arange(-lmax, lmax + 1), phi))
    return per_order @ phases


def analyze(values: np.ndarray, quad: "SphericalQuadrature", lmax: int) -> np.ndarray:
    """integral F conj(Y^k_L) dmu0 on the quadrature; exact when deg F + lmax <= quad.degree."""
    values = np.asarray(values, dtype=complex)
    polar = theta_table(lmax, quad.theta)
    ks = degree_orders(lmax)
    orders = np.arange(-lmax, lmax + 1)
    phases = np.exp(-1j * np.outer(quad.phi, orders))
    per_order = (values * quad.phi_weights) @ phases
    weighted = polar * quad.theta_weights[:, None]
    return np.einsum("ta,ta->a", weighted, per_order[:, ks + lmax])


def legendre_polynomials(lmax: int, x: ArrayLike) -> np.ndarray:
    """P_0..P_lmax by Bonnet's recurrence; shape (lmax+1,) + x.shape."""
    x = np.asarray(x, dtype=float)
    out = np.empty((lmax + 1,) + x.shape)
    out[0] = 1.0
    if lmax >= 1:
        out[1] = x
    for n in range(1, lmax):
        out[n + 1] = ((2 * n + 1) * x * out[n] - n * out[n - 1]) / (n + 1)
    return out


def zonal_harmonic(L: int, x: ArrayLike) -> np.ndarray:
    """P_L(x), normalized so P_L(1) = 1."""
    if L < 0:
        raise IndexError(f"L = {L} must be non-negative")
    value = legendre_polynomials(L, x)[L]
    return value[()] if np.ndim(value) == 0 else value
