"""
Monte Carlo unraveling of the isotropic Lindblad flow by random unitary kicks.

Each step applies U = exp(-i sqrt(gamma dt) xi.J) with xi ~ N(0, 1)^3 drawn
independently; the ensemble average of U rho U^dagger reproduces the Lindblad
generator to first order in dt.

Trajectory i owns the RNG stream Philox(SeedSequence(seed, spawn_key=(i,))),
so results depend only on (seed, n_traj) and never on how the trajectories are
scheduled across worker threads.
"""

import logging
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from .errors import ConfigError, DimensionMismatchError, TimeStepWarning
from .su2_core import (
    DensityMatrix,
    HalfInt,
    MomentVector,
    SpinOperators,
    expand,
    moment_labels,
    reconstruct,
    spin_matrices,
    tensor_basis,
)

logger = logging.getLogger(__name__)

CHUNK_SIZE = 1024
RANK_CUTOFF = 1e-12


class KickConfig(BaseModel):
    gamma: float = Field(ge=0.0)
    dt: float = Field(gt=0.0)
    n_steps: int = Field(ge=1)
    n_traj: int = Field(ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)


def worker_count() -> int:
    """SPINPHASE_THREADS caps the pool; defaults to the CPU count."""
    raw = os.getenv("SPINPHASE_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            logger.warning("ignoring non-integer SPINPHASE_THREADS=%r", raw)
    return os.cpu_count() or 1


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(index,))))


# ----------------------------------------------------------------------
# Kicks
# ----------------------------------------------------------------------

def kick_unitaries(xi: np.ndarray, gamma: float, dt: float, ops: SpinOperators) -> np.ndarray:
    """exp(-i sqrt(gamma dt) xi.J) for a stack of noise vectors xi (..., 3)."""
    xi = np.asarray(xi, dtype=float)
    scale = np.sqrt(gamma * dt)
    gen = scale * (
        xi[..., 0, None, None] * ops.jx
        + xi[..., 1, None, None] * ops.jy
        + xi[..., 2, None, None] * ops.jz
    )
    vals, vecs = np.linalg.eigh(gen)
    return (vecs * np.exp(-1j * vals)[..., None, :]) @ np.swapaxes(vecs.conj(), -1, -2)


def kick_step(
    state: np.ndarray,
    gamma: float,
    dt: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """One random kick of a state vector (psi -> U psi) or a density matrix (rho -> U rho U^dagger)."""
    state = np.asarray(state, dtype=complex)
    J = HalfInt(state.shape[0] - 1)
    U = kick_unitaries(rng.standard_normal(3), gamma, dt, spin_matrices(J))
    if state.ndim == 1:
        return U @ state
    return U @ state @ U.conj().T


def truncated_kick(rho: np.ndarray, xi: np.ndarray, gamma: float, dt: float, ops: SpinOperators) -> np.ndarray:
    """Second-order expansion rho - i[G, rho] + G rho G - {G^2, rho}/2 with G = sqrt(gamma dt) xi.J."""
    xi = np.asarray(xi, dtype=float)
    G = np.sqrt(gamma * dt) * (xi[0] * ops.jx + xi[1] * ops.jy + xi[2] * ops.jz)
    G2 = G @ G
    return rho - 1j * (G @ rho - rho @ G) + G @ rho @ G - 0.5 * (G2 @ rho + rho @ G2)


# ----------------------------------------------------------------------
# Ensemble statistics
# ----------------------------------------------------------------------

@dataclass
class _Moments:
    """Running count / mean / sum of squared deviations (|.|^2 over re and im)."""

    count: int
    mean: np.ndarray
    m2: np.ndarray

    @classmethod
    def of(cls, samples: np.ndarray) -> "_Moments":
        mean = samples.mean(axis=0)
        return cls(samples.shape[0], mean, np.sum(np.abs(samples - mean) ** 2, axis=0))

    def merge(self, other: "_Moments") -> "_Moments":
        if self.count == 0:
            return other
        if other.count == 0:
            return self
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.count / n)
        m2 = self.m2 + other.m2 + np.abs(delta) ** 2 * (self.count * other.count / n)
        return _Moments(n, mean, m2)

    @property
    def variance(self) -> np.ndarray:
        return self.m2 / max(self.count - 1, 1)


@dataclass(frozen=True, eq=False)
class TrajectoryEnsemble:
    """
    Ensemble-mean moments at the recorded steps.

    `moments` and `stderr` have shape (n_records, n_moments); `states` holds the
    final state vector of every trajectory.
    """

    J: HalfInt
    config: KickConfig
    steps: np.ndarray
    moments: np.ndarray
    stderr: np.ndarray
    states: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.steps * self.config.dt

    def moments_at(self, record: int) -> MomentVector:
        return MomentVector(J=self.J, coeffs=self.moments[record])

    @property
    def mean(self) -> DensityMatrix:
        """Ensemble mean state at the last recorded step."""
        return reconstruct(self.moments_at(-1), tensor_basis(self.J))


def _pure_strata(rho0: DensityMatrix) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenvectors (rows) and weights of the non-negligible part of rho0."""
    herm = (rho0.mat + rho0.mat.conj().T) / 2
    vals, vecs = np.linalg.eigh(herm)
    keep = vals > RANK_CUTOFF
    weights = vals[keep]
    return vecs[:, keep].T, weights / weights.sum()


def _trajectory_moments(psi: np.ndarray, ops_conj: np.ndarray) -> np.ndarray:
    """psi^dagger T_{L,k}^dagger psi for a stack of states, shape (n, n_moments)."""
    return np.einsum("ni,aji,nj->na", psi.conj(), ops_conj, psi)


def _run_chunk(
    start: int,
    stop: int,
    starts: np.ndarray,
    cfg: KickConfig,
    record_steps: Sequence[int],
    J: HalfInt,
) -> Tuple[List[Dict[int, _Moments]], np.ndarray]:
    ops = spin_matrices(J)
    ops_conj = tensor_basis(J).ops.conj()
    n_strata = starts.shape[0]
    index = np.arange(start, stop)
    stratum = index % n_strata

    noise = np.stack([trajectory_rng(cfg.seed, int(i)).standard_normal((cfg.n_steps, 3)) for i in index])
    psi = starts[stratum].copy()
    wanted = set(record_steps)

    def record() -> Dict[int, _Moments]:
        values = _trajectory_moments(psi, ops_conj)
        return {int(e): _Moments.of(values[stratum == e]) for e in range(n_strata) if np.any(stratum == e)}

    records = []
    if 0 in wanted:
        records.append(record())
    for step in range(cfg.n_steps):
        U = kick_unitaries(noise[:, step], cfg.gamma, cfg.dt, ops)
        psi = np.einsum("nij,nj->ni", U, psi)
        if step + 1 in wanted:
            records.append(record())
    return records, psi


def run_ensemble(
    rho0: Union[DensityMatrix, np.ndarray],
    cfg: KickConfig,
    record_steps: Optional[Sequence[int]] = None,
    workers: Optional[int] = None,
) -> TrajectoryEnsemble:
    """
    Average n_traj kicked trajectories started from rho0.

    A mixed rho0 is stratified over its eigenvectors: trajectory i starts in
    eigenvector i mod r and strata are recombined with the eigenvalue weights.
    """
    if not isinstance(rho0, DensityMatrix):
        rho0 = DensityMatrix.from_array(rho0)
    J = rho0.J
    steps = sorted(set(record_steps if record_steps is not None else (0, cfg.n_steps)))
    if steps and (steps[0] < 0 or steps[-1] > cfg.n_steps):
        raise ConfigError(f"record steps must lie in [0, {cfg.n_steps}]")

    kick_strength = cfg.gamma * J.twoJ ** 2 * cfg.dt
    if kick_strength > 0.1:
        warnings.warn(
            f"gamma (2J)^2 dt = {kick_strength:.3g} exceeds 0.1; kicks are not small",
            TimeStepWarning,
            stacklevel=2,
        )

    starts, weights = _pure_strata(rho0)
    if cfg.n_traj < starts.shape[0]:
        raise ConfigError(f"n_traj={cfg.n_traj} is below the rank {starts.shape[0]} of the initial state")

    if cfg.gamma == 0.0:
        exact = expand(rho0, tensor_basis(J)).coeffs
        logger.info("gamma = 0: ensemble mean is the initial state")
        return TrajectoryEnsemble(
            J=J,
            config=cfg,
            steps=np.array(steps, dtype=int),
            moments=np.tile(exact, (len(steps), 1)),
            stderr=np.zeros((len(steps), J.n_moments)),
            states=starts[np.arange(cfg.n_traj) % starts.shape[0]],
        )

    bounds = [(s, min(s + CHUNK_SIZE, cfg.n_traj)) for s in range(0, cfg.n_traj, CHUNK_SIZE)]
    workers = min(workers or worker_count(), len(bounds))
    logger.info(
        "running %d trajectories x %d steps for J=%s on %d worker(s)",
        cfg.n_traj, cfg.n_steps, J, workers,
    )
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda b: _run_chunk(b[0], b[1], starts, cfg, steps, J), bounds))

    n_strata = starts.shape[0]
    empty = _Moments(0, np.zeros(J.n_moments, dtype=complex), np.zeros(J.n_moments))
    moments = np.zeros((len(steps), J.n_moments), dtype=complex)
    stderr = np.zeros((len(steps), J.n_moments))
    for r in range(len(steps)):
        per_stratum = [empty] * n_strata
        # chunk order is fixed, so the merge order is too
        for records, _ in results:
            for e, stats in records[r].items():
                per_stratum[e] = per_stratum[e].merge(stats)
        for e, stats in enumerate(per_stratum):
            moments[r] += weights[e] * stats.mean
            stderr[r] += weights[e] ** 2 * stats.variance / stats.count
    stderr = np.sqrt(stderr)

    states = np.concatenate([psi for _, psi in results], axis=0)
    return TrajectoryEnsemble(
        J=J,
        config=cfg,
        steps=np.array(steps, dtype=int),
        moments=moments,
        stderr=stderr,
        states=states,
    )


def time_series_rows(ensemble: TrajectoryEnsemble) -> List[Dict[str, float]]:
    """Rows for the `t, L, k, re_mean, im_mean, stderr` export."""
    rows = []
    labels = moment_labels(ensemble.J)
    for r, t in enumerate(ensemble.times):
        for a, (L, k) in enumerate(labels):
            value = ensemble.moments[r, a]
            rows.append(
                {
                    "t": float(t),
                    "L": L,
                    "k": k,
                    "re_mean": float(value.real),
                    "im_mean": float(value.imag),
                    "stderr": float(ensemble.stderr[r, a]),
                }
            )
    return rows


def check_states(ensemble: TrajectoryEnsemble) -> float:
    """Largest norm drift over the final trajectory states."""
    if ensemble.states.shape[1] != ensemble.J.dim:
        raise DimensionMismatchError("state vectors do not match J")
    return float(np.max(np.abs(np.linalg.norm(ensemble.states, axis=1) - 1.0)))
