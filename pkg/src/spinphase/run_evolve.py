import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .channels import (
    LindbladParams,
    check_positivity,
    decay_rates,
    lindblad_propagate_analytic,
    povm_iterate,
)
from .coherent import PhasePoint, coherent_state
from .errors import ConfigError
from .helpers import (
    read_state_snapshot,
    resolve_output_dir,
    tensor_table_payload,
    write_csv,
    write_json,
    write_state_snapshot,
)
from .models import InitialStateSpec, RunConfig
from .su2_core import (
    DensityMatrix,
    HalfInt,
    MomentVector,
    basis_state,
    cat_state,
    expand,
    moment_labels,
    random_density_matrix,
    reconstruct,
    tensor_basis,
)
from .unravel import KickConfig, run_ensemble

logger = logging.getLogger(__name__)

MOMENT_COLUMNS = ["t", "L", "k", "re", "im"]
RATE_COLUMNS = ["L", "gamma_lindblad", "gamma_povm"]


# ----------------------------------------------------------------------
# Shared plumbing for every command
# ----------------------------------------------------------------------

def spin_tag(J: HalfInt) -> str:
    """Filename-safe J: "1/2" -> "1_2"."""
    return str(J).replace("/", "_")


def prepare_initial_state(spec: InitialStateSpec, J: HalfInt) -> DensityMatrix:
    if spec.kind == "coherent":
        psi = coherent_state(J, PhasePoint(spec.theta, spec.phi)).amplitudes
        return DensityMatrix.from_pure(psi, J=J)
    if spec.kind == "cat":
        return DensityMatrix.from_pure(cat_state(J), J=J)
    if spec.kind == "basis":
        return DensityMatrix.from_pure(basis_state(J, spec.m), J=J)
    if spec.kind == "random":
        return random_density_matrix(J, np.random.default_rng(spec.seed))
    rho = read_state_snapshot(spec.path)
    if rho.J != J:
        raise ConfigError(f"state file {spec.path} holds J={rho.J}, run asks for J={J}")
    return rho


def require_rate(gamma: float, what: str) -> float:
    if not gamma > 0:
        raise ConfigError(f"{what} needs gamma > 0, got {gamma}")
    return gamma


def moment_rows(t: float, m: MomentVector) -> List[Dict[str, Any]]:
    return [
        {"t": t, "L": L, "k": k, "re": float(v.real), "im": float(v.imag)}
        for (L, k), v in m.items()
    ]


# ----------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------

def cmd_rates(J: HalfInt, gamma: float, output_dir: Optional[str] = None) -> Path:
    """Decay-rate table for both channels as CSV."""
    table = decay_rates(J, require_rate(gamma, "rates"))
    rows = [
        {"L": L, "gamma_lindblad": lind, "gamma_povm": povm}
        for L, lind, povm in table.rows()
    ]
    path = resolve_output_dir(output_dir) / f"rates_J{spin_tag(J)}.csv"
    return write_csv(path, RATE_COLUMNS, rows)


def evolve_moments(config: RunConfig, rho0: DensityMatrix) -> List[Tuple[float, MomentVector]]:
    """(time label, MomentVector) pairs for the configured model."""
    J = config.spin
    m0 = expand(rho0, tensor_basis(J))

    if config.model == "povm":
        return [(float(n), povm_iterate(m0, n)) for n in config.iterations]

    gamma = config.resolved_gamma()
    if config.model == "lindblad":
        params = LindbladParams(gamma=require_rate(gamma, "the lindblad model"), J=J)
        return [(t, lindblad_propagate_analytic(m0, t, params)) for t in config.times]

    steps = [int(round(t / config.dt)) for t in config.times]
    kick = KickConfig(
        gamma=gamma,
        dt=config.dt,
        n_steps=max(max(steps, default=0), 1),
        n_traj=config.n_traj,
        seed=config.seed,
    )
    ensemble = run_ensemble(rho0, kick, record_steps=steps)
    by_step = {int(s): r for r, s in enumerate(ensemble.steps)}
    return [(t, ensemble.moments_at(by_step[s])) for t, s in zip(config.times, steps)]


def cmd_evolve(config: RunConfig, snapshots: bool = False) -> Dict[str, Any]:
    """
    Moment time series for one model.

    Writes `t, L, k, re, im` rows (for the POVM model t is the iteration count)
    and, with snapshots=True, one state JSON per sample.
    """
    J = config.spin
    rho0 = prepare_initial_state(config.initial_state, J)
    series = evolve_moments(config, rho0)

    out_dir = resolve_output_dir(config.output_dir)
    rows: List[Dict[str, Any]] = []
    for t, m in series:
        rows.extend(moment_rows(t, m))
    csv_path = write_csv(out_dir / f"evolve_{config.model}_J{spin_tag(J)}.csv", MOMENT_COLUMNS, rows)

    written = {"moments": csv_path, "snapshots": []}
    basis = tensor_basis(J)
    for t, m in series:
        state = check_positivity(reconstruct(m, basis), f"{config.model} state at t={t:g}")
        if snapshots:
            name = f"state_{config.model}_J{spin_tag(J)}_t{t:g}.json"
            written["snapshots"].append(write_state_snapshot(out_dir / name, state))
    return written


def cmd_tensor_table(J: HalfInt, output_dir: Optional[str] = None) -> Path:
    path = resolve_output_dir(output_dir) / f"tensor_table_J{spin_tag(J)}.json"
    logger.info("tabulating %d tensor operators for J=%s", len(moment_labels(J)), J)
    return write_json(path, tensor_table_payload(J))
