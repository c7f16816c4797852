import logging
import warnings
from pathlib import Path
from typing import Any, Dict, List, Tuple

import numpy as np

from .channels import povm_iterate_state
from .coherent import equiangular_grid
from .errors import ResolutionWarning
from .helpers import grid_rows, resolve_output_dir, spectral_payload, write_csv, write_json, write_ppm
from .models import PositivityReport, RunConfig
from .phasespace import (
    QuasiDist,
    SigmaIndex,
    damped_kernel_positive,
    first_positive_iteration,
    first_positive_time,
    heat_propagate_spectral,
    positivity_iterations,
    positivity_scan,
    positivity_time,
    povm_sigma_shift,
    quasidistribution,
)
from .run_evolve import prepare_initial_state, require_rate, spin_tag

logger = logging.getLogger(__name__)

GRID_COLUMNS = ["theta", "phi", "value"]
SHIFT_TOLERANCE = 1e-10


def _write_frame(out_dir: Path, stem: str, F: QuasiDist, values: np.ndarray) -> Tuple[Dict[str, Any], List[Path]]:
    real = np.real(values)
    paths = [
        write_csv(out_dir / f"{stem}.csv", GRID_COLUMNS, grid_rows(F.grid, values)),
        write_ppm(out_dir / f"{stem}.ppm", real),
        write_json(out_dir / f"{stem}_spectral.json", spectral_payload(F)),
    ]
    frame = {
        "frame": stem,
        "sigma": F.sigma.sigma,
        "t": F.time_label,
        "min": float(real.min()),
        "max": float(real.max()),
    }
    return frame, paths


def cmd_wigner(config: RunConfig) -> Dict[str, Any]:
    """
    F^sigma grids for both channels from the same initial state.

    Lindblad frames use the heat flow at config.times. POVM frames are built
    from the iterated state and checked against the sigma-shift identity.
    """
    J = config.spin
    sigma = SigmaIndex(config.sigma)
    gamma = require_rate(config.resolved_gamma(), "wigner")
    n_theta, n_phi = config.grid
    if n_theta < J.twoJ + 2:
        logger.warning("n_theta=%d is coarse for J=%s", n_theta, J)
        warnings.warn(f"n_theta={n_theta} < 2J+2 for J={J}", ResolutionWarning, stacklevel=2)
    grid = equiangular_grid(n_theta, n_phi)

    rho0 = prepare_initial_state(config.initial_state, J)
    F0 = quasidistribution(rho0, sigma, grid)
    out_dir = resolve_output_dir(config.output_dir)
    tag = spin_tag(J)
    frames: List[Dict[str, Any]] = []
    paths: List[Path] = []

    for t in config.times:
        Ft = heat_propagate_spectral(F0, t, gamma)
        frame, written = _write_frame(out_dir, f"wigner_lindblad_J{tag}_t{t:g}", Ft, Ft.values)
        frames.append(frame)
        paths.extend(written)

    for n in config.iterations:
        rho_n = povm_iterate_state(rho0, n)
        Fn = quasidistribution(rho_n, sigma, grid, time_label=float(n))
        shifted = povm_sigma_shift(F0, n)
        gap = float(np.max(np.abs(Fn.values - shifted.values)))
        if gap > SHIFT_TOLERANCE:
            logger.warning("sigma-shift cross-check failed at n=%d (gap %.2e)", n, gap)
        frame, written = _write_frame(out_dir, f"wigner_povm_J{tag}_n{n}", Fn, Fn.values)
        paths.extend(written)
        frame["shift_gap"] = gap
        frames.append(frame)

    summary = {"J": str(J), "sigma": sigma.sigma, "gamma": gamma, "frames": frames}
    paths.append(write_json(out_dir / f"wigner_J{tag}_summary.json", summary))
    return {"summary": summary, "paths": paths}


def cmd_positivity(config: RunConfig) -> Dict[str, Any]:
    """Formula positivity time next to the empirically scanned one."""
    J = config.spin
    sigma = SigmaIndex(config.sigma)
    gamma = require_rate(config.resolved_gamma(), "positivity")
    grid = equiangular_grid(*config.grid)

    rho0 = prepare_initial_state(config.initial_state, J)
    F0 = quasidistribution(rho0, sigma)
    scan = positivity_scan(F0, grid)
    formula = positivity_time(J, sigma, gamma)

    report = PositivityReport(
        J=str(J),
        sigma=sigma.sigma,
        gamma=gamma,
        iterations_needed=positivity_iterations(sigma),
        t_star=formula.t_star,
        kind=formula.kind,
        asymptotic=formula.asymptotic,
        initial_minimum=scan.minimum,
        empirical_time=first_positive_time(F0, gamma, grid, t_guess=formula.t_star or None),
        empirical_iteration=first_positive_iteration(F0, grid),
        damped_kernel_positive=damped_kernel_positive(J, sigma, gamma, formula.t_star),
    )
    path = write_json(resolve_output_dir(config.output_dir) / f"positivity_J{spin_tag(J)}.json", report)
    return {"report": report, "path": path}
