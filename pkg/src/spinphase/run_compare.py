import logging
import warnings
from typing import Any, Dict, List, Optional

import numpy as np

from .channels import (
    LindbladParams,
    decay_rates,
    half_spin_equivalent_time,
    lindblad_propagate_analytic,
    lindblad_propagate_matrix,
    povm_iterate,
    povm_iterate_state,
    ratio_statistic,
)
from .errors import UndefinedRatioError
from .helpers import resolve_output_dir, write_json
from .models import CompareReport, EquivalenceRow, MomentLabel, RatioReport, RunConfig
from .run_evolve import prepare_initial_state, require_rate, spin_tag
from .su2_core import DensityMatrix, HalfInt, MomentVector, expand, tensor_basis

logger = logging.getLogger(__name__)

EQUIVALENCE_ITERATIONS = range(1, 6)


def dominant_order(m: MomentVector, L: int) -> Optional[int]:
    """k with the largest |rho_{L,k}|, or None when the whole rank vanishes."""
    if L > m.J.twoJ:
        return None
    values = [abs(m[L, k]) for k in range(-L, L + 1)]
    if max(values) == 0.0:
        return None
    return int(np.argmax(values)) - L


def _ratio(model: str, series: List[MomentVector], k1: int, k2: int, theory: float) -> RatioReport:
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            result = ratio_statistic([m[1, k1] for m in series], [m[2, k2] for m in series])
    except UndefinedRatioError as exc:
        return RatioReport(model=model, theory=theory, error=str(exc))
    if result.flagged:
        logger.warning("%s ratio varies across samples (variance %.2e)", model, result.variance)
    return RatioReport(
        model=model,
        value=result.value,
        variance=result.variance,
        flagged=result.flagged,
        theory=theory,
    )


def half_spin_equivalence(rho0: DensityMatrix, gamma: float) -> List[EquivalenceRow]:
    """n POVM iterations against the Lindblad state at t = n log 3 / gamma."""
    params = LindbladParams(gamma=gamma, J=rho0.J)
    rows = []
    for n in EQUIVALENCE_ITERATIONS:
        t = half_spin_equivalent_time(n, gamma)
        povm_state = povm_iterate_state(rho0, n)
        lindblad_state = lindblad_propagate_matrix(rho0, t, params)
        gap = float(np.max(np.abs(povm_state.mat - lindblad_state.mat)))
        rows.append(EquivalenceRow(n=n, t=t, max_difference=gap))
    return rows


def _samples(values: List, zero) -> List:
    """Sample axis for the ratio: t = 0 first, then the positive samples."""
    return [zero] + [v for v in values if v > 0]


def cmd_compare(config: RunConfig) -> Dict[str, Any]:
    """
    Ratio statistic for both channels plus the spin-1/2 equivalence check.

    Failures that leave the ratio undefined land in the report's error fields.
    """
    J: HalfInt = config.spin
    gamma = require_rate(config.resolved_gamma(), "compare")
    rho0 = prepare_initial_state(config.initial_state, J)
    m0 = expand(rho0, tensor_basis(J))
    params = LindbladParams(gamma=gamma, J=J)
    report = CompareReport(J=str(J), gamma=gamma)

    k1, k2 = dominant_order(m0, 1), dominant_order(m0, 2)
    if J.twoJ < 2:
        report.errors.append(f"rank-2 moments do not exist for J={J}; ratio undefined")
    elif k1 is None or k2 is None:
        report.errors.append("initial rank-1 or rank-2 moments vanish; ratio undefined")
    else:
        report.moment_1 = MomentLabel(L=1, k=k1)
        report.moment_2 = MomentLabel(L=2, k=k2)
        rates = decay_rates(J, gamma)
        times = _samples(config.times, 0.0)
        iterations = _samples(config.iterations, 0)
        if len(times) < 2 or len(iterations) < 2:
            report.errors.append("need at least one positive time and one positive iteration")
        else:
            lind_series = [lindblad_propagate_analytic(m0, t, params) for t in times]
            povm_series = [povm_iterate(m0, n) for n in iterations]
            report.ratios = [
                _ratio("lindblad", lind_series, k1, k2, rates.lindblad[2] / rates.lindblad[1]),
                _ratio("povm", povm_series, k1, k2, rates.povm[2] / rates.povm[1]),
            ]
            lind, povm = (r.value for r in report.ratios)
            if lind is not None and povm is not None:
                report.relative_gap = abs(povm - lind) / lind

    if J.twoJ == 1:
        report.equivalence = half_spin_equivalence(rho0, gamma)
        worst = max(row.max_difference for row in report.equivalence)
        logger.info("spin-1/2 equivalence: max state difference %.2e", worst)

    path = write_json(resolve_output_dir(config.output_dir) / f"compare_J{spin_tag(J)}.json", report)
    return {"report": report, "path": path}

