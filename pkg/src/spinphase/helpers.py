import csv
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel

from .coherent import PhaseGrid
from .errors import ConfigError, DimensionMismatchError
from .phasespace import QuasiDist
from .su2_core import DensityMatrix, HalfInt, tensor_basis

logger = logging.getLogger(__name__)

DEFAULT_OUTPUT_DIR = "./out"


# ----------------------------------------------------------------------
# Paths
# ----------------------------------------------------------------------

def resolve_output_dir(output_dir: Optional[str] = None) -> Path:
    """
    Directory for command outputs, created if missing.

    Falls back to SPINPHASE_OUTPUT_DIR and then to ./out.
    """
    path = Path(output_dir or os.getenv("SPINPHASE_OUTPUT_DIR", DEFAULT_OUTPUT_DIR))
    path.mkdir(parents=True, exist_ok=True)
    return path


# ----------------------------------------------------------------------
# CSV / JSON
# ----------------------------------------------------------------------

def _cell(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Dict[str, Any]]) -> Path:
    """Write rows with a fixed column order; floats keep full precision."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row[c]) for c in columns])
    logger.info("wrote %s", path)
    return path


def read_csv(path: Path) -> List[Dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_json(path: Path, payload: Union[BaseModel, Dict[str, Any], List[Any]]) -> Path:
    if isinstance(payload, BaseModel):
        text = payload.model_dump_json(indent=2)
    else:
        text = json.dumps(payload, indent=2)
    path.write_text(text + "\n", encoding="utf-8")
    logger.info("wrote %s", path)
    return path


# ----------------------------------------------------------------------
# State snapshots and tables
# ----------------------------------------------------------------------

def _matrix_payload(mat: np.ndarray) -> List[List[List[float]]]:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(mat, dtype=complex)]


def state_to_payload(rho: DensityMatrix) -> Dict[str, Any]:
    """{"J": "1", "matrix": [[[re, im], ...], ...]}, rows m-descending."""
    return {"J": str(rho.J), "matrix": _matrix_payload(rho.mat)}


def state_from_payload(payload: Dict[str, Any]) -> DensityMatrix:
    try:
        J = HalfInt.parse(str(payload["J"]))
        raw = np.asarray(payload["matrix"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed state snapshot: {exc}") from exc
    if raw.ndim != 3 or raw.shape[2] != 2:
        raise ConfigError("state snapshot matrix must be [[[re, im], ...], ...]")
    if raw.shape[:2] != (J.dim, J.dim):
        raise DimensionMismatchError(f"snapshot matrix {raw.shape[:2]} does not match J={J}")
    return DensityMatrix.from_array(raw[..., 0] + 1j * raw[..., 1], J=J)


def write_state_snapshot(path: Path, rho: DensityMatrix) -> Path:
    return write_json(path, state_to_payload(rho))


def read_state_snapshot(path: Union[str, Path]) -> DensityMatrix:
    text = Path(path).read_text(encoding="utf-8")
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    return state_from_payload(payload)


def tensor_table_payload(J: HalfInt) -> List[Dict[str, Any]]:
    basis = tensor_basis(J)
    return [
        {"J": str(J), "L": L, "k": k, "matrix": _matrix_payload(op)}
        for (L, k), op in basis
    ]


def spectral_payload(F: QuasiDist) -> Dict[str, Any]:
    return {"sigma": F.sigma.sigma, "t": F.time_label, "coeffs": F.records()}


def grid_rows(grid: PhaseGrid, values: np.ndarray) -> List[Dict[str, float]]:
    values = np.real(values)
    return [
        {"theta": float(th), "phi": float(ph), "value": float(values[i, j])}
        for i, th in enumerate(grid.theta)
        for j, ph in enumerate(grid.phi)
    ]


# ----------------------------------------------------------------------
# PPM heatmaps
# ----------------------------------------------------------------------

def render_ppm(values: np.ndarray) -> str:
    """
    Plain-text P3 pixmap of a (n_theta, n_phi) array, row 0 at theta = 0.

    Diverging palette anchored at 0: white at zero, red for positive and
    blue for negative values, saturated at max |value|.
    """
    values = np.real(np.asarray(values)).astype(float)
    scale = float(np.max(np.abs(values))) or 1.0
    u = np.clip(values / scale, -1.0, 1.0)
    fade = np.rint(255 * (1.0 - np.abs(u))).astype(int)
    full = np.full_like(fade, 255)
    red = np.where(u >= 0, full, fade)
    blue = np.where(u >= 0, fade, full)
    pixels = np.stack([red, fade, blue], axis=-1)

    height, width = values.shape
    lines = ["P3", f"{width} {height}", "255"]
    for row in pixels:
        lines.append(" ".join(f"{r} {g} {b}" for r, g, b in row))
    return "\n".join(lines) + "\n"


def write_ppm(path: Path, values: np.ndarray) -> Path:
    path.write_text(render_ppm(values), encoding="ascii")
    logger.info("wrote %s", path)
    return path
