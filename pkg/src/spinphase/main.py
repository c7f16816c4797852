import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import yaml
from dotenv import load_dotenv
from pydantic import ValidationError

from .errors import ConfigError, HalfIntegerError, SpinPhaseError
from .models import RunConfig
from .run_compare import cmd_compare
from .run_evolve import cmd_evolve, cmd_rates, cmd_tensor_table
from .run_unravel import cmd_unravel
from .run_wigner import cmd_positivity, cmd_wigner
from .su2_core import HalfInt

logger = logging.getLogger("spinphase")

CONFIG_DIR = Path(__file__).resolve().parent / "config"

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_IO = 3


# ----------------------------------------------------------------------
# Configuration layers: preset < --config JSON < flags
# ----------------------------------------------------------------------

def _load_yaml(path: Path) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        return yaml.safe_load(f) or {}


def load_preset(name: str) -> Dict[str, Any]:
    presets = _load_yaml(CONFIG_DIR / "presets.yaml").get("presets", {})
    if name not in presets:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(sorted(presets))}")
    return dict(presets[name])


def _float_list(text: str) -> List[float]:
    return [float(part) for part in text.split(",") if part.strip()]


def _int_list(text: str) -> List[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def _grid(text: str) -> List[int]:
    parts = text.lower().replace(",", "x").split("x")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("grid must look like 181x360")
    return [int(parts[0]), int(parts[1])]


def _flag_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    fields = {
        "J": "J",
        "model": "model",
        "gamma": "gamma",
        "gamma_rule": "gamma_rule",
        "state": "initial_state",
        "sigma": "sigma",
        "times": "times",
        "iterations": "iterations",
        "grid": "grid",
        "output_dir": "output_dir",
        "seed": "seed",
        "dt": "dt",
        "n_traj": "n_traj",
    }
    return {
        target: getattr(args, name)
        for name, target in fields.items()
        if getattr(args, name, None) is not None
    }


def build_config(args: argparse.Namespace) -> RunConfig:
    data: Dict[str, Any] = {}
    if args.preset:
        data.update(load_preset(args.preset))
    if args.config:
        text = Path(args.config).read_text(encoding="utf-8")
        data.update(RunConfig.model_validate_json(text).model_dump(exclude_unset=True))
    data.update(_flag_overrides(args))
    return RunConfig.model_validate(data)


# ----------------------------------------------------------------------
# Argument parser
# ----------------------------------------------------------------------

def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", help="named setup from config/presets.yaml")
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--J", dest="J", help='spin as an exact string, e.g. "1", "3/2"')
    p.add_argument("--model", choices=["lindblad", "povm", "unravel"])
    p.add_argument("--gamma", type=float)
    p.add_argument("--gamma-rule", dest="gamma_rule", choices=["fixed", "one_over_J"])
    p.add_argument("--state", help="coherent(theta,phi) | north | cat | basis(m) | file(path) | random(seed)")
    p.add_argument("--sigma", help="ordering parameter or q / w / p")
    p.add_argument("--times", type=_float_list, help="comma-separated times")
    p.add_argument("--iterations", type=_int_list, help="comma-separated POVM iteration counts")
    p.add_argument("--grid", type=_grid, help="display grid n_theta x n_phi")
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--seed", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--n-traj", dest="n_traj", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinphase",
        description="Isotropic decoherence of spin-J systems: Lindblad flow, coherent-state POVMs, quasidistributions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    rates = sub.add_parser("rates", help="decay-rate table for both channels")
    rates.add_argument("--J", dest="J", required=True)
    rates.add_argument("--gamma", type=float)
    rates.add_argument("--output-dir", dest="output_dir")

    table = sub.add_parser("tensor-table", help="tensor operator matrices as JSON")
    table.add_argument("--J", dest="J", required=True)
    table.add_argument("--output-dir", dest="output_dir")

    evolve = sub.add_parser("evolve", help="moment time series")
    _add_run_options(evolve)
    evolve.add_argument("--snapshots", action="store_true", help="also write state JSON per sample")

    for name, text in [
        ("wigner", "quasidistribution grids and heatmaps"),
        ("compare", "ratio statistic and spin-1/2 equivalence report"),
        ("unravel", "Monte Carlo kicked-trajectory ensemble"),
        ("positivity", "positivity time report"),
    ]:
        _add_run_options(sub.add_parser(name, help=text))
    return parser


# ----------------------------------------------------------------------
# Entry points
# ----------------------------------------------------------------------

def _rates_gamma(J: HalfInt, gamma: Optional[float]) -> float:
    if gamma is not None:
        return gamma
    return 1.0 / J.value if J.twoJ > 0 else 1.0


def dispatch(args: argparse.Namespace) -> List[Path]:
    if args.command == "rates":
        J = HalfInt.parse(args.J)
        return [cmd_rates(J, _rates_gamma(J, args.gamma), args.output_dir)]
    if args.command == "tensor-table":
        return [cmd_tensor_table(HalfInt.parse(args.J), args.output_dir)]

    config = build_config(args)
    logger.info("running %s for J=%s", args.command, config.J)
    if args.command == "evolve":
        written = cmd_evolve(config, snapshots=args.snapshots)
        return [written["moments"], *written["snapshots"]]
    if args.command == "wigner":
        return cmd_wigner(config)["paths"]
    if args.command == "compare":
        return [cmd_compare(config)["path"]]
    if args.command == "unravel":
        return [cmd_unravel(config)["path"]]
    return [cmd_positivity(config)["path"]]


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    logging.basicConfig(
        level=os.getenv("SPINPHASE_LOG_LEVEL", "INFO").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    logging.captureWarnings(True)

    args = build_parser().parse_args(argv)
    try:
        for path in dispatch(args):
            print(path)
    except (ConfigError, HalfIntegerError, ValidationError) as exc:
        logger.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        logger.error("I/O error: %s", exc)
        return EXIT_IO
    except SpinPhaseError as exc:
        logger.error("%s", exc)
        return EXIT_FAILURE
    except ValueError as exc:
        logger.error("invalid input: %s", exc)
        return EXIT_CONFIG
    return EXIT_OK


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
