import math
import re
from typing import List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, Field, field_validator, model_validator

from .errors import HalfIntegerError
from .su2_core import HalfInt

_CALL_RE = re.compile(r"^\s*(\w+)\s*(?:\((.*)\))?\s*$")
_SIGMA_ALIASES = {"q": -1.0, "w": 0.0, "p": 1.0}


class InitialStateSpec(BaseModel):
    kind: Literal["coherent", "cat", "basis", "file", "random"] = "coherent"
    theta: float = 0.0
    phi: float = 0.0
    m: Optional[str] = None
    path: Optional[str] = None
    seed: int = 0

    @classmethod
    def parse(cls, text: str) -> "InitialStateSpec":
        """
        Parse the command-line form of an initial state.

        Accepted: "coherent(theta,phi)", "north", "cat", "basis(m)",
        "file(path)", "random(seed)".
        """
        match = _CALL_RE.match(text)
        if not match:
            raise ValueError(f"cannot parse initial state {text!r}")
        kind, arg = match.group(1).lower(), (match.group(2) or "").strip()
        if kind == "north":
            return cls(kind="coherent")
        if kind == "coherent":
            if not arg:
                return cls(kind="coherent")
            parts = [p.strip() for p in arg.split(",")]
            if len(parts) != 2:
                raise ValueError("coherent state needs coherent(theta,phi)")
            return cls(kind="coherent", theta=float(parts[0]), phi=float(parts[1]))
        if kind == "cat":
            return cls(kind="cat")
        if kind == "basis":
            return cls(kind="basis", m=arg)
        if kind == "file":
            return cls(kind="file", path=arg)
        if kind == "random":
            return cls(kind="random", seed=int(arg or 0))
        raise ValueError(f"unknown initial state kind {kind!r}")

    @model_validator(mode="after")
    def _check_fields(self) -> "InitialStateSpec":
        if self.kind == "basis" and not self.m:
            raise ValueError("basis initial state needs m")
        if self.kind == "file" and not self.path:
            raise ValueError("file initial state needs a path")
        if not 0.0 <= self.theta <= math.pi:
            raise ValueError(f"theta = {self.theta} outside [0, pi]")
        return self


class RunConfig(BaseModel):
    J: str = "1"
    model: Literal["lindblad", "povm", "unravel"] = "lindblad"
    gamma: Optional[float] = None
    gamma_rule: Literal["fixed", "one_over_J"] = "one_over_J"
    initial_state: InitialStateSpec = Field(default_factory=InitialStateSpec)
    sigma: float = 0.0
    times: List[float] = Field(default_factory=lambda: [0.0, 1.0])
    iterations: List[int] = Field(default_factory=lambda: [0, 1])
    grid: Tuple[int, int] = (181, 360)
    output_dir: Optional[str] = None
    seed: int = Field(default=0, ge=0)
    dt: float = Field(default=1e-3, gt=0.0)
    n_traj: int = Field(default=10000, ge=1)

    @field_validator("J", mode="before")
    @classmethod
    def _check_J(cls, value: Union[str, int]) -> str:
        if isinstance(value, float):
            raise ValueError("J must be an integer or an exact string like '3/2'")
        try:
            return str(HalfInt.parse(value if isinstance(value, int) else str(value)))
        except HalfIntegerError as exc:
            raise ValueError(str(exc)) from exc

    @field_validator("initial_state", mode="before")
    @classmethod
    def _parse_state(cls, value):
        return InitialStateSpec.parse(value) if isinstance(value, str) else value

    @field_validator("sigma", mode="before")
    @classmethod
    def _parse_sigma(cls, value):
        if isinstance(value, str) and value.strip().lower() in _SIGMA_ALIASES:
            return _SIGMA_ALIASES[value.strip().lower()]
        return value

    @field_validator("sigma")
    @classmethod
    def _finite_sigma(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("sigma must be finite")
        return value

    @field_validator("gamma")
    @classmethod
    def _check_gamma(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and (value < 0 or not math.isfinite(value)):
            raise ValueError("gamma must be a finite non-negative rate")
        return value

    @field_validator("times")
    @classmethod
    def _check_times(cls, value: List[float]) -> List[float]:
        if any(t < 0 for t in value) or value != sorted(value):
            raise ValueError("times must be sorted and non-negative")
        return value

    @field_validator("iterations")
    @classmethod
    def _check_iterations(cls, value: List[int]) -> List[int]:
        if any(n < 0 for n in value) or value != sorted(value):
            raise ValueError("iterations must be sorted and non-negative")
        return value

    @field_validator("grid")
    @classmethod
    def _check_grid(cls, value: Tuple[int, int]) -> Tuple[int, int]:
        if value[0] < 2 or value[1] < 1:
            raise ValueError("grid needs n_theta >= 2 and n_phi >= 1")
        return value

    @property
    def spin(self) -> HalfInt:
        return HalfInt.parse(self.J)

    def resolved_gamma(self) -> float:
        """Explicit gamma wins; otherwise 1/J (gamma = 1 at J = 0) or 1 for the fixed rule."""
        if self.gamma is not None:
            return self.gamma
        if self.gamma_rule == "one_over_J" and self.spin.twoJ > 0:
            return 1.0 / self.spin.value
        return 1.0


# ----------------------------------------------------------------------
# Reports
# ----------------------------------------------------------------------

class MomentLabel(BaseModel):
    L: int
    k: int


class RatioReport(BaseModel):
    model: Literal["lindblad", "povm"]
    value: Optional[float] = None
    variance: Optional[float] = None
    flagged: bool = False
    theory: float
    error: Optional[str] = None


class EquivalenceRow(BaseModel):
    n: int
    t: float
    max_difference: float


class CompareReport(BaseModel):
    J: str
    gamma: float
    moment_1: Optional[MomentLabel] = None
    moment_2: Optional[MomentLabel] = None
    ratios: List[RatioReport] = []
    relative_gap: Optional[float] = None
    equivalence: List[EquivalenceRow] = []
    errors: List[str] = []


class PositivityReport(BaseModel):
    J: str
    sigma: float
    gamma: float
    iterations_needed: int
    t_star: float
    kind: Literal["exact", "bound"]
    asymptotic: Optional[float] = None
    initial_minimum: float
    empirical_time: Optional[float] = None
    empirical_iteration: Optional[int] = None
    damped_kernel_positive: bool
