"""Run configuration: strict pydantic models backed by a TOML file.

One file holds one section per subcommand plus shared keys; unknown keys are
rejected everywhere.  Exponent fields that feed the exact-arithmetic planner
are carried as rational strings (``"3/5"``) and only converted at the point of
use.
"""

from __future__ import annotations

import sys
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "RunConfig",
    "SolveSection",
    "DiagnoseSection",
    "SweepSection",
    "PlanSection",
    "QlpSection",
    "CounterexampleSection",
    "load_config",
    "SUBCOMMANDS",
]

SUBCOMMANDS = ("solve", "diagnose", "sweep", "plan", "qlp", "counterexample")


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GridSection(StrictModel):
    n_interior: int = Field(31, ge=1)
    left: float = 0.0
    right: float = 1.0
    grading: Literal["uniform", "geometric-left", "geometric-right"] = "uniform"
    ratio: Optional[float] = None
    m_steps: int = Field(64, ge=1)
    horizon: float = Field(1.0, gt=0.0)


class GeneratorSection(StrictModel):
    """Named coefficient field generators; parameters are generator specific."""

    name: Literal["constant", "lipschitz", "rough", "csv", "expression"] = "lipschitz"
    value: float = 1.0
    alpha: float = 0.7
    amplitude: float = 0.9
    base: float = 2.0
    levels: int = 22
    profile: Literal["resonant", "low-mode"] = "resonant"
    path: Optional[str] = None
    expression: Optional[str] = None
    delta: Optional[float] = None


class OperatorSection(StrictModel):
    """Either a divergence-form assembly or a direct scalar family a(t)."""

    kind: Literal["divergence", "scalar"] = "divergence"
    expression: str = "1"  # scalar kind: coefficient as a function of t
    shift: float = Field(0.0, ge=0.0)
    alpha: float = 1.0
    holder_constant: float = 1.0


class SolveSection(StrictModel):
    grid: GridSection = GridSection()
    operator: OperatorSection = OperatorSection()
    generator: GeneratorSection = GeneratorSection()
    forcing: str = "1"  # expression in t, x
    u0: str = "0"  # expression in x
    theta: float = Field(0.5, gt=0.0, le=1.0)
    p: str = "2"
    route: Literal["integral", "implicit-midpoint", "backward-euler", "extension"] = (
        "integral"
    )
    neumann: bool = False


class DiagnoseSection(SolveSection):
    sector_angle_fraction: float = Field(0.25, gt=0.0, lt=1.0)  # of pi
    lambda_samples: int = Field(120, ge=8)
    kato_vectors: int = Field(32, ge=1)
    vmo_radii: list[float] = [0.05, 0.1, 0.2, 0.4]


class SweepSection(StrictModel):
    alphas: list[float] = [1.0, 0.3]
    levels: int = Field(3, ge=2)
    p: float = 2.0
    theta: float = Field(0.5, gt=0.0, le=1.0)
    n_interior: int = Field(31, ge=1)
    base_m: int = Field(40, ge=2)
    horizon: float = Field(1.0, gt=0.0)
    amplitude: float = 1.4
    route: Literal["integral", "implicit-midpoint", "backward-euler"] = "backward-euler"


class PlanSection(StrictModel):
    theta: str = "1/2"
    p: str = "2"
    alpha: str = "3/5"
    q: Optional[str] = None
    mode: Literal["admissible", "ladder"] = "admissible"


class QlpSection(StrictModel):
    grid: GridSection = GridSection()
    coefficient: str = "1 + u^2/(1+u^2)"  # expression in u
    beta: float = Field(1.0, gt=0.5, le=1.0)
    holder_constant: float = 1.0
    floor: float = Field(1.0, gt=0.0)
    ceiling: float = 10.0
    state_bound: Optional[float] = None
    manufactured: Optional[str] = None  # target solution expression in t, x
    forcing: str = "1"
    u0: str = "0"
    p: float = 2.0
    q: float = 2.0
    tol: float = Field(1e-8, gt=0.0)
    max_iter: int = Field(50, ge=1)
    damping: float = Field(1.0, gt=0.0, le=1.0)
    mode: Literal["solve", "threshold"] = "solve"
    scales: list[float] = [0.25, 0.5, 1.0, 2.0, 4.0]


class CounterexampleSection(StrictModel):
    offset: float = Field(2.0, ge=0.0)
    eps: float = Field(1e-10, gt=0.0)
    n_space: int = Field(400, ge=16)
    horizon: float = Field(1.0, gt=0.0)
    eps_values: list[float] = [1e-4, 1e-6, 1e-8]
    q_values: list[float] = [3.0, 2.5, 2.2, 2.05]
    cutoffs: list[float] = [1e-5, 1e-6]


class RunConfig(StrictModel):
    out: Optional[str] = None
    seed: int = 0
    threads: Optional[int] = None
    solve: SolveSection = SolveSection()
    diagnose: DiagnoseSection = DiagnoseSection()
    sweep: SweepSection = SweepSection()
    plan: PlanSection = PlanSection()
    qlp: QlpSection = QlpSection()
    counterexample: CounterexampleSection = CounterexampleSection()

    @field_validator("threads")
    @classmethod
    def _threads_positive(cls, v):
        if v is not None and v < 1:
            raise ValueError("threads must be a positive count")
        return v


def load_config(text: str) -> RunConfig:
    """Parse TOML text into a validated run configuration (strict keys)."""
    data = tomllib.loads(text)
    return RunConfig.model_validate(data)
