from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.assembly.schemas import ImpedanceModel, QuadratureConfig
from src.calderon.schemas import SolverSettings
from src.scattering.schemas import IncidentWave, Vector


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class MeshSpec(_Section):
    shape: Literal["sphere", "torus"] = "sphere"
    level: int = Field(default=1, ge=0)
    radius: float = Field(default=1.0, gt=0)
    major_radius: float = Field(default=0.8, gt=0)
    minor_radius: float = Field(default=0.2, gt=0)
    n_major: int = Field(default=24, ge=3)
    n_minor: int = Field(default=8, ge=3)


class TimeSpec(_Section):
    stages: Literal[1, 2, 3] = 2
    steps: int = Field(default=64, ge=1)
    final_time: float = Field(default=4.0, gt=0)


class StudySpec(_Section):
    steps_ladder: list[int] = [8, 16, 32, 64]
    reference_steps: int = 256
    level_ladder: list[int] = [0, 1, 2]
    reference_level: int = 3


class GridSpec(_Section):
    """Planar evaluation grid in the x1-x3 plane."""

    x_range: tuple[float, float] = (-1.5, 1.5)
    z_range: tuple[float, float] = (-1.5, 1.5)
    resolution: int = Field(default=31, ge=2)
    clearance: float = Field(default=0.05, ge=0)
    frames: list[int] = [10, 20, 30, 40, 50]


class OutputSpec(_Section):
    directory: str = "results"
    use_cache: bool = True


class ScenarioConfig(_Section):
    mesh: MeshSpec = MeshSpec()
    time: TimeSpec = TimeSpec()
    impedance: ImpedanceModel = ImpedanceModel()
    wave: IncidentWave = IncidentWave()
    quadrature: QuadratureConfig = QuadratureConfig()
    solver: SolverSettings = SolverSettings()
    study: StudySpec = StudySpec()
    grid: GridSpec = GridSpec()
    output: OutputSpec = OutputSpec()
    points: list[Vector] = [(2.0, 0.0, 0.0)]

    @model_validator(mode="after")
    def check_layer(self):
        if self.impedance.delta <= 0:
            raise ValueError("impedance.delta must be positive")
        return self


class ConvergenceRow(BaseModel):
    parameter: float
    error: float = Field(ge=0)
    order: float | None = None


class ConvergenceReport(BaseModel):
    study: str
    rows: list[ConvergenceRow]
    norm: str = "max over output times of the Euclidean (E, H) error at the evaluation points"
    reference: dict
    config: dict

    @property
    def orders(self) -> list[float]:
        return [row.order for row in self.rows if row.order is not None]


class ConditionRow(BaseModel):
    l: int
    stage: int
    frequency_real: float
    frequency_imag: float
    condition: float
    norm: float
    inverse_norm: float
    iterations: int
