from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.assembly.schemas import ImpedanceModel


class BlockSystem(BaseModel):
    """Galerkin matrix of A(s) in 2×2 block form.

    ``a11 = -V + Z``, ``a12 = K - P/2``, ``a21 = -K - P/2``, ``a22 = -V``.
    """

    a11: np.ndarray
    a12: np.ndarray
    a21: np.ndarray
    a22: np.ndarray
    frequency: complex
    impedance: ImpedanceModel

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @property
    def dof_count(self) -> int:
        return self.a11.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        return np.block([[self.a11, self.a12], [self.a21, self.a22]])

    def conjugate(self) -> "BlockSystem":
        return BlockSystem(
            a11=self.a11.conj(),
            a12=self.a12.conj(),
            a21=self.a21.conj(),
            a22=self.a22.conj(),
            frequency=self.frequency.conjugate(),
            impedance=self.impedance,
        )


class SolverSettings(BaseModel):
    method: Literal["gmres", "direct"] = "gmres"
    tol: float = Field(default=1e-8, gt=0, le=1e-2)
    max_iter: int = Field(default=1000, ge=1)

    model_config = ConfigDict(frozen=True, extra="forbid")


class SolveResult(BaseModel):
    solution: np.ndarray
    iterations: int
    residual: float

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


class ConditionReport(BaseModel):
    condition: float
    norm: float
    inverse_norm: float


class CalderonResidual(BaseModel):
    absolute: float
    relative: float
    mesh_width: float
