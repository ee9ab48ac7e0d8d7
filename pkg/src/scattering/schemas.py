import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.scattering.exceptions import InvalidPolarization

Vector = tuple[float, float, float]


class IncidentWave(BaseModel):
    """Gaussian plane wave E = A f(t - d·x - t0) p, H = A f(t - d·x - t0) d × p, f(ξ) = exp(-rate ξ²)."""

    amplitude: float = 1.0
    direction: Vector = (0.0, 0.0, 1.0)
    polarization: Vector = (1.0, 0.0, 0.0)
    rate: float = Field(default=50.0, gt=0)
    t0: float = 2.0

    model_config = ConfigDict(frozen=True, extra="forbid")

    @model_validator(mode="after")
    def check_polarization(self):
        d, p = np.asarray(self.direction), np.asarray(self.polarization)
        if np.linalg.norm(d) == 0 or np.linalg.norm(p) == 0 or abs(d @ p) > 1e-12 * np.linalg.norm(d) * np.linalg.norm(p):
            raise InvalidPolarization(direction=self.direction, polarization=self.polarization)
        return self

    @property
    def unit_direction(self) -> np.ndarray:
        d = np.asarray(self.direction, dtype=float)
        return d / np.linalg.norm(d)

    @property
    def unit_polarization(self) -> np.ndarray:
        p = np.asarray(self.polarization, dtype=float)
        return p / np.linalg.norm(p)

    @property
    def magnetic_polarization(self) -> np.ndarray:
        return np.cross(self.unit_direction, self.unit_polarization)


class PointDipole(BaseModel):
    position: Vector = (0.0, 0.0, 0.0)
    moment: Vector = (0.0, 0.0, 1.0)

    model_config = ConfigDict(frozen=True, extra="forbid")


class IncidentTraces(BaseModel):
    """Stage-time load vectors, each of shape ``(N + 1, m, dofs)``.

    ``electric[n, i, j] = (φ_j, E^inc)``, ``magnetic[n, i, j] = (φ_j, H^inc × ν)`` and
    ``divergence[n, i, j] = (div φ_j, ν · ∂_t E^inc)`` at time ``t_n + c_i τ``.
    """

    electric: np.ndarray
    magnetic: np.ndarray
    divergence: np.ndarray

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


class BoundaryDensities(BaseModel):
    """Real coefficient series ``(N + 1, m, dofs)`` of φ = γ_T H and ψ = -γ_T E."""

    phi: np.ndarray
    psi: np.ndarray
    imaginary_residue: float = 0.0
    iterations: list[int] = Field(default_factory=list)

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


class FieldObservation(BaseModel):
    """Fields at ``points (P, 3)`` for output times ``times (N + 1,)``; ``electric``/``magnetic`` are ``(N + 1, P, 3)``."""

    points: np.ndarray
    distances: np.ndarray
    times: np.ndarray
    electric: np.ndarray
    magnetic: np.ndarray

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)
