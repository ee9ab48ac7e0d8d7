import numpy as np
from pydantic import BaseModel, ConfigDict


class ButcherTableau(BaseModel):
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @property
    def stages(self) -> int:
        return self.b.shape[0]

    @property
    def stability_at_infinity(self) -> float:
        """R(∞) = 1 - bᵀ A⁻¹ 𝟙."""
        return float(1.0 - self.b @ np.linalg.solve(self.a, np.ones(self.stages)))

    @property
    def stiffly_accurate(self) -> bool:
        return bool(np.allclose(self.a[-1], self.b, rtol=0, atol=1e-15) and self.c[-1] == 1.0)


class CQContext(BaseModel):
    """Contour data for L = N + 1 scaled roots of unity.

    ``frequencies[l]`` are the eigenvalues of Δ(ρ e^{-2πil/L}) / τ with
    ``eigenvectors[l] @ diag(frequencies[l]) @ inverse_eigenvectors[l]``
    reproducing that matrix. Entries ``L - l`` are the conjugates of entries ``l``.
    """

    tableau: ButcherTableau
    steps: int
    final_time: float
    radius: float
    frequencies: np.ndarray
    eigenvectors: np.ndarray
    inverse_eigenvectors: np.ndarray

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @property
    def tau(self) -> float:
        return self.final_time / self.steps

    @property
    def length(self) -> int:
        return self.steps + 1

    @property
    def stages(self) -> int:
        return self.tableau.stages

    @property
    def stage_times(self) -> np.ndarray:
        """``(N + 1, m)`` array of t_n + c_i τ."""
        return (np.arange(self.length)[:, None] + self.tableau.c[None, :]) * self.tau

    @property
    def output_times(self) -> np.ndarray:
        return np.arange(self.length) * self.tau

    @property
    def independent_indices(self) -> np.ndarray:
        """Contour indices that determine the rest by conjugation."""
        return np.arange(self.length // 2 + 1)


class FrequencyData(BaseModel):
    """Transformed series ``(L, m, ...)`` in the eigenbasis of each Δ_l.

    ``real_signal`` marks data whose time-domain counterpart is real, so that
    index ``L - l`` is the conjugate of index ``l``.
    """

    values: np.ndarray
    real_signal: bool = False

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)
