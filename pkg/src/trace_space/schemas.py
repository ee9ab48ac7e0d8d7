import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.mesh.schemas import TriangleSurfaceMesh


class RTSpace(BaseModel):
    """Lowest-order Raviart–Thomas space, one degree of freedom per mesh edge.

    On triangle ``t`` the local function ``k`` is
    ``coefficients[t, k] * (x - vertices[triangles[t, k]])`` with
    ``coefficients = sign * length / (2 * area)``, so its normal component on
    edge ``k`` equals ``sign`` and its surface divergence is ``2 * coefficients``.
    """

    mesh: TriangleSurfaceMesh
    order: int = Field(default=0, ge=0)
    local_lengths: np.ndarray
    coefficients: np.ndarray

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @property
    def dof_count(self) -> int:
        return self.mesh.num_edges

    @property
    def dofs(self) -> np.ndarray:
        return self.mesh.triangle_to_edges

    @property
    def divergences(self) -> np.ndarray:
        return 2.0 * self.coefficients


class LocalBasis(BaseModel):
    dofs: np.ndarray
    values: np.ndarray
    divergences: np.ndarray

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


class QuadratureSample(BaseModel):
    """Basis data on every triangle at a shared barycentric rule.

    Shapes: ``points (F, Q, 3)``, ``weights (F, Q)`` with the triangle area
    folded in, ``values (F, 3, Q, 3)``, ``divergences (F, 3)``, ``dofs (F, 3)``.
    """

    points: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    divergences: np.ndarray
    dofs: np.ndarray

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)
