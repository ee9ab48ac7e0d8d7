from typing import Protocol, runtime_checkable

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.mesh.exceptions import InvalidMesh


class TriangleSurfaceMesh(BaseModel):
    """Closed, outward-oriented flat-panel triangulation of the scatterer boundary.

    Local edge ``k`` of a triangle is the edge opposite its local vertex ``k``,
    traversed from local vertex ``k+1`` to ``k+2``. ``edge_signs`` is +1 when that
    traversal matches the global orientation (lower to higher vertex index).
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    triangle_to_edges: np.ndarray
    edge_signs: np.ndarray
    normals: np.ndarray
    areas: np.ndarray

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @model_validator(mode="after")
    def check_topology(self):
        num_edges = self.edges.shape[0]
        counts = np.bincount(self.triangle_to_edges.ravel(), minlength=num_edges)
        if np.any(counts != 2):
            raise InvalidMesh("Mesh is not watertight", open_edges=int(np.sum(counts != 2)))
        sign_sum = np.bincount(
            self.triangle_to_edges.ravel(),
            weights=self.edge_signs.ravel(),
            minlength=num_edges,
        )
        if np.any(sign_sum != 0):
            raise InvalidMesh("Inconsistent triangle orientation")
        if np.any(self.areas <= 1e-14 * self.diameter**2):
            raise InvalidMesh("Degenerate triangle", min_area=float(self.areas.min()))
        return self

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def euler_characteristic(self) -> int:
        return self.num_vertices - self.num_edges + self.num_triangles

    @property
    def diameter(self) -> float:
        extent = self.vertices.max(axis=0) - self.vertices.min(axis=0)
        return float(np.linalg.norm(extent))

    @property
    def edge_lengths(self) -> np.ndarray:
        tails, heads = self.vertices[self.edges[:, 0]], self.vertices[self.edges[:, 1]]
        return np.linalg.norm(heads - tails, axis=1)

    @property
    def mesh_width(self) -> float:
        return float(self.edge_lengths.max())

    @property
    def total_area(self) -> float:
        return float(self.areas.sum())

    @property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @property
    def triangle_diameters(self) -> np.ndarray:
        corners = self.vertices[self.triangles]
        sides = corners[:, [1, 2, 0]] - corners[:, [2, 0, 1]]
        return np.linalg.norm(sides, axis=2).max(axis=1)


@runtime_checkable
class SurfaceProjector(Protocol):
    def project(self, points: np.ndarray) -> np.ndarray: ...

    def contains(self, points: np.ndarray) -> np.ndarray: ...


class SphereSurface(BaseModel):
    radius: float = Field(default=1.0, gt=0)
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)

    model_config = ConfigDict(frozen=True)

    def project(self, points: np.ndarray) -> np.ndarray:
        center = np.asarray(self.center)
        offset = points - center
        return center + self.radius * offset / np.linalg.norm(offset, axis=-1, keepdims=True)

    def contains(self, points: np.ndarray) -> np.ndarray:
        return np.linalg.norm(points - np.asarray(self.center), axis=-1) < self.radius


class TorusSurface(BaseModel):
    """Torus of revolution about the x3-axis."""

    major_radius: float = Field(gt=0)
    minor_radius: float = Field(gt=0)

    model_config = ConfigDict(frozen=True)

    def _tube_offset(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        planar = np.linalg.norm(points[..., :2], axis=-1)
        azimuth = np.stack(
            [points[..., 0] / planar, points[..., 1] / planar, np.zeros_like(planar)], axis=-1
        )
        core = self.major_radius * azimuth
        return core, points - core, planar

    def project(self, points: np.ndarray) -> np.ndarray:
        core, offset, _ = self._tube_offset(points)
        return core + self.minor_radius * offset / np.linalg.norm(offset, axis=-1, keepdims=True)

    def contains(self, points: np.ndarray) -> np.ndarray:
        planar = np.linalg.norm(points[..., :2], axis=-1)
        tube = (planar - self.major_radius) ** 2 + points[..., 2] ** 2
        return tube < self.minor_radius**2
