from typing import Callable

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from src.assembly.quadrature import gauss_interval, triangle_rule
from src.logger import get_logger
from src.mesh.schemas import TriangleSurfaceMesh
from src.trace_space.exceptions import (
    PointOutsideTriangle,
    TriangleIndexOutOfRange,
    UnsupportedOrder,
)
from src.trace_space.schemas import LocalBasis, QuadratureSample, RTSpace

logger = get_logger()

TangentialField = Callable[[np.ndarray], np.ndarray]


def build_rt0(mesh: TriangleSurfaceMesh, order: int = 0) -> RTSpace:
    if order != 0:
        logger.warning(f"Raviart–Thomas order {order} requested, only order 0 is available")
        raise UnsupportedOrder(order=order)
    local_lengths = mesh.edge_lengths[mesh.triangle_to_edges]
    coefficients = mesh.edge_signs * local_lengths / (2.0 * mesh.areas[:, None])
    space = RTSpace(mesh=mesh, order=order, local_lengths=local_lengths, coefficients=coefficients)
    logger.info(f"RT0 space built with {space.dof_count} degrees of freedom")
    return space


def _check_triangle(space: RTSpace, triangle: int) -> None:
    if not 0 <= triangle < space.mesh.num_triangles:
        raise TriangleIndexOutOfRange(triangle=triangle, num_triangles=space.mesh.num_triangles)


def _check_barycentric(barycentric: np.ndarray) -> np.ndarray:
    point = np.asarray(barycentric, dtype=float)
    if point.shape != (3,) or np.any(point < -1e-12) or abs(point.sum() - 1.0) > 1e-12:
        raise PointOutsideTriangle(barycentric=point.tolist())
    return point


def physical_points(space: RTSpace, barycentric: np.ndarray) -> np.ndarray:
    """Map a barycentric rule ``(Q, 3)`` onto every triangle, giving ``(F, Q, 3)``."""
    corners = space.mesh.vertices[space.mesh.triangles]
    return np.einsum("qk,fki->fqi", barycentric, corners)


def basis_at_points(space: RTSpace, triangles: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Local basis values ``(T, 3, Q, 3)`` at physical points ``(T, Q, 3)`` of the given triangles."""
    opposite = space.mesh.vertices[space.mesh.triangles[triangles]]
    offsets = points[:, None, :, :] - opposite[:, :, None, :]
    return space.coefficients[triangles][:, :, None, None] * offsets


def rotate(normals: np.ndarray, values: np.ndarray) -> np.ndarray:
    """ν × φ for values ``(T, 3, Q, 3)`` and per-triangle normals ``(T, 3)``."""
    return np.cross(normals[:, None, None, :], values)


def eval_basis(space: RTSpace, triangle: int, barycentric: np.ndarray) -> LocalBasis:
    _check_triangle(space, triangle)
    point = _check_barycentric(barycentric)
    corners = space.mesh.vertices[space.mesh.triangles[triangle]]
    x = (point @ corners)[None, None, :]
    values = basis_at_points(space, np.array([triangle]), x)[0, :, 0, :]
    return LocalBasis(
        dofs=space.dofs[triangle],
        values=values,
        divergences=space.divergences[triangle],
    )


def rotated_test_basis(space: RTSpace, triangle: int, barycentric: np.ndarray) -> np.ndarray:
    local = eval_basis(space, triangle, barycentric)
    return np.cross(space.mesh.normals[triangle], local.values)


def sample_basis(space: RTSpace, order: int) -> QuadratureSample:
    barycentric, weights = triangle_rule(order)
    points = physical_points(space, barycentric)
    triangles = np.arange(space.mesh.num_triangles)
    return QuadratureSample(
        points=points,
        weights=space.mesh.areas[:, None] * weights[None, :],
        values=basis_at_points(space, triangles, points),
        divergences=space.divergences,
        dofs=space.dofs,
    )


def scatter_local(space: RTSpace, local: np.ndarray) -> np.ndarray:
    """Accumulate per-triangle local contributions ``(F, 3)`` into a global vector."""
    result = np.zeros(space.dof_count, dtype=np.result_type(local, float))
    np.add.at(result, space.dofs.ravel(), local.ravel())
    return result


def scatter_local_matrix(space: RTSpace, local: np.ndarray) -> np.ndarray:
    """Accumulate element matrices ``(F, 3, 3)`` into a dense global matrix."""
    n = space.dof_count
    result = np.zeros((n, n), dtype=np.result_type(local, float))
    rows = np.repeat(space.dofs, 3, axis=1).ravel()
    cols = np.tile(space.dofs, (1, 3)).ravel()
    np.add.at(result, (rows, cols), local.ravel())
    return result


def mass_matrix(space: RTSpace) -> np.ndarray:
    """(φ_i, φ_j) in L²(Γ); the rule is exact for the quadratic integrand."""
    sample = sample_basis(space, order=3)
    local = np.einsum("fkqi,flqi,fq->fkl", sample.values, sample.values, sample.weights)
    return scatter_local_matrix(space, local)


def divergence_mass_matrix(space: RTSpace) -> np.ndarray:
    local = np.einsum("fk,fl,f->fkl", space.divergences, space.divergences, space.mesh.areas)
    return scatter_local_matrix(space, local)


def load_vector(space: RTSpace, field: TangentialField, order: int = 4) -> np.ndarray:
    """(φ_i, f) in L²(Γ) for a field evaluated on arrays of points ``(..., 3)``."""
    sample = sample_basis(space, order)
    values = np.asarray(field(sample.points))
    local = np.einsum("fkqi,fqi,fq->fk", sample.values, values, sample.weights)
    return scatter_local(space, local)


def project_tangential(space: RTSpace, field: TangentialField, order: int = 4) -> np.ndarray:
    """Coefficients of the L²(Γ) projection of a tangential field onto the space."""
    factor = cho_factor(mass_matrix(space))
    return cho_solve(factor, load_vector(space, field, order))


def edge_sample(space: RTSpace, order: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gauss points ``(F, 3, Q, 3)`` on the edge opposite each local vertex, their
    interval weights ``(Q,)`` and the outward in-plane edge normals ``(F, 3, 3)``."""
    nodes, weights = gauss_interval(order)
    corners = space.mesh.vertices[space.mesh.triangles]
    tails = np.roll(corners, -1, axis=1)
    heads = np.roll(corners, -2, axis=1)
    points = tails[:, :, None, :] + nodes[None, None, :, None] * (heads - tails)[:, :, None, :]
    tangents = heads - tails
    tangents /= np.linalg.norm(tangents, axis=-1, keepdims=True)
    offsets = tails - corners
    normals = offsets - np.einsum("fki,fki->fk", offsets, tangents)[..., None] * tangents
    normals /= np.linalg.norm(normals, axis=-1, keepdims=True)
    return points, weights, normals


def interpolate_tangential(space: RTSpace, field: TangentialField, order: int = 4) -> np.ndarray:
    """Coefficients of the edge-flux interpolant of a tangential field.

    Each coefficient is the mean normal flux of the field through its edge, so
    the divergence of the result on every triangle is the triangle mean of the
    field's divergence. Both supporting triangles contribute one estimate.
    """
    points, weights, normals = edge_sample(space, order)
    num_triangles = space.mesh.num_triangles
    values = np.asarray(field(points.reshape(num_triangles, -1, 3))).reshape(points.shape)
    flux = np.einsum("fkqi,fki,q->fk", values, normals, weights)
    return 0.5 * scatter_local(space, space.mesh.edge_signs * flux)


def evaluate_expansion(space: RTSpace, coefficients: np.ndarray, order: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Points ``(F, Q, 3)`` and values ``(F, Q, 3)`` of Σ c_i φ_i on the quadrature rule."""
    sample = sample_basis(space, order)
    local = np.asarray(coefficients)[sample.dofs]
    return sample.points, np.einsum("fk,fkqi->fqi", local, sample.values)
