from pathlib import Path

import numpy as np

from src.config import settings
from src.logger import get_logger
from src.mesh.exceptions import (
    InvalidResolution,
    InvalidTorusRadii,
    MalformedMeshFile,
    MeshLevelTooLarge,
)
from src.mesh.schemas import SphereSurface, SurfaceProjector, TriangleSurfaceMesh

logger = get_logger()

_GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0

ICOSAHEDRON_VERTICES = np.array(
    [
        [-1, _GOLDEN, 0],
        [1, _GOLDEN, 0],
        [-1, -_GOLDEN, 0],
        [1, -_GOLDEN, 0],
        [0, -1, _GOLDEN],
        [0, 1, _GOLDEN],
        [0, -1, -_GOLDEN],
        [0, 1, -_GOLDEN],
        [_GOLDEN, 0, -1],
        [_GOLDEN, 0, 1],
        [-_GOLDEN, 0, -1],
        [-_GOLDEN, 0, 1],
    ],
    dtype=float,
)

ICOSAHEDRON_FACES = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ],
    dtype=np.int64,
)


def build_mesh(vertices: np.ndarray, triangles: np.ndarray) -> TriangleSurfaceMesh:
    """Derive the edge numbering, orientation signs, normals and areas."""
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    num_triangles = triangles.shape[0]

    tails = triangles[:, [1, 2, 0]]
    heads = triangles[:, [2, 0, 1]]
    local = np.stack([tails, heads], axis=-1).reshape(-1, 2)
    edges, inverse = np.unique(np.sort(local, axis=1), axis=0, return_inverse=True)
    triangle_to_edges = inverse.reshape(num_triangles, 3)
    edge_signs = np.where(tails < heads, 1, -1).astype(np.int64)

    corners = vertices[triangles]
    cross = np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])
    doubled = np.linalg.norm(cross, axis=1)
    normals = cross / np.where(doubled > 0, doubled, 1.0)[:, None]

    return TriangleSurfaceMesh(
        vertices=vertices,
        triangles=triangles,
        edges=edges,
        triangle_to_edges=triangle_to_edges,
        edge_signs=edge_signs,
        normals=normals,
        areas=0.5 * doubled,
    )


def _orient_outward(vertices: np.ndarray, triangles: np.ndarray, center: np.ndarray) -> np.ndarray:
    corners = vertices[triangles]
    cross = np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])
    inward = np.einsum("ij,ij->i", cross, corners.mean(axis=1) - center) < 0
    oriented = triangles.copy()
    oriented[inward] = oriented[inward][:, [0, 2, 1]]
    return oriented


def generate_icosphere(level: int, radius: float = 1.0) -> TriangleSurfaceMesh:
    if level < 0:
        raise InvalidResolution("Icosphere level must be non-negative", level=level)
    if level > settings.max_icosphere_level:
        logger.warning(f"Icosphere level {level} rejected by the memory guard")
        raise MeshLevelTooLarge(level=level, max_level=settings.max_icosphere_level)
    if radius <= 0:
        raise InvalidResolution("Sphere radius must be positive", radius=radius)

    surface = SphereSurface(radius=radius)
    vertices = surface.project(ICOSAHEDRON_VERTICES)
    triangles = _orient_outward(vertices, ICOSAHEDRON_FACES, np.zeros(3))
    mesh = build_mesh(vertices, triangles)
    for _ in range(level):
        mesh = refine(mesh, snap=surface)
    logger.info(
        f"Icosphere level {level}: V={mesh.num_vertices}, E={mesh.num_edges}, F={mesh.num_triangles}"
    )
    return mesh


def generate_torus(
    major_radius: float, minor_radius: float, n_major: int, n_minor: int
) -> TriangleSurfaceMesh:
    """Structured torus about the x3-axis; vertex (i, j) sits at angles (2πi/n_major, 2πj/n_minor)."""
    if not 0 < minor_radius < major_radius:
        logger.warning(f"Torus radii rejected: R={major_radius}, r={minor_radius}")
        raise InvalidTorusRadii(major_radius=major_radius, minor_radius=minor_radius)
    if n_major < 3 or n_minor < 3:
        raise InvalidResolution("Torus needs at least 3 segments per direction", n_major=n_major, n_minor=n_minor)

    theta = 2.0 * np.pi * np.arange(n_major) / n_major
    phi = 2.0 * np.pi * np.arange(n_minor) / n_minor
    theta2d, phi2d = np.meshgrid(theta, phi, indexing="ij")
    ring = major_radius + minor_radius * np.cos(phi2d)
    vertices = np.stack(
        [ring * np.cos(theta2d), ring * np.sin(theta2d), minor_radius * np.sin(phi2d)], axis=-1
    ).reshape(-1, 3)

    i, j = np.meshgrid(np.arange(n_major), np.arange(n_minor), indexing="ij")
    i, j = i.ravel(), j.ravel()
    ip, jp = (i + 1) % n_major, (j + 1) % n_minor
    v00, v10 = i * n_minor + j, ip * n_minor + j
    v11, v01 = ip * n_minor + jp, i * n_minor + jp
    # (θ, φ) ordering gives ∂θ × ∂φ, which points out of the tube
    triangles = np.concatenate(
        [np.stack([v00, v10, v11], axis=1), np.stack([v00, v11, v01], axis=1)]
    )
    mesh = build_mesh(vertices, triangles)
    logger.info(
        f"Torus R={major_radius}, r={minor_radius}: V={mesh.num_vertices}, "
        f"E={mesh.num_edges}, F={mesh.num_triangles}"
    )
    return mesh


def refine(mesh: TriangleSurfaceMesh, snap: SurfaceProjector | None = None) -> TriangleSurfaceMesh:
    """Uniform red refinement; new edge midpoints are projected onto ``snap`` when given."""
    midpoints = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
    if snap is not None:
        midpoints = snap.project(midpoints)
    vertices = np.concatenate([mesh.vertices, midpoints])

    a, b, c = mesh.triangles.T
    offset = mesh.num_vertices
    m_bc = offset + mesh.triangle_to_edges[:, 0]
    m_ca = offset + mesh.triangle_to_edges[:, 1]
    m_ab = offset + mesh.triangle_to_edges[:, 2]
    triangles = np.concatenate(
        [
            np.stack([a, m_ab, m_ca], axis=1),
            np.stack([m_ab, b, m_bc], axis=1),
            np.stack([m_ca, m_bc, c], axis=1),
            np.stack([m_ab, m_bc, m_ca], axis=1),
        ]
    )
    return build_mesh(vertices, triangles)


def winding_number(mesh: TriangleSurfaceMesh, points: np.ndarray) -> np.ndarray:
    """Generalized winding number: 1 inside the scatterer, 0 in the exterior domain."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    corners = mesh.vertices[mesh.triangles]
    result = np.empty(points.shape[0])
    for start in range(0, points.shape[0], 256):
        chunk = points[start : start + 256]
        a, b, c = (corners[None, :, k, :] - chunk[:, None, :] for k in range(3))
        la, lb, lc = (np.linalg.norm(v, axis=-1) for v in (a, b, c))
        numerator = np.einsum("pfi,pfi->pf", a, np.cross(b, c))
        denominator = (
            la * lb * lc
            + np.einsum("pfi,pfi->pf", a, b) * lc
            + np.einsum("pfi,pfi->pf", a, c) * lb
            + np.einsum("pfi,pfi->pf", b, c) * la
        )
        solid_angles = 2.0 * np.arctan2(numerator, denominator)
        result[start : start + 256] = solid_angles.sum(axis=1) / (4.0 * np.pi)
    return result


def _segment_distance(points: np.ndarray, tails: np.ndarray, heads: np.ndarray) -> np.ndarray:
    direction = heads - tails
    length2 = np.einsum("fi,fi->f", direction, direction)
    rel = points[:, None, :] - tails[None]
    t = np.clip(np.einsum("pfi,fi->pf", rel, direction) / length2, 0.0, 1.0)
    closest = tails[None] + t[..., None] * direction[None]
    return np.linalg.norm(points[:, None, :] - closest, axis=-1)


def distance_to_surface(mesh: TriangleSurfaceMesh, points: np.ndarray) -> np.ndarray:
    """Exact Euclidean distance from each point to the flat-panel surface."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    corners = mesh.vertices[mesh.triangles]
    p0, p1, p2 = corners[:, 0], corners[:, 1], corners[:, 2]
    e1, e2 = p1 - p0, p2 - p0
    g11 = np.einsum("fi,fi->f", e1, e1)
    g12 = np.einsum("fi,fi->f", e1, e2)
    g22 = np.einsum("fi,fi->f", e2, e2)
    det = g11 * g22 - g12**2

    result = np.empty(points.shape[0])
    for start in range(0, points.shape[0], 256):
        chunk = points[start : start + 256]
        rel = chunk[:, None, :] - p0[None]
        r1 = np.einsum("pfi,fi->pf", rel, e1)
        r2 = np.einsum("pfi,fi->pf", rel, e2)
        u = (g22 * r1 - g12 * r2) / det
        v = (g11 * r2 - g12 * r1) / det
        inside = (u >= 0) & (v >= 0) & (u + v <= 1)
        plane = np.abs(np.einsum("pfi,fi->pf", rel, mesh.normals))
        rim = np.minimum.reduce(
            [
                _segment_distance(chunk, p0, p1),
                _segment_distance(chunk, p1, p2),
                _segment_distance(chunk, p2, p0),
            ]
        )
        result[start : start + 256] = np.where(inside, plane, rim).min(axis=1)
    return result


def write_off(mesh: TriangleSurfaceMesh, path: str | Path) -> None:
    lines = ["OFF", f"{mesh.num_vertices} {mesh.num_triangles} {mesh.num_edges}"]
    lines += [" ".join(f"{x:.17g}" for x in vertex) for vertex in mesh.vertices]
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    Path(path).write_text("\n".join(lines) + "\n")
    logger.info(f"Mesh written to {path}")


def read_off(path: str | Path) -> TriangleSurfaceMesh:
    tokens = [
        line.split("#")[0].split()
        for line in Path(path).read_text().splitlines()
        if line.split("#")[0].strip()
    ]
    if not tokens or tokens[0] != ["OFF"]:
        raise MalformedMeshFile("Missing OFF header", path=str(path))
    try:
        num_vertices, num_faces = int(tokens[1][0]), int(tokens[1][1])
        vertices = np.array(tokens[2 : 2 + num_vertices], dtype=float)
        faces = np.array(
            [row[1:4] for row in tokens[2 + num_vertices : 2 + num_vertices + num_faces]],
            dtype=np.int64,
        )
    except (IndexError, ValueError) as exc:
        raise MalformedMeshFile(path=str(path), reason=str(exc))
    return build_mesh(vertices, faces)
