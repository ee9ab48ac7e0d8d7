from typing import Literal

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

from src.assembly.exceptions import UnknownImpedanceKind
from src.assembly.quadrature import PairKind, sauter_schwab_rule, triangle_rule
from src.assembly.schemas import (
    GalerkinMatrix,
    ImpedanceKind,
    OperatorTag,
    PanelPairs,
    QuadratureConfig,
)
from src.config import settings
from src.kernel.service import check_frequency, green, green_grad
from src.logger import get_logger
from src.trace_space.schemas import QuadratureSample, RTSpace
from src.trace_space.service import (
    basis_at_points,
    divergence_mass_matrix,
    mass_matrix,
    sample_basis,
    scatter_local_matrix,
)
from src.utils import parallel_map

logger = get_logger()

LayerOperator = Literal["single", "double"]

PAIR_BATCH = 256

LEVI_CIVITA = np.zeros((3, 3, 3))
LEVI_CIVITA[0, 1, 2] = LEVI_CIVITA[1, 2, 0] = LEVI_CIVITA[2, 0, 1] = 1.0
LEVI_CIVITA[0, 2, 1] = LEVI_CIVITA[2, 1, 0] = LEVI_CIVITA[1, 0, 2] = -1.0


def classify_pairs(space: RTSpace, quad: QuadratureConfig) -> PanelPairs:
    """Sort triangle pairs into coincident, edge-adjacent, vertex-adjacent and near-field sets."""
    mesh = space.mesh
    num_triangles = mesh.num_triangles
    incidence = sparse.csr_matrix(
        (
            np.ones(3 * num_triangles),
            (np.repeat(np.arange(num_triangles), 3), mesh.triangles.ravel()),
        ),
        shape=(num_triangles, mesh.num_vertices),
    )
    shared = (incidence @ incidence.T).tocsr()
    coo = shared.tocoo()
    upper = coo.row < coo.col
    edge = np.stack([coo.row, coo.col], axis=1)[upper & (coo.data == 2)]
    vertex = np.stack([coo.row, coo.col], axis=1)[upper & (coo.data == 1)]
    identical = np.repeat(np.arange(num_triangles)[:, None], 2, axis=1)

    near = np.empty((0, 2), dtype=np.int64)
    if quad.near_threshold > 0:
        diameters = mesh.triangle_diameters
        tree = cKDTree(mesh.centroids)
        candidates = tree.query_pairs(quad.near_threshold * diameters.max(), output_type="ndarray")
        if len(candidates):
            i, j = candidates[:, 0], candidates[:, 1]
            distance = np.linalg.norm(mesh.centroids[i] - mesh.centroids[j], axis=1)
            close = distance < quad.near_threshold * np.maximum(diameters[i], diameters[j])
            adjacent = np.asarray(shared[i, j]).ravel() > 0
            near = np.sort(candidates[close & ~adjacent], axis=1)

    listed = np.concatenate([identical, edge, vertex, near])
    rows = np.concatenate([listed[:, 0], listed[:, 1]])
    cols = np.concatenate([listed[:, 1], listed[:, 0]])
    special = sparse.csr_matrix(
        (np.ones(rows.size, dtype=bool), (rows, cols)), shape=(num_triangles, num_triangles)
    )
    logger.debug(
        f"Panel pairs: {len(edge)} edge, {len(vertex)} vertex, {len(near)} near-field"
    )
    return PanelPairs(identical=identical, edge=edge, vertex=vertex, near=near, special=special)


def _pair_local(
    space: RTSpace,
    s: complex,
    operator: LayerOperator,
    test: np.ndarray,
    trial: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray,
) -> np.ndarray:
    """Element matrices ``(P, 3, 3)`` for pairs evaluated at matched points ``(P, Q, 3)``."""
    phi_x = basis_at_points(space, test, x)
    phi_y = basis_at_points(space, trial, y)
    w = weights * (space.mesh.areas[test] * space.mesh.areas[trial])[:, None]
    if operator == "single":
        kernel = green(s, x - y) * w
        vector = np.einsum("pq,pkqi,plqi->pkl", kernel, phi_x, phi_y)
        scalar = (
            kernel.sum(axis=1)[:, None, None]
            * space.divergences[test][:, :, None]
            * space.divergences[trial][:, None, :]
        )
        return -s * vector - scalar / s
    gradient = green_grad(s, x - y) * w[..., None]
    crossed = np.cross(gradient[:, None, :, :], phi_y)
    return np.einsum("pkqi,plqi->pkl", phi_x, crossed)


def _aligned_triangles(space: RTSpace, pairs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reorder vertices so shared ones lead in both triangles, in the same order."""
    test = space.mesh.triangles[pairs[:, 0]]
    trial = space.mesh.triangles[pairs[:, 1]]
    shared = (test[:, :, None] == trial[:, None, :]).any(axis=2)
    test = np.take_along_axis(test, np.argsort(~shared, axis=1, kind="stable"), axis=1)
    match = trial[:, :, None] == test[:, None, :]
    key = np.where(match.any(axis=2), match.argmax(axis=2), 3 + np.arange(3))
    trial = np.take_along_axis(trial, np.argsort(key, axis=1, kind="stable"), axis=1)
    return test, trial


def _singular_points(
    space: RTSpace, pairs: np.ndarray, kind: PairKind, order: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    test_bary, trial_bary, weights = sauter_schwab_rule(kind, order)
    test, trial = _aligned_triangles(space, pairs)
    x = np.einsum("qk,pki->pqi", test_bary, space.mesh.vertices[test])
    y = np.einsum("qk,pki->pqi", trial_bary, space.mesh.vertices[trial])
    return x, y, weights


def _tensor_points(
    space: RTSpace, pairs: np.ndarray, order: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    bary, weights = triangle_rule(order)
    n = len(weights)
    corners = space.mesh.vertices[space.mesh.triangles]
    x = np.einsum("qk,pki->pqi", np.repeat(bary, n, axis=0), corners[pairs[:, 0]])
    y = np.einsum("qk,pki->pqi", np.tile(bary, (n, 1)), corners[pairs[:, 1]])
    return x, y, np.outer(weights, weights).ravel()


def _pair_kind(space: RTSpace, test: int, trial: int) -> PairKind | None:
    if test == trial:
        return "identical"
    common = np.intersect1d(space.mesh.triangles[test], space.mesh.triangles[trial]).size
    return {2: "edge", 1: "vertex"}.get(common)


def _panel_pair(
    space: RTSpace, s: complex, operator: LayerOperator, test: int, trial: int, order: int
) -> np.ndarray:
    s = check_frequency(s)
    pair = np.array([[test, trial]])
    kind = _pair_kind(space, test, trial)
    if kind is None:
        x, y, weights = _tensor_points(space, pair, order)
    else:
        x, y, weights = _singular_points(space, pair, kind, order)
    # local functions follow the triangles' own vertex order regardless of alignment
    return _pair_local(space, s, operator, pair[:, 0], pair[:, 1], x, y, weights)[0]


def panel_pair_single_layer(
    space: RTSpace, s: complex, test: int, trial: int, order: int = 8
) -> np.ndarray:
    """Element matrix of V(s) between two triangles, as a standalone reference computation."""
    return _panel_pair(space, s, "single", test, trial, order)


def panel_pair_double_layer(
    space: RTSpace, s: complex, test: int, trial: int, order: int = 8
) -> np.ndarray:
    return _panel_pair(space, s, "double", test, trial, order)


def _scatter_pairs(
    space: RTSpace, matrix: np.ndarray, pairs: np.ndarray, local: np.ndarray
) -> None:
    test, trial = space.dofs[pairs[:, 0]], space.dofs[pairs[:, 1]]
    np.add.at(matrix, (test[:, :, None], trial[:, None, :]), local)
    mirrored = pairs[:, 0] != pairs[:, 1]
    # both kernels are symmetric under exchanging test and trial
    np.add.at(
        matrix,
        (trial[mirrored][:, :, None], test[mirrored][:, None, :]),
        local[mirrored].transpose(0, 2, 1),
    )


def _regular_block(
    space: RTSpace,
    s: complex,
    operator: LayerOperator,
    rows: np.ndarray,
    sample: QuadratureSample,
    special: sparse.csr_matrix,
) -> np.ndarray:
    skip = special[rows].toarray()
    separation = sample.points[rows][:, None, :, None, :] - sample.points[None, :, None, :, :]
    separation[skip] = 1.0
    weights = (
        sample.weights[rows][:, None, :, None]
        * sample.weights[None, :, None, :]
        * ~skip[:, :, None, None]
    )
    phi_x = sample.values[rows]
    if operator == "single":
        kernel = green(s, separation) * weights
        partial = np.einsum("cfpq,flqi->cfpli", kernel, sample.values)
        vector = np.einsum("ckpi,cfpli->cfkl", phi_x, partial)
        scalar = (
            kernel.sum(axis=(2, 3))[:, :, None, None]
            * sample.divergences[rows][:, None, :, None]
            * sample.divergences[None, :, None, :]
        )
        return -s * vector - scalar / s
    gradient = green_grad(s, separation) * weights[..., None]
    partial = np.einsum("cfpqj,flqk->cfpljk", gradient, sample.values)
    crossed = np.einsum("ijk,cfpljk->cfpli", LEVI_CIVITA, partial)
    return np.einsum("ckpi,cfpli->cfkl", phi_x, crossed)


def _assemble_layer(
    space: RTSpace,
    s: complex,
    operator: LayerOperator,
    quad: QuadratureConfig | None,
    pairs: PanelPairs | None,
) -> np.ndarray:
    s = check_frequency(s)
    quad = quad or QuadratureConfig()
    pairs = pairs or classify_pairs(space, quad)
    n = space.dof_count
    num_triangles = space.mesh.num_triangles
    matrix = np.zeros((n, n), dtype=complex)

    sample = sample_basis(space, quad.regular_order)
    chunk = settings.assembly_chunk_size
    chunks = [np.arange(start, min(start + chunk, num_triangles)) for start in range(0, num_triangles, chunk)]
    group = max(1, settings.workers)
    for start in range(0, len(chunks), group):
        batch = chunks[start : start + group]
        blocks = parallel_map(
            lambda rows: _regular_block(space, s, operator, rows, sample, pairs.special), batch
        )
        for rows, block in zip(batch, blocks):
            np.add.at(
                matrix,
                (space.dofs[rows][:, None, :, None], space.dofs[None, :, None, :]),
                block,
            )

    special_sets: list[tuple[np.ndarray, PairKind | None]] = [
        (pairs.edge, "edge"),
        (pairs.vertex, "vertex"),
        (pairs.near, None),
    ]
    if operator == "single":
        # ∇G is in-plane and orthogonal to φ×φ on a flat panel, so K has no coincident part
        special_sets.insert(0, (pairs.identical, "identical"))
    for pair_set, kind in special_sets:
        for start in range(0, len(pair_set), PAIR_BATCH):
            batch = pair_set[start : start + PAIR_BATCH]
            if kind is None:
                x, y, weights = _tensor_points(space, batch, quad.near_order)
            else:
                x, y, weights = _singular_points(space, batch, kind, quad.singular_order)
            local = _pair_local(space, s, operator, batch[:, 0], batch[:, 1], x, y, weights)
            _scatter_pairs(space, matrix, batch, local)
    return matrix


def assemble_single_layer(
    space: RTSpace,
    s: complex,
    quad: QuadratureConfig | None = None,
    pairs: PanelPairs | None = None,
) -> GalerkinMatrix:
    """V_ij = -s ∬ G φ_i·φ_j - s⁻¹ ∬ G div φ_i div φ_j."""
    matrix = _assemble_layer(space, s, "single", quad, pairs)
    logger.debug(f"Assembled single layer at s={complex(s):.6g} ({space.dof_count} dofs)")
    return GalerkinMatrix(matrix=matrix, tag=OperatorTag.SINGLE_LAYER, frequency=complex(s))


def assemble_double_layer(
    space: RTSpace,
    s: complex,
    quad: QuadratureConfig | None = None,
    pairs: PanelPairs | None = None,
) -> GalerkinMatrix:
    """K_ij = ∬ ∇_x G(x - y) · (φ_j(y) × φ_i(x)); symmetric in i and j."""
    matrix = _assemble_layer(space, s, "double", quad, pairs)
    logger.debug(f"Assembled double layer at s={complex(s):.6g} ({space.dof_count} dofs)")
    return GalerkinMatrix(matrix=matrix, tag=OperatorTag.DOUBLE_LAYER, frequency=complex(s))


def assemble_pairing(space: RTSpace) -> GalerkinMatrix:
    """P_ij = ∫ (φ_i × ν) · φ_j, real and antisymmetric."""
    sample = sample_basis(space, order=3)
    rotated = np.cross(sample.values, space.mesh.normals[:, None, None, :])
    local = np.einsum("fkqi,flqi,fq->fkl", rotated, sample.values, sample.weights)
    return GalerkinMatrix(matrix=scatter_local_matrix(space, local), tag=OperatorTag.PAIRING)


def assemble_mass(space: RTSpace) -> GalerkinMatrix:
    return GalerkinMatrix(matrix=mass_matrix(space), tag=OperatorTag.MASS)


def assemble_divmass(space: RTSpace) -> GalerkinMatrix:
    return GalerkinMatrix(matrix=divergence_mass_matrix(space), tag=OperatorTag.DIVMASS)


def impedance_symbols(
    s: complex, kind: ImpedanceKind, delta: float, mu_ratio: float = 1.0, eps_ratio: float = 1.0
) -> tuple[complex, complex]:
    """Scalar factors multiplying MASS and DIVMASS in the weak impedance form."""
    s = complex(s)
    if kind == ImpedanceKind.THIN_LAYER:
        return delta * mu_ratio * s, delta / (eps_ratio * s)
    if kind == ImpedanceKind.ABSORBING:
        return delta * np.sqrt(s), 0.0
    logger.warning(f"Unknown impedance kind {kind!r}")
    raise UnknownImpedanceKind(kind=kind)


def assemble_impedance(
    space: RTSpace,
    s: complex,
    kind: ImpedanceKind,
    delta: float,
    *,
    mu_ratio: float = 1.0,
    eps_ratio: float = 1.0,
    mass: GalerkinMatrix | None = None,
    divmass: GalerkinMatrix | None = None,
) -> GalerkinMatrix:
    s = check_frequency(s)
    mass_factor, div_factor = impedance_symbols(s, kind, delta, mu_ratio, eps_ratio)
    mass = mass or assemble_mass(space)
    matrix = mass_factor * mass.matrix
    if div_factor != 0:
        divmass = divmass or assemble_divmass(space)
        matrix = matrix + div_factor * divmass.matrix
    return GalerkinMatrix(matrix=matrix.astype(complex), tag=OperatorTag.IMPEDANCE, frequency=s)
