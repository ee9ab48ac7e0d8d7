import numpy as np
from scipy import sparse

from src.assembly.schemas import ImpedanceModel, QuadratureConfig
from src.assembly.service import impedance_symbols
from src.calderon.schemas import SolverSettings
from src.calderon.service import SystemFactory, solve_with
from src.cq.schemas import CQContext, FrequencyData
from src.cq.service import (
    apply_transfer,
    forward_transform,
    inverse_transform,
    output_series,
    solve_frequencies,
)
from src.kernel.service import check_frequency, green, green_grad
from src.logger import get_logger
from src.mesh.service import distance_to_surface, winding_number
from src.scattering.exceptions import PointInsideScatterer, PointOnBoundary
from src.scattering.fields import plane_wave_electric_rate, plane_wave_fields
from src.scattering.schemas import (
    BoundaryDensities,
    FieldObservation,
    IncidentTraces,
    IncidentWave,
)
from src.trace_space.schemas import QuadratureSample, RTSpace
from src.trace_space.service import sample_basis

logger = get_logger()

CLEARANCE = 0.1
POINT_CHUNK = 32


def incident_traces(
    wave: IncidentWave, space: RTSpace, context: CQContext, order: int = 4
) -> IncidentTraces:
    """Load vectors of E^inc, H^inc × ν and ν·∂_t E^inc at every stage time."""
    sample = sample_basis(space, order)
    normals = space.mesh.normals[:, None, :]
    times = context.stage_times
    shape = times.shape + (space.dof_count,)
    electric, magnetic, divergence = np.zeros(shape), np.zeros(shape), np.zeros(shape)
    for n, i in np.ndindex(times.shape):
        e_field, h_field = plane_wave_fields(wave, times[n, i], sample.points)
        rate = plane_wave_electric_rate(wave, times[n, i], sample.points)
        flux = np.einsum("fqi,fqi->fq", rate, np.broadcast_to(normals, rate.shape))
        local_e = np.einsum("fkqi,fqi,fq->fk", sample.values, e_field, sample.weights)
        local_h = np.einsum(
            "fkqi,fqi,fq->fk", sample.values, np.cross(h_field, normals), sample.weights
        )
        local_d = sample.divergences * (flux * sample.weights).sum(axis=1)[:, None]
        for target, local in ((electric, local_e), (magnetic, local_h), (divergence, local_d)):
            np.add.at(target[n, i], sample.dofs.ravel(), local.ravel())
    return IncidentTraces(electric=electric, magnetic=magnetic, divergence=divergence)


def build_rhs(
    context: CQContext, traces: IncidentTraces, impedance: ImpedanceModel | None
) -> FrequencyData:
    """ĝ(s) = -(e + Z(s)-weighted magnetic data) in the first block, zero in the second."""
    electric = forward_transform(context, traces.electric).values
    magnetic = forward_transform(context, traces.magnetic).values
    divergence = forward_transform(context, traces.divergence).values
    first = -electric
    if impedance is not None and impedance.delta > 0:
        factors = np.array(
            [
                impedance_symbols(
                    s, impedance.kind, impedance.delta, impedance.mu_ratio, impedance.eps_ratio
                )
                for s in context.frequencies.ravel()
            ]
        ).reshape(context.frequencies.shape + (2,))
        first = first - factors[..., 0, None] * magnetic - factors[..., 1, None] * divergence
    values = np.concatenate([first, np.zeros_like(first)], axis=-1)
    return FrequencyData(values=values, real_signal=True)


class _RecordingSolver:
    """Solves at one contour frequency and files the iteration count under that frequency."""

    def __init__(
        self, factory: SystemFactory, s: complex, solver: SolverSettings, log: dict[complex, int]
    ):
        self.frequency = complex(s)
        self.system = factory.build(s)
        self.solver = solver
        self.log = log

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        result = solve_with(self.system, rhs, self.solver)
        self.log[self.frequency] = result.iterations
        return result.solution


def solve_densities(
    space: RTSpace,
    context: CQContext,
    impedance: ImpedanceModel,
    wave: IncidentWave,
    quad: QuadratureConfig | None = None,
    solver: SolverSettings | None = None,
) -> BoundaryDensities:
    solver = solver or SolverSettings()
    rhs = build_rhs(context, incident_traces(wave, space, context), impedance)
    factory = SystemFactory(space, impedance, quad)
    factory.warm_up()
    log: dict[complex, int] = {}

    solved = solve_frequencies(
        context, lambda s: _RecordingSolver(factory, s, solver, log), rhs
    )
    # contour order: independent indices, stages within each index
    solved_at = context.frequencies[context.independent_indices].ravel()
    iterations = [log[complex(s)] for s in solved_at if complex(s) in log]
    series = inverse_transform(context, FrequencyData(values=solved.values, real_signal=False))
    scale = np.abs(series.real).max()
    residue = float(np.abs(series.imag).max() / scale) if scale > 0 else 0.0
    n = space.dof_count
    logger.info(
        f"Densities solved: {len(iterations)} frequency solves, "
        f"max GMRES iterations {max(iterations, default=0)}, imaginary residue {residue:.2e}"
    )
    return BoundaryDensities(
        phi=series.real[..., :n],
        psi=series.real[..., n:],
        imaginary_residue=residue,
        iterations=iterations,
    )


def _scatter_matrix(space: RTSpace) -> sparse.csr_matrix:
    rows = np.arange(3 * space.mesh.num_triangles)
    return sparse.csr_matrix(
        (np.ones(rows.size), (rows, space.dofs.ravel())),
        shape=(rows.size, space.dof_count),
    )


def potential_matrices(
    space: RTSpace, s: complex, points: np.ndarray, order: int = 4
) -> tuple[np.ndarray, np.ndarray]:
    """Matrices ``(P, 3, dofs)`` of the single-layer S(s) and double-layer D(s) potentials.

    S(s)φ(x) = -s ∫ G φ + s⁻¹ ∫ ∇_x G div φ and D(s)φ(x) = ∫ ∇_x G × φ.
    """
    s = check_frequency(s)
    sample = sample_basis(space, order)
    points = np.atleast_2d(points)
    scatter = _scatter_matrix(space)
    blocks = [
        _potential_block(space, s, points[start : start + POINT_CHUNK], sample, scatter)
        for start in range(0, points.shape[0], POINT_CHUNK)
    ]
    return (
        np.concatenate([single for single, _ in blocks]),
        np.concatenate([double for _, double in blocks]),
    )


def _potential_block(
    space: RTSpace,
    s: complex,
    points: np.ndarray,
    sample: QuadratureSample,
    scatter: sparse.csr_matrix,
) -> tuple[np.ndarray, np.ndarray]:
    separation = points[:, None, None, :] - sample.points[None]
    kernel = green(s, separation) * sample.weights[None]
    gradient = green_grad(s, separation) * sample.weights[None, :, :, None]

    single = -s * np.einsum("pfq,fkqi->pifk", kernel, sample.values) + np.einsum(
        "pfqi,fk->pifk", gradient, sample.divergences
    ) / s
    double = np.cross(gradient[:, :, None, :, :], sample.values[None]).sum(axis=3)
    double = double.transpose(0, 3, 1, 2)

    num_points = points.shape[0]

    def assemble(local: np.ndarray) -> np.ndarray:
        flat = local.reshape(num_points * 3, -1)
        return np.asarray((scatter.T @ flat.T).T).reshape(num_points, 3, space.dof_count)

    return assemble(single), assemble(double)


def check_points(space: RTSpace, points: np.ndarray) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    distances = distance_to_surface(space.mesh, points)
    limit = CLEARANCE * space.mesh.mesh_width
    if np.any(distances < limit):
        logger.warning(f"Evaluation point within {limit:.3g} of the surface")
        raise PointOnBoundary(min_distance=float(distances.min()), clearance=limit)
    inside = winding_number(space.mesh, points) > 0.5
    if np.any(inside):
        logger.warning(f"{int(inside.sum())} evaluation points inside the scatterer")
        raise PointInsideScatterer(points=points[inside].tolist())
    return distances


def evaluate_fields(
    space: RTSpace,
    context: CQContext,
    densities: BoundaryDensities,
    points: np.ndarray,
    order: int = 4,
) -> FieldObservation:
    """E = -S φ + D ψ and H = -D φ - S ψ at the scheme's output times."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    distances = check_points(space, points)
    n = space.dof_count

    def transfer(s: complex, stacked: np.ndarray) -> np.ndarray:
        single, double = potential_matrices(space, s, points, order)
        phi, psi = stacked[:n], stacked[n:]
        electric = -single @ phi + double @ psi
        magnetic = -double @ phi - single @ psi
        return np.stack([electric, magnetic])

    stacked = np.concatenate([densities.phi, densities.psi], axis=-1)
    data = forward_transform(context, stacked)
    series = inverse_transform(context, apply_transfer(context, transfer, data))
    fields = output_series(context, series)
    return FieldObservation(
        points=points,
        distances=distances,
        times=context.output_times,
        electric=fields[:, 0],
        magnetic=fields[:, 1],
    )


def total_fields(
    wave: IncidentWave, observation: FieldObservation
) -> tuple[np.ndarray, np.ndarray]:
    incident_e, incident_h = plane_wave_fields(wave, observation.times, observation.points)
    return observation.electric + incident_e, observation.magnetic + incident_h
