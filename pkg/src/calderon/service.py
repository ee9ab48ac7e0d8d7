import numpy as np
from scipy.linalg import cho_factor, cho_solve, lu_factor, lu_solve, svdvals
from scipy.sparse.linalg import gmres

from src.assembly.schemas import (
    GalerkinMatrix,
    ImpedanceKind,
    ImpedanceModel,
    PanelPairs,
    QuadratureConfig,
)
from src.assembly.service import (
    assemble_divmass,
    assemble_double_layer,
    assemble_impedance,
    assemble_mass,
    assemble_pairing,
    assemble_single_layer,
    classify_pairs,
)
from src.calderon.exceptions import DenseSizeExceeded, GMRESNotConverged, InvalidTolerance
from src.calderon.schemas import (
    BlockSystem,
    CalderonResidual,
    ConditionReport,
    SolverSettings,
    SolveResult,
)
from src.config import settings
from src.kernel.service import check_frequency
from src.logger import get_logger
from src.scattering.fields import dipole_fields
from src.scattering.schemas import PointDipole
from src.trace_space.schemas import RTSpace
from src.trace_space.service import interpolate_tangential, load_vector

logger = get_logger()


class SystemFactory:
    """Builds A(s) for one space and impedance model, reusing everything that does not depend on s."""

    def __init__(
        self,
        space: RTSpace,
        impedance: ImpedanceModel,
        quad: QuadratureConfig | None = None,
    ) -> None:
        self.space = space
        self.impedance = impedance
        self.quad = quad or QuadratureConfig()
        self._pairs: PanelPairs | None = None
        self._mass: GalerkinMatrix | None = None
        self._divmass: GalerkinMatrix | None = None
        self._pairing: GalerkinMatrix | None = None

    @property
    def pairs(self) -> PanelPairs:
        if self._pairs is None:
            self._pairs = classify_pairs(self.space, self.quad)
        return self._pairs

    @property
    def mass(self) -> GalerkinMatrix:
        if self._mass is None:
            self._mass = assemble_mass(self.space)
        return self._mass

    @property
    def divmass(self) -> GalerkinMatrix:
        if self._divmass is None:
            self._divmass = assemble_divmass(self.space)
        return self._divmass

    @property
    def pairing(self) -> GalerkinMatrix:
        if self._pairing is None:
            self._pairing = assemble_pairing(self.space)
        return self._pairing

    def warm_up(self) -> None:
        """Fill the caches before the factory is shared across worker threads."""
        _ = self.pairs, self.mass, self.divmass, self.pairing

    def layers(self, s: complex) -> tuple[np.ndarray, np.ndarray]:
        s = check_frequency(s)
        if s.imag < 0:
            single, double = self.layers(s.conjugate())
            return single.conj(), double.conj()
        single = assemble_single_layer(self.space, s, self.quad, self.pairs).matrix
        double = assemble_double_layer(self.space, s, self.quad, self.pairs).matrix
        return single, double

    def impedance_matrix(self, s: complex) -> np.ndarray:
        return assemble_impedance(
            self.space,
            s,
            self.impedance.kind,
            self.impedance.delta,
            mu_ratio=self.impedance.mu_ratio,
            eps_ratio=self.impedance.eps_ratio,
            mass=self.mass,
            divmass=self.divmass,
        ).matrix

    def build(self, s: complex) -> BlockSystem:
        s = check_frequency(s)
        single, double = self.layers(s)
        half_pairing = 0.5 * self.pairing.matrix
        system = BlockSystem(
            a11=-single + self.impedance_matrix(s),
            a12=double - half_pairing,
            a21=-double - half_pairing,
            a22=-single,
            frequency=s,
            impedance=self.impedance,
        )
        logger.debug(f"Block system built at s={s:.6g}")
        return system


def build_system(
    space: RTSpace,
    s: complex,
    kind: ImpedanceKind,
    delta: float,
    quad: QuadratureConfig | None = None,
) -> BlockSystem:
    return SystemFactory(space, ImpedanceModel(kind=kind, delta=delta), quad).build(s)


def solve(
    system: BlockSystem,
    rhs: np.ndarray,
    tol: float = 1e-8,
    max_iter: int = 1000,
    method: str = "gmres",
) -> SolveResult:
    if not 0 < tol <= 1e-2:
        raise InvalidTolerance(tol=tol)
    rhs = np.asarray(rhs, dtype=complex)
    rhs_norm = np.linalg.norm(rhs)
    if rhs_norm == 0:
        return SolveResult(solution=np.zeros_like(rhs), iterations=0, residual=0.0)

    matrix = system.matrix
    if method == "direct":
        solution = lu_solve(lu_factor(matrix), rhs)
        residual = np.linalg.norm(matrix @ solution - rhs) / rhs_norm
        return SolveResult(solution=solution, iterations=0, residual=float(residual))

    iterations = 0

    def count(_):
        nonlocal iterations
        iterations += 1

    # one cycle with restart = max_iter is unrestarted GMRES
    solution, info = gmres(
        matrix,
        rhs,
        rtol=tol,
        atol=0.0,
        restart=max_iter,
        maxiter=1,
        callback=count,
        callback_type="pr_norm",
    )
    residual = float(np.linalg.norm(matrix @ solution - rhs) / rhs_norm)
    if info != 0:
        logger.warning(
            f"GMRES stopped after {iterations} iterations at s={system.frequency:.6g} "
            f"with residual {residual:.3e}"
        )
        raise GMRESNotConverged(
            residual=residual, iterations=iterations, frequency=system.frequency
        )
    return SolveResult(solution=solution, iterations=iterations, residual=residual)


def solve_with(system: BlockSystem, rhs: np.ndarray, solver: SolverSettings) -> SolveResult:
    return solve(system, rhs, tol=solver.tol, max_iter=solver.max_iter, method=solver.method)


def condition_report(system: BlockSystem) -> ConditionReport:
    if system.dof_count > settings.max_dense_dofs:
        logger.warning(f"Condition report refused for {system.dof_count} dofs")
        raise DenseSizeExceeded(dofs=system.dof_count, limit=settings.max_dense_dofs)
    singular_values = svdvals(system.matrix)
    largest, smallest = float(singular_values[0]), float(singular_values[-1])
    return ConditionReport(
        condition=largest / smallest, norm=largest, inverse_norm=1.0 / smallest
    )


def calderon_matrix(
    space: RTSpace, s: complex, quad: QuadratureConfig | None = None
) -> np.ndarray:
    """Dense Galerkin matrix of C(s) = [[-V, K], [-K, -V]]."""
    factory = SystemFactory(space, ImpedanceModel(), quad)
    single, double = factory.layers(s)
    return np.block([[-single, double], [-double, -single]])


def calderon_identity_residual(
    space: RTSpace,
    s: complex,
    quad: QuadratureConfig | None = None,
    source: PointDipole | None = None,
) -> CalderonResidual:
    """Residual of C(s)(γ_T H, -γ_T E) = ½(γ_T E, γ_T H) for the field of an interior dipole.

    Traces enter through their edge-flux interpolants, whose divergence is the
    triangle mean of the trace divergence. The residual is measured in the dual
    norm of the discrete H(div) inner product, MASS + DIVMASS.
    """
    s = check_frequency(s)
    source = source or PointDipole()
    normals = space.mesh.normals

    def tangential_trace(index: int):
        def trace(points: np.ndarray) -> np.ndarray:
            field = dipole_fields(s, points, source)[index]
            return np.cross(field, normals[:, None, :])

        return trace

    def ambient(index: int):
        return lambda points: dipole_fields(s, points, source)[index]

    electric = interpolate_tangential(space, tangential_trace(0))
    magnetic = interpolate_tangential(space, tangential_trace(1))
    average = 0.5 * np.concatenate(
        [load_vector(space, ambient(0)), load_vector(space, ambient(1))]
    )
    residual = calderon_matrix(space, s, quad) @ np.concatenate([magnetic, -electric]) - average

    factor = cho_factor(assemble_mass(space).matrix + assemble_divmass(space).matrix)
    n = space.dof_count

    def dual_norm(vector: np.ndarray) -> float:
        blocks = vector.reshape(2, n).T
        return float(np.sqrt(np.real(np.sum(blocks.conj() * cho_solve(factor, blocks)))))

    absolute = dual_norm(residual)
    relative = absolute / dual_norm(average)
    logger.info(
        f"Calderón residual at h={space.mesh.mesh_width:.4f}: {relative:.3e} (relative)"
    )
    return CalderonResidual(
        absolute=absolute, relative=relative, mesh_width=space.mesh.mesh_width
    )
