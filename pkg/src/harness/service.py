try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError

from src.calderon.exceptions import DenseSizeExceeded
from src.calderon.service import SystemFactory, condition_report, solve_with
from src.config import settings
from src.cq.service import build_context, output_series, radau_tableau
from src.exceptions import ConfigError, DetailedError
from src.harness.exceptions import (
    ConfigFileNotFound,
    InvalidOverride,
    InvalidStudy,
    UnknownConfigKey,
)
from src.harness.report import (
    ReferenceCache,
    write_convergence,
    write_csv,
    write_manifest,
    write_observation,
)
from src.harness.schemas import (
    ConditionRow,
    ConvergenceReport,
    ConvergenceRow,
    MeshSpec,
    ScenarioConfig,
)
from src.logger import get_logger
from src.mesh.schemas import TriangleSurfaceMesh
from src.mesh.service import distance_to_surface, generate_icosphere, generate_torus, winding_number
from src.scattering.schemas import BoundaryDensities, FieldObservation
from src.scattering.service import evaluate_fields, solve_densities, total_fields
from src.trace_space.service import build_rt0
from src.utils import content_hash, parallel_map

logger = get_logger()


class RunResult(BaseModel):
    observation: FieldObservation
    densities: BoundaryDensities | None = None
    dof_count: int
    mesh_width: float

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


class TorusDemoResult(BaseModel):
    grid: np.ndarray
    mask: np.ndarray
    frames: list[int]
    times: np.ndarray
    electric: np.ndarray
    scattered: np.ndarray
    densities: BoundaryDensities

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


def _parse_value(text: str) -> Any:
    try:
        return tomllib.loads(f"value = {text}")["value"]
    except tomllib.TOMLDecodeError:
        return text


def apply_override(raw: dict, override: str) -> dict:
    """Set ``section.key=value`` in a raw config mapping; values use TOML literal syntax."""
    key, sep, value = override.partition("=")
    if not sep or not key.strip():
        raise InvalidOverride(override=override)
    *sections, leaf = key.strip().split(".")
    target = raw
    for section in sections:
        target = target.setdefault(section, {})
        if not isinstance(target, dict):
            raise InvalidOverride(override=override)
    target[leaf] = _parse_value(value.strip())
    return raw


def load_config(path: str | Path | None = None, overrides: list[str] | None = None) -> ScenarioConfig:
    raw: dict = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigFileNotFound(path=str(path))
        with path.open("rb") as handle:
            raw = tomllib.load(handle)
    for override in overrides or []:
        apply_override(raw, override)
    try:
        return ScenarioConfig.model_validate(raw)
    except ValidationError as exc:
        unknown = [".".join(map(str, error["loc"])) for error in exc.errors() if error["type"] == "extra_forbidden"]
        if unknown:
            logger.warning(f"Unknown configuration keys: {unknown}")
            raise UnknownConfigKey(keys=unknown)
        raise ConfigError("; ".join(f"{'.'.join(map(str, e['loc']))}: {e['msg']}" for e in exc.errors()))


def with_updates(config: ScenarioConfig, **sections: dict) -> ScenarioConfig:
    """Copy of the config with some section fields replaced, re-validated."""
    payload = config.model_dump()
    for section, values in sections.items():
        payload[section] = {**payload[section], **values}
    return ScenarioConfig.model_validate(payload)


def mesh_for(spec: MeshSpec, level: int | None = None) -> TriangleSurfaceMesh:
    """Sphere levels are icosphere refinements; torus levels double both resolutions."""
    level = spec.level if level is None else level
    if spec.shape == "sphere":
        return generate_icosphere(level, spec.radius)
    factor = 2**level
    return generate_torus(spec.major_radius, spec.minor_radius, spec.n_major * factor, spec.n_minor * factor)


def run_single(config: ScenarioConfig, keep_densities: bool = True) -> RunResult:
    mesh = mesh_for(config.mesh)
    space = build_rt0(mesh)
    context = build_context(radau_tableau(config.time.stages), config.time.steps, config.time.final_time)
    densities = solve_densities(
        space, context, config.impedance, config.wave, config.quadrature, config.solver
    )
    observation = evaluate_fields(space, context, densities, np.asarray(config.points))
    return RunResult(
        observation=observation,
        densities=densities if keep_densities else None,
        dof_count=space.dof_count,
        mesh_width=mesh.mesh_width,
    )


def _run_key(config: ScenarioConfig) -> str:
    physics = config.model_dump(mode="json", exclude={"study", "grid", "output"})
    return content_hash(physics)


def observe(config: ScenarioConfig) -> FieldObservation:
    """Point observation for a config, served from the reference cache when allowed."""
    cache = ReferenceCache(settings.cache_dir)
    key = _run_key(config)
    if config.output.use_cache and (cached := cache.load(key)) is not None:
        return cached
    observation = run_single(config, keep_densities=False).observation
    if config.output.use_cache:
        cache.store(key, observation)
    return observation


def field_error(observation: FieldObservation, reference: FieldObservation) -> float:
    """Max over output times and points of the Euclidean norm of the (E, H) error."""
    stride = (len(reference.times) - 1) // max(len(observation.times) - 1, 1)
    sampled = reference.times[::stride] if stride >= 1 else reference.times
    if sampled.shape != observation.times.shape or not np.allclose(sampled, observation.times):
        raise InvalidStudy("Reference times do not contain the observation times")
    difference = np.concatenate(
        [
            observation.electric - reference.electric[::stride],
            observation.magnetic - reference.magnetic[::stride],
        ],
        axis=-1,
    )
    return float(np.linalg.norm(difference, axis=-1).max())


def fitted_orders(errors: list[float]) -> list[float | None]:
    orders: list[float | None] = [None]
    for coarse, fine in zip(errors, errors[1:]):
        orders.append(float(np.log2(coarse / fine)) if coarse > 0 and fine > 0 else None)
    return orders


def _finish(config: ScenarioConfig, report: ConvergenceReport) -> ConvergenceReport:
    directory = Path(config.output.directory)
    written = write_convergence(directory, report)
    write_manifest(directory, report.study, [written], config)
    logger.info(
        f"{report.study}: errors {[f'{row.error:.3e}' for row in report.rows]}, orders {report.orders}"
    )
    return report


def run_time_convergence(config: ScenarioConfig) -> ConvergenceReport:
    ladder = sorted(config.study.steps_ladder)
    reference_steps = config.study.reference_steps
    if any(reference_steps % steps for steps in ladder) or reference_steps < 4 * ladder[-1]:
        raise InvalidStudy(
            "Reference steps must be a multiple of every ladder entry and at least 4x the largest",
            ladder=ladder,
            reference_steps=reference_steps,
        )
    try:
        reference = observe(with_updates(config, time={"steps": reference_steps}))
        errors = [
            field_error(observe(with_updates(config, time={"steps": steps})), reference)
            for steps in ladder
        ]
    except DetailedError as exc:
        logger.error(f"Time convergence study failed: {exc}")
        raise
    rows = [
        ConvergenceRow(parameter=steps, error=error, order=order)
        for steps, error, order in zip(ladder, errors, fitted_orders(errors))
    ]
    return _finish(
        config,
        ConvergenceReport(
            study="time_convergence",
            rows=rows,
            reference={"steps": reference_steps, "level": config.mesh.level},
            config=config.model_dump(mode="json"),
        ),
    )


def run_space_convergence(config: ScenarioConfig) -> ConvergenceReport:
    ladder = sorted(config.study.level_ladder)
    reference_level = config.study.reference_level
    if ladder[-1] > reference_level:
        raise InvalidStudy("Reference level must not be below the ladder", ladder=ladder, reference_level=reference_level)
    try:
        reference = observe(with_updates(config, mesh={"level": reference_level}))
        errors, widths = [], []
        for level in ladder:
            level_config = with_updates(config, mesh={"level": level})
            errors.append(field_error(observe(level_config), reference))
            widths.append(mesh_for(level_config.mesh).mesh_width)
    except DetailedError as exc:
        logger.error(f"Space convergence study failed: {exc}")
        raise
    rows = [
        ConvergenceRow(parameter=width, error=error, order=order)
        for width, error, order in zip(widths, errors, fitted_orders(errors))
    ]
    return _finish(
        config,
        ConvergenceReport(
            study="space_convergence",
            rows=rows,
            reference={"level": reference_level, "steps": config.time.steps},
            config=config.model_dump(mode="json"),
        ),
    )


def run_condition_sweep(config: ScenarioConfig) -> list[ConditionRow]:
    space = build_rt0(mesh_for(config.mesh))
    if space.dof_count > settings.max_dense_dofs:
        raise DenseSizeExceeded(dofs=space.dof_count, limit=settings.max_dense_dofs)
    context = build_context(radau_tableau(config.time.stages), config.time.steps, config.time.final_time)
    factory = SystemFactory(space, config.impedance, config.quadrature)
    factory.warm_up()

    def sweep(l: int) -> list[ConditionRow]:
        rows = []
        for stage, s in enumerate(context.frequencies[l]):
            system = factory.build(s)
            report = condition_report(system)
            rng = np.random.default_rng([l, stage])
            rhs = rng.standard_normal(2 * space.dof_count) + 1j * rng.standard_normal(2 * space.dof_count)
            try:
                result = solve_with(system, rhs / np.linalg.norm(rhs), config.solver)
            except DetailedError as exc:
                exc.context.update(l=l, stage=stage)
                raise
            rows.append(
                ConditionRow(
                    l=l,
                    stage=stage,
                    frequency_real=s.real,
                    frequency_imag=s.imag,
                    condition=report.condition,
                    norm=report.norm,
                    inverse_norm=report.inverse_norm,
                    iterations=result.iterations,
                )
            )
        return rows

    independent = [int(l) for l in context.independent_indices]
    computed = dict(zip(independent, parallel_map(sweep, independent)))
    rows: list[ConditionRow] = []
    for l in range(context.length):
        # A(conj s) = conj A(s): same singular values and GMRES history
        source = computed.get(l) or computed[context.length - l]
        rows.extend(
            row.model_copy(update={"l": l, "frequency_imag": row.frequency_imag if l in computed else -row.frequency_imag})
            for row in source
        )

    directory = Path(config.output.directory)
    written = write_csv(directory / "condition_sweep.csv", [row.model_dump() for row in rows])
    write_manifest(directory, "condition_sweep", [written], config)
    logger.info(
        f"Condition sweep: max cond {max(row.condition for row in rows):.3e}, "
        f"max iterations {max(row.iterations for row in rows)}"
    )
    return rows


def plane_grid(config: ScenarioConfig) -> np.ndarray:
    """Points ``(R, R, 3)`` on the x2 = 0 plane."""
    grid = config.grid
    x = np.linspace(*grid.x_range, grid.resolution)
    z = np.linspace(*grid.z_range, grid.resolution)
    xx, zz = np.meshgrid(x, z, indexing="ij")
    return np.stack([xx, np.zeros_like(xx), zz], axis=-1)


def run_torus_demo(config: ScenarioConfig) -> TorusDemoResult:
    mesh = mesh_for(config.mesh)
    space = build_rt0(mesh)
    context = build_context(radau_tableau(config.time.stages), config.time.steps, config.time.final_time)

    grid = plane_grid(config)
    flat = grid.reshape(-1, 3)
    clearance = max(config.grid.clearance, 0.1 * mesh.mesh_width) * 1.0001
    mask = (winding_number(mesh, flat) < 0.5) & (distance_to_surface(mesh, flat) >= clearance)
    if not mask.any():
        raise InvalidStudy("No grid point lies outside the scatterer", clearance=clearance)

    densities = solve_densities(space, context, config.impedance, config.wave, config.quadrature, config.solver)
    observation = evaluate_fields(space, context, densities, flat[mask])
    electric, _ = total_fields(config.wave, observation)
    frames = sorted({min(frame, context.steps) for frame in config.grid.frames})

    directory = Path(config.output.directory)
    field_rows = []
    valid_index = np.cumsum(mask) - 1
    for frame in frames:
        for index, point in enumerate(flat):
            row = {"frame": frame, "time": f"{observation.times[frame]:.12g}", "x": point[0], "z": point[2], "valid": int(mask[index])}
            values = electric[frame, valid_index[index]] if mask[index] else np.full(3, np.nan)
            for axis, value in zip("xyz", values):
                row[f"E{axis}"] = f"{value:.16e}"
            row["E_norm"] = f"{np.linalg.norm(values):.16e}"
            field_rows.append(row)
    density_rows = [
        {
            "time": f"{t:.12g}",
            "phi_norm": f"{np.linalg.norm(phi):.16e}",
            "psi_norm": f"{np.linalg.norm(psi):.16e}",
        }
        for t, phi, psi in zip(
            context.output_times,
            output_series(context, densities.phi),
            output_series(context, densities.psi),
        )
    ]
    outputs = [
        write_csv(directory / "torus_fields.csv", field_rows),
        write_csv(directory / "torus_densities.csv", density_rows),
    ]
    write_manifest(directory, "torus_demo", outputs, config)
    return TorusDemoResult(
        grid=grid,
        mask=mask.reshape(grid.shape[:2]),
        frames=frames,
        times=observation.times,
        electric=electric,
        scattered=observation.electric,
        densities=densities,
    )


def run_single_study(config: ScenarioConfig) -> RunResult:
    """single-run subcommand: one solve, point fields written to CSV."""
    result = run_single(config)
    directory = Path(config.output.directory)
    written = write_observation(directory / "single_run.csv", result.observation)
    write_manifest(directory, "single_run", [written], config)
    return result
