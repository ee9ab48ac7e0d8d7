import numpy as np
import pytest

from src.assembly.schemas import ImpedanceKind, ImpedanceModel
from src.assembly.service import assemble_double_layer, assemble_single_layer
from src.calderon.exceptions import DenseSizeExceeded, GMRESNotConverged, InvalidTolerance
from src.calderon.schemas import SolverSettings
from src.calderon.service import (
    SystemFactory,
    build_system,
    calderon_identity_residual,
    calderon_matrix,
    condition_report,
    solve,
    solve_with,
)
from src.config import settings
from src.mesh.service import generate_icosphere
from src.trace_space.service import build_rt0


@pytest.fixture(scope="module")
def factory1(space1):
    factory = SystemFactory(space1, ImpedanceModel(kind=ImpedanceKind.ABSORBING, delta=0.1))
    factory.warm_up()
    return factory


def _random_vector(rng, size):
    return rng.standard_normal(size) + 1j * rng.standard_normal(size)


def test_block_layout(factory1):
    s = 1.0 + 2.0j
    system = factory1.build(s)
    n = factory1.space.dof_count
    assert system.matrix.shape == (2 * n, 2 * n)
    pairing = factory1.pairing.matrix
    np.testing.assert_allclose(system.a11 - system.a22, factory1.impedance_matrix(s))
    np.testing.assert_allclose(system.a12 + system.a21, -pairing, atol=1e-14)


def test_conjugate_frequency_shortcut(space0):
    factory = SystemFactory(space0, ImpedanceModel())
    s = 1.5 + 4.0j
    single, double = factory.layers(np.conj(s))
    np.testing.assert_allclose(single, assemble_single_layer(space0, np.conj(s)).matrix, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(double, assemble_double_layer(space0, np.conj(s)).matrix, rtol=1e-12, atol=1e-14)
    built = factory.build(np.conj(s))
    np.testing.assert_allclose(built.matrix, factory.build(s).conjugate().matrix, rtol=1e-12, atol=1e-14)


def test_build_system_matches_factory(space0):
    direct = build_system(space0, 2.0, ImpedanceKind.THIN_LAYER, 0.1)
    via_factory = SystemFactory(space0, ImpedanceModel(kind=ImpedanceKind.THIN_LAYER, delta=0.1)).build(2.0)
    np.testing.assert_allclose(direct.matrix, via_factory.matrix)


@pytest.mark.parametrize("s", [1.0, 1.0 + 3.0j, 0.5 + 8.0j])
@pytest.mark.parametrize("kind", list(ImpedanceKind))
@pytest.mark.parametrize("delta", [0.1, 10.0])
def test_system_is_coercive(space1, rng, s, kind, delta):
    matrix = SystemFactory(space1, ImpedanceModel(kind=kind, delta=delta)).build(s).matrix
    vectors = rng.standard_normal((200, matrix.shape[0])) + 1j * rng.standard_normal((200, matrix.shape[0]))
    forms = np.einsum("vi,ij,vj->v", vectors.conj(), matrix, vectors)
    assert forms.real.min() > 0


def test_gmres_and_direct_agree(factory1, rng):
    system = factory1.build(1.0 + 1.0j)
    rhs = _random_vector(rng, 2 * system.dof_count)
    iterative = solve(system, rhs, tol=1e-10)
    direct = solve(system, rhs, method="direct")
    assert iterative.iterations > 0
    assert iterative.residual <= 2e-10
    difference = np.linalg.norm(iterative.solution - direct.solution)
    assert difference <= 1e-8 * np.linalg.norm(direct.solution)


def test_zero_rhs_needs_no_iterations(factory1):
    result = solve(factory1.build(2.0), np.zeros(2 * factory1.space.dof_count))
    assert result.iterations == 0
    assert not np.any(result.solution)


@pytest.mark.parametrize("tol", [0.0, -1e-8, 0.1])
def test_solve_rejects_bad_tolerance(factory1, tol):
    with pytest.raises(InvalidTolerance):
        solve(factory1.build(2.0), np.ones(2 * factory1.space.dof_count), tol=tol)


def test_gmres_failure_reports_residual(factory1, rng):
    system = factory1.build(0.5 + 8.0j)
    with pytest.raises(GMRESNotConverged) as exc:
        solve(system, _random_vector(rng, 2 * system.dof_count), tol=1e-12, max_iter=3)
    assert exc.value.context["residual"] > 1e-12
    assert exc.value.context["frequency"] == 0.5 + 8.0j
    assert exc.value.EXIT_CODE == 6


def test_solve_with_settings(factory1, rng):
    system = factory1.build(3.0)
    rhs = _random_vector(rng, 2 * system.dof_count)
    result = solve_with(system, rhs, SolverSettings(method="direct"))
    np.testing.assert_allclose(system.matrix @ result.solution, rhs, atol=1e-10 * np.abs(rhs).max())


def test_condition_report(factory1):
    report = condition_report(factory1.build(1.0 + 1.0j))
    assert report.condition == pytest.approx(report.norm * report.inverse_norm)
    assert np.isfinite(report.condition) and report.condition >= 1.0


def test_condition_report_respects_size_limit(factory1, monkeypatch):
    monkeypatch.setattr(settings, "max_dense_dofs", 10)
    with pytest.raises(DenseSizeExceeded):
        condition_report(factory1.build(1.0))


def test_calderon_matrix_blocks(space0):
    matrix = calderon_matrix(space0, 1.0 + 1.0j)
    n = space0.dof_count
    np.testing.assert_allclose(matrix[:n, :n], matrix[n:, n:])
    np.testing.assert_allclose(matrix[:n, n:], -matrix[n:, :n])


def test_calderon_residual_shrinks_under_refinement():
    coarse = calderon_identity_residual(build_rt0(generate_icosphere(1)), 1.0 + 1.0j)
    fine = calderon_identity_residual(build_rt0(generate_icosphere(2)), 1.0 + 1.0j)
    assert fine.relative < coarse.relative
    assert coarse.relative / fine.relative >= 2.0
    assert fine.mesh_width < coarse.mesh_width


@pytest.mark.slow
def test_calderon_residual_shrinks_on_finest_level():
    medium = calderon_identity_residual(build_rt0(generate_icosphere(2)), 1.0 + 1.0j)
    fine = calderon_identity_residual(build_rt0(generate_icosphere(3)), 1.0 + 1.0j)
    assert medium.relative / fine.relative >= 2.0


def test_vanishing_layer_leaves_the_single_layer(space0):
    s = 1.0 + 1.0j
    system = build_system(space0, s, ImpedanceKind.THIN_LAYER, 1e-12)
    single = assemble_single_layer(space0, s).matrix
    assert np.linalg.norm(system.a11 + single) <= 1e-9 * np.linalg.norm(single)
    np.testing.assert_allclose(system.a22, -single, rtol=1e-13, atol=0)
