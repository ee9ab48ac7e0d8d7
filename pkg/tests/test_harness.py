import csv
import json
from pathlib import Path

import numpy as np
import pytest

from src.calderon.exceptions import DenseSizeExceeded
from src.config import settings
from src.exceptions import ConfigError
from src.harness.cli import _shortcuts
from src.harness.exceptions import (
    ConfigFileNotFound,
    InvalidOverride,
    InvalidStudy,
    UnknownConfigKey,
)
from src.harness.report import ReferenceCache, write_manifest
from src.harness.schemas import ScenarioConfig
from src.harness.service import (
    field_error,
    fitted_orders,
    load_config,
    mesh_for,
    run_condition_sweep,
    run_space_convergence,
    run_time_convergence,
    run_torus_demo,
    with_updates,
)
from src.main import build_parser, main
from src.scattering.exceptions import InvalidPolarization
from src.scattering.schemas import FieldObservation

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

QUICK = ["mesh.level=0", "time.steps=8", "time.final_time=2.0"]


def _observation(times, electric, magnetic=None):
    electric = np.asarray(electric, dtype=float)
    return FieldObservation(
        points=np.array([[2.0, 0.0, 0.0]]),
        distances=np.array([1.0]),
        times=np.asarray(times, dtype=float),
        electric=electric,
        magnetic=np.zeros_like(electric) if magnetic is None else magnetic,
    )


def _read_rows(path):
    with open(path, newline="", encoding="utf-8") as handle:
        return list(csv.DictReader(handle))


def test_default_config():
    config = load_config()
    assert config.mesh.shape == "sphere"
    assert config.points == [(2.0, 0.0, 0.0)]
    assert config.impedance.delta > 0
    assert config.solver.tol == 1e-8


def test_config_file_with_overrides(tmp_path):
    path = tmp_path / "scenario.toml"
    path.write_text('[time]\nstages = 3\nsteps = 32\n\n[impedance]\nkind = "thin_layer"\n')
    config = load_config(path, ["time.steps=16", "impedance.delta=10"])
    assert config.time.stages == 3
    assert config.time.steps == 16
    assert config.impedance.kind == "thin_layer"
    assert config.impedance.delta == 10.0


def test_bare_string_override():
    assert load_config(overrides=["impedance.kind=thin_layer"]).impedance.kind == "thin_layer"


@pytest.mark.parametrize("name", sorted(path.name for path in CONFIGS.glob("*.toml")))
def test_shipped_configs_are_valid(name):
    assert isinstance(load_config(CONFIGS / name), ScenarioConfig)


@pytest.mark.parametrize("name", ["torus_demo.toml", "torus_condition_sweep.toml"])
def test_torus_configs_use_absorbing_layer(name):
    config = load_config(CONFIGS / name)
    assert config.mesh.shape == "torus"
    assert config.impedance.kind == "absorbing"
    assert config.impedance.delta == 0.1
    assert config.time.stages == 3
    assert config.time.final_time == 4.0


def test_unknown_key_is_rejected():
    with pytest.raises(UnknownConfigKey) as exc:
        load_config(overrides=["mesh.colour=1"])
    assert exc.value.context["keys"] == ["mesh.colour"]
    assert exc.value.EXIT_CODE == 3


@pytest.mark.parametrize(
    "overrides",
    [["time.steps"], ["=3"], ["points=[[3.0, 0.0, 0.0]]", "points.x=1"]],
)
def test_malformed_override(overrides):
    with pytest.raises(InvalidOverride):
        load_config(overrides=overrides)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigFileNotFound):
        load_config(tmp_path / "missing.toml")


def test_layer_thickness_must_be_positive():
    with pytest.raises(ConfigError) as exc:
        load_config(overrides=["impedance.delta=0"])
    assert "impedance.delta must be positive" in str(exc.value)


def test_invalid_polarization_keeps_its_domain_error():
    with pytest.raises(InvalidPolarization) as exc:
        load_config(overrides=["wave.polarization=[0.0, 0.0, 1.0]"])
    assert exc.value.EXIT_CODE == 2


def test_with_updates_revalidates():
    config = load_config()
    updated = with_updates(config, time={"steps": 128})
    assert updated.time.steps == 128
    assert updated.time.stages == config.time.stages
    assert config.time.steps == 64


def test_cli_shortcuts_follow_set_values():
    args = build_parser().parse_args(
        ["torus-demo", "--set", "time.stages=3", "--steps", "8", "--kind", "thin_layer"]
    )
    assert _shortcuts(args) == ["time.stages=3", "time.steps=8", 'impedance.kind="thin_layer"']


def test_mesh_for_levels():
    sphere = load_config().mesh
    assert mesh_for(sphere).num_triangles == 80
    assert mesh_for(sphere, level=0).num_triangles == 20
    torus = load_config(overrides=['mesh.shape="torus"', "mesh.n_major=8", "mesh.n_minor=4"]).mesh
    assert mesh_for(torus).num_triangles == 2 * 16 * 8


def test_fitted_orders():
    assert fitted_orders([4.0, 1.0, 0.5, 0.0]) == [None, 2.0, 1.0, None]


def test_field_error_samples_reference_times():
    reference_times = np.arange(9) * 0.5
    reference = _observation(reference_times, np.tile(reference_times[:, None, None], (1, 1, 3)))
    electric = reference.electric[::2].copy()
    electric[3, 0] += [0.0, 3.0, 4.0]
    assert field_error(_observation(np.arange(5) * 1.0, electric), reference) == pytest.approx(5.0)


def test_field_error_rejects_foreign_times():
    reference = _observation(np.arange(9) * 0.5, np.zeros((9, 1, 3)))
    with pytest.raises(InvalidStudy):
        field_error(_observation(np.arange(5) * 0.9, np.zeros((5, 1, 3))), reference)


def test_manifest_keeps_earlier_studies(tmp_path):
    config = load_config()
    write_manifest(tmp_path, "time_convergence", [tmp_path / "time_convergence.csv"], config)
    write_manifest(tmp_path, "condition_sweep", [tmp_path / "condition_sweep.csv"], config)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert set(manifest["studies"]) == {"time_convergence", "condition_sweep"}
    assert manifest["studies"]["condition_sweep"]["outputs"] == ["condition_sweep.csv"]
    assert manifest["studies"]["condition_sweep"]["config"]["time"]["steps"] == 64


def test_reference_cache(isolated_cache):
    cache = ReferenceCache(isolated_cache)
    assert cache.load("abc") is None
    observation = _observation(np.arange(3) * 1.0, np.ones((3, 1, 3)))
    cache.store("abc", observation)
    loaded = cache.load("abc")
    np.testing.assert_array_equal(loaded.electric, observation.electric)
    np.testing.assert_array_equal(loaded.times, observation.times)


@pytest.mark.parametrize("ladder, reference", [([8, 16], 40), ([8, 16], 32)])
def test_time_convergence_rejects_bad_reference(ladder, reference):
    config = load_config(overrides=[f"study.steps_ladder={ladder}", f"study.reference_steps={reference}"])
    with pytest.raises(InvalidStudy):
        run_time_convergence(config)


def test_space_convergence_rejects_coarse_reference():
    config = load_config(overrides=["study.level_ladder=[0, 2]", "study.reference_level=1"])
    with pytest.raises(InvalidStudy):
        run_space_convergence(config)


def test_zero_amplitude_gives_zero_errors(tmp_path, isolated_cache):
    config = load_config(
        overrides=QUICK
        + [
            "wave.amplitude=0.0",
            "study.steps_ladder=[4, 8]",
            "study.reference_steps=32",
            f'output.directory="{tmp_path}"',
        ]
    )
    report = run_time_convergence(config)
    assert [row.error for row in report.rows] == [0.0, 0.0]
    assert report.orders == []
    rows = _read_rows(tmp_path / "time_convergence.csv")
    assert [row["parameter"] for row in rows] == ["4.0", "8.0"]


def test_identical_mesh_and_reference_give_zero_error(tmp_path, isolated_cache):
    config = load_config(
        overrides=QUICK
        + ["study.level_ladder=[0]", "study.reference_level=0", f'output.directory="{tmp_path}"']
    )
    report = run_space_convergence(config)
    assert report.rows[0].error == 0.0
    assert report.rows[0].parameter == pytest.approx(mesh_for(config.mesh).mesh_width)
    assert len(list(isolated_cache.glob("*.npz"))) == 1
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["studies"]["space_convergence"]["outputs"] == ["space_convergence.csv"]


def test_single_run_through_main(tmp_path):
    code = main(["single-run", "--level", "0", "--steps", "8", "--set", "time.final_time=2.0", "--output", str(tmp_path)])
    assert code == 0
    rows = _read_rows(tmp_path / "single_run.csv")
    assert len(rows) == 9
    assert set(rows[0]) >= {"time", "x", "y", "z", "Ex", "Ey", "Ez", "Hx", "Hy", "Hz"}
    assert float(rows[0]["Ex"]) == 0.0
    assert "single_run" in json.loads((tmp_path / "manifest.json").read_text())["studies"]


def test_main_reports_config_errors_through_exit_code(tmp_path):
    assert main(["single-run", "--set", "mesh.colour=1", "--output", str(tmp_path)]) == 3
    assert main(["single-run", "--config", str(tmp_path / "missing.toml")]) == 3


def test_condition_sweep_on_icosahedron(tmp_path):
    config = load_config(overrides=["mesh.level=0", "time.steps=4", f'output.directory="{tmp_path}"'])
    rows = run_condition_sweep(config)
    assert len(rows) == 5 * config.time.stages
    assert sorted({row.l for row in rows}) == list(range(5))
    by_key = {(row.l, row.stage): row for row in rows}
    for stage in range(config.time.stages):
        left, right = by_key[(1, stage)], by_key[(4, stage)]
        assert right.condition == left.condition
        assert right.frequency_imag == -left.frequency_imag
    for row in rows:
        assert np.isfinite(row.condition) and row.condition >= 1.0
        assert row.norm * row.inverse_norm == pytest.approx(row.condition, rel=1e-10)
        assert 0 < row.iterations <= config.solver.max_iter
    assert len(_read_rows(tmp_path / "condition_sweep.csv")) == len(rows)


def test_condition_sweep_respects_size_limit(monkeypatch):
    monkeypatch.setattr(settings, "max_dense_dofs", 10)
    with pytest.raises(DenseSizeExceeded):
        run_condition_sweep(load_config(overrides=["mesh.level=0"]))


def test_torus_demo_on_coarse_torus(tmp_path):
    config = load_config(
        overrides=[
            'mesh.shape="torus"',
            "mesh.n_major=8",
            "mesh.n_minor=4",
            "mesh.level=0",
            "time.steps=8",
            "time.final_time=2.0",
            "grid.resolution=5",
            "grid.frames=[2, 4, 20]",
            f'output.directory="{tmp_path}"',
        ]
    )
    result = run_torus_demo(config)
    assert result.frames == [2, 4, 8]
    assert result.mask.shape == (5, 5)
    # (±0.75, 0, 0) lie inside the tube
    assert not result.mask[1, 2] and not result.mask[3, 2]
    assert result.mask.sum() == 23
    assert result.electric.shape == (9, 23, 3)
    peak = np.abs(result.scattered).max()
    assert peak > 0
    assert np.abs(result.scattered[2]).max() < 1e-6 * peak

    field_rows = _read_rows(tmp_path / "torus_fields.csv")
    assert len(field_rows) == 3 * 25
    assert sum(row["valid"] == "0" for row in field_rows) == 3 * 2
    assert len(_read_rows(tmp_path / "torus_densities.csv")) == 9


@pytest.mark.slow
def test_time_convergence_reaches_full_order(tmp_path, isolated_cache):
    config = load_config(
        CONFIGS / "sphere_time_convergence.toml", [f'output.directory="{tmp_path}"']
    )
    report = run_time_convergence(config)
    errors = [row.error for row in report.rows]
    assert errors[-1] < errors[0]
    slope = -np.polyfit(np.log2([row.parameter for row in report.rows[1:]]), np.log2(errors[1:]), 1)[0]
    assert 2.5 <= slope <= 3.5


@pytest.mark.slow
@pytest.mark.parametrize("delta, window", [(0.01, (1.2, 1.8)), (10.0, (0.8, 1.3))])
def test_space_convergence_order_depends_on_layer(tmp_path, isolated_cache, delta, window):
    config = load_config(
        CONFIGS / "sphere_space_convergence.toml",
        [f"impedance.delta={delta}", f'output.directory="{tmp_path}"'],
    )
    report = run_space_convergence(config)
    errors = [row.error for row in report.rows]
    assert all(fine < coarse for coarse, fine in zip(errors, errors[1:]))
    widths = [row.parameter for row in report.rows]
    slope = np.polyfit(np.log(widths), np.log(errors), 1)[0]
    assert window[0] <= slope <= window[1]


@pytest.mark.slow
def test_torus_condition_sweep(tmp_path):
    config = load_config(
        CONFIGS / "torus_condition_sweep.toml", [f'output.directory="{tmp_path}"']
    )
    rows = run_condition_sweep(config)
    assert len(rows) == 51 * 3
    assert max(row.iterations for row in rows) <= 1000
    assert all(np.isfinite(row.condition) for row in rows)
