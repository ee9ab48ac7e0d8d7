import numpy as np
import pytest
from scipy.special import gamma

from src.cq import service as cq_service
from src.cq.exceptions import (
    ContourOutsideDisk,
    DefectiveDelta,
    InvalidTimeGrid,
    SeriesShapeMismatch,
    UnsupportedStages,
)
from src.cq.service import (
    build_context,
    cq_apply,
    cq_solve,
    cq_weights,
    delta,
    forward_transform,
    inverse_transform,
    output_series,
    radau_tableau,
)
from src.calderon.exceptions import GMRESNotConverged

TRANSFERS = {
    "derivative": lambda s: s,
    "half_derivative": lambda s: np.sqrt(s),
    "wave": lambda s: s**2 + 1.0,
}

# contour round-off is amplified by ρ^{-N} and by the spread of |K(s)| along the contour
COMPOSITION_TOLERANCES = {"derivative": 1e-8, "half_derivative": 1e-8, "wave": 1e-6}


class ScalarSolver:
    def __init__(self, value):
        self.value = value

    def solve(self, rhs):
        return rhs / self.value


def _scalar_builder(symbol):
    return lambda s: ScalarSolver(symbol(s))


def _scalar_transfer(symbol):
    return lambda s, x: symbol(s) * x


@pytest.mark.parametrize("stages", [1, 2, 3])
def test_radau_tableau_properties(stages):
    tableau = radau_tableau(stages)
    assert tableau.stages == stages
    assert tableau.b.sum() == pytest.approx(1.0)
    for k in range(1, 2 * stages):
        assert tableau.b @ tableau.c ** (k - 1) == pytest.approx(1.0 / k)
    np.testing.assert_allclose(tableau.a.sum(axis=1), tableau.c, atol=1e-14)
    assert tableau.stiffly_accurate
    assert tableau.stability_at_infinity == pytest.approx(0.0, abs=1e-12)


def test_radau_tableau_rejects_more_stages():
    with pytest.raises(UnsupportedStages):
        radau_tableau(4)


def test_delta_at_origin_is_inverse_of_a():
    tableau = radau_tableau(3)
    np.testing.assert_allclose(delta(0.0, tableau), np.linalg.inv(tableau.a), rtol=1e-12)


@pytest.mark.parametrize("zeta", [1.0, -1.0, 1.0j, 1.5])
def test_delta_requires_unit_disk(zeta):
    with pytest.raises(ContourOutsideDisk):
        delta(zeta, radau_tableau(2))


@pytest.mark.parametrize("stages", [2, 3])
@pytest.mark.parametrize("radius", [0.5, 0.9, 0.99])
def test_delta_spectrum_in_right_half_plane(stages, radius):
    tableau = radau_tableau(stages)
    for angle in np.linspace(0.0, 2 * np.pi, 256, endpoint=False):
        eigenvalues = np.linalg.eigvals(delta(radius * np.exp(1j * angle), tableau))
        assert eigenvalues.real.min() > 0


def test_context_contour():
    context = build_context(radau_tableau(2), steps=8, final_time=1.0)
    assert context.radius == pytest.approx(np.finfo(float).eps ** (1 / 16))
    assert context.radius == pytest.approx(0.1051, abs=1e-4)
    assert context.tau == pytest.approx(0.125)
    assert context.frequencies.shape == (9, 2)
    assert np.all(context.frequencies.real > 0)
    np.testing.assert_array_equal(context.independent_indices, np.arange(5))


def test_context_frequencies_come_in_conjugate_pairs(context_m2):
    length = context_m2.length
    for l in range(1, length):
        np.testing.assert_allclose(
            np.sort_complex(context_m2.frequencies[length - l]),
            np.sort_complex(context_m2.frequencies[l].conj()),
            rtol=1e-12,
        )


def test_context_diagonalizes_delta(context_m2):
    for l in [0, 3, context_m2.length - 3]:
        zeta = context_m2.radius * np.exp(-2j * np.pi * l / context_m2.length)
        reconstructed = (
            context_m2.eigenvectors[l]
            @ np.diag(context_m2.frequencies[l])
            @ context_m2.inverse_eigenvectors[l]
        )
        np.testing.assert_allclose(reconstructed, delta(zeta, context_m2.tableau) / context_m2.tau, rtol=1e-10)


def test_stage_and_output_times(context_m2):
    tau = context_m2.tau
    np.testing.assert_allclose(context_m2.stage_times[3], (3 + context_m2.tableau.c) * tau)
    np.testing.assert_allclose(context_m2.output_times, np.arange(17) * tau)
    np.testing.assert_allclose(context_m2.stage_times[:-1, -1], context_m2.output_times[1:])


@pytest.mark.parametrize("steps, final_time", [(0, 1.0), (8, 0.0), (8, -1.0)])
def test_context_rejects_bad_grid(steps, final_time):
    with pytest.raises(InvalidTimeGrid):
        build_context(radau_tableau(2), steps, final_time)


def test_defective_delta_is_reported(monkeypatch):
    monkeypatch.setattr(cq_service, "EIGENVECTOR_CONDITION_LIMIT", 0.5)
    with pytest.raises(DefectiveDelta) as exc:
        build_context(radau_tableau(2), 8, 1.0)
    assert exc.value.context["l"] == 0


def test_transforms_are_inverse(context_m2, rng):
    series = rng.standard_normal((context_m2.length, 2, 5))
    data = forward_transform(context_m2, series)
    assert data.real_signal
    np.testing.assert_allclose(inverse_transform(context_m2, data), series, atol=1e-6)


def test_transform_rejects_wrong_shape(context_m2):
    with pytest.raises(SeriesShapeMismatch):
        forward_transform(context_m2, np.zeros((context_m2.length, 3)))


@pytest.mark.parametrize("stages", [1, 2, 3])
@pytest.mark.parametrize("name", list(TRANSFERS))
def test_composition_rule(stages, name, rng):
    context = build_context(radau_tableau(stages), steps=64, final_time=1.0)
    symbol = TRANSFERS[name]
    series = rng.standard_normal((context.length, stages))
    solved = cq_solve(context, _scalar_builder(symbol), series)
    recovered = cq_apply(context, _scalar_transfer(symbol), solved)
    assert np.linalg.norm(recovered - series) <= COMPOSITION_TOLERANCES[name] * np.linalg.norm(series)


def _half_derivative_at_end(stages, steps, final_time, signal):
    context = build_context(radau_tableau(stages), steps=steps, final_time=final_time)
    values = cq_apply(context, _scalar_transfer(np.sqrt), signal(context.stage_times))
    return output_series(context, values)[-1]


def test_half_derivative_of_cubic():
    value = _half_derivative_at_end(2, 128, 1.0, lambda t: t**3)
    assert value == pytest.approx(gamma(4) / gamma(3.5), abs=1e-3)
    assert value == pytest.approx(1.805402, abs=1e-3)


def test_three_stages_reproduce_cubic_half_derivative():
    # stage order three integrates t³ exactly, leaving only contour round-off
    exact = gamma(4) / gamma(3.5) * 2.0**2.5
    assert _half_derivative_at_end(3, 16, 2.0, lambda t: t**3) == pytest.approx(exact, rel=1e-6)


def test_half_derivative_converges_at_full_order():
    signal = lambda t: t**2 * np.sin(3.0 * t)
    reference = _half_derivative_at_end(3, 1024, 2.0, signal)
    steps = [16, 32, 64, 128]
    errors = [abs(_half_derivative_at_end(3, n, 2.0, signal) - reference) for n in steps]
    slope = -np.polyfit(np.log2(steps), np.log2(errors), 1)[0]
    assert slope >= 3.0


def test_integration_by_inverse_derivative():
    context = build_context(radau_tableau(2), steps=64, final_time=2.0)
    stage_values = cq_solve(context, _scalar_builder(lambda s: s), np.cos(context.stage_times))
    np.testing.assert_allclose(output_series(context, stage_values), np.sin(context.output_times), atol=1e-5)


def test_backward_euler_is_first_order():
    errors = []
    for n in [32, 64]:
        context = build_context(radau_tableau(1), steps=n, final_time=2.0)
        stage_values = cq_solve(context, _scalar_builder(lambda s: s), np.cos(context.stage_times))
        errors.append(np.abs(output_series(context, stage_values) - np.sin(context.output_times)).max())
    assert 1.6 < errors[0] / errors[1] < 2.4


def test_zero_rhs_skips_solves(context_m2):
    def failing_builder(s):
        raise AssertionError("no solve expected")

    solved = cq_solve(context_m2, failing_builder, np.zeros((context_m2.length, 2, 3)))
    assert not np.any(solved)


def test_frequency_failures_carry_contour_position(context_m2, rng):
    class Failing:
        def solve(self, rhs):
            raise GMRESNotConverged(residual=1.0, iterations=3)

    with pytest.raises(GMRESNotConverged) as exc:
        cq_solve(context_m2, lambda s: Failing(), rng.standard_normal((context_m2.length, 2)))
    assert exc.value.context["l"] == 0
    assert exc.value.context["stage"] == 0
    assert "frequency" in exc.value.context


def test_complex_data_uses_full_contour(context_m2, rng):
    series = rng.standard_normal((context_m2.length, 2)) + 1j * rng.standard_normal((context_m2.length, 2))
    data = forward_transform(context_m2, series)
    assert not data.real_signal
    result = cq_apply(context_m2, _scalar_transfer(lambda s: 1.0), series)
    np.testing.assert_allclose(result, series, atol=1e-6)


def test_output_series_starts_at_zero(context_m2):
    series = np.ones((context_m2.length, 2, 4))
    values = output_series(context_m2, series)
    assert values.shape == (context_m2.length, 4)
    assert not np.any(values[0])
    assert np.all(values[1:] == 1.0)


def test_weights_at_origin():
    tableau = radau_tableau(2)
    weights = cq_weights(tableau, lambda s: s, steps=8, tau=0.1)
    np.testing.assert_allclose(weights[0], np.linalg.inv(tableau.a) / 0.1, rtol=1e-10)


def test_weights_match_transform_convolution():
    tableau = radau_tableau(2)
    context = build_context(tableau, steps=16, final_time=1.6)
    symbol = lambda s: 1.0 / (s + 1.0)
    weights = cq_weights(tableau, symbol, steps=16, tau=context.tau)
    for k in range(2):
        impulse = np.zeros((context.length, 2))
        impulse[0, k] = 1.0
        response = cq_apply(context, _scalar_transfer(symbol), impulse)
        np.testing.assert_allclose(response, weights[:, :, k].real, atol=1e-6)
