from typing import Callable, Protocol

import numpy as np
from scipy import fft

from src.cq.exceptions import (
    ContourOutsideDisk,
    DefectiveDelta,
    InvalidTimeGrid,
    SeriesShapeMismatch,
    UnsupportedStages,
)
from src.cq.schemas import ButcherTableau, CQContext, FrequencyData
from src.exceptions import DetailedError
from src.logger import get_logger
from src.utils import parallel_map

logger = get_logger()

MACHINE_EPSILON = float(np.finfo(float).eps)
EIGENVECTOR_CONDITION_LIMIT = 1e12

Transfer = Callable[[complex, np.ndarray], np.ndarray]


class FrequencySolver(Protocol):
    def solve(self, rhs: np.ndarray) -> np.ndarray: ...


SystemBuilder = Callable[[complex], FrequencySolver]


def radau_tableau(stages: int) -> ButcherTableau:
    if stages == 1:
        a, c = np.array([[1.0]]), np.array([1.0])
    elif stages == 2:
        a = np.array([[5 / 12, -1 / 12], [3 / 4, 1 / 4]])
        c = np.array([1 / 3, 1.0])
    elif stages == 3:
        r6 = np.sqrt(6.0)
        a = np.array(
            [
                [(88 - 7 * r6) / 360, (296 - 169 * r6) / 1800, (-2 + 3 * r6) / 225],
                [(296 + 169 * r6) / 1800, (88 + 7 * r6) / 360, (-2 - 3 * r6) / 225],
                [(16 - r6) / 36, (16 + r6) / 36, 1 / 9],
            ]
        )
        c = np.array([(4 - r6) / 10, (4 + r6) / 10, 1.0])
    else:
        raise UnsupportedStages(stages=stages)
    return ButcherTableau(a=a, b=a[-1].copy(), c=c)


def delta(zeta: complex, tableau: ButcherTableau) -> np.ndarray:
    """Δ(ζ) = (A + ζ/(1 - ζ) 𝟙bᵀ)⁻¹."""
    zeta = complex(zeta)
    if abs(zeta) >= 1:
        raise ContourOutsideDisk(zeta=zeta)
    rank_one = np.outer(np.ones(tableau.stages), tableau.b)
    return np.linalg.inv(tableau.a + zeta / (1 - zeta) * rank_one)


def build_context(tableau: ButcherTableau, steps: int, final_time: float) -> CQContext:
    if steps < 1 or final_time <= 0:
        raise InvalidTimeGrid(steps=steps, final_time=final_time)
    length = steps + 1
    tau = final_time / steps
    radius = MACHINE_EPSILON ** (1.0 / (2 * steps))
    m = tableau.stages

    frequencies = np.empty((length, m), dtype=complex)
    eigenvectors = np.empty((length, m, m), dtype=complex)
    inverse = np.empty((length, m, m), dtype=complex)
    for l in range(length // 2 + 1):
        zeta = radius * np.exp(-2j * np.pi * l / length)
        values, vectors = np.linalg.eig(delta(zeta, tableau) / tau)
        condition = np.linalg.cond(vectors)
        if condition > EIGENVECTOR_CONDITION_LIMIT:
            logger.warning(f"Δ at contour index {l} is numerically defective (cond={condition:.2e})")
            raise DefectiveDelta(l=l, condition=condition)
        frequencies[l], eigenvectors[l], inverse[l] = values, vectors, np.linalg.inv(vectors)
        if 0 < l < length - l:
            frequencies[length - l] = values.conj()
            eigenvectors[length - l] = vectors.conj()
            inverse[length - l] = inverse[l].conj()

    if np.any(frequencies.real <= 0):
        raise DefectiveDelta("Contour frequency with non-positive real part", min_real=float(frequencies.real.min()))
    context = CQContext(
        tableau=tableau,
        steps=steps,
        final_time=final_time,
        radius=radius,
        frequencies=frequencies,
        eigenvectors=eigenvectors,
        inverse_eigenvectors=inverse,
    )
    logger.info(
        f"CQ context: m={m}, N={steps}, T={final_time}, ρ={radius:.6f}, "
        f"min Re s={frequencies.real.min():.4f}"
    )
    return context


def _check_series(context: CQContext, series: np.ndarray) -> None:
    if series.shape[:2] != (context.length, context.stages):
        raise SeriesShapeMismatch(
            shape=series.shape, expected=(context.length, context.stages)
        )


def forward_transform(context: CQContext, series: np.ndarray) -> FrequencyData:
    """Scaled DFT over steps followed by the change to each Δ_l eigenbasis."""
    series = np.asarray(series)
    _check_series(context, series)
    scaling = context.radius ** np.arange(context.length)
    scaled = series * scaling.reshape((-1,) + (1,) * (series.ndim - 1))
    transformed = fft.fft(scaled, axis=0)
    values = np.einsum("lij,lj...->li...", context.inverse_eigenvectors, transformed)
    return FrequencyData(values=values, real_signal=bool(np.isrealobj(series)))


def inverse_transform(context: CQContext, data: FrequencyData) -> np.ndarray:
    values = np.einsum("lij,lj...->li...", context.eigenvectors, data.values)
    series = fft.ifft(values, axis=0)
    scaling = context.radius ** -np.arange(context.length)
    series = series * scaling.reshape((-1,) + (1,) * (series.ndim - 1))
    return series.real if data.real_signal else series


def _map_frequencies(
    context: CQContext,
    data: FrequencyData,
    operation: Callable[[complex, np.ndarray], np.ndarray],
) -> FrequencyData:
    indices = context.independent_indices if data.real_signal else np.arange(context.length)

    def per_index(l: int) -> list[np.ndarray]:
        results = []
        for stage, s in enumerate(context.frequencies[l]):
            try:
                results.append(np.asarray(operation(s, data.values[l, stage])))
            except DetailedError as exc:
                exc.context.update(l=int(l), stage=stage, frequency=complex(s))
                logger.error(f"Frequency solve failed: {exc}")
                raise
        return results

    blocks = parallel_map(per_index, indices)
    first = blocks[0][0]
    values = np.empty((context.length, context.stages) + first.shape, dtype=complex)
    for l, block in zip(indices, blocks):
        values[l] = np.stack(block)
        mirror = context.length - l
        if data.real_signal and 0 < l < mirror:
            values[mirror] = values[l].conj()
    return FrequencyData(values=values, real_signal=data.real_signal)


def apply_transfer(context: CQContext, transfer: Transfer, data: FrequencyData) -> FrequencyData:
    return _map_frequencies(context, data, transfer)


def cq_apply(context: CQContext, transfer: Transfer, series: np.ndarray) -> np.ndarray:
    """Stage series of K(∂_t)g; ``transfer(s, x)`` applies K(s) to one stage slice."""
    data = forward_transform(context, series)
    return inverse_transform(context, apply_transfer(context, transfer, data))


def solve_frequencies(
    context: CQContext, system_builder: SystemBuilder, data: FrequencyData
) -> FrequencyData:
    if not np.any(data.values):
        return FrequencyData(values=np.zeros_like(data.values), real_signal=data.real_signal)
    return _map_frequencies(context, data, lambda s, x: system_builder(s).solve(x))


def cq_solve(
    context: CQContext,
    system_builder: SystemBuilder,
    rhs: np.ndarray | FrequencyData,
) -> np.ndarray:
    """Stage series of A(∂_t)⁻¹g with one linear solve per contour frequency."""
    data = rhs if isinstance(rhs, FrequencyData) else forward_transform(context, rhs)
    return inverse_transform(context, solve_frequencies(context, system_builder, data))


def output_series(context: CQContext, series: np.ndarray) -> np.ndarray:
    """Values at t_0..t_N: zero at t_0, last stage of step n - 1 at t_n."""
    result = np.zeros_like(series[:, -1])
    result[1:] = series[:-1, -1]
    return result


def cq_weights(
    tableau: ButcherTableau,
    transfer: Callable[[complex], complex],
    steps: int,
    tau: float,
    radius: float = 0.8,
    points: int | None = None,
) -> np.ndarray:
    """Weight matrices W_0..W_N of Σ W_n ζⁿ = K(Δ(ζ)/τ) by a trapezoidal Cauchy integral."""
    points = points or max(64, 8 * (steps + 1))
    samples = np.empty((points, tableau.stages, tableau.stages), dtype=complex)
    for k in range(points):
        zeta = radius * np.exp(2j * np.pi * k / points)
        values, vectors = np.linalg.eig(delta(zeta, tableau) / tau)
        mapped = np.array([transfer(value) for value in values])
        samples[k] = vectors @ np.diag(mapped) @ np.linalg.inv(vectors)
    coefficients = fft.fft(samples, axis=0) / points
    return coefficients[: steps + 1] * (radius ** -np.arange(steps + 1))[:, None, None]
