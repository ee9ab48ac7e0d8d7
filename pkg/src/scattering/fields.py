"""Closed-form Maxwell fields: the incident Gaussian plane wave and a point dipole."""

import numpy as np

from src.kernel.service import green, green_grad, green_hessian
from src.scattering.schemas import IncidentWave, PointDipole


def _phase(wave: IncidentWave, times: np.ndarray, points: np.ndarray) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    travel = np.asarray(points, dtype=float) @ wave.unit_direction
    return times[(...,) + (None,) * travel.ndim] - travel - wave.t0


def wave_profile(wave: IncidentWave, times: np.ndarray, points: np.ndarray) -> np.ndarray:
    return wave.amplitude * np.exp(-wave.rate * _phase(wave, times, points) ** 2)


def wave_profile_derivative(wave: IncidentWave, times: np.ndarray, points: np.ndarray) -> np.ndarray:
    xi = _phase(wave, times, points)
    return -2.0 * wave.rate * xi * wave.amplitude * np.exp(-wave.rate * xi**2)


def plane_wave_fields(
    wave: IncidentWave, times: np.ndarray, points: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """E and H of shape ``times.shape + points.shape``."""
    profile = wave_profile(wave, times, points)[..., None]
    return profile * wave.unit_polarization, profile * wave.magnetic_polarization


def plane_wave_electric_rate(wave: IncidentWave, times: np.ndarray, points: np.ndarray) -> np.ndarray:
    """∂_t E of the plane wave."""
    return wave_profile_derivative(wave, times, points)[..., None] * wave.unit_polarization


def dipole_fields(
    s: complex, points: np.ndarray, dipole: PointDipole
) -> tuple[np.ndarray, np.ndarray]:
    """Laplace-domain fields of an electric point dipole: H = ∇G × p, E = (∇∇G p - s² G p) / s."""
    r = np.asarray(points, dtype=float) - np.asarray(dipole.position)
    p = np.asarray(dipole.moment, dtype=float)
    magnetic = np.cross(green_grad(s, r), p)
    electric = (green_hessian(s, r) @ p - s**2 * green(s, r)[..., None] * p) / s
    return electric, magnetic
