"""Fundamental solution of the Laplace-domain Maxwell/Helmholtz operator.

All functions take separation vectors ``r`` of shape ``(..., 3)`` and broadcast
over leading axes. The factor 1/(4π) lives here and nowhere else.
"""

import numpy as np

from src.kernel.exceptions import NonPositiveFrequency, SingularKernel
from src.logger import get_logger

logger = get_logger()

FOUR_PI = 4.0 * np.pi


def check_frequency(s: complex) -> complex:
    s = complex(s)
    if not s.real > 0:
        logger.warning(f"Rejected frequency s={s}")
        raise NonPositiveFrequency(s=s)
    return s


def _distance(r: np.ndarray) -> np.ndarray:
    dist = np.linalg.norm(r, axis=-1)
    if np.any(dist == 0):
        raise SingularKernel(zero_separations=int(np.sum(dist == 0)))
    return dist


def green(s: complex, r: np.ndarray) -> np.ndarray:
    """G(s, r) = exp(-s|r|) / (4π|r|)."""
    dist = _distance(np.asarray(r, dtype=float))
    return np.exp(-s * dist) / (FOUR_PI * dist)


def green_grad(s: complex, r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    dist = _distance(r)
    radial = -(s * dist + 1.0) * np.exp(-s * dist) / (FOUR_PI * dist**3)
    return radial[..., None] * r


def green_hessian(s: complex, r: np.ndarray) -> np.ndarray:
    """Second derivatives ``(..., 3, 3)`` of G with respect to r."""
    r = np.asarray(r, dtype=float)
    dist = _distance(r)
    decay = np.exp(-s * dist) / FOUR_PI
    first = -(s * dist + 1.0) * decay / dist**2
    second = (s**2 * dist**2 + 2.0 * s * dist + 2.0) * decay / dist**3
    unit = r / dist[..., None]
    radial = np.einsum("...i,...j->...ij", unit, unit)
    identity = np.broadcast_to(np.eye(3), radial.shape)
    return second[..., None, None] * radial + (first / dist)[..., None, None] * (identity - radial)
