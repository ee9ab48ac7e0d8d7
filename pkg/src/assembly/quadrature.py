"""Reference quadrature rules.

Triangle rules are returned in barycentric coordinates ``(λ0, λ1, λ2)`` with
weights normalized to sum to one, so that ``∫_T f = area_T · Σ w f(Σ λ_k P_k)``.
Panel-pair rules follow the same normalization: ``∬_{T×T'} f = A·A' · Σ w f``.
"""

from functools import lru_cache
from typing import Literal

import numpy as np
from numpy.polynomial.legendre import leggauss

PairKind = Literal["identical", "edge", "vertex"]


def _frozen(*arrays: np.ndarray) -> tuple[np.ndarray, ...]:
    for array in arrays:
        array.setflags(write=False)
    return arrays


@lru_cache(maxsize=None)
def gauss_interval(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss–Legendre rule with ``order`` points on [0, 1]."""
    nodes, weights = leggauss(order)
    return _frozen(0.5 * (nodes + 1.0), 0.5 * weights)


@lru_cache(maxsize=None)
def triangle_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Collapsed (Duffy) tensor Gauss rule with ``order**2`` points."""
    nodes, weights = gauss_interval(order)
    xi, eta = (grid.ravel() for grid in np.meshgrid(nodes, nodes, indexing="ij"))
    w = np.outer(weights, weights).ravel() * xi * 2.0
    u, v = xi * (1.0 - eta), xi * eta
    return _frozen(np.stack([1.0 - u - v, u, v], axis=1), w)


def _cube_rule(order: int) -> tuple[np.ndarray, ...]:
    nodes, weights = gauss_interval(order)
    grids = np.meshgrid(nodes, nodes, nodes, nodes, indexing="ij")
    w = np.einsum("i,j,k,l->ijkl", weights, weights, weights, weights).ravel()
    return tuple(grid.ravel() for grid in grids) + (w,)


def _identical_regions(xi, e1, e2, e3):
    jac = xi**3 * e1**2 * e2
    first = (
        (xi, xi * (1 - e1 + e1 * e2)),
        (xi * (1 - e1 * e2 * e3), xi * (1 - e1)),
    )
    third = (
        (xi, xi * e1 * (1 - e2 + e2 * e3)),
        (xi * (1 - e1 * e2), xi * e1 * (1 - e2)),
    )
    fifth = (
        (xi * (1 - e1 * e2 * e3), xi * e1 * (1 - e2 * e3)),
        (xi, xi * e1 * (1 - e2)),
    )
    for x, y in (first, third, fifth):
        yield x, y, jac
        yield y, x, jac


def _edge_regions(xi, e1, e2, e3):
    yield (
        (xi, xi * e1 * e3),
        (xi * (1 - e1 * e2), xi * e1 * (1 - e2)),
        xi**3 * e1**2,
    )
    jac = xi**3 * e1**2 * e2
    yield (xi, xi * e1), (xi * (1 - e1 * e2 * e3), xi * e1 * e2 * (1 - e3)), jac
    yield (xi * (1 - e1 * e2), xi * e1 * (1 - e2)), (xi, xi * e1 * e2 * e3), jac
    yield (xi * (1 - e1 * e2 * e3), xi * e1 * e2 * (1 - e3)), (xi, xi * e1), jac
    yield (xi * (1 - e1 * e2 * e3), xi * e1 * (1 - e2 * e3)), (xi, xi * e1 * e2), jac


def _vertex_regions(xi, e1, e2, e3):
    jac = xi**3 * e2
    x, y = (xi, xi * e1), (xi * e2, xi * e2 * e3)
    yield x, y, jac
    yield y, x, jac


_REGIONS = {
    "identical": _identical_regions,
    "edge": _edge_regions,
    "vertex": _vertex_regions,
}


def _to_barycentric(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    # χ(x) = P0 + x1 (P1 − P0) + x2 (P2 − P1) on {0 ≤ x2 ≤ x1 ≤ 1}
    return np.stack([1.0 - x1, x1 - x2, x2], axis=1)


@lru_cache(maxsize=None)
def sauter_schwab_rule(kind: PairKind, order: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Singular panel-pair rule for coincident, edge-adjacent and vertex-adjacent triangles.

    The shared vertices must come first in both triangles and in the same
    physical order: ``P0`` for a common vertex, ``P0, P1`` for a common edge.
    Returns barycentric points on the test and trial triangles plus weights.
    """
    xi, e1, e2, e3, w = _cube_rule(order)
    test, trial, weights = [], [], []
    for x, y, jac in _REGIONS[kind](xi, e1, e2, e3):
        test.append(_to_barycentric(*x))
        trial.append(_to_barycentric(*y))
        # the two reference Jacobians 2A, 2A' are folded into the weights
        weights.append(4.0 * w * jac)
    return _frozen(np.concatenate(test), np.concatenate(trial), np.concatenate(weights))
