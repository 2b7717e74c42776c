"""Lorentz spray, nonlinear connection and linear Lorentz connection coefficients.

Conventions: the equation of motion is x'' + G(x, x') = 0, the nonlinear
connection is N = (1/2) dG/dy so that y^k N^i_k = G^i, and coefficient arrays
are indexed ``gamma[..., i, j, k]`` with the upper index first.

All functions take a single point ``x`` and accept ``y`` of shape (n,) or a
batch (..., n).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Union

import numpy as np

from .errors import AdmissibilityError
from .geometry import MetricField, christoffel_at

ADMISSIBLE_MARGIN = 1e-12

Faraday = Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]


class TangentState(NamedTuple):
    x: np.ndarray
    y: np.ndarray


def faraday_value(faraday: Faraday, x) -> np.ndarray:
    if callable(faraday):
        return np.asarray(faraday(np.asarray(x, dtype=float)), dtype=float)
    return np.asarray(faraday, dtype=float)


class _Pieces(NamedTuple):
    g: np.ndarray
    gamma: np.ndarray
    Fm: np.ndarray  # F^i_j
    y: np.ndarray
    ylow: np.ndarray
    q: np.ndarray  # eta(y, y)
    s: np.ndarray  # sqrt(eta(y, y))
    Fy: np.ndarray  # F^i_m y^m


def _pieces(metric: MetricField, faraday: Faraday, x, y) -> _Pieces:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    g = metric(x)
    F = faraday_value(faraday, x)
    Fm = metric.inverse(x) @ F
    ylow = y @ g
    q = np.einsum("...i,...i->...", ylow, y)
    if np.any(q < ADMISSIBLE_MARGIN):
        raise AdmissibilityError(f"eta(y,y) = {np.min(q):.3e} is not admissible (must be >= {ADMISSIBLE_MARGIN})")
    s = np.sqrt(q)
    Fy = np.einsum("ij,...j->...i", Fm, y)
    return _Pieces(g, christoffel_at(metric, x), Fm, y, ylow, q, s, Fy)


def spray_at(metric: MetricField, faraday: Faraday, x, y) -> np.ndarray:
    """G^i = Gamma^i_jk y^j y^k + F^i_k sqrt(eta(y, y)) y^k."""
    p = _pieces(metric, faraday, x, y)
    return np.einsum("ijk,...j,...k->...i", p.gamma, p.y, p.y) + p.s[..., None] * p.Fy


def nonlinear_connection(metric: MetricField, faraday: Faraday, x, y) -> np.ndarray:
    """N^i_k = (1/2) dG^i/dy^k, evaluated analytically."""
    p = _pieces(metric, faraday, x, y)
    s = p.s[..., None, None]
    return (
        np.einsum("ijk,...j->...ik", p.gamma, p.y)
        + 0.5 * p.Fy[..., :, None] * p.ylow[..., None, :] / s
        + 0.5 * s * p.Fm
    )


def _L(p: _Pieces, denom) -> np.ndarray:
    a = p.Fm[:, :, None] * p.ylow[..., None, None, :]  # F^i_j y_k
    return (a + np.swapaxes(a, -1, -2)) / (2.0 * denom[..., None, None, None])


def _T(p: _Pieces) -> np.ndarray:
    proj = p.g - p.ylow[..., :, None] * p.ylow[..., None, :] / p.q[..., None, None]
    return (p.Fy / (2.0 * p.s[..., None]))[..., :, None, None] * proj[..., None, :, :]


def decompose_LT(metric: MetricField, faraday: Faraday, x, y):
    """Longitudinal and transversal parts (L, T) of the Lorentz connection."""
    p = _pieces(metric, faraday, x, y)
    return _L(p, p.s), _T(p)


def lorentz_gamma(metric: MetricField, faraday: Faraday, x, y) -> np.ndarray:
    """Coefficients of the linear Lorentz connection at (x, y)."""
    p = _pieces(metric, faraday, x, y)
    return p.gamma + _L(p, p.s) + _T(p)


def tilde_gamma(metric: MetricField, faraday: Faraday, x, y) -> np.ndarray:
    """The T-free variant Gamma + L~, with L~ normalized by eta(y, y).

    On the unit hyperboloid it coincides with ``Gamma + L``; off it, the
    contraction with (y, y) no longer matches the Lorentz connection.
    """
    p = _pieces(metric, faraday, x, y)
    return p.gamma + _L(p, p.q)


def contract(gamma: np.ndarray, y) -> np.ndarray:
    """Gamma^i_jk y^j y^k for matching batches of coefficients and vectors."""
    y = np.asarray(y, dtype=float)
    return np.einsum("...ijk,...j,...k->...i", gamma, y, y)


# Connection fields: callables (x, y) -> coefficients with a ``y_dependent`` flag.


@dataclass
class LorentzConnection:
    metric: MetricField
    faraday: Faraday
    y_dependent: bool = True

    def __call__(self, x, y=None):
        return lorentz_gamma(self.metric, self.faraday, x, y)


@dataclass
class TildeConnection:
    metric: MetricField
    faraday: Faraday
    y_dependent: bool = True

    def __call__(self, x, y=None):
        return tilde_gamma(self.metric, self.faraday, x, y)


@dataclass
class AffineConnection:
    """A y-independent connection given by a constant array or a function of x."""

    coeffs: Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]
    y_dependent: bool = False

    def __call__(self, x, y=None):
        c = self.coeffs(np.asarray(x, dtype=float)) if callable(self.coeffs) else np.asarray(self.coeffs, float)
        if y is None:
            return c
        y = np.asarray(y, dtype=float)
        return np.broadcast_to(c, y.shape[:-1] + c.shape)


def levi_civita_connection(metric: MetricField) -> AffineConnection:
    return AffineConnection(lambda x: christoffel_at(metric, x))
