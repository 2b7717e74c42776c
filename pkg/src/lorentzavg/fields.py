"""Electromagnetic potentials, Faraday tensors and preset field configurations.

The charge-to-mass ratio is absorbed into the potential, so the force term of
the equation of motion carries no q/m factor.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, PreconditionError
from .geometry import _fd_derivative


@dataclass
class Potential:
    """A covector field A_i(x).

    ``deriv`` returns ``d[j, i] = d_j A_i``; finite differences are used when
    it is omitted.
    """

    func: Callable[[np.ndarray], np.ndarray]
    deriv: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float)

    def derivative(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.deriv is not None:
            return np.asarray(self.deriv(x), dtype=float)
        return _fd_derivative(self.func, x)


def faraday_at(A: Potential, x) -> np.ndarray:
    """F_ij = d_i A_j - d_j A_i (exactly antisymmetric)."""
    d = A.derivative(x)
    return d - d.T


def mixed_faraday(metric, F: np.ndarray, x) -> np.ndarray:
    """F^i_j = eta^ik F_kj."""
    return metric.inverse(x) @ F


def gauge_transform(A: Potential, lam, grad=None, hess=None) -> Potential:
    """Return the potential A + d(lam).

    ``grad`` and ``hess`` are the analytic gradient / Hessian of ``lam``; any
    missing one is obtained by finite differences. The Hessian is symmetrized,
    so the Faraday tensor is unchanged to rounding.
    """
    if grad is None:

        def grad(x):
            return _fd_derivative(lambda z: np.atleast_1d(lam(z)), x)[:, 0]

    if hess is None:

        def hess(x):
            return _fd_derivative(grad, x)

    def func(x):
        return A(x) + np.asarray(grad(x), dtype=float)

    def deriv(x):
        h = np.asarray(hess(x), dtype=float)
        return A.derivative(x) + 0.5 * (h + h.T)

    return Potential(func, deriv)


def _plane(axis, n):
    """Indices (b, c) of the plane rotated by a magnetic field along ``axis``."""
    a = {"x": 1, "y": 2, "z": 3}.get(axis, axis)
    planes = {1: (2, 3), 2: (3, 1), 3: (1, 2)}
    if a not in planes or max(planes[a]) >= n:
        raise ConfigError(f"magnetic axis {axis!r} not available for n={n}")
    return planes[a]


def _spatial_axis(axis, n):
    names = {"x": 1, "y": 2, "z": 3}
    a = int(names.get(axis, axis))
    if not 1 <= a < n:
        raise ConfigError(f"axis {axis!r} out of range for n={n}")
    return a


@dataclass
class FieldPreset:
    """A potential together with its closed-form Faraday tensor.

    ``faraday`` accepts a single point of shape (n,) or a batch (..., n) and
    returns F_ij with shape (..., n, n).
    """

    name: str
    dim: int
    potential: Potential
    faraday: Callable[[np.ndarray], np.ndarray]
    params: dict


def _constant_faraday(F):
    F = np.asarray(F, dtype=float)

    def faraday(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(F, x.shape[:-1] + F.shape).copy()

    return faraday


def _null(n, params):
    zero_a = np.zeros(n)
    pot = Potential(lambda x: zero_a.copy(), lambda x: np.zeros((n, n)))
    return pot, _constant_faraday(np.zeros((n, n)))


def _uniform_E(n, params):
    E0 = float(params.get("E0", 1.0))
    a = _spatial_axis(params.get("axis", "x"), n)

    def func(x):
        out = np.zeros(n)
        out[0] = -E0 * x[a]
        return out

    def deriv(x):
        d = np.zeros((n, n))
        d[a, 0] = -E0
        return d

    F = np.zeros((n, n))
    F[a, 0] = -E0
    F[0, a] = E0
    return Potential(func, deriv), _constant_faraday(F)


def _uniform_B(n, params):
    B0 = float(params.get("B0", 1.0))
    b, c = _plane(params.get("axis", "z"), n)

    def func(x):
        out = np.zeros(n)
        out[b] = -0.5 * B0 * x[c]
        out[c] = 0.5 * B0 * x[b]
        return out

    def deriv(x):
        d = np.zeros((n, n))
        d[c, b] = -0.5 * B0
        d[b, c] = 0.5 * B0
        return d

    F = np.zeros((n, n))
    F[b, c] = B0
    F[c, b] = -B0
    return Potential(func, deriv), _constant_faraday(F)


def _crossed_EB(n, params):
    pe, fe = _uniform_E(n, {"E0": params.get("E0", 1.0), "axis": params.get("E_axis", "x")})
    pb, fb = _uniform_B(n, {"B0": params.get("B0", 1.0), "axis": params.get("axis", "z")})
    pot = Potential(lambda x: pe(x) + pb(x), lambda x: pe.derivative(x) + pb.derivative(x))
    return pot, lambda x: fe(x) + fb(x)


def _quadrupole(n, params):
    if n < 4:
        raise ConfigError("quadrupole preset needs n >= 4")
    g = float(params.get("gradient", 1.0))

    def func(x):
        out = np.zeros(n)
        out[3] = 0.5 * g * (x[1] ** 2 - x[2] ** 2)
        return out

    def deriv(x):
        d = np.zeros((n, n))
        d[1, 3] = g * x[1]
        d[2, 3] = -g * x[2]
        return d

    def faraday(x):
        x = np.asarray(x, dtype=float)
        F = np.zeros(x.shape[:-1] + (n, n))
        F[..., 1, 3] = g * x[..., 1]
        F[..., 3, 1] = -g * x[..., 1]
        F[..., 2, 3] = -g * x[..., 2]
        F[..., 3, 2] = g * x[..., 2]
        return F

    return Potential(func, deriv), faraday


_PRESETS = {
    "null": _null,
    "uniform_E": _uniform_E,
    "uniform_B": _uniform_B,
    "crossed_EB": _crossed_EB,
    "quadrupole": _quadrupole,
}


def preset_field(name: str, params: Optional[dict] = None, n: int = 4) -> FieldPreset:
    """Build one of the named field configurations."""
    params = dict(params or {})
    if name not in _PRESETS:
        raise ConfigError(f"unknown field preset {name!r}; choose from {sorted(_PRESETS)}")
    if n < 2:
        raise PreconditionError("dimension must be >= 2")
    pot, faraday = _PRESETS[name](n, params)
    faraday.vectorized = True  # presets accept batches of points
    return FieldPreset(name, n, pot, faraday, params)


def potential_faraday(A: Potential) -> Callable[[np.ndarray], np.ndarray]:
    """Faraday evaluator computed from a potential (single points only)."""
    return lambda x: faraday_at(A, x)
