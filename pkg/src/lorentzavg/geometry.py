"""Lorentzian metric machinery.

Metrics carry signature (+, -, ..., -). Everything here works for any
dimension n >= 2; the physical case is n = 4.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DegenerateMetricError, PreconditionError

ArrayFn = Callable[[np.ndarray], np.ndarray]


def _fd_derivative(func: ArrayFn, x: np.ndarray) -> np.ndarray:
    """4th-order central differences, result[k] = d func / d x^k."""
    x = np.asarray(x, dtype=float)
    h = 1e-5 * (1.0 + np.linalg.norm(x))
    out = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        d = (-func(x + 2 * e) + 8 * func(x + e) - 8 * func(x - e) + func(x - 2 * e)) / (12 * h)
        out.append(d)
    return np.stack(out)


@dataclass
class MetricField:
    """A Lorentzian metric field eta_ij(x).

    ``deriv`` returns an array ``d[k, i, j] = d_k eta_ij``. When omitted, a
    4th-order finite-difference fallback is used.
    """

    dim: int
    func: ArrayFn
    deriv: Optional[ArrayFn] = None
    name: str = "custom"
    constant: bool = False
    _checked: set = field(default_factory=set, init=False, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False)

    def __post_init__(self):
        if self.dim < 2:
            raise PreconditionError("metric dimension must be >= 2")

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        g = np.asarray(self.func(x), dtype=float)
        key = () if self.constant else tuple(x.tolist())
        if key not in self._checked:
            check_signature(g)
            with self._lock:
                self._checked.add(key)
        return g

    def derivative(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.deriv is not None:
            return np.asarray(self.deriv(x), dtype=float)
        return _fd_derivative(self.func, x)

    def inverse(self, x) -> np.ndarray:
        g = self(x)
        try:
            return np.linalg.inv(g)
        except np.linalg.LinAlgError as exc:
            raise DegenerateMetricError(f"singular metric at x={x}") from exc

    def inner(self, x, u, v) -> float:
        return float(np.asarray(u) @ self(x) @ np.asarray(v))


def check_signature(g: np.ndarray, atol: float = 1e-14) -> None:
    """Raise unless ``g`` is symmetric with signature (+, -, ..., -)."""
    g = np.asarray(g, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise DegenerateMetricError("metric must be a square matrix")
    scale = max(1.0, float(np.abs(g).max()))
    if np.abs(g - g.T).max() > atol * scale:
        raise DegenerateMetricError("metric matrix is not symmetric")
    ev = np.linalg.eigvalsh(g)
    tiny = 1e-12 * scale
    if np.any(np.abs(ev) <= tiny):
        raise DegenerateMetricError("metric matrix is singular")
    if np.sum(ev > 0) != 1:
        raise DegenerateMetricError(f"metric signature is not (+,-,...,-): eigenvalues {ev}")


def minkowski(n: int = 4) -> MetricField:
    eta = np.diag([1.0] + [-1.0] * (n - 1))
    zeros = np.zeros((n, n, n))
    return MetricField(n, lambda x: eta.copy(), lambda x: zeros.copy(), name="minkowski", constant=True)


PRESET_METRICS = {"minkowski": minkowski}


def preset_metric(name: str, n: int = 4) -> MetricField:
    from .errors import ConfigError

    try:
        return PRESET_METRICS[name](n)
    except KeyError:
        raise ConfigError(f"unknown metric preset {name!r}") from None


def christoffel_at(metric: MetricField, x) -> np.ndarray:
    """Levi-Civita coefficients ``gamma[i, j, k]``, symmetric in (j, k)."""
    x = np.asarray(x, dtype=float)
    ginv = metric.inverse(x)
    dg = metric.derivative(x)  # dg[k, i, j] = d_k g_ij
    # lower[l, j, k] = d_j g_lk + d_k g_lj - d_l g_jk
    lower = np.einsum("jlk->ljk", dg) + np.einsum("klj->ljk", dg) - dg
    gamma = 0.5 * np.einsum("il,ljk->ijk", ginv, lower)
    return 0.5 * (gamma + gamma.transpose(0, 2, 1))


def eta_bar_at(metric: MetricField, U, x, tol: float = 1e-10) -> np.ndarray:
    """Riemannian metric -eta + 2 (eta U)(eta U) built from a unit timelike U."""
    g = metric(x)
    U = np.asarray(U, dtype=float)
    norm = U @ g @ U
    if abs(norm - 1.0) > tol:
        raise PreconditionError(f"U must satisfy eta(U,U)=1, got {norm!r}")
    u_low = g @ U
    return -g + 2.0 * np.outer(u_low, u_low)


def eta_bar_norm(g: np.ndarray, v) -> float:
    v = np.asarray(v, dtype=float)
    return float(np.sqrt(max(v @ g @ v, 0.0)))


def _sqrt_spd(g: np.ndarray):
    w, q = np.linalg.eigh(g)
    if np.any(w <= 0):
        raise PreconditionError("metric is not positive definite")
    s = np.sqrt(w)
    return (q * s) @ q.T, (q / s) @ q.T


def operator_norm(g: np.ndarray, A) -> float:
    """sup_v |A v|_g / |v|_g for a (1,1) tensor ``A[i, j]``."""
    root, inv_root = _sqrt_spd(np.asarray(g, dtype=float))
    return float(np.linalg.norm(root @ np.asarray(A, dtype=float) @ inv_root, ord=2))


def randers_function(metric: MetricField, A, x, y) -> float:
    """F_A(x, y) = sqrt|eta(y, y)| + A_i y^i (both sides of the light cone)."""
    y = np.asarray(y, dtype=float)
    q = metric.inner(x, y, y)
    a = np.asarray(A(x) if callable(A) else A, dtype=float)
    return float(np.sqrt(abs(q)) + a @ y)


def orthonormal_frame(metric: MetricField, x, V) -> np.ndarray:
    """Columns e_0 = V, e_1..e_{n-1} with eta(e_a, e_b) = diag(1, -1, ..., -1)."""
    g = metric(x)
    V = np.asarray(V, dtype=float)
    n = V.size
    vecs = [V / np.sqrt(V @ g @ V)]
    for k in range(n):
        cand = np.zeros(n)
        cand[k] = 1.0
        for e in vecs:
            s = e @ g @ e
            cand = cand - (e @ g @ cand) / s * e
        q = cand @ g @ cand
        if q < -1e-10:
            vecs.append(cand / np.sqrt(-q))
        if len(vecs) == n:
            break
    if len(vecs) != n:
        raise DegenerateMetricError("could not build an orthonormal frame")
    return np.stack(vecs, axis=1)
