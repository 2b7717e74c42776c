"""The fiber-averaged Lorentz connection and its distance to the Lorentz connection.

The averaged coefficients depend on the distribution only through the
first and third moments:

    <Gamma>^i_jk = Gamma^i_jk + 1/2 (F^i_j <y>_k + F^i_k <y>_j)
                   + 1/2 F^i_m (<y^m> eta_jk - eta_js eta_kl <y^m y^s y^l>)
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .connections import Faraday, contract, faraday_value, lorentz_gamma
from .errors import PreconditionError
from .geometry import MetricField, christoffel_at, eta_bar_at, operator_norm
from .kinetics import HyperboloidDistribution, MomentSet, fiber_nodes, moments, sample_ensemble


def averaged_gamma(metric: MetricField, faraday: Faraday, moms: MomentSet, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    g = metric(x)
    Fm = metric.inverse(x) @ faraday_value(faraday, x)
    m1_low = g @ moms.m1
    first = Fm[:, :, None] * m1_low[None, None, :]
    cubic = np.einsum("msl,sj,lk->mjk", moms.m3, g, g)
    out = (
        christoffel_at(metric, x)
        + 0.5 * (first + first.transpose(0, 2, 1))
        + 0.5 * (Fm @ moms.m1)[:, None, None] * g[None, :, :]
        - 0.5 * np.einsum("im,mjk->ijk", Fm, cubic)
    )
    return 0.5 * (out + out.transpose(0, 2, 1))


MomentSource = Union[MomentSet, Callable[[np.ndarray], MomentSet]]


@dataclass
class AveragedConnectionField:
    """Affine connection x -> <Gamma>(x), fed by fixed moments or a moment provider."""

    metric: MetricField
    faraday: Faraday
    source: MomentSource
    y_dependent: bool = False

    def moments_at(self, x) -> MomentSet:
        return self.source(np.asarray(x, dtype=float)) if callable(self.source) else self.source

    def __call__(self, x, y=None):
        c = averaged_gamma(self.metric, self.faraday, self.moments_at(x), x)
        if y is None:
            return c
        y = np.asarray(y, dtype=float)
        return np.broadcast_to(c, y.shape[:-1] + c.shape)


def delta_tensor(moms: MomentSet, y) -> np.ndarray:
    return moms.m1 - np.asarray(y, dtype=float)


def centered_moments(moms: MomentSet):
    """<delta delta> and <delta delta delta> for delta = <y> - y, from raw moments."""
    m1, m2, m3 = moms.m1, moms.m2, moms.m3
    c2 = m2 - np.outer(m1, m1)
    m12 = np.einsum("i,jk->ijk", m1, m2)
    sym = (m12 + m12.transpose(1, 0, 2) + m12.transpose(1, 2, 0))
    c3 = -(m3 - sym + 2.0 * np.einsum("i,j,k->ijk", m1, m1, m1))
    return c2, c3


def correction_tensors(moms: MomentSet, y):
    """Second- and third-order correction vectors (O2, O3) at velocity ``y``."""
    y = np.asarray(y, dtype=float)
    g = moms.eta
    y_low = g @ y
    c = float(delta_tensor(moms, y) @ y_low)
    c2, c3 = centered_moments(moms)
    c2_yy = float(y_low @ c2 @ y_low)
    m1_y = float(moms.m1 @ y_low)
    O2 = 0.5 * (moms.m1 * c * c + moms.m1 * c2_yy + 2.0 * m1_y * (c2 @ y_low))
    O3 = 0.5 * np.einsum("msl,s,l->m", c3, y_low, y_low)
    return O2, O3


@dataclass
class DifferenceReport:
    """Both evaluations of (Lorentz - averaged)(y, y) and their pieces."""

    closed: np.ndarray
    direct: np.ndarray
    leading: np.ndarray
    second_order: np.ndarray
    third_order: np.ndarray
    O2: np.ndarray
    O3: np.ndarray

    @property
    def residual(self) -> float:
        return float(np.max(np.abs(self.closed - self.direct)))


def connection_difference(metric: MetricField, faraday: Faraday, moms: MomentSet, x, y) -> DifferenceReport:
    """Direct subtraction versus the leading + O2 - O3 closed form.

    The leading term is F^i_m delta^m (delta . y), which is the same vector as
    -(iota_delta F)^sharp (iota_y delta).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    g = metric(x)
    Fm = metric.inverse(x) @ faraday_value(faraday, x)
    direct = contract(lorentz_gamma(metric, faraday, x, y) - averaged_gamma(metric, faraday, moms, x), y)
    delta = delta_tensor(moms, y)
    leading = Fm @ delta * float(delta @ g @ y)
    O2, O3 = correction_tensors(moms, y)
    second, third = Fm @ O2, -(Fm @ O3)
    return DifferenceReport(leading + second + third, direct, leading, second, third, O2, O3)


def _support_samples(dist: HyperboloidDistribution, metric: MetricField, x, samples: int, seed: int):
    nodes, _ = fiber_nodes(dist, metric, x)
    if dist.kind == "dirac" or samples <= 0:
        return nodes
    extra = sample_ensemble(dist, metric, x, samples, seed).y
    return np.concatenate([nodes, extra])


def connection_distance(connA, connB, metric: MetricField, dist: HyperboloidDistribution, x,
                        samples: int = 256, seed: int = 0, moms: MomentSet | None = None) -> float:
    """Sampled sup of |(A - B)(X, X)| / |X|^2 in the eta-bar norm, over X in the support.

    The probe set is the quadrature nodes of the support followed by
    ``samples`` seeded draws from the distribution. Draws are prefix stable,
    so raising ``samples`` can only raise the estimate.
    """
    x = np.asarray(x, dtype=float)
    if moms is None:
        moms = moments(dist, metric, x)
    gbar = eta_bar_at(metric, moms.mean_direction, x)
    X = _support_samples(dist, metric, x, samples, seed)
    diff = contract(_coeffs(connA, x, X) - _coeffs(connB, x, X), X)
    num = np.sqrt(np.einsum("pi,ij,pj->p", diff, gbar, diff))
    den = np.einsum("pi,ij,pj->p", X, gbar, X)
    return float(np.max(num / den))


def _coeffs(conn, x, X):
    if getattr(conn, "y_dependent", True):
        return conn(x, X)
    c = conn(x)
    return np.broadcast_to(c, X.shape[:-1] + c.shape)


@dataclass
class ConvexConnection:
    """The family ((xi_max - xi) A + xi B) / xi_max."""

    A: object
    B: object
    wA: float
    wB: float

    @property
    def y_dependent(self) -> bool:
        return getattr(self.A, "y_dependent", True) or getattr(self.B, "y_dependent", True)

    def __call__(self, x, y=None):
        if self.y_dependent:
            a, b = _coeffs(self.A, x, np.asarray(y, float)), _coeffs(self.B, x, np.asarray(y, float))
        else:
            a, b = self.A(x), self.B(x)
            if y is not None:
                a = np.broadcast_to(a, np.shape(y)[:-1] + a.shape)
                b = np.broadcast_to(b, np.shape(y)[:-1] + b.shape)
        return self.wA * a + self.wB * b


def convex_interpolate(connA, connB, xi: float, xi_max: float) -> ConvexConnection:
    if not xi_max > 0:
        raise PreconditionError("xi_max must be positive")
    if not 0.0 <= xi <= xi_max:
        raise PreconditionError(f"xi={xi!r} outside [0, {xi_max!r}]")
    return ConvexConnection(connA, connB, (xi_max - xi) / xi_max, xi / xi_max)


def distance_bound_value(normF: float, alpha: float, C: float = 2.0, C2: float = 1.0, C3: float = 1.0) -> float:
    """||F|| C a^2 + 2 C2^2 a^2 (1 + a) + C3^3 a^3 (1 + a)."""
    a = alpha
    return normF * C * a * a + 2.0 * C2**2 * a * a * (1.0 + a) + C3**3 * a**3 * (1.0 + a)


def distance_bound(metric: MetricField, faraday: Faraday, moms: MomentSet, x,
                   C: float = 2.0, C2: float = 1.0, C3: float = 1.0) -> float:
    """Right-hand side of the connection-distance estimate for these moments."""
    x = np.asarray(x, dtype=float)
    gbar = eta_bar_at(metric, moms.mean_direction, x)
    Fm = metric.inverse(x) @ faraday_value(faraday, x)
    return distance_bound_value(operator_norm(gbar, Fm), moms.alpha, C, C2, C3)

