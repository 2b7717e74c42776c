"""Velocity distributions on the unit hyperboloid and their fiber moments.

Smooth distributions are integrated with a tensor-product Gauss-Legendre rule
in the chart ``y = e_0 u^0 + e_a u^a`` of an orthonormal frame adapted to the
center velocity, where ``u^0 = sqrt(1 + |u|^2)``. In this chart the invariant
measure is ``du / u^0`` and, when the mean direction is the frame's e_0, the
auxiliary Riemannian metric is the identity. The uniform ball, whose density
jumps at the edge, uses a polar product rule instead of the box grid.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import MomentError, PreconditionError
from .geometry import MetricField, minkowski, orthonormal_frame

KINDS = ("dirac", "gaussian_bump", "uniform_ball", "ensemble")
DENSITY_FLOOR = 1e-12
DEFAULT_NODES = {2: 64, 3: 40, 4: 24}


@dataclass
class Ensemble:
    """Weighted particles; rows of ``x`` and ``y`` are positions and 4-velocities."""

    x: np.ndarray
    y: np.ndarray
    weights: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.y = np.atleast_2d(np.asarray(self.y, dtype=float))
        self.x = np.broadcast_to(np.asarray(self.x, dtype=float), self.y.shape).copy()
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if self.weights.shape[0] != self.y.shape[0]:
            raise PreconditionError("one weight per particle is required")

    def __len__(self):
        return self.y.shape[0]


@dataclass
class HyperboloidDistribution:
    """A compactly supported one-particle distribution on the velocity fiber.

    ``sigma`` is the Gaussian width (or per-axis widths) measured in the
    frame chart. ``r_cut`` is the support radius in the same units; it
    defaults to ``4 sigma`` for the bump and to ``sigma`` for the ball.
    For ``kind="ensemble"`` the particle velocities live in ``particles``.
    """

    kind: str
    center: Optional[np.ndarray] = None
    sigma: float | Sequence[float] = 0.05
    r_cut: Optional[float] = None
    particles: Optional[Ensemble] = None
    nodes_per_axis: Optional[int] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PreconditionError(f"unknown distribution kind {self.kind!r}")
        if self.kind == "ensemble":
            if self.particles is None or len(self.particles) == 0:
                raise PreconditionError("ensemble distribution needs particles")
        elif self.center is None:
            raise PreconditionError(f"{self.kind} distribution needs a center velocity")
        if self.center is not None:
            self.center = np.asarray(self.center, dtype=float)

    @property
    def widths(self) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.sigma, dtype=float))

    @property
    def radius(self) -> float:
        if self.r_cut is not None:
            return float(self.r_cut)
        s = float(np.max(self.widths))
        return 4.0 * s if self.kind == "gaussian_bump" else s


def boosted_center(rapidity: float, n: int = 4, axis: int = 1) -> np.ndarray:
    v = np.zeros(n)
    v[0] = math.cosh(rapidity)
    v[axis] = math.sinh(rapidity)
    return v


@dataclass
class MomentSet:
    """Normalized fiber moments at one point.

    ``eta`` keeps the metric matrix at that point so that downstream tensors
    can lower indices without re-evaluating the metric.
    """

    vol: float
    m1: np.ndarray
    m2: np.ndarray
    m3: np.ndarray
    alpha: float
    energy: float
    eta: np.ndarray = field(repr=False, default=None)

    @property
    def mean_direction(self) -> np.ndarray:
        q = float(self.m1 @ self.eta @ self.m1)
        if q <= 0:
            raise MomentError("mean velocity is not timelike")
        return self.m1 / math.sqrt(q)

    def warm_statistic(self) -> float:
        """<(y - <y>)(y - <y>)> contracted with eta."""
        c2 = self.m2 - np.outer(self.m1, self.m1)
        return float(np.einsum("jk,jk->", c2, self.eta))


def hyperboloid_lift(metric: MetricField, x, ybar) -> np.ndarray:
    """Complete spatial components to a future unit vector: solve eta(y, y) = 1 for y^0."""
    g = metric(x)
    ybar = np.asarray(ybar, dtype=float)
    a = g[0, 0]
    b = 2.0 * (g[0, 1:] @ ybar)
    c = ybar @ g[1:, 1:] @ ybar - 1.0
    disc = b * b - 4.0 * a * c
    if a <= 0 or disc < 0:
        raise PreconditionError("no future unit vector with these spatial components")
    y0 = (-b + math.sqrt(disc)) / (2.0 * a)
    if y0 <= 0:
        raise PreconditionError("lifted vector is not future directed")
    return np.concatenate([[y0], ybar])


def volume_density(metric: MetricField, x, y) -> float:
    y = np.asarray(y, dtype=float)
    if y[..., 0].min() <= 0:
        raise PreconditionError("volume density needs y^0 > 0")
    return math.sqrt(abs(np.linalg.det(metric(x)))) / y[..., 0]


def _profile(dist: HyperboloidDistribution, u: np.ndarray) -> np.ndarray:
    """Unnormalized density in the frame chart (without the 1/u^0 measure)."""
    if dist.kind == "gaussian_bump":
        w = dist.widths
        rho2 = np.sum((u / w) ** 2, axis=-1)
        kappa2 = (dist.radius / float(np.max(w))) ** 2
        cut = np.clip(1.0 - rho2 / kappa2, 0.0, None) ** 2
        return np.exp(-0.5 * rho2) * cut
    r2 = np.sum(u * u, axis=-1)
    return (r2 < dist.radius**2).astype(float)


def _box_half_widths(dist: HyperboloidDistribution, m: int) -> np.ndarray:
    if dist.kind == "gaussian_bump":
        w = np.broadcast_to(dist.widths, (m,))
        return dist.radius / float(np.max(dist.widths)) * w
    return np.full(m, dist.radius)


def _polar_rule(m: int, k: int, R: float):
    """Product rule on the ball |u| < R: Gauss-Legendre in r^m, exact angular rules.

    A tensor grid over the bounding box resolves the hard edge of the ball
    only to first order; integrating in polar form avoids that.
    """
    t, w = np.polynomial.legendre.leggauss(k)
    # r = R s^(1/m) maps dr r^(m-1) to R^m ds / m
    r = R * ((t + 1.0) / 2.0) ** (1.0 / m)
    wr = w / 2.0 * R**m / m
    if m == 1:
        dirs, wd = np.array([[1.0], [-1.0]]), np.ones(2)
    elif m == 2:
        phi = 2.0 * np.pi * (np.arange(2 * k) + 0.5) / (2 * k)
        dirs, wd = np.stack([np.cos(phi), np.sin(phi)], axis=-1), np.full(2 * k, np.pi / k)
    else:
        phi = 2.0 * np.pi * (np.arange(2 * k) + 0.5) / (2 * k)
        c, wc = t, w
        sn = np.sqrt(1.0 - c * c)
        dirs = np.stack([np.outer(sn, np.cos(phi)), np.outer(sn, np.sin(phi)),
                         np.outer(c, np.ones_like(phi))], axis=-1).reshape(-1, 3)
        wd = np.outer(wc, np.full(2 * k, np.pi / k)).reshape(-1)
    u = (r[:, None, None] * dirs[None, :, :]).reshape(-1, m)
    return u, np.outer(wr, wd).reshape(-1)


def fiber_nodes(dist: HyperboloidDistribution, metric: MetricField, x):
    """Quadrature nodes on the support: (velocities, weights including density and measure).

    Nodes carrying density below ``DENSITY_FLOOR`` times the maximum are dropped.
    For dirac and ensemble kinds the nodes are the atoms themselves.
    """
    x = np.asarray(x, dtype=float)
    if dist.kind == "dirac":
        return dist.center[None, :].copy(), np.ones(1)
    if dist.kind == "ensemble":
        return dist.particles.y.copy(), dist.particles.weights.copy()
    n = metric.dim
    m = n - 1
    k = dist.nodes_per_axis or DEFAULT_NODES.get(n, 12)
    if dist.kind == "uniform_ball" and m <= 3:
        u, wq = _polar_rule(m, k, dist.radius)
    else:
        t, w = np.polynomial.legendre.leggauss(k)
        half = _box_half_widths(dist, m)
        grids = np.meshgrid(*[t * h for h in half], indexing="ij")
        u = np.stack([g.reshape(-1) for g in grids], axis=-1)
        wq = np.prod(np.stack(np.meshgrid(*[w * h for h in half], indexing="ij")), axis=0).reshape(-1)
    u0 = np.sqrt(1.0 + np.sum(u * u, axis=-1))
    dens = _profile(dist, u)
    keep = dens > DENSITY_FLOOR * dens.max()
    frame = orthonormal_frame(metric, x, dist.center)
    chart = np.concatenate([u0[keep, None], u[keep]], axis=-1)
    ys = chart @ frame.T
    return ys, wq[keep] * dens[keep] / u0[keep]


def _fsum_moments(ys: np.ndarray, w: np.ndarray):
    """Compensated, fixed-order reductions of sum w, sum w y, sum w yy, sum w yyy."""
    n = ys.shape[1]
    vol = math.fsum(w)
    if not vol > 0:
        raise MomentError("distribution has empty support")
    wy = w[:, None] * ys
    m1 = np.array([math.fsum(wy[:, i]) for i in range(n)]) / vol
    m2 = np.empty((n, n))
    m3 = np.empty((n, n, n))
    for i in range(n):
        for j in range(i, n):
            wyy = wy[:, i] * ys[:, j]
            m2[i, j] = m2[j, i] = math.fsum(wyy) / vol
            for k in range(j, n):
                v = math.fsum(wyy * ys[:, k]) / vol
                for a, b, c in {(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)}:
                    m3[a, b, c] = v
    return vol, m1, m2, m3


def pairwise_diameter(points: np.ndarray, chunk: int = 2048) -> float:
    """Largest Euclidean distance between rows of ``points`` (chunked brute force)."""
    p = np.asarray(points, dtype=float)
    if len(p) < 2:
        return 0.0
    p = p - p.mean(axis=0)
    r = np.sqrt(np.einsum("ij,ij->i", p, p))
    # a farthest-point sweep gives a lower bound D; since |p - q| <= r_p + r_q,
    # only points with r >= D - max(r) can belong to a pair longer than D
    a = p[np.argmax(r)]
    b = p[np.argmax(np.einsum("ij,ij->i", p - a, p - a))]
    lower = float(np.linalg.norm(a - b))
    p = p[r >= lower - r.max() - 1e-12 * max(lower, 1.0)]
    sq = np.einsum("ij,ij->i", p, p)
    best = 0.0
    for s in range(0, len(p), chunk):
        blk = p[s : s + chunk]
        d2 = sq[s : s + chunk, None] + sq[None, :] - 2.0 * blk @ p.T
        best = max(best, float(d2.max()))
    return math.sqrt(max(best, 0.0))


def _diameter(ys: np.ndarray, g: np.ndarray, U: np.ndarray) -> float:
    gbar = _eta_bar_matrix(g, U)
    root = np.linalg.cholesky(gbar).T
    return pairwise_diameter(ys @ root.T)


def _eta_bar_matrix(g: np.ndarray, U: np.ndarray) -> np.ndarray:
    u_low = g @ U
    return -g + 2.0 * np.outer(u_low, u_low)


def _metric_for(x, metric):
    return metric if metric is not None else minkowski(len(np.asarray(x)))


def moments(dist: HyperboloidDistribution, metric: MetricField, x) -> MomentSet:
    x = np.asarray(x, dtype=float)
    g = metric(x)
    if dist.kind == "dirac":
        V = dist.center
        return MomentSet(1.0, V.copy(), np.outer(V, V), np.einsum("i,j,k->ijk", V, V, V), 0.0, float(V[0]), g)
    ys, w = fiber_nodes(dist, metric, x)
    vol, m1, m2, m3 = _fsum_moments(ys, w)
    q = float(m1 @ g @ m1)
    if q <= 0:
        raise MomentError("mean velocity is not timelike")
    alpha = _diameter(ys, g, m1 / math.sqrt(q))
    return MomentSet(vol, m1, m2, m3, alpha, float(ys[:, 0].min()), g)


def support_diameter(dist: HyperboloidDistribution, metric: MetricField, x) -> float:
    """Largest eta-bar chord between support points, with U the normalized mean."""
    return moments(dist, metric, x).alpha


def energy(dist: HyperboloidDistribution, x, metric: Optional[MetricField] = None) -> float:
    """Smallest lab-frame y^0 on the support."""
    if dist.kind == "dirac":
        return float(dist.center[0])
    ys, _ = fiber_nodes(dist, _metric_for(x, metric), x)
    return float(ys[:, 0].min())


def ensemble_statistics(y: np.ndarray, weights: np.ndarray, g: np.ndarray):
    """Fast vectorized moments of a particle cloud: (m1, m2, m3, alpha, E)."""
    w = weights / weights.sum()
    m1 = w @ y
    m2 = np.einsum("p,pi,pj->ij", w, y, y)
    m3 = np.einsum("p,pi,pj,pk->ijk", w, y, y, y)
    U = m1 / math.sqrt(float(m1 @ g @ m1))
    return m1, m2, m3, _diameter(y, g, U), float(y[:, 0].min())


_BATCH = 1024


def sample_ensemble(dist: HyperboloidDistribution, metric: MetricField, x, N: int, seed: int = 0) -> Ensemble:
    """Draw ``N`` equally weighted particles at ``x``.

    Proposals come in fixed batches from one seeded generator and are
    accepted in order, so the first ``N`` samples do not depend on how many
    are requested.
    """
    if N < 1:
        raise PreconditionError("N must be >= 1")
    x = np.asarray(x, dtype=float)
    weights = np.full(N, 1.0 / N)
    if dist.kind == "dirac":
        return Ensemble(x, np.tile(dist.center, (N, 1)), weights)
    rng = np.random.default_rng(seed)
    if dist.kind == "ensemble":
        p = dist.particles.weights / dist.particles.weights.sum()
        idx = rng.choice(len(p), size=N, p=p)
        return Ensemble(x, dist.particles.y[idx], weights)
    m = metric.dim - 1
    frame = orthonormal_frame(metric, x, dist.center)
    half = _box_half_widths(dist, m)
    widths = np.broadcast_to(dist.widths, (m,))
    chosen = []
    count = 0
    while count < N:
        if dist.kind == "gaussian_bump":
            u = rng.standard_normal((_BATCH, m)) * widths
            accept = _profile(dist, u) / np.exp(-0.5 * np.sum((u / widths) ** 2, axis=-1))
        else:
            u = rng.uniform(-1.0, 1.0, (_BATCH, m)) * half
            accept = _profile(dist, u)
        u0 = np.sqrt(1.0 + np.sum(u * u, axis=-1))
        keep = rng.uniform(size=_BATCH) < accept / u0
        chosen.append(np.concatenate([u0[keep, None], u[keep]], axis=-1))
        count += int(keep.sum())
    chart = np.concatenate(chosen)[:N]
    ys = chart @ frame.T
    # re-solve for y^0 so that eta(y, y) = 1 holds to rounding after the frame map
    ys = _lift_rows(metric(x), ys)
    return Ensemble(x, ys, weights)


def _lift_rows(g: np.ndarray, ys: np.ndarray) -> np.ndarray:
    ybar = ys[:, 1:]
    a = g[0, 0]
    b = 2.0 * ybar @ g[0, 1:]
    c = np.einsum("pi,ij,pj->p", ybar, g[1:, 1:], ybar) - 1.0
    y0 = (-b + np.sqrt(b * b - 4.0 * a * c)) / (2.0 * a)
    return np.concatenate([y0[:, None], ybar], axis=1)


def transport_ensemble(particles: Ensemble, metric: MetricField, faraday, dt: float, tol: float = 1e-10) -> Ensemble:
    """Advance every particle by lab time ``dt`` under the Lorentz force."""
    from .dynamics import integrate_ensemble

    return integrate_ensemble(particles, metric, faraday, dt, tol)


def write_ensemble_csv(path, snapshots: Sequence[Ensemble]) -> None:
    """Write snapshots with columns t, id, weight, x0.., y0.."""
    n = snapshots[0].y.shape[1]
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "id", "weight"] + [f"x{i}" for i in range(n)] + [f"y{i}" for i in range(n)])
        for snap in snapshots:
            for pid in range(len(snap)):
                wr.writerow([repr(float(snap.t)), pid, repr(float(snap.weights[pid]))]
                            + [repr(float(v)) for v in snap.x[pid]] + [repr(float(v)) for v in snap.y[pid]])
