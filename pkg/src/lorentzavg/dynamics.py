"""Integration of the Lorentz force equation and of auto-parallel curves.

Single trajectories are integrated in their own parameter (proper time for
the Lorentz equation, the affine parameter for auto-parallels) with the
Dormand-Prince 5(4) stepper from SciPy, stopping when the coordinate time
x^0 has advanced by the requested lab interval. Particle clouds are advanced
jointly in lab time.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import RK45
from scipy.interpolate import BPoly
from scipy.optimize import brentq

from .connections import Faraday, contract, spray_at
from .errors import AdmissibilityError, ConeProximityError, PreconditionError, StiffnessError
from .geometry import MetricField, christoffel_at

CONE_MARGIN = 0.1
MAX_STEPS = 2_000_000
_HORIZON = 1e12


@dataclass
class Trajectory:
    """Samples (tau, t, x, y) plus the acceleration a = dy/dtau at each sample."""

    tau: np.ndarray
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    a: np.ndarray
    steps: int = 0
    rejected: int = 0
    tol: float = 0.0

    def __len__(self):
        return len(self.t)

    def eta_norm(self, metric: MetricField) -> np.ndarray:
        return np.array([metric.inner(x, y, y) for x, y in zip(self.x, self.y)])

    def final_state(self):
        return self.x[-1].copy(), self.y[-1].copy()

    def to_csv(self, path, metric: MetricField) -> None:
        n = self.x.shape[1]
        q = self.eta_norm(metric)
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["tau", "t"] + [f"x{i}" for i in range(n)] + [f"y{i}" for i in range(n)] + ["eta_norm"])
            for k in range(len(self)):
                row = [self.tau[k], self.t[k], *self.x[k], *self.y[k], q[k]]
                wr.writerow([repr(float(v)) for v in row])


class _Counted:
    """Wraps a right-hand side and counts evaluations."""

    def __init__(self, fun):
        self.fun = fun
        self.calls = 0

    def __call__(self, s, z):
        self.calls += 1
        return self.fun(s, z)


def _check_initial(metric: MetricField, x0, y0):
    q = metric.inner(x0, y0, y0)
    if abs(q - 1.0) > 1e-10:
        raise PreconditionError(f"initial velocity must satisfy eta(y,y)=1, got {q!r}")
    if y0[0] <= 0:
        raise PreconditionError("initial velocity must be future directed")


def _integrate(accel: Callable, metric: MetricField, x0, y0, T_lab: float, tol: float,
               watch_cone: bool, t_eval: Optional[Sequence[float]] = None) -> Trajectory:
    x0 = np.asarray(x0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    n = x0.size
    target = x0[0] + T_lab
    sign = 1.0 if T_lab >= 0 else -1.0

    def rhs(s, z):
        x, y = z[:n], z[n:]
        try:
            return np.concatenate([y, -accel(x, y)])
        except AdmissibilityError as exc:
            raise ConeProximityError(str(exc)) from exc

    fun = _Counted(rhs)
    solver = RK45(fun, 0.0, np.concatenate([x0, y0]), sign * _HORIZON, rtol=tol, atol=tol)
    taus, states = [0.0], [solver.y.copy()]
    dense = []
    done = T_lab == 0
    while not done:
        if len(taus) > MAX_STEPS:
            raise StiffnessError("step budget exhausted")
        msg = solver.step()
        if solver.status == "failed":
            raise StiffnessError(f"integrator failed at tau={solver.t!r}: {msg}")
        z = solver.y
        if watch_cone:
            q = metric.inner(z[:n], z[n:], z[n:])
            if q < CONE_MARGIN:
                raise ConeProximityError(f"eta(y,y) dropped to {q:.3e} at tau={solver.t!r}")
        if z[n] <= 0:
            raise PreconditionError("velocity stopped being future directed")
        sol = solver.dense_output()
        dense.append(sol)
        if (z[0] - target) * sign >= 0:
            t_prev = solver.t_old
            s_star = _crossing(sol, t_prev, solver.t, target)
            z_star = sol(s_star)
            z_star[0] = target
            taus.append(s_star)
            states.append(z_star)
            done = True
        else:
            taus.append(solver.t)
            states.append(z.copy())

    tau = np.array(taus)
    Z = np.array(states)
    if t_eval is not None:
        tau, Z = _resample_lab(tau, Z, dense, np.asarray(t_eval, dtype=float) + x0[0])
    accepted = len(dense)
    attempts = (fun.calls - 2) // 6
    A = -np.array([accel(z[:n], z[n:]) for z in Z])
    return Trajectory(tau, Z[:, 0].copy(), Z[:, :n].copy(), Z[:, n:].copy(), A,
                      steps=accepted, rejected=max(attempts - accepted, 0), tol=tol)


def _crossing(sol, lo, hi, value):
    """Parameter in [lo, hi] where the dense output's x^0 equals ``value``."""

    def f(s):
        return sol(s)[0] - value

    fa, fb = f(lo), f(hi)
    if fa * fb > 0:
        return lo if abs(fa) < abs(fb) else hi
    if fa == 0:
        return lo
    return brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def _resample_lab(tau, Z, dense, grid):
    """Evaluate dense output where x^0 hits each value of ``grid``."""
    out_tau, out_z = [], []
    for t in grid:
        if t == Z[0, 0]:
            out_tau.append(tau[0])
            out_z.append(Z[0])
            continue
        direction = np.sign(Z[-1, 0] - Z[0, 0])
        k = int(np.searchsorted(Z[:, 0] * direction, t * direction))
        k = min(max(k, 1), len(dense))
        sol = dense[k - 1]
        lo, hi = tau[k - 1], tau[k]
        s = _crossing(sol, lo, hi, t)
        z = sol(s)
        z[0] = t
        out_tau.append(s)
        out_z.append(z)
    return np.array(out_tau), np.array(out_z)


def integrate_lorentz(metric: MetricField, faraday: Faraday, x0, y0, T_lab: float, tol: float = 1e-10,
                      t_eval: Optional[Sequence[float]] = None) -> Trajectory:
    """Solve x'' + G(x, x') = 0 with the Lorentz spray, in proper time.

    The run stops when x^0 has advanced by ``T_lab`` (negative values
    integrate backward). ``t_eval`` gives lab-time offsets for resampling.
    """
    _check_initial(metric, x0, y0)

    def accel(x, y):
        return spray_at(metric, faraday, x, y)

    return _integrate(accel, metric, x0, y0, T_lab, tol, True, t_eval)


def integrate_autoparallel(conn_field, metric: MetricField, x0, y0, T_lab: float, tol: float = 1e-10,
                           t_eval: Optional[Sequence[float]] = None) -> Trajectory:
    """Solve x'' + Gamma(x[, x'])(x', x') = 0 for any connection field.

    ``conn_field(x, y)`` returns coefficients; affine fields ignore ``y``.
    Cone proximity is only enforced for velocity-dependent fields, since an
    affine auto-parallel may legitimately leave the unit hyperboloid.
    """
    _check_initial(metric, x0, y0)
    y_dep = getattr(conn_field, "y_dependent", True)

    def accel(x, y):
        return contract(conn_field(x, y) if y_dep else conn_field(x), y)

    return _integrate(accel, metric, x0, y0, T_lab, tol, y_dep, t_eval)


def constraint_drift(traj: Trajectory, metric: MetricField) -> float:
    return float(np.max(np.abs(traj.eta_norm(metric) - 1.0)))


def reparameterize(traj: Trajectory, target: str = "lab_time", grid=None) -> Trajectory:
    """Resample on a grid of lab time (``"lab_time"``) or proper time (``"proper_time"``).

    Positions use quintic Hermite interpolation (value, first and second
    derivative), velocities use cubic Hermite (value and derivative), with
    dt/dtau = y^0 converting derivatives between the two parameters. The
    default grid is uniform with the same number of samples.
    """
    if np.any(traj.y[:, 0] <= 0):
        raise PreconditionError("reparameterization needs y^0 > 0")
    y0 = traj.y[:, 0:1]
    a0 = traj.a[:, 0:1]
    if target == "lab_time":
        s = traj.t
        dx = traj.y / y0
        ddx = (traj.a * y0 - traj.y * a0) / y0**3
        dy = traj.a / y0
        dtau = 1.0 / y0[:, 0]
        ddtau = -a0[:, 0] / y0[:, 0] ** 3
        other = traj.tau
    elif target == "proper_time":
        s = traj.tau
        dx, ddx, dy = traj.y, traj.a, traj.a
        dtau = y0[:, 0]
        ddtau = a0[:, 0]
        other = traj.t
    else:
        raise PreconditionError(f"unknown target {target!r}")
    if grid is None:
        grid = np.linspace(s[0], s[-1], len(s))
    grid = np.asarray(grid, dtype=float)
    order = np.argsort(s)
    s = s[order]
    xs = BPoly.from_derivatives(s, np.stack([traj.x[order], dx[order], ddx[order]], axis=1))
    ys = BPoly.from_derivatives(s, np.stack([traj.y[order], dy[order]], axis=1))
    other_p = BPoly.from_derivatives(s, np.stack([other[order], dtau[order], ddtau[order]], axis=1))
    x_new = xs(grid)
    y_new = ys(grid)
    dyds = ys.derivative()(grid)
    o_new = other_p(grid)
    if target == "lab_time":
        a_new = dyds * y_new[:, 0:1]
        return replace(traj, tau=o_new, t=grid.copy(), x=x_new, y=y_new, a=a_new)
    return replace(traj, tau=grid.copy(), t=o_new, x=x_new, y=y_new, a=dyds)


# ----------------------------------------------------------------------------------------------
# particle clouds in lab time


def faraday_batch(faraday: Faraday, X: np.ndarray) -> np.ndarray:
    """Faraday tensors at each row of ``X``."""
    if not callable(faraday):
        F = np.asarray(faraday, dtype=float)
        return np.broadcast_to(F, X.shape[:-1] + F.shape)
    if getattr(faraday, "vectorized", False):
        return np.asarray(faraday(X), dtype=float)
    return np.stack([np.asarray(faraday(x), dtype=float) for x in X])


def metric_batch(metric: MetricField, X: np.ndarray):
    """(eta, eta^-1, Christoffel) evaluated at each row of ``X``."""
    if metric.constant:
        x = X[0]
        shape = (len(X),)
        g, gi, ga = metric(x), metric.inverse(x), christoffel_at(metric, x)
        return (np.broadcast_to(g, shape + g.shape), np.broadcast_to(gi, shape + gi.shape),
                np.broadcast_to(ga, shape + ga.shape))
    g = np.stack([metric(x) for x in X])
    gi = np.stack([metric.inverse(x) for x in X])
    ga = np.stack([christoffel_at(metric, x) for x in X])
    return g, gi, ga


def lorentz_lab_rhs(metric: MetricField, faraday: Faraday, X: np.ndarray, Y: np.ndarray):
    """(dx/dt, dy/dt) for a batch of Lorentz particles in lab time."""
    g, gi, ga = metric_batch(metric, X)
    Fm = np.einsum("pik,pkj->pij", gi, faraday_batch(faraday, X))
    q = np.einsum("pi,pij,pj->p", Y, g, Y)
    if np.any(q < CONE_MARGIN):
        raise ConeProximityError(f"eta(y,y) dropped to {q.min():.3e}")
    acc = np.einsum("pijk,pj,pk->pi", ga, Y, Y) + np.sqrt(q)[:, None] * np.einsum("pij,pj->pi", Fm, Y)
    inv = 1.0 / Y[:, 0:1]
    return Y * inv, -acc * inv


def integrate_ensemble(particles, metric: MetricField, faraday: Faraday, dt: float, tol: float = 1e-10):
    """Advance every particle of an ensemble by lab time ``dt``."""
    from .kinetics import Ensemble

    N, n = particles.y.shape

    def rhs(t, z):
        X = z[: N * n].reshape(N, n)
        Y = z[N * n :].reshape(N, n)
        dx, dy = lorentz_lab_rhs(metric, faraday, X, Y)
        return np.concatenate([dx.ravel(), dy.ravel()])

    z0 = np.concatenate([particles.x.ravel(), particles.y.ravel()])
    if dt == 0:
        return Ensemble(particles.x, particles.y, particles.weights, particles.t)
    z = step_to(rhs, particles.t, z0, particles.t + dt, tol)
    return Ensemble(z[: N * n].reshape(N, n), z[N * n :].reshape(N, n), particles.weights, particles.t + dt)


def step_to(rhs, t0: float, z0: np.ndarray, t1: float, tol: float, t_eval=None):
    """Integrate an autonomous-in-form system from t0 to t1.

    Returns the end state, or an array of states at ``t_eval`` when given.
    """
    solver = RK45(rhs, t0, z0, t1, rtol=tol, atol=tol)
    out = []
    grid = None if t_eval is None else np.asarray(t_eval, dtype=float)
    k = 0
    if grid is not None:
        while k < len(grid) and grid[k] <= t0:
            out.append(z0.copy())
            k += 1
    steps = 0
    while solver.status == "running":
        solver.step()
        steps += 1
        if solver.status == "failed":
            raise StiffnessError(f"integrator failed at t={solver.t!r}")
        if steps > MAX_STEPS:
            raise StiffnessError("step budget exhausted")
        if grid is not None and k < len(grid):
            sol = solver.dense_output()
            while k < len(grid) and grid[k] <= solver.t:
                out.append(solver.y.copy() if grid[k] == solver.t else sol(grid[k]))
                k += 1
    if grid is None:
        return solver.y.copy()
    while k < len(grid):
        out.append(solver.y.copy())
        k += 1
    return np.array(out)
