"""Invariant suite run by ``lorentzavg check`` over every applicable field preset."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .averaging import averaged_gamma
from .config import field_params, make_config
from .connections import contract, decompose_LT, lorentz_gamma, nonlinear_connection, spray_at, tilde_gamma
from .dynamics import constraint_drift, integrate_lorentz
from .fields import _PRESETS, faraday_at, gauge_transform, preset_field
from .geometry import christoffel_at, preset_metric
from .kinetics import HyperboloidDistribution, boosted_center, hyperboloid_lift, moments


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    limit: float

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.value:.3e} (limit {self.limit:.1e})"


def _states(metric, n, rng, count):
    xs = rng.normal(scale=0.5, size=(count, n))
    ys = np.array([hyperboloid_lift(metric, x, rng.normal(scale=0.5, size=n - 1)) for x in xs])
    return xs, ys


def _hessian_gap(metric, faraday, x, y, h=1e-4):
    n = y.size
    H = np.zeros((n, n, n))
    eye = np.eye(n) * h
    G = lambda v: spray_at(metric, faraday, x, v)  # noqa: E731
    for j in range(n):
        for k in range(n):
            H[:, j, k] = (G(y + eye[j] + eye[k]) - G(y + eye[j] - eye[k])
                          - G(y - eye[j] + eye[k]) + G(y - eye[j] - eye[k])) / (4 * h * h)
    return float(np.max(np.abs(0.5 * H - lorentz_gamma(metric, faraday, x, y))))


def run_checks(config: Mapping | None = None, samples: int = 5, seed: int = 0) -> list[CheckResult]:
    cfg = make_config(config)
    n = int(cfg["n"])
    metric = preset_metric(cfg["metric"], n)
    rng = np.random.default_rng(seed)
    out: list[CheckResult] = []
    lam = lambda x: math.sin(x[0]) * x[1] + 0.3 * x[-1] ** 2  # noqa: E731
    for name in _PRESETS:
        try:
            fld = preset_field(name, field_params(cfg), n)
        except Exception:  # preset not available in this dimension
            continue
        F = fld.faraday
        xs, ys = _states(metric, n, rng, samples)
        pot_gap = max(float(np.max(np.abs(faraday_at(fld.potential, x) - F(x)))) for x in xs)
        gauged = gauge_transform(fld.potential, lam)
        gauge_gap = max(
            float(np.max(np.abs(lorentz_gamma(metric, lambda z: faraday_at(gauged, z), x, y)
                                - lorentz_gamma(metric, F, x, y))))
            for x, y in zip(xs, ys)
        )
        euler = max(float(np.max(np.abs(nonlinear_connection(metric, F, x, y) @ y - spray_at(metric, F, x, y))))
                    for x, y in zip(xs, ys))
        hess = max(_hessian_gap(metric, F, x, y) for x, y in zip(xs, ys))
        trans = max(float(np.max(np.abs(contract(decompose_LT(metric, F, x, y)[1], y)))) for x, y in zip(xs, ys))
        tilde = max(float(np.max(np.abs(contract(tilde_gamma(metric, F, x, y) - lorentz_gamma(metric, F, x, y), y))))
                    for x, y in zip(xs, ys))
        dist = HyperboloidDistribution("gaussian_bump", boosted_center(0.5, n), 0.02)
        moms = moments(dist, metric, xs[0])
        avg = averaged_gamma(metric, F, moms, xs[0])
        sym = float(np.max(np.abs(avg - avg.transpose(0, 2, 1))))
        dirac = HyperboloidDistribution("dirac", ys[0])
        cold = float(np.max(np.abs(averaged_gamma(metric, F, moments(dirac, metric, xs[0]), xs[0])
                                   - lorentz_gamma(metric, F, xs[0], ys[0]))))
        out += [
            CheckResult(f"{name}: potential vs closed-form Faraday", pot_gap <= 1e-8, pot_gap, 1e-8),
            CheckResult(f"{name}: gauge invariance of the Lorentz connection", gauge_gap <= 1e-8, gauge_gap, 1e-8),
            CheckResult(f"{name}: y.N = G", euler <= 1e-10, euler, 1e-10),
            CheckResult(f"{name}: Hessian of the spray", hess <= 1e-6, hess, 1e-6),
            CheckResult(f"{name}: transversality of T", trans <= 1e-12, trans, 1e-12),
            CheckResult(f"{name}: tilde connection on the hyperboloid", tilde <= 1e-12, tilde, 1e-12),
            CheckResult(f"{name}: averaged coefficients symmetric", sym <= 1e-14, sym, 1e-14),
            CheckResult(f"{name}: dirac average equals Lorentz at V", cold <= 1e-12, cold, 1e-12),
        ]
        if name == "null":
            flat = float(np.max(np.abs(averaged_gamma(metric, F, moms, xs[0]) - christoffel_at(metric, xs[0]))))
            out.append(CheckResult("null: averaged connection reduces to Christoffel", flat == 0.0, flat, 0.0))
        traj = integrate_lorentz(metric, F, xs[0], ys[0], 2.0, 1e-10)
        drift = constraint_drift(traj, metric)
        out.append(CheckResult(f"{name}: hyperboloid drift over a short run", drift <= 1e-8, drift, 1e-8))
    return out
