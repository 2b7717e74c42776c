"""Paired Lorentz/averaged runs, trajectory-divergence bounds and scaling fits.

``run_comparison`` advances, in lab time and inside one ODE system, the
sampled ensemble, a reference Lorentz particle launched from the normalized
ensemble mean, and the averaged auto-parallel launched from the same state.
The averaged connection reads the ensemble moments at the current lab time
(mode ``"vlasov"``) or the initial ones (mode ``"frozen"``).
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional

import numpy as np
from scipy.stats import linregress

from .averaging import averaged_gamma
from .config import field_params, make_config
from .connections import contract
from .dynamics import lorentz_lab_rhs, step_to
from .errors import PreconditionError
from .fields import preset_field
from .geometry import MetricField, eta_bar_at, operator_norm, preset_metric
from .kinetics import (
    Ensemble,
    HyperboloidDistribution,
    MomentSet,
    boosted_center,
    ensemble_statistics,
    moments,
    sample_ensemble,
    write_ensemble_csv,
)

# ----------------------------------------------------------------------------------------------
# closed-form bounds


def _check_bound_inputs(alpha, E, t, normF):
    if E <= 0:
        raise PreconditionError("energy must be positive")
    if min(alpha, normF) < 0 or np.min(t) < 0:
        raise PreconditionError("alpha, t and ||F|| must be nonnegative")


def position_bound(alpha, E, t, normF, C=2.0, C2=1.0, B2=1.0):
    """2 (C ||F|| + C2^2 (1 + B2 alpha)) alpha^2 E^-2 t^2."""
    _check_bound_inputs(alpha, E, t, normF)
    return 2.0 * (C * normF + C2**2 * (1.0 + B2 * alpha)) * alpha**2 / E**2 * np.asarray(t) ** 2


def velocity_bound(alpha, E, t, normF, K=1.0, K2=1.0, D2=1.0):
    """(K ||F|| + K2^2 (1 + D2 alpha)) alpha^2 E^-1 t."""
    _check_bound_inputs(alpha, E, t, normF)
    return (K * normF + K2**2 * (1.0 + D2 * alpha)) * alpha**2 / E * np.asarray(t)


def t_max_estimate(E, alpha, L0, C, normF):
    """Lab time until the averaged and true trajectories drift apart by L0."""
    denom = alpha * C * normF
    if denom <= 0:
        raise PreconditionError("alpha, C and ||F|| must be positive")
    return E * math.sqrt(L0 / denom)


# ----------------------------------------------------------------------------------------------
# setup


@dataclass
class Setup:
    metric: MetricField
    faraday: Any
    x0: np.ndarray
    dist: HyperboloidDistribution
    ensemble: Ensemble


def _center_rapidity(cfg) -> float:
    if cfg["dist.gamma"] is not None:
        return math.acosh(float(cfg["dist.gamma"]))
    return float(cfg["dist.center_rapidity"])


def build_setup(cfg: Mapping) -> Setup:
    n = int(cfg["n"])
    metric = preset_metric(cfg["metric"], n)
    fld = preset_field(cfg["field.name"], field_params(cfg), n)
    x0 = np.zeros(n) if cfg["dist.x0"] is None else np.asarray(cfg["dist.x0"], dtype=float)
    center = boosted_center(_center_rapidity(cfg), n)
    kind = cfg["dist.kind"]
    sigma = cfg["dist.sigma"]
    if cfg["dist.alpha"] is not None:
        # the support diameter is twice the cut radius: 8 sigma for the bump, 2 r for the ball
        sigma = float(cfg["dist.alpha"]) / (8.0 if kind == "gaussian_bump" else 2.0)
    dist = HyperboloidDistribution(kind, center, sigma, cfg["dist.r_cut"])
    seed = cfg["dist.seed"] if cfg["dist.seed"] is not None else cfg["run.seed"]
    ens = sample_ensemble(dist, metric, x0, int(cfg["dist.N"]), int(seed))
    return Setup(metric, fld.faraday, x0, dist, ens)


# ----------------------------------------------------------------------------------------------
# hypotheses


def check_hypotheses(t, E_series, alpha_series, y_ref, y_avg, m1_series, warm_series,
                     thresholds: Optional[Mapping] = None) -> dict:
    """Diagnostics for the assumptions behind the divergence bounds.

    theta^2 = |y|^2 - |<y>|^2 and theta_bar^2 = |<y>|^2 - |y~|^2 use spatial
    lab components of the reference velocity, the ensemble mean and the
    averaged velocity. The warm-fluid statistic is reported beside them,
    together with 2 |y_vec|^2 W, which is what |theta^2 - theta_bar^2|
    equals at t = 0 for unit-normalized y = y~.
    """
    th = {"E_min": 5.0, "alpha_max": 0.2, "theta_max": 0.1, "adiabatic_max": 0.05}
    th.update(thresholds or {})
    t = np.asarray(t, float)
    E_series = np.asarray(E_series, float)
    sp = lambda v: np.sum(np.asarray(v, float)[:, 1:] ** 2, axis=1)  # noqa: E731
    theta2 = sp(y_ref) - sp(m1_series)
    theta_bar2 = sp(m1_series) - sp(y_avg)
    gap = np.abs(theta2 - theta_bar2)
    warm = np.asarray(warm_series, float)
    adiabatic = float(np.max(np.abs(np.gradient(np.log(E_series), t)))) if len(t) > 1 else 0.0
    E_min = float(E_series.min())
    alpha_max = float(np.max(alpha_series))
    ok = {
        "E": E_min >= th["E_min"],
        "alpha": alpha_max <= th["alpha_max"],
        "theta": float(gap.max()) <= th["theta_max"],
        "adiabatic": adiabatic <= th["adiabatic_max"],
    }
    return {
        "E_min": E_min,
        "alpha_max": alpha_max,
        "theta2": theta2.tolist(),
        "theta_bar2": theta_bar2.tolist(),
        "theta_gap_max": float(gap.max()),
        "warm_statistic": warm.tolist(),
        "warm_statistic_max": float(np.abs(warm).max()),
        "warm_times_2y2_at_0": float(2.0 * sp(y_ref)[0] * warm[0]),
        "adiabaticity": adiabatic,
        "thresholds": dict(th),
        "satisfied": ok,
        "all_satisfied": all(ok.values()),
    }


# ----------------------------------------------------------------------------------------------
# comparison runs


@dataclass
class ComparisonReport:
    t: np.ndarray
    div_x: np.ndarray
    div_v: np.ndarray
    bound_x: np.ndarray
    bound_v: np.ndarray
    alpha: float
    energy: float
    norm_F: float
    constants: dict
    hypotheses: dict
    passed: bool
    tol: float
    extra: dict = field(default_factory=dict)
    ref_states: Optional[np.ndarray] = field(default=None, repr=False)
    avg_states: Optional[np.ndarray] = field(default=None, repr=False)
    snapshots: list = field(default_factory=list, repr=False)

    def multiplier(self, which: str = "x") -> Optional[float]:
        """Smallest factor on the bound that makes the inequality hold."""
        div, bnd = (self.div_x, self.bound_x) if which == "x" else (self.div_v, self.bound_v)
        return _ratio(div, bnd)

    def to_dict(self) -> dict:
        series = [
            {"t": float(a), "div_x": float(b), "bound_x": float(c), "div_v": float(d), "bound_v": float(e)}
            for a, b, c, d, e in zip(self.t, self.div_x, self.bound_x, self.div_v, self.bound_v)
        ]
        return {
            "alpha": self.alpha,
            "energy": self.energy,
            "norm_F": self.norm_F,
            "constants": self.constants,
            "series": series,
            "hypotheses": self.hypotheses,
            "pass": self.passed,
            "multiplier_x": self.multiplier("x"),
            "multiplier_v": self.multiplier("v"),
            "tol": self.tol,
            **self.extra,
        }

    def to_json(self) -> str:
        return json.dumps(_clean(self.to_dict()), sort_keys=True, indent=2)

    def write(self, out_dir) -> dict:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"report": out / "report.json", "series": out / "series.csv", "ensemble": out / "ensemble.csv"}
        paths["report"].write_text(self.to_json() + "\n")
        with open(paths["series"], "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t", "div_x", "bound_x", "div_v", "bound_v"])
            for row in zip(self.t, self.div_x, self.bound_x, self.div_v, self.bound_v):
                wr.writerow([repr(float(v)) for v in row])
        if self.snapshots:
            write_ensemble_csv(paths["ensemble"], self.snapshots)
        return paths


def _ratio(div, bnd) -> Optional[float]:
    mask = bnd > 0
    if not np.any(mask):
        return None
    return float(np.max(div[mask] / bnd[mask]))


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _lab_norm_F(metric: MetricField, faraday, points) -> float:
    best = 0.0
    for x in points:
        g = metric(x)
        U = np.zeros(len(x))
        U[0] = 1.0 / math.sqrt(g[0, 0])
        gbar = eta_bar_at(metric, U, x)
        F = faraday(x) if callable(faraday) else faraday
        best = max(best, operator_norm(gbar, metric.inverse(x) @ np.asarray(F, float)))
    return best


def simulate_pair(setup: Setup, T: float, tol: float, mode: str = "vlasov", n_out: int = 101):
    """Joint lab-time integration; returns (grid, ensemble states, reference states, averaged states)."""
    metric, faraday = setup.metric, setup.faraday
    ens = setup.ensemble
    N, n = ens.y.shape
    w = ens.weights / ens.weights.sum()
    g0 = metric(setup.x0)
    m1_0 = w @ ens.y
    y_start = m1_0 / math.sqrt(float(m1_0 @ g0 @ m1_0))
    rows = N + 1
    X0 = np.vstack([ens.x, setup.x0])
    Y0 = np.vstack([ens.y, y_start])
    frozen = (m1_0, np.einsum("p,pi,pj,pk->ijk", w, ens.y, ens.y, ens.y))
    cut = rows * n

    def rhs(t, z):
        X = z[:cut].reshape(rows, n)
        Y = z[cut : 2 * cut].reshape(rows, n)
        xa, ya = z[2 * cut : 2 * cut + n], z[2 * cut + n :]
        dX, dY = lorentz_lab_rhs(metric, faraday, X, Y)
        if mode == "vlasov":
            Ye = Y[:N]
            m1, m3 = w @ Ye, np.einsum("p,pi,pj,pk->ijk", w, Ye, Ye, Ye)
        else:
            m1, m3 = frozen
        moms = MomentSet(1.0, m1, None, m3, 0.0, 0.0, None)
        acc = contract(averaged_gamma(metric, faraday, moms, xa), ya)
        return np.concatenate([dX.ravel(), dY.ravel(), ya / ya[0], -acc / ya[0]])

    z0 = np.concatenate([X0.ravel(), Y0.ravel(), setup.x0, y_start])
    t0 = float(setup.x0[0])
    grid = t0 + np.linspace(0.0, T, n_out)
    Z = step_to(rhs, t0, z0, t0 + T, tol, t_eval=grid)
    X = Z[:, :cut].reshape(-1, rows, n)
    Y = Z[:, cut : 2 * cut].reshape(-1, rows, n)
    ens_states = (X[:, :N], Y[:, :N])
    ref = np.concatenate([X[:, N], Y[:, N]], axis=1)
    avg = Z[:, 2 * cut :]
    return grid - t0, ens_states, ref, avg, w


def compare_setup(setup: Setup, cfg: Mapping) -> ComparisonReport:
    T, tol = float(cfg["run.T"]), float(cfg["run.tol"])
    n = setup.x0.size
    t, (EX, EY), ref, avg, w = simulate_pair(setup, T, tol, cfg["run.mode"], int(cfg["run.n_out"]))
    g = setup.metric(setup.x0)

    stats = [ensemble_statistics(EY[k], w, g) for k in range(len(t))]
    m1s = np.array([s[0] for s in stats])
    warm = np.array([float(np.einsum("jk,jk->", s[1] - np.outer(s[0], s[0]), g)) for s in stats])
    alpha_series = np.array([s[3] for s in stats])
    E_series = np.array([s[4] for s in stats])

    quad = moments(setup.dist, setup.metric, setup.x0)
    alpha = max(quad.alpha, float(alpha_series.max()))
    energy = min(quad.energy, float(E_series.min()))
    norm_F = _lab_norm_F(setup.metric, setup.faraday, np.vstack([ref[:, :n], avg[:, :n]]))

    consts = {k: float(cfg[f"bounds.{k}"]) for k in ("C", "C2", "B2", "K", "K2", "D2")}
    div_x = np.linalg.norm(avg[:, 1:n] - ref[:, 1:n], axis=1)
    div_v = np.linalg.norm(avg[:, n + 1 :] - ref[:, n + 1 :], axis=1)
    bound_x = position_bound(alpha, energy, t, norm_F, consts["C"], consts["C2"], consts["B2"])
    bound_v = velocity_bound(alpha, energy, t, norm_F, consts["K"], consts["K2"], consts["D2"])
    floor = 10.0 * tol
    passed = bool(np.all(div_x <= bound_x + floor) and np.all(div_v <= bound_v + floor))

    thresholds = {k: float(cfg[f"hypotheses.{k}"]) for k in ("E_min", "alpha_max", "theta_max", "adiabatic_max")}
    hyp = check_hypotheses(t, E_series, alpha_series, ref[:, n:], avg[:, n:], m1s, warm, thresholds)
    drift = float(np.max(np.abs(np.einsum("ki,ij,kj->k", ref[:, n:], g, ref[:, n:]) - 1.0)))
    snaps = [Ensemble(EX[k], EY[k], w, float(t[k])) for k in (0, len(t) // 2, len(t) - 1)]
    # the same inequality with the initial (quadrature) alpha and E, before the cloud shears
    tight_x = position_bound(quad.alpha, quad.energy, t, norm_F, consts["C"], consts["C2"], consts["B2"])
    tight_v = velocity_bound(quad.alpha, quad.energy, t, norm_F, consts["K"], consts["K2"], consts["D2"])
    extra = {
        "multiplier_x_initial": _ratio(div_x, tight_x),
        "multiplier_v_initial": _ratio(div_v, tight_v),
        "mode": cfg["run.mode"],
        "N": int(len(w)),
        "alpha_quadrature": float(quad.alpha),
        "energy_quadrature": float(quad.energy),
        "reference_drift": drift,
        "avg_eta_norm_final": float(avg[-1, n:] @ g @ avg[-1, n:]),
    }
    return ComparisonReport(t, div_x, div_v, bound_x, bound_v, float(alpha), float(energy), float(norm_F),
                            consts, hyp, passed, tol, extra, ref, avg, snaps)


def run_comparison(config: Mapping | None = None) -> ComparisonReport:
    """Build the ensemble from ``config`` and compare Lorentz with averaged dynamics."""
    cfg = make_config(config)
    report = compare_setup(build_setup(cfg), cfg)
    report.extra["config"] = {k: cfg[k] for k in sorted(cfg) if not k.startswith("scaling.")}
    return report


# ----------------------------------------------------------------------------------------------
# scaling study


def _fit(xs, ys) -> dict:
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    if np.any(ys <= 0) or len(xs) < 2:
        return {"exponent": None, "stderr": None, "cold": True, "points": len(xs)}
    fit = linregress(np.log(xs), np.log(ys))
    return {"exponent": float(fit.slope), "stderr": float(fit.stderr), "cold": False, "points": len(xs)}


def _scaling_row(args) -> dict:
    sweep, overrides = args
    rep = run_comparison(overrides)
    return {
        "sweep": sweep,
        "alpha_target": overrides["dist.alpha"],
        "energy_target": overrides["dist.gamma"],
        "alpha": rep.extra["alpha_quadrature"],
        "energy": rep.extra["energy_quadrature"],
        "alpha_run": rep.alpha,
        "energy_run": rep.energy,
        "max_div_x": float(rep.div_x.max()),
        "max_div_v": float(rep.div_v.max()),
        "multiplier_x": rep.multiplier("x"),
        "multiplier_v": rep.multiplier("v"),
        "pass": rep.passed,
        "series_t": rep.t.tolist() if sweep == "base" else None,
        "series_div_x": rep.div_x.tolist() if sweep == "base" else None,
        "series_div_v": rep.div_v.tolist() if sweep == "base" else None,
    }


def scaling_study(config: Mapping | None = None) -> dict:
    """Sweep alpha and E, fit log-log exponents, and fit the early-time growth in t.

    The swept parameters are regressed through their initial quadrature
    values; the run-wide alpha and E used by the bounds are kept in the table.
    """
    cfg = make_config(config)
    base = {k: v for k, v in cfg.items() if not k.startswith("scaling.")}
    jobs = []
    for a in cfg["scaling.alphas"]:
        jobs.append(("alpha", {**base, "dist.alpha": float(a), "dist.gamma": float(cfg["scaling.energy_fixed"])}))
    for e in cfg["scaling.energies"]:
        jobs.append(("energy", {**base, "dist.alpha": float(cfg["scaling.alpha_fixed"]), "dist.gamma": float(e)}))
    jobs.append(("base", {**base, "dist.alpha": float(cfg["scaling.alpha_fixed"]),
                          "dist.gamma": float(cfg["scaling.energy_fixed"])}))
    workers = int(cfg["scaling.workers"])
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_scaling_row, jobs))
    else:
        rows = [_scaling_row(j) for j in jobs]

    a_rows = [r for r in rows if r["sweep"] == "alpha"]
    e_rows = [r for r in rows if r["sweep"] == "energy"]
    b = next(r for r in rows if r["sweep"] == "base")
    t = np.asarray(b["series_t"])
    early = (t > 0) & (t <= float(cfg["scaling.t_early"]))
    fits = {
        "alpha_x": _fit([r["alpha"] for r in a_rows], [r["max_div_x"] for r in a_rows]),
        "alpha_v": _fit([r["alpha"] for r in a_rows], [r["max_div_v"] for r in a_rows]),
        "energy_x": _fit([r["energy"] for r in e_rows], [r["max_div_x"] for r in e_rows]),
        "energy_v": _fit([r["energy"] for r in e_rows], [r["max_div_v"] for r in e_rows]),
        "time_x": _fit(t[early], np.asarray(b["series_div_x"])[early]),
        "time_v": _fit(t[early], np.asarray(b["series_div_v"])[early]),
    }
    table = [{k: v for k, v in r.items() if not k.startswith("series_")} for r in rows]
    return {"fits": fits, "table": table}


def write_scaling(result: dict, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"table": out / "scaling.csv", "fits": out / "scaling_fits.json"}
    cols = list(result["table"][0].keys())
    with open(paths["table"], "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=cols)
        wr.writeheader()
        for row in result["table"]:
            wr.writerow(row)
    paths["fits"].write_text(json.dumps(_clean(result["fits"]), sort_keys=True, indent=2) + "\n")
    return paths


# ----------------------------------------------------------------------------------------------
# frame change


def boost_matrix(rapidity: float, n: int, axis: int) -> np.ndarray:
    L = np.eye(n)
    c, s = math.cosh(rapidity), math.sinh(rapidity)
    L[0, 0] = L[axis, axis] = c
    L[0, axis] = L[axis, 0] = s
    return L


def boosted_setup(setup: Setup, rapidity: float, axis: int) -> Setup:
    """The same physical configuration seen from a frame boosted along ``axis``.

    Only flat metrics are supported: vectors map by the boost, covariant
    Faraday components by the inverse boost on both slots.
    """
    if not setup.metric.constant:
        raise PreconditionError("frame boosts need a constant metric")
    n = setup.x0.size
    L = boost_matrix(rapidity, n, axis)
    Linv = np.linalg.inv(L)
    base = setup.faraday

    def faraday(x):
        x = np.asarray(x, dtype=float)
        F = np.asarray(base(x @ Linv.T) if callable(base) else base, dtype=float)
        return np.einsum("ai,...ab,bj->...ij", Linv, F, Linv)

    faraday.vectorized = bool(getattr(base, "vectorized", False)) or not callable(base)
    ens = setup.ensemble
    dist = HyperboloidDistribution(setup.dist.kind, L @ setup.dist.center, setup.dist.sigma, setup.dist.r_cut)
    moved = Ensemble(ens.x @ L.T, ens.y @ L.T, ens.weights, ens.t)
    return Setup(setup.metric, faraday, L @ setup.x0, dist, moved)


def covariance_check(config: Mapping | None = None, rapidity: float = 0.5, axis: int = 3,
                     tolerance: float = 0.05) -> dict:
    """Compare max(divergence / bound) in the original and in a boosted frame.

    With a boost along the magnetic axis the transverse dynamics is only
    time dilated, so the run length is stretched by cosh(rapidity).
    """
    cfg = make_config(config)
    setup = build_setup(cfg)
    base = compare_setup(setup, cfg)
    cfg_b = dict(cfg)
    cfg_b["run.T"] = float(cfg["run.T"]) * math.cosh(rapidity)
    moved = compare_setup(boosted_setup(setup, rapidity, axis), cfg_b)
    r0, r1 = base.multiplier("x"), moved.multiplier("x")
    rel = abs(r1 - r0) / abs(r0) if r0 else math.inf
    return {"ratio": r0, "ratio_boosted": r1, "relative_change": rel, "pass": rel <= tolerance,
            "energy": base.energy, "energy_boosted": moved.energy}
