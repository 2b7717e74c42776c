import math

import numpy as np
import pytest
from scipy.stats import linregress

from lorentzavg.averaging import AveragedConnectionField
from lorentzavg.connections import AffineConnection, LorentzConnection, TildeConnection
from lorentzavg.dynamics import constraint_drift, integrate_autoparallel, integrate_lorentz, reparameterize
from lorentzavg.errors import ConeProximityError, PreconditionError
from lorentzavg.fields import preset_field
from lorentzavg.geometry import minkowski
from lorentzavg.kinetics import HyperboloidDistribution, moments

MINK = minkowski(4)
ORIGIN = np.zeros(4)
UNIFORM_B = preset_field("uniform_B", {"B0": 1.0})
UNIFORM_E = preset_field("uniform_E", {"E0": 1.0})
CROSSED = preset_field("crossed_EB", {"E0": 0.3, "B0": 1.0})


def gyration(gamma, B=1.0):
    """Analytic orbit in B along z for y(0) = gamma (1, v, 0, 0): returns x(t), y(t)."""
    v = math.sqrt(1 - 1 / gamma**2)
    w = B / gamma
    R = gamma * v / B

    def x(t):
        t = np.asarray(t, dtype=float)
        return np.stack([t, R * np.sin(w * t), R * (np.cos(w * t) - 1), 0 * t], axis=-1)

    def y(t):
        t = np.asarray(t, dtype=float)
        return gamma * np.stack([np.ones_like(t), v * np.cos(w * t), -v * np.sin(w * t), 0 * t], axis=-1)

    return x, y


def cyclotron_closure(tol, gamma=2.0):
    period = 2 * math.pi * gamma
    y0 = gyration(gamma)[1](0.0)
    tr = integrate_lorentz(MINK, UNIFORM_B.faraday, ORIGIN, y0, period, tol, t_eval=[period])
    return np.linalg.norm(tr.x[-1, 1:]) / (gamma * math.sqrt(1 - 1 / gamma**2)), tr


class TestLorentz:
    def test_free_particle_is_a_straight_line(self):
        y0 = np.array([math.sqrt(2), 1.0, 0, 0])
        tr = integrate_lorentz(MINK, np.zeros((4, 4)), ORIGIN, y0, 10.0, 1e-10)
        np.testing.assert_allclose(tr.x, np.outer(tr.tau, y0), atol=1e-12)
        np.testing.assert_allclose(tr.y, np.tile(y0, (len(tr), 1)), atol=1e-14)
        assert tr.t[-1] == pytest.approx(10.0, abs=1e-12)
        assert constraint_drift(tr, MINK) <= 1e-14

    def test_cyclotron_orbit(self):
        closure, tr = cyclotron_closure(1e-10)
        assert closure <= 1e-8
        x, y = gyration(2.0)
        grid = np.linspace(0, 4 * math.pi, 41)
        tr = integrate_lorentz(MINK, UNIFORM_B.faraday, ORIGIN, y(0.0), grid[-1], 1e-10, t_eval=grid)
        np.testing.assert_allclose(tr.x, x(grid), atol=1e-8)
        np.testing.assert_allclose(tr.y, y(grid), atol=1e-8)
        assert constraint_drift(tr, MINK) <= 1e-8
        assert np.abs(tr.y[:, 0] - 2.0).max() <= 10 * 1e-10

    def test_hyperbolic_motion(self):
        phi0 = 0.3
        y0 = np.array([math.cosh(phi0), math.sinh(phi0), 0, 0])
        tr = integrate_lorentz(MINK, UNIFORM_E.faraday, ORIGIN, y0, 5.0, 1e-10)
        # F^1_0 = +E0 with x'' = -F x' drives x^1 toward negative values
        np.testing.assert_allclose(tr.y[:, 0], np.cosh(phi0 - tr.tau), rtol=1e-8)
        np.testing.assert_allclose(tr.y[:, 1], np.sinh(phi0 - tr.tau), rtol=1e-8, atol=1e-8)

    def test_metadata_and_monotone_time(self):
        _, tr = cyclotron_closure(1e-9)
        tr = integrate_lorentz(MINK, CROSSED.faraday, ORIGIN, gyration(3.0)[1](0.0), 5.0, 1e-9)
        assert tr.steps > 0 and tr.rejected >= 0 and tr.tol == 1e-9
        assert np.all(np.diff(tr.t) > 0)

    def test_tolerance_sweep_order(self):
        errors, steps = [], []
        for tol in (1e-6, 1e-7, 1e-8, 1e-9):
            err, tr = cyclotron_closure(tol)
            errors.append(err)
            steps.append(tr.steps)
        order = -linregress(np.log(steps), np.log(errors)).slope
        assert order >= 4

    def test_backward_round_trip(self):
        tol = 1e-10
        y0 = gyration(3.0)[1](0.0)
        fwd = integrate_lorentz(MINK, CROSSED.faraday, ORIGIN, y0, 8.0, tol)
        back = integrate_lorentz(MINK, CROSSED.faraday, fwd.x[-1], fwd.y[-1], -8.0, tol)
        assert np.abs(back.x[-1] - ORIGIN).max() <= 100 * tol
        assert np.abs(back.y[-1] - y0).max() <= 100 * tol * np.abs(y0).max()

    def test_rejects_off_shell_initial_velocity(self):
        with pytest.raises(PreconditionError):
            integrate_lorentz(MINK, UNIFORM_B.faraday, ORIGIN, [2.0, 0, 0, 0], 1.0)

    def test_csv_columns(self, tmp_path):
        tr = integrate_lorentz(MINK, UNIFORM_B.faraday, ORIGIN, gyration(2.0)[1](0.0), 1.0, 1e-8)
        path = tmp_path / "traj.csv"
        tr.to_csv(path, MINK)
        header = path.read_text().splitlines()[0]
        assert header == "tau,t,x0,x1,x2,x3,y0,y1,y2,y3,eta_norm"


class TestAutoparallel:
    def setup_method(self):
        self.y0 = gyration(3.0)[1](0.0)
        self.grid = np.linspace(0, 10.0, 21)
        self.ref = integrate_lorentz(MINK, CROSSED.faraday, ORIGIN, self.y0, 10.0, 1e-10, t_eval=self.grid)

    def test_lorentz_connection_reproduces_lorentz_force(self):
        tr = integrate_autoparallel(LorentzConnection(MINK, CROSSED.faraday), MINK, ORIGIN, self.y0, 10.0, 1e-10,
                                    t_eval=self.grid)
        assert np.abs(tr.x - self.ref.x).max() <= 10 * 1e-10 * max(1, np.abs(self.ref.x).max())

    def test_tilde_connection_reproduces_lorentz_force(self):
        tr = integrate_autoparallel(TildeConnection(MINK, CROSSED.faraday), MINK, ORIGIN, self.y0, 10.0, 1e-10,
                                    t_eval=self.grid)
        assert np.abs(tr.x - self.ref.x).max() <= 10 * 1e-10 * max(1, np.abs(self.ref.x).max())

    def test_cold_fluid_average_follows_the_particle(self):
        gamma = 2.0
        x_exact, y_exact = gyration(gamma)
        field = AveragedConnectionField(
            MINK, UNIFORM_B.faraday,
            lambda x: moments(HyperboloidDistribution("dirac", y_exact(x[0])), MINK, x),
        )
        grid = np.linspace(0, 6.0, 13)
        tr = integrate_autoparallel(field, MINK, ORIGIN, y_exact(0.0), 6.0, 1e-10, t_eval=grid)
        ref = integrate_lorentz(MINK, UNIFORM_B.faraday, ORIGIN, y_exact(0.0), 6.0, 1e-10, t_eval=grid)
        assert np.abs(tr.x - ref.x).max() <= 1e-9
        assert np.abs(tr.x - x_exact(grid)).max() <= 1e-8

    def test_averaged_drifts_off_hyperboloid_without_error(self):
        wide = HyperboloidDistribution("gaussian_bump", gyration(3.0)[1](0.0), 0.1)
        field = AveragedConnectionField(MINK, CROSSED.faraday, moments(wide, MINK, ORIGIN))
        tr = integrate_autoparallel(field, MINK, ORIGIN, self.y0, 10.0, 1e-10)
        assert constraint_drift(tr, MINK) > 1e-6

    def test_cone_proximity_is_reported(self):
        """Gamma^1_00 = -1 tilts y toward the light cone while y^0 stays fixed."""
        coeffs = np.zeros((4, 4, 4))
        coeffs[1, 0, 0] = -1.0
        tilt = AffineConnection(coeffs, y_dependent=True)
        with pytest.raises(ConeProximityError):
            integrate_autoparallel(tilt, MINK, ORIGIN, np.array([1.0, 0, 0, 0]), 50.0, 1e-8)


class TestReparameterize:
    def test_rest_particle(self):
        tr = integrate_lorentz(MINK, np.zeros((4, 4)), ORIGIN, [1.0, 0, 0, 0], 3.0, 1e-10)
        np.testing.assert_allclose(tr.t, tr.tau, atol=1e-14)
        lab = reparameterize(tr, "lab_time")
        np.testing.assert_allclose(lab.tau, lab.t, atol=1e-13)

    def test_constant_gamma(self):
        y0 = np.array([2.0, math.sqrt(3), 0, 0])
        tr = integrate_lorentz(MINK, np.zeros((4, 4)), ORIGIN, y0, 6.0, 1e-10)
        np.testing.assert_allclose(tr.t, 2 * tr.tau, atol=1e-12)
        proper = reparameterize(tr, "proper_time")
        np.testing.assert_allclose(proper.t, 2 * proper.tau, atol=1e-12)

    def test_round_trip(self):
        tr = integrate_lorentz(MINK, CROSSED.faraday, ORIGIN, gyration(3.0)[1](0.0), 10.0, 1e-10,
                               t_eval=np.linspace(0, 10.0, 400))
        back = reparameterize(reparameterize(tr, "proper_time"), "lab_time", grid=tr.t)
        assert np.abs(back.x - tr.x).max() <= 1e-8
        assert np.abs(back.y - tr.y).max() <= 1e-8 * np.abs(tr.y).max()

    def test_unknown_target(self):
        tr = integrate_lorentz(MINK, np.zeros((4, 4)), ORIGIN, [1.0, 0, 0, 0], 1.0)
        with pytest.raises(PreconditionError):
            reparameterize(tr, "coordinate_time")
