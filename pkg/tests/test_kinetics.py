import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lorentzavg.errors import LorentzAvgError, MomentError, PreconditionError
from lorentzavg.fields import preset_field
from lorentzavg.geometry import MetricField, eta_bar_at, minkowski
from lorentzavg.kinetics import (
    Ensemble,
    HyperboloidDistribution,
    boosted_center,
    energy,
    fiber_nodes,
    hyperboloid_lift,
    moments,
    sample_ensemble,
    support_diameter,
    transport_ensemble,
    volume_density,
    write_ensemble_csv,
)

MINK = minkowski(4)
ORIGIN = np.zeros(4)
REST = np.array([1.0, 0, 0, 0])


def bump(sigma=0.05, rapidity=1.0, **kw):
    return HyperboloidDistribution("gaussian_bump", boosted_center(rapidity), sigma, **kw)


class TestLift:
    def test_examples(self):
        np.testing.assert_array_equal(hyperboloid_lift(MINK, ORIGIN, [0, 0, 0]), REST)
        assert hyperboloid_lift(MINK, ORIGIN, [3, 0, 0])[0] == pytest.approx(math.sqrt(10))

    @given(st.lists(st.floats(-50, 50), min_size=3, max_size=3))
    def test_lands_on_hyperboloid(self, ybar):
        y = hyperboloid_lift(MINK, ORIGIN, ybar)
        assert abs(MINK.inner(ORIGIN, y, y) - 1.0) <= 1e-12 * (1 + y[0] ** 2)
        assert y[0] > 0

    def test_riemannian_input_has_no_root(self):
        bad = MetricField(2, lambda x: np.diag([-1.0, -1.0]))
        with pytest.raises(LorentzAvgError):
            hyperboloid_lift(bad, np.zeros(2), [0.0])


class TestVolume:
    def test_density_examples(self):
        assert volume_density(MINK, ORIGIN, REST) == 1.0
        assert volume_density(MINK, ORIGIN, [2.0, math.sqrt(3), 0, 0]) == 0.5
        with pytest.raises(PreconditionError):
            volume_density(MINK, ORIGIN, [-1.0, 0, 0, 0])

    def test_ball_quadrature_agrees_with_monte_carlo(self):
        R = 0.5
        ball = HyperboloidDistribution("uniform_ball", REST, R)
        quad = moments(ball, MINK, ORIGIN).vol
        rng = np.random.default_rng(0)
        u = rng.uniform(-R, R, (10**6, 3))
        ys = np.column_stack([np.sqrt(1 + (u * u).sum(1)), u])
        inside = (u * u).sum(1) < R * R
        mc = (2 * R) ** 3 * np.mean(inside * volume_density(MINK, ORIGIN, ys))
        assert abs(quad / mc - 1) <= 1e-3
        exact = 2 * math.pi * (R * math.sqrt(1 + R * R) - math.asinh(R))
        assert quad == pytest.approx(exact, rel=1e-6)


class TestMoments:
    def test_dirac_at_rest(self):
        m = moments(HyperboloidDistribution("dirac", REST), MINK, ORIGIN)
        np.testing.assert_array_equal(m.m1, REST)
        expected = np.zeros((4, 4, 4))
        expected[0, 0, 0] = 1.0
        np.testing.assert_array_equal(m.m3, expected)
        assert m.alpha == 0.0 and m.energy == 1.0 and m.vol == 1.0

    def test_symmetric_pair(self):
        v = np.array([0.3, -0.4, 1.2])
        ys = np.array([hyperboloid_lift(MINK, ORIGIN, v), hyperboloid_lift(MINK, ORIGIN, -v)])
        pair = HyperboloidDistribution("ensemble", particles=Ensemble(ORIGIN, ys, [0.5, 0.5]))
        m = moments(pair, MINK, ORIGIN)
        np.testing.assert_allclose(m.m1[1:], 0.0, atol=1e-15)
        assert m.m1[0] == pytest.approx(math.sqrt(1 + v @ v))
        assert m.alpha == pytest.approx(2 * np.linalg.norm(v), rel=1e-12)

    def test_gaussian_against_monte_carlo(self):
        dist = bump(0.05)
        m = moments(dist, MINK, ORIGIN)
        V = boosted_center(1.0)
        gb = eta_bar_at(MINK, V, ORIGIN)
        assert math.sqrt((m.m1 - V) @ gb @ (m.m1 - V)) <= 2 * 0.05
        ens = sample_ensemble(dist, MINK, ORIGIN, 10**6, seed=11)
        mc = ens.y.mean(axis=0)
        se = ens.y.std(axis=0) / 1e3
        np.testing.assert_allclose(m.m1[:2], mc[:2], rtol=1e-3)
        assert np.all(np.abs(m.m1 - mc) <= 5 * se + 1e-15)
        mc3 = np.einsum("pi,pj,pk->ijk", ens.y[:, :2], ens.y[:, :2], ens.y[:, :2]) / len(ens)
        np.testing.assert_allclose(m.m3[:2, :2, :2], mc3, rtol=1e-3)

    def test_m3_totally_symmetric(self):
        m = moments(HyperboloidDistribution("gaussian_bump", boosted_center(0.7), [0.05, 0.02, 0.08]), MINK, ORIGIN)
        for perm in [(0, 2, 1), (1, 0, 2), (2, 1, 0), (1, 2, 0)]:
            assert np.array_equal(m.m3, m.m3.transpose(perm))

    def test_centered_first_moment_vanishes(self):
        dist = bump(0.03, 2.0)
        ys, w = fiber_nodes(dist, MINK, ORIGIN)
        m = moments(dist, MINK, ORIGIN)
        delta = (w[:, None] * (ys - m.m1)).sum(0) / w.sum()
        assert np.abs(delta).max() <= 1e-13

    def test_delta_bounds_over_support(self):
        dist = bump(0.02, 1.5)
        m = moments(dist, MINK, ORIGIN)
        ys, _ = fiber_nodes(dist, MINK, ORIGIN)
        gb = eta_bar_at(MINK, m.mean_direction, ORIGIN)
        d = ys - m.m1
        assert np.sqrt(np.einsum("pi,ij,pj->p", d, gb, d)).max() <= 2 * m.alpha + 1e-12
        ylow = ys @ MINK(ORIGIN)
        assert np.abs(np.einsum("pi,pi->p", d, ylow)).max() <= 2 * m.alpha + m.alpha**2 + 1e-12

    def test_empty_support_rejected(self):
        empty = HyperboloidDistribution("ensemble", particles=Ensemble(ORIGIN, [REST], [0.0]))
        with pytest.raises(MomentError):
            moments(empty, MINK, ORIGIN)


class TestDiameterAndEnergy:
    def test_dirac_diameter(self):
        assert support_diameter(HyperboloidDistribution("dirac", boosted_center(3.0)), MINK, ORIGIN) == 0.0

    @pytest.mark.parametrize("r", [0.01, 0.05, 0.1])
    def test_ball_diameter_is_twice_radius(self, r):
        a = support_diameter(HyperboloidDistribution("uniform_ball", boosted_center(1.0), r), MINK, ORIGIN)
        assert a == pytest.approx(2 * r, rel=0.05)

    def test_bump_diameter_tracks_cutoff(self):
        a = support_diameter(bump(0.01), MINK, ORIGIN)
        assert a == pytest.approx(8 * 0.01, rel=0.05)

    def test_energy_examples(self):
        assert energy(HyperboloidDistribution("dirac", REST), ORIGIN) == 1.0
        V = np.array([100.0, math.sqrt(100.0**2 - 1), 0, 0])
        assert energy(HyperboloidDistribution("dirac", V), ORIGIN) == 100.0
        sigma = 0.001
        dist = HyperboloidDistribution("gaussian_bump", np.array([50.0, math.sqrt(2499.0), 0, 0]), sigma)
        E = energy(dist, ORIGIN, MINK)
        # y^0 = 50 u^0 + sqrt(2499) u^1 falls by about sqrt(2499) per unit of u^1
        assert 50 - 4 * sigma * math.sqrt(2499) * 1.01 < E < 50


class TestSampling:
    def test_dirac_copies(self):
        ens = sample_ensemble(HyperboloidDistribution("dirac", boosted_center(0.4)), MINK, ORIGIN, 7)
        assert np.array_equal(ens.y, np.tile(boosted_center(0.4), (7, 1)))

    def test_deterministic_and_on_shell(self):
        a = sample_ensemble(bump(0.1), MINK, ORIGIN, 500, seed=3)
        b = sample_ensemble(bump(0.1), MINK, ORIGIN, 500, seed=3)
        assert np.array_equal(a.y, b.y)
        assert np.abs(np.einsum("pi,ij,pj->p", a.y, MINK(ORIGIN), a.y) - 1).max() <= 1e-12

    def test_prefix_stable(self):
        a = sample_ensemble(bump(0.1), MINK, ORIGIN, 100, seed=5)
        b = sample_ensemble(bump(0.1), MINK, ORIGIN, 2000, seed=5)
        assert np.array_equal(a.y, b.y[:100])

    def test_mean_within_three_standard_errors(self):
        dist = bump(0.05)
        ens = sample_ensemble(dist, MINK, ORIGIN, 10**5, seed=0)
        se = ens.y.std(axis=0) / math.sqrt(len(ens))
        assert np.all(np.abs(ens.y.mean(0) - moments(dist, MINK, ORIGIN).m1) <= 3 * se)

    def test_ball_samples_stay_inside(self):
        dist = HyperboloidDistribution("uniform_ball", REST, 0.2)
        ens = sample_ensemble(dist, MINK, ORIGIN, 1000, seed=1)
        assert np.linalg.norm(ens.y[:, 1:], axis=1).max() < 0.2

    def test_invalid_count(self):
        with pytest.raises(PreconditionError):
            sample_ensemble(bump(), MINK, ORIGIN, 0)


class TestTransport:
    def test_free_streaming(self):
        ens = sample_ensemble(bump(0.1), MINK, ORIGIN, 20, seed=2)
        out = transport_ensemble(ens, MINK, np.zeros((4, 4)), 3.0)
        np.testing.assert_allclose(out.y, ens.y, atol=1e-12)
        np.testing.assert_allclose(out.x, ens.x + 3.0 * ens.y / ens.y[:, :1], atol=1e-9)
        assert out.t == pytest.approx(3.0)

    def test_magnetic_field_does_no_work(self):
        ens = sample_ensemble(bump(0.1), MINK, ORIGIN, 20, seed=2)
        out = transport_ensemble(ens, MINK, preset_field("uniform_B").faraday, 10.0)
        assert np.abs(out.y[:, 0] - ens.y[:, 0]).max() <= 1e-9
        assert np.abs(np.einsum("pi,ij,pj->p", out.y, MINK(ORIGIN), out.y) - 1).max() <= 1e-8

    def test_csv_export(self, tmp_path):
        ens = sample_ensemble(bump(0.1), MINK, ORIGIN, 3, seed=0)
        path = tmp_path / "ens.csv"
        write_ensemble_csv(path, [ens])
        lines = path.read_text().splitlines()
        assert lines[0] == "t,id,weight,x0,x1,x2,x3,y0,y1,y2,y3"
        assert len(lines) == 4
