"""Analytic maps: integral lemma, passage maps, cylinder map, Jacobians."""

import math
import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.integrate import quad

from cylmap.returnmap import (
    CylinderPoint,
    MapParams,
    RangeExitWarning,
    composed_return,
    cylinder_map,
    cylinder_step,
    exp_sine_integral,
    iterate_map,
    local_map_v,
    local_map_w,
    map_jacobian,
    unforced_return,
)
from cylmap.system import SystemParams, derive_constants


def quad_oracle(a, omega, s, t):
    """Adaptive-quadrature value of the closed-form integral."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        val, err = quad(
            lambda tau: math.exp(-a * (tau - s)) * math.sin(2.0 * omega * tau),
            s, t, limit=400, epsabs=1e-13, epsrel=1e-13,
        )
    return val


class TestExpSineIntegral:
    def test_specific_case(self):
        assert_allclose(
            exp_sine_integral(1.0, 1.0, 0.0, 2.0 * math.pi),
            quad_oracle(1.0, 1.0, 0.0, 2.0 * math.pi),
            atol=1e-10,
        )

    def test_empty_interval(self):
        assert exp_sine_integral(0.7, 2.0, 1.3, 1.3) == 0.0

    def test_zero_rate_rejected(self):
        with pytest.raises(ValueError):
            exp_sine_integral(0.0, 1.0, 0.0, 1.0)

    def test_random_tuples_match_quadrature(self, rng):
        for _ in range(100):
            a = rng.uniform(-3.0, 3.0)
            if abs(a) < 1e-2:
                a = math.copysign(1e-2, a)
            omega = rng.uniform(0.1, 3.0)
            s = rng.uniform(-5.0, 5.0)
            t = s + rng.uniform(-4.0, 4.0)
            assert_allclose(
                exp_sine_integral(a, omega, s, t),
                quad_oracle(a, omega, s, t),
                atol=1e-10, rtol=1e-10,
            )

    def test_expansion_identity(self, rng):
        # The contracting-rate branch admits an equivalent expansion with
        # coefficients c1 = 1/(beta-alpha), c2 = 2 omega / (beta-alpha)^2;
        # spot-check equality at 5 random parameter tuples.
        for _ in range(5):
            alpha = rng.uniform(0.5, 2.0)
            beta = -rng.uniform(0.05, 0.9) * alpha
            omega = rng.uniform(0.3, 2.0)
            s = rng.uniform(0.0, 3.0)
            y1 = rng.uniform(1e-4, 0.5)
            a = beta - alpha
            delta_hat = (alpha - beta) / (alpha + beta)
            t1 = s + math.log(1.0 / y1) / (alpha + beta)
            c1 = 1.0 / a
            c2 = 2.0 * omega / a**2
            front = -(a**2) / (a**2 + 4.0 * omega**2)
            expansion = front * (
                (1.0 / y1) ** delta_hat
                * (c1 * math.sin(2 * omega * t1) + c2 * math.cos(2 * omega * t1))
                - (c1 * math.sin(2 * omega * s) + c2 * math.cos(2 * omega * s))
            )
            assert_allclose(
                exp_sine_integral(a, omega, s, t1), expansion, rtol=1e-11
            )


class TestLocalMaps:
    def test_passage_v_unforced_reduces_to_power_law(self, params_std, dc_std):
        t1, x_out, w_out = local_map_v(0.7, 0.01, 0.002, params_std, dc_std, eps=1.0)
        assert_allclose(t1, 0.7 + math.log(100.0) / 0.9, rtol=1e-14)
        assert_allclose(x_out, 0.01**dc_std.delta_hat, rtol=1e-14)
        assert_allclose(w_out, 0.002 * 100.0 ** (-2.0 / 0.9), rtol=1e-14)

    def test_passage_v_forced_reference(self):
        p = SystemParams(alpha=1.0, beta=-0.1, gamma=1e-3, omega=1.0)
        dc = derive_constants(p)
        t1, x_out, _ = local_map_v(0.0, 1e-2, 0.0, p, dc, eps=1.0)
        t1_expect = math.log(100.0) / 0.9
        assert_allclose(t1, t1_expect, rtol=1e-14)
        k_bar = 1.0 / math.sqrt(5.21)
        assert_allclose(
            x_out,
            1e-2 ** (11.0 / 9.0) + 1e-3 * k_bar * math.sin(2.0 * t1_expect),
            rtol=1e-14,
        )

    def test_passage_v_zero_flight_time(self):
        p = SystemParams(alpha=1.0, beta=-0.1, gamma=2e-3, omega=1.0)
        dc = derive_constants(p)
        s = 0.4
        t1, x_out, w_out = local_map_v(s, 1.0, 0.01, p, dc, eps=1.0)
        assert t1 == s
        assert_allclose(x_out, 1.0 + 2e-3 * dc.k_bar * math.sin(2.0 * s), rtol=1e-14)
        assert_allclose(w_out, 0.01)

    def test_passage_v_stable_manifold_rejected(self, params_std, dc_std):
        with pytest.raises(ValueError):
            local_map_v(0.0, 0.0, 0.0, params_std, dc_std)
        with pytest.raises(ValueError):
            local_map_v(0.0, -1e-3, 0.0, params_std, dc_std)

    def test_passage_w_unforced_reduces_to_power_law(self, params_std, dc_std):
        t2, y_out, w_out = local_map_w(0.0, 0.02, 0.001, params_std, dc_std, eps=1.0)
        assert_allclose(y_out, 0.02**dc_std.delta_hat, rtol=1e-14)
        assert_allclose(t2, math.log(50.0) / 0.9, rtol=1e-14)
        assert_allclose(w_out, 0.001 * 50.0 ** (-2.0 / 0.9), rtol=1e-14)

    def test_passage_w_forced_reference(self):
        p = SystemParams(alpha=1.0, beta=-0.1, gamma=1e-3, omega=1.0)
        dc = derive_constants(p)
        _, y_out, _ = local_map_w(0.0, 1e-2, 0.0, p, dc, eps=1.0)
        k1_const = 2.0 / 4.81
        assert_allclose(
            y_out,
            1e-2 ** (11.0 / 9.0) * (1.0 + 1e-3 * k1_const * (11.0 / 9.0) / 1e-2),
            rtol=1e-14,
        )

    def test_passage_w_zero_unforced_flight(self):
        p = SystemParams(alpha=1.0, beta=-0.1, gamma=1e-3, omega=1.0)
        dc = derive_constants(p)
        s = 0.25
        t2, _, _ = local_map_w(s, 1.0, 0.0, p, dc, eps=1.0)
        assert_allclose(t2, s + 1e-3 * dc.K1 / 0.9, rtol=1e-14)

    def test_passage_w_domain(self, params_std, dc_std):
        with pytest.raises(ValueError):
            local_map_w(0.0, -0.1, 0.0, params_std, dc_std)


class TestUnforcedReturn:
    def test_reference_values(self, dc_std):
        y_out, w_out = unforced_return(0.1, 0.5, dc_std)
        assert_allclose(y_out, 0.1 ** (121.0 / 81.0), rtol=1e-15)
        # second exponent is 4 alpha / (alpha + beta)^2 = 400/81
        assert_allclose(w_out, 0.5 * 0.1 ** (400.0 / 81.0), rtol=1e-14)

    def test_boundary(self, dc_std):
        y_out, w_out = unforced_return(1.0 - 1e-15, 0.3, dc_std)
        assert_allclose(y_out, 1.0, atol=1e-14)
        assert_allclose(w_out, 0.3, atol=1e-14)

    def test_exponent_ordering_matches_reduction_flag(self):
        # y-exponent delta smaller than the w-exponent 2K iff reduction valid
        for alpha, beta in [(1.0, -0.1), (1.0, -0.5), (5.0, -4.5)]:
            p = SystemParams(alpha=alpha, beta=beta)
            dc = derive_constants(p)
            assert (dc.delta < 2.0 * dc.K) == p.reduction_valid


class TestCylinderMap:
    def test_reference_step(self):
        mp = MapParams(K=3.0, delta=1.1, omega=1.0, gamma=0.01, k1=0.5)
        s_next, y_next = cylinder_step(0.0, 0.1, mp)
        assert_allclose(s_next, math.log(10.0) / 3.0, rtol=1e-15)
        assert_allclose(y_next, 0.1**1.1 + 0.01, rtol=1e-15)

    def test_unforced_matches_power_map(self):
        mp = MapParams(K=3.0, delta=1.1, omega=1.0, gamma=0.0, k1=0.0)
        for y in (0.9, 0.3, 0.01):
            _, y_next = cylinder_step(0.2, y, mp)
            assert_allclose(y_next, y**1.1, rtol=1e-15)

    def test_locked_fixed_point_seed(self):
        # y = exp(-K pi / omega) with the level condition met is a genuine
        # fixed point of the map on the cylinder
        mp = MapParams(K=3.0, delta=1.1, omega=1.0, gamma=4e-5, k1=0.5)
        t_lock = math.pi
        y = math.exp(-mp.K * t_lock)
        level = y - y**mp.delta
        c = (level / mp.gamma - 1.0) / mp.k1
        assert abs(c) < 1.0  # the seed gamma admits a locked solution
        s = math.asin(c) / 2.0
        pt = CylinderPoint(s, y)
        image = cylinder_map(pt, mp)
        assert_allclose(image.s, pt.s, atol=1e-12)
        assert_allclose(image.y, pt.y, rtol=1e-12)

    def test_degree_one_in_s(self, rng):
        mp = MapParams(K=3.0, delta=1.1, omega=1.3, gamma=0.02, k1=0.7)
        period = mp.period
        for _ in range(30):
            s = rng.uniform(-5, 5)
            y = rng.uniform(0.01, 0.99)
            s1, y1 = cylinder_step(s, y, mp)
            s2, y2 = cylinder_step(s + period, y, mp)
            assert_allclose(s2, s1 + period, rtol=1e-13)
            assert_allclose(y2, y1, rtol=1e-13)

    def test_matches_composition_when_unforced(self, rng):
        p = SystemParams(alpha=1.0, beta=-0.1, gamma=0.0, omega=1.0)
        dc = derive_constants(p)
        mp = MapParams.from_system(p, dc)
        for _ in range(40):
            s = rng.uniform(0, 10)
            y = rng.uniform(1e-6, 1.0)
            t2, y2, _ = composed_return(s, y, 1e-3, p, dc, eps=1.0)
            s_map, y_map = cylinder_step(s, y, mp)
            assert_allclose(s_map, t2, rtol=1e-12)
            assert_allclose(y_map, y2, rtol=1e-12)

    def test_from_system_gamma_rescaling(self):
        p = SystemParams(alpha=1.0, beta=-0.1, gamma=1e-3, omega=1.0)
        dc = derive_constants(p)
        mp = MapParams.from_system(p, dc, eps=0.1)
        assert_allclose(mp.gamma, 1e-3 * dc.delta_hat * dc.K1 / 0.1, rtol=1e-15)
        assert_allclose(mp.k1, dc.k1, rtol=1e-15)
        assert_allclose(mp.K, 1.0 / dc.K, rtol=1e-15)
        mp2 = MapParams.from_system(p, dc, k1_override=0.4)
        assert mp2.k1 == 0.4

    def test_range_exit_warning(self):
        mp = MapParams(K=3.0, delta=1.1, omega=1.0, gamma=0.3, k1=0.5)
        with pytest.warns(RangeExitWarning):
            cylinder_map(CylinderPoint(0.7, 0.95), mp)


class TestJacobian:
    def test_entries(self):
        mp = MapParams(K=3.0, delta=1.1, omega=1.0, gamma=0.02, k1=0.5)
        s, y = 0.3, 0.2
        jac = map_jacobian(s, y, mp)
        assert_allclose(jac.matrix[0, 0], 1.0)
        assert_allclose(jac.matrix[0, 1], -1.0 / (3.0 * 0.2), rtol=1e-15)
        assert_allclose(
            jac.matrix[1, 0], 2.0 * 0.02 * 0.5 * math.cos(0.6), rtol=1e-15
        )
        assert_allclose(jac.matrix[1, 1], 1.1 * 0.2**0.1, rtol=1e-15)

    def test_unforced_lower_left_vanishes(self, rng):
        mp = MapParams(K=2.0, delta=1.3, omega=1.0, gamma=0.0, k1=0.0)
        for _ in range(10):
            jac = map_jacobian(rng.uniform(0, 3), rng.uniform(0.05, 0.9), mp)
            assert jac.matrix[1, 0] == 0.0

    def test_triangular_at_extremal_phase(self):
        mp = MapParams(K=3.0, delta=1.1, omega=1.0, gamma=0.02, k1=0.5)
        for s in (math.pi / 4.0, 3.0 * math.pi / 4.0):  # sin(2s) = +-1
            jac = map_jacobian(s, 0.3, mp)
            assert abs(jac.matrix[1, 0]) < 1e-16
            lams = sorted(abs(l) for l in jac.eigenvalues)
            diag = sorted([1.0, 1.1 * 0.3**0.1])
            assert_allclose(lams, diag, rtol=1e-14)

    def test_matches_finite_differences_and_order(self, rng):
        mp = MapParams(K=3.0, delta=1.1, omega=1.0, gamma=0.02, k1=0.5)

        def fd_jacobian(s, y, h):
            cols = []
            for ds, dy in ((h, 0.0), (0.0, h)):
                sp, yp = cylinder_step(s + ds, y + dy, mp)
                sm, ym = cylinder_step(s - ds, y - dy, mp)
                cols.append([(sp - sm) / (2 * h), (yp - ym) / (2 * h)])
            return np.array(cols).T

        worst = {1e-4: 0.0, 5e-5: 0.0}
        for _ in range(20):
            s = rng.uniform(0, 3)
            y = rng.uniform(0.2, 0.9)
            exact = map_jacobian(s, y, mp).matrix
            for h in worst:
                err = np.max(np.abs(fd_jacobian(s, y, h) - exact))
                worst[h] = max(worst[h], err)
        assert worst[1e-4] < 1e-6
        # halving h divides the central-difference error by about 4
        assert worst[5e-5] < worst[1e-4] / 2.5
        # at the reference step the agreement is tight
        exact = map_jacobian(0.4, 0.5, mp).matrix
        assert np.max(np.abs(fd_jacobian(0.4, 0.5, 1e-6) - exact)) < 1e-8

    def test_eigenvalue_identity(self, rng):
        mp = MapParams(K=3.0, delta=1.1, omega=1.0, gamma=0.05, k1=2.0)
        for _ in range(200):
            jac = map_jacobian(rng.uniform(0, 3), rng.uniform(0.01, 0.99), mp)
            tr, de = jac.trace, jac.det
            for lam in jac.eigenvalues:
                assert abs(lam * lam - tr * lam + de) < 1e-12
            lam1, lam2 = jac.eigenvalues
            assert abs(lam1 * lam2 - de) < 1e-12
            assert abs(lam1 + lam2 - tr) < 1e-12

    def test_det_formula(self, rng):
        mp = MapParams(K=3.0, delta=1.1, omega=1.0, gamma=0.02, k1=0.5)
        for _ in range(30):
            s = rng.uniform(0, 3)
            y = rng.uniform(0.05, 0.9)
            jac = map_jacobian(s, y, mp)
            expect = (
                mp.delta * y ** (mp.delta - 1.0)
                + 2.0 * mp.omega * mp.gamma * mp.k1 * math.cos(2.0 * s)
                / (mp.K * y)
            )
            assert_allclose(jac.det, expect, rtol=1e-13)


class TestIterate:
    def test_zero_steps(self):
        mp = MapParams(K=3.0, delta=1.1, omega=1.0, gamma=0.01, k1=0.5)
        pt = CylinderPoint(0.3, 0.2)
        assert iterate_map(mp, pt, 0) == [pt]

    def test_fixed_point_orbit_constant(self):
        mp = MapParams(K=3.0, delta=1.1, omega=1.0, gamma=4e-5, k1=0.5)
        y = math.exp(-mp.K * math.pi)
        c = ((y - y**mp.delta) / mp.gamma - 1.0) / mp.k1
        pt = CylinderPoint(math.asin(c) / 2.0, y)
        orbit = iterate_map(mp, pt, 20)
        assert len(orbit) == 21
        for q in orbit:
            assert_allclose(q.s, pt.s, atol=1e-10)
            assert_allclose(q.y, pt.y, rtol=1e-10)

    def test_orbit_decays_to_averaged_neighbourhood(self):
        # gamma below the peak level, start below the unstable averaged
        # point: orbits settle into the annulus around the stable one
        mp = MapParams(K=3.0, delta=1.1, omega=1.0, gamma=0.01, k1=0.5)
        orbit = iterate_map(mp, CylinderPoint(0.1, 0.3), 400)
        assert len(orbit) == 401
        from cylmap.attractor import averaged_fixed_points

        avg = averaged_fixed_points(mp)
        tail = np.array([q.y for q in orbit[-50:]])
        assert np.all(np.abs(tail - avg.y_hat) <= avg.R * mp.gamma + 1e-9)

    def test_escape_truncates(self):
        # above the averaged saddle-node level every y-orbit grows past 1
        mp = MapParams(K=3.0, delta=1.1, omega=1.0, gamma=0.08, k1=0.2)
        with pytest.warns(RangeExitWarning):
            orbit = iterate_map(mp, CylinderPoint(0.0, 0.9), 500)
        assert len(orbit) < 501
