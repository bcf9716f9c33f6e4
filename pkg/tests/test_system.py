"""Parameter validation, derived constants and the vector field."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from cylmap.system import (
    ParameterError,
    SystemParams,
    derive_constants,
    equilibria,
    kappa1,
    kappa2,
    vector_field,
)

# Appendix-table formulas evaluated independently at alpha=1, beta=-0.1,
# omega=1 (fractions expanded by hand, cross-checked at higher precision):
#   delta_hat = 1.1/0.9 = 11/9, delta = 121/81, K = 2/0.81 = 200/81,
#   K_hat = pi*0.81/2, k_bar = 1/sqrt(1.21 + 4), K1 = 2/(0.81 + 4)
DELTA_HAT_STD = 11.0 / 9.0
DELTA_STD = 121.0 / 81.0
K_STD = 200.0 / 81.0
K_HAT_STD = math.pi * 81.0 / 200.0
K_BAR_STD = 1.0 / math.sqrt(5.21)
K1_STD = 2.0 / 4.81


class TestSystemParams:
    def test_valid(self):
        p = SystemParams(alpha=1.0, beta=-0.1, gamma=0.01, omega=2.0)
        assert p.reduction_valid

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(alpha=-1.0, beta=-0.1),
            dict(alpha=0.0, beta=-0.1),
            dict(alpha=1.0, beta=0.0),
            dict(alpha=1.0, beta=0.1),
            dict(alpha=1.0, beta=-1.5),
            dict(alpha=1.0, beta=-0.1, gamma=-0.1),
            dict(alpha=1.0, beta=-0.1, omega=0.0),
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ParameterError):
            SystemParams(**kwargs)

    def test_exact_resonance_rejected(self):
        with pytest.raises(ParameterError, match="resonance"):
            SystemParams(alpha=1.5, beta=-0.5)

    def test_near_resonance_warns(self):
        with pytest.warns(UserWarning, match="resonant"):
            SystemParams(alpha=1.51, beta=-0.5)

    def test_reduction_flag_boundary(self):
        # (alpha - beta)^2 < 4 alpha fails for strongly split spectra
        assert not SystemParams(alpha=5.0, beta=-4.9).reduction_valid
        assert SystemParams(alpha=1.0, beta=-0.5).reduction_valid


class TestDerivedConstants:
    def test_reference_values(self, params_std, dc_std):
        assert_allclose(dc_std.delta_hat, DELTA_HAT_STD, rtol=1e-15)
        assert_allclose(dc_std.delta, DELTA_STD, rtol=1e-15)
        assert_allclose(dc_std.K, K_STD, rtol=1e-15)
        assert_allclose(dc_std.K_hat, K_HAT_STD, rtol=1e-15)
        assert_allclose(dc_std.k_bar, K_BAR_STD, rtol=1e-15)
        assert_allclose(dc_std.K1, K1_STD, rtol=1e-15)
        assert_allclose(dc_std.k1, K_BAR_STD / K1_STD, rtol=1e-15)

    def test_product_identity(self, rng):
        for _ in range(50):
            alpha = rng.uniform(0.2, 5.0)
            beta = -rng.uniform(1e-3, 0.99) * alpha
            p = SystemParams(alpha=alpha, beta=beta, omega=rng.uniform(0.1, 4.0))
            dc = derive_constants(p)
            assert_allclose(dc.K * dc.K_hat, math.pi, rtol=1e-13)
            assert dc.delta > 1.0
            assert 0.0 < dc.M < 1.0
            assert dc.T_M > 0.0
            assert dc.k_bar > 0.0 and dc.k1 > 0.0

    def test_weak_attraction_limit(self):
        p = SystemParams(alpha=1.0, beta=-1e-7)
        dc = derive_constants(p)
        assert_allclose(dc.delta, 1.0, atol=1e-6)
        assert_allclose(dc.K, 2.0, atol=1e-6)
        assert dc.M < 1e-6

    def test_strong_attraction(self):
        dc = derive_constants(SystemParams(alpha=1.0, beta=-0.5))
        assert_allclose(dc.delta, 9.0, rtol=1e-15)


class TestVectorField:
    def test_poles_are_equilibria_unforced(self, params_std):
        for pole in ([0, 0, 1.0], [0, 0, -1.0]):
            assert_allclose(vector_field(0.3, pole, params_std), 0.0, atol=1e-16)

    def test_equator_x_axis(self, params_std):
        # at (1, 0, 0): only the z-component survives and equals alpha
        assert_allclose(
            vector_field(0.0, [1.0, 0.0, 0.0], params_std), [0.0, 0.0, 1.0]
        )

    def test_forcing_acts_on_x_only(self):
        p = SystemParams(alpha=1.0, beta=-0.1, gamma=0.1, omega=1.0)
        t = math.pi / (4.0 * p.omega)  # sin(2 omega t) = 1
        assert_allclose(vector_field(t, [0.0, 0.0, 1.0], p), [0.1, 0.0, 0.0])

    def test_sphere_tangency_unforced(self, params_std, rng):
        for _ in range(100):
            u = rng.normal(size=3)
            u /= np.linalg.norm(u)
            f = vector_field(rng.uniform(0, 10), u, params_std)
            assert abs(float(np.dot(u, f))) < 1e-14

    def test_equivariance_unforced(self, params_std, rng):
        for _ in range(50):
            u = rng.normal(size=3)
            t = rng.uniform(0, 5)
            f = vector_field(t, u, params_std)
            assert_allclose(vector_field(t, kappa2(u), params_std), kappa2(f),
                            rtol=1e-14, atol=1e-14)
            assert_allclose(vector_field(t, kappa1(u), params_std), kappa1(f),
                            rtol=1e-14, atol=1e-14)

    def test_kappa2_survives_forcing(self, rng):
        p = SystemParams(alpha=1.0, beta=-0.1, gamma=0.05, omega=1.3)
        for _ in range(50):
            u = rng.normal(size=3)
            t = rng.uniform(0, 5)
            assert_allclose(
                vector_field(t, kappa2(u), p),
                kappa2(vector_field(t, u, p)),
                rtol=1e-14, atol=1e-14,
            )

    def test_forcing_periodicity(self, rng):
        p = SystemParams(alpha=1.0, beta=-0.3, gamma=0.2, omega=0.7)
        period = math.pi / p.omega
        for _ in range(30):
            u = rng.normal(size=3)
            t = rng.uniform(0, 5)
            assert_allclose(
                vector_field(t + period, u, p),
                vector_field(t, u, p),
                rtol=1e-12, atol=1e-12,
            )


class TestEquilibria:
    def test_rates(self, params_std):
        v, w = equilibria(params_std)
        for eq in (v, w):
            assert_allclose(eq.expanding, 0.9)
            assert_allclose(eq.contracting, 1.1)
            assert eq.radial == -2.0
        assert_allclose(v.location, [0, 0, 1.0])
        assert_allclose(w.location, [0, 0, -1.0])

    def test_rate_ratio_is_delta_hat(self, rng):
        for _ in range(20):
            alpha = rng.uniform(0.2, 4.0)
            p = SystemParams(alpha=alpha, beta=-rng.uniform(0.01, 0.95) * alpha)
            dc = derive_constants(p)
            v, _ = equilibria(p)
            assert_allclose(v.rate_ratio, dc.delta_hat, rtol=1e-14)
