import numpy as np
import pytest

from oildrift.flow import VelocityField
from oildrift.wind import (EKMAN_PERIOD, CanopyMask, EkmanWindState,
                           apply_wind_limits, update_ekman_wind, wind_limit)


class TestWindLimit:
    def test_no_obstruction(self):
        assert wind_limit(0.0, 20.0) == 20.0

    def test_full_obstruction(self):
        assert wind_limit(1.0, 20.0) == 0.0

    def test_half_density(self):
        assert wind_limit(0.5, 20.0) == pytest.approx(5.0)

    def test_rejects_bad_density(self):
        with pytest.raises(ValueError):
            wind_limit(1.2, 20.0)
        with pytest.raises(ValueError):
            wind_limit(-0.1, 20.0)


def wind_field(nx=10, ny=8, u=12.0, v=0.0):
    return VelocityField.uniform(nx, ny, 100.0, 100.0, u, v, kind="wind", nu=1.5e-5)


class TestApplyWindLimits:
    def test_ocean_cells_unchanged(self):
        f = wind_field()
        mask = CanopyMask(active=np.zeros((10, 8), bool), lambda_p=np.zeros((10, 8)))
        g = apply_wind_limits(f, mask, 20.0)
        assert np.array_equal(g.u, f.u) and np.array_equal(g.v, f.v)

    def test_city_cell_rescaled_to_limit(self):
        f = wind_field(u=12.0)
        active = np.zeros((10, 8), bool)
        lam = np.zeros((10, 8))
        active[5, 4] = True
        lam[5, 4] = 0.5  # limit = 0.25 * 20 = 5 m/s
        g = apply_wind_limits(f, CanopyMask(active, lam), 20.0)
        uc, vc = g.cell_centred()
        assert np.hypot(uc[5, 4], vc[5, 4]) == pytest.approx(5.0)
        # direction preserved
        assert vc[5, 4] == pytest.approx(0.0, abs=1e-12)

    def test_limit_above_speed_is_noop(self):
        f = wind_field(u=3.0)
        active = np.ones((10, 8), bool)
        g = apply_wind_limits(f, CanopyMask(active, np.full((10, 8), 0.5)), 20.0)
        assert np.array_equal(g.u, f.u)

    def test_never_increases_face_speed_or_flips_direction(self):
        # per-face guarantees hold for arbitrary fields
        rng = np.random.default_rng(4)
        for _ in range(10):
            f = wind_field()
            f.u[:] = rng.normal(0, 8, f.u.shape)
            f.v[:] = rng.normal(0, 8, f.v.shape)
            lam = rng.uniform(0, 1, (10, 8))
            active = rng.random((10, 8)) < 0.5
            g = apply_wind_limits(f, CanopyMask(active, lam), 25.0)
            assert np.all(np.abs(g.u) <= np.abs(f.u) + 1e-15)
            assert np.all(np.abs(g.v) <= np.abs(f.v) + 1e-15)
            assert np.all(g.u * f.u >= 0.0)
            assert np.all(g.v * f.v >= 0.0)

    def test_limited_cells_end_at_or_below_limit(self):
        # cell-speed guarantee, on smooth (locally same-sign) flow
        rng = np.random.default_rng(5)
        for _ in range(10):
            f = wind_field()
            x = np.linspace(0, np.pi, f.u.shape[0])[:, None]
            f.u[:] = 10.0 + 3.0 * np.sin(x) * np.ones_like(f.u)
            f.v[:] = 4.0
            lam = rng.uniform(0, 1, (10, 8))
            active = rng.random((10, 8)) < 0.5
            g = apply_wind_limits(f, CanopyMask(active, lam), 25.0)
            uc, vc = g.cell_centred()
            speed = np.hypot(uc, vc)
            limit = wind_limit(lam, 25.0)
            assert np.all(speed[active] <= limit[active] + 1e-9)

    def test_water_field_rejected(self):
        f = VelocityField.zeros(4, 4, 10.0, 10.0, kind="water")
        mask = CanopyMask(np.zeros((4, 4), bool), np.zeros((4, 4)))
        with pytest.raises(ValueError):
            apply_wind_limits(f, mask, 20.0)


def scalar_state(value=0.0):
    return EkmanWindState(u=np.array([[value]]), v=np.array([[0.0]]))


class TestEkmanWind:
    def test_fixed_point(self):
        st = scalar_state(8.0)
        out = update_ekman_wind(st, np.array([[8.0]]), np.array([[0.0]]), 1800.0)
        assert out.u[0, 0] == pytest.approx(8.0)

    def test_published_weights_arithmetic(self):
        # from rest, one 0.5 h step of 10 m/s: W1 = 11.5/6, W2 = 0.5/12
        st = scalar_state(0.0)
        out = update_ekman_wind(st, np.array([[10.0]]), np.array([[0.0]]), 1800.0)
        w1 = (12.0 - 0.5) / 6.0
        w2 = 0.5 / 12.0
        assert w1 == pytest.approx(1.91667, abs=1e-4)
        assert w2 == pytest.approx(0.041667, abs=1e-5)
        assert out.u[0, 0] == pytest.approx(10.0 * w2 / (w1 + w2), rel=1e-12)
        assert out.u[0, 0] == pytest.approx(0.2128, abs=2e-4)

    def test_convexity_between_inputs(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            prev = rng.uniform(-10, 10)
            now = rng.uniform(-10, 10)
            st = scalar_state(prev)
            out = update_ekman_wind(st, np.array([[now]]), np.array([[0.0]]),
                                    rng.uniform(1, 0.9 * EKMAN_PERIOD))
            lo, hi = min(prev, now), max(prev, now)
            assert lo - 1e-12 <= out.u[0, 0] <= hi + 1e-12

    def test_monotone_growth_from_rest(self):
        st = scalar_state(0.0)
        prev = 0.0
        for _ in range(200):
            st = update_ekman_wind(st, np.array([[10.0]]), np.array([[0.0]]), 1800.0)
            assert st.u[0, 0] >= prev
            prev = st.u[0, 0]
        assert prev <= 10.0

    def test_degenerate_dt_rejected(self):
        st = scalar_state(0.0)
        with pytest.raises(ValueError):
            update_ekman_wind(st, np.array([[1.0]]), np.array([[0.0]]), EKMAN_PERIOD)

    def test_smaller_lag_than_moving_average(self):
        # oscillating noisy forcing; compare cross-correlation peak lags
        dt = 1800.0
        n = 480  # 10 days
        t = np.arange(n) * dt
        rng = np.random.default_rng(42)
        noise = np.convolve(rng.normal(0, 0.8, n), np.ones(8) / 8, mode="same")
        forcing = 6.0 + 2.5 * np.sin(2 * np.pi * t / (16 * 3600.0)) + noise

        wm = np.empty(n)
        st = scalar_state(forcing[0])
        for k in range(n):
            st = update_ekman_wind(st, np.array([[forcing[k]]]), np.array([[0.0]]), dt)
            wm[k] = st.u[0, 0]

        window = int(EKMAN_PERIOD / dt)
        padded = np.concatenate([np.full(window, forcing[0]), forcing])
        ma = np.array([padded[k + 1: k + 1 + window].mean() for k in range(n)])

        def peak_lag(est):
            a = est - est.mean()
            b = forcing - forcing.mean()
            corr = np.correlate(a, b, mode="full")
            return np.argmax(corr) - (n - 1)

        lag_wm = peak_lag(wm)
        lag_ma = peak_lag(ma)
        assert lag_wm >= 0
        assert lag_wm < lag_ma
