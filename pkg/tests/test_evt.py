import math

import numpy as np
import pytest

from goosewatch import evt
from oracles import gpd_sample


class TestFitGpd:
    @pytest.mark.parametrize("xi,sigma", [(0.1, 2.0), (0.3, 1.0), (0.0, 1.0)])
    def test_recovers_known_parameters(self, xi, sigma):
        rng = np.random.default_rng(42)
        y = gpd_sample(rng, xi, sigma, 100_000)
        xi_hat, sigma_hat = evt.fit_gpd(y)
        assert xi_hat == pytest.approx(xi, abs=0.03)
        assert sigma_hat == pytest.approx(sigma, rel=0.05)

    def test_exponential_is_xi_zero(self):
        rng = np.random.default_rng(7)
        y = rng.exponential(1.0, 100_000)
        xi_hat, sigma_hat = evt.fit_gpd(y)
        assert xi_hat == pytest.approx(0.0, abs=0.03)
        assert sigma_hat == pytest.approx(1.0, rel=0.05)

    def test_degenerate_tail_falls_back(self):
        with pytest.warns(UserWarning, match="degenerate"):
            xi_hat, sigma_hat = evt.fit_gpd(np.full(200, 3.5))
        assert sigma_hat > 0

    def test_too_few_exceedances(self):
        with pytest.raises(evt.TooFewExceedances):
            evt.fit_gpd(np.ones(10))

    def test_warns_below_comfortable_count(self):
        rng = np.random.default_rng(3)
        with pytest.warns(UserWarning, match="unstable"):
            evt.fit_gpd(rng.exponential(1.0, 50))

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            evt.fit_gpd(np.concatenate([np.ones(50), [-1.0]]))


class TestQuantileFormula:
    def test_exponential_limit_arithmetic(self):
        assert evt.pot_quantile(10.0, 0.0, 1.0, math.exp(-1)) == pytest.approx(11.0)

    @pytest.mark.parametrize("xi", [-0.3, 0.0, 0.2, 0.7])
    def test_ratio_one_fixed_point(self, xi):
        assert evt.pot_quantile(5.0, xi, 2.0, 1.0) == pytest.approx(5.0)

    def test_heavy_tail_formula(self):
        # xi=0.5, sigma=2, u=1, ratio=0.01 -> 1 + 4*(0.01^-0.5 - 1) = 37
        assert evt.pot_quantile(1.0, 0.5, 2.0, 0.01) == pytest.approx(37.0)


class TestCalibrate:
    def test_threshold_fields_consistent(self):
        rng = np.random.default_rng(0)
        errors = rng.lognormal(-3, 0.5, 20_000)
        th = evt.calibrate(errors, q=1e-3, u_quantile=0.98, view="seq")
        assert th.view == "seq"
        assert th.z_star >= th.u
        assert th.sigma > 0
        assert th.n == 20_000
        assert th.n_u <= th.n

    def test_monotone_in_risk(self):
        rng = np.random.default_rng(1)
        errors = rng.lognormal(-3, 0.5, 20_000)
        zs = [evt.calibrate(errors, q=q).z_star for q in (1e-2, 1e-3, 1e-4)]
        assert zs[0] <= zs[1] <= zs[2]

    def test_empirical_exceedance_rate(self):
        rng = np.random.default_rng(11)
        fit = gpd_sample(rng, 0.3, 1.0, 100_000)
        th = evt.calibrate(fit, q=1e-3)
        fresh = gpd_sample(rng, 0.3, 1.0, 1_000_000)
        rate = float(np.mean(fresh > th.z_star))
        assert 0.5e-3 <= rate <= 2e-3

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        errors = rng.exponential(0.01, 50_000)
        a = evt.calibrate(errors, q=1e-3)
        b = evt.calibrate(errors, q=1e-3)
        assert a == b

    def test_too_small_calibration_set(self):
        with pytest.raises(evt.TooFewExceedances):
            evt.calibrate(np.arange(100.0), q=1e-3)

    def test_risk_above_tail_fraction_rejected(self):
        rng = np.random.default_rng(2)
        errors = rng.exponential(1.0, 10_000)
        with pytest.raises(ValueError, match="risk"):
            evt.calibrate(errors, q=0.5, u_quantile=0.98)

    def test_json_roundtrip(self):
        th = evt.EvtThreshold("temp", 1.0, 0.1, 0.5, 1000, 20, 1e-3, 2.5)
        assert evt.EvtThreshold.from_dict(th.to_dict()) == th
