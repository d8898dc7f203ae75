import math

import numpy as np
import pytest

from crossvar.fbm import SamplePath, generate_bivariate_fbm, uniform_grid
from crossvar.htest import UnsupportedRegimeError, estimate_conditional_variance
from crossvar.htest import test_zero_cross as zero_cross_test
from crossvar.young import ConstantCoef, PolynomialCoef, SigmaSpec, simulate_X


def _h0_pair(h, n, seed, replicate=0):
    return generate_bivariate_fbm(h, n, 1.0, seed, replicate=replicate)


class TestConditionalVariance:
    def test_identity_targets_one(self):
        h, n, L, M = 0.6, 1024, 32, 300
        vals = []
        for r in range(M):
            x1, x2 = _h0_pair(h, n, seed=41, replicate=r)
            v, deg = estimate_conditional_variance(x1, x2, n, L, h)
            assert not deg
            vals.append(v)
        vals = np.asarray(vals)
        se = vals.std(ddof=1) / math.sqrt(M)
        assert abs(vals.mean() - 1.0) < 3 * se + 0.01

    def test_linear_loading_targets_integral(self):
        # s11(s) = 1 + s, s22 = 1: integral of (1+s)^2 is 7/3
        h, n, M = 0.65, 1024, 300
        spec = SigmaSpec(entries=((PolynomialCoef((1.0, 1.0)), ConstantCoef(0.0)),
                                  (ConstantCoef(0.0), ConstantCoef(1.0))),
                         alpha=0.62)
        vals = []
        for r in range(M):
            b1, b2 = _h0_pair(h, 4 * n, seed=42, replicate=r)
            model = simulate_X(spec, b1, b2, h, 4)
            v, deg = estimate_conditional_variance(model.x1, model.x2, n,
                                                   int(math.isqrt(n)), h)
            assert not deg
            vals.append(v)
        vals = np.asarray(vals)
        se = vals.std(ddof=1) / math.sqrt(M)
        assert abs(vals.mean() - 7.0 / 3.0) < 3 * se + 0.03

    def test_constant_component_degenerate(self):
        h, n = 0.6, 256
        x1, _ = _h0_pair(h, n, seed=43)
        flat = SamplePath(uniform_grid(n, 1.0), np.full(n + 1, 2.0), x1.meta)
        v, deg = estimate_conditional_variance(x1, flat, n, 16, h)
        assert deg
        assert v == 0.0

    def test_block_count_must_divide(self):
        x1, x2 = _h0_pair(0.6, 256, seed=44)
        with pytest.raises(ValueError):
            estimate_conditional_variance(x1, x2, 256, 10, 0.6)


class TestZeroCrossTest:
    def test_supercritical_rejected(self):
        x1, x2 = _h0_pair(0.85, 256, seed=45)
        with pytest.raises(UnsupportedRegimeError):
            zero_cross_test(x1, x2, 256, 0.85)

    def test_level_guard(self):
        x1, x2 = _h0_pair(0.6, 256, seed=46)
        with pytest.raises(ValueError):
            zero_cross_test(x1, x2, 256, 0.6, level=1.5)

    def test_degenerate_abstains(self):
        x1, _ = _h0_pair(0.6, 256, seed=47)
        flat = SamplePath(uniform_grid(256, 1.0), np.full(257, 1.0), x1.meta)
        res = zero_cross_test(x1, flat, 256, 0.6)
        assert res.degenerate
        assert res.reject is None and res.statistic is None

    def test_scale_equivariance(self):
        x1, x2 = _h0_pair(0.6, 1024, seed=48)
        base = zero_cross_test(x1, x2, 1024, 0.6)
        scaled = x1.with_values(3.7 * x1.values, "scaled")
        res = zero_cross_test(scaled, x2, 1024, 0.6)
        assert res.statistic == pytest.approx(base.statistic, rel=1e-10)

    def test_decision_matches_critical_value(self):
        for seed in range(49, 59):
            x1, x2 = _h0_pair(0.6, 512, seed=seed)
            res = zero_cross_test(x1, x2, 512, 0.6, level=0.05)
            assert res.reject == (abs(res.statistic) > res.critical_value)

    def test_statistic_variance_near_one(self):
        h, n, M = 0.6, 1024, 400
        stats = []
        for r in range(M):
            x1, x2 = _h0_pair(h, n, seed=50, replicate=r)
            stats.append(zero_cross_test(x1, x2, n, h).statistic)
        v = float(np.var(stats, ddof=1))
        assert abs(v - 1.0) < 0.15

    def test_critical_regime_supported(self):
        x1, x2 = _h0_pair(0.75, 512, seed=51)
        res = zero_cross_test(x1, x2, 512, 0.75)
        assert res.regime == "critical"
        assert res.statistic is not None

    def test_records_plugin_flag(self):
        x1, x2 = _h0_pair(0.6, 256, seed=52)
        res = zero_cross_test(x1, x2, 256, 0.6, h_estimated=True)
        assert res.h_estimated
