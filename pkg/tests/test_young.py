import math

import numpy as np
import pytest

from crossvar.fbm import SamplePath, generate_bivariate_fbm, generate_fbm_path, holder_norm, uniform_grid
from crossvar.young import (
    AssumptionError,
    ConstantCoef,
    PathCoef,
    PolynomialCoef,
    SigmaSpec,
    TrigCoef,
    identity_sigma,
    lemma1_error,
    simulate_X,
    young_constant,
    young_integrate,
    young_remainder_check,
)


def _path(values, T=1.0):
    n = len(values) - 1
    meta = generate_fbm_path(0.6, 2, 1.0, 0).meta
    return SamplePath(uniform_grid(n, T), np.asarray(values, dtype=float), meta)


def _fn_path(fn, n, T=1.0):
    grid = uniform_grid(n, T)
    return _path(fn(grid), T)


class TestYoungConstant:
    def test_frozen_value(self):
        # independent oracle: sum the geometric series directly
        series = 0.5 * sum(2.0 ** (-n * 0.8) for n in range(1, 400))
        assert young_constant(0.9, 0.9) == pytest.approx(series, rel=1e-12)
        assert young_constant(0.9, 0.9) == pytest.approx(0.67467, abs=1e-5)

    def test_sum_two(self):
        assert young_constant(1.0, 1.0) == pytest.approx(0.5, rel=1e-14)

    def test_divergent(self):
        with pytest.raises(ValueError):
            young_constant(0.5, 0.5)


class TestYoungIntegrate:
    def test_constant_integrand_telescopes(self):
        g = generate_fbm_path(0.7, 512, 1.0, seed=3)
        f = _fn_path(lambda t: np.ones_like(t), 512)
        out = young_integrate(f, g)
        assert np.allclose(out.values, g.values - g.values[0], rtol=0, atol=1e-14)

    @pytest.mark.parametrize("n", [4, 16, 128, 1024])
    def test_t_dt_exact(self, n):
        f = _fn_path(lambda t: t, n)
        out = young_integrate(f, f)
        assert out.values[-1] == pytest.approx((n - 1) / (2 * n), rel=1e-13)

    def test_cos_dsin_converges(self):
        # limit is 1/2 + sin(2)/4
        target = 0.5 + math.sin(2.0) / 4.0
        errs = []
        for n in (64, 128, 256, 512):
            f = _fn_path(np.cos, n)
            g = _fn_path(np.sin, n)
            errs.append(abs(young_integrate(f, g).values[-1] - target))
        assert errs[-1] < 2e-3
        # empirical order >= 1: error roughly halves with n
        assert errs[-1] < 0.6 * errs[-2]

    def test_linear_in_integrand(self):
        g = generate_fbm_path(0.7, 256, 1.0, seed=5)
        f = generate_fbm_path(0.7, 256, 1.0, seed=6)
        h = generate_fbm_path(0.7, 256, 1.0, seed=7)
        comb = f.with_values(2.0 * f.values - 3.5 * h.values, "comb")
        lhs = young_integrate(comb, g).values
        rhs = 2.0 * young_integrate(f, g).values - 3.5 * young_integrate(h, g).values
        scale = np.abs(rhs).max()
        assert np.abs(lhs - rhs).max() <= 1e-12 * scale

    def test_chasles_exact_on_grid(self):
        g = generate_fbm_path(0.7, 256, 1.0, seed=8)
        f = generate_fbm_path(0.7, 256, 1.0, seed=9)
        out = young_integrate(f, g).values
        # increment over [a, b] equals the difference of the cumulatives
        mid = 100
        inc = float(np.sum(f.values[mid:-1] * np.diff(g.values)[mid:]))
        assert out[-1] - out[mid] == pytest.approx(inc, rel=1e-12)

    def test_grid_mismatch(self):
        f = generate_fbm_path(0.7, 128, 1.0, seed=1)
        g = generate_fbm_path(0.7, 256, 1.0, seed=1)
        with pytest.raises(ValueError):
            young_integrate(f, g)


class TestRemainderCheck:
    def test_constant_integrand_ratio_zero(self):
        f = _fn_path(lambda t: np.full_like(t, 2.0), 256)
        g = generate_fbm_path(0.7, 256, 1.0, seed=2)
        rep = young_remainder_check(f, g, 0.25, 0.75, 0.9, 0.6)
        assert rep.lhs == 0.0
        assert rep.ratio == 0.0

    def test_smooth_ratio_bounded(self):
        n = 512
        f = _fn_path(np.cos, n)
        g = _fn_path(np.sin, n)
        # analytic Hoelder norms on [0,1]: |cos|_.9 <= 1, |sin|_.9 <= 1
        for a, b in ((0.0, 1.0), (0.25, 0.75), (0.5, 0.625), (0.0, 0.5)):
            rep = young_remainder_check(f, g, a, b, 0.9, 0.9,
                                        f_norm=1.0, g_norm=1.0)
            assert rep.ratio <= 1.05

    def test_shift_invariance(self):
        # the two sides only involve increments, so adding constants to f
        # and g changes nothing
        n = 256
        f = generate_fbm_path(0.7, n, 1.0, seed=4)
        g = generate_fbm_path(0.7, n, 1.0, seed=5)
        r1 = young_remainder_check(f, g, 0.25, 0.5, 0.6, 0.6)
        fs = f.with_values(f.values + 5.0, "shift")
        gs = g.with_values(g.values - 2.0, "shift")
        r2 = young_remainder_check(fs, gs, 0.25, 0.5, 0.6, 0.6)
        assert r1.ratio == pytest.approx(r2.ratio, rel=1e-10)

    def test_requires_grid_points(self):
        f = generate_fbm_path(0.7, 100, 1.0, seed=4)
        with pytest.raises(ValueError):
            young_remainder_check(f, f, 0.001, 0.5, 0.9, 0.9)


class TestCoefficients:
    def test_constant(self):
        c = ConstantCoef(3.0)
        assert np.array_equal(c.sample(np.array([0.0, 1.0])), [3.0, 3.0])

    def test_polynomial(self):
        c = PolynomialCoef((1.0, 2.0, 3.0))
        t = np.array([0.0, 1.0, 2.0])
        assert np.allclose(c.sample(t), 1 + 2 * t + 3 * t ** 2)

    def test_trig(self):
        c = TrigCoef(kind="sin", amplitude=2.0, frequency=3.0)
        t = np.array([0.2, 0.4])
        assert np.allclose(c.sample(t), 2.0 * np.sin(3.0 * t))
        with pytest.raises(ValueError):
            TrigCoef(kind="tan")

    def test_path_functional(self):
        c = PathCoef(component=2, transform="tanh", scale=0.5)
        t = np.array([0.0, 0.5])
        drv = (np.array([1.0, 2.0]), np.array([0.3, -0.7]))
        assert np.allclose(c.sample(t, drv), 0.5 * np.tanh(drv[1]))
        assert not c.is_deterministic()
        with pytest.raises(ValueError):
            c.sample(t, None)


class TestSigmaSpec:
    def test_assumption_window(self):
        spec = identity_sigma(alpha=0.62)
        spec.check_assumption(0.65)              # (0.575, 0.65) contains 0.62
        with pytest.raises(AssumptionError):
            spec.check_assumption(0.6)           # window (0.55, 0.6) excludes it
        with pytest.raises(ValueError):
            spec.check_assumption(0.45)          # needs H > 1/2

    def test_diagonal_detection(self):
        assert identity_sigma().is_diagonal()
        spec = SigmaSpec(entries=((ConstantCoef(1.0), ConstantCoef(0.1)),
                                  (ConstantCoef(0.0), ConstantCoef(1.0))),
                         alpha=0.62)
        assert not spec.is_diagonal()


class TestSimulateX:
    def test_identity_gives_shifted_drivers(self):
        b1, b2 = generate_bivariate_fbm(0.65, 512, 1.0, seed=7)
        model = simulate_X(identity_sigma(alpha=0.6, x0=(1.5, -2.0)), b1, b2, 0.65)
        assert np.allclose(model.x1.values, 1.5 + b1.values, rtol=0, atol=1e-12)
        assert np.allclose(model.x2.values, -2.0 + b2.values, rtol=0, atol=1e-12)
        assert model.x1.values[0] == 1.5 and model.x2.values[0] == -2.0

    def test_constant_scales_driver(self):
        b1, b2 = generate_bivariate_fbm(0.65, 256, 1.0, seed=8)
        spec = SigmaSpec(entries=((ConstantCoef(2.5), ConstantCoef(0.0)),
                                  (ConstantCoef(0.0), ConstantCoef(0.0))),
                         alpha=0.6)
        model = simulate_X(spec, b1, b2, 0.65)
        assert np.allclose(model.x1.values, 2.5 * b1.values, rtol=0, atol=1e-12)
        assert np.allclose(model.x2.values, 0.0, atol=1e-15)

    def test_linear_coefficient_by_parts_oracle(self):
        # int_0^t s dB with left sums differs from t B_t - (left sum of B ds)
        # by exactly B_t / n, so the gap halves along dyadic refinement
        h = 0.65
        spec = SigmaSpec(entries=((PolynomialCoef((0.0, 1.0)), ConstantCoef(0.0)),
                                  (ConstantCoef(0.0), ConstantCoef(0.0))),
                         alpha=0.6)
        gaps = []
        for n in (256, 512, 1024):
            b1, b2 = generate_bivariate_fbm(h, n, 1.0, seed=11)
            model = simulate_X(spec, b1, b2, h)
            t = b1.grid
            oracle = t * b1.values - np.concatenate(
                [[0.0], np.cumsum(b1.values[:-1] * np.diff(t))])
            gap = np.abs(model.x1.values - oracle)
            expected = np.abs(b1.values) / n
            assert np.allclose(gap, expected, rtol=1e-8, atol=1e-14)
            gaps.append(gap.max())
        assert gaps[2] < gaps[0]

    def test_violating_assumption_rejected(self):
        b1, b2 = generate_bivariate_fbm(0.6, 64, 1.0, seed=1)
        with pytest.raises(AssumptionError) as err:
            simulate_X(identity_sigma(alpha=0.62), b1, b2, 0.6)
        assert "0.62" in str(err.value)

    def test_oversampling_refinement_agreement(self):
        # model increments at the statistic resolution agree between the
        # m and 2m discretizations of the same driving path within the
        # one-cell remainder scale C n^{-(alpha_sigma + alpha_B)}
        h, n, m = 0.7, 64, 4
        alpha_s, alpha_b = 0.65, 0.55
        fine1, fine2 = generate_bivariate_fbm(h, 2 * m * n, 1.0, seed=23)
        spec = SigmaSpec(entries=((TrigCoef("cos"), ConstantCoef(0.0)),
                                  (ConstantCoef(0.0), PolynomialCoef((1.0, 1.0)))),
                         alpha=alpha_s)
        x_fine = simulate_X(spec, fine1, fine2, h, 2 * m)
        x_coarse = simulate_X(spec, fine1.subsample(m * n),
                              fine2.subsample(m * n), h, m)
        d_fine = np.diff(x_fine.x1.values[:: 2 * m])
        d_coarse = np.diff(x_coarse.x1.values[:: m])
        gap = np.abs(d_fine - d_coarse).max()
        from crossvar.young import young_constant as yc
        C = (4.0 * yc(alpha_s, alpha_b) * holder_norm(fine1, alpha_b)
             * 1.0)          # |cos|_alpha <= 1 on [0,1]
        assert gap <= C * n ** (-(alpha_s + alpha_b))


class TestLemma1Error:
    def test_constant_coefficient_centered_vanishes(self):
        res = lemma1_error(ConstantCoef(3.0), 0.65, n=16, k=4,
                           oversampling=4, replications=20, master_seed=5)
        assert res.e_centered == pytest.approx(0.0, abs=1e-12)
        assert res.e_full > 0.0

    def test_rejects_coarse_oversampling(self):
        with pytest.raises(ValueError):
            lemma1_error(ConstantCoef(1.0), 0.65, n=16, k=1,
                         oversampling=2, replications=10)

    def test_rejects_bad_cell(self):
        with pytest.raises(ValueError):
            lemma1_error(ConstantCoef(1.0), 0.65, n=16, k=17,
                         oversampling=4, replications=10)

    def test_callable_coefficient(self):
        res = lemma1_error(lambda s: 1.0 + s, 0.65, n=32, k=32,
                           oversampling=4, replications=50, master_seed=9)
        assert res.e_centered > 0.0
        assert res.e_centered < res.e_full
