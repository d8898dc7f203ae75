import json
import math

import numpy as np
import pytest

from crossvar.config import (
    ConfigError,
    DEFAULT_TOLERANCES,
    build_coefficient,
    build_sigma,
    config_digest,
    parse_config,
)
from crossvar.experiments import (
    _moments,
    run_dyadic_cauchy,
    run_experiment,
    run_lemma1_rates,
    run_lemma2_check,
    run_prop1,
    run_theorem1,
    run_theorem2,
)

IDENTITY = {"s11": 1.0, "s22": 1.0, "alpha": 0.56}


def _cfg(**kw):
    doc = {
        "experiment": "theorem2",
        "H": 0.6,
        "replications": 64,
        "master_seed": 7,
        "n_grid": [128, 256],
        "t_grid": [0.5, 1.0],
        "sigma": dict(IDENTITY),
        "oversampling": 1,
    }
    doc.update(kw)
    return parse_config(doc)


class TestConfig:
    def test_unknown_top_key_rejected(self):
        with pytest.raises(ConfigError) as e:
            _cfg(extra_knob=3)
        assert "extra_knob" in str(e.value)

    def test_unknown_sigma_key_rejected(self):
        with pytest.raises(ConfigError) as e:
            _cfg(sigma={"s11": 1.0, "s33": 2.0, "alpha": 0.56})
        assert "s33" in str(e.value)

    def test_unknown_tolerance_rejected(self):
        with pytest.raises(ConfigError):
            _cfg(tolerances={"no_such_gate": 1.0})

    def test_missing_required(self):
        with pytest.raises(ConfigError):
            parse_config({"experiment": "theorem2", "H": 0.6})

    def test_unknown_experiment(self):
        with pytest.raises(ConfigError):
            _cfg(experiment="theorem9")

    def test_grid_divisibility(self):
        with pytest.raises(ConfigError):
            _cfg(n_grid=[96, 256])

    def test_digest_tracks_content(self):
        a = config_digest(_cfg())
        b = config_digest(_cfg())
        c = config_digest(_cfg(master_seed=8))
        assert a == b
        assert a != c

    def test_coefficient_forms(self):
        assert build_coefficient(2.5).sample(np.zeros(2))[0] == 2.5
        c = build_coefficient({"kind": "polynomial", "coeffs": [0.0, 1.0]})
        assert c.sample(np.array([0.25]))[0] == 0.25
        with pytest.raises(ConfigError):
            build_coefficient({"kind": "wavelet"})
        with pytest.raises(ConfigError):
            build_coefficient({"kind": "trig", "coeffs": [1]})

    def test_sigma_requires_alpha(self):
        with pytest.raises(ConfigError):
            build_sigma({"s11": 1.0})

    def test_weight_exponent_guard(self):
        with pytest.raises(ConfigError):
            _cfg(experiment="prop1",
                 weight={"kind": "constant", "value": 1.0,
                         "holder_exponent": 0.4})

    def test_tolerance_defaults_and_overrides(self):
        cfg = _cfg(tolerances={"variance_ratio": 0.15})
        assert cfg.tol("variance_ratio") == 0.15
        assert cfg.tol("skewness") == DEFAULT_TOLERANCES["skewness"]


class TestMoments:
    def test_permutation_invariant(self):
        rng = np.random.default_rng(0)
        xs = list(rng.standard_normal(501))
        a = _moments(xs)
        b = _moments(list(reversed(xs)))
        perm = list(rng.permutation(xs))
        c = _moments(perm)
        for key in ("mean", "variance", "skewness", "excess_kurtosis"):
            assert a[key] == b[key] == c[key]

    def test_against_numpy(self):
        rng = np.random.default_rng(1)
        xs = rng.standard_normal(400)
        m = _moments(list(xs))
        assert m["mean"] == pytest.approx(float(xs.mean()), rel=1e-12)
        assert m["variance"] == pytest.approx(float(xs.var(ddof=1)), rel=1e-12)


class TestTheorem1:
    def test_null_sigma_centered(self):
        cfg = _cfg(experiment="theorem1",
                   sigma={"s11": 1.0, "s22": 2.0, "alpha": 0.56},
                   replications=128)
        report, rows = run_theorem1(cfg)
        names = [c.name for c in report.criteria]
        assert any(n.startswith("mean_centered") for n in names)
        assert report.passed
        assert report.extras["oracle"]["t=1"] == 0.0

    def test_nonzero_oracle(self):
        # X1 loads (1, 0), X2 loads (s, 0): limit integrand is s
        cfg = _cfg(experiment="theorem1", H=0.65,
                   sigma={"s11": 1.0,
                          "s21": {"kind": "polynomial", "coeffs": [0.0, 1.0]},
                          "alpha": 0.62},
                   n_grid=[256, 512], replications=256, oversampling=4)
        report, _ = run_theorem1(cfg)
        assert report.extras["oracle"]["t=1"] == pytest.approx(0.5, rel=1e-9)
        mm = report.tables["n=512,t=1"]
        assert abs(mm["mean"] - 0.5) < 0.05

    def test_random_sigma_refused(self):
        cfg = _cfg(experiment="theorem1",
                   sigma={"s11": {"kind": "path", "component": 1},
                          "s22": 1.0, "alpha": 0.56})
        with pytest.raises(ValueError):
            run_theorem1(cfg)

    def test_rows_shape(self):
        cfg = _cfg(experiment="theorem1",
                   sigma={"s11": 1.0, "s22": 1.0, "alpha": 0.56},
                   replications=8)
        _, rows = run_theorem1(cfg)
        # one row per (replicate, n, t)
        assert len(rows) == 8 * 2 * 2
        reps = sorted({r[0] for r in rows})
        assert reps == list(range(8))
        assert all(r[4] == "n^{2H-1}" for r in rows)


class TestTheorem2:
    def test_identity_run_and_calibration(self):
        cfg = _cfg(replications=400, n_grid=[256, 1024])
        report, rows = run_theorem2(cfg)
        assert report.passed, [c for c in report.criteria if not c.passed]
        calib = report.extras["constant_calibration"]
        assert calib["matching_form"] == "sqrt"
        r_sqrt = calib["candidates"]["sqrt"]["sd_ratio"]
        r_series = calib["candidates"]["series"]["sd_ratio"]
        assert abs(r_sqrt - 1.0) < 0.1
        assert abs(r_series - 1.0) > 0.2
        assert "ks_distance_vs_fitted_gaussian" in report.extras

    def test_rejects_cross_loadings(self):
        cfg = _cfg(sigma={"s11": 1.0, "s12": 0.5, "s22": 1.0, "alpha": 0.56})
        with pytest.raises(ValueError):
            run_theorem2(cfg)

    def test_scaling_is_exact_pathwise(self):
        base = _cfg(replications=16)
        scaled = _cfg(replications=16,
                      sigma={"s11": 3.0, "s22": 1.0, "alpha": 0.56})
        _, rows_a = run_theorem2(base)
        _, rows_b = run_theorem2(scaled)
        va = np.asarray([r[3] for r in rows_a])
        vb = np.asarray([r[3] for r in rows_b])
        assert np.allclose(vb, 3.0 * va, rtol=1e-12)

    def test_supercritical_delegates(self):
        cfg = _cfg(H=0.85, n_grid=[64, 128, 256, 512, 1024],
                   t_grid=[1.0], replications=64)
        report, _ = run_theorem2(cfg)
        assert report.experiment == "dyadic_cauchy"


class TestProp1:
    def test_unit_weight_reproduces_theorem2(self):
        c2 = _cfg(replications=48)
        cp = _cfg(experiment="prop1", replications=48,
                  weight={"kind": "constant", "value": 1.0,
                          "holder_exponent": 1.0})
        _, rows2 = run_theorem2(c2)
        report, rowsp = run_prop1(cp)
        a = {(r[0], r[1], r[2]): r[3] for r in rows2}
        b = {(r[0], r[1], r[2]): r[3] for r in rowsp}
        assert a == b
        assert "stability_proxy" in report.extras

    def test_time_weight_gaussian(self):
        cfg = _cfg(experiment="prop1", H=0.65, replications=400,
                   n_grid=[256, 1024],
                   weight={"kind": "polynomial", "coeffs": [0.0, 1.0],
                           "holder_exponent": 1.0})
        report, _ = run_prop1(cfg)
        assert report.passed, [c for c in report.criteria if not c.passed]

    def test_adapted_weight_centered(self):
        cfg = _cfg(experiment="prop1", H=0.65, replications=300,
                   n_grid=[512],
                   weight={"kind": "path", "component": 1, "transform": "sin",
                           "holder_exponent": 0.6})
        report, _ = run_prop1(cfg)
        mean_crit = [c for c in report.criteria if c.name.startswith("mean_")][0]
        assert mean_crit.passed


class TestDyadic:
    def test_structure_and_gates(self):
        cfg = _cfg(experiment="dyadic_cauchy", H=0.85,
                   n_grid=[32, 64, 128, 256, 512, 1024],
                   t_grid=[1.0], replications=400)
        report, rows = run_dyadic_cauchy(cfg)
        fams = {r[4] for r in rows}
        assert fams == {"taqqu", "rosen", "njn"}
        cau = report.extras["cauchy"]["taqqu"]
        ds = [cau[j]["d"] for j in sorted(cau)]
        assert ds[-1] < ds[0]
        for crit in report.criteria:
            assert crit.passed, crit

    def test_requires_supercritical(self):
        cfg = _cfg(experiment="dyadic_cauchy", H=0.6,
                   n_grid=[64, 128, 256, 512], t_grid=[1.0])
        with pytest.raises(ValueError):
            run_dyadic_cauchy(cfg)

    def test_requires_consecutive_dyadics(self):
        cfg = _cfg(experiment="dyadic_cauchy", H=0.85,
                   n_grid=[64, 256, 1024, 4096], t_grid=[1.0])
        with pytest.raises(ValueError):
            run_dyadic_cauchy(cfg)


class TestLemma2:
    def test_deterministic_cos(self):
        cfg = _cfg(experiment="lemma2", sigma=None, n_grid=[100, 10000],
                   t_grid=[1.0],
                   lemma2={"g": {"kind": "trig", "form": "cos"},
                           "gamma": 1.0, "t": 1.0})
        report, rows = run_lemma2_check(cfg)
        assert report.passed
        val = report.tables["n=10000,t=1"]["value"]
        assert abs(val - math.sin(1.0)) < 1e-3

    def test_unit_weight_recovers_time(self):
        cfg = _cfg(experiment="lemma2", sigma=None, n_grid=[10000],
                   t_grid=[1.0], lemma2={"g": 1.0, "gamma": 1.0, "t": 0.75})
        report, _ = run_lemma2_check(cfg)
        assert report.tables["n=10000,t=0.75"]["value"] == pytest.approx(
            0.75, abs=1e-3)

    def test_monte_carlo_mode(self):
        cfg = _cfg(experiment="lemma2", sigma=None, H=0.65,
                   n_grid=[512], t_grid=[1.0], replications=300,
                   lemma2={"g": {"kind": "trig", "form": "cos"},
                           "t": 1.0, "monte_carlo": True})
        report, rows = run_lemma2_check(cfg)
        assert report.passed, report.criteria
        assert len(rows) == 300


class TestLemma1Rates:
    def test_slopes(self):
        cfg = _cfg(experiment="lemma1_rates", H=0.65,
                   sigma={"s11": {"kind": "polynomial", "coeffs": [1.0, 1.0]},
                          "s22": 1.0, "alpha": 0.62},
                   n_grid=[64, 128, 256, 512], replications=160,
                   oversampling=8)
        report, rows = run_lemma1_rates(cfg)
        assert report.passed, [c for c in report.criteria if not c.passed]
        assert report.extras["slope_full"]["value"] == pytest.approx(-0.65, abs=0.15)


class TestWorkerIndependence:
    def test_results_identical_across_worker_counts(self):
        cfg = _cfg(replications=24, n_grid=[64, 128])
        rep1, rows1 = run_experiment(cfg, workers=1)
        rep2, rows2 = run_experiment(cfg, workers=2)
        assert rows1 == rows2
        assert json.dumps(rep1.to_json_dict(), sort_keys=True) == \
            json.dumps(rep2.to_json_dict(), sort_keys=True)
