import json
import os

import numpy as np
import pytest
from scipy.special import expit

from surrogate_ate import (
    CalibrationError,
    ConfigurationError,
    DgpSpec,
    calibrate_tau,
    draw_dataset,
    make_spec,
    run_monte_carlo,
    run_study,
    true_tau,
    true_tau_mc,
)


# ---------------------------------------------------------------------------
# data generation

def test_draw_null_model_is_fair_coin():
    spec = DgpSpec(study="dimension", m_surrogates=2, n_exp=100_000, n_obs=100_000,
                   alpha=np.zeros(2), gamma=np.zeros(2))
    exp, obs = draw_dataset(spec, 123)
    se = 0.5 / np.sqrt(100_000)
    assert abs(exp.w.mean() - 0.5) < 3 * se
    assert abs(obs.y.mean() - 0.5) < 3 * se
    # independence of the surrogates: correlation with w is noise-level
    corr = np.corrcoef(exp.w, exp.s[:, 0])[0, 1]
    assert abs(corr) < 3 / np.sqrt(100_000)


def test_draw_is_deterministic():
    spec = make_spec("dimension", seed=4, m=3)
    a = draw_dataset(spec, np.random.SeedSequence((4, 2, 0, 7)))
    b = draw_dataset(spec, np.random.SeedSequence((4, 2, 0, 7)))
    assert np.array_equal(a[0].w, b[0].w)
    assert np.array_equal(a[0].s, b[0].s)
    assert np.array_equal(a[1].y, b[1].y)
    assert np.array_equal(a[1].s, b[1].s)
    c = draw_dataset(spec, np.random.SeedSequence((4, 2, 0, 8)))
    assert not np.array_equal(a[0].w, c[0].w)


def test_draw_correlation_matches_quadrature_oracle():
    spec = DgpSpec(study="dimension", m_surrogates=1, n_exp=1_000_000, n_obs=1_000_000,
                   alpha=np.ones(1), gamma=np.ones(1))
    exp, obs = draw_dataset(spec, 99)
    # the experimental sample also carries implicit outcomes in this model;
    # check corr(w, y) on a joint redraw against exact 1-d integration
    rng = np.random.default_rng(99)
    s = rng.standard_normal(1_000_000)
    w = (rng.random(1_000_000) < expit(s)).astype(float)
    y = (rng.random(1_000_000) < expit(s)).astype(float)

    nodes, weights = np.polynomial.hermite_e.hermegauss(128)
    weights = weights / np.sqrt(2 * np.pi)
    r = expit(nodes)
    e_w = weights @ r
    e_wy = weights @ (r * r)  # same logistic for both models
    rho = (e_wy - e_w**2) / (e_w * (1 - e_w))
    emp = np.corrcoef(w, y)[0, 1]
    assert abs(emp - rho) < 3 / np.sqrt(1_000_000) * 2


# ---------------------------------------------------------------------------
# specs

def test_make_spec_dimension():
    spec = make_spec("dimension", seed=9, m=200)
    assert spec.m_surrogates == 200
    assert spec.n_exp == spec.n_obs == 500
    assert np.array_equal(spec.alpha, spec.gamma)
    # coefficients fixed across calls with the same seed
    again = make_spec("dimension", seed=9, m=200)
    assert np.array_equal(spec.alpha, again.alpha)
    assert not np.array_equal(spec.alpha, make_spec("dimension", seed=10, m=200).alpha)


def test_make_spec_misspecification():
    spec = make_spec("misspecification", seed=0, k_used=10)
    assert spec.m_surrogates == 250
    assert spec.k_used == 10
    k = np.arange(1, 251)
    assert np.allclose(spec.alpha, (1 / 3) * k**-0.5)
    assert np.array_equal(spec.alpha, spec.gamma)


def test_make_spec_sample_size():
    spec = make_spec("sample_size", seed=6, q=0.05)
    assert spec.n_exp == 50
    assert spec.n_obs == 950
    assert spec.m_surrogates == 10


def test_make_spec_out_of_range():
    with pytest.raises(ConfigurationError):
        make_spec("dimension", seed=0, m=500)
    with pytest.raises(ConfigurationError):
        make_spec("misspecification", seed=0, k_used=0)
    with pytest.raises(ConfigurationError):
        make_spec("explanatory", seed=0, design_row=5)
    with pytest.raises(ConfigurationError):
        make_spec("nope", seed=0)


def test_explanatory_rows_share_direction():
    specs = [make_spec("explanatory", seed=3, design_row=row) for row in (1, 2, 3, 4)]
    z = specs[0].alpha
    assert np.allclose(specs[1].alpha, 2 * z)
    assert np.allclose(specs[1].gamma, z)
    assert np.allclose(specs[2].gamma, 2 * z)
    assert np.allclose(specs[3].alpha, 2 * z)


# ---------------------------------------------------------------------------
# true effect oracle

def test_true_tau_zero_gamma():
    spec = DgpSpec(study="dimension", m_surrogates=3, n_exp=10, n_obs=10,
                   alpha=np.array([1.0, 0.5, 0.0]), gamma=np.zeros(3))
    assert true_tau(spec) == 0.0


def test_true_tau_quadrature_vs_monte_carlo():
    spec = DgpSpec(study="dimension", m_surrogates=1, n_exp=10, n_obs=10,
                   alpha=np.ones(1), gamma=np.ones(1))
    quad = true_tau(spec)
    mc, se = true_tau_mc(spec, n_draws=2_000_000, seed=5)
    assert abs(quad - mc) < 3 * se


def test_true_tau_nonparallel_vs_monte_carlo():
    spec = DgpSpec(study="explanatory", m_surrogates=2, n_exp=10, n_obs=10,
                   alpha=np.array([1.0, 0.2]), gamma=np.array([-0.3, 0.9]))
    quad = true_tau(spec)
    mc, se = true_tau_mc(spec, n_draws=2_000_000, seed=6)
    assert abs(quad - mc) < 3 * se


def test_true_tau_calibrated_spec_hits_target():
    spec = make_spec("sample_size", seed=6, q=0.5)
    assert abs(true_tau(spec) - 0.5) < 1e-3


def test_true_tau_invariant_to_joint_permutation():
    rng = np.random.default_rng(2)
    alpha = rng.normal(size=4)
    gamma = 0.7 * alpha
    perm = rng.permutation(4)
    a = true_tau(DgpSpec(study="dimension", m_surrogates=4, n_exp=1, n_obs=1, alpha=alpha, gamma=gamma))
    b = true_tau(DgpSpec(study="dimension", m_surrogates=4, n_exp=1, n_obs=1,
                         alpha=alpha[perm], gamma=gamma[perm]))
    assert a == pytest.approx(b, abs=1e-14)


# ---------------------------------------------------------------------------
# calibration

def test_calibrate_zero_target():
    scale, intercepts = calibrate_tau(0.0, np.ones(5))
    assert scale == 0.0
    assert intercepts == (0.0, 0.0)


def test_calibrate_reaches_half():
    direction = np.random.default_rng(1).normal(size=10)
    scale, _ = calibrate_tau(0.5, direction, tolerance=1e-3)
    unit = direction / np.linalg.norm(direction)
    spec = DgpSpec(study="dimension", m_surrogates=10, n_exp=1, n_obs=1,
                   alpha=scale * unit, gamma=scale * unit)
    assert abs(true_tau(spec) - 0.5) < 1e-3


def test_calibrate_is_monotone_in_scale():
    unit = np.ones(3) / np.sqrt(3)
    taus = [
        true_tau(DgpSpec(study="dimension", m_surrogates=3, n_exp=1, n_obs=1,
                         alpha=c * unit, gamma=c * unit))
        for c in (0.0, 0.5, 1.0, 2.0, 4.0, 8.0)
    ]
    assert all(a < b for a, b in zip(taus, taus[1:]))


def test_calibrate_extreme_target():
    direction = np.ones(4)
    try:
        scale, _ = calibrate_tau(0.999, direction, tolerance=1e-3)
    except CalibrationError as err:
        assert "supremum" in str(err)
    else:
        unit = direction / 2.0
        spec = DgpSpec(study="dimension", m_surrogates=4, n_exp=1, n_obs=1,
                       alpha=scale * unit, gamma=scale * unit)
        assert abs(true_tau(spec) - 0.999) < 2e-3


def test_calibrate_rejects_impossible_target():
    with pytest.raises(CalibrationError):
        calibrate_tau(1.5, np.ones(3))


# ---------------------------------------------------------------------------
# Monte Carlo harness

def test_run_monte_carlo_deterministic():
    spec = make_spec("dimension", seed=8, m=2)
    a = run_monte_carlo(spec, reps=3, seed=8)
    b = run_monte_carlo(spec, reps=3, seed=8)
    assert a == b
    assert a.score.reps == 3
    assert a.score.failures == 0


def test_run_monte_carlo_thread_invariant():
    spec = make_spec("dimension", seed=8, m=2)
    old = os.environ.get("SURROGATE_THREADS")
    try:
        os.environ["SURROGATE_THREADS"] = "1"
        a = run_monte_carlo(spec, reps=8, seed=8)
        os.environ["SURROGATE_THREADS"] = "8"
        b = run_monte_carlo(spec, reps=8, seed=8)
    finally:
        if old is None:
            os.environ.pop("SURROGATE_THREADS", None)
        else:
            os.environ["SURROGATE_THREADS"] = old
    assert a == b


def test_run_monte_carlo_null_calibration():
    spec = DgpSpec(study="dimension", m_surrogates=2, n_exp=400, n_obs=400,
                   alpha=np.zeros(2), gamma=np.zeros(2))
    result = run_monte_carlo(spec, reps=60, seed=14)
    for stats in (result.score, result.index):
        assert stats.true_tau == 0.0
        assert stats.abs_bias < 4 * stats.sd / np.sqrt(stats.reps - stats.failures)


def test_run_study_writes_csv_and_manifest(tmp_path):
    out = tmp_path / "study.csv"
    rows = run_study("sample_size", reps=4, seed=2, out_path=out, grid=[0.5])
    assert len(rows) == 2
    assert {r["estimator"] for r in rows} == {"score", "index"}
    text = out.read_text().splitlines()
    assert text[0] == "grid_value,estimator,abs_bias_x100,sd_x100,reps,failures,true_tau"
    assert len(text) == 3
    manifest = json.loads((tmp_path / "study.csv.manifest.json").read_text())
    assert manifest["reps"] == 4
    assert manifest["study"] == "sample_size"
    assert len(manifest["specs"]) == 1
    assert manifest["specs"][0]["n_exp"] == 500


def test_run_study_rejects_bad_input(tmp_path):
    with pytest.raises(ConfigurationError):
        run_study("sample_size", reps=0, seed=1)
    with pytest.raises(ConfigurationError):
        run_study("unknown", reps=1, seed=1)


def test_run_monte_carlo_counts_failures_per_estimator():
    # tiny observational sample with a strong outcome model: some draws give
    # single-class outcomes, which fail only the index fit
    spec = DgpSpec(study="dimension", m_surrogates=1, n_exp=40, n_obs=4,
                   alpha=np.array([0.5]), gamma=np.array([0.5]), gamma0=2.0)
    result = run_monte_carlo(spec, reps=60, seed=3)
    assert result.index.failures > 0
    assert result.index.reps == 60
    assert result.score.failures == 0


def test_run_monte_carlo_all_failures_is_study_error():
    from surrogate_ate import StudyError

    # an outcome intercept this large makes every outcome 1: the index fit
    # can never succeed while the score path still works
    spec = DgpSpec(study="dimension", m_surrogates=1, n_exp=40, n_obs=40,
                   alpha=np.array([0.5]), gamma=np.array([0.0]), gamma0=40.0)
    with pytest.raises(StudyError):
        run_monte_carlo(spec, reps=5, seed=1)
