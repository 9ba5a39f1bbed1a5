"""End-to-end acceptance suite.

Each test pins one headline guarantee of the package: the closed-form
design algebra, the projection identities, equivalence with a dense
reference solver, the mean identity of the tie transform, and the
Monte-Carlo behavior of the estimators, tests, and the weighted
extension at study scale.  The Monte-Carlo tests here are the expensive
ones; everything else in the suite runs in seconds.
"""

import time

import numpy as np
import pytest
import scipy.linalg
import scipy.stats

from dyadlink.design import (
    GramSummary,
    PairIndexing,
    apply_U,
    apply_Ut,
    apply_Vinv,
    dense_U,
    vinv_entry,
    ztd_vec,
)
from dyadlink.estimator import FitOptions, fit
from dyadlink.inference import draw_effect_stats, zeta_diag
from dyadlink.simulate import (
    COVARIATE_B,
    DgpSpec,
    generate_network,
    param_schedule,
    run_mc,
)
from dyadlink.weighted import fit_weighted


# ---------------------------------------------------------------------------
# 1. Closed-form algebra: V assembled from U against the nine-case inverse.

def test_closed_form_inverse_against_design_construction():
    t0 = time.time()
    for n in (3, 5, 8, 12):
        U = dense_U(n)
        V = U.T @ U
        ii, jj = np.meshgrid(np.arange(1, 2 * n), np.arange(1, 2 * n),
                             indexing="ij")
        Vinv = vinv_entry(ii, jj, n)
        err = np.max(np.abs(V @ Vinv - np.eye(2 * n - 1)))
        assert err < 1e-10, f"n={n}: max deviation {err}"
    assert time.time() - t0 < 1.0


def test_closed_form_inverse_hand_values_n3():
    assert float(vinv_entry(1, 1, 3)) == 5 / 6
    assert float(vinv_entry(1, 2, 3)) == 1 / 6
    assert float(vinv_entry(3, 3, 3)) == 3 / 2
    assert float(vinv_entry(1, 4, 3)) == -1 / 3
    assert float(vinv_entry(4, 4, 3)) == 4 / 3


# ---------------------------------------------------------------------------
# 2. Projection identity: the annihilator kills the degree design.

def test_projection_annihilates_degree_design():
    t0 = time.time()
    n = 8
    idx = PairIndexing(n)
    rng = np.random.default_rng(42)
    for _ in range(100):
        Z = rng.standard_normal((idx.row_count, 3))
        theta = rng.standard_normal(2 * n - 1)
        g = GramSummary.build(Z, idx)
        assert np.max(np.abs(ztd_vec(Z, apply_U(theta, idx), g))) < 1e-10
    assert time.time() - t0 < 1.0


def test_slope_estimate_invariant_to_degree_shifts():
    n = 8
    idx = PairIndexing(n)
    rng = np.random.default_rng(7)
    Z = rng.standard_normal((idx.row_count, 2))
    y = rng.standard_normal(idx.row_count)
    g = GramSummary.build(Z, idx)
    eta = scipy.linalg.solve(g.ztdz_mat, ztd_vec(Z, y, g), assume_a="pos")
    shift = apply_U(rng.standard_normal(2 * n - 1), idx)
    eta2 = scipy.linalg.solve(g.ztdz_mat, ztd_vec(Z, y + shift, g),
                              assume_a="pos")
    np.testing.assert_allclose(eta, eta2, atol=1e-10)


# ---------------------------------------------------------------------------
# 3. Two-step closed form equals a dense joint least-squares solve.

def test_two_step_matches_dense_least_squares():
    rng = np.random.default_rng(2024)
    for _ in range(20):
        n = int(rng.integers(4, 9))
        idx = PairIndexing(n)
        N = idx.row_count
        p = int(rng.integers(1, 4))
        Z = rng.standard_normal((N, p))
        y = rng.standard_normal(N)
        g = GramSummary.build(Z, idx)
        eta = scipy.linalg.solve(g.ztdz_mat, ztd_vec(Z, y, g), assume_a="pos")
        theta = apply_Vinv(apply_Ut(y - Z @ eta, idx), n)
        X = np.hstack([dense_U(n), Z])
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        np.testing.assert_allclose(theta, coef[: 2 * n - 1], atol=1e-8)
        np.testing.assert_allclose(eta, coef[2 * n - 1:], atol=1e-8)


# ---------------------------------------------------------------------------
# 4. Mean identity of the tie transform under the true density.

def test_transform_mean_identity_with_true_density():
    t0 = time.time()
    n = 50
    alpha0, beta0 = param_schedule("consistency", n)
    eta0 = np.array([-0.5, 0.5])
    i, j = 1, 2
    target_z = np.array([0.3, -0.2])
    rng = np.random.default_rng(29)
    B = 100_000
    x1 = target_z @ COVARIATE_B + rng.standard_normal(B)
    eps = rng.standard_normal(B)
    index = alpha0[i - 1] + beta0[j - 1] + x1 + target_z @ eta0
    a = (index - eps > 0.0).astype(np.float64)
    f_true = scipy.stats.norm.pdf(x1 - target_z @ COVARIATE_B)
    y = (a - (x1 > 0.0)) / f_true
    target = alpha0[i - 1] + beta0[j - 1] + target_z @ eta0
    se = y.std(ddof=1) / np.sqrt(B)
    assert abs(y.mean() - target) < 3.0 * se
    assert time.time() - t0 < 30.0


# ---------------------------------------------------------------------------
# 5. Study-scale bias/SD/coverage of the slope and degree estimates.

def test_estimation_study_bias_sd_coverage():
    t0 = time.time()
    rep = run_mc(DgpSpec(n=50), "estimation", reps=500, seed=0)
    assert rep.failures == 0
    eta1 = rep.targets["eta_1"]
    assert abs(eta1["bias"]) <= 0.02
    assert 0.028 <= eta1["sd"] <= 0.048
    assert 91.0 <= eta1["cp"] <= 97.0
    assert 91.0 <= rep.targets["alpha_25"]["cp"] <= 98.0
    assert time.time() - t0 < 1800.0


# ---------------------------------------------------------------------------
# 6. Sparse-signal test: size at the null, power at a dense alternative.

def test_sparse_signal_test_size():
    rep = run_mc(DgpSpec(n=100, schedule="sparse", knob=0.0, noise="normal25"),
                 "sparse-test", reps=500, seed=0, B=2000)
    assert rep.failures == 0
    rate = rep.tests["sparse-alpha"]["reject_rate"]
    assert 0.02 <= rate <= 0.09


def test_sparse_signal_test_power():
    rep = run_mc(DgpSpec(n=100, schedule="sparse", knob=1.0, noise="normal25"),
                 "sparse-test", reps=500, seed=0, B=2000)
    assert rep.failures == 0
    assert rep.tests["sparse-alpha"]["reject_rate"] >= 0.9


# ---------------------------------------------------------------------------
# 7. Support recovery: similarity, error counts, threshold ordering.

def test_support_recovery_accuracy_and_threshold_ordering():
    spec = DgpSpec(n=100, schedule="support", noise="normal25")
    rep2 = run_mc(spec, "support", reps=300, seed=0, t=2.0)
    assert rep2.failures == 0
    for block in ("alpha", "beta"):
        assert rep2.support[block]["m_mean"] >= 0.94
        assert rep2.support[block]["fp_mean"] <= 0.6
        assert rep2.support[block]["fn_mean"] <= 0.6
    rep1 = run_mc(spec, "support", reps=300, seed=0, t=1.0)
    assert (rep1.support["alpha"]["exact_rate"]
            < rep2.support["alpha"]["exact_rate"])


# ---------------------------------------------------------------------------
# 8. Degree-heterogeneity test: size, and the relabeling power gain.

def test_heterogeneity_test_size():
    rep = run_mc(DgpSpec(n=100, schedule="heterogeneity", knob=0.0,
                         noise="normal25"),
                 "heterogeneity-test", reps=300, seed=0, B=2000, m_tilde=0)
    assert rep.failures == 0
    rate = rep.tests["heterogeneity-alpha-m0"]["reject_rate"]
    assert 0.02 <= rate <= 0.09


def test_heterogeneity_test_relabeling_power_gain():
    spec = DgpSpec(n=100, schedule="heterogeneity", knob=0.6, noise="normal25")
    p0 = run_mc(spec, "heterogeneity-test", reps=300, seed=0, B=2000,
                m_tilde=0)
    p2 = run_mc(spec, "heterogeneity-test", reps=300, seed=0, B=2000,
                m_tilde=2)
    assert (p2.tests["heterogeneity-alpha-m2"]["reject_rate"]
            > p0.tests["heterogeneity-alpha-m0"]["reject_rate"])


# ---------------------------------------------------------------------------
# 9. Sampler law: empirical covariance of the degree-effect draws.

def _collect_effect_draws(model, B, seed, hetero=False):
    out = []
    draw_effect_stats(model, B, seed,
                      lambda g: out.append(g.copy()) or np.zeros(g.shape[1]),
                      hetero=hetero)
    return np.concatenate(out, axis=1)


def test_effect_sampler_covariance_matches_closed_form():
    n = 5
    net, _ = generate_network(DgpSpec(n=n), 3)
    model = fit(net, FitOptions(sign=1, bandwidth=0.9))
    B = 200_000
    g = _collect_effect_draws(model, B, 11)
    ii, jj = np.meshgrid(np.arange(1, 2 * n), np.arange(1, 2 * n),
                         indexing="ij")
    target = (n - 1) * model.sigma_eps2 * vinv_entry(ii, jj, n)
    emp = g @ g.T / B
    # Gaussian fourth-moment standard error of each covariance entry.
    se = np.sqrt(np.outer(np.diag(target), np.diag(target))
                 + target ** 2) / np.sqrt(B)
    assert np.all(np.abs(emp - target) < 4.0 * se)


def test_hetero_sampler_collapses_to_homoskedastic_bitwise():
    net, _ = generate_network(DgpSpec(n=5), 3)
    homo = fit(net, FitOptions(sign=1, bandwidth=0.9))
    het = fit(net, FitOptions(sign=1, bandwidth=0.9))
    het.resid[:] = np.sqrt(het.sigma_eps2)
    a = _collect_effect_draws(homo, 500, 17, hetero=False)
    b = _collect_effect_draws(het, 500, 17, hetero=True)
    np.testing.assert_array_equal(a, b)


# ---------------------------------------------------------------------------
# 10. Weighted extension: cutpoint recovery and the two-level reduction.

def test_weighted_study_cutpoint_bias_and_coverage():
    rep = run_mc(DgpSpec(n=50, schedule="weighted"), "weighted",
                 reps=300, seed=0)
    assert rep.failures == 0
    omega1 = rep.targets["omega_1"]
    assert abs(omega1["bias"]) <= 0.08
    assert 91.0 <= omega1["cp"] <= 98.0


def test_weighted_two_level_reduction_matches_binary_fit():
    net, _ = generate_network(DgpSpec(n=20), 21)
    opts = FitOptions(sign=1, bandwidth=0.9)
    fb = fit(net, opts)
    fw = fit_weighted(net, [0.0, 1.0], FitOptions(sign=1, bandwidth=0.9))
    np.testing.assert_allclose(fw.alpha, fb.alpha - fb.alpha[-1], atol=1e-8)
    np.testing.assert_allclose(fw.beta, fb.beta, atol=1e-8)
    assert fw.omega[0] == pytest.approx(-fb.alpha[-1], abs=1e-8)
    np.testing.assert_allclose(fw.eta, fb.eta, atol=1e-8)
