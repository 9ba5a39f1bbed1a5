"""Two-step estimator against dense least-squares oracles."""

import numpy as np
import pytest

from dyadlink.design import PairIndexing, dense_U
from dyadlink.errors import AmbiguousSpecialRegressor
from dyadlink.estimator import FitOptions, determine_sign, fit, transform_y
from dyadlink.network import DirectedNetwork
from dyadlink.simulate import DgpSpec, generate_network


def dense_joint_ls(y, Z, n):
    """Oracle: one-shot least squares of y on [U | Z] with beta_n dropped."""
    X = np.hstack([dense_U(n), Z])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return coef[: 2 * n - 1], coef[2 * n - 1:]


@pytest.mark.parametrize("trial", range(20))
def test_two_step_matches_dense_ls(trial):
    rng = np.random.default_rng(1000 + trial)
    n = int(rng.integers(4, 9))
    idx = PairIndexing(n)
    N = idx.row_count
    p = int(rng.integers(1, 4))
    Z = rng.standard_normal((N, p))
    y = rng.standard_normal(N)
    # Same closed-form path the estimator uses, on an arbitrary response.
    from dyadlink.design import GramSummary, apply_Ut, apply_Vinv, ztd_vec
    import scipy.linalg
    g = GramSummary.build(Z, idx)
    eta = scipy.linalg.solve(g.ztdz_mat, ztd_vec(Z, y, g), assume_a="pos")
    theta = apply_Vinv(apply_Ut(y - Z @ eta, idx), n)
    theta0, eta0 = dense_joint_ls(y, Z, n)
    np.testing.assert_allclose(eta, eta0, atol=1e-8)
    np.testing.assert_allclose(theta, theta0, atol=1e-8)


def test_eta_invariant_to_design_column_shifts():
    rng = np.random.default_rng(5)
    n = 8
    idx = PairIndexing(n)
    Z = rng.standard_normal((idx.row_count, 2))
    y = rng.standard_normal(idx.row_count)
    from dyadlink.design import GramSummary, apply_U, ztd_vec
    import scipy.linalg
    g = GramSummary.build(Z, idx)
    eta_base = scipy.linalg.solve(g.ztdz_mat, ztd_vec(Z, y, g), assume_a="pos")
    for _ in range(5):
        shift = apply_U(rng.standard_normal(2 * n - 1), idx)
        eta = scipy.linalg.solve(g.ztdz_mat, ztd_vec(Z, y + shift, g),
                                 assume_a="pos")
        np.testing.assert_allclose(eta, eta_base, atol=1e-10)


def test_transform_y_values():
    a = np.array([1.0, 0.0, 1.0])
    x1 = np.array([0.5, -0.5, -1.0])
    f = np.array([0.5, 0.25, 1.0])
    # sign +1: indicator 1{x1 > 0}
    np.testing.assert_allclose(transform_y(a, x1, 1, f),
                               [(1 - 1) / 0.5, (0 - 0) / 0.25, (1 - 0) / 1.0])
    # sign -1: indicator 1{-x1 > 0}
    np.testing.assert_allclose(transform_y(a, x1, -1, f),
                               [(1 - 0) / 0.5, (0 - 1) / 0.25, (1 - 1) / 1.0])


def test_determine_sign_positive_and_negative():
    rng = np.random.default_rng(21)
    net, _ = generate_network(DgpSpec(n=40), rng.integers(2 ** 31))
    s, tau = determine_sign(net.a, net.x1)
    assert s == 1 and tau > 0.5
    s_neg, tau_neg = determine_sign(net.a, -net.x1)
    assert s_neg == -1 and tau_neg < -0.5


def test_determine_sign_ambiguous():
    rng = np.random.default_rng(22)
    a = rng.integers(0, 2, 600).astype(float)
    x1 = rng.standard_normal(600)
    with pytest.raises(AmbiguousSpecialRegressor):
        determine_sign(a, x1)


def test_fit_recovers_truth_roughly():
    spec = DgpSpec(n=60)
    net, truth = generate_network(spec, 123)
    f = fit(net, FitOptions(sign=1))
    assert np.abs(f.eta - truth["eta"]).max() < 0.2
    assert np.corrcoef(f.alpha, truth["alpha"])[0, 1] > 0.5
    assert f.beta[-1] == 0.0
    assert f.sigma_eps2 > 0
    assert f.sigma_q2() > 0


def test_fitted_ties_perfect_separation():
    # With a huge positive index everywhere the fitted graph is complete.
    n = 6
    idx = PairIndexing(n)
    N = idx.row_count
    rng = np.random.default_rng(30)
    x1 = rng.standard_normal(N)
    net = DirectedNetwork(idx=idx, a=np.ones(N), x1=x1,
                          z=np.empty((N, 0)))
    f = fit(net, FitOptions(bandwidth=1.0, sign=1))
    f.theta[:] = 10.0
    assert f.fitted_ties().sum() == N


def test_fit_without_covariates():
    spec = DgpSpec(n=20)
    net, _ = generate_network(spec, 77)
    bare = DirectedNetwork(idx=net.idx, a=net.a, x1=net.x1,
                           z=np.empty((net.n_pairs, 0)))
    f = fit(bare, FitOptions(bandwidth=1.0, sign=1))
    assert f.eta.size == 0
    assert np.isfinite(f.sigma_eps2)


def test_qhat_centered():
    spec = DgpSpec(n=25)
    net, _ = generate_network(spec, 99)
    f = fit(net, FitOptions(sign=1))
    q = f.qhat()
    # NW residuals after removing E(Y | x1, z) are roughly centered
    assert abs(q.mean()) < 0.2 * q.std()
