"""Ordered-threshold model: stacked LS identities and the R=2 reduction."""

import numpy as np
import pytest

from dyadlink.design import PairIndexing
from dyadlink.errors import LevelCollapse, UnknownLevelValue
from dyadlink.estimator import FitOptions, fit
from dyadlink.simulate import DgpSpec, generate_network
from dyadlink.weighted import (
    ci_weighted,
    draw_weighted_effects,
    fit_weighted,
    map_levels,
    transform_y_weighted,
    ubar_apply,
    ubar_t,
    vbar,
)


def dense_ubar(n):
    idx = PairIndexing(n)
    U = np.zeros((idx.row_count, 2 * n - 2))
    for r in range(idx.row_count):
        i, j = idx.pair_of(r)
        if i < n:
            U[r, i - 1] = 1.0
        if j < n:
            U[r, n - 1 + j - 1] = 1.0
    return U


def dense_stacked_design(n, Z, L):
    """Oracle: the full (L*N) x (2n-2 + L + p) design, intercepts as -1."""
    Ub = dense_ubar(n)
    N = Ub.shape[0]
    blocks = []
    for l in range(L):
        W = np.zeros((N, L))
        W[:, l] = -1.0
        blocks.append(np.hstack([Ub, W, Z]))
    return np.vstack(blocks)


@pytest.mark.parametrize("n", [4, 7, 10])
def test_vbar_matches_dense(n):
    Ub = dense_ubar(n)
    np.testing.assert_allclose(vbar(n), Ub.T @ Ub, atol=1e-12)


def test_ubar_operators_match_dense():
    n = 6
    idx = PairIndexing(n)
    Ub = dense_ubar(n)
    rng = np.random.default_rng(0)
    t = rng.standard_normal(2 * n - 2)
    np.testing.assert_allclose(ubar_apply(t, idx), Ub @ t, atol=1e-12)
    v = rng.standard_normal(idx.row_count)
    np.testing.assert_allclose(ubar_t(v, idx), Ub.T @ v, atol=1e-12)


def test_map_levels_and_errors():
    levels = np.array([0.0, 1.0, 2.0])
    np.testing.assert_array_equal(map_levels([0, 2, 1, 1], levels),
                                  [0, 2, 1, 1])
    with pytest.raises(UnknownLevelValue):
        map_levels([0.0, 1.5], levels)
    with pytest.raises(LevelCollapse):
        map_levels([0.0, 0.0, 2.0], levels)


def test_transform_reduces_to_binary_at_r2():
    rng = np.random.default_rng(1)
    a = rng.integers(0, 2, 50).astype(float)
    x1 = rng.standard_normal(50)
    f = np.full(50, 0.7)
    from dyadlink.estimator import transform_y
    np.testing.assert_array_equal(
        transform_y_weighted(a, x1, f, 1, 1.0), transform_y(a, x1, 1, f))


def test_transform_all_lowest_level():
    x1 = np.array([1.0, -1.0])
    f = np.array([0.5, 0.5])
    y = transform_y_weighted(np.zeros(2), x1, f, 1, 1.0)
    np.testing.assert_allclose(y, [-2.0, 0.0])


def test_fit_satisfies_stacked_normal_equations():
    spec = DgpSpec(n=15, schedule="weighted")
    net, _ = generate_network(spec, 4)
    wf = fit_weighted(net, spec.levels, FitOptions(sign=1))
    L = wf.R - 1
    X = dense_stacked_design(net.n, net.z, L)
    y = wf.ymat.T.reshape(-1)  # level-major stacking
    coef = np.concatenate([wf.alpha[:-1], wf.beta[:-1], wf.omega, wf.eta])
    resid = y - X @ coef
    # gradient of the LS objective vanishes at the reported estimates
    grad = X.T @ resid
    assert np.max(np.abs(grad)) / y.size < 1e-8


def test_noiseless_recovers_increasing_cutpoints():
    # Oracle data: with the true density and tiny noise the cutpoint
    # estimates come back strictly increasing and near truth.
    spec = DgpSpec(n=30, schedule="weighted")
    net, truth = generate_network(spec, 11)
    wf = fit_weighted(net, spec.levels, FitOptions(sign=1))
    assert np.all(np.diff(wf.omega) > 0)
    assert np.abs(wf.omega - truth["omega"]).max() < 0.6


def test_r2_reduction_matches_binary_pipeline():
    # On binary data the R=2 weighted fit equals the binary fit after
    # renormalizing: alpha_w = alpha_b - alpha_b[n], beta_w = beta_b,
    # omega_1 = -alpha_b[n].
    spec = DgpSpec(n=20)
    net, _ = generate_network(spec, 21)
    opts = FitOptions(sign=1, bandwidth=0.9)
    fb = fit(net, opts)
    fw = fit_weighted(net, [0.0, 1.0], FitOptions(sign=1, bandwidth=0.9))
    np.testing.assert_allclose(fw.alpha, fb.alpha - fb.alpha[-1], atol=1e-8)
    np.testing.assert_allclose(fw.beta, fb.beta, atol=1e-8)
    assert fw.omega[0] == pytest.approx(-fb.alpha[-1], abs=1e-8)
    np.testing.assert_allclose(fw.eta, fb.eta, atol=1e-8)


def test_weighted_effect_sampler_covariance():
    spec = DgpSpec(n=8, schedule="weighted")
    net, _ = generate_network(spec, 31)
    wf = fit_weighted(net, spec.levels, FitOptions(sign=1))
    B = 30000
    g = draw_weighted_effects(wf, B, 13)
    n = wf.n
    target = (n - 1) * wf.sigma_weps2 * np.linalg.inv(vbar(n))
    emp = g @ g.T / B
    se = np.sqrt(np.outer(np.diag(target), np.diag(target))
                 + target ** 2) / np.sqrt(B)
    assert np.all(np.abs(emp - target) < 5 * se)


def test_ci_weighted_shapes_and_centering():
    spec = DgpSpec(n=12, schedule="weighted")
    net, _ = generate_network(spec, 41)
    wf = fit_weighted(net, spec.levels, FitOptions(sign=1))
    cis = ci_weighted(wf, 0.05)
    for key, est in (("alpha", wf.alpha), ("beta", wf.beta),
                     ("omega", wf.omega), ("eta", wf.eta)):
        lo, hi = cis[key]
        assert lo.shape == est.shape
        assert np.all(lo <= est) and np.all(est <= hi)
    # the pinned coordinates have zero-width intervals
    assert cis["alpha"][0][-1] == cis["alpha"][1][-1] == 0.0


def test_sigma_weps2_definition():
    # sigma_weps2 is the mean square of the level-averaged residual
    # (Y-bar + omega-bar - alpha_i - beta_j - z'eta).
    spec = DgpSpec(n=10, schedule="weighted")
    net, _ = generate_network(spec, 51)
    wf = fit_weighted(net, spec.levels, FitOptions(sign=1))
    rbar = wf.ymat.mean(axis=1) + wf.omega.mean() - net.z @ wf.eta
    eps = rbar - ubar_apply(wf.theta_bar, net.idx)
    assert wf.sigma_weps2 == pytest.approx(float(np.mean(eps * eps)),
                                           abs=1e-12)
    assert wf.sigma_wq2.shape == (wf.R - 1,)
    assert np.all(wf.sigma_wq2 > 0)
