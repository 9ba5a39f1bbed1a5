"""Ordered-threshold extension for networks with R-level tie strengths.

Ties take values in a declared ascending level set pi_0 < ... < pi_{R-1}
generated by cutpoints omega_1 < ... < omega_{R-1} on the same latent
index as the binary model, with both alpha_n and beta_n pinned to zero.
Each threshold l yields a transformed response

    Y_l = [1{A >= pi_l} - 1{s*x1 > 0}] / fhat

whose conditional mean is -omega_l + alpha_i + beta_j + z'eta.  The
stacked least-squares problem over the R-1 levels never materializes
the (R-1)N x K design: every cross product reduces to O(N)-size pieces
because the effect block repeats identically across levels and the
intercept block is block-constant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.stats

from .design import PairIndexing, apply_U, apply_Ut
from .errors import (
    DimensionMismatch,
    LevelCollapse,
    SingularDesign,
    UnknownLevelValue,
)
from .estimator import FitOptions, _split_z_columns, determine_sign, transform_y
from .network import DirectedNetwork
from .smoothing import SmoothingPlan, select_bandwidth


def _drop_alpha_n(t: np.ndarray) -> np.ndarray:
    """Delete the alpha_n coordinate from a (2n-1, ...) stack."""
    n = (t.shape[0] + 1) // 2
    return np.delete(t, n - 1, axis=0)


def ubar_apply(theta_bar: np.ndarray, idx: PairIndexing) -> np.ndarray:
    """U-bar theta: both alpha_n and beta_n are implicit zeros."""
    n = idx.n
    full = np.insert(np.asarray(theta_bar, dtype=np.float64), n - 1, 0.0, axis=0)
    return apply_U(full, idx)


def ubar_t(v: np.ndarray, idx: PairIndexing) -> np.ndarray:
    """U-bar' v, a (2n-2, ...) stack."""
    return _drop_alpha_n(apply_Ut(v, idx))


def vbar(n: int) -> np.ndarray:
    """Gram matrix of U-bar: [[(n-1)I, J-I], [J-I, (n-1)I]]."""
    m = n - 1
    eye = np.eye(m)
    off = np.ones((m, m)) - eye
    top = np.hstack([(n - 1) * eye, off])
    bot = np.hstack([off, (n - 1) * eye])
    return np.vstack([top, bot])


def map_levels(a: np.ndarray, levels: np.ndarray, atol: float = 1e-9) -> np.ndarray:
    """Map tie values to 0-based level indices; every value must match."""
    a = np.asarray(a, dtype=np.float64).ravel()
    levels = np.asarray(levels, dtype=np.float64)
    if levels.ndim != 1 or levels.size < 2 or np.any(np.diff(levels) <= 0):
        raise ValueError("levels must be a strictly increasing vector, R >= 2")
    pos = np.searchsorted(levels, a)
    pos = np.clip(pos, 0, levels.size - 1)
    lo = np.clip(pos - 1, 0, levels.size - 1)
    use_lo = np.abs(a - levels[lo]) < np.abs(a - levels[pos])
    pos = np.where(use_lo, lo, pos)
    bad = np.abs(a - levels[pos]) > atol
    if np.any(bad):
        raise UnknownLevelValue(
            f"{int(bad.sum())} tie values match none of the declared levels "
            f"(first offender: {a[np.argmax(bad)]})")
    counts = np.bincount(pos, minlength=levels.size)
    if np.any(counts == 0):
        empty = np.flatnonzero(counts == 0)
        raise LevelCollapse(f"declared levels with no observations: "
                            f"{levels[empty].tolist()}")
    return pos


@dataclass
class WeightedModelFit:
    net: DirectedNetwork
    options: FitOptions
    levels: np.ndarray
    sign: int
    bandwidth: float
    alpha: np.ndarray                     # (n,), alpha[n-1] == 0
    beta: np.ndarray                      # (n,), beta[n-1] == 0
    omega: np.ndarray                     # (R-1,)
    eta: np.ndarray                       # (p,)
    sigma_weps2: float
    sigma_wq2: np.ndarray                 # (R-1,)
    fhat: np.ndarray = field(repr=False)
    ymat: np.ndarray = field(repr=False)  # (N, R-1) per-level transforms
    vbar_inv: np.ndarray = field(repr=False)
    xi_cov: np.ndarray = field(repr=False)  # cov of (omega, eta) estimates

    @property
    def n(self) -> int:
        return self.net.n

    @property
    def R(self) -> int:
        return self.levels.size

    @property
    def theta_bar(self) -> np.ndarray:
        return np.concatenate([self.alpha[:-1], self.beta[:-1]])

    def fitted_index(self) -> np.ndarray:
        idx = self.net.idx
        out = ubar_apply(self.theta_bar, idx) + self.sign * self.net.x1
        if self.eta.size:
            out += self.net.z @ self.eta
        return out

    def fitted_ties(self) -> np.ndarray:
        """Predicted level value from the fitted index and cutpoints."""
        index = self.fitted_index()
        l = np.searchsorted(self.omega, index, side="left")
        return self.levels[l]


def transform_y_weighted(a, x1, fhat, sign: int, level_value: float) -> np.ndarray:
    """Threshold transform for a single level cutoff pi_l."""
    a = np.asarray(a, dtype=np.float64).ravel()
    return transform_y((a >= level_value).astype(np.float64), x1, sign, fhat)


def fit_weighted(net: DirectedNetwork, levels, options: FitOptions | None = None,
                 plan: SmoothingPlan | None = None) -> WeightedModelFit:
    """Stacked projection least squares for the R-level threshold model."""
    opts = options or FitOptions()
    idx = net.idx
    n = idx.n
    N = idx.row_count
    levels = np.asarray(levels, dtype=np.float64)
    map_levels(net.a, levels)  # validates values and level occupancy
    R = levels.size

    if opts.sign in (1, -1):
        sign = int(opts.sign)
    else:
        sign, _ = determine_sign(net.a, net.x1, bins=opts.sign_bins,
                                 min_tau=opts.sign_min_tau)

    if plan is None:
        cont, disc = _split_z_columns(net.z, opts)
        plan = SmoothingPlan.build(
            net.x1,
            zc=net.z[:, cont] if cont else None,
            zd=net.z[:, disc] if disc else None,
            kernel=opts.kernel)
    if opts.bandwidth is not None:
        h = float(opts.bandwidth)
    else:
        h, _, _ = select_bandwidth(plan, net.x1, floor=opts.m_floor)
    fhat = plan.density(h, floor=opts.m_floor)

    ymat = np.column_stack([
        transform_y_weighted(net.a, net.x1, fhat, sign, levels[l])
        for l in range(1, R)])
    L = R - 1
    Z = net.z
    p = Z.shape[1]

    # Cross products of the stacked system.  The regressor matrix is
    # [U-tilde | W | Z-rep] with U-tilde = 1_L (x) U-bar, W the level
    # intercept indicators, and Z-rep = 1_L (x) Z; the intercept
    # coefficient c_l equals -omega_l.
    vb = vbar(n)
    vb_inv = scipy.linalg.inv(vb)
    ut_ones = float(n - 1) * np.ones(2 * n - 2)           # U-bar' 1_N
    utz = ubar_t(Z, idx) if p else np.empty((2 * n - 2, 0))
    # G = U-tilde' [W | Z-rep], shape (2n-2, L+p)
    G = np.hstack([np.tile(ut_ones[:, None], (1, L)), L * utz])
    sz = Z.sum(axis=0) if p else np.empty(0)
    zxz = np.block([
        [N * np.eye(L), np.tile(sz, (L, 1))],
        [np.tile(sz[:, None], (1, L)), L * (Z.T @ Z)],
    ]) if p else N * np.eye(L)
    H = vb_inv @ G / L                                    # (U~'U~)^{-1} G
    C = zxz - G.T @ H                                     # Z~' D Z~
    ysum = ymat.sum(axis=0)                               # 1' Y_l per level
    uty_tot = ubar_t(ymat.sum(axis=1), idx)
    zty = np.concatenate([ysum, Z.T @ ymat.sum(axis=1)]) if p \
        else ysum
    rhs = zty - G.T @ (vb_inv @ uty_tot) / L
    try:
        xi = scipy.linalg.solve(C, rhs, assume_a="pos")
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise SingularDesign("stacked projection design is singular") from exc
    omega = -xi[:L]
    eta = xi[L:]

    # Effects from the level-averaged residual response.
    rbar = ymat.mean(axis=1) + omega.mean()
    if p:
        rbar = rbar - Z @ eta
    theta_bar = vb_inv @ ubar_t(rbar, idx)
    eps_bar = rbar - ubar_apply(theta_bar, idx)
    sigma_weps2 = float(np.mean(eps_bar * eps_bar))

    sigma_wq2 = np.empty(L)
    for l in range(L):
        q = ymat[:, l] - plan.conditional_mean(ymat[:, l], h)
        sigma_wq2[l] = float(np.mean(q * q))

    # Covariance of (omega, eta).  The level responses are built from the
    # same tie variable and density, so their noise is almost perfectly
    # correlated across levels and the cutpoint estimates behave like a
    # common intercept of the level-averaged system: regress the averaged
    # response on [1 | Z] after projecting out the degree design, with the
    # averaged-residual variance.  (A per-level sandwich that ignores the
    # cross-level correlation understates these variances severalfold.)
    xmat = np.hstack([np.ones((N, 1)), Z]) if p else np.ones((N, 1))
    utx = ubar_t(xmat, idx)
    cbar = xmat.T @ xmat - utx.T @ (vb_inv @ utx)
    cov_avg = sigma_weps2 * scipy.linalg.inv(cbar)        # cov of (c~, eta)
    xi_cov = np.empty((L + p, L + p))
    xi_cov[:L, :L] = cov_avg[0, 0]
    xi_cov[:L, L:] = -cov_avg[0, 1:]
    xi_cov[L:, :L] = -cov_avg[1:, 0][:, None]
    xi_cov[L:, L:] = cov_avg[1:, 1:]

    alpha = np.append(theta_bar[: n - 1], 0.0)
    beta = np.append(theta_bar[n - 1:], 0.0)
    return WeightedModelFit(net=net, options=opts, levels=levels, sign=sign,
                            bandwidth=h, alpha=alpha, beta=beta, omega=omega,
                            eta=eta, sigma_weps2=sigma_weps2, sigma_wq2=sigma_wq2,
                            fhat=fhat, ymat=ymat, vbar_inv=vb_inv, xi_cov=xi_cov)


def ubar_apply_mat(theta_bar: np.ndarray, idx: PairIndexing) -> np.ndarray:
    theta_bar = np.asarray(theta_bar, dtype=np.float64)
    if theta_bar.ndim == 1:
        return ubar_apply(theta_bar, idx)
    return np.column_stack([ubar_apply(theta_bar[:, k], idx)
                            for k in range(theta_bar.shape[1])])


def draw_weighted_effects(fit: WeightedModelFit, B: int, seed: int) -> np.ndarray:
    """(2n-2, B) draws of sqrt(n-1) V-bar^{-1} U-bar' xi, xi homoskedastic."""
    n = fit.n
    N = fit.net.idx.row_count
    scale = np.sqrt((n - 1) * fit.sigma_weps2)
    chunk = 128
    cols = []
    done = 0
    ci = 0
    while done < B:
        rng = np.random.default_rng([seed, ci])
        xi = rng.standard_normal((N, chunk))[:, : min(chunk, B - done)] * scale
        cols.append(fit.vbar_inv @ ubar_t(xi, fit.net.idx))
        done += cols[-1].shape[1]
        ci += 1
    return np.concatenate(cols, axis=1)


def ci_weighted(fit: WeightedModelFit, level: float = 0.05) -> dict:
    """Normal confidence intervals for alpha, beta, omega, and eta."""
    z = scipy.stats.norm.ppf(1.0 - level / 2.0)
    n = fit.n
    eff_sd = np.sqrt(fit.sigma_weps2 * np.diag(fit.vbar_inv))
    a_sd = np.append(eff_sd[: n - 1], 0.0)
    b_sd = np.append(eff_sd[n - 1:], 0.0)
    xi_sd = np.sqrt(np.diag(fit.xi_cov))
    L = fit.omega.size
    return {
        "alpha": (fit.alpha - z * a_sd, fit.alpha + z * a_sd),
        "beta": (fit.beta - z * b_sd, fit.beta + z * b_sd),
        "omega": (fit.omega - z * xi_sd[:L], fit.omega + z * xi_sd[:L]),
        "eta": (fit.eta - z * xi_sd[L:], fit.eta + z * xi_sd[L:]),
    }
