"""Two-step projection estimator for the dyadic link-formation model.

The latent index for pair (i, j) is alpha_i + beta_j + s*x1 + z'eta with
the x1 coefficient normalized to s in {-1, +1} and beta_n = 0.  The tie
indicator is transformed through the estimated conditional density of
x1 so that its conditional mean is linear in the index; eta is then the
projection least-squares coefficient after partialling out the two-way
effects, and the effects themselves follow in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.stats

from .design import GramSummary, apply_Ut, apply_U, apply_Vinv, ztd_vec
from .errors import AmbiguousSpecialRegressor, SingularDesign
from .kernels import BIWEIGHT
from .network import DirectedNetwork
from .smoothing import SmoothingPlan, select_bandwidth


def determine_sign(a, x1, bins: int = 7, min_tau: float = 0.5):
    """Estimate the sign of the x1 coefficient from the tie-count trend.

    Splits the x1 support into equal-width bins, counts ties per bin, and
    takes the sign of the Kendall correlation between bin index and count.
    A weak trend (|tau| below ``min_tau``) is flagged as ambiguous.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    x1 = np.asarray(x1, dtype=np.float64).ravel()
    edges = np.linspace(x1.min(), x1.max(), bins + 1)
    which = np.clip(np.searchsorted(edges, x1, side="right") - 1, 0, bins - 1)
    counts = np.bincount(which, weights=a, minlength=bins)
    tau = scipy.stats.kendalltau(np.arange(bins), counts).statistic
    if not np.isfinite(tau) or abs(tau) < min_tau:
        raise AmbiguousSpecialRegressor(
            f"tie counts show no monotone trend across x1 bins (tau={tau:.3f})")
    return (1 if tau > 0 else -1), float(tau)


@dataclass
class FitOptions:
    bandwidth: float | None = None      # None -> data-driven selection
    kernel: str = BIWEIGHT
    m_floor: float = 1e-3
    sign: int | None = None             # None -> determine from the data
    discrete_z: tuple = ()              # z columns treated as exact-match cells
    auto_discrete: bool = True          # detect integer-valued z columns
    sign_bins: int = 7
    sign_min_tau: float = 0.5


def _split_z_columns(z: np.ndarray, opts: FitOptions):
    p = z.shape[1]
    disc = set(int(k) for k in opts.discrete_z)
    if opts.auto_discrete and not disc:
        for k in range(p):
            vals = np.unique(z[:, k])
            if vals.size <= 10 and np.all(vals == np.round(vals)):
                disc.add(k)
    cont = [k for k in range(p) if k not in disc]
    return cont, sorted(disc)


@dataclass
class ModelFit:
    net: DirectedNetwork
    options: FitOptions
    sign: int
    bandwidth: float
    eta: np.ndarray                       # (p,)
    theta: np.ndarray                     # (2n-1,) free parameters
    fhat: np.ndarray = field(repr=False)  # (N,) density at the data points
    yhat: np.ndarray = field(repr=False)  # (N,) transformed tie variable
    resid: np.ndarray = field(repr=False)
    sigma_eps2: float = 0.0
    gram: GramSummary = field(default=None, repr=False)
    plan: SmoothingPlan = field(default=None, repr=False)
    _qhat: np.ndarray = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.net.n

    @property
    def alpha(self) -> np.ndarray:
        return self.theta[: self.n]

    @property
    def beta(self) -> np.ndarray:
        """Receiver effects including the normalized beta_n = 0."""
        return np.append(self.theta[self.n:], 0.0)

    def qhat(self) -> np.ndarray:
        """Y minus its kernel regression on (x1, z); drives eta inference."""
        if self._qhat is None:
            m = self.plan.conditional_mean(self.yhat, self.bandwidth)
            self._qhat = self.yhat - m
        return self._qhat

    def sigma_q2(self) -> float:
        q = self.qhat()
        return float(np.mean(q * q))

    def fitted_index(self) -> np.ndarray:
        idx = self.net.idx
        out = apply_U(self.theta, idx) + self.sign * self.net.x1
        if self.eta.size:
            out += self.net.z @ self.eta
        return out

    def fitted_ties(self) -> np.ndarray:
        return (self.fitted_index() > 0.0).astype(np.float64)


def transform_y(a, x1, sign: int, fhat) -> np.ndarray:
    """(A - 1{s*x1 > 0}) / fhat, the special-regressor transform."""
    a = np.asarray(a, dtype=np.float64).ravel()
    x1 = np.asarray(x1, dtype=np.float64).ravel()
    return (a - (sign * x1 > 0.0).astype(np.float64)) / np.asarray(fhat)


def fit(net: DirectedNetwork, options: FitOptions | None = None,
        plan: SmoothingPlan | None = None) -> ModelFit:
    """Estimate (alpha, beta, eta) for a binary directed network."""
    opts = options or FitOptions()
    idx = net.idx

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
    y = transform_y(net.a, net.x1, sign, fhat)

    gram = GramSummary.build(net.z, idx)
    p = net.z.shape[1]
    if p:
        rhs = ztd_vec(net.z, y, gram)
        try:
            eta = scipy.linalg.solve(gram.ztdz_mat, rhs, assume_a="pos")
        except (scipy.linalg.LinAlgError, ValueError) as exc:
            raise SingularDesign(
                "Z'DZ is singular; the covariates are collinear with the "
                "two-way effects") from exc
        resid_y = y - net.z @ eta
    else:
        eta = np.empty(0)
        resid_y = y
    theta = apply_Vinv(apply_Ut(resid_y, idx), idx.n)
    eps = resid_y - apply_U(theta, idx)

    return ModelFit(net=net, options=opts, sign=sign, bandwidth=h, eta=eta,
                    theta=theta, fhat=fhat, yhat=y, resid=eps,
                    sigma_eps2=float(np.mean(eps * eps)), gram=gram, plan=plan)
