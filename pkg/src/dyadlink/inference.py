"""Gaussian-approximation inference for the degree effects and slopes.

Sampling distributions are approximated by Gaussian draws pushed through
the same closed-form operators as the estimator: a pair-level normal
vector xi (optionally reweighted by residuals) maps to

* sqrt(n-1) V^{-1} U' xi        for the degree-effect block, and
* sqrt(N) (Z'DZ)^{-1} (DZ)' xi  for the slope block.

Critical values for the max-type tests and support thresholds come from
these draws; scalar confidence intervals use the exact normal quantile
with the closed-form variances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.stats

from .design import apply_Ut, apply_Vinv, vinv_entry
from .errors import DimensionMismatch, GroupTooSmall
from .estimator import ModelFit

_CHUNK = 128


def _pair_noise(n_obs: int, B: int, seed: int, weights: np.ndarray):
    """Yield (n_obs, <=_CHUNK) blocks of weighted normal draws.

    Each block uses an independent child generator keyed by its index, so
    the draws for b < B are a prefix of the draws for any larger B.
    """
    done = 0
    chunk_i = 0
    w = weights[:, None]
    while done < B:
        rng = np.random.default_rng([seed, chunk_i])
        block = rng.standard_normal((n_obs, _CHUNK))
        take = min(_CHUNK, B - done)
        yield block[:, :take] * w
        done += take
        chunk_i += 1


def effect_weights(fit: ModelFit, hetero: bool) -> np.ndarray:
    if hetero:
        return fit.resid.copy()
    return np.full(fit.net.n_pairs, np.sqrt(fit.sigma_eps2))


def slope_weights(fit: ModelFit, hetero: bool) -> np.ndarray:
    if hetero:
        return fit.qhat().copy()
    return np.full(fit.net.n_pairs, np.sqrt(fit.sigma_q2()))


def draw_effect_stats(fit: ModelFit, B: int, seed: int, stat_fn,
                      hetero: bool = False) -> np.ndarray:
    """Apply ``stat_fn`` to each column of sqrt(n-1) V^{-1} U' xi.

    ``stat_fn`` maps a (2n-1, b) block of draws to a length-b vector; the
    per-draw statistics for all B draws are concatenated and returned.
    """
    n = fit.n
    w = effect_weights(fit, hetero)
    scale = np.sqrt(n - 1)
    out = []
    for xi in _pair_noise(fit.net.n_pairs, B, seed, w):
        g = scale * apply_Vinv(apply_Ut(xi, fit.net.idx), n)
        out.append(np.asarray(stat_fn(g), dtype=np.float64))
    return np.concatenate(out)


def draw_slope_draws(fit: ModelFit, B: int, seed: int,
                     hetero: bool = False) -> np.ndarray:
    """(p, B) draws of sqrt(N) (Z'DZ)^{-1} (DZ)' xi."""
    p = fit.eta.size
    if p == 0:
        return np.empty((0, B))
    w = slope_weights(fit, hetero)
    scale = np.sqrt(fit.net.n_pairs)
    cols = []
    for xi in _pair_noise(fit.net.n_pairs, B, seed, w):
        rhs = fit.gram.dz.T @ xi
        cols.append(scale * scipy.linalg.solve(fit.gram.ztdz_mat, rhs,
                                               assume_a="pos"))
    return np.concatenate(cols, axis=1)


def zeta_diag(fit: ModelFit) -> np.ndarray:
    """Closed-form asymptotic variances of sqrt(n-1) theta-hat, all 2n-1
    free coordinates."""
    n = fit.n
    idx = np.arange(1, 2 * n)
    return (n - 1) * fit.sigma_eps2 * vinv_entry(idx, idx, n)


def zeta_contrast(fit: ModelFit, i, j) -> np.ndarray:
    """Variance of sqrt(n-1)(theta_i - theta_j); 1-based coordinates."""
    n = fit.n
    return (n - 1) * fit.sigma_eps2 * (
        vinv_entry(i, i, n) + vinv_entry(j, j, n) - 2.0 * vinv_entry(i, j, n))


@dataclass
class TestReport:
    name: str
    statistic: float
    critical_value: float
    p_value: float
    level: float
    reject: bool
    n_draws: int
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "test": self.name,
            "statistic": self.statistic,
            "critical_value": self.critical_value,
            "p_value": self.p_value,
            "level": self.level,
            "reject": self.reject,
            "n_draws": self.n_draws,
            **self.detail,
        }


def _block_coords(fit: ModelFit, block: str) -> np.ndarray:
    """1-based theta coordinates for a named block."""
    n = fit.n
    if block == "alpha":
        return np.arange(1, n + 1)
    if block == "beta":
        return np.arange(n + 1, 2 * n)
    if block == "both":
        return np.arange(1, 2 * n)
    raise ValueError(f"unknown block {block!r}")


def test_sparse(fit: ModelFit, block: str = "alpha", B: int = 500,
                seed: int = 0, level: float = 0.05,
                hetero: bool = False) -> TestReport:
    """Max-type test of the null that every effect in the block is zero."""
    coords = _block_coords(fit, block)
    zeta = zeta_diag(fit)[coords - 1]
    root = np.sqrt(zeta)
    vals = np.abs(fit.theta[coords - 1]) * np.sqrt(fit.n - 1) / root
    stat = float(vals.max())

    def stat_fn(g):
        return (np.abs(g[coords - 1]) / root[:, None]).max(axis=0)

    draws = draw_effect_stats(fit, B, seed, stat_fn, hetero=hetero)
    crit = float(np.quantile(draws, 1.0 - level))
    p = float((1 + np.sum(draws >= stat)) / (B + 1))
    return TestReport(name=f"sparse-{block}", statistic=stat, critical_value=crit,
                      p_value=p, level=level, reject=bool(stat > crit), n_draws=B,
                      detail={"argmax": int(coords[int(vals.argmax())])})


@dataclass
class SupportEstimate:
    threshold_t: float
    alpha_nodes: np.ndarray      # 1-based senders with nonzero effect
    beta_nodes: np.ndarray       # 1-based receivers with nonzero effect
    alpha_cut: np.ndarray
    beta_cut: np.ndarray


def recover_support(fit: ModelFit, t: float = 2.0) -> SupportEstimate:
    """Threshold the effects at sqrt(t * zeta * log(block size) / (n-1))."""
    n = fit.n
    zeta = zeta_diag(fit)
    a_cut = np.sqrt(t * zeta[:n] * np.log(n) / (n - 1))
    b_cut = np.sqrt(t * zeta[n:] * np.log(n - 1) / (n - 1))
    a_set = np.flatnonzero(np.abs(fit.theta[:n]) > a_cut) + 1
    b_set = np.flatnonzero(np.abs(fit.theta[n:]) > b_cut) + 1
    return SupportEstimate(threshold_t=t, alpha_nodes=a_set, beta_nodes=b_set,
                           alpha_cut=a_cut, beta_cut=b_cut)


def similarity(estimated, reference) -> float:
    """Cosine-type overlap |E & R| / sqrt(|E| |R|); 1.0 when both empty."""
    e = set(int(v) for v in np.asarray(estimated).ravel())
    r = set(int(v) for v in np.asarray(reference).ravel())
    if not e and not r:
        return 1.0
    if not e or not r:
        return 0.0
    return len(e & r) / np.sqrt(len(e) * len(r))


def _heterogeneity_contrasts(fit: ModelFit, block: str, m_tilde: int,
                             seed: int, full: bool):
    """1-based coordinate pairs whose differences the test maximizes over."""
    coords = _block_coords(fit, block)
    k = coords.size
    if k < 2:
        raise GroupTooSmall(f"block {block!r} has fewer than two coordinates")
    if full:
        ii, jj = np.triu_indices(k, k=1)
        return coords[ii], coords[jj]
    orderings = [np.arange(k)]
    if m_tilde > 1:
        rng = np.random.default_rng([seed, 982451653])
        orderings += [rng.permutation(k) for _ in range(m_tilde - 1)]
    ii = np.concatenate([o[:-1] for o in orderings])
    jj = np.concatenate([o[1:] for o in orderings])
    return coords[ii], coords[jj]


def test_heterogeneity(fit: ModelFit, block: str = "alpha", m_tilde: int = 1,
                       B: int = 500, seed: int = 0, level: float = 0.05,
                       hetero: bool = False, full: bool = False) -> TestReport:
    """Max-type test of the null that all effects in the block are equal.

    With ``full`` the maximum runs over all pairwise contrasts; otherwise
    over consecutive contrasts along the original ordering plus
    ``m_tilde - 1`` random relabelings (the same relabelings enter the
    critical-value draws).
    """
    ci, cj = _heterogeneity_contrasts(fit, block, m_tilde, seed, full)
    root = np.sqrt(zeta_contrast(fit, ci, cj))
    diffs = fit.theta[ci - 1] - fit.theta[cj - 1]
    stat = float((np.abs(diffs) * np.sqrt(fit.n - 1) / root).max())

    def stat_fn(g):
        return (np.abs(g[ci - 1] - g[cj - 1]) / root[:, None]).max(axis=0)

    draws = draw_effect_stats(fit, B, seed, stat_fn, hetero=hetero)
    crit = float(np.quantile(draws, 1.0 - level))
    p = float((1 + np.sum(draws >= stat)) / (B + 1))
    name = f"heterogeneity-{block}" + ("-full" if full else "")
    return TestReport(name=name, statistic=stat, critical_value=crit, p_value=p,
                      level=level, reject=bool(stat > crit), n_draws=B,
                      detail={"m_tilde": 0 if full else m_tilde,
                              "n_contrasts": int(ci.size)})


# keep pytest from collecting the test_* estimator functions as unit tests
test_sparse.__test__ = False
test_heterogeneity.__test__ = False


def ci_effects(fit: ModelFit, level: float = 0.05):
    """Per-coordinate normal confidence intervals for (alpha, beta).

    Returns (lower, upper) arrays over the 2n-1 free coordinates.
    """
    z = scipy.stats.norm.ppf(1.0 - level / 2.0)
    half = z * np.sqrt(zeta_diag(fit) / (fit.n - 1))
    return fit.theta - half, fit.theta + half


def ci_slopes(fit: ModelFit, level: float = 0.05):
    """(lower, upper) normal confidence intervals for eta."""
    p = fit.eta.size
    if p == 0:
        return np.empty(0), np.empty(0)
    N = fit.net.n_pairs
    cov = fit.sigma_q2() * scipy.linalg.inv(fit.gram.ztdz_mat / N)
    z = scipy.stats.norm.ppf(1.0 - level / 2.0)
    half = z * np.sqrt(np.diag(cov) / N)
    return fit.eta - half, fit.eta + half
