"""Conditional kernel smoothers on dyadic covariates.

A single compiled pass produces, at every data point, the three sums
needed downstream:

* ``den``  = sum of the product kernel over the conditioning variables
  (conditional-density denominator),
* ``num``  = the same sum with the extra kernel factor in the target
  variable (density numerator, also the Nadaraya-Watson denominator),
* ``vnum`` = ``num`` weighted by a response column (NW numerator).

Discrete conditioning columns partition the sample into exact-match
cells; continuous columns enter through a compact product kernel, which
lets each evaluation restrict to a sorted window on the first
continuous coordinate instead of scanning the whole cell.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import DimensionMismatch, NonPositiveDensity
from .kernels import BIWEIGHT, BIWEIGHT4, KERNEL_NAMES

_KIND = {BIWEIGHT: 0, BIWEIGHT4: 1}


@njit(cache=True, inline="always")
def _kern(u, kind):
    t = 1.0 - u * u
    if kind == 0:
        return 0.9375 * t * t
    return 1.640625 * t * t * (1.0 - 3.0 * u * u)


@njit(cache=True)
def _nw_pass_cont(x, zc, v, starts, h, kind):
    N = x.shape[0]
    q = zc.shape[1]
    den = np.zeros(N)
    num = np.zeros(N)
    vnum = np.zeros(N)
    for c in range(starts.shape[0] - 1):
        s, e = starts[c], starts[c + 1]
        key = zc[s:e, 0]
        for i in range(s, e):
            lo = s + np.searchsorted(key, zc[i, 0] - h)
            hi = s + np.searchsorted(key, zc[i, 0] + h, side="right")
            di = 0.0
            ni = 0.0
            vi = 0.0
            for l in range(lo, hi):
                w = 1.0
                ok = True
                for k in range(q):
                    u = (zc[l, k] - zc[i, k]) / h
                    if u < -1.0 or u > 1.0:
                        ok = False
                        break
                    w *= _kern(u, kind)
                if not ok:
                    continue
                di += w
                ux = (x[l] - x[i]) / h
                if -1.0 <= ux <= 1.0:
                    kx = _kern(ux, kind) * w
                    ni += kx
                    vi += v[l] * kx
            den[i] = di
            num[i] = ni
            vnum[i] = vi
    return den, num, vnum


@njit(cache=True)
def _nw_pass_disc(x, v, starts, h, kind):
    # No continuous conditioning columns: the density denominator is the
    # cell count; prune the numerator window on the target variable.
    N = x.shape[0]
    den = np.zeros(N)
    num = np.zeros(N)
    vnum = np.zeros(N)
    for c in range(starts.shape[0] - 1):
        s, e = starts[c], starts[c + 1]
        count = float(e - s)
        key = x[s:e]
        for i in range(s, e):
            lo = s + np.searchsorted(key, x[i] - h)
            hi = s + np.searchsorted(key, x[i] + h, side="right")
            ni = 0.0
            vi = 0.0
            for l in range(lo, hi):
                ux = (x[l] - x[i]) / h
                kx = _kern(ux, kind)
                ni += kx
                vi += v[l] * kx
            den[i] = count
            num[i] = ni
            vnum[i] = vi
    return den, num, vnum


@dataclass
class SmoothingPlan:
    """Sorted, cell-partitioned view of (target, conditioning) columns.

    Built once per data set; each bandwidth evaluation is then a single
    compiled pass.
    """

    n_obs: int
    kernel: str
    x_sorted: np.ndarray = field(repr=False)
    zc_sorted: np.ndarray = field(repr=False)   # (N, q), q may be 0
    starts: np.ndarray = field(repr=False)      # cell boundaries, len n_cells+1
    order: np.ndarray = field(repr=False)       # original -> sorted position
    rank: np.ndarray = field(repr=False)        # sorted -> original position

    @classmethod
    def build(cls, x, zc=None, zd=None, kernel: str = BIWEIGHT) -> "SmoothingPlan":
        if kernel not in KERNEL_NAMES:
            raise ValueError(f"unknown kernel {kernel!r}; choose from {KERNEL_NAMES}")
        x = np.asarray(x, dtype=np.float64).ravel()
        N = x.shape[0]
        zc = (np.empty((N, 0)) if zc is None
              else np.asarray(zc, dtype=np.float64).reshape(N, -1))
        if zc.shape[0] != N:
            raise DimensionMismatch("continuous conditioning columns do not match x")
        if zd is None:
            cells = np.zeros(N, dtype=np.int64)
        else:
            zd = np.asarray(zd).reshape(N, -1)
            if zd.shape[0] != N:
                raise DimensionMismatch("discrete conditioning columns do not match x")
            _, cells = np.unique(zd, axis=0, return_inverse=True)
        sortkey = zc[:, 0] if zc.shape[1] else x
        order = np.lexsort((sortkey, cells))
        cells_sorted = cells[order]
        n_cells = int(cells_sorted[-1]) + 1 if N else 0
        starts = np.searchsorted(cells_sorted, np.arange(n_cells + 1))
        rank = np.empty(N, dtype=np.int64)
        rank[order] = np.arange(N)
        return cls(n_obs=N, kernel=kernel, x_sorted=np.ascontiguousarray(x[order]),
                   zc_sorted=np.ascontiguousarray(zc[order]), starts=starts,
                   order=order, rank=rank)

    def sums(self, h: float, v=None):
        """Raw (den, num, vnum) at the data points, original order."""
        if not h > 0:
            raise ValueError(f"bandwidth must be positive, got {h}")
        vs = (np.zeros(self.n_obs) if v is None
              else np.asarray(v, dtype=np.float64).ravel()[self.order])
        if vs.shape[0] != self.n_obs:
            raise DimensionMismatch("response column does not match x")
        kind = _KIND[self.kernel]
        if self.zc_sorted.shape[1]:
            den, num, vnum = _nw_pass_cont(self.x_sorted, self.zc_sorted, vs,
                                           self.starts, h, kind)
        else:
            den, num, vnum = _nw_pass_disc(self.x_sorted, vs, self.starts, h, kind)
        return den[self.rank], num[self.rank], vnum[self.rank]

    def density(self, h: float, floor: float = 1e-3, clip: bool = True) -> np.ndarray:
        """Conditional density of x given the conditioning columns."""
        den, num, _ = self.sums(h)
        with np.errstate(divide="ignore", invalid="ignore"):
            f = num / (den * h)
        f[~np.isfinite(f)] = 0.0
        if clip:
            return np.maximum(f, floor)
        if np.any(f <= 0.0):
            raise NonPositiveDensity(
                f"{int(np.sum(f <= 0.0))} of {self.n_obs} density estimates are "
                f"non-positive at bandwidth {h}")
        return f

    def conditional_mean(self, v, h: float) -> np.ndarray:
        """Nadaraya-Watson estimate of E[v | x, conditioning columns]."""
        _, num, vnum = self.sums(h, v)
        with np.errstate(divide="ignore", invalid="ignore"):
            m = vnum / num
        m[~np.isfinite(m)] = 0.0
        return m


def delta_hat(plan: SmoothingPlan, x, h: float, delta: float,
              floor: float = 1e-3) -> float:
    """Density-weighted estimate of the shift delta; equals delta when the
    conditional density is estimated exactly."""
    x = np.asarray(x, dtype=np.float64).ravel()
    f = plan.density(h, floor=floor)
    ind = ((x + delta > 0.0).astype(np.float64) - (x > 0.0).astype(np.float64))
    return float(np.mean(ind / f))


def bandwidth_grid(x, num: int = 40, lo: float = 0.05, hi: float = 3.0) -> np.ndarray:
    """Geometric grid of candidate bandwidths scaled by sd(x)."""
    sd = float(np.std(np.asarray(x, dtype=np.float64)))
    if sd <= 0:
        raise ValueError("x is degenerate; cannot build a bandwidth grid")
    return sd * np.geomspace(lo, hi, num)


def select_bandwidth(plan: SmoothingPlan, x, grid=None, floor: float = 1e-3):
    """Pick the bandwidth whose implied shift estimates best match the
    shifts 0.1, 0.2, ..., 1.0; ties resolve to the smaller bandwidth.

    Returns (h, grid, losses).
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    if grid is None:
        grid = bandwidth_grid(x)
    grid = np.asarray(grid, dtype=np.float64)
    deltas = np.arange(1, 11) / 10.0
    ind = ((x[:, None] + deltas[None, :] > 0.0).astype(np.float64)
           - (x[:, None] > 0.0).astype(np.float64))
    losses = np.empty(grid.shape[0])
    for g, h in enumerate(grid):
        f = plan.density(h, floor=floor)
        dh = np.mean(ind / f[:, None], axis=0)
        losses[g] = float(np.sum((deltas - dh) ** 2))
    best = int(np.argmin(losses))
    return float(grid[best]), grid, losses
