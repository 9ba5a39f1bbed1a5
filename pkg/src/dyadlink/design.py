"""Pair indexing and closed-form algebra of the two-way degree design.

The design matrix U has one row per ordered pair (i, j), i != j, and
2n - 1 columns: one per sender effect alpha_1..alpha_n and one per
receiver effect beta_1..beta_{n-1} (beta_n is pinned to zero).  All
operators here (U, U', V^{-1}, and the projector D = I - U V^{-1} U')
are applied matrix-free in O(N) or O(n) time; nothing N x N is ever
materialized.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatch,
    IdentityPair,
    IndexOutOfRange,
    NodeOutOfRange,
)


@dataclass(frozen=True)
class PairIndexing:
    """Bijection between ordered node pairs and design rows.

    Rows are grouped in sender blocks: block k (0-based) holds the n-1
    pairs with sender k+1, ordered by receiver with the sender skipped.
    """

    n: int
    senders: np.ndarray = field(init=False, repr=False)
    receivers: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n < 3:
            raise NodeOutOfRange(f"need n >= 3, got n={self.n}")
        n = self.n
        snd = np.repeat(np.arange(1, n + 1), n - 1)
        rcv = np.empty(n * (n - 1), dtype=np.int64)
        base = np.arange(1, n)  # within-block offsets j = 1..n-1
        for k in range(n):
            rcv[k * (n - 1):(k + 1) * (n - 1)] = np.where(base >= k + 1, base + 1, base)
        object.__setattr__(self, "senders", snd)
        object.__setattr__(self, "receivers", rcv)

    @property
    def row_count(self) -> int:
        return self.n * (self.n - 1)

    def row_of(self, i: int, j: int) -> int:
        if i == j:
            raise IdentityPair(f"pair ({i}, {j}) is a self-loop")
        n = self.n
        if not (1 <= i <= n and 1 <= j <= n):
            raise NodeOutOfRange(f"pair ({i}, {j}) outside 1..{n}")
        off = j - 1 if j > i else j
        return (i - 1) * (n - 1) + off - 1

    def pair_of(self, row: int) -> tuple[int, int]:
        if not (0 <= row < self.row_count):
            raise IndexOutOfRange(f"row {row} outside 0..{self.row_count - 1}")
        return int(self.senders[row]), int(self.receivers[row])

    # Receiver-major permutation used to vectorize the beta block of U'v:
    # rows with receiver j (j <= n-1) appear as a contiguous slab.
    def receiver_permutation(self) -> np.ndarray:
        mask = self.receivers < self.n
        order = np.argsort(self.receivers[mask], kind="stable")
        return np.flatnonzero(mask)[order]


def apply_U(theta: np.ndarray, idx: PairIndexing) -> np.ndarray:
    """U theta: entry for pair (i, j) is alpha_i + beta_j (beta_n = 0)."""
    theta = np.asarray(theta, dtype=np.float64)
    n = idx.n
    if theta.shape[0] != 2 * n - 1:
        raise DimensionMismatch(f"theta has length {theta.shape[0]}, expected {2 * n - 1}")
    out = theta[idx.senders - 1].copy()
    mask = idx.receivers < n
    out[mask] += theta[n + idx.receivers[mask] - 1]
    return out


def apply_Ut(v: np.ndarray, idx: PairIndexing) -> np.ndarray:
    """U' v in O(N); accepts an (N,) vector or (N, B) stack of vectors."""
    v = np.asarray(v, dtype=np.float64)
    n = idx.n
    if v.shape[0] != idx.row_count:
        raise DimensionMismatch(f"v has length {v.shape[0]}, expected {idx.row_count}")
    tail = v.shape[1:]
    alpha = v.reshape(n, n - 1, *tail).sum(axis=1)
    perm = idx.receiver_permutation()
    beta = v[perm].reshape(n - 1, n - 1, *tail).sum(axis=1)
    return np.concatenate([alpha, beta], axis=0)


def vinv_entry(i, j, n: int):
    """Closed-form (i, j) entry of V^{-1} = (U'U)^{-1}, 1-based indices.

    Nine constant regimes indexed by which side of the alpha/beta split
    and the i = n boundary each index falls on.  Accepts scalars or
    broadcastable integer arrays.
    """
    i = np.asarray(i)
    j = np.asarray(j)
    if np.any(i < 1) or np.any(j < 1) or np.any(i > 2 * n - 1) or np.any(j > 2 * n - 1):
        raise IndexOutOfRange(f"indices must lie in 1..{2 * n - 1}")
    lo = np.minimum(i, j)
    hi = np.maximum(i, j)
    fn = float(n)

    conds = [
        (lo <= n - 1) & (hi <= n - 1) & (lo == hi),
        (lo <= n - 1) & (hi <= n - 1),
        (lo == n) & (hi == n),
        (lo <= n - 1) & (hi == n),
        (lo <= n - 1) & (hi == n + lo),
        (lo == n) & (hi >= n + 1),
        (lo <= n - 1) & (hi >= n + 1),
        (lo >= n + 1) & (lo == hi),
        (lo >= n + 1),
    ]
    vals = [
        (2 * fn - 1) / (fn * (fn - 1)),
        (fn * fn - 3 * fn + 1) / (fn * (fn - 1) * (fn - 2)),
        (2 * fn - 3) / ((fn - 1) * (fn - 2)),
        1.0 / (fn - 1),
        -1.0 / fn,
        -1.0 / (fn - 2),
        -(fn - 1) / (fn * (fn - 2)),
        2 * (fn - 1) / (fn * (fn - 2)),
        (fn - 1) / (fn * (fn - 2)),
    ]
    out = np.select(conds, vals)
    if out.ndim == 0:
        return float(out)
    return out


def apply_Vinv(w: np.ndarray, n: int) -> np.ndarray:
    """V^{-1} w in O(n), exploiting the constant-block structure.

    Accepts a (2n-1,) vector or a (2n-1, B) stack.
    """
    w = np.asarray(w, dtype=np.float64)
    if w.shape[0] != 2 * n - 1:
        raise DimensionMismatch(f"w has length {w.shape[0]}, expected {2 * n - 1}")
    fn = float(n)
    c_diag_a = (2 * fn - 1) / (fn * (fn - 1))
    c_off_a = (fn * fn - 3 * fn + 1) / (fn * (fn - 1) * (fn - 2))
    c_nn = (2 * fn - 3) / ((fn - 1) * (fn - 2))
    c_an = 1.0 / (fn - 1)
    c_match = -1.0 / fn
    c_nb = -1.0 / (fn - 2)
    c_cross = -(fn - 1) / (fn * (fn - 2))
    c_diag_b = 2 * (fn - 1) / (fn * (fn - 2))
    c_off_b = (fn - 1) / (fn * (fn - 2))

    a = w[: n - 1]
    an = w[n - 1]
    b = w[n:]
    sa = a.sum(axis=0)
    sb = b.sum(axis=0)

    out = np.empty_like(w)
    out[: n - 1] = (c_diag_a - c_off_a) * a + c_off_a * sa + c_an * an \
        + (c_match - c_cross) * b + c_cross * sb
    out[n - 1] = c_nn * an + c_an * sa + c_nb * sb
    out[n:] = (c_diag_b - c_off_b) * b + c_off_b * sb + (c_match - c_cross) * a \
        + c_cross * sa + c_nb * an
    return out


@dataclass
class GramSummary:
    """Cached cross products needed by the projection estimator.

    Everything downstream of D = I - U V^{-1} U' reduces to these:
    U'Z, Z'Z, and the residualized columns DZ.
    """

    idx: PairIndexing
    utz: np.ndarray          # (2n-1, p)
    ztz: np.ndarray          # (p, p)
    dz: np.ndarray           # (N, p) residualized covariates
    ztdz_mat: np.ndarray     # (p, p)

    @classmethod
    def build(cls, Z: np.ndarray, idx: PairIndexing) -> "GramSummary":
        Z = np.asarray(Z, dtype=np.float64)
        if Z.ndim != 2 or Z.shape[0] != idx.row_count:
            raise DimensionMismatch(
                f"Z has shape {Z.shape}, expected ({idx.row_count}, p)")
        utz = apply_Ut(Z, idx)
        ztz = Z.T @ Z
        dz = Z - apply_U_mat(apply_Vinv(utz, idx.n), idx)
        ztdz_mat = ztz - utz.T @ apply_Vinv(utz, idx.n)
        return cls(idx=idx, utz=utz, ztz=ztz, dz=dz, ztdz_mat=ztdz_mat)


def apply_U_mat(theta: np.ndarray, idx: PairIndexing) -> np.ndarray:
    """U applied to a (2n-1, p) stack of parameter vectors, columnwise."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.ndim == 1:
        return apply_U(theta, idx)
    if theta.shape[1] == 0:
        return np.empty((idx.row_count, 0))
    return np.column_stack([apply_U(theta[:, k], idx) for k in range(theta.shape[1])])


def ztdz(Z: np.ndarray, g: GramSummary) -> np.ndarray:
    """Z' D Z = Z'Z - (U'Z)' V^{-1} (U'Z), symmetric PSD."""
    if Z.shape != (g.idx.row_count, g.utz.shape[1]):
        raise DimensionMismatch("Z does not match the GramSummary")
    return g.ztdz_mat


def ztd_vec(Z: np.ndarray, v: np.ndarray, g: GramSummary) -> np.ndarray:
    """Z' D v without forming D."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[0] != g.idx.row_count:
        raise DimensionMismatch(f"v has length {v.shape[0]}, expected {g.idx.row_count}")
    return Z.T @ v - g.utz.T @ apply_Vinv(apply_Ut(v, g.idx), g.idx.n)


def c4_diagnostic(Z: np.ndarray, g: GramSummary) -> float:
    """Smallest eigenvalue of Z' D Z / N (identification diagnostic)."""
    m = ztdz(Z, g) / g.idx.row_count
    return float(scipy.linalg.eigh(m, eigvals_only=True)[0])


def dense_U(n: int) -> np.ndarray:
    """Dense U for small n; test/oracle use only."""
    idx = PairIndexing(n)
    U = np.zeros((idx.row_count, 2 * n - 1))
    U[np.arange(idx.row_count), idx.senders - 1] = 1.0
    mask = idx.receivers < n
    U[np.flatnonzero(mask), n + idx.receivers[mask] - 1] = 1.0
    return U
