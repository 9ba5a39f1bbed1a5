"""Directed-network data container aligned with the pair-row layout."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .design import PairIndexing
from .errors import DimensionMismatch, IsolatedNodes


@dataclass
class DirectedNetwork:
    """A directed network with pairwise covariates, one row per ordered pair.

    ``a`` holds the tie variable (binary, or small-integer levels for the
    ordinal extension); ``x1`` the continuous regressor whose coefficient
    is normalized to +/-1; ``z`` the remaining pairwise covariates.
    """

    idx: PairIndexing
    a: np.ndarray
    x1: np.ndarray
    z: np.ndarray
    znames: tuple = ()

    def __post_init__(self):
        N = self.idx.row_count
        self.a = np.asarray(self.a, dtype=np.float64).ravel()
        self.x1 = np.asarray(self.x1, dtype=np.float64).ravel()
        # force one memory layout so identical values give bit-identical fits
        self.z = np.ascontiguousarray(
            np.asarray(self.z, dtype=np.float64).reshape(N, -1))
        if self.a.shape[0] != N or self.x1.shape[0] != N:
            raise DimensionMismatch(
                f"expected {N} pair rows, got a={self.a.shape[0]}, x1={self.x1.shape[0]}")
        if not self.znames:
            self.znames = tuple(f"z{k + 1}" for k in range(self.z.shape[1]))
        if len(self.znames) != self.z.shape[1]:
            raise DimensionMismatch("znames does not match the number of z columns")

    @property
    def n(self) -> int:
        return self.idx.n

    @property
    def n_pairs(self) -> int:
        return self.idx.row_count

    @classmethod
    def from_matrices(cls, A, X1, Zs=(), znames=()) -> "DirectedNetwork":
        """Build from n x n matrices (diagonals are ignored)."""
        A = np.asarray(A, dtype=np.float64)
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        idx = PairIndexing(n)
        s0 = idx.senders - 1
        r0 = idx.receivers - 1

        def flat(M):
            M = np.asarray(M, dtype=np.float64)
            if M.shape != (n, n):
                raise DimensionMismatch(f"matrix shape {M.shape} != ({n}, {n})")
            return M[s0, r0]

        z = (np.column_stack([flat(M) for M in Zs]) if len(Zs)
             else np.empty((idx.row_count, 0)))
        return cls(idx=idx, a=flat(A), x1=flat(X1), z=z, znames=tuple(znames))

    def out_degrees(self) -> np.ndarray:
        return np.bincount(self.idx.senders - 1, weights=self.a, minlength=self.n)

    def in_degrees(self) -> np.ndarray:
        return np.bincount(self.idx.receivers - 1, weights=self.a, minlength=self.n)

    def isolated_nodes(self) -> np.ndarray:
        """1-based labels of nodes with no ties in either direction."""
        total = self.out_degrees() + self.in_degrees()
        return np.flatnonzero(total == 0) + 1

    def drop_isolated(self) -> "DirectedNetwork":
        """Return the subnetwork on non-isolated nodes, relabeled 1..m."""
        iso = self.isolated_nodes()
        if iso.size == 0:
            return self
        keep = np.setdiff1d(np.arange(1, self.n + 1), iso)
        m = keep.size
        if m < 3:
            raise IsolatedNodes(
                f"only {m} non-isolated nodes remain; need at least 3")
        new_label = np.zeros(self.n + 1, dtype=np.int64)
        new_label[keep] = np.arange(1, m + 1)
        mask = np.isin(self.idx.senders, keep) & np.isin(self.idx.receivers, keep)
        sub = PairIndexing(m)
        rows = np.flatnonzero(mask)
        new_rows = np.array([
            sub.row_of(int(new_label[self.idx.senders[r]]),
                       int(new_label[self.idx.receivers[r]])) for r in rows])
        order = rows[np.argsort(new_rows)]
        return DirectedNetwork(idx=sub, a=self.a[order], x1=self.x1[order],
                               z=self.z[order], znames=self.znames)
