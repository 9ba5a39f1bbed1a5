"""CSV/JSON ingestion and emission for the command-line pipeline.

Formats
-------
Edge list: header ``i,j,a``; 1-based integer node ids; one row per
ordered pair present.  In dense mode absent pairs are ties of 0; sparse
mode requires an explicit node count.  Pairwise covariates: header
``i,j,<name>,...`` with a row for every ordered pair.  Node attributes:
header ``i,<name>,...`` with one row per node; pairwise columns are then
built from a constructor list (``absdiff`` for continuous attributes,
``equality`` indicators for categorical ones, ``raw`` copies the
sender's value).

All numeric output is serialized with ``repr`` (17 significant digits)
and files are written atomically (temp + rename).
"""

from __future__ import annotations

import csv
import json
import os
import tempfile

import numpy as np

from .design import PairIndexing
from .errors import (
    DuplicatePair,
    MissingPair,
    NodeOutOfRange,
    ParseError,
    SelfLoop,
    UnknownColumn,
)
from .network import DirectedNetwork

CONSTRUCTORS = ("absdiff", "equality", "raw")


def _atomic_write(path: str, writer) -> None:
    d = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: str, header, rows) -> None:
    def w(fh):
        out = csv.writer(fh)
        out.writerow(header)
        for row in rows:
            out.writerow([_fmt(v) for v in row])
    _atomic_write(path, w)


def write_json(path: str, payload: dict) -> None:
    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, (np.bool_,)):
            return bool(o)
        raise TypeError(f"not JSON serializable: {type(o)}")
    _atomic_write(path, lambda fh: json.dump(payload, fh, indent=2,
                                             default=default))


def _read_rows(path: str, min_cols: int):
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}:1: empty file")
        header = [c.strip() for c in header]
        if len(header) < min_cols:
            raise ParseError(f"{path}:1: expected at least {min_cols} columns")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}:{lineno}: expected {len(header)} "
                                 f"fields, got {len(row)}")
            rows.append((lineno, row))
    return header, rows


def _parse_int(path, lineno, text, what):
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"{path}:{lineno}: bad {what} {text!r}")


def _parse_float(path, lineno, text, what):
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"{path}:{lineno}: bad {what} {text!r}")


def load_edges(path: str, n: int | None = None):
    """Parse an ``i,j,a`` edge list; returns (n, tie vector in row order).

    ``n`` given -> sparse mode (absent pairs are 0); otherwise dense mode
    with n inferred as the largest node id.
    """
    header, rows = _read_rows(path, 3)
    if [c.lower() for c in header[:3]] != ["i", "j", "a"]:
        raise ParseError(f"{path}:1: edge header must be i,j,a")
    triples = []
    max_id = 0
    for lineno, row in rows:
        i = _parse_int(path, lineno, row[0], "node id")
        j = _parse_int(path, lineno, row[1], "node id")
        a = _parse_float(path, lineno, row[2], "tie value")
        if i == j:
            raise SelfLoop(f"{path}:{lineno}: self-loop on node {i}")
        if i < 1 or j < 1:
            raise NodeOutOfRange(f"{path}:{lineno}: node ids must be >= 1")
        triples.append((i, j, a))
        max_id = max(max_id, i, j)
    if n is None:
        n = max_id
    elif max_id > n:
        raise NodeOutOfRange(f"{path}: node id {max_id} exceeds declared n={n}")
    if n < 3:
        raise NodeOutOfRange(f"{path}: need at least 3 nodes, found n={n}")
    idx = PairIndexing(n)
    a_vec = np.zeros(idx.row_count)
    seen = np.zeros(idx.row_count, dtype=bool)
    for i, j, a in triples:
        r = idx.row_of(i, j)
        if seen[r]:
            raise DuplicatePair(f"{path}: pair ({i}, {j}) appears more than once")
        seen[r] = True
        a_vec[r] = a
    return n, a_vec


def load_pairwise_covariates(path: str, n: int):
    """Parse ``i,j,<name>...``; every ordered pair must appear exactly once."""
    header, rows = _read_rows(path, 3)
    if [c.lower() for c in header[:2]] != ["i", "j"]:
        raise ParseError(f"{path}:1: covariate header must start with i,j")
    names = header[2:]
    idx = PairIndexing(n)
    X = np.full((idx.row_count, len(names)), np.nan)
    seen = np.zeros(idx.row_count, dtype=bool)
    for lineno, row in rows:
        i = _parse_int(path, lineno, row[0], "node id")
        j = _parse_int(path, lineno, row[1], "node id")
        if i == j:
            raise SelfLoop(f"{path}:{lineno}: self-loop on node {i}")
        r = idx.row_of(i, j)
        if seen[r]:
            raise DuplicatePair(f"{path}: pair ({i}, {j}) appears more than once")
        seen[r] = True
        X[r] = [_parse_float(path, lineno, v, f"value for {names[k]}")
                for k, v in enumerate(row[2:])]
    if not seen.all():
        i, j = idx.pair_of(int(np.flatnonzero(~seen)[0]))
        raise MissingPair(f"{path}: no covariate row for pair ({i}, {j})")
    return names, X


def load_node_attributes(path: str, n: int):
    """Parse ``i,<name>...`` with one row per node 1..n."""
    header, rows = _read_rows(path, 2)
    if header[0].lower() != "i":
        raise ParseError(f"{path}:1: node header must start with i")
    names = header[1:]
    W = np.full((n, len(names)), np.nan)
    seen = np.zeros(n, dtype=bool)
    for lineno, row in rows:
        i = _parse_int(path, lineno, row[0], "node id")
        if not (1 <= i <= n):
            raise NodeOutOfRange(f"{path}:{lineno}: node id {i} outside 1..{n}")
        if seen[i - 1]:
            raise DuplicatePair(f"{path}: node {i} appears more than once")
        seen[i - 1] = True
        W[i - 1] = [_parse_float(path, lineno, v, f"value for {names[k]}")
                    for k, v in enumerate(row[1:])]
    if not seen.all():
        raise MissingPair(f"{path}: no attribute row for node "
                          f"{int(np.flatnonzero(~seen)[0]) + 1}")
    return names, W


def build_pairwise_from_nodes(names, W, constructors, idx: PairIndexing):
    """Construct pairwise columns from node attributes.

    ``constructors`` maps attribute name -> one of absdiff / equality /
    raw; the output column order follows the constructor list.
    """
    s0 = idx.senders - 1
    r0 = idx.receivers - 1
    cols, out_names = [], []
    for name, kind in constructors:
        if name not in names:
            raise UnknownColumn(f"node attribute {name!r} not in file "
                                f"(have {names})")
        if kind not in CONSTRUCTORS:
            raise ValueError(f"unknown constructor {kind!r}; "
                             f"choose from {CONSTRUCTORS}")
        w = W[:, names.index(name)]
        if kind == "absdiff":
            cols.append(np.abs(w[s0] - w[r0]))
        elif kind == "equality":
            cols.append((w[s0] == w[r0]).astype(np.float64))
        else:
            cols.append(w[s0].copy())
        out_names.append(f"{name}_{kind}")
    return out_names, np.column_stack(cols)


def assemble_network(n, a, names, X, special: str, standardize: bool = False,
                     drop_isolated: bool = False) -> DirectedNetwork:
    """Combine parsed pieces into a validated DirectedNetwork."""
    if special not in names:
        raise UnknownColumn(f"special-regressor column {special!r} not in "
                            f"covariates (have {names})")
    k = names.index(special)
    x1 = X[:, k]
    keep = [c for c in range(len(names)) if c != k]
    z = X[:, keep]
    znames = tuple(names[c] for c in keep)
    if standardize and z.shape[1]:
        sd = z.std(axis=0)
        sd[sd == 0] = 1.0
        z = (z - z.mean(axis=0)) / sd
    net = DirectedNetwork(idx=PairIndexing(n), a=a, x1=x1, z=z, znames=znames)
    if drop_isolated:
        net = net.drop_isolated()
    return net


def write_network(net: DirectedNetwork, edges_path: str, cov_path: str) -> None:
    """Round-trippable dump of a network to the edge/covariate formats."""
    idx = net.idx
    write_csv(edges_path, ["i", "j", "a"],
              ((int(idx.senders[r]), int(idx.receivers[r]), net.a[r])
               for r in range(idx.row_count)))
    header = ["i", "j", "x1", *net.znames]
    write_csv(cov_path, header,
              ((int(idx.senders[r]), int(idx.receivers[r]), net.x1[r],
                *net.z[r]) for r in range(idx.row_count)))


def gof_degrees(net: DirectedNetwork, fitted_ties: np.ndarray):
    """Observed vs fitted normalized degrees per node, plus L2 errors.

    Returns (rows, summary): rows are (node, out_obs, out_fit, in_obs,
    in_fit) with degrees divided by n-1.
    """
    n = net.n
    scale = 1.0 / (n - 1)
    obs_out = net.out_degrees() * scale
    obs_in = net.in_degrees() * scale
    fit_out = np.bincount(net.idx.senders - 1, weights=fitted_ties,
                          minlength=n) * scale
    fit_in = np.bincount(net.idx.receivers - 1, weights=fitted_ties,
                         minlength=n) * scale
    rows = [(i + 1, obs_out[i], fit_out[i], obs_in[i], fit_in[i])
            for i in range(n)]
    summary = {
        "l2_out": float(np.linalg.norm(obs_out - fit_out)),
        "l2_in": float(np.linalg.norm(obs_in - fit_in)),
    }
    return rows, summary
