"""Dataset generation, ingestion, and export."""
from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field

import numpy as np

from ..errors import DegenerateColumn, DimensionMismatch, ParseError
from ..graphs import (Graph, block_labels, build_shift, load_graph,
                      sbm_generate, write_edge_list)
from ..sparse import SparseMatrix, power_iteration_lambda_max, spmv


@dataclass
class Dataset:
    """Graph signals over one shift operator with fixed splits.

    Classification datasets fill ``labels``; regression datasets fill
    ``targets`` plus an observation mask of the same shape.
    """

    S: SparseMatrix
    X: np.ndarray
    labels: np.ndarray = None
    targets: np.ndarray = None
    target_mask: np.ndarray = None
    splits: dict = field(default_factory=dict)
    n_outputs: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def is_classification(self):
        return self.labels is not None

    def split_arrays(self, split):
        idx = self.splits[split]
        if self.is_classification:
            return self.X[idx], self.labels[idx], None
        return self.X[idx], self.targets[idx], self.target_mask[idx]


def dataset_hash(ds):
    """Hash of the shift operator and the sample set (splits excluded)."""
    h = hashlib.sha256()
    for arr, dt in ((ds.S.row_ptr, "<i8"), (ds.S.col_idx, "<i8"),
                    (ds.S.values, "<f8"), (ds.X, "<f8")):
        h.update(np.ascontiguousarray(arr, dtype=dt).tobytes())
    if ds.labels is not None:
        h.update(np.ascontiguousarray(ds.labels, dtype="<i8").tobytes())
    if ds.targets is not None:
        h.update(np.ascontiguousarray(ds.targets, dtype="<f8").tobytes())
    return h.hexdigest()


def _contiguous_splits(n_train, n_val, n_test):
    train = np.arange(n_train)
    val = np.arange(n_train, n_train + n_val)
    test = np.arange(n_train + n_val, n_train + n_val + n_test)
    return {"train": train, "val": val, "test": test}


def gen_source_localization(cfg, rng):
    """Diffused-delta community classification on a fresh SBM draw.

    One maximum-degree source per community is fixed for the graph
    realization; each sample diffuses its delta for a uniform integer
    number of steps in [0, t_max].
    """
    ds_cfg = cfg.dataset
    sizes = ds_cfg["block_sizes"]
    graph = sbm_generate(sizes, ds_cfg["p_intra"], ds_cfg["p_inter"], rng)
    S = build_shift(graph, "max_eigenvalue")
    labels_of_node = block_labels(sizes)
    degree = np.diff(S.row_ptr)
    sources = []
    for c in range(len(sizes)):
        members = np.nonzero(labels_of_node == c)[0]
        best = members[np.lexsort((members, -degree[members]))[0]]
        sources.append(int(best))
    t_max = int(ds_cfg["t_max"])
    n = graph.n
    # all diffusion states up front: table[c, t] = S^t delta_source(c)
    table = np.zeros((len(sizes), t_max + 1, n))
    for c, src in enumerate(sources):
        x = np.zeros(n)
        x[src] = 1.0
        table[c, 0] = x
        for t in range(1, t_max + 1):
            x = spmv(S, x)
            table[c, t] = x
    n_total = ds_cfg["n_train"] + ds_cfg["n_val"] + ds_cfg["n_test"]
    comm = rng.integers(0, len(sizes), size=n_total)
    steps = rng.integers(0, t_max + 1, size=n_total)
    X = table[comm, steps]
    splits = _contiguous_splits(ds_cfg["n_train"], ds_cfg["n_val"],
                                ds_cfg["n_test"])
    return Dataset(S=S, X=X, labels=comm.astype(np.int64), splits=splits,
                   n_outputs=len(sizes),
                   meta={"sources": sources, "task": cfg.task})


def read_signals_csv(path, n_nodes):
    """One sample per line: n_nodes comma-separated values then a label."""
    X, labels = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != n_nodes + 1:
                raise ParseError(
                    lineno, f"expected {n_nodes + 1} fields, got {len(parts)}")
            try:
                X.append([float(p) for p in parts[:-1]])
                labels.append(int(parts[-1]))
            except ValueError as exc:
                raise ParseError(lineno, str(exc)) from None
    return np.asarray(X, dtype=np.float64), np.asarray(labels, dtype=np.int64)


def ingest_edge_list(graph_path, signals_path, normalization="max_eigenvalue",
                     train_fraction=0.8, val_fraction=0.1):
    """Dataset from a user-supplied graph file and signal/label CSV."""
    graph = load_graph(graph_path)
    S = build_shift(graph, normalization)
    X, labels = read_signals_csv(signals_path, graph.n)
    if X.shape[1] != graph.n:
        raise DimensionMismatch("signals do not match the graph size")
    n = len(X)
    n_train = int(round(train_fraction * n))
    n_val = int(round(val_fraction * n))
    n_test = n - n_train - n_val
    if n_test < 0:
        raise ValueError("split fractions exceed the dataset")
    splits = _contiguous_splits(n_train, n_val, n_test)
    return Dataset(S=S, X=X, labels=labels, splits=splits,
                   n_outputs=int(labels.max()) + 1 if len(labels) else 0,
                   meta={"graph_path": str(graph_path)})


def export_dataset(ds, out_dir):
    """Edge list plus signals CSV, values written exactly (repr floats)."""
    os.makedirs(out_dir, exist_ok=True)
    rows = ds.S.entry_rows()
    edges = [(int(r), int(c), float(v)) for r, c, v
             in zip(rows, ds.S.col_idx, ds.S.values) if r < c]
    graph = Graph(ds.S.n_rows, tuple(edges), directed=False)
    graph_path = os.path.join(out_dir, "graph.edgelist")
    signals_path = os.path.join(out_dir, "signals.csv")
    write_edge_list(graph_path, graph)
    with open(signals_path, "w", encoding="utf-8") as fh:
        for x, y in zip(ds.X, ds.labels):
            fh.write(",".join(repr(float(v)) for v in x))
            fh.write(f",{int(y)}\n")
    return graph_path, signals_path


def pearson_similarity(a, b, min_co_rated=2):
    """Pearson correlation over co-observed (nonzero) entries.

    Returns None when fewer than min_co_rated entries are co-observed
    (an expected outcome on sparse ratings); raises DegenerateColumn when
    a side has zero variance on the co-observed set.
    """
    co = (a != 0) & (b != 0)
    if co.sum() < min_co_rated:
        return None
    x = a[co] - a[co].mean()
    y = b[co] - b[co].mean()
    vx = float(x @ x)
    vy = float(y @ y)
    if vx == 0.0 or vy == 0.0:
        raise DegenerateColumn("zero variance over co-rated entries")
    return float(x @ y) / np.sqrt(vx * vy)


def build_similarity_graph(ratings, top_k, min_co_rated=2):
    """Pearson-similarity graph over the rows of a ratings matrix.

    Keeps the top_k most similar neighbors per node, symmetrizes by the
    elementwise maximum, and scales by the dominant eigenvalue magnitude.
    Degenerate pairs (too few co-ratings, zero variance) are skipped.
    """
    ratings = np.asarray(ratings, dtype=np.float64)
    n = ratings.shape[0]
    sim = np.full((n, n), -np.inf)
    for i in range(n):
        for j in range(i + 1, n):
            try:
                p = pearson_similarity(ratings[i], ratings[j], min_co_rated)
            except DegenerateColumn:
                continue
            if p is not None:
                sim[i, j] = sim[j, i] = p
    W = np.zeros((n, n))
    k = min(top_k, n - 1)
    for i in range(n):
        finite = np.nonzero(np.isfinite(sim[i]))[0]
        if len(finite) == 0:
            continue
        order = finite[np.lexsort((finite, -sim[i, finite]))]
        keep = order[:k]
        W[i, keep] = sim[i, keep]
    W = np.maximum(W, W.T)
    S = SparseMatrix.from_dense(W)
    if S.nnz == 0:
        return S
    lam = power_iteration_lambda_max(S)
    return S.scale(1.0 / lam)


def read_ratings_csv(path):
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if width is None:
                width = len(parts)
            elif len(parts) != width:
                raise ParseError(lineno, "ragged ratings row")
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise ParseError(lineno, str(exc)) from None
    return np.asarray(rows, dtype=np.float64)


def gen_ratings_regression(cfg, rng):
    """Rating prediction at one target node from everyone else's ratings.

    Each item column becomes a sample: the target node's entry is blanked
    in the input and becomes the (masked) regression target.
    """
    ds_cfg = cfg.dataset
    ratings = read_ratings_csv(ds_cfg["ratings_path"])
    target = int(ds_cfg["target_node"])
    if not 0 <= target < ratings.shape[0]:
        raise ValueError("target_node outside the ratings matrix")
    S = build_similarity_graph(ratings, ds_cfg["top_k"],
                               ds_cfg["min_co_rated"])
    X = ratings.T.copy()          # (n_items, n_nodes)
    targets = X[:, target].copy().reshape(-1, 1)
    mask = (targets != 0).astype(np.float64)
    X[:, target] = 0.0
    n = len(X)
    order = rng.permutation(n)
    n_train = int(round(ds_cfg["train_fraction"] * n))
    n_val = int(round(ds_cfg["val_fraction"] * n))
    splits = {
        "train": order[:n_train],
        "val": order[n_train:n_train + n_val],
        "test": order[n_train + n_val:],
    }
    return Dataset(S=S, X=X, targets=targets, target_mask=mask,
                   splits=splits, n_outputs=1,
                   meta={"target_node": target, "task": cfg.task})


def build_dataset(cfg, rng):
    if cfg.task == "sbm_source_localization":
        return gen_source_localization(cfg, rng)
    if cfg.task == "edge_list_classification":
        d = cfg.dataset
        return ingest_edge_list(d["graph_path"], d["signals_path"],
                                d["normalization"], d["train_fraction"],
                                d["val_fraction"])
    if cfg.task == "ratings_regression":
        return gen_ratings_regression(cfg, rng)
    raise ValueError(f"unknown task {cfg.task!r}")
