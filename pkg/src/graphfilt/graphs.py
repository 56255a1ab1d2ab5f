"""Graph representation, shift operators, random graphs, and centrality."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CountTooLarge, GenerationFailed, ParseError
from .sparse import SparseMatrix, power_iteration_lambda_max, spmv

SBM_MAX_RETRIES = 1000


@dataclass(frozen=True)
class Graph:
    """Weighted graph without self-loops.

    For undirected graphs each edge is stored once with src < dst and the
    adjacency expands both directions.
    """

    n: int
    edges: tuple = field(default=())
    directed: bool = False

    def __post_init__(self):
        canon = []
        seen = set()
        for e in self.edges:
            src, dst = int(e[0]), int(e[1])
            w = float(e[2]) if len(e) > 2 else 1.0
            if src == dst:
                raise ValueError(f"self-loop at node {src} not allowed")
            if not (0 <= src < self.n and 0 <= dst < self.n):
                raise ValueError(f"edge ({src},{dst}) out of range")
            if not self.directed and src > dst:
                src, dst = dst, src
            if (src, dst) in seen:
                continue
            seen.add((src, dst))
            canon.append((src, dst, w))
        object.__setattr__(self, "edges", tuple(sorted(canon)))

    def adjacency(self):
        """Adjacency as a SparseMatrix (symmetric when undirected)."""
        if not self.edges:
            return SparseMatrix.from_coo(self.n, self.n, [], [], [])
        src = np.array([e[0] for e in self.edges], dtype=np.int64)
        dst = np.array([e[1] for e in self.edges], dtype=np.int64)
        w = np.array([e[2] for e in self.edges])
        if self.directed:
            return SparseMatrix.from_coo(self.n, self.n, src, dst, w)
        rows = np.concatenate([src, dst])
        cols = np.concatenate([dst, src])
        vals = np.concatenate([w, w])
        return SparseMatrix.from_coo(self.n, self.n, rows, cols, vals)

    @property
    def n_edges(self):
        return len(self.edges)


def build_shift(graph, normalization="max_eigenvalue",
                tol=1e-10, max_iter=10000):
    """Adjacency-based shift operator under the chosen scaling.

    normalization:
      none            raw adjacency
      max_eigenvalue  divide every weight by lambda_max(A)
      row_stochastic  divide each row by its sum (zero rows stay zero)
    """
    if graph.n < 1:
        raise ValueError("graph needs at least one node")
    A = graph.adjacency()
    if normalization == "none":
        return A
    if normalization == "max_eigenvalue":
        if graph.n_edges == 0:
            raise ValueError("max_eigenvalue normalization needs an edge")
        lam = power_iteration_lambda_max(A, tol=tol, max_iter=max_iter)
        return A.scale(1.0 / lam)
    if normalization == "row_stochastic":
        sums = spmv(A, np.ones(graph.n))
        scale = np.where(sums != 0.0, 1.0 / np.where(sums == 0, 1.0, sums), 0.0)
        rows = A.entry_rows()
        return A.with_values(A.values * scale[rows])
    raise ValueError(f"unknown normalization {normalization!r}")


def is_connected(graph):
    """Breadth-first search from node 0, edges taken both ways."""
    if graph.n == 0:
        return True
    neigh = [[] for _ in range(graph.n)]
    for src, dst, _ in graph.edges:
        neigh[src].append(dst)
        neigh[dst].append(src)
    seen = np.zeros(graph.n, dtype=bool)
    seen[0] = True
    frontier = [0]
    while frontier:
        nxt = []
        for u in frontier:
            for v in neigh[u]:
                if not seen[v]:
                    seen[v] = True
                    nxt.append(v)
        frontier = nxt
    return bool(seen.all())


def sbm_generate(block_sizes, p_intra, p_inter, rng):
    """Stochastic block model, resampled until connected.

    Candidate pairs (i, j), i < j, are visited in lexicographic order so
    the result is a pure function of (block_sizes, probabilities, rng
    state). Raises GenerationFailed after SBM_MAX_RETRIES attempts.
    """
    if not (0.0 <= p_intra <= 1.0 and 0.0 <= p_inter <= 1.0):
        raise ValueError("probabilities must lie in [0, 1]")
    block_sizes = [int(b) for b in block_sizes]
    if any(b <= 0 for b in block_sizes):
        raise ValueError("block sizes must be positive")
    n = sum(block_sizes)
    block_of = np.repeat(np.arange(len(block_sizes)), block_sizes)
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(block_of[iu] == block_of[ju], p_intra, p_inter)
    for _ in range(SBM_MAX_RETRIES):
        draw = rng.random(len(iu))
        keep = draw < prob
        edges = tuple(zip(iu[keep].tolist(), ju[keep].tolist()))
        g = Graph(n, tuple((a, b, 1.0) for a, b in edges), directed=False)
        if is_connected(g):
            return g
    raise GenerationFailed(
        f"no connected draw in {SBM_MAX_RETRIES} attempts "
        f"(p_intra={p_intra}, p_inter={p_inter})")


def block_labels(block_sizes):
    """Node -> block id for contiguous blocks."""
    return np.repeat(np.arange(len(block_sizes)), block_sizes)


def diffusion_centrality(S, K):
    """delta = sum_{k=0..K} S^k 1, by K repeated shift applications."""
    if S.n_rows != S.n_cols:
        raise ValueError("diffusion centrality needs a square shift")
    v = np.ones(S.n_rows)
    acc = v.copy()
    for _ in range(int(K)):
        v = spmv(S, v)
        acc += v
    return acc


def select_nodes(S, strategy, count, k_dc=3):
    """Top-`count` nodes by the given score, ties to the lower index."""
    n = S.n_rows
    count = int(count)
    if count > n:
        raise CountTooLarge(f"cannot select {count} of {n} nodes")
    if strategy == "degree":
        score = np.diff(S.row_ptr).astype(np.float64)
    elif strategy == "diffusion_centrality":
        score = diffusion_centrality(S, k_dc)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    order = np.lexsort((np.arange(n), -score))
    return np.sort(order[:count])


def read_edge_list(path):
    """Parse the text edge-list format: ``src dst [weight]`` per line,
    0-based indices, '#' comments and blank lines ignored."""
    edges = []
    max_node = -1
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) not in (2, 3):
                raise ParseError(lineno, f"expected 2 or 3 fields, got {len(parts)}")
            try:
                src, dst = int(parts[0]), int(parts[1])
                w = float(parts[2]) if len(parts) == 3 else 1.0
            except ValueError as exc:
                raise ParseError(lineno, str(exc)) from None
            if src < 0 or dst < 0:
                raise ParseError(lineno, "negative node index")
            if src == dst:
                raise ParseError(lineno, "self-loop not allowed")
            edges.append((src, dst, w))
            max_node = max(max_node, src, dst)
    return edges, max_node + 1


def load_graph(path, n=None, directed=False):
    edges, n_seen = read_edge_list(path)
    n = n_seen if n is None else int(n)
    return Graph(n, tuple(edges), directed=directed)


def write_edge_list(path, graph):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {graph.n} nodes, {graph.n_edges} edges\n")
        for src, dst, w in graph.edges:
            fh.write(f"{src} {dst} {w!r}\n")
