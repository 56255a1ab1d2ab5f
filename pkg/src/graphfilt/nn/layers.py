"""Differentiable GNN layers over every filter family, plus the model.

Layer math mirrors the filter library exactly; the difference is that
parameters are Tensors and every operation records onto a tape. Feature
mixing follows the layer form sum_k (shift chain)_k X A_k; families whose
scalar filters vary per feature pair (block, hybrid, pole-based) carry
one scalar tensor slot per (input feature, output feature) pair so the
trainable-scalar count matches the published per-layer formulas.
"""
from __future__ import annotations

import numpy as np

from ..errors import IncompatibleDims, SingularDiagonal
from ..filters import EPS_SING
from ..sparse import SparseMatrix, support_mask
from . import autograd as ag
from .autograd import Pattern, Tape, Tensor


class ShiftContext:
    """Shift operator with the derived structures layers keep reusing."""

    def __init__(self, S):
        self.S = S
        self.S_t = S.transpose()
        self.n = S.n_rows
        self.mask = support_mask(S)
        self.pattern = Pattern.from_mask(self.mask)
        self.diag = S.diagonal()
        rows = S.entry_rows()
        off = rows != S.col_idx
        off_sparse = SparseMatrix.from_coo(
            S.n_rows, S.n_cols, rows[off], S.col_idx[off], S.values[off])
        self.off_pattern = Pattern.from_sparse(off_sparse)
        self.off_values = off_sparse.values
        self.weighted_vals = self.mask.aligned_values(S, diag_fill_zero=1.0)

    def masked_rows_pattern(self, important):
        """Off-diagonal pattern of S restricted to the given rows."""
        keep = np.isin(self.off_pattern.rows, important)
        rows = self.off_pattern.rows[keep]
        cols = self.off_pattern.col_idx[keep]
        row_ptr = np.zeros(self.n + 1, dtype=np.int64)
        np.add.at(row_ptr, rows + 1, 1)
        return Pattern(self.n, self.n, np.cumsum(row_ptr), cols)


def _glorot_limit(fan_in, fan_out):
    return np.sqrt(6.0 / (fan_in + fan_out))


class AttentionParams:
    """One attention head: mixer B (F_in x F_out) and scorer e (2 F_out)."""

    def __init__(self, f_in, f_out, slope=0.2):
        self.B = Tensor(np.zeros((f_in, f_out)), name="att_B")
        self.e = Tensor(np.zeros(2 * f_out), name="att_e")
        self.slope = slope
        self.tied = False

    def params(self):
        out = [] if self.tied else [("att_B", self.B)]
        return out + [("att_e", self.e)]


class GnnLayer:
    """Base layer: filter-family parameters plus an optional per-feature
    bias added before the nonlinearity.

    The bias is not part of any filter family's parameter formula (those
    are reported by filter_param_count); it keeps rectified units
    receptive when the input signals live on a nonnegative cone.
    """

    kind = "base"

    def __init__(self, f_in, f_out, order, nonlinearity="relu",
                 use_bias=True):
        self.f_in = f_in
        self.f_out = f_out
        self.order = order
        self.nonlinearity = nonlinearity
        self.bias = Tensor(np.zeros(f_out), name="bias") if use_bias else None

    def params(self):
        raise NotImplementedError

    def named_params(self):
        out = list(self.params())
        if self.bias is not None:
            out.append(("bias", self.bias))
        return out

    def filter_param_count(self):
        """Trainable scalars of the filter family, bias excluded."""
        seen = set()
        total = 0
        for _, t in self.params():
            if id(t) not in seen:
                seen.add(id(t))
                total += t.size
        return int(total)

    def _finish(self, tape, acc):
        if self.bias is not None:
            acc = ag.add(tape, acc, self.bias)
        return ag.activation(tape, acc, self.nonlinearity)

    def forward(self, tape, ctx, X):
        raise NotImplementedError

    def post_update(self, ctx):
        pass

    def describe(self):
        return {
            "kind": self.kind,
            "f_in": self.f_in,
            "f_out": self.f_out,
            "order": self.order,
            "nonlinearity": self.nonlinearity,
            "use_bias": self.bias is not None,
        }

    def _make_mixing(self, count):
        return [Tensor(np.zeros((self.f_in, self.f_out)), name="mixing")
                for _ in range(count)]

    def _mix_chain(self, tape, ctx, X, matrices):
        """sum_k S^k X A_k for the fixed graph shift."""
        acc = ag.matmul(tape, X, matrices[0])
        Z = X
        for A in matrices[1:]:
            Z = ag.spmm_const(tape, ctx.S, Z, ctx.S_t)
            acc = ag.add(tape, acc, ag.matmul(tape, Z, A))
        return acc


class PolynomialLayer(GnnLayer):
    """Graph convolutional layer: sigma(sum_k S^k X A_k)."""

    kind = "polynomial"

    def __init__(self, f_in, f_out, order, nonlinearity="relu",
                 use_bias=True):
        super().__init__(f_in, f_out, order, nonlinearity, use_bias)
        self.mixing = self._make_mixing(order + 1)
        for t in self.mixing:
            t.name = "poly"

    def params(self):
        return [("poly", t) for t in self.mixing]

    def forward(self, tape, ctx, X):
        return self._finish(tape, self._mix_chain(tape, ctx, X, self.mixing))


class BlockVaryingLayer(GnnLayer):
    """Per-block mixing matrices: node i uses A_k[block_of_node[i]]."""

    kind = "block_varying"

    def __init__(self, f_in, f_out, order, block_of_node, n_blocks,
                 nonlinearity="relu", use_bias=True):
        super().__init__(f_in, f_out, order, nonlinearity, use_bias)
        self.block_of_node = np.asarray(block_of_node, dtype=np.int64)
        self.n_blocks = int(n_blocks)
        self.coeffs = [Tensor(np.zeros((n_blocks, f_in, f_out)), name="block")
                       for _ in range(order + 1)]

    def params(self):
        return [("block", t) for t in self.coeffs]

    def forward(self, tape, ctx, X):
        acc = ag.block_mix(tape, X, self.coeffs[0], self.block_of_node)
        Z = X
        for A in self.coeffs[1:]:
            Z = ag.spmm_const(tape, ctx.S, Z, ctx.S_t)
            acc = ag.add(tape, acc, ag.block_mix(tape, Z, A, self.block_of_node))
        return self._finish(tape, acc)

    def describe(self):
        d = super().describe()
        d["n_blocks"] = self.n_blocks
        d["block_of_node"] = self.block_of_node.tolist()
        return d


class EdgeVaryingLayer(GnnLayer):
    """Full edge-varying recursion with one shared factor set.

    Z_0 = diag(phi0) X, Z_k = Phi_k Z_{k-1}; output sum_k Z_k A_k. The
    per-order factors live on supp(I+S) and gradients exist only there.
    """

    kind = "edge_varying"

    def __init__(self, f_in, f_out, order, pattern, nonlinearity="relu",
                 use_bias=True):
        super().__init__(f_in, f_out, order, nonlinearity, use_bias)
        self.pattern = pattern
        self.phi0 = Tensor(np.zeros(pattern.n_rows), name="ev_phi0")
        self.phi = [Tensor(np.zeros(pattern.nnz), name="ev_phi")
                    for _ in range(order)]
        self.mixing = self._make_mixing(order + 1)

    def params(self):
        named = [("ev_phi0", self.phi0)]
        named += [("ev_phi", t) for t in self.phi]
        named += [("mixing", t) for t in self.mixing]
        return named

    def forward(self, tape, ctx, X):
        phi0col = ag.reshape(tape, self.phi0, (ctx.n, 1))
        Z = ag.mul(tape, phi0col, X)
        acc = ag.matmul(tape, Z, self.mixing[0])
        for vals, A in zip(self.phi, self.mixing[1:]):
            Z = ag.spmm_values(tape, vals, Z, self.pattern)
            acc = ag.add(tape, acc, ag.matmul(tape, Z, A))
        return self._finish(tape, acc)


class HybridLayer(GnnLayer):
    """Edge-varying factors on an important node set plus a global
    convolutional chain, each feature pair owning its scalars."""

    kind = "hybrid"

    def __init__(self, f_in, f_out, order, important, masked_pattern,
                 nonlinearity="relu", use_bias=True):
        super().__init__(f_in, f_out, order, nonlinearity, use_bias)
        self.important = np.asarray(important, dtype=np.int64)
        self.masked_pattern = masked_pattern
        n_imp = len(self.important)
        self.phi0 = Tensor(np.zeros((n_imp, f_in, f_out)), name="hybrid_phi0")
        self.phi = [Tensor(np.zeros((masked_pattern.nnz, f_in, f_out)),
                           name="hybrid_phi") for _ in range(order)]
        self.mixing = self._make_mixing(order + 1)

    def params(self):
        named = [("hybrid_phi0", self.phi0)]
        named += [("hybrid_phi", t) for t in self.phi]
        named += [("mixing", t) for t in self.mixing]
        return named

    def forward(self, tape, ctx, X):
        conv = self._mix_chain(tape, ctx, X, self.mixing)
        Xi = ag.gather_rows(tape, X, self.important)
        Xp = ag.expand_last(tape, Xi)
        Z = ag.mul(tape, self.phi0, Xp)
        Z = ag.scatter_rows(tape, Z, self.important, ctx.n, trailing=2)
        acc = Z
        for vals in self.phi:
            Z = ag.spmm_pairwise(tape, vals, Z, self.masked_pattern)
            acc = ag.add(tape, acc, Z)
        ev = ag.sum_axis(tape, acc, axis=-2)
        return self._finish(tape, ag.add(tape, conv, ev))

    def describe(self):
        d = super().describe()
        d["important"] = self.important.tolist()
        return d


class ArmaLayer(GnnLayer):
    """Pole branches through truncated Jacobi recursions plus a direct
    polynomial chain; beta and gamma vary per feature pair."""

    kind = "arma"

    def __init__(self, f_in, f_out, n_poles, order, jacobi_order,
                 nonlinearity="relu", use_bias=True):
        super().__init__(f_in, f_out, order, nonlinearity, use_bias)
        self.n_poles = int(n_poles)
        self.jacobi_order = int(jacobi_order)
        self.beta = Tensor(np.zeros((n_poles, f_in, f_out)), name="arma_beta")
        self.gamma = Tensor(np.zeros((n_poles, f_in, f_out)), name="arma_gamma")
        self.mixing = self._make_mixing(order + 1)
        for t in self.mixing:
            t.name = "arma_alpha"

    def params(self):
        return ([("arma_beta", self.beta), ("arma_gamma", self.gamma)]
                + [("arma_alpha", t) for t in self.mixing])

    def _check_guard(self, ctx):
        d = ctx.diag
        gaps = np.abs(d[:, None] - self.gamma.value.reshape(-1)[None, :])
        bad = np.nonzero(np.min(gaps, axis=1) <= EPS_SING)[0]
        if len(bad):
            raise SingularDiagonal(int(bad[0]))

    def forward(self, tape, ctx, X):
        self._check_guard(ctx)
        acc = self._mix_chain(tape, ctx, X, self.mixing)
        Xp = ag.expand_last(tape, X)
        d_col = ctx.diag[:, None, None]
        for p in range(self.n_poles):
            gamma_p = ag.take_index(tape, self.gamma, p)
            beta_p = ag.take_index(tape, self.beta, p)
            rec = ag.reciprocal(tape, ag.sub(tape, d_col, gamma_p))
            c = ag.mul(tape, ag.mul(tape, beta_p, Xp), rec)
            rvals = ag.jacobi_shift_values(
                tape, gamma_p, ctx.off_values,
                ctx.diag[ctx.off_pattern.rows])
            U = Xp
            for _ in range(self.jacobi_order):
                U = ag.add(tape, c,
                           ag.spmm_pairwise(tape, rvals, U, ctx.off_pattern))
            acc = ag.add(tape, acc, ag.sum_axis(tape, U, axis=-2))
        return self._finish(tape, acc)

    def post_update(self, ctx):
        """Project gamma entries off the diagonal singularity guard."""
        d = ctx.diag
        flat = self.gamma.value.reshape(-1)
        for i, g in enumerate(flat):
            gaps = np.abs(d - g)
            j = int(np.argmin(gaps))
            if gaps[j] <= EPS_SING:
                flat[i] = d[j] + 1e-6 if g >= d[j] else d[j] - 1e-6

    def describe(self):
        d = super().describe()
        d["n_poles"] = self.n_poles
        d["jacobi_order"] = self.jacobi_order
        return d


class GcatLayer(GnnLayer):
    """Polynomial filter in a shift learned from the features by one
    attention head; ``include_k0=False`` with order 1 is the plain
    single-shift attention layer."""

    kind = "gcat"

    def __init__(self, f_in, f_out, order, nonlinearity="relu",
                 include_k0=True, weighted=False, slope=0.2, use_bias=True):
        super().__init__(f_in, f_out, order, nonlinearity, use_bias)
        self.include_k0 = include_k0
        self.weighted = weighted
        self.head = AttentionParams(f_in, f_out, slope)
        n_mix = order + 1 if include_k0 else order
        self.mixing = self._make_mixing(n_mix)

    def params(self):
        return self.head.params() + [("mixing", t) for t in self.mixing]

    def shift_values(self, tape, ctx, X):
        H = ag.matmul(tape, X, self.head.B)
        scores = ag.edge_score(tape, H, self.head.e, ctx.pattern,
                               self.head.slope)
        weights = ctx.weighted_vals if self.weighted else None
        return ag.support_softmax(tape, scores, ctx.pattern, weights=weights)

    def forward(self, tape, ctx, X):
        vals = self.shift_values(tape, ctx, X)
        mats = list(self.mixing)
        if self.include_k0:
            acc = ag.matmul(tape, X, mats.pop(0))
        else:
            acc = None
        Z = X
        for A in mats:
            Z = ag.spmm_values(tape, vals, Z, ctx.pattern)
            term = ag.matmul(tape, Z, A)
            acc = term if acc is None else ag.add(tape, acc, term)
        return self._finish(tape, acc)

    def describe(self):
        d = super().describe()
        d.update(include_k0=self.include_k0, weighted=self.weighted,
                 tied=self.head.tied)
        return d


class EdgeVaryingGatLayer(GnnLayer):
    """Edge-varying recursion whose per-order factors come from
    independent attention heads.

    phi0_mode "attention" scores the order-0 factor with its own head;
    "identity" starts the recursion from X and drops that head.
    """

    kind = "ev_gat"

    def __init__(self, f_in, f_out, order, nonlinearity="relu",
                 phi0_mode="attention", weighted=False, slope=0.2,
                 use_bias=True):
        super().__init__(f_in, f_out, order, nonlinearity, use_bias)
        if phi0_mode not in ("attention", "identity"):
            raise ValueError("phi0_mode must be 'attention' or 'identity'")
        self.phi0_mode = phi0_mode
        self.weighted = weighted
        n_heads = order + 1 if phi0_mode == "attention" else order
        self.heads = [AttentionParams(f_in, f_out, slope)
                      for _ in range(n_heads)]
        self.mixing = self._make_mixing(order + 1)

    def params(self):
        named = []
        for h in self.heads:
            named += h.params()
        return named + [("mixing", t) for t in self.mixing]

    def _head_values(self, tape, ctx, X, head):
        H = ag.matmul(tape, X, head.B)
        scores = ag.edge_score(tape, H, head.e, ctx.pattern, head.slope)
        weights = ctx.weighted_vals if self.weighted else None
        return ag.support_softmax(tape, scores, ctx.pattern, weights=weights)

    def forward(self, tape, ctx, X):
        heads = list(self.heads)
        if self.phi0_mode == "attention":
            vals0 = self._head_values(tape, ctx, X, heads.pop(0))
            Z = ag.spmm_values(tape, vals0, X, ctx.pattern)
        else:
            Z = X
        acc = ag.matmul(tape, Z, self.mixing[0])
        for head, A in zip(heads, self.mixing[1:]):
            vals = self._head_values(tape, ctx, X, head)
            Z = ag.spmm_values(tape, vals, Z, ctx.pattern)
            acc = ag.add(tape, acc, ag.matmul(tape, Z, A))
        return self._finish(tape, acc)

    def describe(self):
        d = super().describe()
        d.update(phi0_mode=self.phi0_mode, weighted=self.weighted,
                 tied=any(h.tied for h in self.heads))
        return d


class HybridGcatLayer(GnnLayer):
    """Convolutional chain in the graph shift plus an attention-built
    edge-varying chain, each with its own mixing matrices."""

    kind = "hybrid_gcat"

    def __init__(self, f_in, f_out, order, nonlinearity="relu",
                 phi0_mode="attention", weighted=False, slope=0.2,
                 use_bias=True):
        super().__init__(f_in, f_out, order, nonlinearity, use_bias)
        self.gat = EdgeVaryingGatLayer(f_in, f_out, order, "identity",
                                       phi0_mode=phi0_mode,
                                       weighted=weighted, slope=slope)
        self.mixing = self._make_mixing(order + 1)

    def params(self):
        return [("mixing", t) for t in self.mixing] + self.gat.params()

    def forward(self, tape, ctx, X):
        conv = self._mix_chain(tape, ctx, X, self.mixing)
        gat_part = self.gat.forward(tape, ctx, X)
        return self._finish(tape, ag.add(tape, conv, gat_part))

    def describe(self):
        d = super().describe()
        d["gat"] = self.gat.describe()
        return d


def tie_attention_to_mixing(layer):
    """Share the attention mixer storage with the layer's mixing matrices.

    The convolutional attention layer ties B to the order-1 matrix; the
    edge-varying variant ties head k to matrix k. Gradients accumulate
    into the shared tensor from both roles.
    """
    if isinstance(layer, GcatLayer):
        idx = 1 if layer.include_k0 else 0
        if idx >= len(layer.mixing):
            raise IncompatibleDims("no order-1 mixing matrix to share")
        target = layer.mixing[idx]
        if layer.head.B.shape != target.shape:
            raise IncompatibleDims("mixer and mixing matrix shapes differ")
        layer.head.B = target
        layer.head.tied = True
        return layer
    if isinstance(layer, EdgeVaryingGatLayer):
        offset = 0 if layer.phi0_mode == "attention" else 1
        for k, head in enumerate(layer.heads):
            target = layer.mixing[k + offset]
            if head.B.shape != target.shape:
                raise IncompatibleDims("mixer and mixing matrix shapes differ")
            head.B = target
            head.tied = True
        return layer
    if isinstance(layer, HybridGcatLayer):
        tie_attention_to_mixing(layer.gat)
        return layer
    raise IncompatibleDims(f"layer kind {layer.kind!r} has no attention head")


def untie_attention(layer):
    """Give every tied head back its own storage (values copied)."""
    if isinstance(layer, GcatLayer):
        heads = [layer.head]
    elif isinstance(layer, EdgeVaryingGatLayer):
        heads = layer.heads
    elif isinstance(layer, HybridGcatLayer):
        heads = layer.gat.heads
    else:
        raise IncompatibleDims(f"layer kind {layer.kind!r} has no attention head")
    for head in heads:
        if head.tied:
            head.B = Tensor(head.B.value.copy(), name="att_B")
            head.tied = False
    return layer


class Model:
    """Ordered layer stack with a fully connected readout.

    The readout flattens the N x F_L feature block to the C outputs
    ("flatten"), or averages over nodes first ("mean_pool").
    """

    def __init__(self, layers, n_nodes, n_outputs, output="softmax",
                 readout_mode="flatten"):
        for a, b in zip(layers[:-1], layers[1:]):
            if a.f_out != b.f_in:
                raise IncompatibleDims("adjacent layer features must chain")
        self.layers = list(layers)
        self.n_nodes = int(n_nodes)
        self.n_outputs = int(n_outputs)
        self.output = output
        self.readout_mode = readout_mode
        f_last = layers[-1].f_out if layers else 1
        in_dim = n_nodes * f_last if readout_mode == "flatten" else f_last
        self.readout_w = Tensor(np.zeros((in_dim, n_outputs)), name="readout_w")
        self.readout_b = Tensor(np.zeros(n_outputs), name="readout_b")

    def parameters(self):
        """Unique named tensors, tied storage listed once."""
        named = []
        seen = set()
        for i, layer in enumerate(self.layers):
            for name, t in layer.named_params():
                if id(t) not in seen:
                    seen.add(id(t))
                    named.append((f"L{i}.{name}", t))
        for name, t in (("readout_w", self.readout_w),
                        ("readout_b", self.readout_b)):
            if id(t) not in seen:
                seen.add(id(t))
                named.append((name, t))
        return named

    def param_count(self):
        return int(sum(t.size for _, t in self.parameters()))

    def zero_grad(self):
        for _, t in self.parameters():
            t.zero_grad()

    def post_update(self, ctx):
        for layer in self.layers:
            layer.post_update(ctx)

    def features(self, ctx, X0, tape=None):
        """Layer-stack output (the permutation-equivariance surface)."""
        tape = tape if tape is not None else Tape()
        Z = Tensor(np.asarray(X0, dtype=np.float64)) \
            if not isinstance(X0, Tensor) else X0
        for layer in self.layers:
            Z = layer.forward(tape, ctx, Z)
        return Z, tape

    def forward(self, ctx, X0):
        """Logits through the readout; returns (logits Tensor, tape)."""
        Z, tape = self.features(ctx, X0)
        if self.readout_mode == "flatten":
            v = Z.value
            flat_shape = v.shape[:-2] + (v.shape[-2] * v.shape[-1],)
            F = ag.reshape(tape, Z, flat_shape)
        elif self.readout_mode == "mean_pool":
            F = ag.scale(tape, ag.sum_axis(tape, Z, axis=-2),
                         1.0 / self.n_nodes)
        else:
            raise ValueError(f"unknown readout mode {self.readout_mode!r}")
        logits = ag.add(tape, ag.matmul(tape, F, self.readout_w),
                        self.readout_b)
        tape.output = logits
        return logits, tape

    def snapshot(self):
        return [t.value.copy() for _, t in self.parameters()]

    def restore(self, snap):
        for (_, t), v in zip(self.parameters(), snap):
            t.value = v.copy()


def forward(model, S, X0):
    """Run the model on a shift operator (or prepared context)."""
    ctx = S if isinstance(S, ShiftContext) else ShiftContext(S)
    return model.forward(ctx, X0)
