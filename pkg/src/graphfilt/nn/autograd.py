"""Reverse-mode gradient engine.

Every primitive computes its value eagerly on numpy arrays and records a
closure on the tape; running the tape backwards accumulates adjoints into
``Tensor.grad`` slots. Conventions:

* arrays are float64; leading axes are batch axes and broadcast freely,
* primitives accept a ``Tensor`` or a plain array for every operand and
  only Tensors receive gradients,
* sparse structure never densifies: parameters attached to a sparsity
  pattern get gradients only on their stored entries.
"""
from __future__ import annotations

import numpy as np

from ..errors import MissingTape
from ..sparse import (SparseMatrix, _segment_sums, csr_transpose_permutation,
                      spmm)


class Tensor:
    """Value with a gradient slot of the same shape."""

    __slots__ = ("value", "grad", "name")

    def __init__(self, value, name=""):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    @property
    def size(self):
        return self.value.size

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor({self.name or 'anon'}, shape={self.value.shape})"


class Tape:
    """Execution record of one forward pass."""

    def __init__(self):
        self._records = []
        self.output = None

    def record(self, fn):
        self._records.append(fn)

    def backward(self, output=None, output_grad=1.0):
        out = output if output is not None else self.output
        if out is None:
            raise MissingTape("tape has no recorded output")
        out.grad = np.broadcast_to(
            np.asarray(output_grad, dtype=np.float64), out.value.shape).copy()
        for fn in reversed(self._records):
            fn()


def backward(tape, loss_grad):
    """Drive the recorded forward pass backwards from d(loss)/d(output)."""
    if tape is None:
        raise MissingTape("no tape recorded for this forward pass")
    tape.backward(output_grad=loss_grad)


def _val(x):
    return x.value if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def _acc(x, g):
    if isinstance(x, Tensor):
        x.grad = g if x.grad is None else x.grad + g


def _unbroadcast(g, shape):
    """Sum an adjoint down to the shape the operand was broadcast from."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, s) in enumerate(zip(g.shape, shape))
                 if s == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


class Pattern:
    """CSR pattern shared by sparse primitives, with a cached transpose."""

    __slots__ = ("n_rows", "n_cols", "row_ptr", "col_idx", "rows", "_t")

    def __init__(self, n_rows, n_cols, row_ptr, col_idx):
        self.n_rows = int(n_rows)
        self.n_cols = int(n_cols)
        self.row_ptr = np.asarray(row_ptr, dtype=np.int64)
        self.col_idx = np.asarray(col_idx, dtype=np.int64)
        self.rows = np.repeat(np.arange(self.n_rows, dtype=np.int64),
                              np.diff(self.row_ptr))
        self._t = None

    @property
    def nnz(self):
        return len(self.col_idx)

    @classmethod
    def from_sparse(cls, S):
        return cls(S.n_rows, S.n_cols, S.row_ptr, S.col_idx)

    @classmethod
    def from_mask(cls, mask):
        return cls(mask.n, mask.n, mask.row_ptr, mask.col_idx)

    def transpose(self):
        if self._t is None:
            t_row_ptr, t_col, perm = csr_transpose_permutation(
                self.n_rows, self.n_cols, self.row_ptr, self.col_idx)
            self._t = (t_row_ptr, t_col, perm)
        return self._t

    def matrix(self, values):
        return SparseMatrix(self.n_rows, self.n_cols, self.row_ptr,
                            self.col_idx, values)


# ---------------------------------------------------------------------------
# dense primitives


def add(tape, a, b):
    av, bv = _val(a), _val(b)
    out = Tensor(av + bv)

    def back():
        if out.grad is None:
            return
        _acc(a, _unbroadcast(out.grad, av.shape))
        _acc(b, _unbroadcast(out.grad, bv.shape))

    tape.record(back)
    return out


def sub(tape, a, b):
    av, bv = _val(a), _val(b)
    out = Tensor(av - bv)

    def back():
        if out.grad is None:
            return
        _acc(a, _unbroadcast(out.grad, av.shape))
        _acc(b, _unbroadcast(-out.grad, bv.shape))

    tape.record(back)
    return out


def mul(tape, a, b):
    av, bv = _val(a), _val(b)
    out = Tensor(av * bv)

    def back():
        if out.grad is None:
            return
        _acc(a, _unbroadcast(out.grad * bv, av.shape))
        _acc(b, _unbroadcast(out.grad * av, bv.shape))

    tape.record(back)
    return out


def scale(tape, a, factor):
    av = _val(a)
    out = Tensor(av * float(factor))

    def back():
        if out.grad is None:
            return
        _acc(a, out.grad * float(factor))

    tape.record(back)
    return out


def reciprocal(tape, a):
    av = _val(a)
    inv = 1.0 / av
    out = Tensor(inv)

    def back():
        if out.grad is None:
            return
        _acc(a, -out.grad * inv * inv)

    tape.record(back)
    return out


def matmul(tape, a, b):
    """a @ b with a of shape (..., f) or (..., n, f) and b (f, g) or (f,)."""
    av, bv = _val(a), _val(b)
    out = Tensor(av @ bv)

    def back():
        if out.grad is None:
            return
        g = out.grad
        if bv.ndim == 1 and av.ndim == 1:
            _acc(a, g * bv)
            _acc(b, g * av)
        elif bv.ndim == 1:
            _acc(a, g[..., None] * bv)
            _acc(b, g.reshape(-1) @ av.reshape(-1, av.shape[-1]))
        elif av.ndim == 1:
            _acc(a, g @ bv.T)
            _acc(b, np.outer(av, g))
        else:
            _acc(a, g @ bv.T)
            # sum every leading batch axis into the (f, g) adjoint
            af = av.reshape(-1, av.shape[-1])
            gf = g.reshape(-1, g.shape[-1])
            _acc(b, af.T @ gf)

    tape.record(back)
    return out


def reshape(tape, a, shape):
    av = _val(a)
    out = Tensor(av.reshape(shape))

    def back():
        if out.grad is None:
            return
        _acc(a, out.grad.reshape(av.shape))

    tape.record(back)
    return out


def expand_last(tape, a):
    """Append a trailing unit axis (view used to broadcast feature pairs)."""
    av = _val(a)
    out = Tensor(av[..., None])

    def back():
        if out.grad is None:
            return
        _acc(a, out.grad[..., 0])

    tape.record(back)
    return out


def sum_axis(tape, a, axis):
    av = _val(a)
    out = Tensor(av.sum(axis=axis))

    def back():
        if out.grad is None:
            return
        _acc(a, np.broadcast_to(np.expand_dims(out.grad, axis), av.shape).copy())

    tape.record(back)
    return out


def take_index(tape, a, index):
    """Select a leading-axis slice a[index] of a parameter tensor."""
    av = _val(a)
    out = Tensor(av[index])

    def back():
        if out.grad is None:
            return
        g = np.zeros_like(av)
        g[index] = out.grad
        _acc(a, g)

    tape.record(back)
    return out


def gather_rows(tape, a, idx):
    """a[..., idx, :] for unique row indices."""
    av = _val(a)
    out = Tensor(av[..., idx, :])

    def back():
        if out.grad is None:
            return
        g = np.zeros_like(av)
        g[..., idx, :] = out.grad
        _acc(a, g)

    tape.record(back)
    return out


def scatter_rows(tape, a, idx, n_rows, trailing=1):
    """Place rows at unique indices of an otherwise-zero node axis.

    ``trailing`` counts the feature axes after the node axis: 1 for
    (..., rows, F) inputs, 2 for pairwise (..., rows, F, G) inputs.
    """
    av = _val(a)
    axis = av.ndim - 1 - trailing
    shape = list(av.shape)
    shape[axis] = n_rows
    buf = np.zeros(shape)
    sl = [slice(None)] * av.ndim
    sl[axis] = idx
    buf[tuple(sl)] = av
    out = Tensor(buf)

    def back():
        if out.grad is None:
            return
        _acc(a, out.grad[tuple(sl)])

    tape.record(back)
    return out


def activation(tape, a, kind, slope=0.2):
    av = _val(a)
    if kind == "identity":
        factor = np.ones_like(av)
        out = Tensor(av.copy())
    elif kind == "relu":
        factor = (av > 0).astype(np.float64)
        out = Tensor(av * factor)
    elif kind == "leaky_relu":
        factor = np.where(av > 0, 1.0, slope)
        out = Tensor(av * factor)
    else:
        raise ValueError(f"unknown nonlinearity {kind!r}")

    def back():
        if out.grad is None:
            return
        _acc(a, out.grad * factor)

    tape.record(back)
    return out


def block_mix(tape, x, a, block_of_node):
    """Row-wise mixing with per-block matrices.

    x: (..., n, f); a: (n_blocks, f, g); row i multiplies a[block[i]].
    """
    xv, av = _val(x), _val(a)
    a_exp = av[block_of_node]
    out = Tensor(np.einsum("...nf,nfg->...ng", xv, a_exp))

    def back():
        if out.grad is None:
            return
        g = out.grad
        _acc(x, np.einsum("...ng,nfg->...nf", g, a_exp))
        xb = xv.reshape(-1, xv.shape[-2], xv.shape[-1])
        gb = g.reshape(-1, g.shape[-2], g.shape[-1])
        contrib = np.einsum("bnf,bng->nfg", xb, gb)
        da = np.zeros_like(av)
        np.add.at(da, block_of_node, contrib)
        _acc(a, da)

    tape.record(back)
    return out


def jacobi_shift_values(tape, gamma, s_off, d_off_rows):
    """Entries of R(gamma) = -(D - gamma I)^{-1}(S - D), per feature pair.

    gamma: scalar or (f, g); s_off and d_off_rows: (nnz,) constants giving
    the stored off-diagonal values and the diagonal of their rows. The
    gamma adjoint is the analytic -(D - gamma I)^{-2}(S - D) contraction.
    """
    gv = np.atleast_2d(_val(gamma))
    s = s_off[:, None, None]
    denom = d_off_rows[:, None, None] - gv
    out = Tensor(-s / denom)

    def back():
        if out.grad is None:
            return
        dgam = (out.grad * (-s / (denom * denom))).sum(axis=0)
        _acc(gamma, _unbroadcast(dgam, _val(gamma).shape))

    tape.record(back)
    return out


# ---------------------------------------------------------------------------
# sparse primitives


def spmm_const(tape, S, x, S_transpose=None):
    """Fixed sparse matrix times tensor; gradient flows to x only.

    Callers in a loop should pass the precomputed transpose.
    """
    xv = _val(x)
    if xv.ndim < 2:
        raise ValueError("spmm_const expects (..., n, f) input")
    out = Tensor(spmm(S, xv))
    St = S_transpose if S_transpose is not None else S.transpose()

    def back():
        if out.grad is None:
            return
        _acc(x, spmm(St, out.grad))

    tape.record(back)
    return out


def spmm_values(tape, vals, x, pattern):
    """Sparse product where the stored values are themselves an operand.

    vals: (nnz,) shared across the batch, or (..., nnz) per sample.
    x:    (..., n, f).
    """
    vv, xv = _val(vals), _val(x)
    contrib = vv[..., :, None] * xv[..., pattern.col_idx, :]
    out = Tensor(_segment_sums(contrib, pattern.row_ptr, axis=-2))
    t_row_ptr, t_col, perm = pattern.transpose()

    def back():
        if out.grad is None:
            return
        g = out.grad
        gv = (g[..., pattern.rows, :] * xv[..., pattern.col_idx, :]).sum(axis=-1)
        _acc(vals, _unbroadcast(gv, vv.shape))
        vt = vv[..., perm]
        contrib_t = vt[..., :, None] * g[..., t_col, :]
        _acc(x, _segment_sums(contrib_t, t_row_ptr, axis=-2))

    tape.record(back)
    return out


def spmm_pairwise(tape, vals, z, pattern):
    """Per-feature-pair sparse product.

    vals: (nnz, f, g); z: (..., n, f, g); the entry axis sits at -3.
    """
    vv, zv = _val(vals), _val(z)
    contrib = vv * zv[..., pattern.col_idx, :, :]
    out = Tensor(_segment_sums(contrib, pattern.row_ptr, axis=-3))
    t_row_ptr, t_col, perm = pattern.transpose()

    def back():
        if out.grad is None:
            return
        g = out.grad
        gv = g[..., pattern.rows, :, :] * zv[..., pattern.col_idx, :, :]
        _acc(vals, _unbroadcast(gv, vv.shape))
        contrib_t = vv[perm] * g[..., t_col, :, :]
        _acc(z, _segment_sums(contrib_t, t_row_ptr, axis=-3))

    tape.record(back)
    return out


# ---------------------------------------------------------------------------
# attention primitives


def edge_score(tape, h, e, pattern, slope):
    """LeakyReLU(e_left . h_i + e_right . h_j) per stored (i, j)."""
    hv, ev = _val(h), _val(e)
    f_out = hv.shape[-1]
    own = hv @ ev[:f_out]
    other = hv @ ev[f_out:]
    pre = own[..., pattern.rows] + other[..., pattern.col_idx]
    factor = np.where(pre > 0, 1.0, slope)
    out = Tensor(pre * factor)
    t_row_ptr, t_col, perm = pattern.transpose()

    def back():
        if out.grad is None:
            return
        dpre = out.grad * factor
        d_own = _segment_sums(dpre, pattern.row_ptr, axis=-1)
        d_other = _segment_sums(dpre[..., perm], t_row_ptr, axis=-1)
        _acc(h, d_own[..., None] * ev[:f_out] + d_other[..., None] * ev[f_out:])
        hb = hv.reshape(-1, hv.shape[-2], hv.shape[-1])
        de_left = np.einsum("bn,bnf->f", d_own.reshape(-1, hv.shape[-2]), hb)
        de_right = np.einsum("bn,bnf->f", d_other.reshape(-1, hv.shape[-2]), hb)
        _acc(e, np.concatenate([de_left, de_right]))

    tape.record(back)
    return out


def support_softmax(tape, scores, pattern, weights=None):
    """Row-segment soft maximum with max subtraction; optional constant
    per-entry weights multiply the scores first."""
    sv = _val(scores)
    z = sv * weights if weights is not None else sv
    row_max = np.maximum.reduceat(z, pattern.row_ptr[:-1], axis=-1)
    shifted = np.exp(z - row_max[..., pattern.rows])
    denom = _segment_sums(shifted, pattern.row_ptr, axis=-1)
    vals = shifted / denom[..., pattern.rows]
    out = Tensor(vals)

    def back():
        if out.grad is None:
            return
        g = out.grad
        sdot = _segment_sums(g * vals, pattern.row_ptr, axis=-1)
        dz = vals * (g - sdot[..., pattern.rows])
        if weights is not None:
            dz = dz * weights
        _acc(scores, dz)

    tape.record(back)
    return out
