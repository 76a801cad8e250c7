"""Differentiable kernel vocabulary.

The set is deliberately fixed to what the forecasting architecture needs:
linear maps, 1D cross-correlation, diffusion convolution over a learned
adjacency, row softmax, the VAE reparameterization and Gaussian KL, ReLU,
L1/L2 reductions and concatenation. Everything runs in 64-bit floats so
gradients can be checked against central finite differences.
"""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateDegreeError, DimensionError, NumericError
from .tensor import Tensor, as_tensor, from_op, unbroadcast

# -- elementwise arithmetic ---------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(unbroadcast(g, a.shape))
        if b.requires_grad:
            b.accumulate_grad(unbroadcast(g, b.shape))

    return from_op(data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data - b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(unbroadcast(g, a.shape))
        if b.requires_grad:
            b.accumulate_grad(unbroadcast(-g, b.shape))

    return from_op(data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b.accumulate_grad(unbroadcast(g * a.data, b.shape))

    return from_op(data, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data / b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(unbroadcast(g / b.data, a.shape))
        if b.requires_grad:
            b.accumulate_grad(unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return from_op(data, (a, b), backward)


def neg(a) -> Tensor:
    a = as_tensor(a)

    def backward(g):
        a.accumulate_grad(-g)

    return from_op(-a.data, (a,), backward)


def scale(a, c: float) -> Tensor:
    a = as_tensor(a)
    c = float(c)

    def backward(g):
        a.accumulate_grad(g * c)

    return from_op(a.data * c, (a,), backward)


def add_const(a, c: float) -> Tensor:
    a = as_tensor(a)

    def backward(g):
        a.accumulate_grad(g)

    return from_op(a.data + float(c), (a,), backward)


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0.0

    def backward(g):
        a.accumulate_grad(g * mask)

    return from_op(np.where(mask, a.data, 0.0), (a,), backward)


def log(a) -> Tensor:
    a = as_tensor(a)

    def backward(g):
        a.accumulate_grad(g / a.data)

    return from_op(np.log(a.data), (a,), backward)


# -- shape manipulation --------------------------------------------------


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    shape = tuple(shape)

    def backward(g):
        a.accumulate_grad(g.reshape(a.shape))

    return from_op(a.data.reshape(shape), (a,), backward)


def transpose_last2(a) -> Tensor:
    a = as_tensor(a)

    def backward(g):
        a.accumulate_grad(np.swapaxes(g, -1, -2))

    return from_op(np.swapaxes(a.data, -1, -2), (a,), backward)


def concat(a, b, axis: int) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    n = a.shape[axis]

    def backward(g):
        ga, gb = np.split(g, [n], axis=axis)
        if a.requires_grad:
            a.accumulate_grad(ga)
        if b.requires_grad:
            b.accumulate_grad(gb)

    return from_op(np.concatenate([a.data, b.data], axis=axis), (a, b), backward)


def index_last(a, i: int) -> Tensor:
    """Select index ``i`` along the last axis."""
    a = as_tensor(a)
    i = int(i)

    def backward(g):
        full = np.zeros_like(a.data)
        full[..., i] = g
        a.accumulate_grad(full)

    return from_op(np.ascontiguousarray(a.data[..., i]), (a,), backward)


def pad_last(a, left: int, right: int) -> Tensor:
    """Zero-pad the last axis; callers use this for same-length convs."""
    a = as_tensor(a)
    pads = [(0, 0)] * (a.ndim - 1) + [(left, right)]

    def backward(g):
        sl = [slice(None)] * (a.ndim - 1) + [slice(left, g.shape[-1] - right)]
        a.accumulate_grad(g[tuple(sl)])

    return from_op(np.pad(a.data, pads), (a,), backward)


# -- reductions ------------------------------------------------------------


def sum_all(a) -> Tensor:
    a = as_tensor(a)

    def backward(g):
        a.accumulate_grad(np.full_like(a.data, float(g)))

    return from_op(np.asarray(a.data.sum()), (a,), backward)


def mean_all(a) -> Tensor:
    return scale(sum_all(a), 1.0 / max(as_tensor(a).size, 1))


def sum_last(a, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    data = a.data.sum(axis=-1, keepdims=keepdims)

    def backward(g):
        gg = g if keepdims else np.expand_dims(g, -1)
        a.accumulate_grad(np.broadcast_to(gg, a.shape).copy())

    return from_op(data, (a,), backward)


def sum_abs_diff(a, b) -> Tensor:
    """Total L1 deviation between two same-shape tensors (scalar)."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise DimensionError(f"sum_abs_diff shapes differ: {a.shape} vs {b.shape}")
    diff = a.data - b.data

    def backward(g):
        s = np.sign(diff) * float(g)
        if a.requires_grad:
            a.accumulate_grad(s)
        if b.requires_grad:
            b.accumulate_grad(-s)

    return from_op(np.asarray(np.abs(diff).sum()), (a, b), backward)


def sum_sq_diff(a, b) -> Tensor:
    """Total squared deviation between two same-shape tensors (scalar)."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise DimensionError(f"sum_sq_diff shapes differ: {a.shape} vs {b.shape}")
    diff = a.data - b.data

    def backward(g):
        s = 2.0 * diff * float(g)
        if a.requires_grad:
            a.accumulate_grad(s)
        if b.requires_grad:
            b.accumulate_grad(-s)

    return from_op(np.asarray((diff * diff).sum()), (a, b), backward)


def mae(a, b) -> Tensor:
    """Mean absolute error over all elements."""
    return scale(sum_abs_diff(a, b), 1.0 / max(as_tensor(a).size, 1))


def mse(a, b) -> Tensor:
    """Mean squared error over all elements."""
    return scale(sum_sq_diff(a, b), 1.0 / max(as_tensor(a).size, 1))


# -- linear algebra ---------------------------------------------------------


def matmul(a, b) -> Tensor:
    """np.matmul semantics, including batched stacks of matrices."""
    a, b = as_tensor(a), as_tensor(b)
    data = np.matmul(a.data, b.data)

    def backward(g):
        if a.requires_grad:
            ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
            a.accumulate_grad(unbroadcast(ga, a.shape))
        if b.requires_grad:
            gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
            b.accumulate_grad(unbroadcast(gb, b.shape))

    return from_op(data, (a, b), backward)


def apply_linear(x, weight, bias) -> Tensor:
    """Affine map on the last axis: out[..., j] = sum_i x[..., i] W[i, j] + b[j]."""
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    if weight.ndim != 2 or bias.ndim != 1 or bias.shape[0] != weight.shape[1]:
        raise DimensionError(
            f"linear expects weight [d_in, d_out] and bias [d_out], got "
            f"{weight.shape} / {bias.shape}"
        )
    if x.shape[-1] != weight.shape[0]:
        raise DimensionError(
            f"linear input width {x.shape[-1]} != weight d_in {weight.shape[0]}"
        )
    return add(matmul(x, weight), bias)


def conv1d(x, kernel) -> Tensor:
    """Cross-correlation, stride 1, no implicit padding.

    x: [batch, c_in, length]; kernel: [c_out, c_in, k]; output length is
    ``length - k + 1``.
    """
    x, kernel = as_tensor(x), as_tensor(kernel)
    if x.ndim != 3 or kernel.ndim != 3:
        raise DimensionError("conv1d expects x [b, c_in, len] and kernel [c_out, c_in, k]")
    if x.shape[1] != kernel.shape[1]:
        raise DimensionError(
            f"conv1d channel mismatch: input {x.shape[1]} vs kernel {kernel.shape[1]}"
        )
    k = kernel.shape[2]
    if x.shape[2] < k:
        raise DimensionError(f"conv1d input length {x.shape[2]} < kernel size {k}")
    windows = np.lib.stride_tricks.sliding_window_view(x.data, k, axis=2)
    data = np.einsum("oik,bilk->bol", kernel.data, windows, optimize=True)

    def backward(g):
        if kernel.requires_grad:
            gk = np.einsum("bol,bilk->oik", g, windows, optimize=True)
            kernel.accumulate_grad(gk)
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            l_out = g.shape[2]
            for j in range(k):
                gx[:, :, j : j + l_out] += np.einsum(
                    "bol,oi->bil", g, kernel.data[:, :, j], optimize=True
                )
            x.accumulate_grad(gx)

    return from_op(data, (x, kernel), backward)


def pairwise_concat(e) -> Tensor:
    """All ordered node pairs: out[..., i, j, :] = [e_i ; e_j].

    e: [..., N, d] -> [..., N, N, 2d]. Feeds the edge-scoring linear map of
    the graph structure learner.
    """
    e = as_tensor(e)
    n, d = e.shape[-2], e.shape[-1]
    batch = e.shape[:-2]
    left = np.broadcast_to(e.data[..., :, None, :], (*batch, n, n, d))
    right = np.broadcast_to(e.data[..., None, :, :], (*batch, n, n, d))
    data = np.concatenate([left, right], axis=-1)

    def backward(g):
        ge = g[..., :d].sum(axis=-2) + g[..., d:].sum(axis=-3)
        e.accumulate_grad(ge)

    return from_op(data, (e,), backward)


# -- softmax / probabilistic kernels ----------------------------------------


def softmax_rows(logits) -> Tensor:
    """Softmax along the last axis, stabilised by per-row max subtraction."""
    logits = as_tensor(logits)
    if not np.isfinite(logits.data).all():
        raise NumericError("softmax_rows received non-finite logits")
    shifted = logits.data - logits.data.max(axis=-1, keepdims=True)
    ex = np.exp(shifted)
    data = ex / ex.sum(axis=-1, keepdims=True)

    def backward(g):
        dot = (g * data).sum(axis=-1, keepdims=True)
        logits.accumulate_grad((g - dot) * data)

    return from_op(data, (logits,), backward)


def reparameterize(mean, log_var, noise) -> Tensor:
    """z = mean + exp(log_var / 2) * noise; gradient ignores the noise draw."""
    mean, log_var = as_tensor(mean), as_tensor(log_var)
    eps = noise.data if isinstance(noise, Tensor) else np.asarray(noise, dtype=np.float64)
    if mean.shape != log_var.shape:
        raise DimensionError("reparameterize: mean and log_var shapes differ")
    sigma = np.exp(0.5 * log_var.data)
    data = mean.data + sigma * eps

    def backward(g):
        if mean.requires_grad:
            mean.accumulate_grad(g)
        if log_var.requires_grad:
            log_var.accumulate_grad(g * 0.5 * sigma * eps)

    return from_op(data, (mean, log_var), backward)


def gaussian_kl_rows(q_mean, q_log_var, p_mean, p_log_var) -> Tensor:
    """KL(q || p) between diagonal Gaussians, summed over the last axis.

    Inputs broadcast against each other; the output drops the feature axis,
    leaving one value per leading row (or a 0-d scalar for vector inputs).
    """
    qm, ql = as_tensor(q_mean), as_tensor(q_log_var)
    pm, pl = as_tensor(p_mean), as_tensor(p_log_var)
    bqm, bql, bpm, bpl = np.broadcast_arrays(qm.data, ql.data, pm.data, pl.data)
    var_ratio = np.exp(bql - bpl)
    dmean = bqm - bpm
    inv_pvar = np.exp(-bpl)
    per_dim = 0.5 * (var_ratio + dmean * dmean * inv_pvar - 1.0 + (bpl - bql))
    data = per_dim.sum(axis=-1)

    def backward(g):
        gg = np.expand_dims(g, -1) if per_dim.ndim > np.ndim(g) else g
        if qm.requires_grad:
            qm.accumulate_grad(unbroadcast(gg * dmean * inv_pvar, qm.shape))
        if pm.requires_grad:
            pm.accumulate_grad(unbroadcast(-gg * dmean * inv_pvar, pm.shape))
        if ql.requires_grad:
            ql.accumulate_grad(unbroadcast(gg * 0.5 * (var_ratio - 1.0), ql.shape))
        if pl.requires_grad:
            pl.accumulate_grad(
                unbroadcast(
                    gg * 0.5 * (1.0 - var_ratio - dmean * dmean * inv_pvar), pl.shape
                )
            )

    return from_op(data, (qm, ql, pm, pl), backward)


def gaussian_kl(q_mean, q_log_var, p_mean, p_log_var) -> Tensor:
    """Total KL(q || p) over all rows and dimensions (scalar)."""
    rows = gaussian_kl_rows(q_mean, q_log_var, p_mean, p_log_var)
    if rows.ndim == 0:
        return rows
    return sum_all(rows)


# -- graph diffusion ---------------------------------------------------------


def diffusion_convolution(adjacency, signal, weights) -> Tensor:
    """Graph diffusion layer over out/in-degree-normalised transitions.

    out[..., n, q] = sum_p sum_m ( W[q,p,m,0] * (D_O^-1 A)^(m+1)
                                 + W[q,p,m,1] * (D_I^-1 A^T)^(m+1) ) X[..., n, p]

    adjacency: [..., N, N] non-negative with positive row and column sums;
    signal: [..., N, D]; weights: [D_out, D, M, 2].
    """
    adj, x, lam = as_tensor(adjacency), as_tensor(signal), as_tensor(weights)
    if lam.ndim != 4 or lam.shape[3] != 2:
        raise DimensionError(f"diffusion weights must be [D_out, D, M, 2], got {lam.shape}")
    if adj.shape[-1] != adj.shape[-2]:
        raise DimensionError("adjacency must be square")
    if x.shape[-2] != adj.shape[-1] or x.shape[-1] != lam.shape[1]:
        raise DimensionError(
            f"diffusion shapes disagree: adj {adj.shape}, signal {x.shape}, "
            f"weights {lam.shape}"
        )
    if np.any(adj.data < 0.0):
        raise DegenerateDegreeError("adjacency entries must be non-negative")
    row_sums = adj.data.sum(axis=-1)
    col_sums = adj.data.sum(axis=-2)
    if np.any(row_sums <= 0.0) or np.any(col_sums <= 0.0):
        raise DegenerateDegreeError(
            "adjacency has a zero row or column sum; add self-loops before diffusing"
        )

    m_steps = lam.shape[2]
    trans_out = div(adj, sum_last(adj, keepdims=True))
    adj_t = transpose_last2(adj)
    trans_in = div(adj_t, sum_last(adj_t, keepdims=True))
    lam_out, lam_in = index_last(lam, 0), index_last(lam, 1)

    out = None
    forward_o, forward_i = x, x
    for m in range(m_steps):
        forward_o = matmul(trans_out, forward_o)
        forward_i = matmul(trans_in, forward_i)
        term = add(
            matmul(forward_o, transpose_last2(index_last(lam_out, m))),
            matmul(forward_i, transpose_last2(index_last(lam_in, m))),
        )
        out = term if out is None else add(out, term)
    return out


# -- operator sugar -----------------------------------------------------------

Tensor.__add__ = lambda self, other: add(self, other)
Tensor.__radd__ = lambda self, other: add(other, self)
Tensor.__sub__ = lambda self, other: sub(self, other)
Tensor.__rsub__ = lambda self, other: sub(other, self)
Tensor.__mul__ = lambda self, other: mul(self, other)
Tensor.__rmul__ = lambda self, other: mul(other, self)
Tensor.__neg__ = lambda self: neg(self)
Tensor.__matmul__ = lambda self, other: matmul(self, other)
