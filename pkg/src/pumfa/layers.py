"""Network building blocks.

Everything here is a pure function of (params, inputs) built on the tensor
engine. Parameter containers expose named_parameters()/named_buffers()
iterators that the optimizer and checkpoint code consume; names are
dot-joined paths.

Point positions are treated as constants: no gradient flows into the
coordinates used for KNN or relative-position encodings.
"""

import math

import numpy as np

from . import tensor as T
from .geometry import knn_graph
from .tensor import ShapeError, Tensor


def _uniform_init(rng, shape, fan_in, dtype):
    bound = math.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Linear:
    def __init__(self, f_in, f_out, rng, bias=True, zero=False, dtype=T.DEFAULT_DTYPE):
        if zero:
            w = np.zeros((f_in, f_out), dtype=dtype)
        else:
            w = _uniform_init(rng, (f_in, f_out), f_in, dtype)
        self.W = T.parameter(w)
        self.b = None
        if bias:
            b = np.zeros(f_out, dtype) if zero else _uniform_init(rng, (f_out,), f_in, dtype)
            self.b = T.parameter(b)

    def __call__(self, x):
        out = x @ self.W
        if self.b is not None:
            out = out + self.b
        return out

    def named_parameters(self, prefix):
        yield f"{prefix}.W", self.W
        if self.b is not None:
            yield f"{prefix}.b", self.b


class MLP2:
    """Two linear maps with a ReLU between; hidden width = output width."""

    def __init__(self, f_in, f_out, rng, zero_last=False, dtype=T.DEFAULT_DTYPE):
        self.l1 = Linear(f_in, f_out, rng, dtype=dtype)
        self.l2 = Linear(f_out, f_out, rng, zero=zero_last, dtype=dtype)

    def __call__(self, x):
        return self.l2(T.relu(self.l1(x)))

    def named_parameters(self, prefix):
        yield from self.l1.named_parameters(f"{prefix}.l1")
        yield from self.l2.named_parameters(f"{prefix}.l2")


# ---------------------------------------------------------------------------
# point transformer layer


class PTLayerParams:
    """Projections for one point-transformer layer.

    phi/psi/alpha are bias-free feature maps; gamma turns the subtraction
    relation into per-channel attention logits; theta encodes relative
    positions. ``zero_value_path`` zeroes alpha and theta's output layer so
    the layer emits exactly zero at init while keeping gradients alive.
    """

    def __init__(self, f_in, f_out, rng, zero_value_path=False, dtype=T.DEFAULT_DTYPE):
        self.f_in = f_in
        self.f_out = f_out
        w_alpha = (
            np.zeros((f_in, f_out), dtype=dtype)
            if zero_value_path
            else _uniform_init(rng, (f_in, f_out), f_in, dtype)
        )
        self.phi = T.parameter(_uniform_init(rng, (f_in, f_out), f_in, dtype))
        self.psi = T.parameter(_uniform_init(rng, (f_in, f_out), f_in, dtype))
        self.alpha = T.parameter(w_alpha)
        self.gamma = MLP2(f_out, f_out, rng, dtype=dtype)
        self.theta = MLP2(3, f_out, rng, zero_last=zero_value_path, dtype=dtype)

    def named_parameters(self, prefix):
        yield f"{prefix}.phi", self.phi
        yield f"{prefix}.psi", self.psi
        yield f"{prefix}.alpha", self.alpha
        yield from self.gamma.named_parameters(f"{prefix}.gamma")
        yield from self.theta.named_parameters(f"{prefix}.theta")


def pt_layer(features, positions, params, patch_size, neighbor_idx=None):
    """Vector self-attention over each point's KNN neighborhood.

    out_i = sum_j softmax_j(gamma(phi(f_i) - psi(f_j) + theta(p_i - p_j)))
            * (alpha(f_j) + theta(p_i - p_j))
    with the softmax normalized per channel across the patch_size neighbors.
    ``neighbor_idx`` lets callers reuse one KNN graph across layers.
    """
    n = features.shape[0]
    if positions.shape[0] != n:
        raise ShapeError(f"{n} feature rows vs {positions.shape[0]} positions")
    if patch_size > n:
        raise ValueError(f"patch_size {patch_size} exceeds {n} points")
    if neighbor_idx is None:
        neighbor_idx = knn_graph(positions, patch_size)

    k = patch_size
    f = params.f_out
    dtype = features.dtype
    # weight matmuls run on flat (n*k, .) views: one large GEMM each instead
    # of n stacked slivers
    rel = (positions[:, None, :] - positions[neighbor_idx]).astype(dtype)
    pos_enc = params.theta(Tensor(rel.reshape(n * k, 3))).reshape((n, k, f))

    phi_f = (features @ params.phi).reshape((n, 1, f))
    psi_n = T.gather(features @ params.psi, neighbor_idx)
    alpha_n = T.gather(features @ params.alpha, neighbor_idx)

    logits = (phi_f - psi_n + pos_enc).reshape((n * k, f))
    attn = T.softmax(params.gamma(logits).reshape((n, k, f)), axis=1)
    return T.tsum(attn * (alpha_n + pos_enc), axis=1)


# ---------------------------------------------------------------------------
# multihead attention


class AttentionParams:
    """Fused per-head projections; pool width must divide by head count."""

    def __init__(self, f_q, f_p, heads, rng, dtype=T.DEFAULT_DTYPE):
        if f_p % heads != 0:
            raise ShapeError(f"pool width {f_p} not divisible by {heads} heads")
        self.f_q = f_q
        self.f_p = f_p
        self.heads = heads
        self.Wq = T.parameter(_uniform_init(rng, (f_q, f_p), f_q, dtype))
        self.Wk = T.parameter(_uniform_init(rng, (f_p, f_p), f_p, dtype))
        self.Wv = T.parameter(_uniform_init(rng, (f_p, f_p), f_p, dtype))
        self.Wo = T.parameter(_uniform_init(rng, (f_p, f_p), f_p, dtype))

    def named_parameters(self, prefix):
        for name in ("Wq", "Wk", "Wv", "Wo"):
            yield f"{prefix}.{name}", getattr(self, name)


def multihead_attention(query, pool, params, capture=None):
    """Scaled dot-product attention; output width equals the pool width.

    Self-attention is the same call with query is pool. ``capture``, when a
    list, receives a copy of the (heads, n_q, n_p) softmax scores; the copy
    keeps the capture path observational.
    """
    n_q = query.shape[0]
    n_p = pool.shape[0]
    h = params.heads
    d = params.f_p // h

    def split(x, rows):
        return x.reshape((rows, h, d)).transpose((1, 0, 2))

    q = split(query @ params.Wq, n_q)
    k = split(pool @ params.Wk, n_p)
    v = split(pool @ params.Wv, n_p)
    scores = (q @ k.transpose((0, 2, 1))) * (1.0 / math.sqrt(d))
    attn = T.softmax(scores, axis=2)
    if capture is not None:
        capture.append(np.array(attn.data, copy=True))
    ctx = (attn @ v).transpose((1, 0, 2)).reshape((n_q, params.f_p))
    return ctx @ params.Wo


# ---------------------------------------------------------------------------
# batch norm


class BatchNorm:
    """Per-channel normalization over all leading axes.

    Modes: "train" uses batch statistics and updates the running ones,
    "eval" uses the stored running statistics, "batch" uses batch
    statistics without touching state (for forward passes of untrained
    models). Training on an explicit batch axis of size 1 is rejected;
    a 2-D (points, channels) input is a single cloud and is fine.
    """

    def __init__(self, channels, eps=1e-5, momentum=0.1, dtype=T.DEFAULT_DTYPE):
        self.eps = eps
        self.momentum = momentum
        self.gamma = T.parameter(np.ones(channels, dtype=dtype))
        self.beta = T.parameter(np.zeros(channels, dtype=dtype))
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.num_batches = np.zeros(1, dtype=dtype)

    def __call__(self, x, mode):
        if x.ndim not in (2, 3):
            raise ShapeError(f"batch_norm expects 2-D or 3-D input, got {x.shape}")
        if mode not in ("train", "eval", "batch"):
            raise ValueError(f"unknown batch_norm mode {mode!r}")
        if mode == "train" and x.ndim == 3 and x.shape[0] == 1:
            raise ValueError("training batch of size 1 is rejected; use mode='batch'")

        if mode == "eval":
            if self.num_batches[0] == 0:
                raise RuntimeError("batch_norm eval mode before any training batch")
            mean = Tensor(self.running_mean.astype(x.dtype))
            var = Tensor(self.running_var.astype(x.dtype))
        else:
            flat = x.reshape((-1, x.shape[-1]))
            mean = T.tmean(flat, axis=0)
            var = T.tmean(T.power(flat - mean, 2.0), axis=0)
            if mode == "train":
                m = self.momentum
                self.running_mean = (
                    (1 - m) * self.running_mean + m * mean.data.astype(self.running_mean.dtype)
                )
                self.running_var = (
                    (1 - m) * self.running_var + m * var.data.astype(self.running_var.dtype)
                )
                self.num_batches[0] += 1
        inv = T.power(T.sqrt(var + self.eps), -1.0)
        return (x - mean) * inv * self.gamma + self.beta

    def named_parameters(self, prefix):
        yield f"{prefix}.gamma", self.gamma
        yield f"{prefix}.beta", self.beta

    def named_buffers(self, prefix):
        yield f"{prefix}.running_mean", self.running_mean
        yield f"{prefix}.running_var", self.running_var
        yield f"{prefix}.num_batches", self.num_batches

    def load_buffer(self, name, value):
        current = getattr(self, name)
        if current.shape != value.shape:
            raise ValueError(f"buffer {name} shape {value.shape} != {current.shape}")
        setattr(self, name, value.astype(current.dtype))


# ---------------------------------------------------------------------------
# feed forward and GCRA


class FeedForwardParams:
    """Linear -> ReLU -> Linear with hidden width max(f_in, f_out)."""

    def __init__(self, f_in, f_out, rng, dtype=T.DEFAULT_DTYPE):
        hidden = max(f_in, f_out)
        self.l1 = Linear(f_in, hidden, rng, dtype=dtype)
        self.l2 = Linear(hidden, f_out, rng, dtype=dtype)

    def __call__(self, x):
        return self.l2(T.relu(self.l1(x)))

    def named_parameters(self, prefix):
        yield from self.l1.named_parameters(f"{prefix}.l1")
        yield from self.l2.named_parameters(f"{prefix}.l2")


def feed_forward(x, params):
    return params(x)


class GCRAParams:
    def __init__(self, f_q, f_p, f_out, heads, rng, dtype=T.DEFAULT_DTYPE):
        self.attn = AttentionParams(f_q, f_p, heads, rng, dtype=dtype)
        self.bn = BatchNorm(f_p, dtype=dtype)
        self.ff = FeedForwardParams(f_p, f_out, rng, dtype=dtype)

    def named_parameters(self, prefix):
        yield from self.attn.named_parameters(f"{prefix}.attn")
        yield from self.bn.named_parameters(f"{prefix}.bn")
        yield from self.ff.named_parameters(f"{prefix}.ff")

    def named_buffers(self, prefix):
        yield from self.bn.named_buffers(f"{prefix}.bn")


def gcra(query, pool, params, mode="batch", capture=None):
    """Refine the pool with cross-attention from the query features.

    out = feed_forward(batch_norm(pool + attention(query, pool)))
    """
    refined = pool + multihead_attention(query, pool, params.attn, capture=capture)
    return params.ff(params.bn(refined, mode))


# ---------------------------------------------------------------------------
# pixel shuffle


def pixel_shuffle(x, r):
    """Reshape (n, r*c) -> (r*n, c): row i's r channel groups become its r
    contiguous child rows. Lossless; the inverse is reshape back."""
    n, f = x.shape
    if f % r != 0:
        raise ShapeError(f"channel count {f} not divisible by r={r}")
    return x.reshape((n * r, f // r))
