"""Full upsampling network: multi-scale feature extraction, coarse point
generation, global self-attention, and cross-attention refinement.

The forward pass takes one patch of N points (no batch axis) and produces
rN points: Q = Q' + Q_delta, where Q' is the coarse duplicate-plus-offset
cloud and Q_delta the refinement emitted by the decoder.
"""

from dataclasses import dataclass, field, fields

import numpy as np

from . import tensor as T
from .geometry import knn_graph
from .layers import (
    AttentionParams,
    GCRAParams,
    Linear,
    PTLayerParams,
    gcra,
    multihead_attention,
    pixel_shuffle,
    pt_layer,
)
from .tensor import ShapeError, Tensor


@dataclass
class ModelConfig:
    n: int = 256          # input patch size
    r: int = 4            # upsampling ratio
    h: int = 4            # depth: MFE layers and GCRA blocks
    c: int = 16           # MFE base channels
    k: int = 4            # MFE channel expansion per layer
    c_prime: int = 32     # CPG base channels
    k_prime: int = 8      # CPG/SAB expansion
    heads: int = 8
    patch_size: int = 20  # KNN size inside PT layers
    sab_depth: int = 1

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 1:
                raise ValueError(f"{f.name} must be positive")
        if self.patch_size > self.n:
            raise ValueError(f"patch_size {self.patch_size} exceeds n {self.n}")
        if (self.k_prime * self.c_prime) % self.heads != 0:
            raise ValueError("k_prime*c_prime must divide by heads")
        if (self.k_prime * self.c_prime) % 4 != 0:
            raise ValueError("k_prime*c_prime must divide by 4 (CPG reduction)")
        for width in self.gcr_pool_widths():
            if width % self.heads != 0:
                raise ValueError(
                    f"GCRA pool width {width} not divisible by heads={self.heads}"
                )

    def mfe_widths(self):
        """Per-layer output widths of the feature pyramid: K^(h-1) * C."""
        return [self.k ** i * self.c for i in range(self.h)]

    def cpg_widths(self):
        kc = self.k_prime * self.c_prime
        return [self.c_prime, kc, kc // 4, self.r * 3]

    def gcr_pool_widths(self):
        """Pool width consumed by each GCRA block, first block first."""
        widths = [self.k_prime * self.c_prime]
        for h in range(self.h - 1, 0, -1):
            widths.append(self.k ** (h - 1) * self.c)
        return widths

    def gcr_out_widths(self):
        """Width emitted by each GCRA block; the last emits r*3 coordinates
        groups instead of continuing the geometric reduction."""
        widths = [self.k ** (h - 2) * self.c for h in range(self.h, 1, -1)]
        widths.append(self.r * 3)
        return widths

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d):
        return cls(**{f.name: int(d[f.name]) for f in fields(cls) if f.name in d})


class ModelParams:
    """All learnable state, addressable by dot-path names.

    ``zero_residual_heads`` zeroes the CPG's last value path and the
    decoder's final linear so an untrained model reproduces its input
    duplicates exactly.
    """

    def __init__(self, config, rng, zero_residual_heads=True, dtype=T.DEFAULT_DTYPE):
        self.config = config
        self.dtype = dtype
        cfg = config

        widths = cfg.mfe_widths()
        self.mfe = [
            PTLayerParams(
                3 if i == 0 else widths[i - 1], widths[i], rng, dtype=dtype
            )
            for i in range(cfg.h)
        ]

        cpg_w = cfg.cpg_widths()
        self.cpg = [
            PTLayerParams(
                3 if i == 0 else cpg_w[i - 1],
                cpg_w[i],
                rng,
                zero_value_path=(zero_residual_heads and i == len(cpg_w) - 1),
                dtype=dtype,
            )
            for i in range(len(cpg_w))
        ]

        kc = cfg.k_prime * cfg.c_prime
        self.sab_lift = Linear(3 * cfg.r, kc, rng, dtype=dtype)
        self.sab = [
            AttentionParams(kc, kc, cfg.heads, rng, dtype=dtype)
            for _ in range(cfg.sab_depth)
        ]

        pyramid = list(reversed(widths))  # query widths, deepest first
        self.gcr = [
            GCRAParams(f_q, f_p, f_out, cfg.heads, rng, dtype=dtype)
            for f_q, f_p, f_out in zip(
                pyramid, cfg.gcr_pool_widths(), cfg.gcr_out_widths()
            )
        ]
        self.gcr_final = Linear(
            cfg.r * 3, cfg.r * 3, rng, zero=zero_residual_heads, dtype=dtype
        )

    def named_parameters(self):
        for i, p in enumerate(self.mfe):
            yield from p.named_parameters(f"mfe.{i}")
        for i, p in enumerate(self.cpg):
            yield from p.named_parameters(f"cpg.{i}")
        yield from self.sab_lift.named_parameters("sab.lift")
        for i, p in enumerate(self.sab):
            yield from p.named_parameters(f"sab.attn.{i}")
        for i, p in enumerate(self.gcr):
            yield from p.named_parameters(f"gcr.{i}")
        yield from self.gcr_final.named_parameters("gcr.final")

    def named_buffers(self):
        for i, p in enumerate(self.gcr):
            yield from p.named_buffers(f"gcr.{i}")

    def to_arrays(self):
        out = {name: np.asarray(t.data, dtype=np.float32) for name, t in self.named_parameters()}
        for name, buf in self.named_buffers():
            out[name] = np.asarray(buf, dtype=np.float32)
        return out

    def load_arrays(self, arrays):
        """Overwrite parameters and buffers in place; missing or misshapen
        entries are errors so checkpoints can't silently half-load."""
        buffers = dict(self.named_buffers())
        for name, t in self.named_parameters():
            if name not in arrays:
                raise KeyError(f"checkpoint missing parameter {name}")
            val = arrays[name]
            if tuple(val.shape) != tuple(t.data.shape):
                raise ValueError(
                    f"parameter {name}: checkpoint shape {val.shape} != {t.data.shape}"
                )
            t.data = val.astype(self.dtype)
        for i, p in enumerate(self.gcr):
            for name, buf in p.named_buffers(f"gcr.{i}"):
                if name not in arrays:
                    raise KeyError(f"checkpoint missing buffer {name}")
                p.bn.load_buffer(name.rsplit(".", 1)[1], arrays[name])


def duplicate(points, r):
    """(n, 3) -> (r*n, 3) with the r copies of point i at rows r*i..r*i+r-1."""
    return np.repeat(points, r, axis=0)


@dataclass
class ForwardResult:
    q: Tensor             # (r*n, 3) final points
    q_prime: Tensor       # (r*n, 3) coarse points
    q_delta: Tensor       # (r*n, 3) refinement offsets
    mfs: list             # feature pyramid tensors
    gfs: Tensor           # global features (n, k_prime*c_prime)
    rgc_widths: list      # emitted width per GCRA block
    attention: list = field(default_factory=list)  # per-GCRA score arrays


def mfe_forward(s, params, neighbor_idx=None):
    cfg = params.config
    if s.shape[0] != cfg.n:
        raise ShapeError(f"expected {cfg.n} points, got {s.shape[0]}")
    if neighbor_idx is None:
        neighbor_idx = knn_graph(s, cfg.patch_size)
    feats = Tensor(s.astype(params.dtype))
    pyramid = []
    for layer in params.mfe:
        feats = pt_layer(feats, s, layer, cfg.patch_size, neighbor_idx)
        pyramid.append(feats)
    return pyramid


def cpg_forward(s, params, neighbor_idx=None):
    cfg = params.config
    if s.shape[0] != cfg.n:
        raise ShapeError(f"expected {cfg.n} points, got {s.shape[0]}")
    if neighbor_idx is None:
        neighbor_idx = knn_graph(s, cfg.patch_size)
    feats = Tensor(s.astype(params.dtype))
    for layer in params.cpg:
        feats = pt_layer(feats, s, layer, cfg.patch_size, neighbor_idx)
    s_delta = pixel_shuffle(feats, cfg.r)
    dup = Tensor(duplicate(s, cfg.r).astype(params.dtype))
    return dup + s_delta


def sab_forward(q_prime, params):
    cfg = params.config
    rn = q_prime.shape[0]
    if rn % cfg.r != 0:
        raise ShapeError(f"{rn} rows not divisible by r={cfg.r}")
    grouped = q_prime.reshape((rn // cfg.r, 3 * cfg.r))
    x = params.sab_lift(grouped)
    for attn in params.sab:
        x = multihead_attention(x, x, attn)
    return x


def gcr_forward(mfs, gfs, params, mode="batch", capture=None):
    cfg = params.config
    if len(mfs) != cfg.h:
        raise ShapeError(f"pyramid depth {len(mfs)} != h={cfg.h}")
    rgc = gfs
    widths = []
    for i, block in enumerate(params.gcr):
        query = mfs[cfg.h - 1 - i]  # deepest features query first
        rgc = gcra(query, rgc, block, mode=mode, capture=capture)
        widths.append(rgc.shape[1])
    return pixel_shuffle(params.gcr_final(rgc), cfg.r), widths


def pumfa_forward(s, params, mode="batch", capture_attention=False):
    """Run the full network on one patch.

    ``s`` is an (n, 3) float array in normalized patch coordinates. ``mode``
    is the batch-norm mode. With ``capture_attention`` the per-GCRA softmax
    score matrices are copied into the result; capture never alters Q.
    """
    s = np.asarray(s, dtype=np.float64)
    cfg = params.config
    neighbor_idx = knn_graph(s, cfg.patch_size)
    mfs = mfe_forward(s, params, neighbor_idx)
    q_prime = cpg_forward(s, params, neighbor_idx)
    gfs = sab_forward(q_prime, params)
    capture = [] if capture_attention else None
    q_delta, rgc_widths = gcr_forward(mfs, gfs, params, mode=mode, capture=capture)
    q = q_prime + q_delta
    return ForwardResult(
        q=q,
        q_prime=q_prime,
        q_delta=q_delta,
        mfs=mfs,
        gfs=gfs,
        rgc_widths=rgc_widths,
        attention=capture or [],
    )
