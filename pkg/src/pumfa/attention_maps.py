"""Cross-attention diagnostics: which input points each decoder layer
attends to.

Captured score matrices are (heads, queries, sources) per decoder layer,
with sources indexing the N input points. A head's ranking aggregates its
matrix over query rows by mean (order-independent), then takes the top-k.
Overlay files mark the top-k points with a flag column for offline viewing.
"""

import os
from dataclasses import dataclass, field

import numpy as np

from .cloudio import save_ply_cloud
from .geometry import as_cloud
from .network import pumfa_forward
from .training import inference_mode


@dataclass
class HeadAttention:
    head: int
    scores: np.ndarray       # (queries, sources) softmax rows
    top_indices: np.ndarray  # descending by mean source score

    def mean_scores(self):
        return self.scores.mean(axis=0)


@dataclass
class LayerAttention:
    layer: int
    heads: list = field(default_factory=list)


@dataclass
class AttentionReport:
    points: np.ndarray
    layers: list = field(default_factory=list)
    overlay_paths: list = field(default_factory=list)


def rank_sources(scores, top_k):
    """Top-k source indices by mean attention over query rows, descending.
    Stable, so score ties resolve to the lower index."""
    mean = scores.mean(axis=0)
    order = np.argsort(-mean, kind="stable")
    return order[:min(top_k, len(mean))]


def dump_attention(params, s, heads=None, top_k=30, out_dir=None):
    s = as_cloud(s)
    cfg = params.config
    if len(s) != cfg.n:
        raise ValueError(f"expected a {cfg.n}-point cloud, got {len(s)}")
    if top_k < 1:
        raise ValueError("top_k must be positive")
    selected = list(range(cfg.heads)) if heads is None else [int(h) for h in heads]
    for h in selected:
        if not 0 <= h < cfg.heads:
            raise ValueError(f"head {h} out of range [0, {cfg.heads})")

    res = pumfa_forward(s, params, mode=inference_mode(params),
                        capture_attention=True)
    report = AttentionReport(points=s)
    for li, captured in enumerate(res.attention):
        layer = LayerAttention(layer=li)
        for h in selected:
            mat = np.asarray(captured[h])
            layer.heads.append(HeadAttention(
                head=h,
                scores=mat,
                top_indices=rank_sources(mat, top_k),
            ))
        report.layers.append(layer)

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        for layer in report.layers:
            for entry in layer.heads:
                flags = np.zeros(len(s), dtype=np.uint8)
                flags[entry.top_indices] = 1
                path = os.path.join(
                    out_dir, f"attention_layer{layer.layer}_head{entry.head}.ply"
                )
                save_ply_cloud(path, s, flags=flags)
                report.overlay_paths.append(path)
    return report
