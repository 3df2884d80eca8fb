"""Training losses (differentiable, on the tensor engine) and evaluation
metrics (plain numpy, chunked for large clouds).

Distances are unsquared L2 throughout. The density-aware variant saturates
each nearest-neighbor distance through 1 - exp(-d), which caps the
contribution of any single point at 1.
"""

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .geometry import as_cloud, points_to_triangles_distance
from .tensor import Tensor


@dataclass
class LossSchedule:
    """Linear ramp of the refinement weight alpha across training steps."""

    total_steps: int
    alpha_start: float = 0.1
    alpha_end: float = 1.0
    step: int = 0

    def alpha(self):
        if self.total_steps <= 0:
            return self.alpha_end
        t = self.step / self.total_steps
        t = min(max(t, 0.0), 1.0)
        return self.alpha_start + (self.alpha_end - self.alpha_start) * t

    def advance(self):
        self.step += 1


def _nn_distances(p, d):
    """Tensor nearest-neighbor distances both ways: (min over d per p row,
    min over p per d row).

    Squared distances come from the expanded dot product; relu clamps the
    tiny negatives rounding can produce, and sqrt's zero subgradient keeps
    exact-match pairs from emitting NaN gradients.
    """
    n, m = p.shape[0], d.shape[0]
    p_sq = T.tsum(p * p, axis=1).reshape((n, 1))
    d_sq = T.tsum(d * d, axis=1).reshape((1, m))
    cross = p @ d.transpose((1, 0))
    dist = T.sqrt(T.relu(p_sq + d_sq - 2.0 * cross))
    return T.tmin(dist, axis=1), T.tmin(dist, axis=0)


def chamfer_loss(p, d):
    """Differentiable CD: mean NN distance P->D plus mean NN distance D->P."""
    fwd, bwd = _nn_distances(p, d)
    return T.tmean(fwd, axis=0) + T.tmean(bwd, axis=0)


def density_aware_chamfer_loss(p, d):
    fwd, bwd = _nn_distances(p, d)
    one = 1.0
    return T.tmean(one - T.exp(-fwd), axis=0) + T.tmean(one - T.exp(-bwd), axis=0)


def total_loss(q_prime, q, d, schedule):
    """CD on the coarse cloud plus alpha-weighted DCD on the refined one."""
    if q_prime.shape[0] != d.shape[0] or q.shape[0] != d.shape[0]:
        raise ValueError(
            f"size mismatch: Q'={q_prime.shape[0]}, Q={q.shape[0]}, D={d.shape[0]}"
        )
    if not isinstance(d, Tensor):
        d = Tensor(np.asarray(d, dtype=q.dtype))
    return chamfer_loss(q_prime, d) + schedule.alpha() * density_aware_chamfer_loss(q, d)


# ---------------------------------------------------------------------------
# numpy metrics


def _pairwise_min(p, d, chunk=2048):
    """Row-wise NN distance from p to d without materializing the full
    difference tensor; exact up to float64 rounding."""
    p = as_cloud(p)
    d = as_cloud(d)
    d_sq = np.square(d).sum(axis=1)
    out = np.empty(len(p))
    for s in range(0, len(p), chunk):
        block = p[s:s + chunk]
        d2 = np.square(block).sum(axis=1)[:, None] + d_sq[None, :] - 2.0 * (block @ d.T)
        np.maximum(d2, 0.0, out=d2)
        out[s:s + chunk] = np.sqrt(d2.min(axis=1))
    return out


def chamfer_distance(p, d):
    return float(_pairwise_min(p, d).mean() + _pairwise_min(d, p).mean())


def density_aware_chamfer(p, d):
    fwd = 1.0 - np.exp(-_pairwise_min(p, d))
    bwd = 1.0 - np.exp(-_pairwise_min(d, p))
    return float(fwd.mean() + bwd.mean())


def hausdorff_distance(p, d, directed=False):
    """max-min distance; symmetric by default, P->D only when directed."""
    fwd = _pairwise_min(p, d).max()
    if directed:
        return float(fwd)
    return float(max(fwd, _pairwise_min(d, p).max()))


def point_to_surface(p, mesh):
    """Mean distance from each point to the nearest mesh triangle."""
    return float(points_to_triangles_distance(p, mesh.vertices, mesh.faces).mean())
