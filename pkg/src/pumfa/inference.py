"""Full-cloud upsampling: seed patches by FPS, run the network per patch,
merge back to exactly r times the input count.

Seed count is ceil(coverage_factor * M / N); since FPS spreads seeds and
each patch is an N-nearest neighborhood, that typically covers everything,
but coverage is audited anyway and extra patches are grown at any point
left uncovered. Ratios beyond one pass (r^2, r^3, ...) chain whole passes.
"""

import math

import numpy as np

from . import tensor as T
from .geometry import as_cloud, farthest_point_sample, knn, normalize_to_unit_sphere
from .network import pumfa_forward
from .parallel import ordered_map
from .patches import merge_patches
from .training import inference_mode


def _chain_length(ratio, r):
    """How many x r passes make up ``ratio``; error if none can."""
    passes = 0
    value = ratio
    while value > 1 and value % r == 0:
        value //= r
        passes += 1
    if value != 1 or passes == 0:
        raise ValueError(f"ratio {ratio} is not a positive power of {r}")
    return passes


def _upsample_once(params, cloud):
    cfg = params.config
    m = len(cloud)
    if m < cfg.n:
        raise ValueError(f"cloud has {m} points, need at least {cfg.n}")

    n_seeds = min(math.ceil(3.0 * m / cfg.n), m)
    seeds = farthest_point_sample(cloud, n_seeds, seed=0)
    patch_idx = [knn(cloud, cloud[s], cfg.n) for s in seeds]
    covered = np.zeros(m, dtype=bool)
    for idx in patch_idx:
        covered[idx] = True
    while not covered.all():
        hole = int(np.flatnonzero(~covered)[0])
        idx = knn(cloud, cloud[hole], cfg.n)
        patch_idx.append(idx)
        covered[idx] = True
        # the knn tie rule can exclude the hole itself when the cloud holds
        # >= n exact copies of it; the patch still sits on top of it, so
        # marking it covered is sound and guarantees progress
        covered[hole] = True

    mode = inference_mode(params)

    def process(idx):
        norm, centroid, scale = normalize_to_unit_sphere(cloud[idx])
        with T.no_grad():
            res = pumfa_forward(norm, params, mode=mode)
        return np.asarray(res.q.data, dtype=np.float64), centroid, scale

    return merge_patches(ordered_map(process, patch_idx), cfg.r * m)


def upsample_cloud(params, cloud, ratio=None):
    """Upsample a full cloud to ratio times its size; ratio defaults to the
    model's r and must otherwise be a power of it."""
    cloud = as_cloud(cloud)
    r = params.config.r
    passes = _chain_length(r if ratio is None else int(ratio), r)
    out = cloud
    for _ in range(passes):
        out = _upsample_once(params, out)
    return out
