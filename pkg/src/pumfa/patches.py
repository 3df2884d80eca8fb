"""Patch-level data plumbing: extraction from dense clouds, merging of
upsampled patches back into a full cloud, and training-time augmentation.

A PatchPair shares one normalization frame: the target patch's centroid and
max point norm. Input points are a FPS subset of the target, so the shared
frame keeps both inside the unit sphere.
"""

from dataclasses import dataclass

import numpy as np

from . import geometry


@dataclass
class PatchPair:
    input: np.ndarray   # (N, 3) normalized
    target: np.ndarray  # (rN, 3) normalized
    centroid: np.ndarray
    scale: float

    def __post_init__(self):
        self.input = geometry.as_cloud(self.input)
        self.target = geometry.as_cloud(self.target)
        if len(self.target) % len(self.input) != 0:
            raise ValueError(
                f"target size {len(self.target)} is not a multiple of "
                f"input size {len(self.input)}"
            )
        if self.scale <= 0:
            raise ValueError(f"scale must be positive, got {self.scale}")

    @property
    def ratio(self):
        return len(self.target) // len(self.input)


def extract_patch_pairs(dense, count, n_input, ratio, rng):
    dense = geometry.as_cloud(dense)
    rn = n_input * ratio
    if len(dense) < rn:
        raise ValueError(
            f"dense cloud has {len(dense)} points, need at least {rn}"
        )
    pairs = []
    for _ in range(count):
        seed = int(rng.integers(len(dense)))
        target_idx = geometry.knn(dense, dense[seed], rn)
        target = dense[target_idx]
        input_idx = geometry.farthest_point_sample(target, n_input, seed=0)
        norm_target, centroid, scale = geometry.normalize_to_unit_sphere(target)
        pairs.append(
            PatchPair(
                input=norm_target[input_idx],
                target=norm_target,
                centroid=centroid,
                scale=scale,
            )
        )
    return pairs


def merge_patches(patches, target_count):
    """patches: iterable of (points, centroid, scale) in normalized space."""
    world = [geometry.denormalize(p, c, s) for p, c, s in patches]
    merged = np.concatenate(world, axis=0)
    if len(merged) < target_count:
        raise ValueError(
            f"only {len(merged)} merged points for target {target_count}"
        )
    keep = geometry.farthest_point_sample(merged, target_count, seed=0)
    return merged[keep]


@dataclass
class AugmentConfig:
    rotate: bool = True
    scale_min: float = 0.8
    scale_max: float = 1.2
    perturb_sigma: float = 0.005

    def __post_init__(self):
        if not 0 < self.scale_min <= self.scale_max:
            raise ValueError("scale range must satisfy 0 < min <= max")
        if self.perturb_sigma < 0 or self.perturb_sigma > 0.02:
            raise ValueError("perturb_sigma must lie in [0, 0.02]")

    @classmethod
    def identity(cls):
        return cls(rotate=False, scale_min=1.0, scale_max=1.0, perturb_sigma=0.0)


def augment(pair, rng, config):
    """Rotate and scale input+target together; jitter the input only.

    The identity config returns the pair unchanged, with no rng draws.
    """
    inp, tgt = pair.input, pair.target
    if config.rotate:
        rot = geometry.random_rotation(rng)
        inp = inp @ rot.T
        tgt = tgt @ rot.T
    if (config.scale_min, config.scale_max) != (1.0, 1.0):
        s = rng.uniform(config.scale_min, config.scale_max)
        inp = inp * s
        tgt = tgt * s
    if config.perturb_sigma > 0:
        inp = inp + rng.normal(0.0, config.perturb_sigma, size=inp.shape)
    if inp is pair.input:
        return pair
    return PatchPair(inp, tgt, pair.centroid, pair.scale)
