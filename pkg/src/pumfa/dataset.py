"""Dataset generation: dense surface sampling per mesh, then patch pair
extraction. Deterministic for a fixed (seed, config): each mesh gets its own
generator derived from (seed, mesh index), so thread scheduling and mesh
order changes cannot leak randomness between meshes.
"""

import numpy as np

from .geometry import as_cloud
from .meshio import ANALYTIC_MESHES, load_mesh
from .parallel import ordered_map
from .patches import PatchPair, extract_patch_pairs
from .sampling import sample_mesh


def mesh_from_spec(spec):
    """A mesh name from the built-in analytic set, or a file path."""
    if spec in ANALYTIC_MESHES:
        return ANALYTIC_MESHES[spec]()
    return load_mesh(spec)


def generate_dataset(mesh_specs, pairs_per_mesh, n_input, ratio,
                     dense_points=4096, mode="poisson", seed=0):
    if not mesh_specs:
        raise ValueError("need at least one mesh")
    rn = n_input * ratio
    if dense_points < rn:
        raise ValueError(
            f"dense_points={dense_points} cannot host a {n_input}->{rn} patch"
        )

    def build(index_spec):
        mi, spec = index_spec
        mesh = mesh_from_spec(spec)
        rng = np.random.default_rng([seed, mi])
        dense = sample_mesh(mesh, dense_points, mode=mode, rng=rng)
        return extract_patch_pairs(dense, pairs_per_mesh, n_input, ratio, rng)

    per_mesh = ordered_map(build, enumerate(mesh_specs))
    return [pair for pairs in per_mesh for pair in pairs]


def dataset_from_config(config):
    return generate_dataset(
        config.meshes,
        config.pairs_per_mesh,
        config.model.n,
        config.model.r,
        dense_points=config.dense_points,
        mode=config.sample_mode,
        seed=config.seed,
    )


def save_dataset(path, pairs):
    if not pairs:
        raise ValueError("refusing to save an empty dataset")
    np.savez(
        path,
        inputs=np.stack([p.input for p in pairs]),
        targets=np.stack([p.target for p in pairs]),
        centroids=np.stack([p.centroid for p in pairs]),
        scales=np.array([p.scale for p in pairs]),
    )


def load_dataset(path):
    with np.load(path) as data:
        try:
            inputs, targets = data["inputs"], data["targets"]
            centroids, scales = data["centroids"], data["scales"]
        except KeyError as exc:
            raise ValueError(f"not a dataset file: missing array {exc}")
        return [
            PatchPair(
                input=as_cloud(inputs[i]),
                target=as_cloud(targets[i]),
                centroid=centroids[i],
                scale=float(scales[i]),
            )
            for i in range(len(inputs))
        ]
