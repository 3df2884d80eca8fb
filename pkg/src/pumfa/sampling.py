"""Surface sampling of triangle meshes.

``uniform`` draws faces proportionally to area and points uniformly in
barycentric coordinates. ``poisson`` approximates blue-noise spacing by
uniform 4x oversampling followed by weighted sample elimination: repeatedly
drop the point most crowded by surviving neighbors until n remain.
"""

import heapq
import math
from collections import defaultdict

import numpy as np

OVERSAMPLE = 4
ELIMINATION_ALPHA = 8


def sample_mesh_uniform(mesh, n, rng):
    if n < 1:
        raise ValueError("n must be positive")
    probs = mesh.face_areas / mesh.face_areas.sum()
    idx = rng.choice(len(mesh.faces), size=n, p=probs)
    tri = mesh.vertices[mesh.faces[idx]]
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    a = (1.0 - r1)[:, None]
    b = (r1 * (1.0 - r2))[:, None]
    c = (r1 * r2)[:, None]
    return a * tri[:, 0] + b * tri[:, 1] + c * tri[:, 2]


def _eliminate(points, n_keep):
    """Weighted sample elimination down to n_keep points.

    Each point is weighted by how strongly its neighbors within 2*r_max
    crowd it; the heaviest point is removed and its neighbors reweighted.
    r_max is the blue-noise radius for n_keep samples on area A.
    """
    m = len(points)
    # surface-density heuristic: hexagonal packing of n_keep discs. The
    # bounding-box area overestimates curved surfaces, which only widens
    # the neighborhood, so spacing quality is unaffected.
    bbox = points.max(axis=0) - points.min(axis=0)
    dims = np.sort(bbox)[::-1]
    area = max(dims[0] * dims[1], 1e-12)
    r_max = math.sqrt(area / (2.0 * math.sqrt(3.0) * n_keep))
    radius = 2.0 * r_max

    cell = radius
    grid = defaultdict(list)
    keys = np.floor(points / cell).astype(np.int64)
    for i, key in enumerate(map(tuple, keys)):
        grid[key].append(i)

    neighbors = [[] for _ in range(m)]
    for i in range(m):
        kx, ky, kz = keys[i]
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for dz in (-1, 0, 1):
                    for j in grid.get((kx + dx, ky + dy, kz + dz), ()):
                        if j <= i:
                            continue
                        d = np.linalg.norm(points[i] - points[j])
                        if d < radius:
                            neighbors[i].append((j, d))
                            neighbors[j].append((i, d))

    def wfn(d):
        return (1.0 - d / radius) ** ELIMINATION_ALPHA

    weights = np.zeros(m)
    for i in range(m):
        weights[i] = sum(wfn(d) for _, d in neighbors[i])

    alive = np.ones(m, dtype=bool)
    heap = [(-weights[i], i) for i in range(m)]
    heapq.heapify(heap)
    remaining = m
    while remaining > n_keep:
        w, i = heapq.heappop(heap)
        if not alive[i] or -w != weights[i]:
            continue  # stale entry
        alive[i] = False
        remaining -= 1
        for j, d in neighbors[i]:
            if alive[j]:
                weights[j] -= wfn(d)
                heapq.heappush(heap, (-weights[j], j))
    return points[alive]


def sample_mesh(mesh, n, mode="uniform", rng=None):
    if rng is None:
        rng = np.random.default_rng()
    if mode == "uniform":
        return sample_mesh_uniform(mesh, n, rng)
    if mode == "poisson":
        pool = sample_mesh_uniform(mesh, OVERSAMPLE * n, rng)
        return _eliminate(pool, n)
    raise ValueError(f"unknown sampling mode: {mode!r}")
