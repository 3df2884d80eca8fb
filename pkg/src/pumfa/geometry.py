"""Spatial kernels on raw (n, 3) float point arrays.

Point clouds are plain float64 numpy arrays of shape (n, 3); helpers here
validate at entry. KNN is brute force by design and serves as the reference
for everything built on it. Ties in KNN and FPS break toward the lower index.
"""

import numpy as np


def as_cloud(points):
    """Validate and return an (n, 3) float64 point array, n >= 1."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"expected an (n, 3) point array, got shape {arr.shape}")
    if arr.shape[0] < 1:
        raise ValueError("point cloud is empty")
    if not np.isfinite(arr).all():
        raise ValueError("point cloud contains non-finite coordinates")
    return arr


def knn(points, query, k):
    """Indices of the k nearest points to ``query``, ascending by distance.

    The query itself is included when it belongs to the set. Equidistant
    points order by lower index.
    """
    points = as_cloud(points)
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range for {n} points")
    d2 = np.square(points - np.asarray(query, dtype=np.float64)).sum(axis=1)
    order = np.argsort(d2, kind="stable")
    return order[:k]


def knn_graph(points, k):
    """(n, k) neighbor indices for every point, self included, row-sorted
    ascending by distance with lower-index tie break."""
    points = np.asarray(points)
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range for {n} points")
    d2 = np.square(points[:, None, :] - points[None, :, :]).sum(axis=2)
    return np.argsort(d2, axis=1, kind="stable")[:, :k]


def farthest_point_sample(points, m, seed=0):
    """Greedy max-min subset of ``m`` indices, starting at index ``seed``.

    Deterministic: the next pick maximizes the minimum distance to the
    already selected set, lower index on ties.
    """
    points = as_cloud(points)
    n = points.shape[0]
    if not 1 <= m <= n:
        raise ValueError(f"m={m} out of range for {n} points")
    if not 0 <= seed < n:
        raise ValueError(f"seed index {seed} out of range for {n} points")
    chosen = np.empty(m, dtype=np.int64)
    chosen[0] = seed
    min_d2 = np.square(points - points[seed]).sum(axis=1)
    # chosen points drop to -inf so exact duplicates (min distance 0) can
    # never re-pick an already selected index
    min_d2[seed] = -np.inf
    for i in range(1, m):
        nxt = int(np.argmax(min_d2))
        chosen[i] = nxt
        np.minimum(min_d2, np.square(points - points[nxt]).sum(axis=1), out=min_d2)
        min_d2[nxt] = -np.inf
    return chosen


def normalize_to_unit_sphere(points, centroid=None, scale=None):
    """Center and scale so the farthest point sits on the unit sphere.

    Returns (normalized, centroid, scale). Pass a stored (centroid, scale)
    to reuse a reference frame, e.g. for the sparse half of a patch pair.
    """
    points = as_cloud(points)
    if centroid is None:
        centroid = points.mean(axis=0)
    if scale is None:
        scale = float(np.linalg.norm(points - centroid, axis=1).max())
        if scale == 0.0:
            scale = 1.0
    return (points - centroid) / scale, centroid, scale


def denormalize(points, centroid, scale):
    return np.asarray(points, dtype=np.float64) * scale + centroid


def add_gaussian_noise(points, level, rng):
    """Add i.i.d. zero-mean Gaussian offsets with std ``level`` per coordinate."""
    points = as_cloud(points)
    if level < 0:
        raise ValueError(f"noise level must be nonnegative, got {level}")
    if level == 0:
        return points.copy()
    return points + rng.normal(0.0, level, size=points.shape)


def point_to_triangle_distance(p, tri):
    """Euclidean distance from ``p`` to the closed triangle ``tri`` (3x3).

    Classifies p against the triangle's Voronoi regions (vertices, edges,
    interior) and measures to the closest feature.
    """
    tri = np.asarray(tri, dtype=np.float64)
    a, b, c = tri[0], tri[1], tri[2]
    if np.linalg.norm(np.cross(b - a, c - a)) == 0.0:
        raise ValueError("degenerate triangle")
    p = np.asarray(p, dtype=np.float64)

    ab = b - a
    ac = c - a
    ap = p - a
    d1 = ab @ ap
    d2 = ac @ ap
    if d1 <= 0.0 and d2 <= 0.0:
        return float(np.linalg.norm(p - a))

    bp = p - b
    d3 = ab @ bp
    d4 = ac @ bp
    if d3 >= 0.0 and d4 <= d3:
        return float(np.linalg.norm(p - b))

    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        t = d1 / (d1 - d3)
        return float(np.linalg.norm(p - (a + t * ab)))

    cp = p - c
    d5 = ab @ cp
    d6 = ac @ cp
    if d6 >= 0.0 and d5 <= d6:
        return float(np.linalg.norm(p - c))

    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        t = d2 / (d2 - d6)
        return float(np.linalg.norm(p - (a + t * ac)))

    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return float(np.linalg.norm(p - (b + t * (c - b))))

    denom = va + vb + vc
    v = vb / denom
    w = vc / denom
    return float(np.linalg.norm(p - (a + v * ab + w * ac)))


def points_to_triangles_distance(points, vertices, faces, chunk=512):
    """Per-point distance to the nearest of many triangles, vectorized.

    ``vertices``: (V, 3), ``faces``: (F, 3) int. Returns (n,) distances.
    Evaluates the same region classification as
    :func:`point_to_triangle_distance` across the face axis.
    """
    points = as_cloud(points)
    tris = vertices[faces]  # (F, 3, 3)
    a = tris[:, 0]
    ab = tris[:, 1] - a
    ac = tris[:, 2] - a
    out = np.empty(points.shape[0], dtype=np.float64)
    for start in range(0, points.shape[0], chunk):
        p = points[start:start + chunk][:, None, :]  # (c, 1, 3)
        ap = p - a[None, :, :]
        d1 = (ab[None] * ap).sum(-1)
        d2 = (ac[None] * ap).sum(-1)
        bp = ap - ab[None]
        d3 = (ab[None] * bp).sum(-1)
        d4 = (ac[None] * bp).sum(-1)
        cp = ap - ac[None]
        d5 = (ab[None] * cp).sum(-1)
        d6 = (ac[None] * cp).sum(-1)

        va = d3 * d6 - d5 * d4
        vb = d5 * d2 - d1 * d6
        vc = d1 * d4 - d3 * d2

        eps = 1e-300
        t_ab = d1 / np.where(np.abs(d1 - d3) < eps, eps, d1 - d3)
        t_ac = d2 / np.where(np.abs(d2 - d6) < eps, eps, d2 - d6)
        edge_bc_den = (d4 - d3) + (d5 - d6)
        t_bc = (d4 - d3) / np.where(np.abs(edge_bc_den) < eps, eps, edge_bc_den)
        denom = va + vb + vc
        denom = np.where(np.abs(denom) < eps, eps, denom)
        v = vb / denom
        w = vc / denom

        # candidate closest points per region, selected in the same order
        # as the scalar routine's early returns
        cand = np.empty(ap.shape, dtype=np.float64)
        cand[:] = a[None] + v[..., None] * ab[None] + w[..., None] * ac[None]

        on_bc = (va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0)
        cand = np.where(
            on_bc[..., None],
            (a + ab)[None] + t_bc[..., None] * (ac - ab)[None],
            cand,
        )
        on_ac = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
        cand = np.where(on_ac[..., None], a[None] + t_ac[..., None] * ac[None], cand)
        at_c = (d6 >= 0) & (d5 <= d6)
        cand = np.where(at_c[..., None], (a + ac)[None], cand)
        on_ab = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
        cand = np.where(on_ab[..., None], a[None] + t_ab[..., None] * ab[None], cand)
        at_b = (d3 >= 0) & (d4 <= d3)
        cand = np.where(at_b[..., None], (a + ab)[None], cand)
        at_a = (d1 <= 0) & (d2 <= 0)
        cand = np.where(at_a[..., None], a[None], cand)

        d = np.linalg.norm(p - cand, axis=-1)
        out[start:start + chunk] = d.min(axis=1)
    return out


def random_rotation(rng):
    """Uniform random rotation matrix (3, 3) from a quaternion draw."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )
