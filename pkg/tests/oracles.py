"""Independent reference implementations the tests compare against.

Everything here is deliberately naive: python loops and direct formulas,
sharing no code with the package. Gradient checks use central finite
differences on a scalarized output (sum of output times a fixed random
projection, so every output element contributes).
"""

import math

import numpy as np


def fd_grad(f, x, h=1e-3):
    """Central-difference gradient of scalar f with respect to array x."""
    x = np.array(x)
    g = np.zeros(x.shape, dtype=np.float64)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gf[i] = (fp - fm) / (2.0 * h)
    return g


def norm_rel_error(a, b):
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return np.linalg.norm(a - b) / denom


# ---------------------------------------------------------------------------
# geometry oracles


def brute_knn(points, query, k):
    dists = []
    for i, p in enumerate(points):
        d = math.dist(tuple(p), tuple(query))
        dists.append((d, i))
    dists.sort()
    return [i for _, i in dists[:k]]


def brute_fps(points, m, seed=0):
    points = [tuple(p) for p in points]
    chosen = [seed]
    while len(chosen) < m:
        best_i, best_d = None, -1.0
        for i in range(len(points)):
            if i in chosen:
                continue
            d = min(math.dist(points[i], points[c]) for c in chosen)
            if d > best_d:
                best_i, best_d = i, d
        chosen.append(best_i)
    return chosen


# ---------------------------------------------------------------------------
# metric oracles


def _min_dists(p, d):
    out = []
    for x in p:
        out.append(min(math.dist(tuple(x), tuple(y)) for y in d))
    return out


def brute_chamfer(p, d):
    fwd = _min_dists(p, d)
    bwd = _min_dists(d, p)
    return sum(fwd) / len(fwd) + sum(bwd) / len(bwd)


def brute_dcd(p, d):
    fwd = [1.0 - math.exp(-v) for v in _min_dists(p, d)]
    bwd = [1.0 - math.exp(-v) for v in _min_dists(d, p)]
    return sum(fwd) / len(fwd) + sum(bwd) / len(bwd)


def brute_hausdorff(p, d):
    return max(max(_min_dists(p, d)), max(_min_dists(d, p)))
