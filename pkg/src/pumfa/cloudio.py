"""Point cloud file IO: ASCII XYZ and ASCII PLY.

XYZ is one "x y z" line per point at 6 decimal places. The PLY writer can
attach a per-vertex uchar flag column, used by the attention overlays to
mark highlighted points.
"""

import numpy as np

from .geometry import as_cloud


class CloudError(ValueError):
    pass


def save_xyz(path, points):
    points = as_cloud(points)
    with open(path, "w") as f:
        for x, y, z in points:
            f.write(f"{x:.6f} {y:.6f} {z:.6f}\n")


def load_xyz(path):
    rows = []
    with open(path) as f:
        for ln, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) < 3:
                raise CloudError(f"{path}:{ln}: expected at least 3 columns")
            try:
                rows.append([float(v) for v in parts[:3]])
            except ValueError:
                raise CloudError(f"{path}:{ln}: non-numeric coordinate") from None
    if not rows:
        raise CloudError(f"{path}: no points")
    return as_cloud(rows)


def save_ply_cloud(path, points, flags=None):
    """Write an ASCII PLY vertex cloud; optional 0/1 flag per vertex."""
    points = as_cloud(points)
    if flags is not None:
        flags = np.asarray(flags)
        if flags.shape != (points.shape[0],):
            raise CloudError(
                f"flags shape {flags.shape} does not match {points.shape[0]} points"
            )
    with open(path, "w") as f:
        f.write("ply\nformat ascii 1.0\n")
        f.write(f"element vertex {points.shape[0]}\n")
        f.write("property float x\nproperty float y\nproperty float z\n")
        if flags is not None:
            f.write("property uchar flag\n")
        f.write("end_header\n")
        for i, (x, y, z) in enumerate(points):
            line = f"{x:.6f} {y:.6f} {z:.6f}"
            if flags is not None:
                line += f" {int(flags[i])}"
            f.write(line + "\n")


def load_ply_cloud(path):
    """Read vertex positions from an ASCII PLY; faces and extra properties
    are ignored. Returns (points, flags-or-None)."""
    with open(path) as f:
        raw = f.read().splitlines()
    if not raw or raw[0].strip() != "ply":
        raise CloudError(f"{path}: not a PLY file")
    nv = None
    props = []
    in_vertex = False
    body_at = None
    for i, line in enumerate(raw[1:], start=1):
        parts = line.split()
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "format" and parts[1] != "ascii":
            raise CloudError(f"{path}: only ascii PLY supported")
        if parts[0] == "element":
            in_vertex = parts[1] == "vertex"
            if in_vertex:
                nv = int(parts[2])
        elif parts[0] == "property" and in_vertex and parts[1] != "list":
            props.append(parts[-1])
        elif parts[0] == "end_header":
            body_at = i + 1
            break
    if body_at is None or nv is None:
        raise CloudError(f"{path}: malformed PLY header")
    try:
        cols = [props.index(c) for c in ("x", "y", "z")]
    except ValueError:
        raise CloudError(f"{path}: vertex element lacks x/y/z") from None
    flag_col = props.index("flag") if "flag" in props else None
    body = [l.split() for l in raw[body_at:] if l.strip()][:nv]
    if len(body) < nv:
        raise CloudError(f"{path}: truncated vertex list")
    pts = as_cloud([[float(row[c]) for c in cols] for row in body])
    flags = None
    if flag_col is not None:
        flags = np.array([int(row[flag_col]) for row in body], dtype=np.int64)
    return pts, flags


def load_cloud(path):
    """Format by extension: .xyz or .ply. Returns points only."""
    p = str(path).lower()
    if p.endswith(".xyz"):
        return load_xyz(path)
    if p.endswith(".ply"):
        return load_ply_cloud(path)[0]
    raise CloudError(f"unsupported cloud format: {path}")


def save_cloud(path, points):
    p = str(path).lower()
    if p.endswith(".xyz"):
        save_xyz(path, points)
    elif p.endswith(".ply"):
        save_ply_cloud(path, points)
    else:
        raise CloudError(f"unsupported cloud format: {path}")
