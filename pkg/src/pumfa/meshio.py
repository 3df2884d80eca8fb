"""Triangle mesh loading (OFF, ASCII PLY) and built-in analytic shapes.

Polygons with more than 3 vertices are fan-triangulated at load time.
Zero-area faces are dropped so downstream sampling and point-to-surface
code can assume every face is usable.
"""

import numpy as np


class MeshError(ValueError):
    pass


class TriangleMesh:
    def __init__(self, vertices, faces):
        vertices = np.asarray(vertices, dtype=np.float64)
        faces = np.asarray(faces, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise MeshError(f"vertices must be (V, 3), got {vertices.shape}")
        if faces.size == 0:
            raise MeshError("mesh has no faces")
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise MeshError(f"faces must be (F, 3), got {faces.shape}")
        if faces.min() < 0 or faces.max() >= len(vertices):
            raise MeshError("face index out of range")
        areas = _face_areas(vertices, faces)
        keep = areas > 0.0
        faces = faces[keep]
        if len(faces) == 0:
            raise MeshError("all faces degenerate")
        self.vertices = vertices
        self.faces = faces
        self.face_areas = areas[keep]

    @property
    def area(self):
        return float(self.face_areas.sum())


def _face_areas(vertices, faces):
    tri = vertices[faces]
    cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    return 0.5 * np.linalg.norm(cross, axis=1)


def _triangulate(polys):
    """Fan-triangulate variable-length index lists into (F, 3) triples."""
    tris = []
    for poly in polys:
        if len(poly) < 3:
            raise MeshError(f"face with {len(poly)} vertices")
        for i in range(1, len(poly) - 1):
            tris.append((poly[0], poly[i], poly[i + 1]))
    return np.array(tris, dtype=np.int64)


def _data_lines(path):
    with open(path) as f:
        for line in f:
            line = line.split("#", 1)[0].strip()
            if line:
                yield line


def load_off(path):
    lines = _data_lines(path)
    header = next(lines, None)
    if header is None:
        raise MeshError(f"{path}: empty file")
    # counts may share the OFF line or follow on their own
    if header.startswith("OFF"):
        rest = header[3:].strip()
        counts = rest.split() if rest else next(lines, "").split()
    else:
        counts = header.split()
    if len(counts) < 2:
        raise MeshError(f"{path}: malformed OFF counts")
    nv, nf = int(counts[0]), int(counts[1])
    verts = np.array(
        [[float(x) for x in next(lines).split()[:3]] for _ in range(nv)]
    )
    polys = []
    for _ in range(nf):
        parts = next(lines).split()
        cnt = int(parts[0])
        polys.append([int(x) for x in parts[1:1 + cnt]])
    return TriangleMesh(verts, _triangulate(polys))


def load_ply_mesh(path):
    """ASCII PLY with vertex x/y/z properties and a face list property."""
    with open(path) as f:
        raw = f.read().splitlines()
    if not raw or raw[0].strip() != "ply":
        raise MeshError(f"{path}: not a PLY file")
    nv = nf = None
    vert_props = []
    in_vertex = False
    body_at = None
    for i, line in enumerate(raw[1:], start=1):
        parts = line.split()
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "format":
            if parts[1] != "ascii":
                raise MeshError(f"{path}: only ascii PLY supported")
        elif parts[0] == "element":
            in_vertex = parts[1] == "vertex"
            if in_vertex:
                nv = int(parts[2])
            elif parts[1] == "face":
                nf = int(parts[2])
        elif parts[0] == "property" and in_vertex and parts[1] != "list":
            vert_props.append(parts[-1])
        elif parts[0] == "end_header":
            body_at = i + 1
            break
    if body_at is None or nv is None:
        raise MeshError(f"{path}: malformed PLY header")
    try:
        cols = [vert_props.index(c) for c in ("x", "y", "z")]
    except ValueError:
        raise MeshError(f"{path}: vertex element lacks x/y/z") from None
    body = [l.split() for l in raw[body_at:] if l.strip()]
    verts = np.array(
        [[float(row[c]) for c in cols] for row in body[:nv]]
    )
    if nf is None or nf == 0:
        raise MeshError(f"{path}: PLY has no faces (use the cloud reader)")
    polys = []
    for row in body[nv:nv + nf]:
        cnt = int(row[0])
        polys.append([int(x) for x in row[1:1 + cnt]])
    return TriangleMesh(verts, _triangulate(polys))


def load_mesh(path):
    p = str(path).lower()
    if p.endswith(".off"):
        return load_off(path)
    if p.endswith(".ply"):
        return load_ply_mesh(path)
    raise MeshError(f"unsupported mesh format: {path}")


# ---------------------------------------------------------------------------
# analytic shapes for the desk-scale dataset


def make_sphere(radius=1.0, subdivisions=3):
    """Icosphere: subdivided icosahedron with vertices pushed to the radius."""
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=np.float64,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [tuple(v) for v in verts]
    for _ in range(subdivisions):
        cache = {}
        new_faces = []

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = np.add(verts[i], verts[j]) / 2.0
                m /= np.linalg.norm(m)
                verts.append(tuple(m))
                cache[key] = len(verts) - 1
            return cache[key]

        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return TriangleMesh(np.array(verts) * radius, np.array(faces))


def make_torus(major=1.0, minor=0.4, n_major=48, n_minor=24):
    iu, iv = np.meshgrid(np.arange(n_major), np.arange(n_minor), indexing="ij")
    u = 2 * np.pi * iu / n_major
    v = 2 * np.pi * iv / n_minor
    ring = major + minor * np.cos(v)
    verts = np.stack(
        [ring * np.cos(u), ring * np.sin(u), minor * np.sin(v)], axis=-1
    ).reshape(-1, 3)
    faces = []
    for i in range(n_major):
        for j in range(n_minor):
            a = i * n_minor + j
            b = ((i + 1) % n_major) * n_minor + j
            c = ((i + 1) % n_major) * n_minor + (j + 1) % n_minor
            d = i * n_minor + (j + 1) % n_minor
            faces += [(a, b, c), (a, c, d)]
    return TriangleMesh(verts, np.array(faces))


def make_box(extent=(1.0, 1.0, 1.0), segments=8):
    """Axis-aligned box centered at the origin, each face a segments² grid."""
    ex, ey, ez = (e / 2.0 for e in extent)
    verts = []
    faces = []

    def add_face(origin, du, dv):
        base = len(verts)
        for i in range(segments + 1):
            for j in range(segments + 1):
                verts.append(
                    np.asarray(origin)
                    + np.asarray(du) * (i / segments)
                    + np.asarray(dv) * (j / segments)
                )
        for i in range(segments):
            for j in range(segments):
                a = base + i * (segments + 1) + j
                b = a + segments + 1
                faces.append((a, b, b + 1))
                faces.append((a, b + 1, a + 1))

    add_face((-ex, -ey, ez), (2 * ex, 0, 0), (0, 2 * ey, 0))
    add_face((-ex, ey, -ez), (2 * ex, 0, 0), (0, -2 * ey, 0))
    add_face((-ex, -ey, -ez), (2 * ex, 0, 0), (0, 0, 2 * ez))
    add_face((ex, ey, -ez), (-2 * ex, 0, 0), (0, 0, 2 * ez))
    add_face((ex, -ey, -ez), (0, 2 * ey, 0), (0, 0, 2 * ez))
    add_face((-ex, ey, -ez), (0, -2 * ey, 0), (0, 0, 2 * ez))
    return TriangleMesh(np.array(verts), np.array(faces))


def make_cylinder(radius=0.5, height=2.0, n_radial=48, n_axial=12):
    """Closed cylinder along z, triangulated side wall plus fan-capped ends."""
    verts = []
    faces = []
    for i in range(n_axial + 1):
        z = -height / 2 + height * i / n_axial
        for j in range(n_radial):
            a = 2 * np.pi * j / n_radial
            verts.append((radius * np.cos(a), radius * np.sin(a), z))
    for i in range(n_axial):
        for j in range(n_radial):
            a = i * n_radial + j
            b = i * n_radial + (j + 1) % n_radial
            c = (i + 1) * n_radial + (j + 1) % n_radial
            d = (i + 1) * n_radial + j
            faces += [(a, b, c), (a, c, d)]
    bottom = len(verts)
    verts.append((0.0, 0.0, -height / 2))
    top = len(verts)
    verts.append((0.0, 0.0, height / 2))
    for j in range(n_radial):
        faces.append((bottom, (j + 1) % n_radial, j))
        base = n_axial * n_radial
        faces.append((top, base + j, base + (j + 1) % n_radial))
    return TriangleMesh(np.array(verts), np.array(faces))


ANALYTIC_MESHES = {
    "sphere": make_sphere,
    "torus": make_torus,
    "box": make_box,
    "cylinder": make_cylinder,
}
