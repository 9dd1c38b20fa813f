"""Benchmark surface meshes: cube, cube with reentrant corner, sphere.

All meshes are closed, oriented triangulations with outward unit
normals.  The cube family starts from four-triangle face fans (24
triangles, 14 vertices) and refines by edge bisection, reproducing the
benchmark node/element counts 50/96, 194/384, 770/1536, ...  The sphere
is a geodesic subdivision of the icosahedron with vertices projected to
radius 1.

Mesh file format (ASCII): first line "nv nt", then nv lines "x y z",
then nt lines "i j k" with 0-based vertex indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "SurfaceMesh",
    "make_cube",
    "make_lshape",
    "make_sphere",
    "validate",
    "read_mesh",
    "write_mesh",
]


@dataclass
class SurfaceMesh:
    """Closed oriented triangulation of a boundary.

    Attributes
    ----------
    vertices : ndarray, shape (V, 3)
        Vertex coordinates [m].
    triangles : ndarray, shape (E, 3), int
        Vertex index triples, oriented so normals point outward.
    """

    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.triangles = np.asarray(self.triangles, dtype=np.int64)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def corners(self) -> np.ndarray:
        """Triangle corner coordinates, shape (E, 3, 3)."""
        return self.vertices[self.triangles]

    @cached_property
    def _geometry(self):
        p = self.corners  # (E, 3, 3)
        cross = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])  # (E, 3)
        nrm = np.linalg.norm(cross, axis=1)  # (E,)
        areas = 0.5 * nrm
        with np.errstate(invalid="ignore", divide="ignore"):
            normals = cross / nrm[:, None]
        centroids = p.mean(axis=1)
        edges = np.stack(
            [p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]], axis=1
        )
        diameters = np.linalg.norm(edges, axis=2).max(axis=1)
        return areas, normals, centroids, diameters

    @property
    def areas(self) -> np.ndarray:
        return self._geometry[0]

    @property
    def normals(self) -> np.ndarray:
        return self._geometry[1]

    @property
    def centroids(self) -> np.ndarray:
        return self._geometry[2]

    @property
    def diameters(self) -> np.ndarray:
        return self._geometry[3]

    @property
    def h(self) -> float:
        """Characteristic size: maximum element diameter."""
        return float(self.diameters.max())

    @property
    def area(self) -> float:
        return float(self.areas.sum())

    @property
    def volume(self) -> float:
        """Signed enclosed volume by the divergence theorem."""
        p = self.corners
        return float(np.einsum("ij,ij->", np.cross(p[:, 0], p[:, 1]), p[:, 2]) / 6.0)

    def refined(self) -> "SurfaceMesh":
        """Uniform 4-way refinement by edge bisection (nested vertices)."""
        v = self.vertices
        tris = self.triangles
        edge_mid: dict[tuple[int, int], int] = {}
        new_v = [v]
        next_idx = len(v)

        def midpoint(a: int, b: int) -> int:
            nonlocal next_idx
            key = (a, b) if a < b else (b, a)
            idx = edge_mid.get(key)
            if idx is None:
                new_v.append(0.5 * (v[a] + v[b])[None, :])
                idx = next_idx
                edge_mid[key] = idx
                next_idx += 1
            return idx

        new_t = np.empty((4 * len(tris), 3), dtype=np.int64)
        for e, (a, b, c) in enumerate(tris):
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_t[4 * e : 4 * e + 4] = [
                (a, ab, ca),
                (ab, b, bc),
                (ca, bc, c),
                (ab, bc, ca),
            ]
        return SurfaceMesh(np.vstack(new_v), new_t)

    def inverted(self) -> "SurfaceMesh":
        """Same surface with flipped orientation (cavity problems)."""
        return SurfaceMesh(self.vertices.copy(), self.triangles[:, ::-1].copy())


def _fan_faces(quads: list[tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]]):
    """Triangulate quads by a centre fan (4 triangles each), welding vertices."""
    verts: list[np.ndarray] = []
    vmap: dict[tuple[float, float, float], int] = {}

    def add(p: np.ndarray) -> int:
        key = tuple(np.round(p, 12))
        idx = vmap.get(key)
        if idx is None:
            idx = len(verts)
            verts.append(np.asarray(p, dtype=float))
            vmap[key] = idx
        return idx

    tris = []
    for a, b, c, d in quads:
        ia, ib, ic, id_ = add(a), add(b), add(c), add(d)
        ie = add(0.25 * (np.asarray(a) + b + c + d))
        tris += [(ia, ib, ie), (ib, ic, ie), (ic, id_, ie), (id_, ia, ie)]
    return SurfaceMesh(np.array(verts), np.array(tris, dtype=np.int64))


def _cube_quads():
    """Six outward-oriented unit faces of [-0.5, 0.5]^3."""
    s = 0.5
    quads = []
    for axis in range(3):
        for sign in (-1.0, 1.0):
            u = np.zeros(3)
            u[(axis + 1) % 3] = 1.0
            v = np.zeros(3)
            v[(axis + 2) % 3] = 1.0
            n = np.zeros(3)
            n[axis] = sign
            c = n * s
            a, bq = (u, v) if sign > 0 else (v, u)
            quads.append(
                (c - s * a - s * bq, c + s * a - s * bq, c + s * a + s * bq, c - s * a + s * bq)
            )
    return quads


def make_cube(level: int = 1) -> SurfaceMesh:
    """Unit cube [-0.5, 0.5]^3; level 1 has 50 nodes and 96 elements.

    The base mesh fans each face into 4 triangles; each level bisects
    edges (elements x4), so level l has 24 * 4^l triangles and h = 2^-l.
    """
    if level < 1:
        raise ValueError("refinement level must be >= 1")
    mesh = _fan_faces(_cube_quads())
    for _ in range(level):
        mesh = mesh.refined()
    return mesh


def make_lshape(level: int = 1) -> SurfaceMesh:
    """Unit cube with the (+,+,+) octant removed (volume 7/8).

    A conforming base triangulation on the half-unit grid is refined
    uniformly; the benchmark's own level-1 mesh is graded toward the
    reentrant corner and has slightly different counts.
    """
    if level < 1:
        raise ValueError("refinement level must be >= 1")
    s = 0.5
    quads = []

    def grid_quads(corner, u, v, nu, nv):
        for i in range(nu):
            for j in range(nv):
                a = corner + i * u + j * v
                quads.append((a, a + u, a + u + v, a + v))

    ex, ey, ez = np.eye(3)
    # three full faces (x=-1/2, y=-1/2, z=-1/2), 2x2 half-unit quads
    grid_quads(np.array([-s, -s, -s]), ez * s, ey * s, 2, 2)  # x = -1/2, n = -x
    grid_quads(np.array([-s, -s, -s]), ex * s, ez * s, 2, 2)  # y = -1/2, n = -y
    grid_quads(np.array([-s, -s, -s]), ey * s, ex * s, 2, 2)  # z = -1/2, n = -z
    # three L-shaped faces (x=+1/2 etc.), 3 half-unit quads each
    for axis, (u, v) in ((0, (ey, ez)), (1, (ez, ex)), (2, (ex, ey))):
        n = np.eye(3)[axis]
        c = n * s  # face centre plane
        for i, j in ((0, 0), (1, 0), (0, 1)):  # skip the (+,+) quarter
            a = c + (-s + i * s) * u + (-s + j * s) * v
            quads.append((a, a + s * u, a + s * u + s * v, a + s * v))
    # three reentrant faces at the removed octant, normals into the octant
    for axis, (u, v) in ((0, (ey, ez)), (1, (ez, ex)), (2, (ex, ey))):
        a = np.zeros(3)  # corner at the origin
        quads.append((a, a + s * u, a + s * u + s * v, a + s * v))
    mesh = _fan_faces(quads)
    if mesh.volume < 0:
        mesh = mesh.inverted()
    for _ in range(level - 1):
        mesh = mesh.refined()
    return mesh


def make_sphere(target_h: float) -> SurfaceMesh:
    """Geodesic icosphere of radius 1 with element size close to target_h.

    Each icosahedron face is split into n^2 triangles (20 n^2 elements,
    10 n^2 + 2 vertices) and projected to the sphere; n is chosen so the
    achieved h best matches ``target_h``.  n = 5 gives 500 elements.
    """
    if not target_h > 0:
        raise ValueError("target element size must be positive")
    # icosahedron edge for unit circumradius is ~1.0515; subdivided edges
    # shrink like 1/n with mild projection distortion
    n = max(1, int(round(1.1 / target_h)))

    phi = (1.0 + np.sqrt(5.0)) / 2.0
    base_v = np.array(
        [
            (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
            (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
            (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
        ],
        dtype=float,
    )
    base_v /= np.linalg.norm(base_v, axis=1)[:, None]
    base_t = np.array(
        [
            (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
            (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
            (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
            (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
        ],
        dtype=np.int64,
    )

    verts: list[np.ndarray] = []
    vmap: dict[tuple[float, float, float], int] = {}

    def add(p: np.ndarray) -> int:
        p = p / np.linalg.norm(p)
        key = tuple(np.round(p, 10))
        idx = vmap.get(key)
        if idx is None:
            idx = len(verts)
            verts.append(p)
            vmap[key] = idx
        return idx

    tris = []
    for (ia, ib, ic) in base_t:
        a, b, c = base_v[ia], base_v[ib], base_v[ic]
        # barycentric grid: rows i from a-edge toward bc
        grid = [
            [add(((n - i - j) * a + i * b + j * c) / n) for j in range(n - i + 1)]
            for i in range(n + 1)
        ]
        for i in range(n):
            for j in range(n - i):
                tris.append((grid[i][j], grid[i + 1][j], grid[i][j + 1]))
                if j < n - i - 1:
                    tris.append((grid[i + 1][j], grid[i + 1][j + 1], grid[i][j + 1]))
    mesh = SurfaceMesh(np.array(verts), np.array(tris, dtype=np.int64))
    if mesh.volume < 0:
        mesh = mesh.inverted()
    return mesh


def validate(mesh: SurfaceMesh) -> list[str]:
    """Check the closed-manifold invariants; returns a violation list."""
    violations: list[str] = []
    if mesh.triangles.min(initial=0) < 0 or mesh.triangles.max(initial=-1) >= mesh.num_vertices:
        violations.append("triangle indices out of range")
        return violations

    tiny = 1e-14 * max(mesh.h, 1.0) ** 2
    bad_area = np.nonzero(mesh.areas <= tiny)[0]
    for e in bad_area[:10]:
        violations.append(f"degenerate (zero-area) triangle {e}")

    # every edge must appear exactly twice, once per direction
    edges: dict[tuple[int, int], int] = {}
    for e, (a, b, c) in enumerate(mesh.triangles):
        for u, v in ((a, b), (b, c), (c, a)):
            edges[(u, v)] = edges.get((u, v), 0) + 1
    for (u, v), cnt in edges.items():
        if cnt > 1:
            violations.append(f"edge ({u},{v}) used {cnt} times in one direction")
        elif edges.get((v, u), 0) != 1:
            violations.append(f"edge ({u},{v}) has non-matching orientation")
        if len(violations) > 20:
            violations.append("... further violations suppressed")
            return violations

    if mesh.volume <= 0:
        violations.append(f"non-positive signed volume {mesh.volume:.3e} (normals inward?)")
    return violations


def write_mesh(mesh: SurfaceMesh, path) -> None:
    """Write the ASCII "nv nt / x y z ... / i j k ..." format."""
    with open(path, "w") as fh:
        fh.write(f"{mesh.num_vertices} {mesh.num_triangles}\n")
        for p in mesh.vertices:
            fh.write(f"{p[0]:.16e} {p[1]:.16e} {p[2]:.16e}\n")
        for t in mesh.triangles:
            fh.write(f"{t[0]} {t[1]} {t[2]}\n")


def read_mesh(path) -> SurfaceMesh:
    """Read the ASCII mesh format written by :func:`write_mesh`."""
    with open(path) as fh:
        tokens = fh.read().split()
    nv, nt = int(tokens[0]), int(tokens[1])
    need = 2 + 3 * nv + 3 * nt
    if len(tokens) < need:
        raise ValueError(f"mesh file truncated: {len(tokens)} tokens, need {need}")
    vals = np.array(tokens[2 : 2 + 3 * nv], dtype=float).reshape(nv, 3)
    idx = np.array(tokens[2 + 3 * nv : need], dtype=np.int64).reshape(nt, 3)
    return SurfaceMesh(vals, idx)
