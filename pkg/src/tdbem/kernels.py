"""Laplace-domain layer-potential assembly at complex frequencies.

Entries of the four boundary operators (single layer V, double layer K,
adjoint double layer K', hypersingular D) of the wave kernel

    U(r, s) = exp(-s r / c) / (4 pi r)

for collocation (rows at the trial-space nodes, i.e. element centroids
for piecewise constants) and Galerkin pairings.  The hypersingular form
is the partially integrated one,

    <D u, v> = int int U(r, s) [curl_G v(x) . curl_G u(y)
                                + (s/c)^2 (n_x . n_y) v(x) u(y)],

with the P1 hats' surface curl constant per triangle.  Regular pair
integrals use a distance-graded Gauss order; touching pairs use the
regularizing transforms of :mod:`tdbem.quadrature`; a collocation point
interior to its own panel uses a Duffy fan (V) or the exact coplanar
zero (K).

All frequency dependence enters through exp(-s r / c), so geometry is
precomputed per pair batch and a frequency evaluation is one complex
exponential plus contractions.  ``matrix`` caches the full pair layout
for repeated frequencies; ``block``/``entry``/``fiber`` build the small
pair sets they need on demand (the access pattern of the cross
approximation), all through the same per-pair arithmetic.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .mesh import SurfaceMesh
from .quadrature import (
    coincident_rule,
    common_edge_rule,
    common_vertex_rule,
    composite_triangle_rule,
    duffy_interior_rule,
    map_to_triangle,
    triangle_rule,
)

logger = logging.getLogger(__name__)

__all__ = [
    "Operator",
    "QuadratureConfig",
    "Assembler",
    "fundamental_solution",
    "integral_free_term",
    "mass_matrix_p1",
    "p1_surface_curls",
]

_CHUNK = 200_000  # pairs per assembly chunk, bounds peak memory


def fundamental_solution(r, s, c: float = 1.0):
    """exp(-s r / c) / (4 pi r); requires r > 0."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise ValueError("fundamental solution evaluated at r <= 0")
    s = complex(s)
    return np.exp(-s * r / c) / (4.0 * np.pi * r)


@dataclass(frozen=True)
class Operator:
    """Operator selector: kind in {V, K, KA, D} plus the pairing scheme.

    Trial spaces follow the discretisation: V acts on piecewise
    constants (P0), K/KA/D on continuous piecewise linears (P1).  Test
    side: "collocation" places rows at given points (element centroids
    by default); "galerkin" tests with P0 for V and K and with P1 for
    KA and D.
    """

    kind: str
    scheme: str

    def __post_init__(self):
        if self.kind not in ("V", "K", "KA", "D"):
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if self.scheme not in ("collocation", "galerkin"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.kind in ("D", "KA") and self.scheme != "galerkin":
            raise ValueError(f"{self.kind} is implemented Galerkin-only")

    @property
    def trial_space(self) -> str:
        return "P0" if self.kind == "V" else "P1"

    @property
    def test_space(self) -> str:
        if self.scheme == "collocation":
            return "points"
        return "P0" if self.kind in ("V", "K") else "P1"


@dataclass(frozen=True)
class QuadratureConfig:
    """Distance-graded quadrature orders.

    Regular pairs use Gauss order max(base, base + 2 - floor(dist /
    diam)); touching pairs the 1D order ``singular_order`` inside the
    regularizing transforms; interior collocation singularities a Duffy
    fan of order ``duffy_order``.  Declared accuracy on desk meshes:
    one refinement step changes entries by < 1e-6 of the matrix scale.
    """

    base_order: int = 3
    coincident_order: int = 8
    edge_order: int = 7
    vertex_order: int = 6
    duffy_order: int = 20
    near_depth: int = 1

    def regular_order(self, ratio) -> np.ndarray:
        ratio = np.asarray(ratio)
        return np.maximum(
            self.base_order,
            self.base_order + 2 - np.floor(ratio).astype(int),
        )

    def subdivision_depth(self, ratio) -> np.ndarray:
        """Composite-rule depth for near pairs: 1/r needs panel
        refinement once the gap falls below the panel size."""
        ratio = np.asarray(ratio)
        depth = np.zeros(ratio.shape, dtype=int)
        depth[ratio < 2.0] = self.near_depth
        depth[ratio < 0.75] = min(self.near_depth + 1, 3)
        return depth

    def refined(self) -> "QuadratureConfig":
        return QuadratureConfig(
            self.base_order + 1,
            self.coincident_order + 1,
            self.edge_order + 1,
            self.vertex_order + 1,
            self.duffy_order + 2,
            self.near_depth + 1,
        )


def p1_surface_curls(mesh: SurfaceMesh) -> np.ndarray:
    """curl_G of the three P1 hats per triangle, shape (E, 3, 3).

    For triangle (a, b, c) the hat at local vertex 0 has constant
    surface curl (b - c) / (2 A), and cyclically.
    """
    p = mesh.corners
    out = np.empty_like(p)
    twoA = (2.0 * mesh.areas)[:, None]
    out[:, 0] = (p[:, 1] - p[:, 2]) / twoA
    out[:, 1] = (p[:, 2] - p[:, 0]) / twoA
    out[:, 2] = (p[:, 0] - p[:, 1]) / twoA
    return out


def mass_matrix_p1(mesh: SurfaceMesh) -> np.ndarray:
    """Exact P1 x P1 Galerkin mass matrix (dense, desk scale)."""
    n = mesh.num_vertices
    M = np.zeros((n, n))
    loc = np.full((3, 3), 1.0 / 12.0)
    np.fill_diagonal(loc, 1.0 / 6.0)
    for e, tri in enumerate(mesh.triangles):
        M[np.ix_(tri, tri)] += mesh.areas[e] * loc
    return M


def _canonical_orders(tri_a, tri_b):
    """Shared vertices of two triangles and vertex orders putting them
    first; a shared edge is listed in the same direction on both sides,
    as the edge transform requires."""
    a = [int(v) for v in tri_a]
    b = [int(v) for v in tri_b]
    shared = sorted(set(a) & set(b))
    if len(shared) == 3:
        return shared, a, a
    if len(shared) == 2:
        for r in range(3):
            aa = a[r:] + a[:r]
            if aa[0] in shared and aa[1] in shared:
                break
        rest_b = next(v for v in b if v not in shared)
        return shared, aa, [aa[0], aa[1], rest_b]
    p = shared[0]
    return shared, a[a.index(p):] + a[: a.index(p)], b[b.index(p):] + b[: b.index(p)]


def _simplex_bary(pts: np.ndarray) -> np.ndarray:
    """Barycentric values (corner order) at simplex coords (q, 2)."""
    return np.stack([1.0 - pts[:, 0], pts[:, 0] - pts[:, 1], pts[:, 1]], axis=-1)


class _PairBatch:
    """Geometry of one batch of (test unit, trial element) pairs.

    Arrays over p pairs and q points per pair.  Quadrature weights keep
    their outer-product structure (per-pair scale x per-point weight)
    except for the Duffy tier, whose sub-triangle areas vary per pair;
    the kernel weight W/(4 pi r) is formed at evaluation time.  ``u``
    carries the directional factor of the gradient kernels, ``bx``/
    ``by`` the per-point P1 basis values shared across the batch,
    ``vids_*`` the matching (possibly reordered) global vertex ids,
    ``curl_*``/``nn`` the hypersingular combination data.  ``zero``
    marks exact-zero batches (coplanar collocation pairs).
    """

    __slots__ = ("test", "trial", "r", "pair_w", "point_w", "w_full",
                 "u", "bx", "by", "vids_a", "vids_b",
                 "curl_a", "curl_b", "nn", "zero")

    def __init__(self, test, trial):
        self.test = np.asarray(test, dtype=int)
        self.trial = np.asarray(trial, dtype=int)
        self.r = self.pair_w = self.point_w = self.w_full = None
        self.u = self.bx = self.by = self.vids_a = self.vids_b = None
        self.curl_a = self.curl_b = self.nn = None
        self.zero = False

    def weights(self) -> np.ndarray:
        """Kernel weight W / (4 pi r), shape (p, q)."""
        if self.w_full is not None:
            W = self.w_full
        else:
            W = self.pair_w[:, None] * self.point_w[None, :]
        return np.where(W != 0.0, W / (4.0 * np.pi * self.r), 0.0)


class Assembler:
    """Frequency-parametrized assembly of one boundary operator.

    Pure given the immutable mesh and configuration, so one instance
    may be evaluated from independent workers.

    Parameters
    ----------
    mesh : SurfaceMesh
    op : Operator
    config : QuadratureConfig, optional
    wave_speed : float
    collocation_points : ndarray (n, 3), optional
        Row points for collocation; defaults to the element centroids
        (the nodes of the P0 trial space).
    """

    def __init__(
        self,
        mesh: SurfaceMesh,
        op: Operator,
        config: QuadratureConfig | None = None,
        wave_speed: float = 1.0,
        collocation_points: np.ndarray | None = None,
    ):
        self.mesh = mesh
        self.op = op
        self.config = config or QuadratureConfig()
        self.c = float(wave_speed)
        self._curls = p1_surface_curls(mesh) if op.kind == "D" else None
        if op.scheme == "collocation":
            if collocation_points is None:
                self.colloc_points = mesh.centroids
                self._own_panel = np.arange(mesh.num_triangles)
            else:
                self.colloc_points = np.asarray(collocation_points, dtype=float)
                self._own_panel = self._containing_elements(self.colloc_points)
        else:
            self.colloc_points = None
            self._own_panel = None
        self._matrix_batches: list[_PairBatch] | None = None
        self._v2e: list[np.ndarray] | None = None

    # ------------------------------------------------------------------
    @property
    def n_rows(self) -> int:
        if self.op.scheme == "collocation":
            return len(self.colloc_points)
        return (
            self.mesh.num_triangles
            if self.op.test_space == "P0"
            else self.mesh.num_vertices
        )

    @property
    def n_cols(self) -> int:
        return (
            self.mesh.num_triangles
            if self.op.trial_space == "P0"
            else self.mesh.num_vertices
        )

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    def row_points(self) -> np.ndarray:
        """Support points of the row dofs (cluster-tree geometry)."""
        if self.op.scheme == "collocation":
            return self.colloc_points
        return (
            self.mesh.centroids if self.op.test_space == "P0" else self.mesh.vertices
        )

    def col_points(self) -> np.ndarray:
        """Support points of the column dofs."""
        return (
            self.mesh.centroids if self.op.trial_space == "P0" else self.mesh.vertices
        )

    def vertex_elements(self) -> list[np.ndarray]:
        """Elements touching each vertex (P1 dof supports)."""
        if self._v2e is None:
            lists: list[list[int]] = [[] for _ in range(self.mesh.num_vertices)]
            for e, tri in enumerate(self.mesh.triangles):
                for v in tri:
                    lists[int(v)].append(e)
            self._v2e = [np.array(v, dtype=int) for v in lists]
        return self._v2e

    def _containing_elements(self, pts: np.ndarray) -> np.ndarray:
        """Element containing each point (-1 if none); boundary counts."""
        out = np.full(len(pts), -1, dtype=int)
        corners = self.mesh.corners
        for i, x in enumerate(pts):
            d = np.linalg.norm(self.mesh.centroids - x, axis=1)
            for e in np.argsort(d)[:8]:
                a, b, c = corners[e]
                n = np.cross(b - a, c - a)
                if abs(np.dot(x - a, n)) > 1e-10 * np.linalg.norm(n):
                    continue
                s1 = np.dot(np.cross(b - x, c - x), n)
                s2 = np.dot(np.cross(c - x, a - x), n)
                s3 = np.dot(np.cross(a - x, b - x), n)
                if min(s1, s2, s3) >= -1e-12 * np.dot(n, n):
                    out[i] = e
                    break
        return out

    # ==================================================================
    # pair-batch construction
    # ==================================================================
    def _finish_batch(
        self, batch: _PairBatch, X, Y, bx=None, by=None, vids_a=None, vids_b=None
    ) -> _PairBatch:
        diff = Y - X
        r = np.linalg.norm(diff, axis=-1)
        rs = np.where(r > 0.0, r, 1.0)  # zero-weight points may coincide
        batch.r = rs
        op = self.op
        if op.kind == "K":
            ny = self.mesh.normals[batch.trial]
            batch.u = np.einsum("pqd,pd->pq", diff, ny) / rs
        elif op.kind == "KA":
            nx = self.mesh.normals[batch.test]
            batch.u = np.einsum("pqd,pd->pq", -diff, nx) / rs
        batch.bx, batch.by = bx, by
        if op.trial_space == "P1":
            batch.vids_b = (
                vids_b if vids_b is not None else self.mesh.triangles[batch.trial]
            )
        if op.test_space == "P1":
            batch.vids_a = (
                vids_a if vids_a is not None else self.mesh.triangles[batch.test]
            )
        if op.kind == "D":
            batch.nn = np.einsum(
                "pd,pd->p", self.mesh.normals[batch.test], self.mesh.normals[batch.trial]
            )
            batch.curl_a = self._ordered_curls(batch.test, vids_a)
            batch.curl_b = self._ordered_curls(batch.trial, vids_b)
        return batch

    def _ordered_curls(self, els, vids) -> np.ndarray:
        curls = self._curls[els]
        if vids is None:
            return curls
        tris = self.mesh.triangles[els]
        out = np.empty_like(curls)
        for i in range(len(els)):
            tri = list(tris[i])
            perm = [tri.index(int(v)) for v in vids[i]]
            out[i] = curls[i][perm]
        return out

    def _regular_batch(self, tu, fe, order: int, depth: int = 0) -> _PairBatch:
        """Non-touching pairs at one Gauss order; tu are test units."""
        batch = _PairBatch(tu, fe)
        bp, bw = composite_triangle_rule(order, depth) if depth else triangle_rule(order)
        Y = np.einsum("qk,pkd->pqd", bp, self.mesh.corners[fe])
        if self.op.scheme == "collocation":
            X = self.colloc_points[tu][:, None, :]
            batch.pair_w = self.mesh.areas[fe]
            batch.point_w = bw
            return self._finish_batch(batch, X, Y, by=bp)
        Xp = np.einsum("qk,pkd->pqd", bp, self.mesh.corners[tu])
        q = len(bw)
        X = np.repeat(Xp, q, axis=1)
        Y2 = np.tile(Y, (1, q, 1))
        batch.pair_w = self.mesh.areas[tu] * self.mesh.areas[fe]
        batch.point_w = np.outer(bw, bw).ravel()
        bx2 = np.repeat(bp, q, axis=0)  # (q*q, 3)
        by2 = np.tile(bp, (q, 1))
        return self._finish_batch(batch, X, Y2, bx=bx2, by=by2)

    def _duffy_batch(self, tu, fe) -> _PairBatch:
        """Collocation point interior to its own panel (V only)."""
        batch = _PairBatch(tu, fe)
        uv, w0 = duffy_interior_rule(self.config.duffy_order)
        nq = len(uv)
        X = self.colloc_points[tu]
        corners = self.mesh.corners[fe]
        Ys = np.empty((len(tu), 3 * nq, 3))
        Ws = np.empty((len(tu), 3 * nq))
        for k in range(3):
            v0 = corners[:, k]
            v1 = corners[:, (k + 1) % 3]
            e1 = v0 - X
            e2 = v1 - v0
            Y = (
                X[:, None, :]
                + uv[None, :, 0, None]
                * (e1[:, None, :] + uv[None, :, 1, None] * e2[:, None, :])
            )
            area2 = np.linalg.norm(np.cross(e1, e2), axis=1)
            Ys[:, k * nq : (k + 1) * nq] = Y
            Ws[:, k * nq : (k + 1) * nq] = area2[:, None] * w0[None, :]
        batch.w_full = Ws
        return self._finish_batch(batch, X[:, None, :], Ys)

    def _zero_batch(self, tu, fe) -> _PairBatch:
        batch = _PairBatch(tu, fe)
        batch.zero = True
        return batch

    def _singular_batches(self, tu, fe) -> list[_PairBatch]:
        """Touching Galerkin pairs, grouped by shared-vertex count."""
        cfg = self.config
        rules = {
            3: coincident_rule(cfg.coincident_order),
            2: common_edge_rule(cfg.edge_order),
            1: common_vertex_rule(cfg.vertex_order),
        }
        groups: dict[int, list[int]] = {1: [], 2: [], 3: []}
        orders_a: list[list[int]] = []
        orders_b: list[list[int]] = []
        for pos, (t, f) in enumerate(zip(tu, fe)):
            shared, oa, ob = _canonical_orders(self.mesh.triangles[t], self.mesh.triangles[f])
            groups[len(shared)].append(pos)
            orders_a.append(oa)
            orders_b.append(ob)
        out = []
        for ns, sel in groups.items():
            if not sel:
                continue
            sel = np.asarray(sel, dtype=int)
            rule = rules[ns]
            va = np.array([orders_a[p] for p in sel])
            vb = np.array([orders_b[p] for p in sel])
            batch = _PairBatch(tu[sel], fe[sel])
            X = map_to_triangle(self.mesh.vertices[va], rule.x)
            Y = map_to_triangle(self.mesh.vertices[vb], rule.y)
            batch.pair_w = 4.0 * self.mesh.areas[tu[sel]] * self.mesh.areas[fe[sel]]
            batch.point_w = rule.weights
            out.append(
                self._finish_batch(
                    batch, X, Y,
                    bx=_simplex_bary(rule.x), by=_simplex_bary(rule.y),
                    vids_a=va, vids_b=vb,
                )
            )
        return out

    def _pair_batches(self, test_units: np.ndarray, trial_els: np.ndarray) -> list[_PairBatch]:
        """Batches covering the full product test_units x trial_els."""
        cfg = self.config
        colloc = self.op.scheme == "collocation"
        if colloc:
            tp = self.colloc_points[test_units]
            d = np.linalg.norm(
                tp[:, None, :] - self.mesh.centroids[trial_els][None, :, :], axis=-1
            )
            ratio = d / self.mesh.diameters[trial_els][None, :]
            own = self._own_panel[test_units][:, None] == trial_els[None, :]
        else:
            tc = self.mesh.centroids[test_units]
            d = np.linalg.norm(
                tc[:, None, :] - self.mesh.centroids[trial_els][None, :, :], axis=-1
            )
            diam = np.maximum(
                self.mesh.diameters[test_units][:, None],
                self.mesh.diameters[trial_els][None, :],
            )
            ratio = d / diam
            tv = self.mesh.triangles[test_units]
            fv = self.mesh.triangles[trial_els]
            own = (tv[:, None, :, None] == fv[None, :, None, :]).any(axis=(2, 3))
        orders = cfg.regular_order(ratio)
        depths = cfg.subdivision_depth(ratio)
        if colloc:
            # point-panel quadrature is cheap; one extra split keeps the
            # gradient kernels inside the declared tolerance
            depths = np.minimum(depths + (depths > 0), 3)

        batches: list[_PairBatch] = []
        near = np.zeros_like(own)
        if colloc:
            near = (ratio < 1.0) & ~own
            ti, ei = np.nonzero(near)
            if len(ti):
                batches.append(self._near_colloc_batch(test_units[ti], trial_els[ei]))
        reg = ~own & ~near
        tiers = orders * 16 + depths
        for tier in np.unique(tiers[reg]) if reg.any() else []:
            order, depth = int(tier) // 16, int(tier) % 16
            ti, ei = np.nonzero((tiers == tier) & reg)
            npts = len(triangle_rule(order)[1]) * 4 ** depth
            if self.op.scheme == "galerkin":
                npts = npts * npts
            chunk = max(1, _CHUNK // max(1, npts))
            for lo in range(0, len(ti), chunk):
                sl = slice(lo, lo + chunk)
                batches.append(
                    self._regular_batch(
                        test_units[ti[sl]], trial_els[ei[sl]], order, depth
                    )
                )
        if own.any():
            ti, ei = np.nonzero(own)
            tu, fe = test_units[ti], trial_els[ei]
            if colloc:
                if self.op.kind == "V":
                    batches.append(self._duffy_batch(tu, fe))
                else:
                    batches.append(self._zero_batch(tu, fe))
            else:
                batches.extend(self._singular_batches(tu, fe))
        return batches

    def _project_to_panel(self, pts: np.ndarray, els: np.ndarray) -> np.ndarray:
        """Closest points on the panels (projection clamped inside)."""
        corners = self.mesh.corners[els]
        a, b, c = corners[:, 0], corners[:, 1], corners[:, 2]
        n = self.mesh.normals[els]
        proj = pts - np.einsum("pd,pd->p", pts - a, n)[:, None] * n
        bary = self._panel_bary(corners, proj)
        bary = np.clip(bary, 0.0, None)
        bary /= bary.sum(axis=1)[:, None]
        return np.einsum("pk,pkd->pd", bary, corners)

    @staticmethod
    def _panel_bary(corners: np.ndarray, pts: np.ndarray) -> np.ndarray:
        a, b, c = corners[:, 0], corners[:, 1], corners[:, 2]
        n = np.cross(b - a, c - a)
        nn = np.einsum("pd,pd->p", n, n)
        l1 = np.einsum("pd,pd->p", n, np.cross(c - pts, a - pts)) / nn
        l2 = np.einsum("pd,pd->p", n, np.cross(a - pts, b - pts)) / nn
        return np.stack([1.0 - l1 - l2, l1, l2], axis=1)

    def _near_colloc_batch(self, tu, fe) -> _PairBatch:
        """Nearly singular point-panel pairs: Duffy fan at the foot of
        the point, which regularizes r = sqrt(d_perp^2 + rho^2)."""
        batch = _PairBatch(tu, fe)
        uv, w0 = duffy_interior_rule(self.config.duffy_order)
        nq = len(uv)
        X = self.colloc_points[tu]
        foot = self._project_to_panel(X, fe)
        corners = self.mesh.corners[fe]
        Ys = np.empty((len(tu), 3 * nq, 3))
        Ws = np.empty((len(tu), 3 * nq))
        for k in range(3):
            v0 = corners[:, k]
            v1 = corners[:, (k + 1) % 3]
            e1 = v0 - foot
            e2 = v1 - v0
            Y = (
                foot[:, None, :]
                + uv[None, :, 0, None]
                * (e1[:, None, :] + uv[None, :, 1, None] * e2[:, None, :])
            )
            area2 = np.linalg.norm(np.cross(e1, e2), axis=1)
            Ys[:, k * nq : (k + 1) * nq] = Y
            Ws[:, k * nq : (k + 1) * nq] = area2[:, None] * w0[None, :]
        batch.w_full = Ws
        kwargs = {}
        if self.op.trial_space == "P1":
            bary = self._points_bary(corners, Ys)
            return self._finish_near_colloc(batch, X, Ys, bary)
        return self._finish_batch(batch, X[:, None, :], Ys)

    def _finish_near_colloc(self, batch, X, Ys, bary):
        # P1 basis varies per pair here; evaluation handles the dense case
        b = self._finish_batch(batch, X[:, None, :], Ys)
        b.by = bary  # (p, q, 3) dense
        b.vids_b = self.mesh.triangles[b.trial]
        return b

    @staticmethod
    def _points_bary(corners: np.ndarray, pts: np.ndarray) -> np.ndarray:
        a, b, c = corners[:, 0], corners[:, 1], corners[:, 2]
        n = np.cross(b - a, c - a)
        nn = np.einsum("pd,pd->p", n, n)
        l1 = np.einsum("pd,pqd->pq", n, np.cross(c[:, None] - pts, a[:, None] - pts)) / nn[:, None]
        l2 = np.einsum("pd,pqd->pq", n, np.cross(a[:, None] - pts, b[:, None] - pts)) / nn[:, None]
        return np.stack([1.0 - l1 - l2, l1, l2], axis=-1)

    # ==================================================================
    # evaluation
    # ==================================================================
    def _batch_values(self, batch: _PairBatch, svals: np.ndarray):
        """Moment values: "scalar" (p, ns), "p1col" (p, 3, ns),
        "p1p1" (p, 3, 3, ns)."""
        op = self.op
        ns = len(svals)
        p = len(batch.test)
        if batch.zero:
            if op.test_space == "P1":
                return np.zeros((p, 3, 3, ns), complex), "p1p1"
            if op.trial_space == "P1":
                return np.zeros((p, 3, ns), complex), "p1col"
            return np.zeros((p, ns), complex), "scalar"

        w_plain = batch.weights()
        E = np.exp(np.multiply.outer(-svals / self.c, batch.r))  # (ns, p, q)
        if op.kind == "V":
            core = w_plain[None] * E
        elif op.kind in ("K", "KA"):
            core = (
                -(1.0 / batch.r[None] + (svals / self.c)[:, None, None])
                * (batch.u * w_plain)[None]
                * E
            )
        else:  # D
            core = w_plain[None] * E
            i0 = core.sum(axis=2)
            iab = np.einsum("spq,qa,qb->spab", core, batch.bx, batch.by)
            curls = np.einsum("pad,pbd->pab", batch.curl_a, batch.curl_b)
            vals = curls[None] * i0[:, :, None, None]
            vals += (svals / self.c)[:, None, None, None] ** 2 * batch.nn[None, :, None, None] * iab
            return np.moveaxis(vals, 0, -1), "p1p1"

        if op.test_space == "P1":
            vals = np.einsum("spq,qa,qb->spab", core, batch.bx, batch.by)
            return np.moveaxis(vals, 0, -1), "p1p1"
        if op.trial_space == "P1":
            spec = "spq,pqb->spb" if batch.by.ndim == 3 else "spq,qb->spb"
            vals = np.einsum(spec, core, batch.by)
            return np.moveaxis(vals, 0, -1), "p1col"
        return np.moveaxis(core.sum(axis=2), 0, -1), "scalar"

    # ---------------- full matrix ----------------
    def matrix(self, s: complex) -> np.ndarray:
        """Dense operator matrix at one frequency (geometry cached)."""
        if self._matrix_batches is None:
            if self.op.scheme == "collocation":
                units = np.arange(len(self.colloc_points))
            else:
                units = np.arange(self.mesh.num_triangles)
            self._matrix_batches = self._pair_batches(
                units, np.arange(self.mesh.num_triangles)
            )
        M = np.zeros(self.shape, dtype=complex)
        one = np.array([complex(s)])
        for batch in self._matrix_batches:
            if batch.zero:
                continue
            vals, layout = self._batch_values(batch, one)
            self._scatter_full(M, batch, vals[..., 0], layout)
        return M

    def drop_matrix_cache(self) -> None:
        self._matrix_batches = None

    def _scatter_full(self, M, batch, vals, layout):
        ncols = M.shape[1]
        if layout == "scalar":
            # pairs are unique within the matrix layout
            M[batch.test, batch.trial] += vals
            return
        if layout == "p1col":
            rows = np.repeat(batch.test[:, None], 3, axis=1)
            flat = (rows * ncols + batch.vids_b).ravel()
        else:  # p1p1
            flat = (
                batch.vids_a[:, :, None] * ncols + batch.vids_b[:, None, :]
            ).ravel()
        v = vals.ravel()
        upd = np.bincount(flat, weights=v.real, minlength=M.size) + 1j * np.bincount(
            flat, weights=v.imag, minlength=M.size
        )
        M.reshape(-1)[:] += upd

    # ---------------- sub-blocks, entries, fibers ----------------
    def _units_for_rows(self, rows: np.ndarray):
        """Test units whose contributions can hit the given row dofs."""
        if self.op.test_space != "P1":
            return np.asarray(rows, dtype=int)
        v2e = self.vertex_elements()
        els = np.unique(np.concatenate([v2e[r] for r in rows])) if len(rows) else np.array([], int)
        return els

    def _els_for_cols(self, cols: np.ndarray):
        if self.op.trial_space == "P0":
            return np.asarray(cols, dtype=int)
        v2e = self.vertex_elements()
        return np.unique(np.concatenate([v2e[c] for c in cols])) if len(cols) else np.array([], int)

    def block_multi(self, rows, cols, svals) -> np.ndarray:
        """Sub-block rows x cols at several frequencies: (nr, nc, ns).

        Matches ``matrix(s)[np.ix_(rows, cols)]`` and element-wise
        ``entry`` calls (identical per-pair arithmetic).
        """
        rows = np.asarray(rows, dtype=int)
        cols = np.asarray(cols, dtype=int)
        svals = np.asarray(svals, dtype=complex)
        sub = np.zeros((len(rows), len(cols), len(svals)), dtype=complex)
        if len(rows) == 0 or len(cols) == 0:
            return sub
        units = self._units_for_rows(rows)
        els = self._els_for_cols(cols)
        rpos = np.full(self.n_rows, -1)
        rpos[rows] = np.arange(len(rows))
        cpos = np.full(self.n_cols, -1)
        cpos[cols] = np.arange(len(cols))
        for batch in self._pair_batches(units, els):
            if batch.zero:
                continue
            vals, layout = self._batch_values(batch, svals)
            if layout == "scalar":
                ri = rpos[batch.test]
                ci = cpos[batch.trial]
                keep = (ri >= 0) & (ci >= 0)
                np.add.at(sub, (ri[keep], ci[keep]), vals[keep])
            elif layout == "p1col":
                ri = np.repeat(rpos[batch.test][:, None], 3, axis=1)
                ci = cpos[batch.vids_b]
                keep = (ri >= 0) & (ci >= 0)
                np.add.at(sub, (ri[keep], ci[keep]), vals[keep])
            else:
                ri = np.broadcast_to(rpos[batch.vids_a][:, :, None], vals.shape[:3])
                ci = np.broadcast_to(cpos[batch.vids_b][:, None, :], vals.shape[:3])
                keep = (ri >= 0) & (ci >= 0)
                np.add.at(sub, (ri[keep], ci[keep]), vals[keep])
        return sub

    def block(self, rows, cols, s: complex) -> np.ndarray:
        """Dense sub-block at one frequency, shape (len(rows), len(cols))."""
        return self.block_multi(rows, cols, np.array([complex(s)]))[..., 0]

    def entry(self, i: int, j: int, s: complex) -> complex:
        """Single operator entry; identical arithmetic to ``block``."""
        return complex(self.block_multi([i], [j], np.array([complex(s)]))[0, 0, 0])

    def fiber(self, i: int, j: int, svals) -> np.ndarray:
        """Entry (i, j) across many frequencies, vectorized in s."""
        return self.block_multi([i], [j], svals)[0, 0, :]


def integral_free_term(
    mesh: SurfaceMesh,
    scheme: str = "collocation",
    points: np.ndarray | None = None,
    config: QuadratureConfig | None = None,
    wave_speed: float = 1.0,
) -> np.ndarray:
    """Jump coefficients C of the double-layer representation.

    Galerkin: the constant 1/2 (per P1 node).  Collocation: the
    geometry-dependent solid-angle fraction at each collocation point,
    computed through the rigid-body identity C = -(static K row sum),
    which also absorbs the quadrature's own consistency error.
    """
    if scheme == "galerkin":
        return np.full(mesh.num_vertices, 0.5)
    asm = Assembler(
        mesh,
        Operator("K", "collocation"),
        config=config,
        wave_speed=wave_speed,
        collocation_points=points,
    )
    Ks = asm.matrix(0.0)
    return -np.real(Ks.sum(axis=1))
