"""Hierarchical-matrix substrate: cluster tree, admissible partition,
adaptive cross approximation with recompression, pivot estimation.

The tree bisects bounding boxes at the median of the widest axis, so it
stays balanced; admissibility is the purely geometric criterion

    min(diam(tau), diam(sigma)) <= eta * dist(tau, sigma),

evaluated on bounding boxes, hence identical for every frequency.
Low-rank blocks come from partially pivoted ACA with the running
Frobenius-norm estimate as stopping rule; a QR + SVD recompression
yields the orthonormal-factor form that both improves compression and
enables the pivot-row estimate used by the frequency-direction loops.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    "ClusterNode",
    "build_tree",
    "BlockPartition",
    "build_partition",
    "LowRank",
    "aca",
    "recompress",
    "estimate_pivot",
    "partition_stats_csv",
]

DEFAULT_ETA = 1.0
DEFAULT_LEAF_SIZE = 30


@dataclass
class ClusterNode:
    """Node of a geometric cluster tree over dof support points."""

    indices: np.ndarray
    bbox_min: np.ndarray
    bbox_max: np.ndarray
    children: list = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def size(self) -> int:
        return len(self.indices)

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.bbox_max - self.bbox_min))

    def distance(self, other: "ClusterNode") -> float:
        gap = np.maximum(
            0.0,
            np.maximum(
                self.bbox_min - other.bbox_max, other.bbox_min - self.bbox_max
            ),
        )
        return float(np.linalg.norm(gap))


def build_tree(points: np.ndarray, leaf_size: int = DEFAULT_LEAF_SIZE) -> ClusterNode:
    """Balanced geometric-bisection tree over dof support points.

    Splits at the median along the widest bounding-box axis, so sibling
    sizes differ by at most one.
    """
    if leaf_size < 1:
        raise ValueError("leaf_size must be >= 1")
    points = np.asarray(points, dtype=float)

    def make(idx: np.ndarray) -> ClusterNode:
        pts = points[idx]
        node = ClusterNode(idx, pts.min(axis=0), pts.max(axis=0))
        if len(idx) > leaf_size:
            axis = int(np.argmax(node.bbox_max - node.bbox_min))
            order = np.argsort(pts[:, axis], kind="stable")
            half = len(idx) // 2
            node.children = [make(idx[order[:half]]), make(idx[order[half:]])]
        return node

    return make(np.arange(len(points)))


@dataclass(frozen=True)
class Block:
    """One block of the partition: row cluster x column cluster."""

    rows: np.ndarray
    cols: np.ndarray
    admissible: bool


@dataclass
class BlockPartition:
    """Disjoint, exhaustive cover of the index product by blocks."""

    blocks: list[Block]
    n_rows: int
    n_cols: int
    eta: float

    @property
    def admissible_fraction(self) -> float:
        adm = sum(b.rows.size * b.cols.size for b in self.blocks if b.admissible)
        return adm / float(self.n_rows * self.n_cols)

    def check_cover(self) -> bool:
        """Every index pair covered exactly once (O(N^2) memory; tests)."""
        count = np.zeros((self.n_rows, self.n_cols), dtype=np.int8)
        for b in self.blocks:
            count[np.ix_(b.rows, b.cols)] += 1
        return bool((count == 1).all())


def build_partition(
    row_tree: ClusterNode,
    col_tree: ClusterNode | None = None,
    eta: float = DEFAULT_ETA,
) -> BlockPartition:
    """Admissible block partition from one or two cluster trees."""
    if eta <= 0:
        raise ValueError("admissibility parameter must be positive")
    col_tree = col_tree if col_tree is not None else row_tree
    blocks: list[Block] = []

    def visit(a: ClusterNode, b: ClusterNode):
        if min(a.diameter, b.diameter) <= eta * a.distance(b):
            blocks.append(Block(a.indices, b.indices, True))
            return
        if a.is_leaf and b.is_leaf:
            blocks.append(Block(a.indices, b.indices, False))
            return
        # split the larger (or the only splittable) side
        if a.is_leaf:
            for bc in b.children:
                visit(a, bc)
        elif b.is_leaf:
            for ac in a.children:
                visit(ac, b)
        else:
            for ac in a.children:
                for bc in b.children:
                    visit(ac, bc)

    visit(row_tree, col_tree)
    n_rows = row_tree.size
    n_cols = col_tree.size
    return BlockPartition(blocks, n_rows, n_cols, eta)


@dataclass
class LowRank:
    """Low-rank factorization block ~ U V^H (optionally SVD form).

    In SVD form U and V have orthonormal columns and ``sigma`` holds the
    nonincreasing positive singular values; the block is U S V^H.
    """

    U: np.ndarray
    V: np.ndarray
    sigma: np.ndarray | None = None

    @property
    def rank(self) -> int:
        return self.U.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.U.shape[0], self.V.shape[0])

    def dense(self) -> np.ndarray:
        if self.sigma is not None:
            return (self.U * self.sigma) @ self.V.conj().T
        return self.U @ self.V.conj().T

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.V.conj().T @ x
        if self.sigma is not None:
            y = self.sigma[: , None] * y if y.ndim == 2 else self.sigma * y
        return self.U @ y

    def frob_inner(self, other: "LowRank") -> complex:
        """<self, other>_F = trace(self^H other), factored form."""
        a = self.U * self.sigma if self.sigma is not None else self.U
        b = other.U * other.sigma if other.sigma is not None else other.U
        g1 = a.conj().T @ b  # (r1, r2)
        g2 = other.V.conj().T @ self.V  # (r2, r1)
        return complex(np.sum(g1 * g2.T))

    def frob_norm(self) -> float:
        if self.sigma is not None:
            return float(np.linalg.norm(self.sigma))
        g = (self.U.conj().T @ self.U) @ (self.V.conj().T @ self.V)
        return float(np.sqrt(abs(np.trace(g))))

    def storage_bytes(self) -> int:
        n = self.U.size + self.V.size
        if self.sigma is not None:
            n += self.sigma.size
        return 16 * n  # complex128

    def conj(self) -> "LowRank":
        return LowRank(
            np.conj(self.U), np.conj(self.V),
            None if self.sigma is None else self.sigma.copy(),
        )


def aca(
    entry_block,
    n_rows: int,
    n_cols: int,
    eps: float,
    max_rank: int | None = None,
) -> LowRank | np.ndarray:
    """Partially pivoted adaptive cross approximation.

    Parameters
    ----------
    entry_block : callable(rows, cols) -> complex ndarray
        Evaluates sub-blocks of the target matrix.
    n_rows, n_cols : int
    eps : float
        Relative Frobenius target, ||A - UV^H||_F <= eps ||A||_F
        (estimated through the running norm of the partial sums).
    max_rank : int, optional
        Fallback threshold: once the rank would exceed it (default
        min(n_rows, n_cols)), the dense block is returned.

    Returns
    -------
    LowRank, or the dense ndarray when compression fails to pay off.
    """
    if max_rank is None:
        max_rank = min(n_rows, n_cols)
    us: list[np.ndarray] = []
    vs: list[np.ndarray] = []
    norm2 = 0.0
    used_rows: set[int] = set()
    row = 0
    for k in range(min(n_rows, n_cols)):
        if len(us) >= max_rank:
            logger.debug("aca fallback to dense (%d x %d)", n_rows, n_cols)
            return entry_block(np.arange(n_rows), np.arange(n_cols))
        used_rows.add(row)
        b = entry_block(np.array([row]), np.arange(n_cols))[0].astype(complex)
        for u, v in zip(us, vs):
            b -= u[row] * v
        col = int(np.argmax(np.abs(b)))
        delta = b[col]
        if abs(delta) < 1e-300:
            free = [i for i in range(n_rows) if i not in used_rows]
            if not free:
                break
            row = free[0]
            continue
        v = b / delta
        a = entry_block(np.arange(n_rows), np.array([col]))[:, 0].astype(complex)
        for u, vv in zip(us, vs):
            a -= vv[col] * u
        u = a
        # running norm of the partial sum including the candidate cross
        cross_terms = sum(
            2.0 * abs((uu.conj() @ u) * (vv.conj() @ v)) for uu, vv in zip(us, vs)
        )
        uv2 = float(np.linalg.norm(u) ** 2 * np.linalg.norm(v) ** 2)
        total2 = norm2 + cross_terms + uv2
        if np.sqrt(uv2) <= eps * np.sqrt(max(total2, 1e-300)):
            break  # candidate is negligible; discard it
        norm2 = total2
        us.append(u)
        vs.append(v)
        # next row: largest remaining entry of the current column term
        mask = np.ones(n_rows, dtype=bool)
        mask[list(used_rows)] = False
        if not mask.any():
            break
        row = int(np.argmax(np.abs(u) * mask))
    if not us:
        return LowRank(
            np.zeros((n_rows, 0), complex), np.zeros((n_cols, 0), complex)
        )
    return LowRank(np.column_stack(us), np.conj(np.column_stack(vs)))


def recompress(lr: LowRank, eps: float) -> LowRank:
    """QR + SVD truncation to near-optimal rank (orthonormal factors).

    The QR factors of U and V reduce the SVD to the small r x r inner
    matrix R_U R_V^H; singular values below eps * sigma_max are dropped.
    The result reproduces the input within eps in the Frobenius norm.
    """
    if lr.rank == 0:
        return LowRank(lr.U.copy(), lr.V.copy(), np.zeros(0))
    U = lr.U * lr.sigma if lr.sigma is not None else lr.U
    qu, ru = np.linalg.qr(U)
    qv, rv = np.linalg.qr(lr.V)
    w, sig, zh = np.linalg.svd(ru @ rv.conj().T)
    keep = sig > (eps * sig[0] if sig[0] > 0 else 0.0)
    k = max(int(keep.sum()), 0)
    return LowRank(qu @ w[:, :k], qv @ zh.conj().T[:, :k], sig[:k])


def estimate_pivot(lr: LowRank) -> tuple[int, int, float]:
    """Pivot-position estimate from the SVD form.

    With orthonormal columns, max_j |a_ij| <= sum_k |u_ik sigma_k| for
    every row i, so the row (and analogously column) maximizing that
    bound locates an approximately largest entry; the returned value is
    the row bound at the estimated position (an upper bound on |a| at
    the true maximum's row).
    """
    if lr.sigma is None:
        raise ValueError("estimate_pivot requires the SVD (recompressed) form")
    if lr.rank == 0:
        return 0, 0, 0.0
    row_scores = np.abs(lr.U * lr.sigma).sum(axis=1)
    col_scores = np.abs(lr.V * lr.sigma).sum(axis=1)
    i = int(np.argmax(row_scores))
    j = int(np.argmax(col_scores))
    return i, j, float(row_scores[i])


def partition_stats_csv(partition: BlockPartition, ranks: dict[int, int] | None, path) -> None:
    """Dump block counts, admissible fraction and a rank histogram."""
    lines = ["metric,value"]
    lines.append(f"blocks,{len(partition.blocks)}")
    adm = sum(1 for b in partition.blocks if b.admissible)
    lines.append(f"admissible_blocks,{adm}")
    lines.append(f"admissible_fraction,{partition.admissible_fraction:.6f}")
    lines.append(f"eta,{partition.eta}")
    if ranks:
        vals = np.array(sorted(ranks.values()))
        hist, edges = np.histogram(vals, bins=min(10, max(1, vals.max())))
        for h, lo, hi in zip(hist, edges[:-1], edges[1:]):
            lines.append(f"rank_[{lo:.0f}-{hi:.0f}),{h}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
