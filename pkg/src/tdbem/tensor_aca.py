"""Frequency-direction cross compression of matrix families.

A boundary operator evaluated at the N_Q contour frequencies forms a
third-order array C[i, j, k] (rows x cols x frequency).  The greedy
cross loop approximates it by a short sum of outer products

    C ~ sum_l H_l (x) f_l,

where each face H_l is the residual matrix at one adaptively chosen
frequency k_l (assembled dense, or ACA-compressed for admissible
blocks) and each fiber f_l holds one residual entry across all
frequencies, normalized so f_l[k_l] = 1.  The rank r equals the number
of frequencies at which faces were actually assembled.

The stopping rule compares the candidate cross magnitude ||H_l||_F
||f_l||_2 against eps times the running Frobenius norm of the partial
sum, evaluated with the Gram recursion

    ||C^(l)||_F^2 = sum_{d,d'} <H_d', H_d> <f_d', f_d>,

which stays factored for low-rank faces.  A converged candidate is
discarded (rank = l - 1).  Frequency bookkeeping per block feeds the
usage reports.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .hmatrix import LowRank, aca, estimate_pivot, recompress

logger = logging.getLogger(__name__)

__all__ = [
    "Cross",
    "CompressedTensorBlock",
    "DenseTensor",
    "compress_block",
    "frob_norm_sq",
    "pivot_search",
    "zero_block_probe",
    "apply_frequency_sum",
]


class DenseTensor:
    """In-memory (rows, cols, nq) array behind the slab interface.

    The reference/test adapter; the production adapter wraps a kernel
    assembler and a contour rule.
    """

    def __init__(self, data: np.ndarray):
        self.data = np.asarray(data, dtype=complex)
        self.face_evals = 0

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def face(self, k: int) -> np.ndarray:
        self.face_evals += 1
        return self.data[:, :, k]

    def face_block(self, rows, cols, k: int) -> np.ndarray:
        return self.data[np.ix_(rows, cols)][:, :, k]

    def fiber(self, i: int, j: int) -> np.ndarray:
        return self.data[i, j, :]


@dataclass
class Cross:
    """One face (x) fiber term; f[pivot_k] = 1 by construction."""

    face: np.ndarray | LowRank
    fiber: np.ndarray
    pivot: tuple[int, int, int]  # (i, j, k)

    @property
    def face_rank(self) -> int | None:
        return self.face.rank if isinstance(self.face, LowRank) else None

    def face_entry(self, i: int, j: int) -> complex:
        if isinstance(self.face, LowRank):
            u = self.face.U[i]
            if self.face.sigma is not None:
                u = u * self.face.sigma
            return complex(u @ np.conj(self.face.V[j]))
        return complex(self.face[i, j])

    def face_rows(self, rows) -> np.ndarray:
        if isinstance(self.face, LowRank):
            u = self.face.U[rows]
            if self.face.sigma is not None:
                u = u * self.face.sigma
            return u @ self.face.V.conj().T
        return self.face[rows]

    def face_norm(self) -> float:
        if isinstance(self.face, LowRank):
            return self.face.frob_norm()
        return float(np.linalg.norm(self.face))

    def face_inner(self, other: "Cross") -> complex:
        """sum_ij conj(self.face) * other.face, factored when possible."""
        a, b = self.face, other.face
        if isinstance(a, LowRank) and isinstance(b, LowRank):
            return a.frob_inner(b)
        ad = a.dense() if isinstance(a, LowRank) else a
        bd = b.dense() if isinstance(b, LowRank) else b
        return complex(np.sum(np.conj(ad) * bd))

    def storage_bytes(self) -> int:
        n = self.face.storage_bytes() if isinstance(self.face, LowRank) else 16 * self.face.size
        return n + 16 * self.fiber.size


@dataclass
class CompressedTensorBlock:
    """Sum of crosses approximating one block across all frequencies."""

    shape: tuple[int, int, int]
    crosses: list[Cross] = field(default_factory=list)
    face_mode: str = "dense"
    zero_block: bool = False
    raw_face_evals: int = 0

    @property
    def rank(self) -> int:
        return len(self.crosses)

    @property
    def used_frequencies(self) -> list[int]:
        return [c.pivot[2] for c in self.crosses]

    def entry(self, i: int, j: int, k: int) -> complex:
        return complex(
            sum(c.face_entry(i, j) * c.fiber[k] for c in self.crosses)
        )

    def dense(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=complex)
        for c in self.crosses:
            face = c.face.dense() if isinstance(c.face, LowRank) else c.face
            out += face[:, :, None] * c.fiber[None, None, :]
        return out

    def frob_norm_sq(self) -> float:
        return frob_norm_sq(self.crosses)

    def apply_frequency_sum(self, W: np.ndarray) -> np.ndarray:
        return apply_frequency_sum(self, W)

    def storage_bytes(self) -> int:
        return sum(c.storage_bytes() for c in self.crosses)


def frob_norm_sq(crosses: list[Cross]) -> float:
    """||sum_l H_l (x) f_l||_F^2 by the Gram recursion (no densifying)."""
    r = len(crosses)
    if r == 0:
        return 0.0
    gh = np.empty((r, r), dtype=complex)
    gf = np.empty((r, r), dtype=complex)
    for d in range(r):
        for dp in range(r):
            gh[d, dp] = crosses[dp].face_inner(crosses[d])
            gf[d, dp] = np.conj(crosses[dp].fiber) @ crosses[d].fiber
    return float(np.real(np.sum(gh * gf)))


def pivot_search(face, mode: str = "expand") -> tuple[int, int, complex]:
    """Largest-modulus entry of a face (dense or low rank).

    "expand" densifies low-rank faces and takes the true maximum (the
    robust default); "estimate" uses the orthonormal-factor row/column
    bound and returns the entry at the estimated position.
    """
    if isinstance(face, LowRank):
        if mode == "expand":
            dense = face.dense()
            i, j = np.unravel_index(np.argmax(np.abs(dense)), dense.shape)
            return int(i), int(j), complex(dense[i, j])
        if mode == "estimate":
            i, j, _ = estimate_pivot(face)
            u = face.U[i] * face.sigma if face.sigma is not None else face.U[i]
            return int(i), int(j), complex(u @ np.conj(face.V[j]))
        raise ValueError(f"unknown pivot mode {mode!r}")
    i, j = np.unravel_index(np.argmax(np.abs(face)), face.shape)
    return int(i), int(j), complex(face[i, j])


def zero_block_probe(slab, probe_count: int = 3, tol: float = 0.0) -> bool:
    """Probe whether the block is identically zero.

    Checks every entry of the first-frequency face plus ``probe_count``
    spot fibers (corners and centre), so a block that vanishes at the
    first frequency only is still detected as nonzero.
    """
    nr, nc, nq = slab.shape
    f0 = slab.face_block(np.arange(nr), np.arange(nc), 0)
    if np.abs(f0).max(initial=0.0) > tol:
        return False
    spots = [(0, 0), (nr - 1, nc - 1), (nr // 2, nc // 2)][: max(1, probe_count)]
    for i, j in spots:
        if np.abs(slab.fiber(i, j)).max(initial=0.0) > tol:
            return False
    return True


def compress_block(
    slab,
    eps: float,
    face_mode: str = "dense",
    pivot_mode: str = "expand",
    eps_face: float | None = None,
    zero_tol: float = 0.0,
) -> CompressedTensorBlock:
    """Greedy face (x) fiber compression of one block (all frequencies).

    Parameters
    ----------
    slab
        Entry oracle with ``shape``, ``face(k)``, ``face_block(rows,
        cols, k)`` and ``fiber(i, j)``.
    eps : float
        Frequency-direction stopping tolerance (Frobenius, relative).
    face_mode : {"dense", "aca"}
        Whether admissible faces are kept dense or ACA-compressed (with
        recompression to the orthonormal SVD form).
    pivot_mode : {"expand", "estimate"}
        Pivot search on low-rank faces; dense expansion is the default
        for all potentials.
    eps_face : float, optional
        Face ACA tolerance; defaults to eps / 100 (the face
        approximation must not limit the frequency loop).
    zero_tol : float
        Zero-probe threshold.
    """
    nr, nc, nq = slab.shape
    block = CompressedTensorBlock((nr, nc, nq), face_mode=face_mode)
    if zero_block_probe(slab, tol=zero_tol):
        block.zero_block = True
        block.raw_face_evals = getattr(slab, "face_evals", 0)
        return block
    if eps_face is None:
        eps_face = eps / 100.0

    all_rows = np.arange(nr)
    all_cols = np.arange(nc)
    norm2 = 0.0
    k_next = 0
    used: set[int] = set()

    while len(used) < nq:
        k = k_next
        used.add(k)
        # residual face at frequency k
        if face_mode == "aca":
            def resid(rows, cols, _k=k):
                out = slab.face_block(rows, cols, _k)
                for c in block.crosses:
                    out = out - c.face_rows(rows)[:, cols] * c.fiber[_k]
                return out

            got = aca(lambda r_, c_: resid(r_, c_), nr, nc, eps_face)
            H = recompress(got, eps_face) if isinstance(got, LowRank) else got
        else:
            H = slab.face(k).astype(complex)
            for c in block.crosses:
                face = c.face.dense() if isinstance(c.face, LowRank) else c.face
                H = H - face * c.fiber[k]
        if hasattr(slab, "face_evals"):
            block.raw_face_evals = slab.face_evals

        i, j, piv = pivot_search(H, pivot_mode)
        if pivot_mode == "estimate" and abs(piv) == 0.0:
            # stagnation: fall back to the exhaustive dense search
            i, j, piv = pivot_search(H, "expand")
        if abs(piv) == 0.0:
            break  # residual face is exactly zero

        fib = slab.fiber(i, j).astype(complex)
        for c in block.crosses:
            fib = fib - c.face_entry(i, j) * c.fiber
        fib = fib / piv  # fib[k] = 1 by construction

        cand = Cross(face=H, fiber=fib, pivot=(i, j, k))
        hn = cand.face_norm()
        fn = float(np.linalg.norm(fib))
        # Gram-recursion increment: 2 Re sum_d GH[l,d] Gf[l,d] + |H|^2 |f|^2
        inc = hn * hn * fn * fn
        for c in block.crosses:
            gh = np.conj(cand.face_inner(c))  # sum H_l conj(H_d)
            gf = np.vdot(c.fiber, cand.fiber)  # sum f_l conj(f_d)
            inc += 2.0 * np.real(gh * gf)
        total2 = norm2 + inc
        if hn * fn <= eps * np.sqrt(max(total2, 1e-300)):
            break  # candidate below tolerance: r = l - 1
        block.crosses.append(cand)
        norm2 = total2

        rem = np.abs(fib).copy()
        rem[list(used)] = -1.0
        k_next = int(np.argmax(rem))
        if rem[k_next] < 0:
            break  # all frequencies visited
    else:
        logger.warning(
            "frequency budget exhausted: block %s compressed at full rank %d",
            block.shape, block.rank,
        )
    return block


def apply_frequency_sum(block: CompressedTensorBlock, W: np.ndarray) -> np.ndarray:
    """sum_l M(s_l) W[l] through the compressed form.

    Parameters
    ----------
    block : CompressedTensorBlock
    W : ndarray, shape (nq, ncols) or (nq, ncols, m)
        Per-frequency vectors (extra trailing dimensions allowed).

    Returns
    -------
    ndarray, shape (nrows,) + W.shape[2:]
    """
    nr, nc, nq = block.shape
    W = np.asarray(W)
    if W.shape[0] != nq or W.shape[1] != nc:
        raise ValueError(f"weight vectors shaped {W.shape}, need ({nq}, {nc}, ...)")
    out = np.zeros((nr,) + W.shape[2:], dtype=complex)
    for c in block.crosses:
        inner = np.tensordot(c.fiber, W, axes=(0, 0))  # (ncols, ...)
        if isinstance(c.face, LowRank):
            out += c.face.matvec(inner.reshape(nc, -1)).reshape((nr,) + W.shape[2:])
        else:
            out += (c.face @ inner.reshape(nc, -1)).reshape((nr,) + W.shape[2:])
    return out
