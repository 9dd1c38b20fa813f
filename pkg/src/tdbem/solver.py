"""BiCGstab for complex, possibly matrix-free operators.

Van der Vorst's algorithm without preconditioning, as the benchmark
solves prescribe.  Breakdown (vanishing rho or omega) and plain
non-convergence are reported as distinct outcomes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["bicgstab", "SolveInfo"]


@dataclass
class SolveInfo:
    converged: bool
    iterations: int
    residual: float
    reason: str


def bicgstab(apply_op, b: np.ndarray, tol: float = 1e-8, max_iter: int | None = None,
             x0: np.ndarray | None = None) -> tuple[np.ndarray, SolveInfo]:
    """Solve A x = b with the stabilized bi-conjugate gradient method.

    Parameters
    ----------
    apply_op : callable(x) -> ndarray
        Matrix-vector product of the (square) operator.
    b : ndarray
    tol : float
        Relative residual target ||Ax - b|| <= tol ||b||.
    max_iter : int, optional
        Default 4 * len(b).
    x0 : ndarray, optional

    Returns
    -------
    (x, SolveInfo)
    """
    b = np.asarray(b, dtype=complex)
    n = b.size
    if max_iter is None:
        max_iter = 4 * n
    x = np.zeros_like(b) if x0 is None else x0.astype(complex).copy()

    r = b - apply_op(x) if x.any() else b.copy()
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b), SolveInfo(True, 0, 0.0, "zero rhs")
    target = tol * bnorm

    r_hat = r.copy()
    rho_old = alpha = omega = 1.0 + 0.0j
    v = np.zeros_like(b)
    p = np.zeros_like(b)
    res = float(np.linalg.norm(r))
    if res <= target:
        return x, SolveInfo(True, 0, res / bnorm, "initial guess")

    for it in range(1, max_iter + 1):
        rho = np.vdot(r_hat, r)
        if abs(rho) < 1e-300:
            return x, SolveInfo(False, it - 1, res / bnorm, "rho breakdown")
        if it == 1:
            p = r.copy()
        else:
            beta = (rho / rho_old) * (alpha / omega)
            p = r + beta * (p - omega * v)
        v = apply_op(p)
        denom = np.vdot(r_hat, v)
        if abs(denom) < 1e-300:
            return x, SolveInfo(False, it - 1, res / bnorm, "alpha breakdown")
        alpha = rho / denom
        s = r - alpha * v
        snorm = float(np.linalg.norm(s))
        if snorm <= target:
            x = x + alpha * p
            return x, SolveInfo(True, it, snorm / bnorm, "converged")
        t = apply_op(s)
        tt = np.vdot(t, t)
        if abs(tt) < 1e-300:
            return x, SolveInfo(False, it, snorm / bnorm, "omega breakdown")
        omega = np.vdot(t, s) / tt
        if abs(omega) < 1e-300:
            return x, SolveInfo(False, it, snorm / bnorm, "omega breakdown")
        x = x + alpha * p + omega * s
        r = s - omega * t
        res = float(np.linalg.norm(r))
        if res <= target:
            return x, SolveInfo(True, it, res / bnorm, "converged")
        if not np.isfinite(res):
            return x, SolveInfo(False, it, np.inf, "diverged")
        rho_old = rho

    return x, SolveInfo(False, max_iter, res / bnorm, "max iterations")
