"""Time grid and the elliptic-contour frequency quadrature.

The convolution memory is carried by one first-order ODE per complex
frequency s_l; those frequencies and their weights come from the
trapezoidal rule in the conformal coordinate sigma of an elliptic map

    gamma(sigma) = (sqrt(2q-1) (1/k + sn) / (1/k - sn) - 1) / (d (q-1))

whose image of the line Im sigma = K'/2 is a circle through the origin
with rightmost point 2/d.  Here d = 2 dt_min / D with the tableau's
contour diameter D, so the circle (in z = dt_min * s coordinates)
encloses the region where |R(z)| > 1 and every per-step recursion
factor R(dt_j s_l) stays bounded by ~1.  For the 1-stage method D = 2
and d reduces to dt_min.

All elliptic evaluations use the modulus-k (MATLAB parameter m = k^2)
convention; the alternative reading, with sn at modulus k^2, places the
pole of gamma on the integration line and is kept only behind the
``convention`` switch for the oracle comparison test.

The sigma points march left to right, which traverses the circle
clockwise around the enclosed poles; with that orientation the weights

    w_l = 4 K / (2 pi i N_Q) * gamma'(sigma_l)

make sum_l w_l f(s_l) a direct approximation of the history integral
(validated end to end by the scalar convolution oracle).
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .elliptic import (
    complete_elliptic_k,
    complementary_elliptic_k,
    jacobi_elliptic,
)
from .runge_kutta import ButcherTableau, eigen_moduli

__all__ = [
    "TimeGrid",
    "ContourRule",
    "build_time_grid",
    "step_ratio_q",
    "default_nq",
    "build_contour",
]

# q ~ 1 guard for uniform grids ("q = 1, k = 0" is outside the elliptic
# domain); the offset is empirically invisible in the oracle error.
Q_UNIFORM_DELTA = 1e-3


@dataclass(frozen=True)
class TimeGrid:
    """Graded time grid t_n = T (n/N)^alpha, n = 0..N.

    ``dt_const = T/N`` is the nominal step the benchmark tables quote.
    """

    t: np.ndarray
    alpha: float

    @property
    def N(self) -> int:
        return len(self.t) - 1

    @property
    def T(self) -> float:
        return float(self.t[-1])

    @property
    def dt(self) -> np.ndarray:
        """Step sizes dt_i = t_i - t_{i-1}, shape (N,)."""
        return np.diff(self.t)

    @property
    def dt_const(self) -> float:
        return self.T / self.N

    @property
    def dt_min(self) -> float:
        return float(self.dt.min())

    @property
    def dt_max(self) -> float:
        return float(self.dt.max())


def build_time_grid(T: float, N: int, alpha: float = 1.0) -> TimeGrid:
    """Build t_n = T (n/N)^alpha; alpha = 1 gives the uniform grid."""
    if not T > 0.0:
        raise ValueError(f"end time must be positive, got {T}")
    if int(N) < 1:
        raise ValueError(f"step count must be >= 1, got {N}")
    if alpha < 1.0:
        raise ValueError(f"grading exponent must be >= 1, got {alpha}")
    n = np.arange(int(N) + 1, dtype=float)
    t = T * (n / N) ** alpha
    t[-1] = T
    return TimeGrid(t=t, alpha=float(alpha))


def step_ratio_q(grid: TimeGrid, tab: ButcherTableau) -> float:
    """Step-ratio parameter q of the contour.

    q = 5 dt_max max|lam(A)| / (dt_min min|lam(A)|), with the factor 5
    dropped for the 1-stage method; values at or below 1 (uniform grids)
    are lifted to 1 + 1e-3.
    """
    lmin, lmax = eigen_moduli(tab)
    fac = 5.0 if tab.m > 1 else 1.0
    q = fac * grid.dt_max * lmax / (grid.dt_min * lmin)
    if q <= 1.0 + Q_UNIFORM_DELTA:
        q = 1.0 + Q_UNIFORM_DELTA
    return float(q)


def default_nq(N: int, m: int) -> int:
    """Default frequency count: ceil(N ln N), or ceil(N (ln N)^2) for m > 1."""
    if N < 2:
        raise ValueError("need at least 2 steps for the default frequency count")
    ln = np.log(N)
    nq = N * ln * ln if m > 1 else N * ln
    return max(int(np.ceil(nq)), N)


@dataclass(frozen=True)
class ContourRule:
    """Frequency nodes s_l and weights w_l, plus the generating data.

    Nodes occur in complex-conjugate pairs: s_{N_Q+1-l} = conj(s_l) and
    likewise for the weights, so kernels need assembling at only
    ceil(N_Q/2) frequencies.
    """

    s: np.ndarray
    w: np.ndarray
    q: float
    k: float
    grid: TimeGrid
    sigma: np.ndarray = field(repr=False, default=None)

    @property
    def nq(self) -> int:
        return len(self.s)

    def conj_index(self, ell: int) -> int:
        """Index of the conjugate partner of node ``ell`` (0-based)."""
        return self.nq - 1 - ell

    def half_indices(self) -> np.ndarray:
        """Indices of one representative per conjugate pair (0-based)."""
        return np.arange((self.nq + 1) // 2)

    def dump_csv(self, path) -> None:
        """Write (l, Re s, Im s, Re w, Im w) rows for the usage reports."""
        buf = io.StringIO()
        buf.write("l,re_s,im_s,re_w,im_w\n")
        for i in range(self.nq):
            buf.write(
                f"{i + 1},{self.s[i].real:.16e},{self.s[i].imag:.16e},"
                f"{self.w[i].real:.16e},{self.w[i].imag:.16e}\n"
            )
        with open(path, "w") as fh:
            fh.write(buf.getvalue())


def build_contour(
    grid: TimeGrid,
    tab: ButcherTableau,
    nq: int,
    convention: str = "parameter",
    diameter: float | None = None,
) -> ContourRule:
    """Build the frequency rule for a time grid and tableau.

    Only the first ceil(nq/2) nodes are computed from the elliptic map;
    the rest are mirrored by complex conjugation.

    Parameters
    ----------
    grid, tab
    nq : int
        Node count N_Q (>= 1).
    convention : {"parameter", "modulus"}
        How K(k^2), K'(k^2) and sn(sigma) are read; "parameter" is the
        convention the oracle validates, "modulus" exists for the
        comparison test only.
    diameter : float, optional
        Override of the tableau's contour diameter.
    """
    if nq < 1:
        raise ValueError("need at least one quadrature node")
    q = step_ratio_q(grid, tab)
    root = np.sqrt(2.0 * q - 1.0)
    k = (q - root) / (q + root)
    k = min(max(k, 1e-12), 1.0 - 1e-12)

    if convention == "parameter":
        kj = k  # sn/cn/dn modulus; "K(k^2)" = parameter k^2
    elif convention == "modulus":
        kj = k * k
    else:
        raise ValueError(f"unknown convention {convention!r}")
    K = complete_elliptic_k(kj)
    Kp = complementary_elliptic_k(kj)

    D = float(diameter) if diameter is not None else tab.contour_diameter
    scale = grid.dt_min * 2.0 / D

    nh = (nq + 1) // 2
    ell = np.arange(1, nh + 1, dtype=float)
    sigma_h = -K + (ell - 0.5) * (4.0 * K / nq) + 0.5j * Kp

    sn, cn, dn = jacobi_elliptic(sigma_h, kj)
    kinv = 1.0 / k
    gam = (root * (kinv + sn) / (kinv - sn) - 1.0) / (scale * (q - 1.0))
    dgam = root / (scale * (q - 1.0)) * 2.0 * cn * dn / (k * (kinv - sn) ** 2)
    w_h = (4.0 * K) / (2j * np.pi * nq) * dgam

    s = np.empty(nq, dtype=complex)
    w = np.empty(nq, dtype=complex)
    s[:nh] = gam
    w[:nh] = w_h
    s[nh:] = np.conj(gam[: nq - nh][::-1])
    w[nh:] = np.conj(w_h[: nq - nh][::-1])

    sigma = np.empty(nq, dtype=complex)
    sigma[:nh] = sigma_h
    sigma[nh:] = (2.0 * K - sigma_h[: nq - nh] + 1j * Kp)[::-1]

    return ContourRule(s=s, w=w, q=q, k=float(k), grid=grid, sigma=sigma)
