"""Complete elliptic integrals and Jacobi elliptic functions.

Provides the special-function substrate for the elliptic quadrature
contour: K(k) via the arithmetic-geometric mean (AGM), and sn/cn/dn for
complex argument via the descending-Landen recursion combined with the
addition theorem

    sn(x + iy, k) = (s d1 + i c d s1 c1) / (c1^2 + k^2 s^2 s1^2)

(A&S 16.21) where s, c, d are evaluated at modulus k and s1, c1, d1 at
the complementary modulus k' = sqrt(1 - k^2).  All moduli follow the
*modulus* convention: K(k) = int_0^1 dx / sqrt((1-x^2)(1-k^2 x^2)).
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "EllipticModulus",
    "complete_elliptic_k",
    "complementary_elliptic_k",
    "jacobi_elliptic",
    "jacobi_elliptic_real",
]

# Moduli are clamped into [K_MIN, 1 - K_MIN]; the contour's q-fix keeps
# callers away from both ends, the clamp only guards round-off.
K_MIN = 1e-12

_MAX_LANDEN = 32


class EllipticModulus:
    """Elliptic modulus k with its cached parameter m = k^2.

    Rejects the degenerate values k <= 0 and k >= 1; callers that would
    produce k = 0 (uniform time grids) apply the q ~ 1 fix upstream.
    """

    __slots__ = ("k", "m")

    def __init__(self, k: float):
        k = float(k)
        if not np.isfinite(k) or k <= 0.0 or k >= 1.0:
            raise ValueError(f"modulus must satisfy 0 < k < 1, got {k}")
        self.k = min(max(k, K_MIN), 1.0 - K_MIN)
        self.m = self.k * self.k

    @property
    def complement(self) -> float:
        """Complementary modulus k' = sqrt(1 - k^2)."""
        return float(np.sqrt(1.0 - self.m))

    def __repr__(self) -> str:  # pragma: no cover
        return f"EllipticModulus(k={self.k!r})"


def complete_elliptic_k(k: float) -> float:
    """Complete elliptic integral of the first kind, modulus convention.

    K(k) = int_0^1 dx / sqrt((1 - x^2)(1 - k^2 x^2)), computed by the
    AGM iteration K = pi / (2 agm(1, k')); quadratically convergent, so
    the result carries full double precision (>= 12 significant digits).

    Parameters
    ----------
    k : float
        Modulus, 0 <= k < 1.

    Returns
    -------
    float
    """
    k = float(k)
    if not np.isfinite(k) or k < 0.0 or k >= 1.0:
        raise ValueError(f"complete_elliptic_k requires 0 <= k < 1, got {k}")
    a, b = 1.0, float(np.sqrt(1.0 - k * k))
    while abs(a - b) > 1e-16 * a:
        a, b = 0.5 * (a + b), float(np.sqrt(a * b))
    return float(np.pi / (2.0 * a))


def complementary_elliptic_k(k: float) -> float:
    """Complementary integral K'(k) = K(sqrt(1 - k^2))."""
    k = float(k)
    if not np.isfinite(k) or k <= 0.0 or k >= 1.0:
        raise ValueError(f"complementary_elliptic_k requires 0 < k < 1, got {k}")
    return complete_elliptic_k(float(np.sqrt((1.0 - k) * (1.0 + k))))


def jacobi_elliptic_real(u, k: float):
    """Jacobi sn, cn, dn for real argument via the descending Landen scale.

    Vectorized over ``u``.  The AGM scale a_n, b_n, c_n depends only on
    the modulus; the amplitude recursion (DLMF 22.20(ii))

        phi_{n-1} = (phi_n + asin(c_n/a_n sin phi_n)) / 2

    runs backwards from phi_N = 2^N a_N u.

    Parameters
    ----------
    u : array_like, real
    k : float
        Modulus, 0 < k < 1 (clamped at the K_MIN guard band).

    Returns
    -------
    (sn, cn, dn) : ndarray triple, same shape as ``u``
    """
    mod = k if isinstance(k, EllipticModulus) else EllipticModulus(k)
    u = np.asarray(u, dtype=float)

    a = [1.0]
    b = [mod.complement]
    c = [mod.k]
    while abs(c[-1]) > 1e-16 and len(a) < _MAX_LANDEN:
        an = 0.5 * (a[-1] + b[-1])
        bn = float(np.sqrt(a[-1] * b[-1]))
        cn_ = 0.5 * (a[-1] - b[-1])
        a.append(an)
        b.append(bn)
        c.append(cn_)
    n = len(a) - 1

    phi = (2.0 ** n) * a[n] * u
    phi_prev = phi
    for i in range(n, 0, -1):
        phi_next = 0.5 * (phi + np.arcsin(np.clip(c[i] / a[i] * np.sin(phi), -1.0, 1.0)))
        phi_prev = phi
        phi = phi_next
    # after the loop: phi = phi_0, phi_prev = phi_1
    sn = np.sin(phi)
    cn = np.cos(phi)
    dn = cn / np.cos(phi_prev - phi)
    return sn, cn, dn


def jacobi_elliptic(z, k: float):
    """Jacobi sn, cn, dn for complex argument z, modulus k.

    Decomposes z = x + iy and combines real-argument values at modulus k
    (in x) and at the complementary modulus k' (in y) with the addition
    theorem; this avoids complex AGM branch ambiguities.  Valid in the
    strip |Im z| < K'(k).

    Parameters
    ----------
    z : array_like, complex
    k : float
        Modulus, 0 < k < 1.

    Returns
    -------
    (sn, cn, dn) : complex ndarray triple; real input gives real values
    """
    mod = k if isinstance(k, EllipticModulus) else EllipticModulus(k)
    z = np.asarray(z)
    if not np.all(np.isfinite(z)):
        raise ValueError("non-finite argument to jacobi_elliptic")

    if not np.iscomplexobj(z) or np.all(z.imag == 0.0):
        return jacobi_elliptic_real(np.real(z), mod)

    kprime = complementary_elliptic_k(mod.k)
    if np.any(np.abs(z.imag) >= kprime):
        raise ValueError(
            f"argument outside strip of validity |Im z| < K'(k) = {kprime:.6g}"
        )

    s, c, d = jacobi_elliptic_real(z.real, mod)
    s1, c1, d1 = jacobi_elliptic_real(z.imag, EllipticModulus(mod.complement))

    den = c1 * c1 + mod.m * (s * s1) ** 2
    sn = (s * d1 + 1j * c * d * s1 * c1) / den
    cn = (c * c1 - 1j * s * d * s1 * d1) / den
    dn = (d * c1 * d1 - 1j * mod.m * s * c * s1) / den
    return sn, cn, dn
