"""Quadrature rules for panel integrals.

Regular pairs use tensorized symmetric triangle rules whose degree is
picked by a distance heuristic; touching pairs (coincident, common
edge, common vertex) use relative-coordinate regularizing transforms on
[0,1]^4, which remove the 1/r singularity and converge exponentially in
the 1D Gauss order.  Collocation points inside a panel use a Duffy fan.

Conventions: a triangle (w0, w1, w2) is parametrized over the unit
square by the collapse map

    x(s, t) = w0 + s (w1 - w0) + s t (w2 - w1),  jacobian 2 A s,

equivalent to simplex coordinates (xi1, xi2) = (s, s t).  Touching-pair
rules return points in the two squares plus a combined weight that
already contains both map jacobians (without the 4 A A' area factor).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "triangle_rule",
    "gauss_1d",
    "map_to_triangle",
    "PairRule",
    "coincident_rule",
    "common_edge_rule",
    "common_vertex_rule",
    "duffy_interior_rule",
]

# symmetric triangle rules, barycentric points and weights summing to 1
_TRI_RULES: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _perm3(a: float, b: float, c: float) -> list[tuple[float, float, float]]:
    pts = {(a, b, c), (b, c, a), (c, a, b), (a, c, b), (c, b, a), (b, a, c)}
    return sorted(pts)


def _build_tri_rules():
    r: dict[int, tuple[list, list]] = {}
    r[1] = ([(1 / 3, 1 / 3, 1 / 3)], [1.0])
    a = 1.0 / 6.0
    r[2] = (_perm3(2 / 3, a, a), [1 / 3] * 3)
    # Dunavant degree 4, 6 points
    a1, w1 = 0.445948490915965, 0.223381589678011
    a2, w2 = 0.091576213509771, 0.109951743655322
    pts = _perm3(1 - 2 * a1, a1, a1) + _perm3(1 - 2 * a2, a2, a2)
    r[4] = (pts, [w1] * 3 + [w2] * 3)
    # Dunavant degree 5, 7 points
    b1, v1 = 0.470142064105115, 0.132394152788506
    b2, v2 = 0.101286507323456, 0.125939180544827
    pts = [(1 / 3, 1 / 3, 1 / 3)] + _perm3(1 - 2 * b1, b1, b1) + _perm3(1 - 2 * b2, b2, b2)
    r[5] = (pts, [0.225] + [v1] * 3 + [v2] * 3)
    for deg, (p, w) in r.items():
        _TRI_RULES[deg] = (np.array(p, dtype=float), np.array(w, dtype=float))


_build_tri_rules()
_AVAILABLE_DEGREES = np.array(sorted(_TRI_RULES))


def triangle_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric points (n, 3) and weights (n,) summing to 1.

    Returns the smallest stored rule with at least the requested degree.
    """
    deg = int(_AVAILABLE_DEGREES[np.searchsorted(_AVAILABLE_DEGREES, min(degree, 5))])
    return _TRI_RULES[deg]


@lru_cache(maxsize=32)
def composite_triangle_rule(degree: int, depth: int) -> tuple[np.ndarray, np.ndarray]:
    """Triangle rule applied on 4^depth congruent children.

    Used for near (but not touching) panel pairs, where a single Gauss
    rule underresolves the 1/r kernel.  Points stay barycentric;
    weights still sum to 1.
    """
    pts, wts = triangle_rule(degree)
    corners = [np.eye(3)]
    for _ in range(depth):
        nxt = []
        for c in corners:
            m01, m12, m20 = 0.5 * (c[0] + c[1]), 0.5 * (c[1] + c[2]), 0.5 * (c[2] + c[0])
            nxt += [
                np.array([c[0], m01, m20]),
                np.array([m01, c[1], m12]),
                np.array([m20, m12, c[2]]),
                np.array([m01, m12, m20]),
            ]
        corners = nxt
    all_pts = np.vstack([pts @ c for c in corners])
    all_wts = np.tile(wts / len(corners), len(corners))
    return all_pts, all_wts


@lru_cache(maxsize=32)
def gauss_1d(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre rule on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def map_to_triangle(corners: np.ndarray, simplex_pts: np.ndarray) -> np.ndarray:
    """Map simplex coordinates (xi1, xi2) into a triangle (or stack of them).

    Parameters
    ----------
    corners : (..., 3, 3)
    simplex_pts : (n, 2) with 0 <= xi2 <= xi1 <= 1

    Returns
    -------
    (..., n, 3) physical points
    """
    w0 = corners[..., 0, :]
    e1 = corners[..., 1, :] - corners[..., 0, :]
    e2 = corners[..., 2, :] - corners[..., 1, :]
    x1 = simplex_pts[..., 0]
    x2 = simplex_pts[..., 1]
    return (
        w0[..., None, :]
        + x1[:, None] * e1[..., None, :]
        + x2[:, None] * e2[..., None, :]
    )


@dataclass(frozen=True)
class PairRule:
    """Tensor rule for one panel pair in simplex coordinates.

    ``weights`` contain the transform jacobians and the Gauss weights;
    the full integral is 4 A A' sum_i w_i k(x_i, y_i) phi(x_i) psi(y_i).
    """

    x: np.ndarray  # (n, 2) simplex coords on the test panel
    y: np.ndarray  # (n, 2) simplex coords on the trial panel
    weights: np.ndarray  # (n,)


def _tensor4(n: int):
    """Tensor Gauss grid on [0,1]^4, flattened."""
    g, w = gauss_1d(n)
    a, b, c, d = np.meshgrid(g, g, g, g, indexing="ij")
    wa, wb, wc, wd = np.meshgrid(w, w, w, w, indexing="ij")
    return (
        a.ravel(), b.ravel(), c.ravel(), d.ravel(),
        (wa * wb * wc * wd).ravel(),
    )


@lru_cache(maxsize=8)
def coincident_rule(n: int) -> PairRule:
    """Regularizing rule for a panel paired with itself.

    Six relative-coordinate regions on [0,1]^4 with common jacobian
    xi^3 eta1^2 eta2 (Sauter-Schwab type transform in simplex
    coordinates); validated against the subdivision oracle in the test
    suite.
    """
    e1, e2, e3, xi, w0 = _tensor4(n)
    jac = xi**3 * e1**2 * e2

    def pts(a1, a2, b1, b2):
        x = np.stack([xi * a1, xi * a2], axis=1)
        y = np.stack([xi * b1, xi * b2], axis=1)
        return x, y

    one = np.ones_like(e1)
    regions = [
        pts(one, 1 - e1 + e1 * e2, 1 - e1 * e2 * e3, 1 - e1),
        pts(1 - e1 * e2 * e3, 1 - e1, one, 1 - e1 + e1 * e2),
        pts(one, e1 * (1 - e2 + e2 * e3), 1 - e1 * e2, e1 * (1 - e2)),
        pts(1 - e1 * e2, e1 * (1 - e2), one, e1 * (1 - e2 + e2 * e3)),
        pts(1 - e1 * e2 * e3, e1 * (1 - e2 * e3), one, e1 * (1 - e2)),
        pts(one, e1 * (1 - e2), 1 - e1 * e2 * e3, e1 * (1 - e2 * e3)),
    ]
    xs = np.vstack([r[0] for r in regions])
    ys = np.vstack([r[1] for r in regions])
    ws = np.tile(w0 * jac, len(regions))
    return PairRule(xs, ys, ws)


@lru_cache(maxsize=8)
def common_edge_rule(n: int) -> PairRule:
    """Regularizing rule for panels sharing the edge (vertex0, vertex1).

    Both panels must be parametrized with the shared edge as their
    first edge, traversed in the same direction.  Five regions on
    [0,1]^4; validated against the subdivision oracle.
    """
    e1, e2, e3, xi, w0 = _tensor4(n)

    def pts(a1, a2, b1, b2, jac):
        x = np.stack([xi * a1, xi * a2], axis=1)
        y = np.stack([xi * b1, xi * b2], axis=1)
        return x, y, w0 * jac

    one = np.ones_like(e1)
    j2 = xi**3 * e1**2
    j3 = xi**3 * e1**2 * e2
    regions = [
        pts(one, e1 * e3, 1 - e1 * e2, e1 * (1 - e2), j2),
        pts(one, e1, 1 - e1 * e2 * e3, e1 * e2 * (1 - e3), j3),
        pts(1 - e1 * e2, e1 * (1 - e2), one, e1 * e2 * e3, j3),
        pts(1 - e1 * e2 * e3, e1 * e2 * (1 - e3), one, e1, j3),
        pts(1 - e1 * e2 * e3, e1 * (1 - e2 * e3), one, e1 * e2, j3),
    ]
    xs = np.vstack([r[0] for r in regions])
    ys = np.vstack([r[1] for r in regions])
    ws = np.concatenate([r[2] for r in regions])
    return PairRule(xs, ys, ws)


@lru_cache(maxsize=8)
def common_vertex_rule(n: int) -> PairRule:
    """Regularizing rule for panels sharing exactly vertex0.

    Derived directly: with collapse maps anchored at the shared vertex,
    substituting the smaller radial variable s' = s sigma gives the
    smooth integrand s^3 sigma k(x(s,t), y(s sigma, t')) and its mirror.
    """
    s, t, sig, tp, w0 = _tensor4(n)
    jac = s**3 * sig
    # region A: radius s on the test panel, s*sigma on the trial panel
    xa = np.stack([s, s * t], axis=1)
    ya = np.stack([s * sig, s * sig * tp], axis=1)
    # region B: mirrored
    xb = np.stack([s * sig, s * sig * t], axis=1)
    yb = np.stack([s, s * tp], axis=1)
    xs = np.vstack([xa, xb])
    ys = np.vstack([ya, yb])
    ws = np.tile(w0 * jac, 2)
    return PairRule(xs, ys, ws)


@lru_cache(maxsize=8)
def duffy_interior_rule(n: int):
    """Duffy fan for a weakly singular integral with the source inside.

    The panel is split into 3 sub-triangles around the interior point
    x0; each is integrated over [0,1]^2 with the radial jacobian that
    cancels 1/r.  Returns (uv (m, 2), weights (m,)) where uv are the
    square coordinates per sub-triangle; the caller supplies the fan
    geometry: p = x0 + u ((v_i - x0) + v (v_{i+1} - v_i)), contribution
    weight = 2 A_sub * u * w.
    """
    g, w = gauss_1d(n)
    u, v = np.meshgrid(g, g, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    uv = np.stack([u.ravel(), v.ravel()], axis=1)
    return uv, (wu * wv).ravel() * uv[:, 0]
