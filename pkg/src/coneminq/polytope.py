"""C-polytopes: C-determined sets cut out by finitely many halfspaces.

A ``CPolytope`` stores outer normals ``u_i`` (interior to the polar cone)
and negative support numbers ``h_i``; the set is
``C ∩ {x : u_i . x <= h_i for all i}``.  Facets whose halfspace is implied
by the others are kept (they are inactive) so that the normal set stays
fixed under the solver's updates.
"""
from dataclasses import dataclass, field
from itertools import combinations
from typing import List

import numpy as np
from scipy.optimize import linprog, minimize_scalar

from . import _linalg
from .cone import Cone, omega_contains, polar, reference_direction
from .errors import (EmptyTruncation, InvalidDirection, InvalidP, MismatchedNormals,
                     NonPositive, OutsideOmega, Unbounded, UnsupportedCone,
                     UnsupportedDim)

TIE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class FacetGeometry:
    index: int
    vertices: np.ndarray
    measure: float
    # radial projection of the facet onto the sphere, i.e. the closure of
    # the region Omega_C ∩ Delta_{P,i}; empty for inactive facets
    region: np.ndarray

    @property
    def active(self):
        return self.measure > 0


@dataclass(frozen=True, eq=False)
class CPolytope:
    cone: Cone
    normals: np.ndarray
    h: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        normals = np.atleast_2d(np.asarray(self.normals, dtype=float))
        h = np.atleast_1d(np.asarray(self.h, dtype=float))
        if len(h) == 0 or len(normals) != len(h):
            raise ValueError("need m >= 1 facets with matching support values")
        if normals.shape[1] != self.cone.dim:
            raise InvalidDirection("normal dimension does not match the cone")
        normals.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "h", h)

    @property
    def dim(self):
        return self.cone.dim

    @property
    def m(self):
        return len(self.h)

    def scaled(self, lam):
        return CPolytope(self.cone, self.normals, lam * self.h)

    def constraints(self):
        """``(A, b)`` with the set equal to ``{x : A x <= b}`` (facet cones only)."""
        if not self.cone.has_facets:
            raise UnsupportedCone("needs a cone with finitely many facets")
        W = self.cone.facet_normals
        return (np.vstack([self.normals, W]),
                np.concatenate([self.h, np.zeros(len(W))]))


def wulff_shape(cone, normals, values):
    """Wulff shape ``C ∩ ⋂ {x : u_i . x <= -f_i}`` for positive ``f_i``."""
    normals = np.atleast_2d(np.asarray(normals, dtype=float))
    values = np.atleast_1d(np.asarray(values, dtype=float))
    if len(values) == 0:
        raise ValueError("empty atom list")
    if np.any(values <= 0):
        raise NonPositive("Wulff values must be strictly positive")
    normals = _linalg.unit(normals)
    if not np.all(omega_contains(polar(cone), normals)):
        raise InvalidDirection("normal outside the open polar domain")
    return CPolytope(cone, normals, -values)


def _dots(V, U):
    # explicit products keep every entry independent of array shape/chunking
    return (V[:, None, :] * U[None, :, :]).sum(axis=-1)


def radial_all(P, V):
    """Radial values, facet indices and tie flags for an ``(N, n)`` array."""
    V = np.atleast_2d(V)
    ratios = P.h[None, :] / _dots(V, P.normals)
    idx = np.argmax(ratios, axis=1)
    rho = ratios[np.arange(len(V)), idx]
    if P.m > 1:
        second = np.partition(ratios, -2, axis=1)[:, -2]
        ties = rho - second <= TIE_TOL * rho
    else:
        ties = np.zeros(len(V), dtype=bool)
    return rho, idx, ties


def radial(P, v):
    """Radial function and radial Gauss map (facet index) at ``v`` in Omega_C.

    Ties between facets are broken towards the lowest index; use
    :func:`radial_all` for the tie flags.
    """
    v = np.asarray(v, dtype=float)
    single = v.ndim == 1
    V = np.atleast_2d(v)
    if not np.all(omega_contains(P.cone, V)):
        raise OutsideOmega("radial direction outside Omega_C")
    rho, idx, _ = radial_all(P, V)
    if single:
        return float(rho[0]), int(idx[0])
    return rho, idx


def _polish_vertex(A, b, x, tol=1e-7):
    """Snap an LP optimum to the exact vertex defined by its active rows."""
    n = A.shape[1]
    resid = np.abs(A @ x - b)
    scale = 1.0 + np.abs(b).max()
    chosen = []
    for r in np.argsort(resid):
        if resid[r] > tol * scale:
            break
        if np.linalg.matrix_rank(A[chosen + [r]], tol=1e-10) == len(chosen) + 1:
            chosen.append(r)
        if len(chosen) == n:
            y = np.linalg.solve(A[chosen], b[chosen])
            if np.all(A @ y <= b + 1e-10 * scale):
                return y
            break
    return x


def _in_circular(cone, x, tol=1e-13):
    nx = np.linalg.norm(x)
    return nx == 0 or (x @ cone.axis) >= nx * np.cos(cone.half_angle) - tol * nx


def support(P, u):
    """Support value ``sup {x . u : x in P}`` for ``u`` in Omega_{C°} (negative)."""
    u = np.asarray(u, dtype=float)
    if not omega_contains(polar(P.cone), u):
        raise OutsideOmega("support direction outside Omega_{C°}")
    if P.cone.has_facets:
        A, b = P.constraints()
        res = linprog(-u, A_ub=A, b_ub=b, bounds=[(None, None)] * P.dim,
                      method="highs")
        if res.status == 3:
            raise Unbounded("support LP unbounded: direction not interior")
        if res.status != 0:
            raise RuntimeError(f"support LP failed: {res.message}")
        x = _polish_vertex(A, b, res.x)
        return float(u @ x)
    return _support_circular(P, u)


def _circular_quadratic(cone):
    # x on the cone surface  <=>  x^T Q x = 0 with x . axis > 0
    a = cone.axis
    return np.outer(a, a) - np.cos(cone.half_angle) ** 2 * np.eye(cone.dim)


def _feasible(P, x, tol=1e-10):
    scale = 1.0 + np.abs(P.h).max()
    return (np.all(P.normals @ x <= P.h + tol * scale)
            and _in_circular(P.cone, x, tol=1e-11))


def _circular_extreme_candidates(P):
    """Extreme points of ``P`` in a circular cone of dimension 3.

    Returns the finite candidates: facet vertices inside the cone and the
    points where facet edges cross the cone surface.  The remaining extreme
    points lie on the facet ellipses (plane ∩ cone surface), which are
    cached for the per-query analytic treatment.
    """
    if "circ_candidates" in P._cache:
        return P._cache["circ_candidates"]
    if P.dim != 3:
        raise UnsupportedDim("circular-cone polytopes are implemented for n = 3")
    Q = _circular_quadratic(P.cone)
    U, h = P.normals, P.h
    m = len(h)
    pts = []
    for i in range(m):
        for j in range(i + 1, m):
            for k in range(j + 1, m):
                sub = U[[i, j, k]]
                if abs(np.linalg.det(sub)) > 1e-13:
                    pts.append(np.linalg.solve(sub, h[[i, j, k]]))
            d = np.cross(U[i], U[j])
            if np.linalg.norm(d) < 1e-13:
                continue
            p0 = np.linalg.lstsq(U[[i, j]], h[[i, j]], rcond=None)[0]
            qa, qb, qc = d @ Q @ d, 2 * p0 @ Q @ d, p0 @ Q @ p0
            disc = qb * qb - 4 * qa * qc
            if abs(qa) > 1e-15 and disc >= 0:
                for sgn in (-1.0, 1.0):
                    pts.append(p0 + (-qb + sgn * np.sqrt(disc)) / (2 * qa) * d)
    P._cache["circ_ellipses"] = [_facet_ellipse(Q, U[i], h[i]) for i in range(m)]
    out = np.array([x for x in pts if _feasible(P, x)]).reshape(-1, P.dim)
    P._cache["circ_candidates"] = out
    return out


def _facet_ellipse(Q, ui, hi):
    """Plane ``ui . x = hi`` meets the cone surface in an ellipse.

    Returns ``(center, basis, S)`` with the ellipse equal to
    ``{center + z @ basis : z^T S^{-1} z = 1}``.
    """
    basis = np.linalg.svd(ui[None, :])[2][1:]
    x0 = hi * ui
    M = basis @ Q @ basis.T
    bvec = basis @ Q @ x0
    c = x0 @ Q @ x0
    z0 = -np.linalg.solve(M, bvec)
    k = bvec @ np.linalg.solve(M, bvec) - c
    S = np.linalg.inv(M / k)
    return x0 + z0 @ basis, basis, S


def _support_circular(P, u):
    best = max((u @ x for x in _circular_extreme_candidates(P)), default=-np.inf)
    for center, basis, S in P._cache["circ_ellipses"]:
        g = basis @ u
        denom = np.sqrt(g @ S @ g)
        # u parallel to the facet normal: the whole ellipse is optimal
        x = center if denom < 1e-15 else center + (S @ g / denom) @ basis
        if _feasible(P, x):
            best = max(best, u @ x)
    return float(best)


def copolar_radial(P, u):
    """Radial function of the copolar set in the polar cone: ``-1 / support``."""
    return -1.0 / support(P, u)


def copolar_points(P):
    """Generator points ``u_i / (-h_i)`` of the copolar set."""
    return P.normals / (-P.h)[:, None]


def copolar(P):
    """Copolar set of ``P`` as a polytope in the polar cone (n <= 3).

    The copolar is cut out by one halfspace ``a . y <= -1`` per vertex ``a``
    of ``P``; the rays of ``P`` only contribute the polar cone itself.  A
    vertex on the boundary of C gives a normal on the boundary of the
    domain, which is allowed here but rejected by :func:`wulff_shape`.
    """
    if not P.cone.has_facets:
        raise UnsupportedCone("copolar construction needs a polyhedral cone")
    A, b = P.constraints()
    V = _linalg.vertices(A, b)
    r = np.linalg.norm(V, axis=1)
    return CPolytope(polar(P.cone), V / r[:, None], -1.0 / r)


def _match_normals(A1, A2, tol=1e-12):
    if A1.m != A2.m:
        raise MismatchedNormals("different numbers of normals")
    perm = []
    for u in A1.normals:
        d = np.linalg.norm(A2.normals - u, axis=1)
        j = int(np.argmin(d))
        if d[j] > tol or j in perm:
            raise MismatchedNormals("normal sets differ")
        perm.append(j)
    return np.array(perm)


def realized_support(P):
    """Support values of ``P`` at its own normals (``>= h_i``; equal if active)."""
    return np.array([support(P, u) for u in P.normals])


def p_co_sum(A1, A2, p, tau=None):
    """p-co-sum of two C-polytopes sharing one normal set.

    For ``p`` in (0, 1] the co-support values combine as
    ``(hbar1^p + hbar2^p)^(1/p)``; ``p = 0`` gives the log-co-sum
    ``hbar1^(1-tau) * hbar2^tau``.
    """
    if A1.cone is not A2.cone and not (
            A1.cone.dim == A2.cone.dim
            and np.allclose(A1.cone.generators, A2.cone.generators)
            and A1.cone.kind == A2.cone.kind):
        raise MismatchedNormals("polytopes live in different cones")
    if not 0.0 <= p <= 1.0:
        raise InvalidP("p must lie in [0, 1]")
    perm = _match_normals(A1, A2)
    f1 = -realized_support(A1)
    f2 = -realized_support(A2)[perm]
    if p == 0:
        if tau is None or not 0.0 <= tau <= 1.0:
            raise InvalidP("log-co-sum needs tau in [0, 1]")
        f = f1 ** (1 - tau) * f2 ** tau
    else:
        f = (f1 ** p + f2 ** p) ** (1.0 / p)
    return wulff_shape(A1.cone, A1.normals, f)


def facet_geometry(P) -> List[FacetGeometry]:
    """Vertices, (n-1)-measure and spherical region of every facet (n <= 3)."""
    if P.dim > 3:
        raise UnsupportedDim("facet enumeration needs n <= 3")
    if not P.cone.has_facets:
        raise UnsupportedCone("facet enumeration needs a polyhedral cone")
    if "facets" in P._cache:
        return P._cache["facets"]
    A, b = P.constraints()
    verts = _linalg.vertices(A, b)
    scale = 1.0 + np.abs(P.h).max()
    out = []
    for i, (u, hi) in enumerate(zip(P.normals, P.h)):
        on = verts[np.abs(verts @ u - hi) <= 1e-9 * scale]
        measure = 0.0
        if P.dim == 2 and len(on) >= 2:
            # order along the facet line
            t = on @ np.array([-u[1], u[0]])
            on = on[np.argsort(t)][[0, -1]]
            measure = float(np.linalg.norm(on[1] - on[0]))
        elif P.dim == 3 and len(on) >= 3:
            on = _linalg.order_planar_polygon(on, u)
            measure = _linalg.polygon_area_3d(on)
        if measure <= 1e-14 * scale ** (P.dim - 1):
            on, measure = np.zeros((0, P.dim)), 0.0
        region = _linalg.unit(on) if len(on) else on
        out.append(FacetGeometry(i, on, measure, region))
    # cache writes are idempotent: every caller computes the same list
    P._cache.setdefault("facets", out)
    return P._cache["facets"]


def b_distance(P):
    """Distance from the origin to ``P``."""
    if P.cone.has_facets:
        A, b = P.constraints()
        x = _linalg.min_norm_point(A, b)
        return float(np.linalg.norm(x))
    return _b_distance_circular(P)


def _b_distance_circular(P):
    # the nearest point has at least one facet active: it is the origin's
    # projection onto a face inside the cone, or lies on the cone surface
    U, h = P.normals, P.h
    cands = list(_circular_extreme_candidates(P))
    for k in (1, 2):
        for rows in combinations(range(P.m), k):
            sub = U[list(rows)]
            gram = sub @ sub.T
            if abs(np.linalg.det(gram)) > 1e-13:
                cands.append(sub.T @ np.linalg.solve(gram, h[list(rows)]))
    for center, basis, S in P._cache["circ_ellipses"]:
        L = np.linalg.cholesky(S)
        ring = lambda t: center + (L @ np.array([np.cos(t), np.sin(t)])) @ basis
        grid = np.linspace(0, 2 * np.pi, 256, endpoint=False)
        t0 = grid[np.argmin([np.linalg.norm(ring(t)) for t in grid])]
        res = minimize_scalar(lambda t: np.linalg.norm(ring(t)),
                              bounds=(t0 - 0.03, t0 + 0.03), method="bounded",
                              options={"xatol": 1e-12})
        cands.append(ring(res.x))
    feas = [np.linalg.norm(x) for x in cands if _feasible(P, x)]
    return float(min(feas))


def truncated_constraints(P, t):
    A, b = P.constraints()
    xi = reference_direction(P.cone)
    return np.vstack([A, xi]), np.append(b, t)


def truncated_vertices(P, t):
    A, b = truncated_constraints(P, t)
    return _linalg.vertices(A, b)


def _point_to_set(A, b, x):
    y = _linalg.min_norm_point(A, b - A @ x)
    return float(np.linalg.norm(y))


def hausdorff_truncated(A, B, t):
    """Hausdorff distance between ``A ∩ C_t`` and ``B ∩ C_t``.

    Both truncations are polytopes; the distance from a point to a convex
    set is convex, so its maximum over a polytope is attained at a vertex.
    """
    if A.dim > 3:
        raise UnsupportedDim("truncated Hausdorff distance needs n <= 3")
    VA, VB = truncated_vertices(A, t), truncated_vertices(B, t)
    if len(VA) == 0 or len(VB) == 0:
        raise EmptyTruncation("set does not meet C_t")
    HA, HB = truncated_constraints(A, t), truncated_constraints(B, t)
    d_ab = max(_point_to_set(*HB, x) for x in VA)
    d_ba = max(_point_to_set(*HA, x) for x in VB)
    return max(d_ab, d_ba)


def truncated_facets(P, t):
    """Facet polygons of ``P`` clipped to ``{xi . x <= t}`` (n = 3), for export."""
    xi = reference_direction(P.cone)
    polys = []
    for fg in facet_geometry(P):
        if not fg.active:
            continue
        # clip_polygon keeps a . x >= 0; shift to the plane xi . x = t
        poly = fg.vertices
        vals = t - poly @ xi
        if np.all(vals >= 0):
            polys.append(poly)
            continue
        out = []
        k = len(poly)
        for j in range(k):
            p, q = poly[j], poly[(j + 1) % k]
            vp, vq = vals[j], vals[(j + 1) % k]
            if vp >= 0:
                out.append(p)
            if (vp >= 0) != (vq >= 0):
                out.append(p + vp / (vp - vq) * (q - p))
        if len(out) >= 3:
            polys.append(np.array(out))
    return polys
