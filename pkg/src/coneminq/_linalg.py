"""Small-dimension polyhedral routines (n <= 4).

All routines work on H-descriptions ``A x <= b`` by brute-force
enumeration of active sets, which is exact and cheap at the sizes
this package deals with (a handful of facets in dimension 2 to 4).
"""
from itertools import combinations

import numpy as np

FEAS_TOL = 1e-10


def unit(v):
    """Normalise along the last axis; rows already unit to rounding are kept bit-exact."""
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    return np.where(np.abs(norm - 1.0) <= 4 * np.finfo(float).eps, v, v / norm)


def dedupe_directions(vectors, tol=1e-9):
    """Drop unit vectors that are within ``tol`` (radians) of an earlier one."""
    kept = []
    for v in vectors:
        if all(2 * np.arcsin(min(1.0, np.linalg.norm(v - w) / 2)) > tol for w in kept):
            kept.append(v)
    return np.array(kept)


def extreme_rays(normals):
    """Extreme rays of the pointed cone ``{x : normals @ x <= 0}``.

    Each extreme ray is the null direction of ``n - 1`` linearly independent
    active rows. Returns unit vectors (unordered).
    """
    A = np.asarray(normals, dtype=float)
    n = A.shape[1]
    rays = []
    for rows in combinations(range(len(A)), n - 1):
        sub = A[list(rows)]
        _, s, vt = np.linalg.svd(sub)
        if n > 1 and (len(s) < n - 1 or s[-1] < 1e-12 * max(1.0, s[0])):
            continue
        r = np.where(np.abs(vt[-1]) < 1e-15, 0.0, vt[-1])
        for cand in (r, -r):
            if np.all(A @ cand <= FEAS_TOL):
                rays.append(cand / np.linalg.norm(cand))
                break
    if not rays:
        return np.zeros((0, n))
    return dedupe_directions(rays)


def _scale(A, b):
    return 1.0 + np.abs(b).max(initial=0.0)


def vertices(A, b, tol=FEAS_TOL):
    """All vertices of ``{x : A x <= b}`` (basic feasible solutions)."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    n = A.shape[1]
    scale = _scale(A, b)
    pts = []
    for rows in combinations(range(len(A)), n):
        sub = A[list(rows)]
        if abs(np.linalg.det(sub)) < 1e-13:
            continue
        x = np.linalg.solve(sub, b[list(rows)])
        if np.all(A @ x <= b + tol * scale):
            if not any(np.linalg.norm(x - y) <= 1e-9 * scale for y in pts):
                pts.append(x)
    return np.array(pts).reshape(-1, n)


def min_norm_point(A, b, tol=FEAS_TOL):
    """Minimiser of ``|x|`` over ``{x : A x <= b}``, or None if infeasible.

    Enumerates active sets of size 0..n; the KKT point of the convex QP is
    the projection of the origin onto one of these affine subspaces, so the
    feasible projection of least norm is the exact optimum.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    n = A.shape[1]
    scale = _scale(A, b)
    best, best_norm = None, np.inf
    if np.all(b >= -tol * scale):
        return np.zeros(n)
    for k in range(1, n + 1):
        for rows in combinations(range(len(A)), k):
            idx = list(rows)
            sub = A[idx]
            gram = sub @ sub.T
            if abs(np.linalg.det(gram)) < 1e-13:
                continue
            x = sub.T @ np.linalg.solve(gram, b[idx])
            nx = np.linalg.norm(x)
            if nx < best_norm and np.all(A @ x <= b + tol * scale):
                best, best_norm = x, nx
    return best


def clip_polygon(poly, a):
    """Clip a planar polygon (k x n vertex array) to the halfspace ``a @ x >= 0``."""
    if len(poly) == 0:
        return poly
    vals = poly @ a
    out = []
    k = len(poly)
    for i in range(k):
        p, q = poly[i], poly[(i + 1) % k]
        vp, vq = vals[i], vals[(i + 1) % k]
        if vp >= 0:
            out.append(p)
        if (vp >= 0) != (vq >= 0):
            t = vp / (vp - vq)
            out.append(p + t * (q - p))
    return np.array(out).reshape(-1, poly.shape[1])


def order_planar_polygon(points, normal):
    """Sort coplanar points counter-clockwise around their centroid."""
    c = points.mean(axis=0)
    e1 = points[0] - c
    if np.linalg.norm(e1) == 0:
        return points
    e1 = e1 / np.linalg.norm(e1)
    e2 = np.cross(normal, e1)
    ang = np.arctan2((points - c) @ e2, (points - c) @ e1)
    return points[np.argsort(ang)]


def polygon_area_3d(poly):
    if len(poly) < 3:
        return 0.0
    c = poly[0]
    total = np.zeros(3)
    for i in range(1, len(poly) - 1):
        total += np.cross(poly[i] - c, poly[i + 1] - c)
    return 0.5 * float(np.linalg.norm(total))
