"""Pointed closed convex cones, their polars and spherical domains.

A cone is stored in generator form.  For polyhedral cones the halfspace
form is derived by enumerating extreme rays, which doubles as the polar:
``C = {x : w . x <= 0 for w in polar_generators}``.  Circular cones carry
an axis and a half-angle; in the plane they also get their two boundary
rays so every polyhedral routine applies to them.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from . import _linalg
from .errors import DegenerateCone, NotPointed, OutsideDomain, UnsupportedDim

ANGLE_TOL = 1e-12
MAX_POLYHEDRAL_DIM = 4


@dataclass(frozen=True, eq=False)
class Cone:
    dim: int
    kind: str
    generators: np.ndarray = field(repr=False)
    polar_generators: np.ndarray = field(repr=False)
    axis: np.ndarray = field(default=None, repr=False)
    half_angle: float = None

    @property
    def has_facets(self):
        """True when the cone has finitely many facets (polyhedral or planar)."""
        return self.kind == "polyhedral" or self.dim == 2

    @property
    def facet_normals(self):
        """Outer unit normals ``w`` with ``C = {x : w . x <= 0}``."""
        return self.polar_generators

    def __repr__(self):
        if self.kind == "circular":
            return f"Cone(dim={self.dim}, circular, half_angle={self.half_angle:.6g})"
        return f"Cone(dim={self.dim}, polyhedral, {len(self.generators)} generators)"


def _chebyshev_direction(G):
    """Maximise ``min_g g . xi`` over the box ``|xi|_inf <= 1``."""
    k, n = G.shape
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-G, np.ones((k, 1))])
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(k),
                  bounds=[(-1, 1)] * n + [(None, 1)], method="highs")
    if res.status != 0:
        return None, 0.0
    return res.x[:n], res.x[-1]


def _sort_generators(G):
    n = G.shape[1]
    if n == 2:
        # counter-clockwise, starting at the ray that opens the cone
        mean = _linalg.unit(G.mean(axis=0))
        ang = np.arctan2(G[:, 1], G[:, 0]) - np.arctan2(mean[1], mean[0])
        ang = (ang + np.pi) % (2 * np.pi) - np.pi
        return G[np.argsort(ang)]
    if n == 3:
        G = _linalg.order_planar_polygon(G, _linalg.unit(G.mean(axis=0)))
        # canonical cyclic start: the lexicographically smallest ray
        return np.roll(G, -int(np.lexsort(G.T[::-1])[0]), axis=0)
    return G[np.lexsort(G.T[::-1])]


def _planar_rays(axis, angle):
    rot = lambda t: np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])
    return np.array([rot(-angle) @ axis, rot(angle) @ axis])


def build_cone(dim, generators=None, axis=None, half_angle=None):
    """Construct a polyhedral cone from generators or a circular cone.

    Generators need not be unit length or irredundant: they are normalised
    and pruned to the extreme rays.
    """
    dim = int(dim)
    if dim < 2:
        raise DegenerateCone("dim must be >= 2")
    if generators is None:
        if axis is None or half_angle is None:
            raise DegenerateCone("need generators or (axis, half_angle)")
        axis = np.asarray(axis, dtype=float)
        if axis.shape != (dim,):
            raise DegenerateCone(f"axis must have length {dim}")
        alpha = float(half_angle)
        if not 0.0 < alpha < np.pi / 2:
            raise NotPointed("half-angle must lie in (0, pi/2)")
        axis = _linalg.unit(axis)
        if dim == 2:
            gens = _planar_rays(axis, alpha)
            pgens = _planar_rays(-axis, np.pi / 2 - alpha)
            return Cone(2, "circular", _sort_generators(gens),
                        _sort_generators(pgens), axis, alpha)
        return Cone(dim, "circular", np.zeros((0, dim)), np.zeros((0, dim)),
                    axis, alpha)

    G = np.atleast_2d(np.asarray(generators, dtype=float))
    if G.shape[1] != dim:
        raise DegenerateCone(f"generators must have {dim} coordinates")
    if np.any(np.linalg.norm(G, axis=1) == 0):
        raise DegenerateCone("zero generator")
    G = _linalg.unit(G)
    _, t = _chebyshev_direction(G)
    if t <= 1e-12:
        raise NotPointed("generators admit no strictly separating direction")
    if len(G) < dim or np.linalg.matrix_rank(G, tol=1e-10) < dim:
        raise DegenerateCone("generators do not span the space")
    if dim > MAX_POLYHEDRAL_DIM:
        raise UnsupportedDim(f"polyhedral polar needs dim <= {MAX_POLYHEDRAL_DIM}")
    polar_gens = _linalg.extreme_rays(G)
    # keep the input rows that are extreme, so saved cones reload bit-exactly
    ext = _linalg.extreme_rays(polar_gens)
    gens = _linalg.dedupe_directions(G[np.max(G @ ext.T, axis=1) >= 1 - 1e-9])
    return Cone(dim, "polyhedral", _sort_generators(gens),
                _sort_generators(polar_gens))


def polar(cone):
    if cone.kind == "circular":
        return build_cone(cone.dim, axis=-cone.axis,
                          half_angle=np.pi / 2 - cone.half_angle)
    # generator and facet forms swap roles
    return Cone(cone.dim, "polyhedral", cone.polar_generators, cone.generators)


def _angle_from_axis(cone, v):
    return np.arccos(np.clip(np.asarray(v) @ cone.axis, -1.0, 1.0))


def omega_contains(cone, v):
    """True iff the unit vector(s) ``v`` lie in the interior of ``cone``."""
    v = np.asarray(v, dtype=float)
    if cone.kind == "circular" and cone.dim > 2:
        return _angle_from_axis(cone, v) < cone.half_angle - ANGLE_TOL
    return np.max(v @ cone.facet_normals.T, axis=-1) < -ANGLE_TOL


def boundary_angle(cone, u):
    """Spherical distance from ``u`` to the boundary of ``cone``'s domain."""
    u = np.asarray(u, dtype=float)
    if not np.all(omega_contains(cone, u)):
        raise OutsideDomain("direction is not interior to the cone")
    if cone.kind == "circular" and cone.dim > 2:
        return cone.half_angle - _angle_from_axis(cone, u)
    # distance to a union of open hemispheres is the least distance to each
    return np.min(np.arcsin(np.clip(-(u @ cone.facet_normals.T), -1, 1)), axis=-1)


def reference_direction(cone):
    """Fixed interior direction xi with ``g . xi > 0`` on every generator."""
    if cone.kind == "circular":
        return cone.axis.copy()
    G = cone.generators
    xi = _linalg.unit(G.mean(axis=0))
    if np.min(G @ xi) > ANGLE_TOL and omega_contains(cone, xi):
        return xi
    xi, t = _chebyshev_direction(G)
    if xi is None or t <= ANGLE_TOL:
        raise NotPointed("no reference direction")
    return _linalg.unit(xi)


def _spherical_triangle_area(a, b, c):
    num = abs(np.dot(a, np.cross(b, c)))
    den = 1.0 + a @ b + b @ c + c @ a
    return 2.0 * np.arctan2(num, den)


def omega_area(cone):
    """Spherical Lebesgue measure of the open domain of ``cone``."""
    n = cone.dim
    if n == 2:
        g0, g1 = cone.generators
        return float(np.arccos(np.clip(g0 @ g1, -1.0, 1.0)))
    if cone.kind == "circular":
        a = cone.half_angle
        if n == 3:
            return 2 * np.pi * (1 - np.cos(a))
        if n == 4:
            return 2 * np.pi * (a - np.sin(a) * np.cos(a))
        raise UnsupportedDim("circular area implemented for n <= 4")
    if n == 3:
        xi = reference_direction(cone)
        G = cone.generators
        return float(sum(_spherical_triangle_area(xi, G[i], G[(i + 1) % len(G)])
                         for i in range(len(G))))
    # n == 4: seeded Monte Carlo estimate
    rng = np.random.default_rng(0)
    pts = _linalg.unit(rng.standard_normal((2_000_000, 4)))
    inside = np.max(pts @ cone.facet_normals.T, axis=1) < 0
    return float(2 * np.pi ** 2 * inside.mean())
