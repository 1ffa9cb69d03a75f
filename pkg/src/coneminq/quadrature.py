"""Spherical quadrature over Omega_C and its polytope-adapted refinement.

A :class:`QuadratureGrid` is a fixed set of cells covering Omega_C:

* n = 2: angle panels on the arc, each carrying 8 Gauss-Legendre nodes;
* n = 3, polyhedral: geodesic subdivision of the fan ``(xi, g_k, g_k+1)``
  into spherical triangles, integrated on their flat chords with a
  degree-5 seven-point rule and the radial-projection Jacobian;
* n = 3, circular: latitude-longitude product rule on the cap;
* n = 4: seeded Monte Carlo.

For a polytope the integrand ``rho^q`` is only piecewise smooth, so
:func:`adapted_rule` splits every cell that straddles a boundary between
radial Gauss regions exactly along the separating great circles.  The
region owned by facet ``i`` is ``{v : (h_i u_j - h_j u_i) . v >= 0 for all j}``,
an intersection of hemispheres, so a cell whose corners all share one
strict argmax lies entirely inside that region.
"""
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _linalg
from .cone import omega_area, reference_direction
from .errors import UnsupportedDim
from .polytope import radial_all

GL_ORDER = 8
MIN_RESOLUTION = 16

_S15 = math.sqrt(15.0)
_RADON_BARY = np.array([
    [1 / 3, 1 / 3, 1 / 3],
    [(6 - _S15) / 21, (6 - _S15) / 21, (9 + 2 * _S15) / 21],
    [(6 - _S15) / 21, (9 + 2 * _S15) / 21, (6 - _S15) / 21],
    [(9 + 2 * _S15) / 21, (6 - _S15) / 21, (6 - _S15) / 21],
    [(6 + _S15) / 21, (6 + _S15) / 21, (9 - 2 * _S15) / 21],
    [(6 + _S15) / 21, (9 - 2 * _S15) / 21, (6 + _S15) / 21],
    [(9 - 2 * _S15) / 21, (6 + _S15) / 21, (6 + _S15) / 21],
])
_RADON_W = np.array([9 / 40] + [(155 - _S15) / 1200] * 3 + [(155 + _S15) / 1200] * 3)


def thread_count():
    """Worker count from ``CONEMINQ_THREADS`` (default: all cores)."""
    env = os.environ.get("CONEMINQ_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def chunked_map(fn, X, chunk=4096):
    """Apply a row-wise ``fn`` to ``X`` in chunks, possibly in parallel.

    Every row is computed independently, so the result does not depend on
    the number of workers.
    """
    if len(X) <= chunk:
        return fn(X)
    parts = [X[i:i + chunk] for i in range(0, len(X), chunk)]
    workers = min(thread_count(), len(parts))
    if workers == 1:
        out = [fn(p) for p in parts]
    else:
        with ThreadPoolExecutor(workers) as ex:
            out = list(ex.map(fn, parts))
    if isinstance(out[0], tuple):
        return tuple(np.concatenate(c) for c in zip(*out))
    return np.concatenate(out)


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    cone: object
    nodes: np.ndarray
    weights: np.ndarray
    resolution: int
    seed: int
    scheme: str
    # scheme-specific cell data used by adapted_rule
    cells: object = field(default=None, repr=False)

    def __len__(self):
        return len(self.weights)


_GL = np.polynomial.legendre.leggauss(GL_ORDER)


def _gauss(a, b, order=GL_ORDER):
    x, w = _GL if order == GL_ORDER else np.polynomial.legendre.leggauss(order)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def _arc_frame(cone):
    g0, g1 = cone.generators
    e1 = g1 - (g0 @ g1) * g0
    e1 = e1 / np.linalg.norm(e1)
    return g0, e1, float(np.arccos(np.clip(g0 @ g1, -1.0, 1.0)))


def _arc_points(frame, theta):
    e0, e1, _ = frame
    theta = np.asarray(theta)
    return np.cos(theta)[:, None] * e0 + np.sin(theta)[:, None] * e1


def _grid_2d(cone, resolution):
    frame = _arc_frame(cone)
    npan = math.ceil(resolution / GL_ORDER)
    edges = np.linspace(0.0, frame[2], npan + 1)
    th, w = zip(*(_gauss(a, b) for a, b in zip(edges[:-1], edges[1:])))
    th, w = np.concatenate(th), np.concatenate(w)
    return _arc_points(frame, th), w, (frame, edges)


def _flat_rule_batch(T):
    """Seven-point rule on ``(K, 3, 3)`` chord triangles, mapped to the sphere."""
    normal = np.cross(T[:, 1] - T[:, 0], T[:, 2] - T[:, 0])
    area = 0.5 * np.linalg.norm(normal, axis=1)
    nhat = normal / (2 * area)[:, None]
    sign = np.sign(np.einsum("ij,ij->i", nhat, T.sum(axis=1)))
    nhat = nhat * sign[:, None]
    X = np.einsum("pk,ckd->cpd", _RADON_BARY, T)
    r = np.linalg.norm(X, axis=2)
    W = _RADON_W[None, :] * area[:, None] * np.einsum("cpd,cd->cp", X, nhat) / r ** 3
    # rescale so constants integrate to the exact spherical triangle area
    W = W * (_spherical_area(T) / W.sum(axis=1))[:, None]
    return (X / r[..., None]).reshape(-1, 3), W.ravel()


def _spherical_area(T):
    a, b, c = (_linalg.unit(T[:, k]) for k in range(3))
    num = np.abs(np.einsum("ij,ij->i", a, np.cross(b, c)))
    den = (1.0 + np.einsum("ij,ij->i", a, b) + np.einsum("ij,ij->i", b, c)
           + np.einsum("ij,ij->i", c, a))
    return 2.0 * np.arctan2(num, den)


def _subdivide(T):
    a, b, c = T[:, 0], T[:, 1], T[:, 2]
    ab, bc, ca = (_linalg.unit(a + b), _linalg.unit(b + c), _linalg.unit(c + a))
    return np.concatenate([
        np.stack([a, ab, ca], axis=1), np.stack([ab, b, bc], axis=1),
        np.stack([ca, bc, c], axis=1), np.stack([ab, bc, ca], axis=1)])


def _grid_3d_polyhedral(cone, resolution):
    xi = reference_direction(cone)
    G = cone.generators
    k = len(G)
    T = np.array([[xi, G[i], G[(i + 1) % k]] for i in range(k)])
    target = math.ceil(resolution / len(_RADON_W))
    while len(T) < target:
        T = _subdivide(T)
    V, W = _flat_rule_batch(T)
    return V, W, T


def _grid_3d_circular(cone, resolution):
    a = cone.axis
    alpha = cone.half_angle
    ntheta = max(2, math.ceil(math.sqrt(resolution / 4)))
    npsi = math.ceil(resolution / ntheta)
    th, wth = _gauss(0.0, alpha, ntheta)
    psi = (np.arange(npsi) + 0.5) * (2 * np.pi / npsi)
    e1, e2 = np.linalg.svd(a[None, :])[2][1:]
    TH, PS = np.meshgrid(th, psi, indexing="ij")
    V = (np.cos(TH)[..., None] * a + np.sin(TH)[..., None]
         * (np.cos(PS)[..., None] * e1 + np.sin(PS)[..., None] * e2))
    W = (wth * np.sin(th))[:, None] * np.full(npsi, 2 * np.pi / npsi)[None, :]
    return V.reshape(-1, 3), W.ravel(), None


def _grid_mc(cone, resolution, seed):
    rng = np.random.default_rng(seed)
    n = cone.dim
    xi = reference_direction(cone)
    pts = []
    count = 0
    while count < resolution:
        X = _linalg.unit(rng.standard_normal((4 * resolution, n)))
        if cone.kind == "circular":
            keep = X @ xi > np.cos(cone.half_angle)
        else:
            keep = np.max(X @ cone.facet_normals.T, axis=1) < 0
        pts.append(X[keep])
        count += int(keep.sum())
    V = np.concatenate(pts)[:resolution]
    return V, np.full(resolution, omega_area(cone) / resolution), None


@lru_cache(maxsize=64)
def make_grid(cone, resolution, seed=0):
    """Deterministic quadrature grid on Omega_C.

    ``resolution`` is the node count for n = 2 and a lower bound on it
    otherwise.  ``seed`` only affects the Monte Carlo scheme (n = 4).
    """
    resolution = int(resolution)
    if resolution < MIN_RESOLUTION:
        raise ValueError(f"resolution must be >= {MIN_RESOLUTION}")
    n = cone.dim
    if n == 2:
        V, W, cells = _grid_2d(cone, resolution)
        scheme = "gauss-arc"
    elif n == 3 and cone.kind == "polyhedral":
        V, W, cells = _grid_3d_polyhedral(cone, resolution)
        scheme = "geodesic-subdivision"
    elif n == 3:
        V, W, cells = _grid_3d_circular(cone, resolution)
        scheme = "lat-long"
    elif n == 4:
        V, W, cells = _grid_mc(cone, resolution, seed)
        scheme = "monte-carlo"
    else:
        raise UnsupportedDim("quadrature implemented for n <= 4")
    V.setflags(write=False)
    W.setflags(write=False)
    return QuadratureGrid(cone, V, W, resolution, int(seed), scheme, cells)


def coarse_grid(grid):
    """The half-resolution companion used for error estimates."""
    # one subdivision level fewer in n = 3 (a quarter of the cells)
    div = 4 if grid.scheme == "geodesic-subdivision" else 2
    return make_grid(grid.cone, max(MIN_RESOLUTION, grid.resolution // div),
                     grid.seed + (1 if grid.scheme == "monte-carlo" else 0))


@dataclass(frozen=True, eq=False)
class Rule:
    """Nodes, weights and owning facet of a polytope-adapted rule."""
    nodes: np.ndarray
    weights: np.ndarray
    labels: np.ndarray

    def rho(self, P):
        # evaluate with the owning facet, not argmax, so split cells stay exact
        dots = (self.nodes * P.normals[self.labels]).sum(axis=1)
        return P.h[self.labels] / dots


def _separators(P):
    h, U = P.h, P.normals
    # A[i, j] = h_i u_j - h_j u_i;  facet i beats j on the side A[i, j] . v >= 0
    return h[:, None, None] * U[None, :, :] - h[None, :, None] * U[:, None, :]


def _adapted_2d(P, grid):
    frame, edges = grid.cells
    e0, e1, span = frame
    A = _separators(P)
    a = A[np.triu_indices(P.m, 1)]
    bp = np.arctan2(-(a @ e0), a @ e1) % np.pi
    bp = bp[(bp > 0) & (bp < span)]
    # panels with no breakpoint keep their base nodes exactly
    cuts = np.unique(np.concatenate([edges, bp]))
    lo, hi = cuts[:-1], cuts[1:]
    x, w = _GL
    th = 0.5 * (hi - lo)[:, None] * x + 0.5 * (hi + lo)[:, None]
    W = 0.5 * (hi - lo)[:, None] * w
    lab = radial_all(P, _arc_points(frame, 0.5 * (lo + hi)))[1]
    return (_arc_points(frame, th.ravel()), W.ravel(),
            np.repeat(lab, GL_ORDER))


def _fan(poly):
    return [np.array([poly[0], poly[j], poly[j + 1]]) for j in range(1, len(poly) - 1)]


def _adapted_3d(P, grid):
    T = grid.cells
    K = len(T)
    corners = _linalg.unit(T.reshape(-1, 3))
    _, lab, ties = radial_all(P, corners)
    lab, ties = lab.reshape(K, 3), ties.reshape(K, 3)
    clean = (lab[:, 0] == lab[:, 1]) & (lab[:, 1] == lab[:, 2]) & ~ties.any(axis=1)
    npt = len(_RADON_W)
    V = grid.nodes.reshape(K, npt, 3)[clean].reshape(-1, 3)
    W = grid.weights.reshape(K, npt)[clean].ravel()
    L = np.repeat(lab[clean, 0], npt)
    A = _separators(P)
    sub_T, sub_L = [], []
    for c in np.flatnonzero(~clean):
        for i in range(P.m):
            poly = T[c]
            for j in range(P.m):
                if j != i:
                    poly = _linalg.clip_polygon(poly, A[i, j])
                    if len(poly) < 3:
                        break
            if len(poly) >= 3 and _linalg.polygon_area_3d(poly) > 1e-300:
                tris = _fan(poly)
                sub_T.extend(tris)
                sub_L.extend([i] * len(tris))
    if sub_T:
        sub_T = np.array(sub_T)
        ok = 0.5 * np.linalg.norm(np.cross(sub_T[:, 1] - sub_T[:, 0],
                                           sub_T[:, 2] - sub_T[:, 0]), axis=1) > 1e-300
        sV, sW = _flat_rule_batch(sub_T[ok])
        V = np.concatenate([V, sV])
        W = np.concatenate([W, sW])
        L = np.concatenate([L, np.repeat(np.array(sub_L)[ok], npt)])
    return V, W, L


def adapted_rule(P, grid):
    """Quadrature rule for ``P`` whose pieces never straddle a region boundary.

    Circular (n = 3) and Monte Carlo grids fall back to argmax
    classification of the base nodes.
    """
    key = ("rule", id(grid))
    cached = P._cache.get(key)
    if cached is not None and cached[0] is grid:
        return cached[1]
    if grid.scheme == "gauss-arc":
        V, W, L = _adapted_2d(P, grid)
    elif grid.scheme == "geodesic-subdivision":
        V, W, L = _adapted_3d(P, grid)
    else:
        V, W = grid.nodes, grid.weights
        L = chunked_map(lambda X: radial_all(P, X)[1], V)
    rule = Rule(V, W, L)
    P._cache[key] = (grid, rule)
    return rule


def label_sums(values, labels, m):
    """Per-label compensated sums in node order (exactly rounded, order-free)."""
    order = np.argsort(labels, kind="stable")
    sv, sl = values[order], labels[order]
    bounds = np.searchsorted(sl, np.arange(m + 1))
    return np.array([math.fsum(sv[bounds[i]:bounds[i + 1]]) for i in range(m)])
