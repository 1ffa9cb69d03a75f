"""Variational solver for the discrete L_p dual Minkowski problem.

Given atoms ``(u_i, mu_i)`` on Omega_{C°} and exponents ``(p, q)`` we look for
a C-polytope whose (p, q) dual curvature measure is ``mu``.  The polytope is
the Wulff shape of positive values ``f`` on the atoms, found by minimising

    Phi(f) = -log ||f||_p + (1/q) log V_q([f])            (q != 0)
    Phi(f) = -log ||f||_p + E([f]) / |Omega_C|             (q == 0)

with ``||f||_p^p = sum mu_i f_i^p``; for ``p = 0`` the first term becomes
``-(1/M) sum mu_i log f_i``.  Phi is invariant under ``f -> lambda f``, so the
minimiser is only fixed up to scale and is rescaled afterwards using the
degree ``q - p`` homogeneity of the measure.

Minimisation runs in ``x = log f`` where the gradient is ``sigma - pi``:
``sigma`` is the normalised q-th dual curvature measure (region areas for
``q = 0``) and ``pi_i = mu_i f_i^p / ||f||_p^p``.
"""
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.special import logsumexp

from .cone import boundary_angle, omega_area, polar
from .errors import (InactiveAtomWarning, InvalidP, NotConvergedWarning,
                     UnsupportedDim, UnsupportedRegimeWarning, ZeroMass)
from .measures import DiscreteMeasure, _rule_values, pq_masses
from .polytope import CPolytope, copolar, wulff_shape
from .quadrature import label_sums, make_grid, _arc_frame, _gauss, _arc_points

@dataclass
class Problem:
    cone: object
    target: DiscreteMeasure
    p: float
    q: float
    tau_min: float = 0.0

    def __post_init__(self):
        self.p, self.q = float(self.p), float(self.q)
        if len(self.target) == 0 or self.target.total <= 0:
            raise ZeroMass("target measure is zero")
        self.target.check_domain(self.cone)
        if self.tau_min > 0:
            d = boundary_angle(polar(self.cone), self.target.directions)
            if np.any(d < self.tau_min):
                raise ValueError("atom closer to the boundary than tau_min")

    @property
    def regime(self):
        p, q = self.p, self.q
        exists = (p != 0 and q != 0 and p != q) or (p <= 0 and p < q)
        if p < q:
            return "existence and uniqueness"
        if p == q:
            return "unique up to dilation; existence not covered"
        return "existence; uniqueness unknown for p > q" if exists else "outside covered regimes"


@dataclass
class SolverConfig:
    resolution: int = 1024
    seed: int = 0
    max_iterations: int = 500
    tol: float = 1e-7
    armijo: float = 1e-4
    shrink: float = 0.5
    f0: float = 1.0

    def __post_init__(self):
        if self.resolution < 16:
            raise ValueError("resolution must be >= 16")
        if self.tol <= 0 or not 0 < self.shrink < 1 or self.armijo <= 0:
            raise ValueError("tolerances and step parameters must be positive")


@dataclass
class Solution:
    polytope: CPolytope
    achieved: DiscreteMeasure
    residuals: np.ndarray
    tau1: float
    iterations: int
    converged: bool
    objective_trace: List[float] = field(default_factory=list)
    regime: str = ""
    # the solved polytope in the polar cone for Alexandrov problems
    dual: Optional[CPolytope] = None


class _Evaluator:
    """Objective and x-gradient of Phi, with the Wulff shape they come from."""

    def __init__(self, problem, grid):
        self.pb = problem
        self.grid = grid
        self.mu = problem.target.masses
        self.U = problem.target.directions
        self.M = math.fsum(self.mu)
        self.area = math.fsum(grid.weights)

    def shape(self, x):
        return wulff_shape(self.pb.cone, self.U, np.exp(x))

    def __call__(self, x):
        p, q = self.pb.p, self.pb.q
        P = self.shape(x)
        if p == 0:
            t1 = -math.fsum(self.mu * x) / self.M
            pi = self.mu / self.M
        else:
            lse = logsumexp(p * x, b=self.mu)
            t1 = -lse / p
            pi = np.exp(p * x - lse) * self.mu
        s = label_sums(*_rule_values(P, q, self.grid), P.m)
        if q == 0:
            t2 = math.fsum(_rule_values(P, "log", self.grid)[0]) / self.area
            sigma = s / self.area
        else:
            t2 = math.log(math.fsum(s) / P.dim) / q
            sigma = s / math.fsum(s)
        return t1 + t2, sigma - pi, (P, s, pi, sigma)


def _check_p(problem):
    if problem.p == 0:
        raise InvalidP("p = 0 uses the logarithmic functional (solve handles it)")


def objective(f, problem, grid):
    """Phi at positive values ``f`` on the target atoms (p != 0)."""
    _check_p(problem)
    return _Evaluator(problem, grid)(np.log(np.asarray(f, dtype=float)))[0]


def gradient(f, problem, grid):
    """Gradient of Phi in the coordinates ``z_i = f_i^p`` (p != 0)."""
    _check_p(problem)
    f = np.asarray(f, dtype=float)
    _, gx, (P, s, _, _) = _Evaluator(problem, grid)(np.log(f))
    if np.any(s <= 0):
        warnings.warn("an atom's facet carries no mass", InactiveAtomWarning)
    # dx_i/dz_i = 1 / (p z_i)
    return gx / (problem.p * f ** problem.p)


def _bfgs(ev, x0, cfg):
    """BFGS with Armijo backtracking on Phi.

    Once Phi is flat to rounding, steps are instead accepted when they
    lower the residual without raising Phi beyond rounding.
    """
    x = x0.copy()
    phi, g, aux = ev(x)
    res = _rel_residual(aux)
    trace = [phi]
    H = np.eye(len(x))
    polish = False
    stalls = 0
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        if res <= 0.1 * cfg.tol:
            return x, aux, trace, it - 1, True
        d = -H @ g
        slope = g @ d
        if slope >= 0:
            H = np.eye(len(x))
            d, slope = -g, -(g @ g)
        slack = 4 * np.finfo(float).eps * max(1.0, abs(phi))
        t = 1.0
        while True:
            x_new = x + t * d
            phi_new, g_new, aux_new = ev(x_new)
            if polish:
                res_new = _rel_residual(aux_new)
                if res_new < res and phi_new <= phi + slack:
                    break
            elif phi_new <= phi + cfg.armijo * t * slope:
                res_new = _rel_residual(aux_new)
                break
            t *= cfg.shrink
            if t < 1e-12:
                return x, aux, trace, it, res <= cfg.tol
        assert phi_new <= phi + slack
        stalls = stalls + 1 if phi - phi_new <= slack else 0
        polish = polish or stalls >= 2
        s_, y = x_new - x, g_new - g
        sy = s_ @ y
        if sy > 1e-300:
            rho = 1.0 / sy
            V = np.eye(len(x)) - rho * np.outer(s_, y)
            H = V @ H @ V.T + rho * np.outer(s_, s_)
        x, phi, g, aux, res = x_new, phi_new, g_new, aux_new, res_new
        trace.append(phi)
    return x, aux, trace, it, res <= cfg.tol


def _rel_residual(aux):
    _, _, pi, sigma = aux
    return float(np.max(np.abs(sigma - pi) / pi))


def _scale_factor(problem, P, x, grid, area):
    """Dilation turning the normalised minimiser into a solution, and tau."""
    p, q = problem.p, problem.q
    mu = problem.target.masses
    norm_p = math.fsum(mu) if p == 0 else math.fsum(mu * np.exp(p * x))
    if q == 0:
        tau = norm_p / area
        lam = 1.0 if p == 0 else tau ** (-1.0 / p)
    else:
        vq = math.fsum(label_sums(*_rule_values(P, q, grid), P.m)) / P.dim
        tau = norm_p / vq
        lam = 1.0 if p == q else tau ** (1.0 / (q - p))
    return lam, tau


def _normalise(problem, ev, x):
    # shift x so that V_q = 1 (or E = 0): Phi is invariant under the shift
    P = ev.shape(x)
    if problem.q == 0:
        c = -math.fsum(_rule_values(P, "log", ev.grid)[0]) / ev.area
    else:
        vq = math.fsum(label_sums(*_rule_values(P, problem.q, ev.grid), P.m)) / P.dim
        c = -math.log(vq) / problem.q
    return x + c


def solve(problem, config=None, warn_regime=True):
    """Find a C-polytope whose (p, q) dual curvature measure matches the target."""
    cfg = config or SolverConfig()
    regime = problem.regime
    if warn_regime and (regime == "outside covered regimes" or "not covered" in regime):
        warnings.warn(f"(p, q) = ({problem.p}, {problem.q}): {regime}",
                      UnsupportedRegimeWarning)
    grid = make_grid(problem.cone, cfg.resolution, cfg.seed)
    ev = _Evaluator(problem, grid)
    x0 = np.full(len(problem.target), math.log(cfg.f0))
    x, aux, trace, iters, ok = _bfgs(ev, x0, cfg)
    x = _normalise(problem, ev, x)
    P0 = ev.shape(x)
    lam, tau = _scale_factor(problem, P0, x, grid, ev.area)
    P = P0.scaled(lam)
    masses = pq_masses(P, problem.p, problem.q, grid)
    mu = problem.target.masses
    # up to dilation only: compare shapes, not scales
    ref = masses * tau if problem.p == problem.q else masses
    residuals = np.abs(ref - mu) / mu
    active = masses > 0
    converged = bool(np.all(active) and residuals.max() <= cfg.tol)
    if not np.all(active):
        warnings.warn("target atom without mass at the final iterate", InactiveAtomWarning)
    if not converged:
        warnings.warn(f"solver stopped after {iters} iterations with max residual "
                      f"{residuals.max():.3g}", NotConvergedWarning)
    keep = masses > 0
    achieved = DiscreteMeasure(P.normals[keep], masses[keep], "omega_polar",
                               facets=np.flatnonzero(keep))
    return Solution(P, achieved, residuals, float(tau), iters, converged, trace, regime)


def solve_alexandrov(nu, p, cone, config=None):
    """Find a C-compatible set ``A`` with L_p Alexandrov measure ``nu``.

    The q = 0 problem is solved on the polar cone with the atoms of ``nu``
    as normals, giving ``B``; ``A`` is the copolar of ``B``.  The achieved
    measure is recomputed from the copolar of ``A`` rather than from ``B``.
    """
    cfg = config or SolverConfig()
    if nu.domain != "omega":
        raise ValueError("Alexandrov target must live on Omega_C")
    nu.check_domain(cone)
    if p == 0:
        warnings.warn("p = 0: logarithmic functional, solution unique up to dilation",
                      UnsupportedRegimeWarning)
    pc = polar(cone)
    target = DiscreteMeasure(nu.directions, nu.masses, "omega_polar")
    sol = solve(Problem(pc, target, p, 0.0), cfg, warn_regime=False)
    B = sol.polytope
    A = copolar(B)
    grid = make_grid(pc, cfg.resolution, cfg.seed)
    Bc = copolar(A)
    masses = pq_masses(Bc, p, 0, grid)
    # attach masses of the recomputed copolar to the atoms of nu
    J = np.zeros(len(nu))
    for k, u in enumerate(Bc.normals):
        if masses[k] > 0:
            j = int(np.argmax(nu.directions @ u))
            J[j] += masses[k]
    ref = J * sol.tau1 if p == 0 else J
    residuals = np.abs(ref - nu.masses) / nu.masses
    keep = J > 0
    achieved = DiscreteMeasure(nu.directions[keep], J[keep], "omega")
    converged = sol.converged and bool(residuals.max() <= cfg.tol)
    return Solution(A, achieved, residuals, sol.tau1, sol.iterations, converged,
                    sol.objective_trace, sol.regime, dual=B)


def discretize_density(density, cone, tau, m, seed=0):
    """Atoms on the inner region ``{u : delta(u) >= tau}`` of Omega_{C°}.

    ``density`` maps an ``(N, n)`` array of directions to nonnegative
    values.  In the plane the inner arc is cut into ``m`` equal cells with
    the atom at each cell midpoint and the mass from 16-point Gauss-Legendre
    on the cell.  Cells without mass are dropped.
    """
    if cone.dim != 2:
        raise UnsupportedDim("density discretisation is implemented for n = 2")
    if tau <= 0:
        raise ValueError("tau must be positive")
    frame = _arc_frame(polar(cone))
    lo, hi = tau, frame[2] - tau
    if hi <= lo:
        raise ZeroMass("margin leaves no interior arc")
    edges = np.linspace(lo, hi, m + 1)
    dirs, masses = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        th, w = _gauss(a, b, 16)
        vals = np.asarray(density(_arc_points(frame, th)), dtype=float)
        if np.any(vals < 0):
            raise ValueError("density must be nonnegative")
        mass = math.fsum(w * vals)
        if mass > 0:
            dirs.append(_arc_points(frame, [0.5 * (a + b)])[0])
            masses.append(mass)
    if not masses:
        raise ZeroMass("density vanishes on the inner region")
    return DiscreteMeasure(np.array(dirs), np.array(masses), "omega_polar")
