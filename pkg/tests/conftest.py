import numpy as np
import pytest

from coneminq.cone import boundary_angle, build_cone, omega_contains, polar
from coneminq.polytope import wulff_shape

S2 = 1 / np.sqrt(2)
U_DIAG = np.array([-S2, -S2])


def orthant(n=2):
    return build_cone(n, np.eye(n))


def square_cone():
    return build_cone(3, [[1, 0, 1], [0, 1, 1], [-1, 0, 1], [0, -1, 1.0]])


def wedge(deg):
    t = np.radians(deg)
    return build_cone(2, [[1, 0], [np.cos(t), np.sin(t)]])


def p1():
    return wulff_shape(orthant(2), [U_DIAG], [1.0])


def rand_normals(cone, m, rng, margin=0.2):
    """Random unit normals at angular distance >= margin from the polar boundary."""
    pc = polar(cone)
    out = []
    while len(out) < m:
        u = rng.standard_normal(cone.dim)
        u /= np.linalg.norm(u)
        if omega_contains(pc, u) and boundary_angle(pc, u) >= margin:
            out.append(u)
    return np.array(out)


def rand_polytope(cone, m, rng, lo=1.0, hi=2.0, margin=0.2):
    return wulff_shape(cone, rand_normals(cone, m, rng, margin), rng.uniform(lo, hi, m))


def rand_interior(cone, k, rng):
    out = []
    while len(out) < k:
        v = rng.standard_normal(cone.dim)
        v /= np.linalg.norm(v)
        if omega_contains(cone, v):
            out.append(v)
    return np.array(out)


@pytest.fixture
def rng():
    return np.random.default_rng(20241016)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
