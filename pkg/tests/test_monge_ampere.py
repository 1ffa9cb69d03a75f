import numpy as np
import pytest

from coneminq.errors import NonNegativityViolation, TooFewSamples
from coneminq.monge_ampere import (SupportProfile, boundary_limit_check,
                                   manufactured_density, residual)

# support function of the hyperbola set {x1 x2 >= 1} on the polar arc
h = lambda t: -np.sqrt(2 * np.sin(2 * t))
dh = lambda t: -np.sqrt(2) * np.cos(2 * t) / np.sqrt(np.sin(2 * t))
d2h = lambda t: np.sqrt(2) * (2 * np.sin(2 * t) ** 2 + np.cos(2 * t) ** 2) / np.sin(2 * t) ** 1.5

ARC = (np.pi, 1.5 * np.pi)


def grid(n, margin=0.05):
    return np.linspace(ARC[0] + margin, ARC[1] - margin, n)


def test_hyperbola_support_is_correct():
    # DERIVED: the support function is min over the curve x2 = 1/x1 of u . x
    x = np.geomspace(1e-3, 1e3, 200001)
    for t in (3.4, 3.9, 4.5):
        u = np.array([np.cos(t), np.sin(t)])
        assert np.max(u[0] * x + u[1] / x) == pytest.approx(h(t), rel=1e-6)


@pytest.mark.parametrize("p,q", [(-1, 1), (0.5, 2), (2, 0), (0, 3)])
def test_manufactured_analytic(p, q):
    f = manufactured_density(h, dh, d2h, p, q)
    prof = SupportProfile.from_function(h, grid(512), dh, d2h)
    worst, _ = residual(prof, f, p, q)
    assert worst <= 1e-10


def test_manufactured_finite_differences():
    f = manufactured_density(h, dh, d2h, -1, 1)
    prof = SupportProfile.from_function(h, grid(2048))
    worst, res = residual(prof, f, -1, 1)
    assert worst <= 1e-6
    assert len(res) == 2048


def test_fourth_order_convergence():
    f = manufactured_density(h, dh, d2h, -1, 1)
    errs = [residual(SupportProfile.from_function(h, grid(n, 0.2)), f, -1, 1)[0]
            for n in (128, 256)]
    assert np.log2(errs[0] / errs[1]) > 3.5


def test_polytope_profile_has_zero_density():
    hp = lambda t: np.cos(t) + np.sin(t)
    prof = SupportProfile.from_function(hp, grid(256), lambda t: -np.sin(t) + np.cos(t),
                                        lambda t: -np.cos(t) - np.sin(t))
    assert residual(prof, 0.0, -1, 2)[0] <= 1e-14


def test_perturbation_scales():
    f = manufactured_density(h, dh, d2h, -1, 1)
    out = []
    for eps in (1e-2, 1e-3):
        hp = lambda t, e=eps: h(t) + e * np.sin(5 * t)
        out.append(residual(SupportProfile.from_function(hp, grid(1024)), f, -1, 1)[0])
    assert out[0] > 0 and out[1] > 0
    assert out[0] / out[1] == pytest.approx(10, rel=0.05)


def test_profile_validation():
    with pytest.raises(TooFewSamples):
        SupportProfile(grid(5), h(grid(5)))
    with pytest.raises(NonNegativityViolation):
        SupportProfile(grid(16), np.ones(16))
    with pytest.raises(ValueError):
        SupportProfile(grid(16)[::-1], h(grid(16)))
    with pytest.raises(ValueError):
        SupportProfile(np.linspace(3.0, 4.0, 16), -np.ones(16))


def test_boundary_limit_examples():
    t = np.linspace(ARC[0] + 1e-4, ARC[1] - 1e-4, 4001)
    assert boundary_limit_check(SupportProfile(t, h(t)))
    assert not boundary_limit_check(SupportProfile(t, np.cos(t) + np.sin(t)))
    assert not boundary_limit_check(SupportProfile(t, -np.ones_like(t)))
