"""Planar Monge-Ampere residual for smooth support functions.

On the polar arc (n = 2) the equation for the (p, q) dual curvature density
``f`` reads

    (-h)^(1-p) (h'' + h) = f * (h^2 + h'^2)^((2-q)/2)

with ``h`` the support function in the arc parameter ``phi``.
"""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import NonNegativityViolation, TooFewSamples

MIN_SAMPLES = 9
EDGE = 2  # samples at each end that use one-sided stencils


@dataclass
class SupportProfile:
    phi: np.ndarray
    h: np.ndarray
    dh: Optional[object] = None
    d2h: Optional[object] = None
    # endpoints of the open polar arc (planar orthant by default)
    arc: Tuple[float, float] = (np.pi, 1.5 * np.pi)

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        self.h = np.asarray(self.h, dtype=float)
        if self.phi.shape != self.h.shape or self.phi.ndim != 1:
            raise ValueError("phi and h must be 1-d arrays of equal length")
        if len(self.phi) < MIN_SAMPLES:
            raise TooFewSamples(f"need at least {MIN_SAMPLES} samples")
        if np.any(np.diff(self.phi) <= 0):
            raise ValueError("phi must be strictly increasing")
        lo, hi = self.arc
        if self.phi[0] <= lo or self.phi[-1] >= hi:
            raise ValueError("samples must lie strictly inside the arc")
        if np.any(self.h >= 0):
            raise NonNegativityViolation("support values must be strictly negative")

    @classmethod
    def from_function(cls, h, phi, dh=None, d2h=None, arc=(np.pi, 1.5 * np.pi)):
        phi = np.asarray(phi, dtype=float)
        return cls(phi, h(phi), dh, d2h, arc)


def _derivatives(phi, h):
    """Fourth-order first and second derivatives on a uniform grid."""
    d = np.diff(phi)
    step = d.mean()
    if np.max(np.abs(d - step)) > 1e-9 * step:
        raise ValueError("finite differences need uniformly spaced samples")
    d1 = np.empty_like(h)
    d2 = np.empty_like(h)
    c = slice(2, -2)
    d1[c] = (-h[4:] + 8 * h[3:-1] - 8 * h[1:-3] + h[:-4]) / (12 * step)
    d2[c] = (-h[4:] + 16 * h[3:-1] - 30 * h[2:-2] + 16 * h[1:-3] - h[:-4]) / (12 * step ** 2)
    for sgn, idx in ((1, [0, 1, 2, 3, 4, 5]), (-1, [-1, -2, -3, -4, -5, -6])):
        v = h[idx]
        # one-sided at the end sample, shifted stencil one sample in
        d1[idx[0]] = sgn * (-25 * v[0] + 48 * v[1] - 36 * v[2] + 16 * v[3] - 3 * v[4]) / (12 * step)
        d2[idx[0]] = (35 * v[0] - 104 * v[1] + 114 * v[2] - 56 * v[3] + 11 * v[4]) / (12 * step ** 2)
        d1[idx[1]] = sgn * (-3 * v[0] - 10 * v[1] + 18 * v[2] - 6 * v[3] + v[4]) / (12 * step)
        d2[idx[1]] = (11 * v[0] - 20 * v[1] + 6 * v[2] + 4 * v[3] - v[4]) / (12 * step ** 2)
    return d1, d2


def _evaluate(value, phi):
    return np.asarray(value(phi) if callable(value) else value, dtype=float)


def residual(profile, density, p, q):
    """Pointwise residual of the planar equation and its max over trusted samples.

    Analytic derivatives are used when the profile provides them; otherwise
    fourth-order differences, in which case the two samples at each end
    are reported but excluded from the maximum.
    """
    phi, h = profile.phi, profile.h
    if np.any(h >= 0):
        raise NonNegativityViolation("support values must be strictly negative")
    analytic = profile.dh is not None and profile.d2h is not None
    if analytic:
        d1, d2 = _evaluate(profile.dh, phi), _evaluate(profile.d2h, phi)
    else:
        d1, d2 = _derivatives(phi, h)
    f = _evaluate(density, phi)
    lhs = (-h) ** (1 - p) * (d2 + h)
    rhs = f * (h * h + d1 * d1) ** ((2 - q) / 2)
    res = lhs - rhs
    trusted = res if analytic else res[EDGE:-EDGE]
    return float(np.max(np.abs(trusted))), res


def manufactured_density(h, dh, d2h, p, q):
    """Density for which ``h`` solves the planar equation exactly."""
    def f(phi):
        hv, d1, d2 = h(phi), dh(phi), d2h(phi)
        return (-hv) ** (1 - p) * (d2 + hv) * (hv * hv + d1 * d1) ** ((q - 2) / 2)
    return f


def boundary_limit_check(profile, tol=1e-2, samples=8, probe=1e-8):
    """Whether ``h`` tends to 0 at both ends of the arc.

    Near each end ``|h|`` is fitted by a power law ``a s^b`` in the distance
    ``s`` to the endpoint and extrapolated to ``s = probe * arc length``.
    """
    phi, h = profile.phi, profile.h
    lo, hi = profile.arc
    length = hi - lo
    ok = True
    for s, v in ((phi[:samples] - lo, h[:samples]), (hi - phi[-samples:], h[-samples:])):
        b, loga = np.polyfit(np.log(s), np.log(np.abs(v)), 1)
        limit = np.exp(loga) * (probe * length) ** b if b > 0 else np.abs(v).min()
        ok = ok and bool(limit <= tol)
    return ok
