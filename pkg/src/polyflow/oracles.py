"""Independent reference computations for validating the main pipeline.

Nothing here shares differentiation machinery with the spectral module:
quadrature works on closed-form shape derivatives, the polygon area is the
shoelace formula, and the finite-difference curvature uses plain centered
stencils.  The linearized mode rate is the closed-form decay rate of a
radial harmonic about a circle, cross-checkable against a finite-difference
directional derivative of the discrete flow velocity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .geometry import ClosedCurve, derive_geometry
from .shapes import Circle, ParametricShape

QUAD_TOL = 1e-12
QUAD_LIMIT = 400


@dataclass(frozen=True)
class ShapeFunctionals:
    """Global functionals of an analytic shape from adaptive quadrature."""

    length: float
    area: float
    total_curvature: float
    kappa_bar: float
    kosc: float


def _quad(f, period: float) -> float:
    val, _ = integrate.quad(
        f, 0.0, period, epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=QUAD_LIMIT
    )
    return val


def quadrature_functionals(shape: ParametricShape) -> ShapeFunctionals:
    """Length, area, total curvature, mean curvature and oscillation of a
    closed-form shape, each by adaptive quadrature."""
    speed_min = shape.speed(np.linspace(0.0, shape.period, 4096, endpoint=False)).min()
    if speed_min <= 0.0:
        raise ValueError("shape is not regular: parameter speed vanishes")

    length = _quad(lambda t: shape.speed(t), shape.period)

    def area_integrand(t):
        g = shape.point(t)
        v = shape.velocity(t)
        return 0.5 * (g[..., 0] * v[..., 1] - g[..., 1] * v[..., 0])

    area = _quad(area_integrand, shape.period)
    total_curvature = _quad(
        lambda t: shape.curvature(t) * shape.speed(t), shape.period
    )
    kappa_bar = total_curvature / length
    kosc = length * _quad(
        lambda t: (shape.curvature(t) - kappa_bar) ** 2 * shape.speed(t),
        shape.period,
    )
    return ShapeFunctionals(
        length=length,
        area=area,
        total_curvature=total_curvature,
        kappa_bar=kappa_bar,
        kosc=kosc,
    )


def polygon_area(curve) -> float:
    """Shoelace area of the sample polygon (signed; O(N^-2) from the smooth area)."""
    pts = curve.points if isinstance(curve, ClosedCurve) else np.asarray(curve, float)
    x, y = pts[:, 0], pts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    return float(0.5 * np.sum(x * yn - xn * y))


def fd_curvature(curve: ClosedCurve) -> np.ndarray:
    """Signed curvature from second-order centered differences.

    Independent O(h^2) oracle for the spectral curvature; same orientation
    convention (counterclockwise circle has kappa = +1/r).
    """
    pts = curve.points
    h = 1.0 / curve.n
    d1 = (np.roll(pts, -1, axis=0) - np.roll(pts, 1, axis=0)) / (2.0 * h)
    d2 = (np.roll(pts, -1, axis=0) - 2.0 * pts + np.roll(pts, 1, axis=0)) / h**2
    num = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    return num / np.hypot(d1[:, 0], d1[:, 1]) ** 3


def linearized_mode_rate(p: int, radius: float, k: int) -> float:
    """Decay rate of the k-th radial harmonic about a circle of given radius.

    Linearizing the flow about the circle gives amplitude dynamics
    a_k' = lambda_k a_k with lambda_k = -k^{2p} (k^2 - 1) / r^{2p+2};
    modes 0 and 1 (area and translation) are neutral.
    """
    if k < 0:
        raise ValueError("mode number must be nonnegative")
    if k <= 1:
        return 0.0
    return -float(k) ** (2 * p) * (k**2 - 1.0) / radius ** (2 * p + 2)


def circle_mode_rate_numeric(
    p: int, radius: float, k: int, n: int = 256, delta: float = 1e-5
) -> float:
    """Mode-k eigenvalue of the discrete flow map at the circle.

    Central finite difference of the full discrete normal velocity along the
    radial harmonic cos(k*theta), projected back onto that harmonic; this is
    the numerical counterpart of ``linearized_mode_rate``.
    """
    theta = 2.0 * np.pi * np.arange(n) / n
    ck = np.cos(k * theta)
    e_r = np.stack((np.cos(theta), np.sin(theta)), axis=-1)
    sign = -1.0 if p % 2 else 1.0

    def radial_velocity(eps):
        pts = (radius + eps * ck)[:, None] * e_r
        cache = derive_geometry(ClosedCurve(pts), m_max=2 * p)
        v = sign * cache.kappa_derivs[2 * p]
        normal_radial = np.einsum("ij,ij->i", cache.normal, e_r)
        return v * normal_radial

    amp = delta * radius
    dv = (radial_velocity(amp) - radial_velocity(-amp)) / (2.0 * amp)
    return float(2.0 * np.mean(dv * ck))


def circle_shape(radius: float = 1.0) -> Circle:
    return Circle(radius=radius)
