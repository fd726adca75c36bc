"""Closed-form shape generators for initial data and oracle quadrature.

Each shape exposes gamma, gamma' and gamma'' as functions of the angle
parameter over ``[0, period)`` so that curvature and the arclength element
have exact expressions.  ``sample`` produces the uniform-parameter node set
consumed by the rest of the library.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .geometry import ClosedCurve

TWO_PI = 2.0 * np.pi


class ShapeError(ValueError):
    """Shape parameters do not define a regular closed curve."""


class ParametricShape:
    """Base for closed-form curves gamma(theta), theta in [0, period)."""

    period: float = TWO_PI

    def point(self, theta):
        raise NotImplementedError

    def velocity(self, theta):
        raise NotImplementedError

    def acceleration(self, theta):
        raise NotImplementedError

    def speed(self, theta):
        v = self.velocity(theta)
        return np.hypot(v[..., 0], v[..., 1])

    def curvature(self, theta):
        v = self.velocity(theta)
        a = self.acceleration(theta)
        num = v[..., 0] * a[..., 1] - v[..., 1] * a[..., 0]
        return num / self.speed(theta) ** 3

    def sample(self, n: int) -> ClosedCurve:
        theta = self.period * np.arange(int(n)) / int(n)
        pts = self.point(theta)
        speed = self.speed(theta)
        if speed.min() <= 1e-9 * speed.max():
            raise ShapeError("shape parameters give an irregular (cusped) curve")
        return ClosedCurve(pts)


@dataclass(frozen=True)
class Circle(ParametricShape):
    radius: float = 1.0
    center: tuple = (0.0, 0.0)

    def point(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.stack(
            (
                self.center[0] + self.radius * np.cos(theta),
                self.center[1] + self.radius * np.sin(theta),
            ),
            axis=-1,
        )

    def velocity(self, theta):
        theta = np.asarray(theta, dtype=float)
        return self.radius * np.stack((-np.sin(theta), np.cos(theta)), axis=-1)

    def acceleration(self, theta):
        theta = np.asarray(theta, dtype=float)
        return self.radius * np.stack((-np.cos(theta), -np.sin(theta)), axis=-1)


@dataclass(frozen=True)
class DoubleCircle(Circle):
    """Circle traversed twice (winding number 2 test input)."""

    period = 2.0 * TWO_PI


@dataclass(frozen=True)
class Ellipse(ParametricShape):
    a: float = 2.0
    b: float = 1.0

    def point(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.stack((self.a * np.cos(theta), self.b * np.sin(theta)), axis=-1)

    def velocity(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.stack((-self.a * np.sin(theta), self.b * np.cos(theta)), axis=-1)

    def acceleration(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.stack((-self.a * np.cos(theta), -self.b * np.sin(theta)), axis=-1)


@dataclass(frozen=True)
class PolarShape(ParametricShape):
    """Radial graph r(theta) = r0 + sum of amp*cos(k*theta + phase) modes."""

    base_radius: float = 1.0
    modes: tuple = ()  # tuple of (amplitude, wavenumber, phase)

    def __post_init__(self):
        amps = sum(abs(a) for a, _, _ in self.modes)
        if amps >= self.base_radius:
            raise ShapeError(
                "radial perturbation amplitudes must stay below the base radius"
            )

    def radius(self, theta):
        theta = np.asarray(theta, dtype=float)
        r = np.full_like(theta, self.base_radius)
        for amp, k, phase in self.modes:
            r = r + amp * np.cos(k * theta + phase)
        return r

    def radius_d1(self, theta):
        theta = np.asarray(theta, dtype=float)
        r = np.zeros_like(theta)
        for amp, k, phase in self.modes:
            r = r - amp * k * np.sin(k * theta + phase)
        return r

    def radius_d2(self, theta):
        theta = np.asarray(theta, dtype=float)
        r = np.zeros_like(theta)
        for amp, k, phase in self.modes:
            r = r - amp * k * k * np.cos(k * theta + phase)
        return r

    def point(self, theta):
        theta = np.asarray(theta, dtype=float)
        r = self.radius(theta)
        return np.stack((r * np.cos(theta), r * np.sin(theta)), axis=-1)

    def velocity(self, theta):
        theta = np.asarray(theta, dtype=float)
        r, r1 = self.radius(theta), self.radius_d1(theta)
        c, s = np.cos(theta), np.sin(theta)
        return np.stack((r1 * c - r * s, r1 * s + r * c), axis=-1)

    def acceleration(self, theta):
        theta = np.asarray(theta, dtype=float)
        r, r1, r2 = self.radius(theta), self.radius_d1(theta), self.radius_d2(theta)
        c, s = np.cos(theta), np.sin(theta)
        return np.stack(
            ((r2 - r) * c - 2.0 * r1 * s, (r2 - r) * s + 2.0 * r1 * c), axis=-1
        )


def perturbed_circle(radius=1.0, delta=0.05, k=3, phase=0.0) -> PolarShape:
    """r(theta) = radius + delta * cos(k*theta + phase)."""
    return PolarShape(base_radius=radius, modes=((delta, k, phase),))


def shape_from_spec(spec: Mapping) -> ParametricShape:
    """Build a shape from a flat key-value description (see the README)."""
    kind = spec.get("shape")
    if kind == "circle":
        return Circle(radius=float(spec.get("radius", 1.0)))
    if kind == "double_circle":
        return DoubleCircle(radius=float(spec.get("radius", 1.0)))
    if kind == "ellipse":
        return Ellipse(a=float(spec.get("a", 2.0)), b=float(spec.get("b", 1.0)))
    if kind == "perturbed_circle":
        return perturbed_circle(
            radius=float(spec.get("radius", 1.0)),
            delta=float(spec.get("delta", 0.05)),
            k=int(spec.get("mode", 3)),
            phase=float(spec.get("phase", 0.0)),
        )
    if kind == "multi_mode":
        modes = tuple(
            (float(a), int(k), float(ph)) for a, k, ph in spec.get("modes", ())
        )
        return PolarShape(base_radius=float(spec.get("radius", 1.0)), modes=modes)
    raise ShapeError(f"unknown shape kind: {kind!r}")


def generate_shape(spec: Mapping, n: int) -> ClosedCurve:
    """Sample a shape description at ``n`` uniform parameter nodes."""
    return shape_from_spec(spec).sample(int(n))
