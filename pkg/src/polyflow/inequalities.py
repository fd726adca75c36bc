"""Numerical verification of the periodic-function and curve inequalities.

These checks run standalone on arbitrary periodic samples (the sharp
Poincare-type inequality and the sup bound for mean-zero functions) and on
curve geometry caches (the epsilon-weighted interpolation inequality chain
and the product-norm scaling audits).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import spectral
from .geometry import GeometryCache

TWO_PI = 2.0 * np.pi

#: relative mean size above which an input counts as "auto-centered"
CENTERING_TOL = 1e-12


def _centered(values: np.ndarray, period: float):
    """Subtract the mean; report whether that changed anything material."""
    f = spectral._as_samples(values)
    if f.ndim != 1:
        raise ValueError("inequality checks take scalar samples")
    mean = f.mean()
    scale = max(np.abs(f).max(), 1.0)
    return f - mean, bool(abs(mean) > CENTERING_TOL * scale)


@dataclass(frozen=True)
class WirtingerResult:
    """Ratio check of int f^2 against (P^2/4pi^2) int f_x^2 for mean-zero f."""

    ratio: float
    bound: float
    holds: bool
    equality_case: bool
    degenerate: bool
    centered: bool


def wirtinger_check(values, period: float) -> WirtingerResult:
    """Sharp Poincare inequality on one period; equality iff a pure first
    harmonic.  Constant input is degenerate (0 <= 0) and holds trivially."""
    f, centered = _centered(values, period)
    fx = spectral.spectral_derivative(f, 1) / period
    int_f2 = period * float(np.mean(f**2))
    int_fx2 = period * float(np.mean(fx**2))
    bound = period**2 / (4.0 * np.pi**2)
    if int_fx2 == 0.0:
        return WirtingerResult(
            ratio=0.0, bound=bound, holds=True, equality_case=False,
            degenerate=True, centered=centered,
        )
    ratio = int_f2 / int_fx2
    return WirtingerResult(
        ratio=ratio,
        bound=bound,
        holds=bool(ratio <= bound + 1e-12 * period**2),
        equality_case=bool(abs(ratio - bound) <= 1e-10 * bound),
        degenerate=False,
        centered=centered,
    )


@dataclass(frozen=True)
class SupBoundResult:
    """max f^2 against (P/2pi) int f_x^2 for mean-zero periodic f."""

    sup_sq: float
    bound: float
    holds: bool
    centered: bool


def sup_bound_check(values, period: float) -> SupBoundResult:
    f, centered = _centered(values, period)
    fx = spectral.spectral_derivative(f, 1) / period
    sup_sq = float(np.max(f**2))
    bound = (period / TWO_PI) * period * float(np.mean(fx**2))
    scale = max(1.0, sup_sq)
    return SupBoundResult(
        sup_sq=sup_sq,
        bound=bound,
        holds=bool(sup_sq <= bound + 1e-12 * scale),
        centered=centered,
    )


@dataclass(frozen=True)
class InterpolationVerdict:
    """One epsilon instance of the derivative interpolation inequality."""

    m: int
    eps: float
    lhs: float
    rhs: float
    holds: bool


def interpolation_terms(
    length: float, kosc: float, norm_m: float, norm_m1: float, m: int, eps: float
):
    """Two sides of  ||k_{s^m}||^2 <= eps L^2 ||k_{s^{m+1}}||^2
    + (1/4 eps^m) L^{-(2m+1)} K_osc."""
    lhs = norm_m
    rhs = eps * length**2 * norm_m1 + kosc / (4.0 * eps**m * length ** (2 * m + 1))
    return lhs, rhs


def iterated_interp_check(
    cache: GeometryCache, m: int, eps_grid: Sequence[float]
) -> list[InterpolationVerdict]:
    """Check the interpolation inequality on a geometry cache for each epsilon."""
    if m < 1:
        raise ValueError("the inequality needs m >= 1")
    if m + 1 > cache.m_max:
        raise ValueError(f"cache holds derivatives to order {cache.m_max}, need {m + 1}")
    out = []
    for eps in eps_grid:
        if eps <= 0:
            raise ValueError("eps must be positive")
        lhs, rhs = interpolation_terms(
            cache.length, cache.kosc,
            float(cache.deriv_norms[m]), float(cache.deriv_norms[m + 1]), m, eps,
        )
        slack = 1e-10 * max(lhs, rhs, 1e-300)
        out.append(
            InterpolationVerdict(m=m, eps=float(eps), lhs=lhs, rhs=rhs,
                                 holds=bool(lhs <= rhs + slack))
        )
    return out


def p_term_norm(cache: GeometryCache, partition: Sequence[int]) -> float:
    """L1 norm of a product of arclength derivatives of the curvature
    deviation:  int |prod_i (kappa - kappa_bar)_{s^{mu_i}}| ds.

    Scales as lambda^(1 - mu - nu) under curve dilation, with mu the total
    derivative count and nu the factor count.
    """
    partition = [int(m) for m in partition]
    if not partition or any(m < 0 for m in partition):
        raise ValueError("partition must be nonempty with nonnegative orders")
    if max(partition) > cache.m_max:
        raise ValueError(
            f"cache holds derivatives to order {cache.m_max}, need {max(partition)}"
        )
    phi = cache.kappa - cache.kappa_bar
    prod = np.ones(cache.n)
    for m in partition:
        prod = prod * (phi if m == 0 else cache.kappa_derivs[m])
    return float(spectral.periodic_integral(np.abs(prod), cache.ds_weight))


def deviation_sobolev_norm(cache: GeometryCache, order: int) -> float:
    """Scale-weighted derivative-norm sum of the curvature deviation:
    sum_j L^{j+1/2} (int (kappa - kappa_bar)_{s^j}^2 ds)^{1/2} for j <= order.

    Used only for dilation-exponent audits (the norm is scale invariant).
    """
    if order > cache.m_max:
        raise ValueError(f"cache holds derivatives to order {cache.m_max}")
    phi_sq = spectral.periodic_integral(
        (cache.kappa - cache.kappa_bar) ** 2, cache.ds_weight
    )
    total = cache.length**0.5 * np.sqrt(phi_sq)
    for j in range(1, order + 1):
        total += cache.length ** (j + 0.5) * np.sqrt(cache.deriv_norms[j])
    return float(total)


def random_trig_polynomial(rng: np.random.Generator, n_modes: int, n: int = 256):
    """Mean-zero random trigonometric polynomial sampled on n uniform nodes."""
    u = np.arange(n) / n
    f = np.zeros(n)
    for j in range(1, n_modes + 1):
        a, b = rng.standard_normal(2)
        f += a * np.cos(TWO_PI * j * u) + b * np.sin(TWO_PI * j * u)
    return f
