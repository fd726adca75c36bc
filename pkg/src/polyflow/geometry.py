"""Differential geometry of discrete closed plane curves.

A curve is a uniform-parameter sample of a closed immersion.  From it we
build the full geometric state used everywhere else: arclength weight,
Frenet frame, curvature with its arclength derivatives, and the global
functionals (length, enclosed area, isoperimetric ratio, winding number,
average curvature, normalised curvature oscillation, derivative norms).

Conventions: the unit normal is the left rotation of the tangent, so that
kappa * nu = d^2 gamma / ds^2 and a counterclockwise circle of radius r has
kappa = +1/r, winding number +1 and positive enclosed area.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import spectral

TWO_PI = 2.0 * np.pi

#: relative floor on |gamma_u| below which the parametrization is degenerate
REGULARITY_EPS = 1e-12

#: acceptable distance between the total curvature and an integer multiple
#: of 2*pi before a curve counts as under-resolved
WINDING_RESIDUAL_TOL = 1e-3


class DegenerateCurveError(ValueError):
    """The sampled parametrization has (numerically) vanishing speed."""


class UnderResolvedError(ValueError):
    """Grid too coarse for a trustworthy topological quantity."""


@dataclass(frozen=True)
class ClosedCurve:
    """Uniform-parameter sample of a closed plane curve.

    ``points[j]`` is gamma(u_j) at u_j = j/N.  N must be even and >= 16;
    coordinates must be finite.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("curve points must have shape (N, 2)")
        n = pts.shape[0]
        if n < spectral.MIN_GRID or n % 2:
            raise ValueError(f"grid size must be even and >= {spectral.MIN_GRID}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("curve points contain non-finite values")
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]


def rotate_left(vectors: np.ndarray) -> np.ndarray:
    """Rotate plane vectors by +90 degrees: (x, y) -> (-y, x)."""
    return np.column_stack((-vectors[:, 1], vectors[:, 0]))


@dataclass(frozen=True)
class GeometryCache:
    """Immutable geometric state of a curve at one instant.

    ``kappa_derivs[m]`` holds the m-th arclength derivative of curvature
    (row 0 is curvature itself); ``deriv_norms[m]`` is the squared L2 norm
    of that row along the curve.
    """

    curve: ClosedCurve
    ds_weight: np.ndarray          # |gamma_u| per node
    tangent: np.ndarray            # unit tangent per node
    normal: np.ndarray             # left rotation of the tangent
    kappa_derivs: np.ndarray       # shape (m_max + 1, N)
    length: float
    area: float
    iso_ratio: float               # L^2 / (4 pi A)
    winding: int
    winding_residual: float
    kappa_bar: float
    kosc: float                    # L * integral of (kappa - kappa_bar)^2 ds
    deriv_norms: np.ndarray        # shape (m_max + 1,)

    @property
    def n(self) -> int:
        return self.curve.n

    @property
    def m_max(self) -> int:
        return self.kappa_derivs.shape[0] - 1

    @property
    def kappa(self) -> np.ndarray:
        return self.kappa_derivs[0]

    @property
    def min_kappa(self) -> float:
        return float(self.kappa_derivs[0].min())

    def dissipation(self, p: int) -> float:
        """Length decay rate magnitude: integral of kappa_{s^p}^2 ds."""
        return float(self.deriv_norms[p])


def derive_geometry(curve: ClosedCurve, m_max: int = 6) -> GeometryCache:
    """Build the geometric state of ``curve`` with curvature derivatives to
    order ``m_max``.

    Arclength differentiation is |gamma_u|^{-1} d/du applied spectrally;
    curvature is the normal component of d^2 gamma/ds^2; the enclosed area
    is -(1/2) * integral of <gamma, nu> ds.

    Raises ``DegenerateCurveError`` when the sampled speed collapses.
    """
    if m_max < 0:
        raise ValueError("m_max must be nonnegative")
    pts = curve.points
    n = curve.n

    gamma_u = spectral.spectral_derivative(pts, 1)
    speed = np.hypot(gamma_u[:, 0], gamma_u[:, 1])
    if not np.all(np.isfinite(speed)) or speed.min() <= REGULARITY_EPS * speed.max():
        raise DegenerateCurveError(
            "degenerate parametrization: |gamma_u| vanishes on the grid"
        )

    tangent = gamma_u / speed[:, None]
    normal = rotate_left(tangent)

    def dds(values):
        d = spectral.spectral_derivative(values, 1)
        return d / (speed[:, None] if d.ndim == 2 else speed)

    gamma_ss = dds(tangent)
    kappa = np.einsum("ij,ij->i", gamma_ss, normal)

    kappa_derivs = np.empty((m_max + 1, n))
    kappa_derivs[0] = kappa
    for m in range(1, m_max + 1):
        kappa_derivs[m] = dds(kappa_derivs[m - 1])

    length = spectral.periodic_integral(np.ones(n), speed)
    area = -0.5 * spectral.periodic_integral(
        np.einsum("ij,ij->i", pts, normal), speed
    )
    iso_ratio = length**2 / (4.0 * np.pi * area) if area != 0.0 else np.inf

    total_curvature = spectral.periodic_integral(kappa, speed)
    winding_float = total_curvature / TWO_PI
    winding = int(np.rint(winding_float))
    winding_residual = float(abs(winding_float - winding))

    kappa_bar = total_curvature / length
    kosc = length * spectral.periodic_integral((kappa - kappa_bar) ** 2, speed)
    deriv_norms = np.array(
        [spectral.periodic_integral(row**2, speed) for row in kappa_derivs]
    )

    return GeometryCache(
        curve=curve,
        ds_weight=speed,
        tangent=tangent,
        normal=normal,
        kappa_derivs=kappa_derivs,
        length=float(length),
        area=float(area),
        iso_ratio=float(iso_ratio),
        winding=winding,
        winding_residual=winding_residual,
        kappa_bar=float(kappa_bar),
        kosc=float(kosc),
        deriv_norms=deriv_norms,
    )


def winding_number(cache: GeometryCache) -> int:
    """Nearest integer to total curvature / 2 pi.

    Raises ``UnderResolvedError`` when the rounding residual exceeds the
    trustworthiness threshold.
    """
    if cache.winding_residual > WINDING_RESIDUAL_TOL:
        raise UnderResolvedError(
            f"under-resolved curve: total curvature is {cache.winding_residual:.3e} "
            "away from an integer multiple of 2*pi"
        )
    return cache.winding


# ---------------------------------------------------------------------------
# self-intersection multiplicity of the sample polygon
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MultiplicityReport:
    """Outcome of the polygon self-intersection scan.

    ``max_multiplicity`` is the largest number of distinct polyline passes
    through any intersection cluster (1 for an embedded curve).
    ``ambiguous`` is set when two clusters sit within twice the clustering
    tolerance of each other, i.e. the discrete count may be unstable.
    """

    max_multiplicity: int
    cluster_points: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))
    cluster_multiplicities: tuple = ()
    ambiguous: bool = False
    tolerance: float = 0.0


def _segment_pair_distances(pts: np.ndarray):
    """Min distances and witness points between all non-adjacent segment pairs."""
    n = pts.shape[0]
    a0 = pts
    a1 = np.roll(pts, -1, axis=0)
    ii, jj = np.triu_indices(n, k=2)
    keep = ~((ii == 0) & (jj == n - 1))
    ii, jj = ii[keep], jj[keep]

    p0, p1 = a0[ii], a1[ii]
    q0, q1 = a0[jj], a1[jj]

    d1 = p1 - p0
    d2 = q1 - q0

    def cross(u, v):
        return u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]

    o1 = cross(d1, q0 - p0)
    o2 = cross(d1, q1 - p0)
    o3 = cross(d2, p0 - q0)
    o4 = cross(d2, p1 - q0)
    proper = (o1 * o2 < 0) & (o3 * o4 < 0)

    def point_seg(p, s0, s1):
        seg = s1 - s0
        denom = np.einsum("ij,ij->i", seg, seg)
        t = np.einsum("ij,ij->i", p - s0, seg) / np.where(denom > 0, denom, 1.0)
        t = np.clip(t, 0.0, 1.0)
        proj = s0 + t[:, None] * seg
        return np.hypot(*(p - proj).T), proj

    dist = np.full(ii.shape, np.inf)
    witness = np.zeros((ii.shape[0], 2))
    for p, s0, s1 in ((q0, p0, p1), (q1, p0, p1), (p0, q0, q1), (p1, q0, q1)):
        d, proj = point_seg(p, s0, s1)
        better = d < dist
        dist[better] = d[better]
        witness[better] = 0.5 * (p[better] + proj[better])

    # proper crossings: distance zero at the line-line intersection point
    if np.any(proper):
        pi, qi = p0[proper], q0[proper]
        u, v = d1[proper], d2[proper]
        denom = cross(u, v)
        t = cross(qi - pi, v) / denom
        witness[proper] = pi + t[:, None] * u
        dist[proper] = 0.0

    return ii, jj, dist, witness


def _circular_run_count(indices: np.ndarray, n: int) -> int:
    """Number of contiguous blocks of segment indices, modulo wraparound."""
    idx = np.unique(indices)
    if idx.size == n:
        return 1
    gaps = np.diff(idx, append=idx[0] + n)
    return int(np.sum(gaps > 1))


def multiplicity_report(curve: ClosedCurve) -> MultiplicityReport:
    """Scan the sample polygon for self-intersections and count passes.

    Intersection events (segment pairs closer than L/(10N)) are clustered
    with the same spatial tolerance; each cluster's multiplicity is the
    number of contiguous polyline index runs passing through it.
    """
    pts = curve.points
    n = curve.n
    perimeter = float(np.hypot(*(np.roll(pts, -1, axis=0) - pts).T).sum())
    tol = perimeter / (10.0 * n)

    ii, jj, dist, witness = _segment_pair_distances(pts)
    hit = dist <= tol
    if not np.any(hit):
        return MultiplicityReport(max_multiplicity=1, tolerance=tol)

    events = witness[hit]
    seg_a, seg_b = ii[hit], jj[hit]

    # single-linkage clustering of event points at the spatial tolerance
    tree = cKDTree(events)
    parent = np.arange(events.shape[0])

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in tree.query_pairs(tol):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    roots = np.array([find(x) for x in range(events.shape[0])])
    labels = np.unique(roots)

    centers = []
    mults = []
    for lab in labels:
        members = roots == lab
        segs = np.concatenate((seg_a[members], seg_b[members]))
        mults.append(_circular_run_count(segs, n))
        centers.append(events[members].mean(axis=0))
    centers = np.asarray(centers)

    ambiguous = False
    if centers.shape[0] > 1:
        ctree = cKDTree(centers)
        ambiguous = bool(ctree.query_pairs(2.0 * tol))

    return MultiplicityReport(
        max_multiplicity=max(max(mults), 1),
        cluster_points=centers,
        cluster_multiplicities=tuple(mults),
        ambiguous=ambiguous,
        tolerance=tol,
    )


def max_multiplicity(curve: ClosedCurve) -> int:
    """Largest number of polyline passes through any one point (1 = embedded)."""
    return multiplicity_report(curve).max_multiplicity


@dataclass(frozen=True)
class EmbeddednessCheck:
    """Comparison of measured multiplicity against the curvature-oscillation bound
    m^2 <= (K_osc + 4 omega^2 pi^2) / 16."""

    multiplicity: int
    m_squared: float
    bound: float
    holds: bool


def embeddedness_bound_check(cache: GeometryCache, m: int) -> EmbeddednessCheck:
    """Check the multiplicity bound for a measured multiplicity ``m``."""
    bound = (cache.kosc + 4.0 * cache.winding**2 * np.pi**2) / 16.0
    m_sq = float(m) ** 2
    return EmbeddednessCheck(
        multiplicity=int(m),
        m_squared=m_sq,
        bound=float(bound),
        holds=bool(m_sq <= bound + 1e-12 * max(1.0, bound)),
    )
