"""Spectral calculus for uniformly sampled periodic data.

An array of N samples is interpreted as the values of a smooth 1-periodic
function at the nodes u_j = j/N.  Every operation here acts on the unique
band-limited trigonometric interpolant of the samples, so results are exact
to roundoff whenever the underlying function has no content above the
Nyquist mode, and spectrally accurate for smooth functions otherwise.

Vector-valued samples (shape ``(N, d)``) are handled column-wise.
"""

from __future__ import annotations

import numpy as np

MIN_GRID = 16


def _as_samples(values) -> np.ndarray:
    """Validate and return periodic samples as a float array."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim not in (1, 2):
        raise ValueError("periodic samples must be a 1-d or 2-d array")
    n = arr.shape[0]
    if n < MIN_GRID or n % 2:
        raise ValueError(f"grid size must be even and >= {MIN_GRID}, got {n}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("periodic samples contain non-finite values")
    return arr


def modes(n: int) -> np.ndarray:
    """Integer Fourier mode numbers in FFT ordering."""
    return np.fft.fftfreq(n, d=1.0 / n)


def _column_shape(mult: np.ndarray, arr: np.ndarray) -> np.ndarray:
    if arr.ndim == 2:
        return mult[:, None]
    return mult


def spectral_derivative(values, order: int = 1) -> np.ndarray:
    """Differentiate the trigonometric interpolant ``order`` times.

    The Nyquist mode is not representable in odd-order derivatives (its
    sine partner is invisible on the grid) and is zeroed there; even orders
    keep it with the real symmetric symbol.
    """
    arr = _as_samples(values)
    order = int(order)
    if order < 0:
        raise ValueError("derivative order must be nonnegative")
    if order == 0:
        return arr.copy()
    n = arr.shape[0]
    mult = (2j * np.pi * modes(n)) ** order
    if order % 2:
        mult[n // 2] = 0.0
    spec = np.fft.fft(arr, axis=0)
    return np.fft.ifft(_column_shape(mult, arr) * spec, axis=0).real


def periodic_integral(values, weight=None) -> float:
    """Trapezoid rule over one period: (1/N) * sum(values * weight).

    On the periodic uniform grid this is the spectrally accurate quadrature
    for smooth integrands.  ``weight`` carries the measure (e.g. |gamma_u|
    for arclength integrals) and defaults to one.
    """
    arr = np.asarray(values, dtype=float)
    if weight is not None:
        w = np.asarray(weight, dtype=float)
        if w.shape[0] != arr.shape[0]:
            raise ValueError(
                f"length mismatch: {arr.shape[0]} values vs {w.shape[0]} weights"
            )
        arr = arr * (w if arr.ndim == w.ndim else w[:, None])
    if not np.all(np.isfinite(arr)):
        raise ValueError("integrand contains non-finite values")
    out = arr.mean(axis=0)
    return float(out) if np.ndim(out) == 0 else out


def trig_interp(values, points) -> np.ndarray:
    """Evaluate the trigonometric interpolant at arbitrary parameter values.

    ``points`` may lie anywhere on the real line; the interpolant is
    1-periodic.  The Nyquist coefficient is treated as a pure cosine so the
    result is real for real input.  Direct O(M*N) evaluation.
    """
    arr = _as_samples(values)
    x = np.atleast_1d(np.asarray(points, dtype=float))
    n = arr.shape[0]
    coef = np.fft.fft(arr, axis=0) / n
    k = modes(n)
    basis = np.exp(2j * np.pi * np.outer(x, k))
    basis[:, n // 2] = np.cos(np.pi * n * x)
    out = basis @ coef
    return out.real


def resample(values, new_nodes) -> np.ndarray:
    """Evaluate the interpolant at a new strictly increasing node set.

    The new nodes must be strictly increasing and span less than one
    period (increasing mod 1).
    """
    x = np.asarray(new_nodes, dtype=float)
    if x.ndim != 1:
        raise ValueError("new parameter nodes must be a 1-d array")
    if x.size < 2 or np.any(np.diff(x) <= 0) or (x[-1] - x[0]) >= 1.0:
        raise ValueError("new parameter nodes must be strictly increasing mod 1")
    return trig_interp(values, x)


def upsample(values, m: int) -> np.ndarray:
    """Resample onto a finer uniform grid of ``m`` points by zero padding."""
    arr = _as_samples(values)
    n = arr.shape[0]
    m = int(m)
    if m == n:
        return arr.copy()
    if m < n or m % 2:
        raise ValueError("target grid must be even and at least the input size")
    spec = np.fft.fft(arr, axis=0)
    out = np.zeros((m,) + arr.shape[1:], dtype=complex)
    h = n // 2
    out[:h] = spec[:h]
    out[m - h + 1:] = spec[h + 1:]
    # split the Nyquist coefficient symmetrically between +-n/2
    out[h] = 0.5 * spec[h]
    out[m - h] = 0.5 * spec[h]
    return np.fft.ifft(out, axis=0).real * (m / n)


def downsample(values, n: int) -> np.ndarray:
    """Project onto a coarser uniform grid of ``n`` points (spectral truncation)."""
    arr = _as_samples(values)
    m = arr.shape[0]
    n = int(n)
    if n == m:
        return arr.copy()
    if n > m or n % 2:
        raise ValueError("target grid must be even and at most the input size")
    spec = np.fft.fft(arr, axis=0)
    h = n // 2
    out = np.zeros((n,) + arr.shape[1:], dtype=complex)
    out[:h] = spec[:h]
    out[h] = spec[h] + spec[m - h]
    out[h + 1:] = spec[m - h + 1:]
    return np.fft.ifft(out, axis=0).real * (n / m)


def _padded_size(n: int, n_factors: int) -> int:
    # products of c band-limited factors are alias-free on >= (c+1)/2 * n nodes
    m = -(-(n_factors + 1) * n // 2)
    return m + (m % 2)


def dealiased_product(*factors, dealias: bool = True) -> np.ndarray:
    """Pointwise product of periodic samples, optionally alias-free.

    With ``dealias`` the factors are zero-padded to a grid large enough that
    the retained modes of the product are uncontaminated (the 3/2 rule for
    quadratic products, generalised to the factor count), multiplied there
    and projected back.
    """
    if not factors:
        raise ValueError("need at least one factor")
    arrs = [_as_samples(f) for f in factors]
    n = arrs[0].shape[0]
    if any(a.shape[0] != n for a in arrs):
        raise ValueError("all factors must share the grid size")
    if not dealias or len(arrs) == 1:
        out = arrs[0].copy()
        for a in arrs[1:]:
            out = out * a
        return out
    m = _padded_size(n, len(arrs))
    out = upsample(arrs[0], m)
    for a in arrs[1:]:
        out = out * upsample(a, m)
    return downsample(out, n)


def dealiased_integral(*factors, weight=None) -> float:
    """Integral of a pointwise product, evaluated on a zero-padded grid.

    Equivalent to ``periodic_integral`` of the product but with quadrature
    aliasing removed for band-limited factors.  ``weight`` is padded along
    with the factors.
    """
    arrs = [_as_samples(f) for f in factors]
    if weight is not None:
        arrs.append(_as_samples(weight))
    n = arrs[0].shape[0]
    m = _padded_size(n, len(arrs))
    out = upsample(arrs[0], m)
    for a in arrs[1:]:
        out = out * upsample(a, m)
    return float(out.mean(axis=0))


def periodic_antiderivative(values) -> np.ndarray:
    """Mean-zero antiderivative of the zero-mean part of the samples.

    The secular part (the mean of ``values`` times u) is the caller's
    responsibility; the Nyquist mode is dropped as in odd-order derivatives.
    """
    arr = _as_samples(values)
    n = arr.shape[0]
    k = modes(n)
    mult = np.zeros(n, dtype=complex)
    nonzero = k != 0
    mult[nonzero] = 1.0 / (2j * np.pi * k[nonzero])
    mult[n // 2] = 0.0
    spec = np.fft.fft(arr, axis=0)
    return np.fft.ifft(_column_shape(mult, arr) * spec, axis=0).real
