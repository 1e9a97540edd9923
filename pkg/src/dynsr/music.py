"""One-dimensional MUSIC imaging and peak selection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DynsrError, SeriesTooShortError
from .model import TimeSeries

# Denominator floor relative to ||Phi||; keeps the functional finite at exact roots.
REGULARIZATION = 1e-14


@dataclass(frozen=True)
class TestWindow:
    """Evenly spaced test points ``start, start + step, ...`` up to ``stop``."""

    start: float
    stop: float
    step: float

    __test__ = False  # keep pytest from collecting this class

    def __post_init__(self):
        if not self.step > 0:
            raise DynsrError("test-point spacing must be positive")
        if not self.stop > self.start:
            raise DynsrError("test window must have stop > start")

    def points(self) -> np.ndarray:
        count = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return self.start + self.step * np.arange(count)


def unambiguous_window(omega_max: float = 1.0, step: float = 1e-3) -> TestWindow:
    """``[-pi/omega_max, pi/omega_max]``: one full period of the steering vector."""
    return TestWindow(-math.pi / omega_max, math.pi / omega_max, step)


def support_window(n: int, T: int, omega_max: float = 1.0, step: float = 1e-3) -> TestWindow:
    """Ball of radius ``(n-1) pi / (T omega_max)`` padded by ten test steps.

    With ``T`` unit-time frames this is the velocity range on which the
    support-stability guarantee holds; it is narrower than the aliasing period.
    """
    half = (n - 1) * math.pi / (T * omega_max) + 10 * step
    return TestWindow(-half, half, step)


@dataclass(frozen=True)
class ImagingFunctional:
    test_points: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class PeakParams:
    """Peak compare range, derivative compare range and derivative threshold."""

    pcr: int = 3
    dcr: int = 3
    dct: float = 0.0

    def __post_init__(self):
        if self.pcr < 1 or self.dcr < 1:
            raise DynsrError("peak and derivative compare ranges must be at least 1")
        if self.dct < 0:
            raise DynsrError("derivative threshold must be non-negative")


def music_order(T: int) -> int:
    """Hankel order ``s``: ``T/2`` for even ``T``, ``(T-1)/2`` for odd ``T``."""
    return T // 2


def noise_space(series, n: int) -> np.ndarray:
    """Left singular vectors ``n+1 .. s+1`` of the stride-one Hankel matrix."""
    vals = series.values if isinstance(series, TimeSeries) else np.asarray(series, dtype=complex)
    T = vals.shape[0] - 1
    s = music_order(T)
    if s < 1:
        raise SeriesTooShortError("MUSIC needs at least three samples")
    if n < 1:
        raise DynsrError("MUSIC needs n >= 1")
    if n > s:
        raise DynsrError(f"n={n} leaves an empty noise space (s={s})")
    idx = np.add.outer(np.arange(s + 1), np.arange(s + 1))
    U, _, _ = np.linalg.svd(vals[idx])
    return U[:, n:]


def steering_vectors(points: np.ndarray, s: int, omega_max: float) -> np.ndarray:
    """Columns ``(1, e^{i W x}, ..., e^{i s W x})`` for each test point ``x``."""
    return np.exp(1j * omega_max * np.outer(np.arange(s + 1), points))


def music_spectrum(series: TimeSeries, n: int, window: TestWindow | None = None) -> ImagingFunctional:
    """Evaluate ``||Phi(x)|| / ||U2^* Phi(x)||`` over the test window."""
    if window is None:
        window = unambiguous_window(series.omega_scale)
    U2 = noise_space(series, n)
    x = window.points()
    phi = steering_vectors(x, U2.shape[0] - 1, series.omega_scale)
    num = np.linalg.norm(phi, axis=0)
    den = np.linalg.norm(U2.conj().T @ phi, axis=0)
    return ImagingFunctional(x, num / np.maximum(den, REGULARIZATION * num))


def peak_indices(values: np.ndarray, params: PeakParams = PeakParams(), spacing: float = 1.0) -> list[int]:
    """Indices of interior local maxima passing the derivative test.

    The derivative is the central difference with the given test-point spacing.
    """
    f = np.asarray(values, dtype=float)
    M = f.shape[0]
    if M < 2 * params.pcr + 1:
        raise DynsrError(f"image has {M} points, need at least {2 * params.pcr + 1}")
    deriv = np.abs(np.gradient(f, spacing))
    picks: list[int] = []
    for j in range(1, M - 1):
        lo, hi = max(0, j - params.pcr), min(M, j + params.pcr + 1)
        if f[j] < f[lo:hi].max():
            continue
        # a strict rise somewhere in the window rules out flat stretches
        if f[j] <= f[lo:hi].min():
            continue
        dlo, dhi = max(0, j - params.dcr), min(M, j + params.dcr + 1)
        if deriv[dlo:dhi].max() < params.dct:
            continue
        if picks and picks[-1] == j - 1 and f[picks[-1]] == f[j]:
            continue
        picks.append(j)
    return picks


def select_peaks(image: ImagingFunctional, pcr: int = 3, dcr: int = 3, dct: float = 0.0) -> np.ndarray:
    """Test points at selected peaks, ascending."""
    x = image.test_points
    return x[peak_indices(image.values, PeakParams(pcr, dcr, dct), _spacing(x))]


def _spacing(x: np.ndarray) -> float:
    return float(x[1] - x[0]) if x.shape[0] > 1 else 1.0


@dataclass(frozen=True)
class LocationEstimate:
    """Recovered locations (ascending) with their functional values.

    ``short`` is set when fewer than the requested number of peaks were found.
    """

    locations: np.ndarray
    peak_values: np.ndarray
    requested: int

    @property
    def short(self) -> bool:
        return self.locations.shape[0] < self.requested


def music_locate(
    series: TimeSeries,
    n: int,
    window: TestWindow | None = None,
    peaks: PeakParams = PeakParams(),
) -> LocationEstimate:
    """MUSIC followed by peak selection, keeping the ``n`` strongest peaks."""
    image = music_spectrum(series, n, window)
    idx = peak_indices(image.values, peaks, _spacing(image.test_points))
    # stable sort keeps the leftmost of equal-valued peaks
    idx = sorted(idx, key=lambda j: -image.values[j])[:n]
    idx.sort()
    return LocationEstimate(image.test_points[idx], image.values[idx], n)


def music_recover_1d(
    series: TimeSeries,
    n: int,
    window: TestWindow | None = None,
    peaks: PeakParams = PeakParams(),
) -> np.ndarray:
    """Estimated locations, ascending; may hold fewer than ``n`` entries."""
    return music_locate(series, n, window, peaks).locations
