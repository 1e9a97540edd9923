"""Hankel matrices and singular-value-thresholding source-number detection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DynsrError, SeriesTooShortError
from .model import (
    MeasurementSet,
    ParameterSet,
    TimeSeries,
    directional_samples,
    sample_along_direction,
    unit_vector,
)

# Relative floor below which singular values count as zero in rank diagnostics.
RANK_TOL = 1e-14


@dataclass(frozen=True)
class HankelMatrix:
    """``entries[p, q] = series[(p + q) * stride]`` for ``p, q = 0..s``.

    ``remainder`` is ``T + 1 - 2 s stride``, the count of unused trailing samples
    plus one.
    """

    entries: np.ndarray
    stride: int
    remainder: int

    @property
    def s(self) -> int:
        return self.entries.shape[0] - 1

    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.entries, compute_uv=False)

    def numerical_rank(self) -> int:
        sv = self.singular_values()
        return int(np.sum(sv > RANK_TOL * sv[0])) if sv[0] > 0 else 0


def _values(series) -> np.ndarray:
    if isinstance(series, TimeSeries):
        return series.values
    return np.atleast_1d(np.asarray(series, dtype=complex))


def hankel_stride(T: int, s: int) -> int:
    """Largest stride ``r`` with ``2 s r <= T``, so sample ``2 s r`` exists."""
    return T // (2 * s)


def build_hankel(series, s: int) -> HankelMatrix:
    """Form the ``(s+1) x (s+1)`` Hankel matrix of the subsampled series."""
    vals = _values(series)
    T = vals.shape[0] - 1
    if s < 1:
        raise DynsrError("Hankel order s must be at least 1")
    if 2 * s > T:
        raise SeriesTooShortError(f"need at least {2 * s + 1} samples for s={s}, got {T + 1}")
    r = hankel_stride(T, s)
    sub = vals[: 2 * s * r + 1 : r]
    idx = np.add.outer(np.arange(s + 1), np.arange(s + 1))
    return HankelMatrix(sub[idx], r, T + 1 - 2 * s * r)


def detect_number_svt(series, s: int, sigma: float) -> int:
    """Largest ``n`` whose ``n``-th singular value exceeds ``(s + 1) sigma``."""
    if not sigma > 0:
        raise DynsrError("sigma must be positive")
    sv = build_hankel(series, s).singular_values()
    above = sv > (s + 1) * sigma
    n = int(np.sum(above))
    assert above[:n].all(), "singular values are not sorted"
    return n


def detect_number_sweep(series, sigma: float) -> int:
    """Maximum of :func:`detect_number_svt` over ``s = 1..floor((T-1)/2)``."""
    vals = _values(series)
    T = vals.shape[0] - 1
    if T < 3:
        raise SeriesTooShortError(f"sweeping detection needs at least 4 samples, got {T + 1}")
    return max(detect_number_svt(vals, s, sigma) for s in range(1, (T - 1) // 2 + 1))


def number_directions(n_guess: int) -> list[np.ndarray]:
    """The ``n(n+1)/2`` unit vectors at angles ``2 pi q / (n (n+1))``."""
    if n_guess < 1:
        raise DynsrError("n_guess must be at least 1")
    count = n_guess * (n_guess + 1) // 2
    return [unit_vector(2 * math.pi * q / (n_guess * (n_guess + 1))) for q in range(1, count + 1)]


def sweep_angles(N: int) -> np.ndarray:
    """``pi/N, 2 pi/N, ..., pi``."""
    if N < 1:
        raise DynsrError("N must be at least 1")
    return math.pi * np.arange(1, N + 1) / N


def directional_series(
    source: ParameterSet | MeasurementSet,
    phi: float,
    *,
    omega_max: float | None = None,
    T: int | None = None,
    noise: float | None = None,
    seed: int = 0,
) -> TimeSeries:
    """Frames at ``omega_max * v(phi)``, from data or synthesized from sources."""
    v = unit_vector(phi)
    if isinstance(source, MeasurementSet):
        if source.dim != 2:
            raise DynsrError("directional recovery needs 2-D measurements")
        return directional_samples(source, v)
    if source.dim != 2:
        raise DynsrError("directional recovery needs 2-D sources")
    if omega_max is None or T is None:
        raise DynsrError("omega_max and T are required when sampling from a parameter set")
    return sample_along_direction(source, v, omega_max, T, noise, seed)


def detect_number_2d(
    source: ParameterSet | MeasurementSet,
    sigma: float,
    N: int | None = None,
    *,
    n_max: int = 6,
    omega_max: float | None = None,
    T: int | None = None,
    noise: float | None = None,
    seed: int = 0,
    spectra: list | None = None,
) -> int:
    """Sweep detection along ``N`` directions ``v(q pi / N)``; return the maximum.

    ``N`` defaults to ``n_max (n_max + 1) / 2``.  If ``spectra`` is a list, one
    ``(phi, s, singular values)`` record per direction and order is appended.
    """
    if N is None:
        N = n_max * (n_max + 1) // 2
    best = 0
    for phi in sweep_angles(N):
        ser = directional_series(source, phi, omega_max=omega_max, T=T, noise=noise, seed=seed)
        best = max(best, detect_number_sweep(ser, sigma))
        if spectra is not None:
            for s in range(1, (ser.T - 1) // 2 + 1):
                spectra.append((float(phi), s, build_hankel(ser, s).singular_values()))
    return best
