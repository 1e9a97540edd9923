"""Projection-based velocity recovery in one and two dimensions.

Each direction ``v(phi)`` reduces the 2-D problem to a 1-D line-spectrum problem
whose "locations" are the projected displacements ``tau v_j . v(phi)``.  Two
well-separated directions give an ``n x n`` grid of candidate displacements;
the final selection is the permutation whose least-squares fit explains the
directional data best.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DynsrError, EnumerationCapError, InsufficientDirectionsError
from .model import MeasurementSet, ParameterSet, TimeSeries, sample_along_direction, unit_vector
from .music import PeakParams, TestWindow, music_locate, music_order, unambiguous_window
from .numdetect import detect_number_2d, detect_number_sweep, directional_series

ENUMERATION_CAP = 8
PARALLEL_TOL = 1e-9
# Adjacent sweep angles at spacing pi/6 have |cos| equal to the default cap up to rounding.
CAP_SLACK = 1e-12


def velocity_directions(n: int, N_override: int | None = None) -> np.ndarray:
    """Angles ``k pi / N``, ``k = 1..N``, with ``N = (n+2)(n+1)/2`` by default."""
    if n < 1:
        raise DynsrError("n must be at least 1")
    N = (n + 2) * (n + 1) // 2 if N_override is None else int(N_override)
    if N < 1:
        raise DynsrError("direction count must be at least 1")
    return math.pi * np.arange(1, N + 1) / N


@dataclass(frozen=True)
class DirectionalRecovery:
    phi: float
    projected_values: np.ndarray
    series: TimeSeries | None = field(default=None, compare=False, repr=False)
    detected: int = 0

    @property
    def direction(self) -> np.ndarray:
        return unit_vector(self.phi)

    @property
    def count(self) -> int:
        return int(self.projected_values.shape[0])

    @property
    def min_gap(self) -> float:
        """Smallest spacing between projected values; ``inf`` below two values."""
        if self.count < 2:
            return math.inf
        return float(np.min(np.diff(self.projected_values)))


class LstsqResult(NamedTuple):
    coefficients: np.ndarray
    residual: float
    rank: int

    @property
    def rank_deficient(self) -> bool:
        return self.rank < self.coefficients.shape[0]


def linear_lsq(G: np.ndarray, y: np.ndarray) -> LstsqResult:
    """Complex least squares ``min ||G a - y||``; minimum-norm if rank deficient."""
    G = np.atleast_2d(np.asarray(G, dtype=complex))
    y = np.asarray(y, dtype=complex)
    if G.shape[0] < G.shape[1]:
        raise DynsrError("least squares needs at least as many rows as columns")
    coef, _, rank, _ = np.linalg.lstsq(G, y, rcond=None)
    return LstsqResult(coef, float(np.linalg.norm(G @ coef - y)), int(rank))


@dataclass(frozen=True)
class RecoveryResult:
    """Recovered per-frame displacements ``tau v_j`` and matching diagnostics.

    ``amplitudes`` has one row per direction: the fitted coefficients, which
    estimate ``a_j exp(i y_j . v(phi) omega)``.
    """

    velocities: np.ndarray
    residual: float
    chosen_phis: tuple[float, float] | None = None
    permutation: tuple[int, ...] = ()
    amplitudes: np.ndarray | None = None
    directions: list[DirectionalRecovery] = field(default_factory=list, compare=False, repr=False)

    @property
    def n(self) -> int:
        return int(self.velocities.shape[0])


@dataclass(frozen=True)
class VelocityConfig:
    """Tunables of the 2-D pipeline; ``window`` defaults to one aliasing period."""

    N: int | None = None
    correlation_cap: float = math.cos(math.pi / 6)
    window: TestWindow | None = None
    tps: float = 1e-3
    peaks: PeakParams = PeakParams()
    n_max: int = 6

    def __post_init__(self):
        if not 0 < self.correlation_cap < 1:
            raise DynsrError("correlation cap must lie in (0, 1)")

    def resolved_window(self, omega_max: float) -> TestWindow:
        win = self.window if self.window is not None else unambiguous_window(omega_max, self.tps)
        check_window(win, omega_max)
        return win


def check_window(window: TestWindow, omega_max: float) -> None:
    """Reject windows wider than one period of the steering vector."""
    if window.stop - window.start > 2 * math.pi / omega_max + 1e-9:
        raise DynsrError("test window is wider than the aliasing period 2*pi/omega")


def recover_direction(
    series: TimeSeries,
    phi: float,
    sigma: float,
    window: TestWindow,
    peaks: PeakParams = PeakParams(),
) -> DirectionalRecovery:
    """Sweep detection fixes the model order; MUSIC then places the peaks."""
    n_hat = min(detect_number_sweep(series, sigma), music_order(series.T))
    if n_hat < 1:
        return DirectionalRecovery(float(phi), np.empty(0), series, 0)
    est = music_locate(series, n_hat, window, peaks)
    return DirectionalRecovery(float(phi), est.locations, series, n_hat)


def per_direction_recover(
    source: ParameterSet | MeasurementSet,
    sigma: float,
    angles,
    window: TestWindow | None = None,
    peaks: PeakParams = PeakParams(),
    *,
    omega_max: float | None = None,
    T: int | None = None,
    noise: float | None = None,
    seed: int = 0,
) -> list[DirectionalRecovery]:
    if isinstance(source, MeasurementSet):
        omega_max = source.omega_max
    if omega_max is None:
        raise DynsrError("omega_max is required")
    if window is None:
        window = unambiguous_window(omega_max)
    check_window(window, omega_max)
    recs = []
    for phi in angles:
        ser = directional_series(source, phi, omega_max=omega_max, T=T, noise=noise, seed=seed)
        recs.append(recover_direction(ser, phi, sigma, window, peaks))
    return recs


def choose_directions(recs, n: int, correlation_cap: float = math.cos(math.pi / 6)) -> tuple[float, float]:
    """Best and second-best directions by minimum projected gap.

    Only directions with exactly ``n`` projected values qualify; ties go to the
    smaller angle.  The second direction must satisfy ``|v1 . v2| <= cap``.
    """
    good = [r for r in recs if r.count == n]
    good.sort(key=lambda r: (-r.min_gap, r.phi))
    if len(good) < 2:
        raise InsufficientDirectionsError(f"{len(good)} direction(s) show exactly {n} peaks; need two")
    first = good[0]
    for r in good[1:]:
        if abs(float(first.direction @ r.direction)) <= correlation_cap + CAP_SLACK:
            return first.phi, r.phi
    raise InsufficientDirectionsError("no second direction within the correlation cap")


def grid_intersections(rec1: DirectionalRecovery, rec2: DirectionalRecovery) -> np.ndarray:
    """``out[j, k]`` solves ``v1 . z = b1_j`` and ``v2 . z = b2_k``."""
    v1, v2 = rec1.direction, rec2.direction
    if abs(float(v1 @ v2)) > 1 - PARALLEL_TOL:
        raise DynsrError("directions are (nearly) parallel")
    M = np.vstack([v1, v2])
    b1, b2 = np.meshgrid(rec1.projected_values, rec2.projected_values, indexing="ij")
    rhs = np.stack([b1.ravel(), b2.ravel()])
    return np.linalg.solve(M, rhs).T.reshape(b1.shape + (2,))


def design_matrix(points: np.ndarray, phi: float, omega_max: float, T: int) -> np.ndarray:
    """Columns ``(1, e^{i z.v W}, ..., e^{i T z.v W})`` for each candidate ``z``."""
    proj = np.asarray(points, dtype=float) @ unit_vector(phi)
    return np.exp(1j * omega_max * np.outer(np.arange(T + 1), proj))


def matching_objective(points: np.ndarray, data, omega_max: float) -> tuple[float, np.ndarray, bool]:
    """Sum of per-direction residual norms; also coefficients and full-rank flag."""
    total = 0.0
    coefs = []
    any_full = False
    for phi, ser in data:
        fit = linear_lsq(design_matrix(points, phi, omega_max, ser.T), ser.values)
        total += fit.residual
        coefs.append(fit.coefficients)
        any_full = any_full or not fit.rank_deficient
    return total, np.array(coefs), any_full


def pair_match_enumerate(grid_points: np.ndarray, data, omega_max: float, n: int) -> RecoveryResult:
    """Pick one grid point per row and column minimizing the matching objective.

    ``data`` is a sequence of ``(phi, TimeSeries)``.  Permutations are visited in
    lexicographic order and the first minimum wins.
    """
    if n > ENUMERATION_CAP:
        raise EnumerationCapError(f"n={n} exceeds the enumeration cap {ENUMERATION_CAP}")
    grid_points = np.asarray(grid_points, dtype=float)
    if grid_points.shape[:2] != (n, n) or not np.all(np.isfinite(grid_points)):
        raise DynsrError("grid points must be a finite n x n x 2 array")
    data = list(data)
    best = None
    for perm in itertools.permutations(range(n)):
        pts = grid_points[np.arange(n), list(perm)]
        obj, coefs, full = matching_objective(pts, data, omega_max)
        if not full:
            continue
        if best is None or obj < best[0]:
            best = (obj, perm, pts, coefs)
    if best is None:
        raise DynsrError("design matrices are rank deficient for every permutation")
    obj, perm, pts, coefs = best
    return RecoveryResult(pts, float(obj), None, tuple(int(p) for p in perm), coefs)


def recover_velocities_2d(
    source: ParameterSet | MeasurementSet,
    sigma: float,
    n: int | None = None,
    config: VelocityConfig = VelocityConfig(),
    *,
    omega_max: float | None = None,
    T: int | None = None,
    noise: float | None = None,
    seed: int = 0,
) -> RecoveryResult:
    """Full 2-D pipeline; ``n`` defaults to the 2-D sweep detector's estimate."""
    if isinstance(source, MeasurementSet):
        omega_max, T = source.omega_max, source.T
    if source.dim != 2:
        raise DynsrError("2-D velocity recovery needs 2-D data")
    if omega_max is None or T is None:
        raise DynsrError("omega_max and T are required when sampling from a parameter set")
    sample = dict(omega_max=omega_max, T=T, noise=noise, seed=seed)
    if n is None:
        n = detect_number_2d(source, sigma, n_max=config.n_max, **sample)
        if n < 1:
            raise InsufficientDirectionsError("no sources detected")
    if n > ENUMERATION_CAP:
        raise EnumerationCapError(f"n={n} exceeds the enumeration cap {ENUMERATION_CAP}")
    window = config.resolved_window(omega_max)
    recs = per_direction_recover(
        source, sigma, velocity_directions(n, config.N), window, config.peaks, **sample
    )
    phi1, phi2 = choose_directions(recs, n, config.correlation_cap)
    by_phi = {r.phi: r for r in recs}
    grid = grid_intersections(by_phi[phi1], by_phi[phi2])
    res = pair_match_enumerate(grid, [(r.phi, r.series) for r in recs], omega_max, n)
    return RecoveryResult(res.velocities, res.residual, (phi1, phi2), res.permutation, res.amplitudes, recs)


def recover_velocities_1d(
    source: ParameterSet | MeasurementSet | TimeSeries,
    sigma: float,
    n: int | None = None,
    window: TestWindow | None = None,
    peaks: PeakParams = PeakParams(),
    *,
    omega_max: float | None = None,
    T: int | None = None,
    noise: float | None = None,
    seed: int = 0,
) -> np.ndarray:
    """Displacements ``tau v_j`` of 1-D sources from the frames at ``+omega_max``.

    The projected count comes from the sweep detector only if ``n`` is omitted.
    Returns an ascending array that may hold fewer than ``n`` entries.
    """
    if isinstance(source, TimeSeries):
        ser = source
    elif isinstance(source, MeasurementSet):
        if source.dim != 1:
            raise DynsrError("1-D velocity recovery needs 1-D data")
        idx = source.grid.find_node(np.array([source.omega_max]))
        ser = TimeSeries(source.frames[:, idx], source.omega_max)
    else:
        if source.dim != 1:
            raise DynsrError("1-D velocity recovery needs 1-D sources")
        if omega_max is None or T is None:
            raise DynsrError("omega_max and T are required when sampling from a parameter set")
        ser = sample_along_direction(source, [1.0], omega_max, T, noise, seed)
    if window is None:
        window = unambiguous_window(ser.omega_scale)
    check_window(window, ser.omega_scale)
    if n is None:
        n = min(detect_number_sweep(ser, sigma), music_order(ser.T))
        if n < 1:
            return np.empty(0)
    return music_locate(ser, n, window, peaks).locations


def match_errors(estimates: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Per-source errors after the best reordering of the estimates.

    Missing estimates count as infinite error.
    """
    est = np.asarray(estimates, dtype=float).reshape(len(estimates), -1)
    tru = np.asarray(truth, dtype=float).reshape(len(truth), -1)
    n = tru.shape[0]
    if est.shape[0] < n:
        return np.full(n, np.inf)
    best = None
    for perm in itertools.permutations(range(est.shape[0]), n):
        err = np.linalg.norm(est[list(perm)] - tru, axis=1)
        if best is None or err.max() < best.max():
            best = err
    return best
