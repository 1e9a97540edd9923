"""Source parameters, frequency grids and measurement synthesis.

A moving point source ``j`` contributes ``a_j * exp(i (y_j + t tau v_j) . w)``
to frame ``t`` at frequency ``w``.  Noise is bounded: every sample is perturbed
by a draw that is uniform on the complex disk of radius ``sigma``.

Noise draws are keyed by ``(seed, node)`` rather than by position in an array,
so the value at a given frequency is the same whichever grid contains it.  This
is what lets :func:`sample_along_direction` reproduce :func:`synthesize`
bit-for-bit at a single node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, DynsrError

# Node coordinates are quantized to this resolution before keying the noise RNG.
NODE_KEY_RESOLUTION = 1e-9
_UINT64_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class ParameterSet:
    """Amplitudes, initial locations and velocities of ``n`` moving sources.

    ``locations`` and ``velocities`` have shape ``(n, dim)``.
    """

    amplitudes: np.ndarray
    locations: np.ndarray
    velocities: np.ndarray
    tau: float = 1.0

    def __post_init__(self):
        amps = np.atleast_1d(np.asarray(self.amplitudes, dtype=complex))
        locs = np.asarray(self.locations, dtype=float)
        vels = np.asarray(self.velocities, dtype=float)
        if locs.ndim == 1:
            locs = locs[:, None]
        if vels.ndim == 1:
            vels = vels[:, None]
        if locs.shape != vels.shape or locs.shape[0] != amps.shape[0]:
            raise DimensionMismatchError(
                f"inconsistent shapes: amplitudes {amps.shape}, "
                f"locations {locs.shape}, velocities {vels.shape}"
            )
        if not self.tau > 0:
            raise DynsrError(f"tau must be positive, got {self.tau}")
        for name, arr in (("amplitudes", amps), ("locations", locs), ("velocities", vels)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_entries(cls, entries, tau: float = 1.0) -> "ParameterSet":
        """Build from ``(amplitude, location, velocity)`` triples."""
        entries = list(entries)
        if not entries:
            raise DynsrError("a parameter set needs at least one entry")
        amps = [complex(e[0]) for e in entries]
        locs = [np.atleast_1d(np.asarray(e[1], dtype=float)) for e in entries]
        vels = [np.atleast_1d(np.asarray(e[2], dtype=float)) for e in entries]
        return cls(np.array(amps), np.array(locs), np.array(vels), tau=tau)

    @property
    def n(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def dim(self) -> int:
        return self.locations.shape[1]

    @property
    def m_min(self) -> float:
        return float(np.min(np.abs(self.amplitudes))) if self.n else 0.0

    @property
    def steps(self) -> np.ndarray:
        """Per-frame displacements ``tau * v_j``."""
        return self.tau * self.velocities

    @property
    def pairs(self) -> np.ndarray:
        """Stacked location-displacement vectors ``(y_j, tau v_j)`` in R^{2d}."""
        return np.hstack([self.locations, self.steps])

    def is_sparse(self) -> bool:
        """True when all ``(y_j, tau v_j)`` pairs are distinct and amplitudes nonzero."""
        if self.n == 0 or self.m_min <= 0:
            return False
        return len({tuple(p) for p in self.pairs}) == self.n

    def union(self, other: "ParameterSet") -> "ParameterSet":
        if other.dim != self.dim or other.tau != self.tau:
            raise DimensionMismatchError("cannot merge parameter sets of different dim or tau")
        return ParameterSet(
            np.concatenate([self.amplitudes, other.amplitudes]),
            np.vstack([self.locations, other.locations]),
            np.vstack([self.velocities, other.velocities]),
            tau=self.tau,
        )

    def exponential_sum(self, nodes: np.ndarray, t) -> np.ndarray:
        """Noiseless values at ``nodes`` (shape ``(M, dim)``) for frame(s) ``t``.

        Returns shape ``(M,)`` for scalar ``t``, else ``(len(t), M)``.
        """
        nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        if nodes.shape[1] != self.dim:
            raise DimensionMismatchError(f"nodes have dim {nodes.shape[1]}, sources have {self.dim}")
        # Real float ufuncs only: BLAS products and vectorized complex multiplies
        # round differently with array length, and a node's value must not
        # depend on which other nodes share the grid.
        loc_phase = np.sum(nodes[:, None, :] * self.locations[None], axis=2)  # (M, n)
        step_phase = np.sum(nodes[:, None, :] * self.steps[None], axis=2)
        ar, ai = self.amplitudes.real, self.amplitudes.imag
        vals = []
        for frame in ts:
            phase = loc_phase + frame * step_phase
            c, s = np.cos(phase), np.sin(phase)
            vals.append(np.sum(ar * c - ai * s, axis=1) + 1j * np.sum(ar * s + ai * c, axis=1))
        vals = np.stack(vals)
        return vals[0] if np.ndim(t) == 0 else vals


@dataclass(frozen=True)
class FrequencyGrid:
    """Frequency nodes inside the ball of radius ``omega_max``.

    ``covering_radius`` bounds the distance from any point of the ball to the
    nearest node; it is ``None`` for ray grids, which do not cover the ball.
    """

    omega_max: float
    nodes: np.ndarray
    scheme: str = "cartesian"
    spacing: float | None = None
    covering_radius: float | None = None

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        if nodes.shape[0] == 0:
            raise DynsrError("frequency grid is empty")
        if not self.omega_max > 0:
            raise DynsrError("omega_max must be positive")
        if np.any(np.linalg.norm(nodes, axis=1) > self.omega_max + 1e-12):
            raise DynsrError("grid nodes must lie inside the ball of radius omega_max")
        if self.spacing is not None and not self.spacing > 0:
            raise DynsrError("grid spacing must be positive")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    def find_node(self, omega: np.ndarray, atol: float = 1e-12) -> int:
        """Index of the node equal to ``omega``; raises if absent."""
        dist = np.linalg.norm(self.nodes - np.asarray(omega, dtype=float), axis=1)
        idx = int(np.argmin(dist))
        if dist[idx] > atol:
            raise DynsrError(f"no grid node at frequency {np.asarray(omega).tolist()}")
        return idx


def cartesian_grid(omega_max: float, dim: int, spacing: float | None = None) -> FrequencyGrid:
    """Symmetric cartesian grid restricted to the ball, plus a boundary ring in 2-D.

    ``spacing`` defaults to ``omega_max / 32`` and is shrunk so that ``omega_max``
    is an exact multiple of it.  Only ``dim <= 2`` is supported: the covering
    radius is only certified there.
    """
    if dim not in (1, 2):
        raise DynsrError("cartesian grids are supported for dim 1 and 2 only")
    h = omega_max / 32 if spacing is None else float(spacing)
    if not h > 0:
        raise DynsrError("grid spacing must be positive")
    k = math.ceil(omega_max / h - 1e-12)
    h = omega_max / k
    axis = h * np.arange(-k, k + 1)
    if dim == 1:
        return FrequencyGrid(omega_max, axis[:, None], "cartesian", h, h / 2)
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    pts = pts[np.linalg.norm(pts, axis=1) <= omega_max + 1e-12]
    # even ring count keeps the grid symmetric under w -> -w
    m = 2 * math.ceil(math.pi * omega_max / h)
    ang = 2 * math.pi * np.arange(m) / m
    ring = omega_max * np.column_stack([np.cos(ang), np.sin(ang)])
    # drop ring points that coincide with lattice points (only possible on the lattice)
    on_lattice = np.all(np.abs(ring / h - np.rint(ring / h)) < 1e-9, axis=1)
    ring = ring[~on_lattice]
    return FrequencyGrid(omega_max, np.vstack([pts, ring]), "cartesian", h, h * math.sqrt(2))


def interval_grid(omega_max: float, points: int) -> FrequencyGrid:
    """Evenly spaced 1-D grid on ``[-omega_max, omega_max]`` with ``points`` nodes."""
    if points < 2:
        raise DynsrError("an interval grid needs at least two points")
    nodes = np.linspace(-omega_max, omega_max, points)
    h = 2 * omega_max / (points - 1)
    return FrequencyGrid(omega_max, nodes[:, None], "cartesian", h, h / 2)


def unit_vector(phi: float) -> np.ndarray:
    return np.array([math.cos(phi), math.sin(phi)])


def ray_grid(omega_max: float, angles) -> FrequencyGrid:
    """Nodes ``omega_max * (cos phi, sin phi)``: one per recovery direction."""
    nodes = np.array([omega_max * unit_vector(phi) for phi in angles])
    return FrequencyGrid(omega_max, nodes, "rays", None, None)


@dataclass(frozen=True)
class MeasurementSet:
    """Frames ``Y_t(w)``, ``t = 0..T``, sampled on ``grid``.

    ``source`` keeps the clean generator when the data were synthesized; it is
    needed for the continuous-frequency margin in admissibility checks.
    """

    grid: FrequencyGrid
    frames: np.ndarray  # (T+1, M) complex
    sigma: float | None = None
    seed: int | None = None
    source: ParameterSet | None = field(default=None, compare=False)

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=complex)
        if frames.ndim != 2 or frames.shape[1] != self.grid.size:
            raise DimensionMismatchError("frames must have shape (T+1, grid size)")
        if frames.shape[0] < 2:
            raise DynsrError("a measurement needs at least two frames (T >= 1)")
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)

    @property
    def T(self) -> int:
        return self.frames.shape[0] - 1

    @property
    def omega_max(self) -> float:
        return self.grid.omega_max

    @property
    def dim(self) -> int:
        return self.grid.dim


@dataclass(frozen=True)
class TimeSeries:
    """Frame-by-frame samples at a single frequency node."""

    values: np.ndarray
    omega_scale: float = 1.0

    def __post_init__(self):
        vals = np.atleast_1d(np.asarray(self.values, dtype=complex))
        if vals.ndim != 1:
            raise DynsrError("a time series is one-dimensional")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def T(self) -> int:
        return self.values.shape[0] - 1

    def __len__(self) -> int:
        return self.values.shape[0]


def _node_seed(seed: int, node: np.ndarray) -> np.random.SeedSequence:
    key = np.rint(np.asarray(node, dtype=float) / NODE_KEY_RESOLUTION).astype(np.int64)
    return np.random.SeedSequence([int(seed) & _UINT64_MASK, *(int(k) & _UINT64_MASK for k in key)])


def disk_noise(seed: int, node: np.ndarray, frames: int, sigma: float) -> np.ndarray:
    """``frames`` draws uniform on the open complex disk of radius ``sigma``.

    Radii are ``sigma * sqrt(u)`` with ``u`` in ``[0, 1)``, so the bound is strict.
    """
    rng = np.random.Generator(np.random.PCG64(_node_seed(seed, node)))
    u = rng.random((2, frames))
    return sigma * np.sqrt(u[0]) * np.exp(2j * np.pi * u[1])


def _check_noise(noise: float | None) -> None:
    if noise is not None and not noise > 0:
        raise DynsrError(f"noise level must be positive when noise is requested, got {noise}")


def synthesize(
    params: ParameterSet,
    grid: FrequencyGrid,
    T: int,
    noise: float | None = None,
    seed: int = 0,
) -> MeasurementSet:
    """Sample all frames ``t = 0..T`` of the sources on ``grid``.

    ``noise`` is the disk radius ``sigma``; ``None`` gives clean data.
    """
    if T < 1:
        raise DynsrError("T must be at least 1")
    if grid.dim != params.dim:
        raise DimensionMismatchError(f"grid dim {grid.dim} != source dim {params.dim}")
    _check_noise(noise)
    frames = params.exponential_sum(grid.nodes, np.arange(T + 1))
    if noise is not None:
        w = np.column_stack([disk_noise(seed, node, T + 1, noise) for node in grid.nodes])
        frames = frames + w
    return MeasurementSet(grid, frames, noise, seed, params)


def sample_along_direction(
    params: ParameterSet,
    direction,
    omega_max: float,
    T: int,
    noise: float | None = None,
    seed: int = 0,
) -> TimeSeries:
    """Frames at the single node ``omega_max * direction``.

    The result equals ``sum_j b_j exp(i (tau v_j . direction) omega_max t)`` with
    ``b_j = a_j exp(i y_j . direction omega_max)``, plus the same noise draw that
    :func:`synthesize` would put at that node.
    """
    v = np.atleast_1d(np.asarray(direction, dtype=float))
    if abs(np.linalg.norm(v) - 1.0) > 1e-12:
        raise DynsrError("direction must be a unit vector")
    if v.shape[0] != params.dim:
        raise DimensionMismatchError(f"direction dim {v.shape[0]} != source dim {params.dim}")
    if T < 1:
        raise DynsrError("T must be at least 1")
    _check_noise(noise)
    node = omega_max * v
    values = params.exponential_sum(node[None], np.arange(T + 1))[:, 0]
    if noise is not None:
        values = values + disk_noise(seed, node, T + 1, noise)
    return TimeSeries(values, omega_max)


def directional_samples(meas: MeasurementSet, direction) -> TimeSeries:
    """Per-frame values of ``meas`` at the node ``omega_max * direction``."""
    v = np.atleast_1d(np.asarray(direction, dtype=float))
    idx = meas.grid.find_node(meas.omega_max * v)
    return TimeSeries(meas.frames[:, idx], meas.omega_max)


def _difference_terms(candidate: ParameterSet, reference: ParameterSet | None):
    """Merge ``candidate - reference`` into distinct exponential terms."""
    terms: dict[tuple, complex] = {}
    for sign, ps in ((1.0, candidate), (-1.0, reference)):
        if ps is None:
            continue
        for a, y, w in zip(ps.amplitudes, ps.locations, ps.steps):
            key = (tuple(y), tuple(w))
            terms[key] = terms.get(key, 0j) + sign * a
    return [(np.array(k[0]), np.array(k[1]), c) for k, c in terms.items() if c != 0]


def lipschitz_margin(candidate: ParameterSet, meas: MeasurementSet) -> float:
    """Additive allowance turning the on-grid sup into a bound over the whole ball.

    The difference between the candidate and the clean generator is Lipschitz in
    the frequency with constant ``max_t sum_k |c_k| |y_k + t tau v_k|``; the margin
    is that constant times the grid covering radius.  Without a recorded
    generator or covering radius the verdict is on-grid only and this returns 0.
    """
    if meas.source is None or meas.grid.covering_radius is None:
        return 0.0
    return difference_lipschitz(candidate, meas.source, meas.T) * meas.grid.covering_radius


def difference_lipschitz(candidate: ParameterSet, reference: ParameterSet | None, T: int) -> float:
    """Frequency-Lipschitz constant of ``candidate - reference`` over frames ``0..T``."""
    terms = _difference_terms(candidate, reference)
    lip = 0.0
    for t in range(T + 1):
        lip = max(lip, sum(abs(c) * float(np.linalg.norm(y + t * w)) for y, w, c in terms))
    return lip


def sup_residual(candidate: ParameterSet, meas: MeasurementSet) -> float:
    if candidate.dim != meas.dim:
        raise DimensionMismatchError(f"candidate dim {candidate.dim} != measurement dim {meas.dim}")
    pred = candidate.exponential_sum(meas.grid.nodes, np.arange(meas.T + 1))
    return float(np.max(np.abs(pred - meas.frames)))


def is_sigma_admissible(candidate: ParameterSet, meas: MeasurementSet, sigma: float | None = None):
    """Check ``|prediction - Y_t(w)| < sigma`` at every frame and node.

    Returns ``(admissible, sup_residual)``.  The verdict also requires the
    residual plus :func:`lipschitz_margin` to stay below ``sigma``.
    ``sigma`` defaults to the measurement's noise level.
    """
    level = meas.sigma if sigma is None else sigma
    if level is None or not level > 0:
        raise DynsrError("admissibility needs a positive noise level")
    res = sup_residual(candidate, meas)
    return res + lipschitz_margin(candidate, meas) < level, res
