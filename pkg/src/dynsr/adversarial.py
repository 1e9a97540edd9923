"""Worst-case indistinguishable source pairs and a brute-force sparsest-solution search.

The constructions place two source sets on interleaved equispaced nodes and
pick amplitudes so their Fourier transforms nearly cancel on ``|w| <= omega``.
Amplitudes come from a discretized minimax problem solved as a linear program;
the classical finite-difference weights are kept as a fallback candidate.
Every construction is re-verified on a dense grid with a Lipschitz margin and
raises :class:`ConstructionNotVerifiedError` when the residual is not below
``sigma``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import linprog
from scipy.special import comb

from .errors import ConstructionNotVerifiedError, DynsrError
from .model import (
    MeasurementSet,
    ParameterSet,
    cartesian_grid,
    interval_grid,
    difference_lipschitz,
    is_sigma_admissible,
    lipschitz_margin,
    synthesize,
)

LP_GRID_POINTS = 4096
LP_ANGLES = 16
DENSE_POINTS = 8193


@dataclass(frozen=True)
class WorstCasePair:
    """Two source sets whose measurements differ by less than ``sigma`` everywhere.

    ``rich`` carries ``n`` entries; ``poor`` carries ``n - 1`` (number case) or
    ``n`` (support case).  ``verified_residual`` is the dense-grid sup over all
    frames and ``margin`` the Lipschitz allowance added before comparing to
    ``sigma``.
    """

    rich: ParameterSet
    poor: ParameterSet
    delta: float
    verified_residual: float
    margin: float
    sigma: float

    @property
    def separation(self) -> float:
        """Minimum distance between distinct location-displacement pairs."""
        pts = np.vstack([self.rich.pairs, self.poor.pairs])
        diff = np.linalg.norm(pts[:, None] - pts[None], axis=2)
        diff[np.eye(len(pts), dtype=bool)] = np.inf
        return float(diff.min())


def number_spacing(n: int, omega: float, q: float) -> float:
    return 0.81 * math.exp(-1.5) / omega * q ** (1 / (2 * n - 2))


def support_spacing(n: int, omega: float, q: float) -> float:
    return 0.49 * math.exp(-1.5) / omega * q ** (1 / (2 * n - 1))


def finite_difference_weights(count: int) -> np.ndarray:
    """Alternating binomial weights annihilating polynomials of degree < count-1."""
    k = np.arange(count)
    return ((-1.0) ** k) * comb(count - 1, k)


def _exponentials(nodes: np.ndarray, omegas: np.ndarray) -> np.ndarray:
    return np.exp(1j * np.outer(omegas, nodes))


def _lp_with_pivot(E: np.ndarray, pivot: int, angles: int) -> np.ndarray | None:
    """Minimize ``max |E c|`` over complex ``c`` with ``c[pivot] = 1``."""
    M, K = E.shape
    free = [k for k in range(K) if k != pivot]
    theta = 2 * np.pi * np.arange(angles) / angles
    cos, sin = np.cos(theta)[:, None, None], np.sin(theta)[:, None, None]
    Er, Ei = E.real[None], E.imag[None]
    # Re(e^{-i theta} c E) = cos (cr Er - ci Ei) + sin (cr Ei + ci Er)
    a_re = (cos * Er + sin * Ei).reshape(angles * M, K)
    a_im = (-cos * Ei + sin * Er).reshape(angles * M, K)
    A = np.hstack([a_re[:, free], a_im[:, free], -np.ones((angles * M, 1))])
    b = -a_re[:, pivot]
    cost = np.zeros(2 * len(free) + 1)
    cost[-1] = 1.0
    bounds = [(None, None)] * (2 * len(free)) + [(0, None)]
    sol = linprog(cost, A_ub=A, b_ub=b, bounds=bounds, method="highs")
    if not sol.success:
        return None
    c = np.ones(K, dtype=complex)
    x = sol.x
    c[free] = x[: len(free)] + 1j * x[len(free) : 2 * len(free)]
    return c


def minimax_weights(
    nodes,
    normalize: np.ndarray,
    omega: float,
    grid_points: int = LP_GRID_POINTS,
    angles: int = LP_ANGLES,
) -> tuple[np.ndarray, float]:
    """Weights on ``nodes`` with small ``max_{|w|<=omega} |sum c_k e^{i x_k w}|``.

    The objective is the sup divided by the smallest weight magnitude among the
    ``normalize`` nodes.  Each normalizing node in turn is pinned to 1 and an LP
    is solved; the finite-difference weights compete as well.  Returns the
    best weights scaled so that ``min |c[normalize]| = 1``, and their ratio on
    the LP grid.
    """
    nodes = np.asarray(nodes, dtype=float)
    normalize = np.asarray(normalize, dtype=bool)
    omegas = np.linspace(-omega, omega, grid_points)
    E = _exponentials(nodes, omegas)
    order = np.argsort(nodes)
    fd = np.empty(len(nodes), dtype=complex)
    fd[order] = finite_difference_weights(len(nodes))
    candidates = [fd]
    for p in np.flatnonzero(normalize):
        c = _lp_with_pivot(E, int(p), angles)
        if c is not None:
            candidates.append(c)
    best, best_ratio = None, math.inf
    for c in candidates:
        floor = np.min(np.abs(c[normalize]))
        if floor <= 0:
            continue
        ratio = float(np.max(np.abs(E @ c))) / floor
        if ratio < best_ratio:
            best, best_ratio = c / floor, ratio
    return best, best_ratio


def _split(
    weights: np.ndarray, nodes: np.ndarray, rich_mask: np.ndarray, m_min: float, embed, tau: float
) -> tuple[ParameterSet, ParameterSet]:
    """Turn signed weights into the two parameter sets (difference = rich - poor)."""
    amps = m_min * weights
    sets = []
    for mask, sign in ((rich_mask, 1.0), (~rich_mask, -1.0)):
        locs, steps = embed(nodes[mask])
        sets.append(ParameterSet(sign * amps[mask], locs, steps / tau, tau=tau))
    return sets[0], sets[1]


def _verify(rich: ParameterSet, poor: ParameterSet, grid, T: int, sigma: float) -> tuple[float, float]:
    meas = synthesize(rich, grid, T)
    ok, res = is_sigma_admissible(poor, meas, sigma)
    margin = lipschitz_margin(poor, meas)
    if not ok:
        raise ConstructionNotVerifiedError(
            f"residual {res:.3e} + margin {margin:.3e} is not below sigma={sigma:.3e}"
        )
    return res, margin


def _check_inputs(n: int, omega: float, sigma: float, m_min: float) -> None:
    if n < 2:
        raise DynsrError("worst-case constructions need n >= 2")
    if not omega > 0 or not sigma > 0:
        raise DynsrError("omega and sigma must be positive")
    if not sigma < m_min:
        raise DynsrError("worst-case constructions need sigma < m_min")


def _reduced_check(weights, nodes, omega, m_min, sigma, points) -> float:
    """Sup of the 1-D weighted sum on ``|w| <= omega``; both tilted cases reduce to it."""
    omegas = np.linspace(-omega, omega, points)
    res = float(np.max(np.abs(_exponentials(nodes, omegas) @ (m_min * weights))))
    lip = float(np.sum(np.abs(m_min * weights) * np.abs(nodes)))
    if not res + lip * omega / (points - 1) < sigma:
        raise ConstructionNotVerifiedError(f"reduced 1-D residual {res:.3e} is not below sigma={sigma:.3e}")
    return res


def _build(
    nodes, rich_mask, normalize, omega, sigma, m_min, T, delta, embed, dim, tau, dense_points, dense_spacing
) -> WorstCasePair:
    weights, _ = minimax_weights(nodes, normalize, omega)
    if weights is None:
        raise ConstructionNotVerifiedError("minimax oracle produced no usable weights")
    rich, poor = _split(weights, nodes, rich_mask, m_min, embed, tau)
    reduced = _reduced_check(weights, nodes, omega, m_min, sigma, dense_points)
    if dim == 1:
        grid = interval_grid(omega, dense_points)
    elif dim == 2:
        if dense_spacing is None:
            dense_spacing = _adaptive_spacing(rich, poor, T, omega, sigma - reduced)
        grid = cartesian_grid(omega, 2, dense_spacing)
    else:
        # the change of variables shows every frame sees the reduced 1-D sum
        return WorstCasePair(rich, poor, delta, reduced, 0.0, sigma)
    res, margin = _verify(rich, poor, grid, T, sigma)
    return WorstCasePair(rich, poor, delta, res, margin, sigma)


def _adaptive_spacing(rich, poor, T, omega, slack) -> float:
    """Cartesian spacing whose Lipschitz margin uses at most half the slack.

    Clamped to ``[omega / 256, omega / 32]`` to keep the grid desk-sized.
    """
    lip = difference_lipschitz(poor, rich, T)
    if lip <= 0:
        return omega / 32
    h = 0.5 * slack / (lip * math.sqrt(2))
    return float(min(omega / 32, max(omega / 256, h)))


def _number_nodes(n: int, delta: float):
    rich = delta * np.arange(n)  # (j-1) delta, j = 1..n
    poor = -delta * np.arange(1, n)  # -j delta, j = 1..n-1
    nodes = np.concatenate([rich, poor])
    mask = np.arange(len(nodes)) < n
    return nodes, mask


def _support_nodes(n: int, delta: float):
    rich = -delta * np.arange(1, n + 1)  # -j delta
    poor = delta * np.arange(n)  # (j-1) delta
    nodes = np.concatenate([rich, poor])
    mask = np.arange(len(nodes)) < n
    return nodes, mask


def _static_embed(velocity: float, tau: float):
    def embed(x):
        return x[:, None], np.full((len(x), 1), tau * velocity)

    return embed


def _diagonal_embed(d: int):
    def embed(x):
        col = (x / math.sqrt(d))[:, None] * np.ones((1, d))
        return col, col.copy()

    return embed


def worst_case_number_1d(
    n: int,
    omega: float,
    sigma: float,
    m_min: float,
    grid_density: int = DENSE_POINTS,
    T: int = 4,
    velocity: float = 0.0,
    tau: float = 1.0,
) -> WorstCasePair:
    """``n`` sources at ``(j-1) delta`` against ``n-1`` at ``-j delta``, common velocity."""
    _check_inputs(n, omega, sigma, m_min)
    delta = number_spacing(n, omega, sigma / m_min)
    nodes, mask = _number_nodes(n, delta)
    return _build(nodes, mask, mask, omega, sigma, m_min, T, delta,
                  _static_embed(velocity, tau), 1, tau, grid_density, None)


def worst_case_support(
    n: int,
    omega: float,
    sigma: float,
    m_min: float,
    grid_density: int = DENSE_POINTS,
    T: int = 4,
    velocity: float = 0.0,
    tau: float = 1.0,
) -> WorstCasePair:
    """Two ``n``-sparse sets at ``-j delta`` and ``(j-1) delta``, common velocity.

    Either set may carry the minimum amplitude ``m_min``.
    """
    _check_inputs(n, omega, sigma, m_min)
    delta = support_spacing(n, omega, sigma / m_min)
    nodes, mask = _support_nodes(n, delta)
    everything = np.ones(len(nodes), dtype=bool)
    return _build(nodes, mask, everything, omega, sigma, m_min, T, delta,
                  _static_embed(velocity, tau), 1, tau, grid_density, None)


def worst_case_number_tilted(
    n: int,
    d: int,
    T: int,
    omega: float,
    sigma: float,
    m_min: float,
    grid_density: int = DENSE_POINTS,
    spacing: float | None = None,
) -> WorstCasePair:
    """Number counterexample with distinct velocities along the diagonal of R^{2d}.

    Pairs sit at ``x_j / ((T+1) sqrt(d)) * (1, ..., 1)`` where ``x_j`` are the
    static 1-D nodes; the pair separation is ``sqrt(2) delta / (T+1)``.
    ``spacing`` sets the 2-D verification grid (default ``omega / 32``).
    """
    _check_inputs(n, omega, sigma, m_min)
    if d < 1 or T < 1:
        raise DynsrError("need d >= 1 and T >= 1")
    delta = number_spacing(n, omega, sigma / m_min)
    nodes, mask = _number_nodes(n, delta)
    embed = _scaled_embed(d, 1.0 / (T + 1))
    return _build(nodes, mask, mask, omega, sigma, m_min, T, delta, embed, d, 1.0, grid_density, spacing)


def worst_case_support_tilted(
    n: int,
    d: int,
    T: int,
    omega: float,
    sigma: float,
    m_min: float,
    grid_density: int = DENSE_POINTS,
    spacing: float | None = None,
) -> WorstCasePair:
    """Support counterexample along the diagonal, spacing ``delta`` already divided by ``T+1``."""
    _check_inputs(n, omega, sigma, m_min)
    if d < 1 or T < 1:
        raise DynsrError("need d >= 1 and T >= 1")
    static = support_spacing(n, omega, sigma / m_min)
    nodes, mask = _support_nodes(n, static)
    everything = np.ones(len(nodes), dtype=bool)
    embed = _scaled_embed(d, 1.0 / (T + 1))
    return _build(nodes, mask, everything, omega, sigma, m_min, T, static / (T + 1),
                  embed, d, 1.0, grid_density, spacing)


def _scaled_embed(d: int, scale: float):
    base = _diagonal_embed(d)

    def embed(x):
        return base(scale * x)

    return embed


# --- brute-force sparsest solution -------------------------------------------------


@dataclass(frozen=True)
class SearchSpec:
    """Candidate supports: subsets of ``locations x steps`` of size at most ``k_max``.

    ``steps`` are per-frame displacements ``tau v``.
    """

    locations: np.ndarray
    steps: np.ndarray
    k_max: int = 2
    tau: float = 1.0

    MAX_AXIS = 64
    MAX_CANDIDATES = 2_000_000

    def __post_init__(self):
        locs = np.atleast_1d(np.asarray(self.locations, dtype=float))
        steps = np.atleast_1d(np.asarray(self.steps, dtype=float))
        if not 0 <= self.k_max <= 3:
            raise DynsrError("k_max must be between 0 and 3")
        if len(locs) > self.MAX_AXIS or len(steps) > self.MAX_AXIS:
            raise DynsrError(f"search grids are limited to {self.MAX_AXIS} nodes per axis")
        if len(locs) == 0 or len(steps) == 0:
            raise DynsrError("search grids must be nonempty")
        object.__setattr__(self, "locations", locs)
        object.__setattr__(self, "steps", steps)

    def atoms(self) -> np.ndarray:
        """All ``(location, step)`` pairs, location-major."""
        ly, lv = np.meshgrid(self.locations, self.steps, indexing="ij")
        return np.column_stack([ly.ravel(), lv.ravel()])


class Sparsest(NamedTuple):
    k: int | None
    witness: ParameterSet | None
    residual: float


def _candidate(atoms, combo, coef, tau) -> ParameterSet:
    sel = atoms[list(combo)]
    return ParameterSet(coef, sel[:, :1], sel[:, 1:] / tau, tau=tau)


def sparsest_solution_bruteforce(
    meas: MeasurementSet, sigma: float, spec: SearchSpec, chunk: int = 512
) -> Sparsest:
    """Smallest ``k`` with an admissible ``k``-entry candidate on the search grid.

    Amplitudes are least-squares fits to all frames.  Among admissible
    candidates of the smallest size, the one with the lowest sup residual wins;
    ties go to the lexicographically first support.  ``k`` is ``None`` if no
    candidate up to ``k_max`` is admissible.
    """
    if meas.dim != 1:
        raise DynsrError("the brute-force search is one-dimensional")
    if not sigma > 0:
        raise DynsrError("sigma must be positive")
    atoms = spec.atoms()
    y = meas.frames.ravel()  # (T+1) * M, frame-major
    t = np.arange(meas.T + 1)[:, None]
    w = meas.grid.nodes[:, 0][None, :]
    # A[:, a] is atom a's exponential over every (frame, node)
    A = np.stack([np.exp(1j * (loc + t * step) * w).ravel() for loc, step in atoms], axis=1)
    gram = A.conj().T @ A
    rhs = A.conj().T @ y

    empty_res = float(np.max(np.abs(y)))
    if empty_res < sigma:
        return Sparsest(0, None, empty_res)
    for k in range(1, spec.k_max + 1):
        total = comb(len(atoms), k, exact=True)
        if total > spec.MAX_CANDIDATES:
            raise DynsrError(f"{total} supports of size {k} exceed the search cap")
        best = None
        combos = itertools.combinations(range(len(atoms)), k)
        while True:
            block = np.array(list(itertools.islice(combos, chunk)), dtype=int).reshape(-1, k)
            if block.size == 0:
                break
            G = gram[block[:, :, None], block[:, None, :]]
            b = rhs[block]
            try:
                coef = np.linalg.solve(G, b[..., None])[..., 0]
            except np.linalg.LinAlgError:
                coef = np.stack([np.linalg.lstsq(g, v, rcond=None)[0] for g, v in zip(G, b)])
            pred = np.einsum("mbk,bk->bm", A[:, block], coef)
            sup = np.max(np.abs(pred - y[None]), axis=1)
            for i in np.argsort(sup, kind="stable"):
                if sup[i] >= sigma:
                    break
                if best is not None and sup[i] >= best[0]:
                    break
                cand = _candidate(atoms, block[i], coef[i], spec.tau)
                if sup[i] + lipschitz_margin(cand, meas) < sigma:
                    best = (float(sup[i]), cand)
                    break
        if best is not None:
            return Sparsest(k, best[1], best[0])
    return Sparsest(None, None, math.inf)
