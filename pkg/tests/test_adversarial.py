import math

import numpy as np
import pytest

from dynsr import adversarial
from dynsr.adversarial import (
    SearchSpec,
    finite_difference_weights,
    minimax_weights,
    sparsest_solution_bruteforce,
    worst_case_number_1d,
    worst_case_number_tilted,
    worst_case_support,
    worst_case_support_tilted,
)
from dynsr.bounds import compute_bounds
from dynsr.errors import ConstructionNotVerifiedError, DynsrError
from dynsr.model import ParameterSet, interval_grid, synthesize
from dynsr.velocity import match_errors

E15 = math.exp(-1.5)


@pytest.fixture(scope="module")
def number_pair():
    return worst_case_number_1d(2, 1.0, 1e-2, 1.0)


def test_number_pair(number_pair):
    pair = number_pair
    assert pair.delta == pytest.approx(0.81 * E15 * 0.1, rel=1e-12)
    assert pair.delta == pytest.approx(0.01807, abs=1e-5)
    assert pair.rich.n == 2 and pair.poor.n == 1
    assert pair.verified_residual + pair.margin < 1e-2
    assert pair.separation == pytest.approx(pair.delta, abs=1e-12)
    assert pair.rich.m_min == pytest.approx(1.0, rel=1e-12)


def test_common_velocity_residual_independent_of_frame():
    pair = worst_case_number_1d(2, 1.0, 1e-2, 1.0, velocity=0.3, T=6)
    grid = interval_grid(1.0, 257)
    diff = synthesize(pair.rich, grid, 6).frames - synthesize(pair.poor, grid, 6).frames
    per_frame = np.max(np.abs(diff), axis=1)
    assert np.allclose(per_frame, per_frame[0], rtol=1e-9)


def test_spacing_scales_with_sigma():
    for n in (2, 3):
        full = adversarial.number_spacing(n, 1.0, 1e-2)
        half = adversarial.number_spacing(n, 1.0, 0.5e-2)
        assert half / full == pytest.approx(0.5 ** (1 / (2 * n - 2)), rel=1e-14)


def test_support_pair():
    pair = worst_case_support(2, 1.0, 1e-3, 1.0)
    assert pair.delta == pytest.approx(0.49 * E15 * 1e-1, rel=1e-12)
    assert pair.delta == pytest.approx(0.010934, abs=1e-6)
    assert pair.rich.n == pair.poor.n == 2
    assert pair.separation == pytest.approx(pair.delta, abs=1e-12)
    assert pair.verified_residual + pair.margin < 1e-3
    assert min(pair.rich.m_min, pair.poor.m_min) == pytest.approx(1.0, rel=1e-12)


def test_number_tilted_one_dimensional():
    pair = worst_case_number_tilted(2, 1, 4, 1.0, 1e-2, 1.0)
    expected = 0.81 * math.sqrt(2) * E15 / 5 * 0.1
    assert pair.separation == pytest.approx(expected, rel=1e-12)
    assert pair.verified_residual + pair.margin < 1e-2
    # frame 0 is the static construction squeezed by 1/(T+1)
    static = worst_case_number_1d(2, 1.0, 1e-2, 1.0)
    w = np.linspace(-1, 1, 11)[:, None]
    tilted0 = pair.rich.exponential_sum(w, 0)
    static0 = static.rich.exponential_sum(w / 5, 0)
    assert np.allclose(tilted0, static0, atol=1e-14)


def test_tilted_constructions_in_higher_dimension():
    two = worst_case_number_tilted(2, 2, 4, 1.0, 1e-2, 1.0)
    assert two.rich.dim == 2 and two.verified_residual + two.margin < 1e-2
    three = worst_case_number_tilted(2, 3, 4, 1.0, 1e-2, 1.0)
    assert three.rich.dim == 3 and three.verified_residual < 1e-2
    sup = worst_case_support_tilted(2, 2, 4, 1.0, 1e-3, 1.0)
    assert sup.delta == pytest.approx(adversarial.support_spacing(2, 1.0, 1e-3) / 5, rel=1e-12)
    assert sup.verified_residual + sup.margin < 1e-3


def test_failed_construction_is_reported(monkeypatch):
    monkeypatch.setattr(adversarial, "number_spacing", lambda n, omega, q: 2.0)
    with pytest.raises(ConstructionNotVerifiedError):
        worst_case_number_1d(2, 1.0, 1e-2, 1.0)


def test_input_validation():
    with pytest.raises(DynsrError):
        worst_case_number_1d(1, 1.0, 1e-2, 1.0)
    with pytest.raises(DynsrError):
        worst_case_support(2, 1.0, 2.0, 1.0)


def test_minimax_weights():
    assert np.array_equal(finite_difference_weights(3), [1, -2, 1])
    nodes = 0.05 * np.array([0.0, 1.0, -1.0])
    mask = np.array([True, True, False])
    w, ratio = minimax_weights(nodes, mask, 1.0)
    assert np.min(np.abs(w[mask])) == pytest.approx(1.0)
    omegas = np.linspace(-1, 1, 4096)
    fd = np.array([-2.0, 1.0, 1.0])  # binomial weights arranged by node order (-d, 0, d)
    fd_ratio = np.max(np.abs(np.exp(1j * np.outer(omegas, nodes)) @ fd))
    assert ratio <= fd_ratio + 1e-12


def test_bruteforce_single_source():
    locs = 0.1 * np.arange(-3, 4)
    steps = 0.1 * np.arange(0, 5)
    truth = ParameterSet([1.5 - 0.5j], locs[[4]], steps[[2]])
    meas = synthesize(truth, interval_grid(1.0, 33), 4)
    out = sparsest_solution_bruteforce(meas, 1e-6, SearchSpec(locs, steps, k_max=2))
    assert out.k == 1
    assert np.allclose(out.witness.amplitudes, truth.amplitudes, atol=1e-10)
    assert out.witness.locations[0, 0] == locs[4] and out.witness.steps[0, 0] == steps[2]


def test_bruteforce_finds_poorer_witness(number_pair):
    pair = number_pair
    meas = synthesize(pair.rich, interval_grid(1.0, 257), 4)
    spec = SearchSpec(pair.delta * np.arange(-4, 5), [0.0], k_max=2)
    out = sparsest_solution_bruteforce(meas, 1e-2, spec)
    assert out.k == 1 and out.residual < 1e-2


def test_bruteforce_separated_pair_needs_two():
    T, sigma = 10, 1e-4
    rep = compute_bounds(1, 2, T, 1.0, sigma, 1.0)
    locs, steps = 0.05 * np.arange(-4, 5), 0.05 * np.arange(0, 13)
    sep = steps[10] - steps[0]
    assert sep >= rep.velocity_support_limit
    for seed in range(5):
        rng = np.random.default_rng(seed)
        truth = ParameterSet(np.exp(2j * np.pi * rng.random(2)), locs[[4, 6]], steps[[0, 10]])
        # noise strictly inside the disk of radius sigma
        meas = synthesize(truth, interval_grid(1.0, 33), T, sigma / 2, seed)
        out = sparsest_solution_bruteforce(meas, sigma, SearchSpec(locs, steps, k_max=2))
        assert out.k == 2
        err = match_errors(out.witness.steps, truth.steps).max()
        assert err <= rep.velocity_error_bound(sep)


def test_separated_sources_have_no_sparser_witness():
    T, sigma = 4, 1e-4
    limit = compute_bounds(1, 2, T, 1.0, sigma, 1.0).number_pair_limit
    locs = np.linspace(-2 * limit, 2 * limit, 64)
    for seed in range(50):
        rng = np.random.default_rng(seed)
        sep = limit * (1 + rng.random())
        x0 = rng.uniform(-0.5, 0.5)
        truth = ParameterSet(np.exp(2j * np.pi * rng.random(2)), [x0, x0 + sep], [0.0, 0.0])
        meas = synthesize(truth, interval_grid(1.0, 65), T, sigma, seed)
        out = sparsest_solution_bruteforce(meas, sigma, SearchSpec(locs, [-0.1, 0.0, 0.1], k_max=1))
        assert out.k is None


def test_search_spec_limits():
    with pytest.raises(DynsrError):
        SearchSpec(np.zeros(65), [0.0])
    with pytest.raises(DynsrError):
        SearchSpec([0.0], [0.0], k_max=4)
