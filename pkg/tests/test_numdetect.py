import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dynsr.bounds import svt_guarantee_1d
from dynsr.errors import DynsrError, SeriesTooShortError
from dynsr.model import ParameterSet, TimeSeries, disk_noise, sample_along_direction, unit_vector
from dynsr.numdetect import (
    build_hankel,
    detect_number_2d,
    detect_number_svt,
    detect_number_sweep,
    directional_series,
    hankel_stride,
    number_directions,
    sweep_angles,
)

SEC4_3 = ParameterSet([4.0, 4.0], [[0.0, 0.27], [0.20, 0.17]], [[0.14, 0.51], [0.45, 0.17]], tau=0.2)


def line_series(steps, amps, T, omega=1.0):
    """Clean samples ``sum_j a_j e^{i w t x_j}``."""
    t = np.arange(T + 1)
    return (np.exp(1j * omega * np.outer(t, steps)) @ np.asarray(amps, dtype=complex))


def test_constant_series():
    H = build_hankel(np.ones(5), 2)
    assert np.array_equal(H.entries, np.ones((3, 3)))
    assert np.allclose(H.singular_values(), [3, 0, 0], atol=1e-14)
    assert H.numerical_rank() == 1


def test_quarter_turn_rows():
    ser = np.exp(1j * math.pi / 2 * np.arange(5))
    H = build_hankel(ser, 2)
    assert H.stride == 1
    for p in range(3):
        assert np.allclose(H.entries[p], 1j**p * np.array([1, 1j, -1]), atol=1e-15)
    assert H.numerical_rank() == 1


def test_stride_and_remainder():
    # T + 1 = 2 s r + g with 0 <= g: T = 7, s = 2 -> r = 1, eight samples, g = 4
    H = build_hankel(np.arange(8), 2)
    assert H.stride == hankel_stride(7, 2) == 1 and H.remainder == 4
    H = build_hankel(np.arange(9), 2)  # T = 8 -> r = 2 uses samples 0, 2, ..., 8
    assert H.stride == 2 and H.entries[2, 2] == 8 and H.remainder == 1
    # (T + 1) divisible by 2s: the quotient of T + 1 would index past the end
    assert hankel_stride(3, 1) == 1
    with pytest.raises(SeriesTooShortError):
        build_hankel(np.ones(4), 2)


def test_projected_sec4_3_rank_two():
    ser = directional_series(SEC4_3, math.pi / 3, omega_max=1.0, T=4)
    sv = build_hankel(ser, 2).singular_values()
    assert sv[1] > 1e-6 * sv[0] and sv[2] <= 1e-10 * sv[0]


@given(
    st.lists(st.floats(-1.5, 1.5), min_size=1, max_size=3, unique=True),
    st.integers(0, 6),
    st.integers(1, 3),
)
def test_hankel_structure(steps, extra, s):
    T = 2 * s + extra
    ser = line_series(steps, np.ones(len(steps)), T)
    H = build_hankel(ser, s)
    r = H.stride
    for p in range(s + 1):
        for q in range(s + 1):
            assert H.entries[p, q] == ser[(p + q) * r]


def test_svt_examples():
    one = line_series([0.4], [2.0], 6)
    for s in (1, 2, 3):
        assert detect_number_svt(one, s, 1e-6) == 1
    assert detect_number_svt(np.zeros(7), 2, 1e-3) == 0
    two = line_series([0.2, 1.1], [1, 1], 5)
    assert max(detect_number_svt(two, s, 1e-6) for s in (1, 2)) == 2 == detect_number_sweep(two, 1e-6)
    with pytest.raises(SeriesTooShortError):
        detect_number_sweep(np.ones(3), 1e-3)
    with pytest.raises(DynsrError):
        detect_number_svt(one, 1, 0.0)


def test_pure_noise_counts_zero():
    hits = sum(detect_number_sweep(disk_noise(seed, np.array([1.0]), 9, 0.1), 0.1) for seed in range(200))
    assert hits == 0


def test_threshold_soundness_at_guaranteed_separation():
    # two unit sources at the separation the thresholding guarantee asks for
    n, s, T, sigma = 2, 2, 4, 1e-4
    sep = svt_guarantee_1d(n, s, T, 1.0, sigma)
    hits = 0
    for seed in range(200):
        rng = np.random.default_rng(seed)
        x0 = rng.uniform(-0.3, 0.3)
        series = line_series([x0, x0 + 1.05 * sep], np.exp(2j * np.pi * rng.random(2)), T)
        noisy = series + disk_noise(seed, np.array([1.0]), T + 1, sigma)
        sv = build_hankel(noisy, s).singular_values()
        assert sv[n] <= (s + 1) * sigma
        hits += detect_number_svt(noisy, s, sigma) == n
    assert hits == 200


@given(st.integers(0, 10_000), st.floats(1e-5, 1e-1), st.floats(1.0, 100.0))
def test_sweep_monotone_in_sigma(seed, sigma, factor):
    rng = np.random.default_rng(seed)
    ser = line_series(rng.uniform(-1, 1, 2), [1, 1], 8) + disk_noise(seed, np.array([1.0]), 9, sigma)
    assert detect_number_sweep(ser, sigma / factor) >= detect_number_sweep(ser, sigma)


@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.floats(1e-3, 1e-1))
def test_weyl_perturbation(seed, s, sigma):
    rng = np.random.default_rng(seed)
    T = 2 * s + int(rng.integers(0, 5))
    ser = line_series(rng.uniform(-2, 2, 3), rng.normal(size=3) + 1j * rng.normal(size=3), T)
    noisy = ser + disk_noise(seed, np.array([0.5]), T + 1, sigma)
    shift = np.abs(build_hankel(noisy, s).singular_values() - build_hankel(ser, s).singular_values())
    assert np.all(shift <= (s + 1) * sigma)


def test_number_directions():
    dirs = number_directions(2)
    assert len(dirs) == 3
    assert np.allclose(dirs, [unit_vector(math.pi / 3), unit_vector(2 * math.pi / 3), unit_vector(math.pi)])
    dirs3 = number_directions(3)
    assert len(dirs3) == 6
    assert np.allclose(dirs3, [unit_vector(q * math.pi / 6) for q in range(1, 7)])
    for n in (2, 3, 4):
        d = number_directions(n)
        for i in range(len(d)):
            for j in range(len(d)):
                ang = abs(math.atan2(d[i][0] * d[j][1] - d[i][1] * d[j][0], d[i] @ d[j]))
                assert ang == pytest.approx(abs(i - j) * 2 * math.pi / (n * (n + 1)), abs=1e-9)
    assert np.allclose(sweep_angles(4), [math.pi / 4, math.pi / 2, 3 * math.pi / 4, math.pi])


def test_direction_existence():
    rng = np.random.default_rng(0)
    n = 2
    dirs = np.array(number_directions(n))
    for _ in range(100):
        v = rng.uniform(-1, 1, (n, 2))
        d_min = np.linalg.norm(v[0] - v[1])
        best = np.max(np.abs(dirs @ (v[0] - v[1])))
        assert best >= 2 * d_min / (n * (n + 1)) - 1e-12


def test_detect_number_2d_examples():
    assert detect_number_2d(SEC4_3, 1e-2, 6, omega_max=1.0, T=4, noise=1e-2, seed=1) == 2
    static = ParameterSet([1.0], [[0.1, 0.2]], [[0.0, 0.0]])
    for N in (1, 3, 6):
        assert detect_number_2d(static, 1e-3, N, omega_max=1.0, T=4) == 1


def test_collision_on_all_but_one_direction():
    # equal locations; velocity difference orthogonal to v(pi/2) so that direction sees one source
    ps = ParameterSet([1.0, 1.0], [[0.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.6, 0.0]])
    collided = directional_series(ps, math.pi / 2, omega_max=1.0, T=6)
    assert detect_number_sweep(collided, 1e-6) == 1
    spectra = []
    assert detect_number_2d(ps, 1e-6, 2, omega_max=1.0, T=6, spectra=spectra) == 2
    assert {phi for phi, _, _ in spectra} == {math.pi / 2, math.pi}


def test_sampling_needs_geometry():
    with pytest.raises(DynsrError):
        directional_series(SEC4_3, 0.3)
    with pytest.raises(DynsrError):
        directional_series(ParameterSet([1.0], [0.0], [0.0]), 0.3, omega_max=1.0, T=4)
    ser = sample_along_direction(SEC4_3, unit_vector(0.3), 1.0, 4)
    assert isinstance(ser, TimeSeries)
