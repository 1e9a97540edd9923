import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dynsr.bounds import (
    beta,
    compute_bounds,
    lam,
    number_pair_limit,
    support_pair_limit,
    velocity_error_constant,
    velocity_number_limit,
    velocity_support_limit,
    xi,
    zeta,
)
from dynsr.errors import DynsrError

E, PI = math.e, math.pi


def test_combinatorial_constants():
    assert (xi(0), xi(1), xi(3)) == (0, 1, Fraction(11, 6))
    assert [zeta(k) for k in (2, 3, 4, 5)] == [1, 1, 2, 4]
    assert (beta(1), beta(2), beta(3)) == (Fraction(1, 2), Fraction(1, 4), Fraction(1, 4))
    assert (lam(2), lam(3)) == (1, Fraction(1, 2))
    for bad in (lambda: xi(-1), lambda: zeta(0), lambda: beta(0), lambda: lam(1)):
        with pytest.raises(DynsrError):
            bad()


def test_reference_values():
    assert number_pair_limit(1, 2, 1.0, 1e-4) == pytest.approx(8.8 * E * PI**2 * math.sqrt(2) * 1e-2, rel=1e-12)
    assert number_pair_limit(1, 2, 1.0, 1e-4) == pytest.approx(3.339, abs=1e-3)
    assert velocity_number_limit(1, 2, 10, 1.0, 1e-4) == pytest.approx(8.8 * PI * E / 10 * 0.01, rel=1e-12)
    assert velocity_number_limit(1, 2, 10, 1.0, 1e-4) == pytest.approx(0.07514, abs=1e-5)


def test_higher_dimension_factors():
    d, n, q = 3, 3, 1e-6
    xi2 = 1.5
    num = 8.8 * E * PI**2 * math.sqrt(3**2 + 1) * (PI / 2) ** 2 * (6 / PI) ** xi2 * q ** 0.25
    assert number_pair_limit(d, n, 2.0, q) == pytest.approx(num / 2, rel=1e-12)
    sup = 11.76 * E * PI * 4**2 * 10**xi2 / (5 * 2.0) * q ** 0.2
    assert velocity_support_limit(d, n, 5, 2.0, q) == pytest.approx(sup, rel=1e-12)


def test_error_constant_matches_one_dimensional_form():
    for n in range(2, 7):
        assert velocity_error_constant(1, n) == pytest.approx(
            n * 2 ** (6 * n - 3) * E ** (2 * n) / math.sqrt(PI), rel=1e-12
        )


@given(st.integers(1, 4), st.integers(2, 6), st.floats(1e-10, 1e-2), st.floats(0.5, 5.0))
def test_exponent_recovery(d, n, q, omega):
    q2 = q / 7.0
    cases = [
        (lambda s: number_pair_limit(d, n, omega, s), 1 / (2 * n - 2)),
        (lambda s: velocity_number_limit(d, n, 8, omega, s), 1 / (2 * n - 2)),
        (lambda s: support_pair_limit(d, n, omega, s), 1 / (2 * n - 1)),
        (lambda s: velocity_support_limit(d, n, 8, omega, s), 1 / (2 * n - 1)),
    ]
    for f, expo in cases:
        assert f(q) > 0
        slope = math.log(f(q) / f(q2)) / math.log(q / q2)
        assert slope == pytest.approx(expo, abs=1e-10)


@given(st.integers(1, 3), st.integers(2, 5), st.integers(2, 40))
def test_time_homogeneity(d, n, T):
    full = compute_bounds(d, n, 2 * T, 1.0, 1e-4, 1.0)
    half = compute_bounds(d, n, T, 1.0, 1e-4, 1.0)
    assert half.velocity_number_limit == 2 * full.velocity_number_limit
    assert half.velocity_support_limit == 2 * full.velocity_support_limit
    assert half.number_pair_limit == full.number_pair_limit


def test_report_and_floors():
    rep = compute_bounds(1, 2, 10, 1.0, 1e-4, 1.0)
    assert rep.q == 1e-4 and rep.inapplicable == ()
    names = [r[0] for r in rep.as_rows()]
    assert names[:4] == ["number_pair_limit", "support_pair_limit", "velocity_number_limit", "velocity_support_limit"]
    low = compute_bounds(1, 4, 3, 1.0, 1e-4, 1.0)
    assert "support_pair_limit" in low.inapplicable and "velocity_support_limit" in low.inapplicable
    assert rep.velocity_error_bound(0.5) == pytest.approx(
        rep.velocity_error_constant / 10 * (PI / 5) ** 2 * 1e-4, rel=1e-12
    )
    for bad in ((0, 2, 4), (1, 1, 4), (1, 2, 0)):
        with pytest.raises(DynsrError):
            compute_bounds(*bad, 1.0, 1e-3, 1.0)
    with pytest.raises(DynsrError):
        compute_bounds(1, 2, 4, 1.0, -1.0, 1.0)
