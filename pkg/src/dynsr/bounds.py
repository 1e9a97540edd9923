"""Closed-form resolution limits and the combinatorial constants behind them.

All limits take the noise-to-signal ratio ``q = sigma / m_min`` and grow like
``q ** (1 / (2n - 2))`` (number recovery) or ``q ** (1 / (2n - 1))`` (support
recovery).  Each one is only a guarantee under a minimum frame count; fields
whose floor is not met are listed in ``BoundReport.inapplicable``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from fractions import Fraction

from .errors import DynsrError


def xi(k: int) -> Fraction:
    """Harmonic number ``1 + 1/2 + ... + 1/k``; zero for ``k = 0``."""
    if k < 0:
        raise DynsrError("xi(k) needs k >= 0")
    return sum((Fraction(1, j) for j in range(1, k + 1)), Fraction(0))


def zeta(k: int) -> Fraction:
    if k < 1:
        raise DynsrError("zeta(k) needs k >= 1")
    if k % 2:
        return Fraction(math.factorial((k - 1) // 2) ** 2)
    return Fraction(math.factorial(k // 2) * math.factorial((k - 2) // 2))


def beta(k: int) -> Fraction:
    if k < 1:
        raise DynsrError("beta(k) needs k >= 1")
    if k == 1:
        return Fraction(1, 2)
    if k % 2:
        return Fraction(math.factorial((k - 1) // 2) * math.factorial((k - 3) // 2), 4)
    return Fraction(math.factorial((k - 2) // 2) ** 2, 4)


def lam(k: int) -> Fraction:
    if k < 2:
        raise DynsrError("lambda(k) needs k >= 2")
    return Fraction(1) if k == 2 else beta(k - 2)


def _dimension_factor_number(d: int, n: int) -> float:
    return (math.pi / 2) ** (d - 1) * (n * (n - 1) / math.pi) ** float(xi(d - 1))


def _dimension_factor_support(d: int, n: int) -> float:
    return 4 ** (d - 1) * ((n + 2) * (n + 1) / 2) ** float(xi(d - 1))


def number_pair_limit(d, n, omega, q):
    """Pair separation above which no admissible set has fewer than ``n`` entries."""
    root = math.sqrt((n * (n - 1) / 2) ** 2 + 1)
    return 8.8 * math.e * math.pi**2 * root * _dimension_factor_number(d, n) / omega * q ** (1 / (2 * n - 2))


def support_pair_limit(d, n, omega, q):
    """Pair separation above which admissible ``n``-sparse sets are close to the truth."""
    root = math.sqrt((n * (n + 1) / 2) ** 2 + 1)
    return 11.76 * math.e * math.pi**2 * root * _dimension_factor_support(d, n) / omega * q ** (1 / (2 * n - 1))


def velocity_number_limit(d, n, T, omega, q):
    return 8.8 * math.pi * math.e * _dimension_factor_number(d, n) / (T * omega) * q ** (1 / (2 * n - 2))


def velocity_support_limit(d, n, T, omega, q):
    return 11.76 * math.e * math.pi * _dimension_factor_support(d, n) / (T * omega) * q ** (1 / (2 * n - 1))


def support_error_constant(d: int, n: int) -> float:
    """Constant multiplying ``SRF^(2n-2) q / omega`` in the pair error bound."""
    return (
        math.sqrt(6 * math.pi)
        * (2 * math.pi) ** (2 * n - 2)
        * ((n * (n + 1) / 2) ** 2 + 1) ** ((2 * n - 1) / 2)
        * _dimension_factor_support(d, n) ** (2 * n - 1)
        * n
        * 2 ** (4 * n - 2)
        * math.e ** (2 * n)
        / math.sqrt(math.pi)
    )


def velocity_error_constant(d: int, n: int) -> float:
    """Constant multiplying ``SRF^(2n-2) q / (T omega)`` in the velocity error bound."""
    return _dimension_factor_support(d, n) ** (2 * n - 1) * n * 2 ** (6 * n - 3) * math.e ** (2 * n) / math.sqrt(math.pi)


def svt_guarantee_1d(n, s, T, omega, q):
    """Projected separation guaranteeing the thresholding detector finds ``n``."""
    inner = 2 * n * (s + 1) / float(zeta(n)) ** 2 * q
    return 2 * math.pi * (s + 1) / (T * omega) * inner ** (1 / (2 * n - 2))


def svt_guarantee_2d(n, s, T, omega, q):
    """Velocity separation guaranteeing the 2-D direction sweep finds ``n``."""
    inner = n * (s + 1) / float(zeta(n)) ** 2 * q
    return math.pi * (s + 1) * n * (n + 1) / (2 * T * omega) * inner ** (1 / (2 * n - 2))


@dataclass(frozen=True)
class BoundReport:
    d: int
    n: int
    T: int
    omega: float
    sigma: float
    m_min: float
    s: int
    number_pair_limit: float
    support_pair_limit: float
    velocity_number_limit: float
    velocity_support_limit: float
    support_error_constant: float
    velocity_error_constant: float
    svt_guarantee_1d: float
    svt_guarantee_2d: float
    inapplicable: tuple[str, ...] = ()

    @property
    def q(self) -> float:
        return self.sigma / self.m_min

    def as_rows(self) -> list[tuple[str, float, bool]]:
        """``(name, value, applicable)`` for every evaluated quantity."""
        skip = {"d", "n", "T", "omega", "sigma", "m_min", "s", "inapplicable"}
        return [
            (f.name, getattr(self, f.name), f.name not in self.inapplicable)
            for f in fields(self)
            if f.name not in skip
        ]

    def support_error_bound(self, d_min: float) -> float:
        srf = math.pi / (d_min * self.omega)
        return self.support_error_constant / self.omega * srf ** (2 * self.n - 2) * self.q

    def velocity_error_bound(self, d_min: float) -> float:
        srf = math.pi / (d_min * self.T * self.omega)
        return self.velocity_error_constant / (self.T * self.omega) * srf ** (2 * self.n - 2) * self.q


def compute_bounds(d: int, n: int, T: int, omega: float, sigma: float, m_min: float, s: int | None = None) -> BoundReport:
    """Evaluate every limit at ``(d, n, T, omega, sigma / m_min)``.

    ``s`` is the Hankel order used by the thresholding guarantees; default ``n``.
    """
    if d < 1:
        raise DynsrError("d must be at least 1")
    if n < 2:
        raise DynsrError("bounds are stated for n >= 2")
    if T < 1:
        raise DynsrError("T must be at least 1")
    for name, val in (("omega", omega), ("sigma", sigma), ("m_min", m_min)):
        if not val > 0:
            raise DynsrError(f"{name} must be positive")
    s = n if s is None else int(s)
    if s < 1:
        raise DynsrError("s must be at least 1")
    q = sigma / m_min
    floors = {
        "number_pair_limit": T >= n * (n - 1) / 2,
        "support_pair_limit": T >= n * (n + 1) / 2,
        "support_error_constant": T >= n * (n + 1) / 2,
        "velocity_number_limit": T >= 2 * n - 2,
        "velocity_support_limit": T >= 2 * n - 1,
        "velocity_error_constant": T >= 2 * n - 1,
        "svt_guarantee_1d": s >= n and 2 * s + 1 <= T + 1,
        "svt_guarantee_2d": s >= n and 2 * s + 1 <= T + 1,
    }
    return BoundReport(
        d=d,
        n=n,
        T=T,
        omega=float(omega),
        sigma=float(sigma),
        m_min=float(m_min),
        s=s,
        number_pair_limit=number_pair_limit(d, n, omega, q),
        support_pair_limit=support_pair_limit(d, n, omega, q),
        velocity_number_limit=velocity_number_limit(d, n, T, omega, q),
        velocity_support_limit=velocity_support_limit(d, n, T, omega, q),
        support_error_constant=support_error_constant(d, n),
        velocity_error_constant=velocity_error_constant(d, n),
        svt_guarantee_1d=svt_guarantee_1d(n, s, T, omega, q),
        svt_guarantee_2d=svt_guarantee_2d(n, s, T, omega, q),
        inapplicable=tuple(k for k, ok in floors.items() if not ok),
    )
