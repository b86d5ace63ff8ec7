"""Closed-form kernels: Gaussian moments, a factorial-ratio inequality,
sphere areas and the l1 bound for the transport product ``u * d(rho)/dx_k``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .spectral_core import FourierField, TorusGeometry, norm_I, norm_Ibar

TABLE_SIZE = 128


class DoubleFactorialTable:
    """Cached ``k!`` and ``k!!`` for ``0 <= k <= 128`` as Python integers.

    ``(-1)!!`` follows the empty-product convention (1) unless overridden;
    the override exists only so fault-injection runs can corrupt it.
    """

    def __init__(self, minus_one: int = 1, size: int = TABLE_SIZE):
        self.minus_one = int(minus_one)
        self._fact = [1] * (size + 1)
        self._dfact = [1] * (size + 1)
        for k in range(1, size + 1):
            self._fact[k] = self._fact[k - 1] * k
            self._dfact[k] = k * (self._dfact[k - 2] if k >= 2 else 1)

    def factorial(self, k: int) -> int:
        if k < 0:
            raise ValueError("factorial of a negative integer")
        return self._fact[k] if k < len(self._fact) else math.factorial(k)

    def double_factorial(self, k: int) -> int:
        if k == -1:
            return self.minus_one
        if k < -1:
            raise ValueError("double factorial below -1")
        if k < len(self._dfact):
            return self._dfact[k]
        return math.prod(range(k, 0, -2))


DEFAULT_TABLE = DoubleFactorialTable()


def _positive(b: float) -> float:
    b = float(b)
    if not b > 0:
        raise ValueError(f"rate must be positive, got {b}")
    return b


def gaussian_moment_even(k: int, b: float, table: DoubleFactorialTable = DEFAULT_TABLE) -> float:
    """``int_0^inf r^(2k) exp(-b r^2) dr = (2k-1)!! sqrt(pi) / (2^(k+1) b^(k+1/2))``."""
    b = _positive(b)
    if k < 0:
        raise ValueError("k must be nonnegative")
    return table.double_factorial(2 * k - 1) * math.sqrt(math.pi) / (2.0 ** (k + 1) * b ** (k + 0.5))


def gaussian_moment_odd(k: int, b: float, table: DoubleFactorialTable = DEFAULT_TABLE) -> float:
    """``int_0^inf r^(2k+1) exp(-b r^2) dr = (2k)!! / (2^(k+1) b^(k+1))``."""
    b = _positive(b)
    if k < 0:
        raise ValueError("k must be nonnegative")
    return table.double_factorial(2 * k) / (2.0 ** (k + 1) * b ** (k + 1))


def gaussian_moment_1d(p: int, b: float, table: DoubleFactorialTable = DEFAULT_TABLE) -> float:
    """``int_0^inf x^p exp(-b x^2) dx`` for any integer ``p >= 0``."""
    return gaussian_moment_even(p // 2, b, table) if p % 2 == 0 else gaussian_moment_odd(p // 2, b, table)


def gaussian_moment_multi(alpha: Sequence[int], b: float,
                          table: DoubleFactorialTable = DEFAULT_TABLE) -> tuple[float, float]:
    """Orthant moment ``int_{R_+^n} x^alpha exp(-b|x|^2) dx``.

    Returns ``(exact, bound)``: the product of per-axis closed forms and the
    coarser bound ``(alpha - 1)!! pi^(n/2) / (2b)^((|alpha|+n)/2)``.
    """
    alpha = [int(a) for a in alpha]
    if any(a < 0 for a in alpha):
        raise ValueError("multi-index entries must be nonnegative")
    b = _positive(b)
    n = len(alpha)
    exact = math.prod(gaussian_moment_1d(a, b, table) for a in alpha)
    dfact = math.prod(table.double_factorial(a - 1) for a in alpha)
    bound = dfact * math.pi ** (n / 2) / (2.0 * b) ** ((sum(alpha) + n) / 2)
    return exact, bound


@dataclass(frozen=True)
class RatioCheck:
    ratio: Fraction
    holds: bool


def _factorial_ratio_parts(a1, a2, beta, gamma, axis, table):
    n = len(beta)
    if not all(len(v) == n for v in (a1, a2, gamma)):
        raise ValueError("multi-indices must share one dimension")
    if not 0 <= axis < n:
        raise IndexError(f"axis {axis} out of range for n={n}")
    gk = list(gamma)
    gk[axis] += 1
    if any(v < 0 for v in (*a1, *a2, *beta, *gamma)):
        raise ValueError("multi-indices must be nonnegative")
    top = [x - y for x, y in zip(beta, a1)]
    bot = [x - y for x, y in zip(gk, a2)]
    if any(v < 0 for v in top + bot):
        raise ValueError("beta - alpha1 and gamma + e_k - alpha2 must be nonnegative")
    f = table.factorial
    num = den = 1
    for i in range(n):
        num *= f(beta[i]) * f(gk[i]) * f(2 * top[i]) * f(2 * bot[i])
        den *= f(top[i]) * f(bot[i]) * f(2 * beta[i]) * f(2 * gamma[i])
    den <<= sum(top) + sum(bot)
    return num, den


def factorial_ratio(alpha1: Sequence[int], alpha2: Sequence[int], beta: Sequence[int],
                    gamma: Sequence[int], axis: int, table: DoubleFactorialTable = DEFAULT_TABLE) -> RatioCheck:
    """Exact ratio

    ``L = beta! (gamma+e_k)! [2(beta-alpha1)]! [2(gamma+e_k-alpha2)]!
    / (2^|beta+gamma+e_k-alpha1-alpha2| (beta-alpha1)! (gamma+e_k-alpha2)! (2beta)! (2gamma)!)``

    together with the verdict ``L <= 1``.  ``axis`` is 0-based.
    """
    num, den = _factorial_ratio_parts(list(alpha1), list(alpha2), list(beta), list(gamma), axis, table)
    return RatioCheck(Fraction(num, den), num <= den)


@dataclass(frozen=True)
class RatioSweep:
    checked: int
    violations: int
    worst_ratio: Fraction
    worst_case: tuple | None


def factorial_ratio_sweep(n_max: int = 2, entry_max: int = 4,
                          table: DoubleFactorialTable = DEFAULT_TABLE) -> RatioSweep:
    """Enumerate every admissible ``(alpha1, alpha2, beta, gamma, k)`` with
    ``n <= n_max`` and all entries in ``[0, entry_max]``."""
    from itertools import product

    checked = violations = 0
    worst, worst_case = Fraction(0), None
    for n in range(1, n_max + 1):
        box = list(product(range(entry_max + 1), repeat=n))
        for axis in range(n):
            for beta in box:
                for gamma in box:
                    gk = list(gamma)
                    gk[axis] += 1
                    a1s = [a for a in box if all(x <= y for x, y in zip(a, beta))]
                    a2s = [a for a in box if all(x <= y for x, y in zip(a, gk))]
                    for a1 in a1s:
                        for a2 in a2s:
                            num, den = _factorial_ratio_parts(a1, a2, beta, gamma, axis, table)
                            checked += 1
                            if num > den:
                                violations += 1
                            if num * worst.denominator > worst.numerator * den:
                                worst = Fraction(num, den)
                                worst_case = (a1, a2, beta, gamma, axis)
    return RatioSweep(checked, violations, worst, worst_case)


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere in ``R^n``: ``pi^(n/2) n / Gamma(n/2 + 1)``."""
    if int(n) != n or n < 1:
        raise ValueError("dimension must be an integer >= 1")
    return math.pi ** (n / 2) * n / math.gamma(n / 2 + 1)


def transport_l1_bound(phi: FourierField, eta: FourierField, h: FourierField, g: FourierField,
                       axis: int, kappa: float, geometry: TorusGeometry | None = None, tails=(None, None)) -> float:
    """Bound ``l_k / (2 pi kappa) [Ibar(phi) + I(h)] [Ibar(eta) + I(g)]`` on ``I(u * d(rho)/dx_k)``.

    Here ``u`` is the heat flow of ``phi`` forced by ``h`` (any positive
    viscosity) and ``rho`` the heat flow of ``eta`` forced by ``g`` with
    diffusivity ``kappa``.  ``tails`` optionally carries class parameters for
    the envelope tails of ``h`` and ``g``.
    """
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    geometry = geometry or phi.geometry
    if not 0 <= axis < geometry.n:
        raise IndexError(f"axis {axis} out of range")
    lk = geometry.periods[axis]
    left = norm_Ibar(phi) + norm_I(h, tails[0])
    right = norm_Ibar(eta) + norm_I(g, tails[1])
    return float(lk / (2.0 * np.pi * kappa) * left * right)
