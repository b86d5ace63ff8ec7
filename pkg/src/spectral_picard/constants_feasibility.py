"""Constants and smallness conditions for the whole-space Boussinesq and
Navier-Stokes existence results, plus a deterministic feasibility sweep.

Every function here accepts scalars or broadcastable numpy arrays for
``C`` and ``D`` so that the sweep can evaluate a whole grid at once.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from itertools import product
from typing import Mapping, Sequence

import numpy as np

from .analysis_kernels import gaussian_moment_1d, sphere_area
from .propagators import PhysicsParams

MIN_DIMENSION_COUPLED = 9
MIN_DIMENSION_NS = 5


@dataclass(frozen=True)
class DataConstants:
    """Weighted integrals ``C_{x,j}`` of Fourier transforms and weighted
    suprema ``D_{x,j}`` of the data fields ``phi`` (initial velocity),
    ``eta`` (initial density), ``f`` and ``g`` (forcings)."""

    C_phi0: float = 0.0
    C_phi1: float = 0.0
    C_eta0: float = 0.0
    C_eta1: float = 0.0
    C_f0: float = 0.0
    C_g0: float = 0.0
    D_phi0: float = 0.0
    D_phi1: float = 0.0
    D_eta0: float = 0.0
    D_eta1: float = 0.0
    D_f0: float = 0.0
    D_g0: float = 0.0

    def __post_init__(self):
        for k, v in asdict(self).items():
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"data constant {k} must be finite and nonnegative, got {v}")

    @classmethod
    def uniform(cls, value: float) -> "DataConstants":
        return cls(**{k: value for k in cls.__dataclass_fields__})

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class GaussianExpansion:
    """Finite surrogate ``sum_beta a_beta exp(-b|w|^2) w^beta`` described by
    coefficient magnitudes ``|a_beta|`` for nonnegative multi-indices."""

    b: float
    terms: Mapping[tuple[int, ...], float]
    n: int

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError("Gaussian rate must be positive")
        terms = {tuple(int(v) for v in k): float(a) for k, a in dict(self.terms).items()}
        for beta, a in terms.items():
            if len(beta) != self.n or min(beta, default=0) < 0:
                raise ValueError(f"multi-index {beta} must have {self.n} nonnegative entries")
            if not (math.isfinite(a) and a >= 0):
                raise ValueError("coefficient bounds must be finite and nonnegative")
        object.__setattr__(self, "terms", terms)

    def fits_class(self, r: float, d: float) -> bool:
        """Whether every ``|a_beta| <= d r^|beta| / (2 beta)!``."""
        return all(a <= d * r ** sum(beta) / math.prod(math.factorial(2 * v) for v in beta) * (1 + 1e-12)
                   for beta, a in self.terms.items())


def _weighted_peak(beta: Sequence[int], j: int, b: float) -> float:
    """``max_w |w|^j |w^beta| exp(-b|w|^2)``.

    On the sphere of radius ``R`` the monomial peaks at ``R^|beta| prod (beta_k/|beta|)^(beta_k/2)``;
    the remaining radial profile ``R^(|beta|+j) exp(-b R^2)`` peaks at ``R^2 = (|beta|+j)/(2b)``.
    """
    s = sum(beta)
    angular = math.prod((v / s) ** (v / 2) for v in beta if v) if s else 1.0
    p = s + j
    radial = (p / (2 * b * math.e)) ** (p / 2) if p else 1.0
    return angular * radial


def _weighted_integral(beta: Sequence[int], j: int, b: float) -> float:
    """Upper bound for ``int_{R^n} |w|^j |w^beta| exp(-b|w|^2) dw``.

    ``j = 0`` is exact.  For ``j = 1`` uses ``|w| <= sum_k |w_k|``.
    """
    n = len(beta)

    def orthants(alpha):
        return 2 ** n * math.prod(gaussian_moment_1d(a, b) for a in alpha)

    if j == 0:
        return orthants(beta)
    total = 0.0
    for k in range(n):
        bumped = list(beta)
        bumped[k] += 1
        total += orthants(bumped)
    return total


def data_constants(expansion: GaussianExpansion, j: int) -> tuple[float, float]:
    """Upper bounds ``(C, D)`` on ``int |w|^j |x^(w)| dw`` and ``sup |w|^j |x^(w)|``.

    Each term is bounded separately, so both results dominate the exact values.
    """
    if j not in (0, 1):
        raise ValueError("weight exponent j must be 0 or 1")
    C = sum(a * _weighted_integral(beta, j, expansion.b) for beta, a in expansion.terms.items())
    D = sum(a * _weighted_peak(beta, j, expansion.b) for beta, a in expansion.terms.items())
    return float(C), float(D)


@dataclass(frozen=True)
class CoupledConstants:
    M0: np.ndarray | float
    M1: np.ndarray | float
    Mprime: np.ndarray | float
    M: np.ndarray | float
    N1: np.ndarray | float
    N2: np.ndarray | float
    N: np.ndarray | float

    def to_dict(self) -> dict:
        return {k: float(v) for k, v in asdict(self).items()}


def _check_positive(C, D):
    if np.any(np.asarray(C) <= 0) or np.any(np.asarray(D) <= 0):
        raise ValueError("C and D must be positive")


def _aggregates(C, D, data: DataConstants, B: float, n: int):
    X = D + data.D_f0 + n * B * data.D_eta0
    Y = C + data.C_f0 + n * B * data.C_eta0
    Zd = D + data.D_g0
    Zc = C + data.C_g0
    return X, Y, Zd, Zc


def velocity_factor(j: int, C, D, data: DataConstants, nu: float, kappa: float, B: float, n: int):
    """``M_j(C, D)`` for ``j in {0, 1}``."""
    S = sphere_area(n)
    X, Y, Zd, Zc = _aggregates(C, D, data, B, n)
    C_phi = data.C_phi1 if j else data.C_phi0
    return (C_phi
            + (n + 1) * X * S / (nu * (n - 2 + j))
            + n * (n + 1) * B * Zd * S / (kappa * nu * (n - 4 + j))
            + n * (n + 1) * Y / nu
            + n * (n + 1) * B * Zc / (kappa * nu))


def density_factor(C, D, data: DataConstants, kappa: float, n: int):
    """``M'(C, D)``."""
    S = sphere_area(n)
    return data.C_eta1 + (data.D_g0 + D) * S / (kappa * (n - 1)) + (data.C_g0 + C) / kappa


def sup_bound_density(C, D, data: DataConstants, nu: float, kappa: float, B: float, n: int):
    """``N_1(C, D)``; ``D_eta1`` multiplies the whole bracket."""
    S = sphere_area(n)
    X, Y, Zd, Zc = _aggregates(C, D, data, B, n)
    g = lambda m: Zd * S / (m) + Zc  # noqa: E731
    inner = (data.C_phi0
             + (n + 1) * X * S / ((n - 2) * nu)
             + (n + 1) * Y / nu
             + (n + 1) * n * B / (nu * kappa) * g(n - 4)
             + data.C_phi0 / kappa * g(n - 1)
             + (n + 1) / (kappa * nu) * np.cbrt(X) * np.cbrt(g(n - 3))
             * (X * S / (n - 3) + Y) ** (2 / 3) * Zd ** (2 / 3)
             + n * (n + 1) * B / (kappa ** 2 * nu) * Zd * g(n - 5))
    return data.D_eta1 * inner


def sup_bound_velocity(C, D, data: DataConstants, nu: float, kappa: float, B: float, n: int):
    """``N_2(C, D)``; the bracketed Hoelder factors are read as products."""
    S = sphere_area(n)
    X, Y, Zd, Zc = _aggregates(C, D, data, B, n)
    gX = lambda m: X * S / m + Y  # noqa: E731
    gZ = lambda m: Zd * S / m + Zc  # noqa: E731
    a = n * B / (nu * kappa)
    mixed = n * (n + 1) ** 2 * B / (nu ** 2 * kappa)
    return (data.D_phi1 * data.C_phi0
            + (n + 1) * data.D_phi0 * (X * S / (nu * (n - 1)) + Y / nu + a * gZ(n - 3))
            + (n + 1) * data.D_phi1 * (X * S / (nu * (n - 2)) + Y / nu + a * gZ(n - 4))
            + mixed * X ** 0.6 * Zd ** 0.4 * gX(n - 5) ** 0.4 * gZ(n - 5) ** 0.6
            + mixed * X ** 0.8 * Zd ** 0.2 * gX(n - 5) ** 0.2 * gZ(n - 5) ** 0.8
            + n ** 2 * (n + 1) ** 2 * B ** 2 / (nu ** 2 * kappa ** 2) * Zd * gZ(n - 7)
            + (n + 1) ** 2 / nu ** 2 * gX(n - 3) * X)


def coupled_constants(C, D, data: DataConstants, physics: PhysicsParams, n: int) -> CoupledConstants:
    """All constants of the coupled velocity-density existence condition at ``(C, D)``."""
    if n < MIN_DIMENSION_COUPLED:
        raise ValueError(f"coupled constants need n >= {MIN_DIMENSION_COUPLED}, got n={n}")
    _check_positive(C, D)
    nu, kappa, B = physics.nu, physics.kappa, physics.B
    M0 = velocity_factor(0, C, D, data, nu, kappa, B, n)
    M1 = velocity_factor(1, C, D, data, nu, kappa, B, n)
    Mp = density_factor(C, D, data, kappa, n)
    N1 = sup_bound_density(C, D, data, nu, kappa, B, n)
    N2 = sup_bound_velocity(C, D, data, nu, kappa, B, n)
    scale = n * (2 * math.pi) ** (-n)
    return CoupledConstants(M0, M1, Mp, scale * M0 * np.maximum(M1, Mp), N1, N2, scale * np.maximum(N1, N2))


def coupled_margin(C, D, data: DataConstants, physics: PhysicsParams, n: int):
    """``min(C / M, D / N)``; values above 1 satisfy both strict inequalities."""
    k = coupled_constants(C, D, data, physics, n)
    with np.errstate(divide="ignore"):
        return np.minimum(np.where(k.M > 0, C / k.M, np.inf), np.where(k.N > 0, D / k.N, np.inf))


@dataclass(frozen=True)
class FeasibilityResult:
    """Best ``(C, D)`` found; ``feasible`` when its margin exceeds 1."""

    feasible: bool
    C: float
    D: float
    margin: float
    constants: dict = field(default_factory=dict)
    evaluated: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def feasibility_search(data: DataConstants, physics: PhysicsParams, n: int, decades=(-8.0, 8.0),
                       points_per_decade: int = 33, refine_steps: int = 20) -> FeasibilityResult:
    """Deterministic log-grid sweep over ``(C, D)`` followed by local refinement.

    The sweep keeps the first (lexicographically smallest ``(C, D)``) grid
    point of maximal margin.  Refinement then halves a log-space step around
    the incumbent ``refine_steps`` times, moving to the best of its 3x3
    neighbours whenever that strictly improves the margin.
    """
    if n < MIN_DIMENSION_COUPLED:
        raise ValueError(f"coupled feasibility needs n >= {MIN_DIMENSION_COUPLED}, got n={n}")
    lo, hi = decades
    count = int(round((hi - lo) * points_per_decade)) + 1
    axis = np.logspace(lo, hi, count)
    Cg, Dg = np.meshgrid(axis, axis, indexing="ij")
    margin = coupled_margin(Cg, Dg, data, physics, n)
    best = int(np.argmax(margin))  # first occurrence in C-major order
    i, j = np.unravel_index(best, margin.shape)
    logc, logd = math.log10(axis[i]), math.log10(axis[j])
    best_margin = float(margin[i, j])
    evaluated = margin.size
    step = 1.0 / points_per_decade
    for _ in range(refine_steps):
        step /= 2
        cand = [(logc + a * step, logd + b * step) for a, b in product((-1, 0, 1), repeat=2)]
        cs = np.array([10 ** c for c, _ in cand])
        ds = np.array([10 ** d for _, d in cand])
        m = coupled_margin(cs, ds, data, physics, n)
        evaluated += m.size
        k = int(np.argmax(m))
        if m[k] > best_margin:
            best_margin = float(m[k])
            logc, logd = cand[k]
    C, D = 10 ** logc, 10 ** logd
    consts = coupled_constants(C, D, data, physics, n).to_dict()
    return FeasibilityResult(best_margin > 1.0, float(C), float(D), best_margin, consts, evaluated)


@dataclass(frozen=True)
class ConditionPair:
    holds_sup: bool
    margin_sup: float
    holds_integral: bool
    margin_integral: float

    @property
    def holds(self) -> bool:
        return self.holds_sup and self.holds_integral

    def to_dict(self) -> dict:
        return {**asdict(self), "holds": self.holds}


def ns_condition(C: float, D: float, data: DataConstants, nu: float, n: int) -> ConditionPair:
    """Pair of smallness inequalities for whole-space Navier-Stokes (``n >= 5``).

    The first bounds the weighted supremum by ``(2 pi)^n D / n``, the second the
    integral by ``(2 pi)^n C / n``.  Margins are right side over left side.
    """
    if n < MIN_DIMENSION_NS:
        raise ValueError(f"Navier-Stokes condition needs n >= {MIN_DIMENSION_NS}, got n={n}")
    _check_positive(C, D)
    S = sphere_area(n)
    X = D + data.D_f0
    Y = C + data.C_f0
    lhs_sup = (data.D_phi1 / nu * (X * S / (n - 2) + Y)
               + data.D_phi0 / nu * (X * S / (n - 1) + Y)
               + data.D_phi1 * data.C_phi0
               + (X * S / (n - 3) + Y) * X / nu ** 2)
    lhs_int = ((data.C_phi0 + X * S / (nu * (n - 2)) + Y / nu)
               * (data.C_phi1 + X * S / (nu * (n - 1)) + Y / nu))
    rhs_sup = (2 * math.pi) ** n * D / n
    rhs_int = (2 * math.pi) ** n * C / n
    m1 = rhs_sup / lhs_sup if lhs_sup > 0 else math.inf
    m2 = rhs_int / lhs_int if lhs_int > 0 else math.inf
    return ConditionPair(m1 > 1, float(m1), m2 > 1, float(m2))
