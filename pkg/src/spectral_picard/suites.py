"""Verification suites run by ``spectral-picard verify-lemmas``.

Each suite returns one or more :class:`~spectral_picard.reports.Check`
records.  Margins are "observed / allowed": a check passes when its margin is
at most 1 (for the inequality suites) as documented per suite.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy import integrate

from .analysis_kernels import (DoubleFactorialTable, factorial_ratio_sweep, gaussian_moment_even,
                               gaussian_moment_multi, gaussian_moment_odd, sphere_area, transport_l1_bound)
from .class_algebra import (TORUS_CASES, JParams, KParams, check_membership_J, check_membership_K,
                            derivative_class, product_class_torus)
from .propagators import heat_propagate
from .reports import Check
from .sampling import random_J_field, random_K_field
from .spectral_core import TimeGrid, TorusGeometry, convolve, norm_I, partial_derivative

MOMENT_RTOL = 1e-10


def quadrature_moment(p: int, b: float) -> float:
    """Adaptive quadrature of ``int_0^R x^p exp(-b x^2) dx`` with a negligible tail beyond ``R``."""
    R = math.sqrt((40.0 + p * math.log(1 + p / b)) / b) + 1.0
    val, _ = integrate.quad(lambda x: x ** p * math.exp(-b * x * x), 0.0, R,
                            epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def gaussian_moments(sizes: dict, table: DoubleFactorialTable, rng) -> list[Check]:
    worst = 0.0
    numbers = {}
    for b in (0.5, 1.0, 2.0, 5.0):
        for k in range(sizes.get("moment_k_max", 6) + 1):
            for parity, fn in (("even", gaussian_moment_even), ("odd", gaussian_moment_odd)):
                p = 2 * k if parity == "even" else 2 * k + 1
                ref = quadrature_moment(p, b)
                err = abs(fn(k, b, table) - ref) / ref
                worst = max(worst, err)
    numbers["max_relative_error"] = worst
    checks = [Check("gaussian_moments.closed_form", worst <= MOMENT_RTOL, worst / MOMENT_RTOL, numbers)]

    ratio_min = math.inf
    for _ in range(sizes.get("moment_multi_samples", 200)):
        n = int(rng.integers(1, 5))
        alpha = rng.multinomial(int(rng.integers(0, 9)), [1 / n] * n)
        b = float(rng.choice([0.5, 1.0, 2.0, 5.0]))
        exact, bound = gaussian_moment_multi(alpha, b, table)
        ratio_min = min(ratio_min, bound / exact if exact > 0 else math.inf)
    checks.append(Check("gaussian_moments.multi_bound", ratio_min >= 1.0, 1.0 / ratio_min,
                        {"min_bound_over_exact": ratio_min}))
    return checks


def factorial_ratio_suite(sizes: dict, table: DoubleFactorialTable, rng) -> list[Check]:
    sweep = factorial_ratio_sweep(sizes.get("ratio_n_max", 2), sizes.get("ratio_entry_max", 4), table)
    worst = float(sweep.worst_ratio)
    numbers = {"checked": sweep.checked, "violations": sweep.violations, "worst_ratio": worst,
               "worst_case": [list(map(int, v)) if not isinstance(v, int) else v for v in sweep.worst_case]
               if sweep.worst_case else None}
    return [Check("factorial_ratio.exhaustive", sweep.violations == 0, worst, numbers)]


def sphere_area_suite(sizes: dict, table, rng) -> list[Check]:
    worst = 0.0
    for n in range(1, sizes.get("sphere_n_max", 20) + 1):
        worst = max(worst, abs(sphere_area(n + 2) - 2 * math.pi * sphere_area(n) / n) / sphere_area(n + 2))
    known = {1: 2.0, 2: 2 * math.pi, 3: 4 * math.pi}
    worst = max([worst] + [abs(sphere_area(n) - v) / v for n, v in known.items()])
    return [Check("sphere_area.recursion", worst <= 1e-13, worst / 1e-13, {"max_relative_error": worst})]


def transport_grid() -> TimeGrid:
    """Fine start, coarse tail out to t = 40 (forcing decays at rate >= 1)."""
    return TimeGrid(np.concatenate([np.linspace(0, 1, 2001), np.linspace(1, 40, 781)[1:]]))


def transport_instance(rng, grid: TimeGrid):
    """One random instance: returns ``(lhs, bound)`` for ``I(u d(rho)/dx_k)``."""
    n = int(rng.integers(1, 4))
    geo = TorusGeometry(tuple(rng.uniform(0.5, 2.0, n)))
    axis = int(rng.integers(0, n))
    kappa, nu = (float(v) for v in rng.uniform(0.5, 2.0, 2))
    J = JParams(float(rng.uniform(0.3, 1.5)), float(rng.uniform(0.5, 2.0)))
    K = KParams(float(rng.uniform(1.0, 3.0)), float(rng.uniform(0.3, 1.5)), float(rng.uniform(0.5, 2.0)))

    def count():
        return int(rng.integers(1, 6))

    phi, eta = random_J_field(rng, geo, J, count()), random_J_field(rng, geo, J, count())
    h, g = random_K_field(rng, geo, K, grid, count()), random_K_field(rng, geo, K, grid, count())
    u = heat_propagate(phi, h, nu, grid)
    rho = heat_propagate(eta, g, kappa, grid)
    lhs = norm_I(convolve(u, partial_derivative(rho, axis), out_box=8))
    return lhs, transport_l1_bound(phi, eta, h, g, axis, kappa, geo)


def transport_suite(sizes: dict, table, rng) -> list[Check]:
    grid = transport_grid()
    worst, violations = 0.0, 0
    count = sizes.get("transport_instances", 50)
    for _ in range(count):
        lhs, bound = transport_instance(rng, grid)
        worst = max(worst, lhs / bound)
        violations += lhs > bound
    return [Check("transport_bound.random", violations == 0, worst,
                  {"instances": count, "violations": int(violations)})]


def closure_grid() -> TimeGrid:
    return TimeGrid.uniform(2.0, 400)


def product_instance(case: str, rng, grid: TimeGrid):
    """Random in-class factors for ``case``; returns ``(product field, predicted class)``."""
    n = int(rng.integers(1, 4))
    geo = TorusGeometry(tuple(rng.uniform(0.5, 2.0, n)))
    axis = int(rng.integers(0, n))

    def factor(kind):
        r, d, rate = float(rng.uniform(0.2, 1.5)), float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.3, 3.0))
        if kind == "p":
            params = JParams(r, d)
            return params, heat_propagate(random_J_field(rng, geo, params), None, rate, grid), rate
        params = KParams(float(rng.uniform(0.3, 3.0)), r, d)
        return params, heat_propagate(None, random_K_field(rng, geo, params, grid), rate, grid), rate

    p1, f1, _ = factor(case[0])
    p2, f2, rate2 = factor(case[-1])
    prod = convolve(f1, partial_derivative(f2, axis), out_box=8)
    return prod, product_class_torus(case, p1, p2, axis, geo, kappa2=rate2, nu2=rate2)


def product_closure_suite(sizes: dict, table, rng) -> list[Check]:
    grid = closure_grid()
    checks = []
    count = sizes.get("closure_instances", 20)
    for case in TORUS_CASES:
        worst, violations = 0.0, 0
        for _ in range(count):
            prod, params = product_instance(case, rng, grid)
            m = check_membership_K(prod, params)
            worst = max(worst, m.margin)
            violations += not m.holds
        checks.append(Check(f"product_closure.{case}", violations == 0, worst,
                            {"instances": count, "violations": int(violations)}))
    return checks


def derivative_closure_suite(sizes: dict, table, rng) -> list[Check]:
    grid = closure_grid()
    worst, violations = 0.0, 0
    count = sizes.get("closure_instances", 20)
    for _ in range(count):
        n = int(rng.integers(1, 4))
        geo = TorusGeometry(tuple(rng.uniform(0.5, 2.0, n)))
        axis = int(rng.integers(0, n))
        J = JParams(float(rng.uniform(0.2, 2.0)), float(rng.uniform(0.5, 2.0)))
        K = KParams(float(rng.uniform(0.3, 3.0)), float(rng.uniform(0.2, 2.0)), float(rng.uniform(0.5, 2.0)))
        zj = random_J_field(rng, geo, J)
        zk = random_K_field(rng, geo, K, grid)
        for m in (check_membership_J(partial_derivative(zj, axis), derivative_class(J, axis, geo)),
                  check_membership_K(partial_derivative(zk, axis), derivative_class(K, axis, geo))):
            worst = max(worst, m.margin)
            violations += not m.holds
    return [Check("derivative_closure.random", violations == 0, worst,
                  {"instances": count, "violations": int(violations)})]


SUITES: dict[str, Callable] = {
    "gaussian_moments": gaussian_moments,
    "factorial_ratio": factorial_ratio_suite,
    "sphere_area": sphere_area_suite,
    "transport_bound": transport_suite,
    "derivative_closure": derivative_closure_suite,
    "product_closure": product_closure_suite,
}
