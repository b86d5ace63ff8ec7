"""Random in-class fields for property checks.

Coefficients are drawn with magnitude ``U(0, 1)`` times the class envelope
and a uniform phase, on a handful of modes inside a small box.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from .class_algebra import JParams, KParams
from .spectral_core import FourierField, TimeGrid, TorusGeometry


def random_modes(rng: np.random.Generator, n: int, count: int, radius: int = 2) -> np.ndarray:
    """``count`` distinct modes with entries in ``[-radius, radius]``."""
    side = 2 * radius + 1
    total = side ** n
    picks = rng.choice(total, size=min(count, total), replace=False)
    digits = np.array(np.unravel_index(picks, (side,) * n)).T
    return digits - radius


def _envelope(modes: np.ndarray, r: float, d: float) -> np.ndarray:
    absm = np.abs(modes)
    order = absm.sum(axis=1)
    with np.errstate(divide="ignore"):
        logr = np.where(order > 0, order * (math.log(r) if r > 0 else -np.inf), 0.0)
    return d * np.exp(logr - gammaln(absm + 1.0).sum(axis=1))


def _draw(rng, size):
    return rng.uniform(0, 1, size) * np.exp(2j * np.pi * rng.uniform(0, 1, size))


def random_J_field(rng: np.random.Generator, geometry: TorusGeometry, params: JParams, count: int = 4,
                   radius: int = 2) -> FourierField:
    modes = random_modes(rng, geometry.n, count, radius)
    coeffs = _draw(rng, len(modes)) * _envelope(modes, params.r, params.d)
    return FourierField(geometry, modes, coeffs, mode_box=radius)


def random_K_field(rng: np.random.Generator, geometry: TorusGeometry, params: KParams, grid: TimeGrid,
                   count: int = 4, radius: int = 2) -> FourierField:
    """Members of the form ``c_theta exp(-b' t)`` with ``b' >= b``."""
    modes = random_modes(rng, geometry.n, count, radius)
    amp = _draw(rng, len(modes)) * _envelope(modes, params.r, params.d)
    rates = params.b * (1 + rng.uniform(0, 1, len(modes)))
    coeffs = amp[:, None] * np.exp(-np.outer(rates, grid.samples))
    return FourierField(geometry, modes, coeffs, grid, mode_box=radius)


def random_solenoidal(rng: np.random.Generator, geometry: TorusGeometry, count: int, scale: float,
                      radius: int = 1) -> list[FourierField]:
    """Real divergence-free velocity data with l1 norm ``scale`` per component at most.

    Each mode gets a random vector projected orthogonal to its wavevector;
    Hermitian partners are added so the field is real.
    """
    n = geometry.n
    modes = [m for m in random_modes(rng, n, 2 * count, radius).tolist() if any(m)]
    seen, chosen = set(), []
    for m in modes:
        key = tuple(m)
        if key in seen or tuple(-v for v in m) in seen:
            continue
        seen.add(key)
        chosen.append(m)
        if len(chosen) == count:
            break
    k = geometry.wavevectors(np.array(chosen, dtype=float).reshape(-1, n))
    vecs = rng.normal(size=(len(chosen), n)) + 1j * rng.normal(size=(len(chosen), n))
    vecs -= (np.sum(vecs * k, axis=1) / np.sum(k * k, axis=1))[:, None] * k
    all_modes = np.array(chosen + [[-v for v in m] for m in chosen], dtype=np.int64).reshape(-1, n)
    comps = []
    for j in range(n):
        c = np.concatenate([vecs[:, j], np.conj(vecs[:, j])])
        comps.append(c)
    total = max(np.abs(c).sum() for c in comps)
    return [FourierField(geometry, all_modes, c * (scale / total), mode_box=radius, real=True) for c in comps]
