"""Periodic solution operators: forced heat flow, anchored Poisson solve,
pressure gradient, and velocity/density reconstruction."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .spectral_core import (FourierField, GeometryMismatch, GridMismatch, TimeGrid, TorusGeometry, VectorField,
                            divergence, evaluate, partial_derivative)

log = logging.getLogger(__name__)

#: Below this value of ``lambda * dt`` the integrator weights use their Taylor series.
SERIES_THRESHOLD = 1e-2
#: Relative tolerance on the mean mode of a Poisson source.
SOLVABILITY_RTOL = 1e-9
#: Tolerance on the divergence of initial velocity data.
DIVERGENCE_TOL = 1e-10


@dataclass(frozen=True)
class PhysicsParams:
    """Viscosity ``nu``, diffusivity ``kappa`` and buoyancy coupling matrix ``A``."""

    nu: float
    kappa: float = 1.0
    A: np.ndarray | None = None
    B: float | None = None

    def __post_init__(self):
        if not (self.nu > 0 and self.kappa > 0):
            raise ValueError("nu and kappa must be positive")
        if self.A is not None:
            A = np.array(self.A, dtype=float)
            if A.ndim != 2 or A.shape[0] != A.shape[1]:
                raise ValueError("A must be a square matrix")
            A.setflags(write=False)
            object.__setattr__(self, "A", A)
            bmax = float(np.abs(A).max()) if A.size else 0.0
            if self.B is not None and not np.isclose(self.B, bmax, rtol=1e-12, atol=0):
                raise ValueError(f"B={self.B} inconsistent with max|A|={bmax}")
            object.__setattr__(self, "B", bmax)
        elif self.B is None:
            object.__setattr__(self, "B", 0.0)
        elif self.B < 0:
            raise ValueError("B must be nonnegative")


def _phi_weights(z: np.ndarray, dt) -> tuple[np.ndarray, np.ndarray]:
    """Exponential-integrator weights for steps of size ``dt`` (broadcast against ``z``).

    With ``z = lambda * dt`` returns ``w0 = int_0^dt e^{-lambda(dt-s)} ds`` and
    ``w1 = int_0^dt e^{-lambda(dt-s)} s/dt ds``; the update for forcing that is
    linear on the step is ``u1 = e^{-z} u0 + w0 f0 + w1 (f1 - f0)``.
    """
    z = np.asarray(z, dtype=float)
    dt = np.broadcast_to(np.asarray(dt, dtype=float), z.shape)
    w0 = np.empty_like(z)
    w1 = np.empty_like(z)
    small = np.abs(z) < SERIES_THRESHOLD
    zs = z[small]
    # Taylor series: w0/dt = sum (-z)^j/(j+1)!, w1/dt = sum (-z)^j/(j+2)!
    s0 = np.zeros_like(zs)
    s1 = np.zeros_like(zs)
    term = np.ones_like(zs)
    for j in range(10):
        s0 += term / _FACT[j + 1]
        s1 += term / _FACT[j + 2]
        term = term * (-zs)
    w0[small] = dt[small] * s0
    w1[small] = dt[small] * s1
    zl = z[~small]
    em1 = -np.expm1(-zl)  # 1 - e^{-z}
    w0[~small] = dt[~small] * em1 / zl
    w1[~small] = dt[~small] * (zl - em1) / (zl * zl)
    return w0, w1


_FACT = np.cumprod(np.r_[1.0, np.arange(1.0, 14.0)])


def heat_propagate(initial: FourierField | None, forcing: FourierField | None, mu: float,
                   time_grid: TimeGrid, geometry: TorusGeometry | None = None, mode_box=None) -> FourierField:
    """Solve ``u_t = mu * Laplacian(u) + f`` with ``u(0) = initial`` on the grid.

    Each mode evolves as ``u(t) = e^{-lambda t} [u(0) + int_0^t f(s) e^{lambda s} ds]``
    with ``lambda = mu * 4 pi^2 sum_j m_j^2 / l_j^2``; the forcing is treated as
    piecewise linear between samples, for which the update is exact.
    """
    if not mu > 0:
        raise ValueError("diffusion constant must be positive")
    ref = initial if initial is not None else forcing
    if ref is None:
        if geometry is None:
            raise ValueError("geometry required when both inputs are omitted")
        return FourierField.zeros(geometry, time_grid, mode_box)
    geometry = geometry or ref.geometry
    for f in (initial, forcing):
        if f is not None and f.geometry != geometry:
            raise GeometryMismatch("input on a different geometry")
    if initial is not None and not initial.is_spatial:
        raise ValueError("initial data must be a spatial field")
    if forcing is not None:
        if forcing.is_spatial:
            forcing = forcing.promote(time_grid)
        elif forcing.time_grid != time_grid:
            raise GridMismatch("forcing sampled on a different grid")

    parts = [f.modes for f in (initial, forcing) if f is not None and len(f)]
    boxes = [f.mode_box for f in (initial, forcing) if f is not None]
    box = mode_box or tuple(max(b) for b in zip(*boxes))
    real = all(f.real for f in (initial, forcing) if f is not None)
    if not parts:
        return FourierField.zeros(geometry, time_grid, box)
    modes = np.unique(np.concatenate(parts), axis=0)
    T = len(time_grid)
    t = time_grid.samples
    lam = -mu * geometry.laplacian_symbol(modes)

    u = np.zeros((modes.shape[0], T), complex)
    if initial is not None and len(initial):
        u0 = np.array([initial.coefficient(m) for m in modes.tolist()], complex)
        u += u0[:, None] * np.exp(-np.outer(lam, t))
    if forcing is not None and len(forcing):
        f = np.array([forcing.coefficient(m) for m in modes.tolist()], complex)
        dts = np.diff(t)
        z = np.outer(lam, dts)
        w0, w1 = _phi_weights(z, dts[None, :])
        decay = np.exp(-z)
        incr = w0 * f[:, :-1] + w1 * (f[:, 1:] - f[:, :-1])
        duhamel = np.zeros(modes.shape[0], complex)
        for i in range(dts.size):
            duhamel = decay[:, i] * duhamel + incr[:, i]
            u[:, i + 1] += duhamel
    return FourierField(geometry, modes, u, time_grid, mode_box=box, real=real)


@dataclass(frozen=True)
class AnchoredScalar:
    """Pressure-like scalar: zero-mean fluctuation plus a spatially constant
    shift chosen so the value at ``x0`` equals ``p0``."""

    fluctuation: FourierField
    x0: tuple[float, ...]
    p0: np.ndarray | complex
    shift: np.ndarray | complex

    def total(self) -> FourierField:
        """Fluctuation with the shift stored in mode 0."""
        zero = np.zeros((1, self.fluctuation.n), np.int64)
        const = np.asarray(self.shift, complex).reshape((1,) + np.shape(self.shift))
        base = FourierField(self.fluctuation.geometry, zero, const, self.fluctuation.time_grid,
                            mode_box=self.fluctuation.mode_box, real=self.fluctuation.real)
        return self.fluctuation + base

    def value_at(self, x: Sequence[float], t_index: int | None = None) -> complex:
        return evaluate(self.total(), x, t_index)

    def anchor_error(self) -> float:
        p = self.total()
        if p.is_spatial:
            return abs(evaluate(p, self.x0) - complex(self.p0))
        p0 = np.broadcast_to(np.asarray(self.p0, complex), (len(p.time_grid),))
        return max(abs(evaluate(p, self.x0, i) - p0[i]) for i in range(len(p.time_grid)))


def poisson_solve(g: FourierField, x0: Sequence[float] | None = None, p0=0.0) -> AnchoredScalar:
    """Solve ``Laplacian(p) = g`` on the torus with ``p(x0, t) = p0(t)``.

    The mean mode of ``g`` must vanish (within ``1e-9 (1 + max|g|)`` per
    sample); otherwise the problem has no periodic solution.
    """
    n = g.n
    x0 = tuple(float(v) for v in (np.zeros(n) if x0 is None else x0))
    if len(x0) != n:
        raise ValueError(f"anchor point needs {n} coordinates")
    mean = g.coefficient((0,) * n)
    scale = np.abs(g.coeffs).max(axis=0) if len(g) else 0.0
    if np.any(np.abs(mean) > SOLVABILITY_RTOL * (1.0 + scale)):
        raise ValueError("Poisson source has a nonzero mean mode; no periodic solution exists")

    keep = np.any(g.modes != 0, axis=1) if len(g) else np.zeros(0, bool)
    modes = g.modes[keep]
    sym = g.geometry.laplacian_symbol(modes)
    coeffs = g.coeffs[keep] / (sym if g.is_spatial else sym[:, None])
    fluct = g.replace(modes=modes, coeffs=coeffs)

    if g.is_spatial:
        p0v = complex(np.asarray(p0).reshape(()))
        shift = p0v - evaluate(fluct, x0)
    else:
        T = len(g.time_grid)
        p0v = np.broadcast_to(np.asarray(p0, complex), (T,)).copy()
        phase = np.exp(1j * (g.geometry.wavevectors(modes) @ np.asarray(x0))) if len(modes) else np.zeros(0)
        shift = p0v - phase @ coeffs if len(modes) else p0v.copy()
    return AnchoredScalar(fluct, x0, p0v, shift)


def _joint_box(*fields) -> tuple[int, ...]:
    boxes = [v.mode_box for v in fields if v is not None]
    return tuple(max(b) for b in zip(*boxes))


def _buoyancy(rho: VectorField, A: np.ndarray, k: int) -> FourierField:
    """Component ``(A rho)_k``."""
    out = FourierField.zeros(rho.geometry, rho.time_grid, rho.mode_box)
    for j, a in enumerate(A[k]):
        if a != 0:
            out = out + rho[j].scale(a)
    return out


def pressure_source(r: VectorField, f: VectorField | None = None, rho: VectorField | None = None,
                    A: np.ndarray | None = None) -> FourierField:
    """``div r + div f + sum_ij a_ij d(rho_j)/dx_i``."""
    src = divergence(r)
    if f is not None:
        src = src + divergence(f)
    if rho is not None:
        if A is None:
            raise ValueError("coupling matrix A required with a density field")
        n = r.geometry.n
        for i in range(n):
            src = src + partial_derivative(_buoyancy(rho, A, i), i)
    return src


def pressure_gradient(r: VectorField, f: VectorField | None = None, rho: VectorField | None = None,
                      A: np.ndarray | None = None) -> VectorField:
    """Gradient of the pressure whose Laplacian is the divergence of the forcing.

    Component ``k`` at mode ``m != 0`` is ``-i m_k s(m) / (2 pi l_k sum_j m_j^2/l_j^2)``
    where ``s`` is :func:`pressure_source`; the mean mode is zero.
    """
    src = pressure_source(r, f, rho, A)
    geom = src.geometry
    box = _joint_box(r, f, rho)
    keep = np.any(src.modes != 0, axis=1) if len(src) else np.zeros(0, bool)
    modes, s = src.modes[keep], src.coeffs[keep]
    l = np.asarray(geom.periods)
    denom = 2 * np.pi * np.sum((modes / l) ** 2, axis=1)
    comps = []
    for k in range(geom.n):
        w = -1j * modes[:, k] / (l[k] * denom)
        comps.append(src.replace(modes=modes, coeffs=s * (w if src.is_spatial else w[:, None]), mode_box=box))
    return VectorField(comps)


def reconstruct_density(eta: VectorField, g: VectorField | None, h: VectorField | None, kappa: float,
                        time_grid: TimeGrid) -> VectorField:
    """``rho_k = heat flow of eta_k forced by g_k + h_k`` with diffusivity ``kappa``."""
    comps = []
    for k in range(len(eta)):
        forcing = None
        for v in (g, h):
            if v is not None:
                forcing = v[k] if forcing is None else forcing + v[k]
        comps.append(heat_propagate(eta[k], forcing, kappa, time_grid, mode_box=_joint_box(eta, g, h)))
    return VectorField(comps)


@dataclass
class Velocity:
    u: VectorField
    grad_p: VectorField
    warnings: list[str] = field(default_factory=list)


def reconstruct_velocity(phi: VectorField, r: VectorField, f: VectorField | None, physics: PhysicsParams,
                         time_grid: TimeGrid, rho: VectorField | None = None) -> Velocity:
    """Divergence-free velocity ``u_k = heat flow of phi_k`` forced by
    ``r_k + f_k + (A rho)_k - dp/dx_k`` with viscosity ``nu``."""
    warnings = []
    div_phi = divergence(phi).max_abs()
    if div_phi > DIVERGENCE_TOL:
        msg = f"initial velocity divergence {div_phi:.3e} exceeds {DIVERGENCE_TOL:g}"
        log.warning(msg)
        warnings.append(msg)
    A = physics.A if rho is not None else None
    if rho is not None and A is None:
        raise ValueError("density coupling needs the matrix A")
    grad_p = pressure_gradient(r, f, rho, A)
    comps = []
    for k in range(len(phi)):
        forcing = r[k] if f is None else r[k] + f[k]
        if rho is not None:
            forcing = forcing + _buoyancy(rho, A, k)
        forcing = forcing - grad_p[k]
        comps.append(heat_propagate(phi[k], forcing, physics.nu, time_grid, mode_box=_joint_box(phi, r, f, rho)))
    return Velocity(VectorField(comps), grad_p, warnings)
