"""Fixed-point iteration for periodic Navier-Stokes and Boussinesq flow.

The unknown is the nonlinear forcing ``r = -u . grad u`` (and, for the
coupled system, ``h = -u . grad rho``).  Given ``r`` the velocity is the
divergence-free heat flow of the data forced by ``r``; the map ``T`` returns
the nonlinearity of that velocity.  A fixed point of ``T`` solves the PDE.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .class_algebra import KParams
from .propagators import (AnchoredScalar, PhysicsParams, poisson_solve, pressure_source, reconstruct_density,
                          reconstruct_velocity)
from .spectral_core import (FourierField, TimeGrid, TorusGeometry, VectorField, convolve, divergence, norm_I,
                            norm_Ibar, partial_derivative)

log = logging.getLogger(__name__)

NS = "ns"
BOUSSINESQ = "boussinesq"
DIVERGENCE_TOL = 1e-10
#: An update norm this many times above its running minimum stops the loop.
DIVERGENCE_FACTOR = 10.0
#: Margins within this relative distance of 1 count as the boundary, which fails.
BOUNDARY_RTOL = 1e-12


@dataclass
class TorusProblem:
    """Data for a periodic flow problem.

    ``phi`` is the (spatial, divergence-free) initial velocity and ``f`` a
    time-sampled body force.  The coupled kind also uses the initial density
    ``eta``, its forcing ``g``, the diffusivity and the coupling matrix in
    ``physics``.  ``x0``/``p0`` pin the pressure.
    """

    geometry: TorusGeometry
    physics: PhysicsParams
    time_grid: TimeGrid
    mode_box: tuple[int, ...]
    phi: VectorField
    f: VectorField | None = None
    eta: VectorField | None = None
    g: VectorField | None = None
    x0: tuple[float, ...] | None = None
    p0: float = 0.0
    kind: str = NS
    forcing_class: KParams | None = None
    max_truncation_loss: float = math.inf
    name: str = ""

    def __post_init__(self):
        n = self.geometry.n
        if self.kind not in (NS, BOUSSINESQ):
            raise ValueError(f"unknown problem kind {self.kind!r}")
        if len(self.phi) != n:
            raise ValueError("initial velocity needs one component per axis")
        div = divergence(self.phi).max_abs()
        if div > DIVERGENCE_TOL:
            raise ValueError(f"initial velocity is not divergence-free (max mode {div:.3e})")
        self.x0 = tuple(float(v) for v in (np.zeros(n) if self.x0 is None else self.x0))
        if self.kind == BOUSSINESQ:
            if self.eta is None:
                raise ValueError("coupled problem needs an initial density")
            if self.physics.A is None or self.physics.A.shape != (n, n):
                raise ValueError("coupled problem needs an n x n coupling matrix")
        for v in (self.f, self.g):
            if v is not None and v.time_grid != self.time_grid:
                raise ValueError("forcing must be sampled on the problem time grid")

    @property
    def coupled(self) -> bool:
        return self.kind == BOUSSINESQ

    def zero_state(self) -> "IterationState":
        zeros = VectorField.zeros(self.geometry, self.time_grid, self.mode_box)
        h = VectorField.zeros(self.geometry, self.time_grid, self.mode_box, count=len(self.eta)) if self.coupled else None
        return IterationState(zeros, h)


@dataclass
class IterationState:
    r: VectorField
    h: VectorField | None = None
    iteration: int = 0
    u: VectorField | None = None
    rho: VectorField | None = None
    p: AnchoredScalar | None = None


@dataclass
class Image:
    """Result of one application of the map together with the fields built on the way."""

    r: VectorField
    h: VectorField | None
    u: VectorField
    rho: VectorField | None
    p: AnchoredScalar
    truncation_loss: float
    warnings: list[str]


def _advect(u: VectorField, w: FourierField, box) -> tuple[FourierField, float]:
    """``sum_j u_j d(w)/dx_j`` truncated to ``box``."""
    total = None
    loss = 0.0
    for j in range(len(u)):
        term = convolve(u[j], partial_derivative(w, j), out_box=box)
        loss += term.truncation_loss
        total = term if total is None else total + term
    return total, loss


def apply_map(problem: TorusProblem, state: IterationState) -> Image:
    """``(r, h) -> (-u . grad u, -u . grad rho)`` for the velocity and density built from the state."""
    rho = None
    if problem.coupled:
        rho = reconstruct_density(problem.eta, problem.g, state.h, problem.physics.kappa, problem.time_grid)
    vel = reconstruct_velocity(problem.phi, state.r, problem.f, problem.physics, problem.time_grid, rho)
    u = vel.u
    box = problem.mode_box
    loss = 0.0
    r_new = []
    for k in range(len(u)):
        adv, l_k = _advect(u, u[k], box)
        loss += l_k
        r_new.append(-adv)
    h_new = None
    if rho is not None:
        h_new = []
        for k in range(len(rho)):
            adv, l_k = _advect(u, rho[k], box)
            loss += l_k
            h_new.append(-adv)
        h_new = VectorField(h_new)
    if loss > problem.max_truncation_loss:
        raise OverflowError(f"truncation loss {loss:.3e} exceeds cap {problem.max_truncation_loss:.3e}")
    source = pressure_source(state.r, problem.f, rho, problem.physics.A if rho is not None else None)
    p = poisson_solve(source, problem.x0, problem.p0)
    return Image(VectorField(r_new), h_new, u, rho, p, loss, vel.warnings)


def _distance(a: VectorField, b: VectorField) -> float:
    return max(norm_I(x - y) for x, y in zip(a, b))


def vector_norm_I(v: VectorField, tail: KParams | None = None) -> float:
    return max(norm_I(c, tail) for c in v)


# smallness condition on the torus

def kappa_prime(problem: TorusProblem) -> float:
    """``n max_p l_p / (2 pi nu)``."""
    g = problem.geometry
    return g.n * max(g.periods) / (2 * math.pi * problem.physics.nu)


def data_size(problem: TorusProblem) -> float:
    """``Ibar(phi) + 2 I(f)`` with both norms maximised over components."""
    a = max(norm_Ibar(c) for c in problem.phi)
    if problem.f is not None:
        a += 2 * vector_norm_I(problem.f, problem.forcing_class)
    return a


@dataclass(frozen=True)
class Smallness:
    holds: bool
    margin: float


def smallness_margin(kp: float, A: float, C: float) -> float:
    return C / (kp * (A + 2 * C) ** 2)


def check_smallness(problem: TorusProblem, C: float) -> Smallness:
    """Test ``kappa' (A + 2C)^2 < C``; margin is ``C / (kappa' (A + 2C)^2)``.

    The inequality is strict, so a margin within rounding of 1 fails.
    """
    if not C > 0:
        raise ValueError("ball radius C must be positive")
    m = smallness_margin(kappa_prime(problem), data_size(problem), C)
    return Smallness(m > 1 + BOUNDARY_RTOL, float(m))


def smallness_interval(kp: float, A: float) -> tuple[float, float] | None:
    """Open interval of ``C`` with ``4 kp C^2 + (4 kp A - 1) C + kp A^2 < 0``, or ``None``.

    The discriminant is ``1 - 8 kp A``, so the interval is empty once ``A >= 1 / (8 kp)``.
    """
    a, b, c = 4 * kp, 4 * kp * A - 1, kp * A * A
    disc = b * b - 4 * a * c
    if disc <= 0:
        return None
    sq = math.sqrt(disc)
    # stable root pair
    q = -0.5 * (b - sq) if b < 0 else -0.5 * (b + sq)
    roots = sorted([q / a, c / q if q != 0 else 0.0])
    if roots[1] <= 0:
        return None
    return max(roots[0], 0.0), roots[1]


def best_radius(A: float) -> float:
    """Radius maximising the smallness margin, ``C = A / 2``."""
    return A / 2


def best_margin_containing(kp: float, A: float, radius: float) -> float:
    """Largest smallness margin over balls ``{I <= C}`` that contain a point of norm ``radius``.

    The margin decreases for ``C > A/2``, so the optimum is ``C = max(radius, A/2)``.
    """
    C = max(radius, best_radius(A))
    return math.inf if C == 0 else smallness_margin(kp, A, C)


def feasible_radius_interval(problem: TorusProblem) -> tuple[float, float] | None:
    return smallness_interval(kappa_prime(problem), data_size(problem))


# iteration

CONVERGED = "converged"
MAX_ITERATIONS = "max-iterations"
DIVERGED = "diverged"


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    update_norm: float
    residual: float
    condition_margin: float
    contraction: float
    divergence_max: float
    anchor_error: float
    truncation_loss: float


@dataclass
class FixedPointReport:
    verdict: str
    records: list[IterationRecord]
    state: IterationState
    warnings: list[str] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return self.records[-1].iteration if self.records else 0

    def series(self, name: str) -> list[float]:
        return [getattr(r, name) for r in self.records]

    @property
    def final_residual(self) -> float:
        return self.records[-1].residual


def residual_norms(problem: TorusProblem, state: IterationState, image: Image | None = None) -> dict:
    """``I(r_k + (u . grad u)_k)`` per component (and the density analogue), the
    largest divergence mode of ``u`` and the pressure anchor error."""
    image = image or apply_map(problem, state)
    out = {"velocity": [norm_I(a - b) for a, b in zip(state.r, image.r)]}
    if image.h is not None:
        out["density"] = [norm_I(a - b) for a, b in zip(state.h, image.h)]
    out["divergence"] = divergence(image.u).max_abs()
    out["anchor_error"] = image.p.anchor_error()
    return out


def iterate(problem: TorusProblem, max_iter: int = 50, tol: float = 1e-8,
            initial: IterationState | None = None) -> FixedPointReport:
    """Plain Picard iteration ``state <- T(state)``.

    Iteration ``i`` evaluates ``T`` at the current state and records the
    residual ``max_k I(r_k - T(r)_k)``.  The loop stops when the residual
    drops below ``tol`` (converged), when ``max_iter`` is reached, or when the
    update norm exceeds ten times its running minimum (diverged).
    """
    if max_iter < 1 or not tol > 0:
        raise ValueError("need max_iter >= 1 and tol > 0")
    state = initial or problem.zero_state()
    kp, A = kappa_prime(problem), data_size(problem)
    records: list[IterationRecord] = []
    warnings: list[str] = []
    prev_r = None
    min_update = math.inf
    verdict = MAX_ITERATIONS
    for i in range(max_iter + 1):
        state.iteration = i
        image = apply_map(problem, state)
        warnings.extend(w for w in image.warnings if w not in warnings)
        residual = _distance(state.r, image.r)
        if image.h is not None:
            residual = max(residual, _distance(state.h, image.h))
        update = 0.0 if prev_r is None else _distance(state.r, prev_r)
        margin = math.nan if problem.coupled else best_margin_containing(kp, A, vector_norm_I(state.r))
        contraction = (update / records[-1].update_norm
                       if records and records[-1].update_norm > 0 else math.nan)
        state.u, state.rho, state.p = image.u, image.rho, image.p
        records.append(IterationRecord(i, update, residual, margin, contraction,
                                       divergence(image.u).max_abs(), image.p.anchor_error(),
                                       image.truncation_loss))
        log.info("iteration %d residual %.3e update %.3e", i, residual, update)
        if not math.isfinite(residual):
            verdict = DIVERGED
            break
        if residual < tol:
            verdict = CONVERGED
            break
        if i >= 1:
            min_update = min(min_update, update)
            if update > DIVERGENCE_FACTOR * min_update:
                verdict = DIVERGED
                break
        if i == max_iter:
            break
        prev_r = state.r
        state = IterationState(image.r, image.h, i + 1)
    return FixedPointReport(verdict, records, state, warnings)
