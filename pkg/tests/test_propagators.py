import math

import numpy as np
import pytest

from spectral_picard.propagators import (PhysicsParams, _phi_weights, heat_propagate, poisson_solve,
                                         pressure_gradient, reconstruct_density, reconstruct_velocity)
from spectral_picard.sampling import random_J_field, random_solenoidal
from spectral_picard.class_algebra import JParams
from spectral_picard.spectral_core import (FourierField, TimeGrid, TorusGeometry, VectorField, divergence,
                                           gradient, laplacian)

G1 = TorusGeometry((1.0,))
G2 = TorusGeometry((1.0, 1.0))
GRID = TimeGrid.uniform(1.0, 100)


def test_physics_params():
    assert PhysicsParams(1.0).B == 0.0
    assert PhysicsParams(1.0, A=[[0, -2], [0.5, 0]]).B == 2.0
    with pytest.raises(ValueError):
        PhysicsParams(0.0)
    with pytest.raises(ValueError):
        PhysicsParams(1.0, A=[[1.0]], B=3.0)


def test_weights_series_and_closed_form_agree():
    # both branches near the switch point, against 40-digit reference values
    z = np.array([0.0099999, 0.0100001])
    w0, w1 = _phi_weights(z, 1.0)
    ref0 = (1 - np.exp(-z)) / z
    ref1 = (z - (1 - np.exp(-z))) / z ** 2
    assert np.allclose(w0, ref0, rtol=1e-12)
    assert np.allclose(w1, ref1, rtol=1e-10)
    w0, w1 = _phi_weights(np.array([0.0]), 2.0)
    assert (w0[0], w1[0]) == (2.0, 1.0)


def test_pure_decay():
    phi = FourierField.from_mapping(G1, {(1,): 1.0})
    u = heat_propagate(phi, None, 1.0, GRID)
    assert np.allclose(u.coefficient((1,)), np.exp(-4 * math.pi ** 2 * GRID.samples), rtol=1e-14, atol=0)


def test_constant_forcing_closed_form():
    c, lam = 0.7 - 0.2j, 4 * math.pi ** 2 * 2.0
    f = FourierField.from_mapping(G1, {(1,): np.full(len(GRID), c)}, time_grid=GRID)
    u = heat_propagate(None, f, 2.0, GRID)
    expect = c * (1 - np.exp(-lam * GRID.samples)) / lam
    assert np.allclose(u.coefficient((1,)), expect, rtol=1e-13, atol=1e-16)


def test_linear_forcing_is_exact():
    # f(t) = a + b t: u(t) = a(1-e^{-lt})/l + b(t/l - (1-e^{-lt})/l^2)
    a, b, mu = 1.3, -2.0, 0.05
    lam = mu * 4 * math.pi ** 2
    t = GRID.samples
    f = FourierField.from_mapping(G1, {(1,): a + b * t}, time_grid=GRID)
    u = heat_propagate(None, f, mu, GRID).coefficient((1,))
    em = 1 - np.exp(-lam * t)
    expect = a * em / lam + b * (t / lam - em / lam ** 2)
    assert np.allclose(u, expect, rtol=1e-12, atol=1e-15)


def test_zero_mode_accumulates():
    f = FourierField.from_mapping(G1, {(0,): np.ones(len(GRID))}, time_grid=GRID)
    u = heat_propagate(None, f, 1.0, GRID)
    assert np.allclose(u.coefficient((0,)).real, GRID.samples, rtol=0, atol=1e-15)


def test_semigroup_composition():
    rng = np.random.default_rng(0)
    geo = TorusGeometry((1.0, 1.4))
    grid = TimeGrid.uniform(0.2, 40)
    phi = random_J_field(rng, geo, JParams(1.0, 1.0), count=6)
    t = grid.samples
    forcing = FourierField(geo, phi.modes, np.outer(phi.coeffs, np.cos(7 * t) + t), grid, mode_box=phi.mode_box)
    full = heat_propagate(phi, forcing, 0.3, grid)
    half = 20
    first = TimeGrid(t[:half + 1])
    second = TimeGrid(t[half:] - t[half])
    u1 = heat_propagate(phi, forcing.replace(coeffs=forcing.coeffs[:, :half + 1], time_grid=first), 0.3, first)
    mid = u1.sample(half)
    u2 = heat_propagate(mid, forcing.replace(coeffs=forcing.coeffs[:, half:], time_grid=second), 0.3, second)
    for m in full.support:
        assert np.allclose(full.coefficient(m)[half:], u2.coefficient(m), rtol=1e-12, atol=1e-14)


def test_poisson_examples():
    g = FourierField.from_mapping(G1, {(1,): 1.0})
    p = poisson_solve(g)
    assert p.fluctuation.coefficient((1,)) == pytest.approx(-1 / (4 * math.pi ** 2))
    assert p.shift == pytest.approx(1 / (4 * math.pi ** 2))
    assert p.anchor_error() <= 1e-15
    zero = poisson_solve(FourierField.zeros(G1), p0=2.5)
    assert zero.value_at([0.37]) == 2.5


def test_poisson_rejects_mean():
    with pytest.raises(ValueError):
        poisson_solve(FourierField.from_mapping(G1, {(0,): 1.0}))


def test_poisson_left_inverse_and_anchor():
    rng = np.random.default_rng(5)
    geo = TorusGeometry((1.0, 2.0, 0.5))
    for _ in range(10):
        s = random_J_field(rng, geo, JParams(1.0, 1.0), count=8)
        s = s.replace(modes=s.modes[np.any(s.modes != 0, axis=1)], coeffs=s.coeffs[np.any(s.modes != 0, axis=1)])
        x0 = rng.uniform(0, 1, 3)
        p = poisson_solve(laplacian(s), x0, p0=1.5)
        assert p.fluctuation.allclose(s, rtol=1e-14)
        assert p.anchor_error() <= 1e-10


def test_poisson_time_dependent_anchor():
    grid = TimeGrid.uniform(1.0, 5)
    g = FourierField.from_mapping(G2, {(1, 2): np.arange(6.0) + 1j, (-1, -2): np.arange(6.0) - 1j}, time_grid=grid)
    p = poisson_solve(g, (0.2, 0.9), p0=np.linspace(0, 1, 6))
    assert p.anchor_error() <= 1e-12


def test_pressure_gradient_examples():
    zero = VectorField.zeros(G2, count=2)
    assert all(len(c) == 0 for c in pressure_gradient(zero, zero))
    r = VectorField([FourierField.from_mapping(G1, {(1,): 1.0})])
    gp = pressure_gradient(r)
    # source 2 pi i; gradient coefficient -i * 1 * 2 pi i / (2 pi) = 1
    assert gp[0].coefficient((1,)) == pytest.approx(1.0)


def test_pressure_gradient_projects_out_divergence():
    rng = np.random.default_rng(3)
    geo = TorusGeometry((1.0, 1.5, 0.8))
    for _ in range(10):
        r = VectorField([random_J_field(rng, geo, JParams(1.0, 1.0), count=5) for _ in range(3)])
        rest = r - pressure_gradient(r)
        assert divergence(rest).max_abs() <= 1e-12


def test_pressure_gradient_is_gradient():
    rng = np.random.default_rng(4)
    r = VectorField([random_J_field(rng, G2, JParams(1.0, 1.0), count=5) for _ in range(2)])
    gp = pressure_gradient(r)
    src = divergence(r)
    nonzero = np.any(src.modes != 0, axis=1)
    p = poisson_solve(src.replace(modes=src.modes[nonzero], coeffs=src.coeffs[nonzero]))
    expect = gradient(p.fluctuation)
    for a, b in zip(gp, expect):
        assert a.allclose(b, rtol=1e-13, atol=1e-15)


def test_density_examples():
    eta = VectorField([FourierField.from_mapping(G1, {(2,): 1.0})])
    rho = reconstruct_density(eta, None, None, 0.5, GRID)
    assert np.allclose(rho[0].coefficient((2,)), np.exp(-0.5 * 16 * math.pi ** 2 * GRID.samples), rtol=1e-14)
    g = VectorField([FourierField.from_mapping(G1, {(1,): np.sin(GRID.samples)}, time_grid=GRID)])
    rho = reconstruct_density(VectorField.zeros(G1, count=1), g, -g, 1.0, GRID)
    assert rho[0].max_abs() == 0


def test_velocity_examples():
    phi = VectorField([FourierField.from_mapping(G2, {(0, 1): 1.0}, mode_box=1), FourierField.zeros(G2, mode_box=1)])
    zero = VectorField.zeros(G2, GRID, count=2)
    vel = reconstruct_velocity(phi, zero, zero, PhysicsParams(1.0), GRID)
    assert np.allclose(vel.u[0].coefficient((0, 1)), np.exp(-4 * math.pi ** 2 * GRID.samples), rtol=1e-14)
    assert vel.warnings == []
    vel = reconstruct_velocity(VectorField.zeros(G2, count=2), zero, None, PhysicsParams(1.0), GRID)
    assert all(c.max_abs() == 0 for c in vel.u)


def test_velocity_is_divergence_free_under_forcing():
    rng = np.random.default_rng(6)
    geo = TorusGeometry((1.0, 1.0, 1.0))
    phi = VectorField(random_solenoidal(rng, geo, 3, 0.1))
    t = GRID.samples
    r = VectorField([FourierField(geo, c.modes, np.outer(c.coeffs, np.exp(-t)), GRID, mode_box=c.mode_box)
                     for c in (random_J_field(rng, geo, JParams(1.0, 1.0)) for _ in range(3))])
    vel = reconstruct_velocity(phi, r, None, PhysicsParams(0.7), GRID)
    assert divergence(vel.u).max_abs() <= 1e-10


def test_velocity_warns_on_divergent_data():
    phi = VectorField([FourierField.from_mapping(G1, {(1,): 1.0})])
    vel = reconstruct_velocity(phi, VectorField.zeros(G1, GRID, count=1), None, PhysicsParams(1.0), GRID)
    assert vel.warnings
