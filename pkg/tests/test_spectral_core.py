import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectral_picard.spectral_core import (FourierField, GeometryMismatch, GridMismatch, TimeGrid, TorusGeometry,
                                           VectorField, convolve, divergence, dumps_field, evaluate, gradient,
                                           laplacian, loads_field, norm_I, norm_Ibar, partial_derivative)
from spectral_picard.class_algebra import KParams

G1 = TorusGeometry((1.0,))
G2 = TorusGeometry((1.0, 1.0))


def spatial(geo, mapping, **kw):
    return FourierField.from_mapping(geo, mapping, **kw)


def random_field(rng, geo, count, radius=3, grid=None):
    n = geo.n
    side = 2 * radius + 1
    picks = rng.choice(side ** n, size=count, replace=False)
    modes = np.array(np.unravel_index(picks, (side,) * n)).T - radius
    shape = (count,) if grid is None else (count, len(grid))
    coeffs = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    return FourierField(geo, modes, coeffs, grid, mode_box=radius)


def brute_force_product(a, b):
    """Independent double sum over a dictionary, no vectorisation."""
    out = {}
    for p, ca in zip(a.support, a.coeffs):
        for q, cb in zip(b.support, b.coeffs):
            m = tuple(x + y for x, y in zip(p, q))
            out[m] = out.get(m, 0) + ca * cb
    return out


# geometry and grid

def test_geometry_rejects_nonpositive_period():
    with pytest.raises(ValueError):
        TorusGeometry((1.0, 0.0))


def test_time_grid_must_start_at_zero_and_increase():
    with pytest.raises(ValueError):
        TimeGrid([0.1, 0.2])
    with pytest.raises(ValueError):
        TimeGrid([0.0, 0.2, 0.2])
    g = TimeGrid.uniform(2.0, 4)
    assert len(g) == 5 and g.t_max == 2.0


def test_modes_outside_box_rejected():
    with pytest.raises(ValueError):
        FourierField(G1, [[3]], [1.0], mode_box=2)


def test_duplicate_modes_rejected():
    with pytest.raises(ValueError):
        FourierField(G1, [[1], [1]], [1.0, 2.0])


# convolution

def test_single_mode_product():
    a = spatial(G2, {(1, 0): 1})
    b = spatial(G2, {(0, 1): 1})
    c = convolve(a, b)
    assert c.support == [(1, 1)]
    assert c.coefficient((1, 1)) == 1


def test_constant_is_identity():
    a = spatial(G2, {(0, 0): 1})
    assert convolve(a, a).coefficient((0, 0)) == 1


def test_convolution_matches_brute_force():
    rng = np.random.default_rng(11)
    for _ in range(25):
        a = random_field(rng, G2, int(rng.integers(1, 6)))
        b = random_field(rng, G2, int(rng.integers(1, 6)))
        c = convolve(a, b)
        ref = brute_force_product(a, b)
        for m, v in ref.items():
            assert abs(c.coefficient(m) - v) <= 1e-13 * max(1.0, abs(v))


def test_convolution_truncation_records_loss():
    a = spatial(G1, {(2,): 1.0})
    c = convolve(a, a, out_box=3)
    assert len(c) == 0
    assert c.truncation_loss == pytest.approx(1.0)


def test_mixed_spatial_and_sampled_promotes():
    grid = TimeGrid.uniform(1.0, 3)
    a = spatial(G1, {(1,): 2.0})
    b = FourierField.from_mapping(G1, {(0,): np.arange(4.0)}, time_grid=grid)
    c = convolve(a, b)
    assert np.allclose(c.coefficient((1,)), 2 * np.arange(4.0))


def test_grid_mismatch_raises():
    a = FourierField.from_mapping(G1, {(0,): 1.0}, time_grid=TimeGrid.uniform(1.0, 3))
    b = FourierField.from_mapping(G1, {(0,): 1.0}, time_grid=TimeGrid.uniform(1.0, 4))
    with pytest.raises(GridMismatch):
        convolve(a, b)


def test_geometry_mismatch_raises():
    with pytest.raises(GeometryMismatch):
        convolve(spatial(G1, {(0,): 1}), spatial(TorusGeometry((2.0,)), {(0,): 1}))


def test_convolution_commutes_exactly():
    rng = np.random.default_rng(3)
    for _ in range(20):
        a, b = random_field(rng, G2, 4), random_field(rng, G2, 5)
        ab, ba = convolve(a, b), convolve(b, a)
        assert ab.support == ba.support
        assert np.allclose(ab.coeffs, ba.coeffs, rtol=1e-15, atol=1e-15)


def test_convolution_is_deterministic():
    rng = np.random.default_rng(5)
    a, b = random_field(rng, G2, 5), random_field(rng, G2, 5)
    assert np.array_equal(convolve(a, b).coeffs, convolve(a, b).coeffs)


def test_reality_flag_preserved():
    a = spatial(G1, {(1,): 0.5, (-1,): 0.5}, real=True)
    b = spatial(G1, {(2,): 1j, (-2,): -1j}, real=True)
    for f in (convolve(a, b), partial_derivative(a, 0), divergence(VectorField([a]))):
        assert f.real and f.is_hermitian()


# derivatives

def test_partial_derivative_examples():
    d = partial_derivative(spatial(G1, {(1,): 1}), 0)
    assert d.coefficient((1,)) == pytest.approx(2j * math.pi)
    assert len(partial_derivative(spatial(G1, {(0,): 5}), 0)) == 0
    d2 = partial_derivative(spatial(TorusGeometry((2.0,)), {(2,): 1}), 0)
    assert d2.coefficient((2,)) == pytest.approx(2j * math.pi)


def test_partial_derivative_axis_range():
    with pytest.raises(IndexError):
        partial_derivative(spatial(G1, {(1,): 1}), 1)


def test_divergence_examples():
    c = spatial(G2, {(0, 0): 1})
    assert len(divergence(VectorField([c, c]))) == 0
    v = VectorField([spatial(G2, {(0, 1): 1}, mode_box=1), FourierField.zeros(G2, mode_box=1)])
    assert len(divergence(v)) == 0


def test_divergence_of_gradient_is_laplacian_symbol():
    geo = TorusGeometry((1.0, 2.5, 0.7))
    s = spatial(geo, {(1, 0, 2): 1.5 - 0.5j, (-2, 1, 0): 0.3, (0, -3, 1): 2j})
    lap = divergence(gradient(s))
    for m in s.support:
        factor = -4 * math.pi ** 2 * sum((mj / l) ** 2 for mj, l in zip(m, geo.periods))
        assert lap.coefficient(m) == pytest.approx(factor * s.coefficient(m), rel=1e-14)
    assert laplacian(s).allclose(lap, rtol=1e-14)


def test_leibniz_rule():
    rng = np.random.default_rng(8)
    geo = TorusGeometry((1.0, 1.7))
    for _ in range(20):
        a, b = random_field(rng, geo, 4, radius=2), random_field(rng, geo, 4, radius=2)
        for k in range(2):
            lhs = partial_derivative(convolve(a, b), k)
            rhs = convolve(partial_derivative(a, k), b) + convolve(a, partial_derivative(b, k))
            assert lhs.allclose(rhs, rtol=1e-13, atol=0)


# norms

def test_norm_Ibar_examples():
    assert norm_Ibar(FourierField.zeros(G1)) == 0
    assert norm_Ibar(spatial(G1, {(1,): 3 + 4j})) == pytest.approx(5.0)
    assert norm_Ibar(spatial(G1, {(1,): 0.5, (-1,): 0.5})) == pytest.approx(1.0)


def test_norm_Ibar_rejects_sampled():
    f = FourierField.from_mapping(G1, {(0,): 1.0}, time_grid=TimeGrid.uniform(1.0, 2))
    with pytest.raises(ValueError):
        norm_Ibar(f)


def test_norm_I_exponential_and_tail():
    grid = TimeGrid.uniform(10.0, 20000)
    f = FourierField.from_mapping(G1, {(0,): np.exp(-grid.samples)}, time_grid=grid)
    assert abs(norm_I(f) - (1 - math.exp(-10))) <= 1e-4
    assert abs(norm_I(f, KParams(1.0, 0.0, 1.0)) - 1.0) <= 1e-4
    assert norm_I(FourierField.zeros(G1, grid)) == 0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_l1_algebra(seed):
    rng = np.random.default_rng(seed)
    a, b = random_field(rng, G2, 4), random_field(rng, G2, 4)
    assert norm_Ibar(convolve(a, b)) <= norm_Ibar(a) * norm_Ibar(b) * (1 + 1e-14)


# evaluation

def test_evaluate_examples():
    assert evaluate(spatial(G2, {(0, 0): 2 - 1j}), [0.3, 0.1]) == 2 - 1j
    assert evaluate(spatial(G1, {(1,): 1}), [0.0]) == 1


def test_evaluate_matches_direct_sum():
    rng = np.random.default_rng(4)
    geo = TorusGeometry((1.0, 1.3))
    a = random_field(rng, geo, 4)
    x = (0.3, 0.7)
    ref = 0j
    for m, c in zip(a.support, a.coeffs):
        ref += c * complex(math.cos(2 * math.pi * (m[0] * x[0] / 1.0 + m[1] * x[1] / 1.3)),
                           math.sin(2 * math.pi * (m[0] * x[0] / 1.0 + m[1] * x[1] / 1.3)))
    assert abs(evaluate(a, x) - ref) <= 1e-14 * max(1.0, abs(ref))


def test_evaluate_index_errors():
    grid = TimeGrid.uniform(1.0, 2)
    f = FourierField.from_mapping(G1, {(0,): 1.0}, time_grid=grid)
    with pytest.raises(IndexError):
        evaluate(f, [0.0], 3)


# serialization

def test_round_trip_exact():
    rng = np.random.default_rng(9)
    grid = TimeGrid(np.array([0.0, 0.1, 0.35, 1.0 / 3.0 + 0.5]))
    for f in (random_field(rng, G2, 5), random_field(rng, G2, 5, grid=grid)):
        g = loads_field(dumps_field(f))
        assert g.support == f.support
        assert np.array_equal(g.coeffs, f.coeffs)
        assert g.time_grid == f.time_grid and g.mode_box == f.mode_box
