import numpy as np
import pytest

from bmlab.fields import (BallTruncation, ConstantField, CoordinateField,
                          FDGradientField, GaussianBump, PiecewiseConstantField,
                          PowerTail, combine, difference, field_from_config,
                          gradient_field, indicator_cube, translate)


def test_indicator_cube_half_open():
    f = indicator_cube(0, (0,), 1)
    vals = f.eval_batch(np.array([[0.0], [0.5], [1.0], [-0.1]]))
    assert vals[:, 0].real.tolist() == [1.0, 1.0, 0.0, 0.0]
    assert f.dyadic_scale() == 0


def test_translate_examples():
    f = indicator_cube(0, (0,), 1)
    g = translate(f, [1.0])
    vals = g.eval_batch(np.array([[0.5], [1.5], [2.0]]))
    assert vals[:, 0].real.tolist() == [0.0, 1.0, 0.0]
    assert translate(f, [0.0]) is f


def test_translate_composition():
    f = GaussianBump((0.3,), 0.7, (1.0, 2.0), 1)
    g = translate(translate(f, [0.5]), [-0.5])
    rng = np.random.default_rng(4)
    pts = rng.uniform(-3, 3, size=(100, 1))
    assert np.allclose(g.eval_batch(pts), f.eval_batch(pts))


def test_translate_keeps_alignment_only_on_grid_shifts():
    f = indicator_cube(1, (0,), 1)   # side 1/2
    assert translate(f, [0.5]).dyadic_scale() == 1
    assert translate(f, [0.3]).dyadic_scale() is None


def test_linear_combination_and_difference():
    f = indicator_cube(0, (0,), 1)
    g = indicator_cube(0, (1,), 1)
    h = combine((2.0, f), (-1.0, g))
    pts = np.array([[0.5], [1.5]])
    assert h.eval_batch(pts)[:, 0].real.tolist() == [2.0, -1.0]
    assert difference(f, f).eval_batch(pts)[:, 0].real.tolist() == [0.0, 0.0]
    assert h.dyadic_scale() == 0


def test_gaussian_gradient_analytic_vs_fd():
    f = GaussianBump((0.25,), 0.8, (1.5,), 1)
    grad, step = gradient_field(f)
    assert step is None
    fd = FDGradientField(f, 1e-5)
    pts = np.linspace(-2, 2, 41)[:, None]
    assert np.allclose(grad.eval_batch(pts), fd.eval_batch(pts), atol=1e-8)


def test_fd_gradient_of_coordinate():
    grad, step = gradient_field(CoordinateField(0, 2))
    assert step is None  # analytic constant gradient
    vals = grad.eval_batch(np.array([[0.3, -0.4]]))
    assert np.allclose(vals, [[1.0, 0.0]])


def test_power_tail_singularity():
    f = PowerTail(-0.5, 1)
    assert f.singular_points()[0].tolist() == [0.0]
    vals = f.eval_batch(np.array([[4.0], [0.25]]))
    assert np.allclose(vals[:, 0].real, [0.5, 2.0])


def test_ball_truncation_inside_outside():
    f = ConstantField((1.0,), 1)
    inside = BallTruncation(f, 1.0, "inside")
    outside = BallTruncation(f, 1.0, "outside")
    pts = np.array([[0.5], [1.5]])
    assert inside.eval_batch(pts)[:, 0].real.tolist() == [1.0, 0.0]
    assert outside.eval_batch(pts)[:, 0].real.tolist() == [0.0, 1.0]
    lo, hi = inside.support_box()
    assert lo.tolist() == [-1.0] and hi.tolist() == [1.0]


def test_piecewise_constant_zero_trim():
    f = PiecewiseConstantField.from_cells(
        0, {(0,): [1.0], (1,): [0.0], (2,): [0.0]}, 1, 1)
    lo, hi = f.support_box()
    assert lo.tolist() == [0.0] and hi.tolist() == [1.0]


def test_support_radius_translates():
    g = GaussianBump((0.0,), 0.5, (1.0,), 1)
    shifted = translate(g, [10.0])
    assert shifted.support_radius() == pytest.approx(g.support_radius() + 10.0)


def test_field_config_roundtrip():
    fields = [
        ConstantField((1.0, 2.0 + 1.0j), 2),
        CoordinateField(1, 2),
        GaussianBump((0.1, -0.2), 0.7, (1.0, 1.0j), 2),
        PowerTail(-0.5, 1),
        indicator_cube(2, (1,), 1),
        BallTruncation(PowerTail(-0.5, 1), 4.0, "inside"),
        translate(GaussianBump((0.0,), 1.0, (1.0,), 1), [0.25]),
        combine((2.0, indicator_cube(0, (0,), 1)), (1.0j, indicator_cube(0, (1,), 1))),
        FDGradientField(GaussianBump((0.0,), 1.0, (1.0,), 1), 1e-4),
    ]
    rng = np.random.default_rng(9)
    for f in fields:
        back = field_from_config(f.describe())
        pts = rng.uniform(-3, 3, size=(50, f.n))
        assert np.allclose(back.eval_batch(pts), f.eval_batch(pts))
