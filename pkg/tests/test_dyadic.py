import numpy as np
import pytest

from bmlab.dyadic import (Box, DyadicIndex, LatticeWindow, WindowTooLargeError,
                          as_box, containing_cube, cube_geometry,
                          cubes_in_window, dyadic_parent, scale_cube_grid)


def test_unit_cube_geometry():
    corner, side, vol = cube_geometry(DyadicIndex(0, (0,)))
    assert corner.tolist() == [0.0]
    assert side == 1.0
    assert vol == 1.0


def test_dyadic_arithmetic_1d():
    corner, side, _ = cube_geometry(DyadicIndex(2, (1,)))
    assert corner.tolist() == [0.25]
    assert side == 0.25


def test_dyadic_arithmetic_2d_negative_scale():
    corner, side, vol = cube_geometry(DyadicIndex(-1, (-1, 0)))
    assert corner.tolist() == [-2.0, 0.0]
    assert side == 2.0
    assert vol == 4.0


def test_scale_cap_rejected():
    with pytest.raises(ValueError):
        DyadicIndex(41, (0,))


def test_parent_basic():
    assert dyadic_parent(DyadicIndex(3, (5,)), 1) == DyadicIndex(2, (2,))
    assert dyadic_parent(DyadicIndex(3, (-5,)), 1) == DyadicIndex(2, (-3,))


def test_parent_zero_steps_identity():
    idx = DyadicIndex(4, (7, -3))
    assert dyadic_parent(idx, 0) == idx


def test_parent_composition():
    rng = np.random.default_rng(11)
    for _ in range(200):
        j = int(rng.integers(-10, 10))
        k = tuple(int(v) for v in rng.integers(-50, 50, size=2))
        idx = DyadicIndex(j, k)
        s1, s2 = int(rng.integers(0, 5)), int(rng.integers(0, 5))
        assert dyadic_parent(dyadic_parent(idx, s1), s2) == dyadic_parent(idx, s1 + s2)


def test_parent_contains_child():
    idx = DyadicIndex(5, (13, -9))
    parent = dyadic_parent(idx, 2)
    c_child, side_child, _ = cube_geometry(idx)
    c_par, side_par, _ = cube_geometry(parent)
    assert side_par == 4 * side_child
    assert np.all(c_par <= c_child)
    assert np.all(c_child + side_child <= c_par + side_par)


def test_containing_cube_examples():
    assert containing_cube([0.3], 2) == DyadicIndex(2, (1,))
    for j in (-3, 0, 4):
        assert containing_cube([0.0], j).k == (0,)
    assert containing_cube([-0.1], 0) == DyadicIndex(0, (-1,))


def test_containing_cube_roundtrip_on_corners():
    rng = np.random.default_rng(5)
    for _ in range(300):
        j = int(rng.integers(-8, 9))
        k = tuple(int(v) for v in rng.integers(-100, 100, size=2))
        idx = DyadicIndex(j, k)
        corner, _, _ = cube_geometry(idx)
        assert containing_cube(corner, j) == idx


def test_window_enumeration_convention():
    w1 = LatticeWindow(0, 0, 1.0, 1)
    ks = sorted(idx.k[0] for idx in cubes_in_window(w1, 0))
    # [-1,0) and [0,1) cover the ball; [1,2) touches it at the left corner
    assert ks == [-1, 0, 1]

    w2 = LatticeWindow(1, 1, 1.0, 1)
    assert len(cubes_in_window(w2, 1)) == 5

    w3 = LatticeWindow(-3, -3, 0.1, 1)
    assert len(cubes_in_window(w3, -3)) == 2


def test_window_order_is_lexicographic():
    w = LatticeWindow(1, 1, 1.0, 2)
    cubes = cubes_in_window(w, 1)
    keys = [c.k for c in cubes]
    assert keys == sorted(keys)


def test_window_partition_property():
    """Fixed-scale cubes are disjoint and cover each sample point once."""
    w = LatticeWindow(2, 2, 1.5, 2)
    cubes = cubes_in_window(w, 2)
    corners = np.array([cube_geometry(c)[0] for c in cubes])
    side = 0.25
    rng = np.random.default_rng(3)
    pts = rng.uniform(-1.0, 1.0, size=(500, 2))
    for x in pts:
        hits = np.sum(np.all((corners <= x) & (x < corners + side), axis=1))
        assert hits == 1


def test_window_cap_guard():
    with pytest.raises(WindowTooLargeError):
        scale_cube_grid(10, 100.0, 2, max_cubes=1000)


def test_window_scale_range_guard():
    w = LatticeWindow(0, 2, 1.0, 1)
    with pytest.raises(ValueError):
        cubes_in_window(w, 3)


def test_box_dilation_preserves_center():
    box = as_box(DyadicIndex(1, (1,)))
    big = box.dilate(2.0)
    assert big.center == box.center
    assert big.side == 2 * box.side
    assert big.volume == pytest.approx(2 * box.volume)


def test_box_contains_half_open():
    box = Box((0.0,), 1.0)
    assert box.contains([0.0])
    assert not box.contains([1.0])
