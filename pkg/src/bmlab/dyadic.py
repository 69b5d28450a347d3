"""Integer-exact dyadic cube lattice: naming, geometry, parents, windows.

A cube is addressed by its scale ``j`` (side length ``2**-j``) and an
integer position vector ``k``; the cube is the half-open product
``prod_i [2**-j * k_i, 2**-j * (k_i + 1))``.  All geometry derives from
``(j, k)`` exactly, so there is no floating-point drift in the index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Scales beyond this are rejected: 2**-j and the corners 2**-j * k stop
# being exactly representable in binary floating point long before the
# exponent range runs out, and every downstream reduction relies on
# corner exactness.
SCALE_CAP = 40

DEFAULT_CUBE_CAP = 2_000_000


class WindowTooLargeError(ValueError):
    """Enumerating a window would materialize more cubes than the cap."""


@dataclass(frozen=True)
class DyadicIndex:
    """Address (j, k) of the half-open dyadic cube Q_{j,k}."""

    j: int
    k: tuple[int, ...]

    def __post_init__(self):
        if not self.k:
            raise ValueError("position vector k must have length >= 1")
        if abs(self.j) > SCALE_CAP:
            raise ValueError(f"scale j={self.j} exceeds exact range |j| <= {SCALE_CAP}")
        object.__setattr__(self, "k", tuple(int(c) for c in self.k))

    @property
    def n(self) -> int:
        return len(self.k)

    @property
    def side(self) -> float:
        return 2.0 ** (-self.j)

    def key(self) -> tuple:
        return (self.j, self.k)


@dataclass(frozen=True)
class Box:
    """Axis-aligned cube with arbitrary real corner; superset of dyadic cubes.

    Dilates lambda*Q (same center, scaled side) and the boxes [-2^m, 2^m)^n
    are not dyadic, so the quadrature and estimator layers work on boxes.
    """

    corner: tuple[float, ...]
    side: float

    def __post_init__(self):
        if self.side <= 0:
            raise ValueError("box side must be positive")
        object.__setattr__(self, "corner", tuple(float(c) for c in self.corner))

    @property
    def n(self) -> int:
        return len(self.corner)

    @property
    def volume(self) -> float:
        return self.side**self.n

    @property
    def center(self) -> tuple[float, ...]:
        h = 0.5 * self.side
        return tuple(c + h for c in self.corner)

    def dilate(self, factor: float) -> "Box":
        """Box with the same center and side scaled by ``factor``."""
        if factor <= 0:
            raise ValueError("dilation factor must be positive")
        new_side = factor * self.side
        return Box(tuple(c - 0.5 * new_side for c in self.center), new_side)

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        lo = np.asarray(self.corner)
        return bool(np.all(x >= lo) and np.all(x < lo + self.side))

    def key(self) -> tuple:
        return ("box", self.corner, self.side)


def as_box(cube) -> Box:
    """Coerce a DyadicIndex or Box to a Box."""
    if isinstance(cube, Box):
        return cube
    corner, side, _ = cube_geometry(cube)
    return Box(tuple(corner.tolist()), side)


@dataclass(frozen=True)
class LatticeWindow:
    """Finite truncation of the lattice: scales j_min..j_max, cubes near 0."""

    j_min: int
    j_max: int
    spatial_radius: float
    n: int

    def __post_init__(self):
        if self.j_min > self.j_max:
            raise ValueError("j_min must not exceed j_max")
        if self.spatial_radius <= 0:
            raise ValueError("spatial_radius must be positive")
        if self.n < 1:
            raise ValueError("dimension n must be >= 1")
        if abs(self.j_min) > SCALE_CAP or abs(self.j_max) > SCALE_CAP:
            raise ValueError(f"window scales must satisfy |j| <= {SCALE_CAP}")

    def scales(self) -> range:
        return range(self.j_min, self.j_max + 1)


def cube_geometry(idx: DyadicIndex):
    """Return (corner, side, volume) of Q_{j,k}, all exact floats."""
    side = 2.0 ** (-idx.j)
    corner = np.array([side * c for c in idx.k], dtype=float)
    return corner, side, side**idx.n


def dyadic_parent(idx: DyadicIndex, steps: int = 1) -> DyadicIndex:
    """The ``steps``-th dyadic ancestor; steps=0 is the identity."""
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    if steps == 0:
        return idx
    shift = 1 << steps
    return DyadicIndex(idx.j - steps, tuple(c // shift for c in idx.k))


def containing_cube(x, j: int) -> DyadicIndex:
    """The unique cube at scale j whose half-open body contains x."""
    if abs(j) > SCALE_CAP:
        raise ValueError(f"scale j={j} exceeds exact range |j| <= {SCALE_CAP}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(x)):
        raise ValueError("point must be finite")
    scale = 2.0**j
    return DyadicIndex(j, tuple(int(math.floor(c * scale)) for c in x))


def scale_cube_grid(j: int, radius: float, n: int, clip_lo=None, clip_hi=None,
                    max_cubes: int = DEFAULT_CUBE_CAP):
    """Integer k-grid of scale-j cubes meeting the closed ball B(0, radius).

    Optional clip_lo/clip_hi restrict to cubes meeting the closed box
    [clip_lo, clip_hi] as well (used to skip cubes outside a field's
    support).  Returns (ks, corners) as int/float arrays of shape (C, n),
    in lexicographic k order.

    A cube meets the ball when its nearest closure point is within the
    radius; if that nearest point sits on an upper face (excluded by the
    half-open convention) the test is strict.
    """
    if abs(j) > SCALE_CAP:
        raise ValueError(f"scale j={j} exceeds exact range |j| <= {SCALE_CAP}")
    side = 2.0 ** (-j)
    lo = np.full(n, -radius)
    hi = np.full(n, radius)
    if clip_lo is not None:
        lo = np.maximum(lo, np.asarray(clip_lo, dtype=float))
    if clip_hi is not None:
        hi = np.minimum(hi, np.asarray(clip_hi, dtype=float))
    if np.any(lo > hi):
        empty = np.zeros((0, n))
        return empty.astype(int), empty

    k_lo = np.floor(lo / side).astype(np.int64)
    k_hi = np.floor(np.nextafter(hi / side, np.inf)).astype(np.int64)
    counts = k_hi - k_lo + 1
    total = int(np.prod(counts.astype(object)))
    if total > max_cubes:
        raise WindowTooLargeError(
            f"window at scale j={j} would enumerate {total} cubes (cap {max_cubes})"
        )

    axes = [np.arange(k_lo[i], k_hi[i] + 1, dtype=np.int64) for i in range(n)]
    grids = np.meshgrid(*axes, indexing="ij")
    ks = np.stack([g.ravel() for g in grids], axis=-1)
    corners = ks * side

    # nearest-point distance from the origin to each cube's closure
    nearest = np.clip(0.0, corners, corners + side)
    dist = np.sqrt(np.sum(nearest**2, axis=1))
    on_upper_face = np.any(nearest == corners + side, axis=1)
    keep = np.where(on_upper_face, dist < radius, dist <= radius)
    return ks[keep], corners[keep]


def cubes_in_window(window: LatticeWindow, j: int,
                    max_cubes: int = DEFAULT_CUBE_CAP) -> list[DyadicIndex]:
    """All scale-j cubes meeting the window ball, in lexicographic k order."""
    if not (window.j_min <= j <= window.j_max):
        raise ValueError(f"scale j={j} outside window range [{window.j_min}, {window.j_max}]")
    ks, _ = scale_cube_grid(j, window.spatial_radius, window.n, max_cubes=max_cubes)
    return [DyadicIndex(j, tuple(int(c) for c in row)) for row in ks]
