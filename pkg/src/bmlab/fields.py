"""Vector fields f: R^n -> C^d used by the norm and compactness machinery.

Fields are closed-form, immutable, and batch-evaluable.  Each field
reports what the sweeps need to stay fast and exact: a support box (so
cubes that cannot contribute are skipped), declared singular points
(quadrature grading targets), the dyadic scale on which it is piecewise
constant (if any), and an analytic gradient when one exists.

Gaussian supports are truncated at 12 sigma for the skip logic only;
evaluation stays exact, and the neglected mass (under 1e-30
relatively) is far below every tolerance in the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dyadic import SCALE_CAP

_GAUSS_SUPPORT_SIGMAS = 12.0


class VectorField:
    """Interface shared by all field families."""

    n: int
    d: int

    def eval_batch(self, points) -> np.ndarray:
        raise NotImplementedError

    def eval_one(self, x) -> np.ndarray:
        return self.eval_batch(np.asarray(x, dtype=float)[None, :])[0]

    def support_box(self):
        """(lo, hi) arrays bounding the support, or None if unbounded."""
        return None

    def support_radius(self):
        box = self.support_box()
        if box is None:
            return None
        lo, hi = box
        return float(np.sqrt(np.sum(np.maximum(np.abs(lo), np.abs(hi)) ** 2)))

    def singular_points(self) -> list:
        return []

    def dyadic_scale(self):
        """Scale j such that the field is constant on every cube of D_j."""
        return None

    def gradient(self):
        """Analytic gradient as a d=n field, or None."""
        return None

    def describe(self) -> dict:
        raise NotImplementedError

    def _pts(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None] if self.n == 1 else pts[None, :]
        return pts.reshape(-1, self.n)


@dataclass(frozen=True)
class ConstantField(VectorField):
    value: tuple
    n: int

    def __post_init__(self):
        object.__setattr__(self, "value", tuple(complex(v) for v in np.atleast_1d(self.value)))

    @property
    def d(self) -> int:
        return len(self.value)

    def eval_batch(self, points):
        pts = self._pts(points)
        return np.broadcast_to(np.asarray(self.value, dtype=complex),
                               (pts.shape[0], self.d)).copy()

    def gradient(self):
        if self.d == 1:
            return ConstantField((0.0,) * self.n, self.n)
        return None

    def describe(self):
        return {"kind": "constant", "value": _enc_cvec(self.value), "n": self.n}


@dataclass(frozen=True)
class CoordinateField(VectorField):
    """Scalar field f(x) = x_axis; handy as an exactly-integrable oracle."""

    axis: int
    n: int
    d = 1

    def eval_batch(self, points):
        pts = self._pts(points)
        return pts[:, self.axis].astype(complex)[:, None]

    def gradient(self):
        e = [0.0] * self.n
        e[self.axis] = 1.0
        return ConstantField(tuple(e), self.n)

    def describe(self):
        return {"kind": "coordinate", "axis": self.axis, "n": self.n}


@dataclass(frozen=True)
class GaussianBump(VectorField):
    """f(x) = exp(-|x - center|^2 / (2 scale^2)) * direction."""

    center: tuple
    scale: float
    direction: tuple
    n: int

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("gaussian scale must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        object.__setattr__(self, "direction",
                           tuple(complex(v) for v in np.atleast_1d(self.direction)))

    @property
    def d(self) -> int:
        return len(self.direction)

    def eval_batch(self, points):
        pts = self._pts(points)
        diff = pts - np.asarray(self.center)
        amp = np.exp(-np.sum(diff * diff, axis=1) / (2.0 * self.scale**2))
        return amp[:, None] * np.asarray(self.direction, dtype=complex)[None, :]

    def support_box(self):
        c = np.asarray(self.center)
        r = _GAUSS_SUPPORT_SIGMAS * self.scale
        return c - r, c + r

    def gradient(self):
        if self.d != 1:
            return None
        return _GaussianGradient(self)

    def describe(self):
        return {"kind": "gaussian_bump", "center": list(self.center),
                "scale": self.scale, "direction": _enc_cvec(self.direction),
                "n": self.n}


@dataclass(frozen=True)
class _GaussianGradient(VectorField):
    bump: GaussianBump

    @property
    def n(self) -> int:
        return self.bump.n

    @property
    def d(self) -> int:
        return self.bump.n

    def eval_batch(self, points):
        pts = self._pts(points)
        diff = pts - np.asarray(self.bump.center)
        amp = np.exp(-np.sum(diff * diff, axis=1) / (2.0 * self.bump.scale**2))
        coef = self.bump.direction[0] / self.bump.scale**2
        return (-coef) * amp[:, None] * diff

    def support_box(self):
        return self.bump.support_box()

    def describe(self):
        return {"kind": "gaussian_gradient", "bump": self.bump.describe()}


@dataclass(frozen=True)
class PowerTail(VectorField):
    """Scalar radial power f(x) = |x|^exponent (singular at the origin)."""

    exponent: float
    n: int
    d = 1

    def eval_batch(self, points):
        pts = self._pts(points)
        r = np.sqrt(np.sum(pts * pts, axis=1))
        out = np.zeros(r.shape[0], dtype=complex)
        mask = r > 0
        out[mask] = r[mask] ** self.exponent
        if self.exponent > 0:
            out[~mask] = 0.0
        # at the singular point itself the value is a measure-zero convention
        return out[:, None]

    def singular_points(self):
        return [np.zeros(self.n)] if self.exponent != 0 else []

    def describe(self):
        return {"kind": "power_tail", "exponent": self.exponent, "n": self.n}


@dataclass(frozen=True)
class PiecewiseConstantField(VectorField):
    """Constant on cubes of D_scale over an integer grid box, zero outside."""

    scale: int
    origin_k: tuple
    values: tuple          # flattened complex values, shape grid_shape + (d,)
    grid_shape: tuple
    d: int
    n: int

    def __post_init__(self):
        if abs(self.scale) > SCALE_CAP:
            raise ValueError(f"piecewise scale must satisfy |j| <= {SCALE_CAP}")

    @staticmethod
    def from_cells(scale: int, cells: dict, n: int, d: int) -> "PiecewiseConstantField":
        """Build from a {k-tuple: value-vector} mapping (zero cells are
        trimmed so the support box stays tight)."""
        live = {k: v for k, v in cells.items()
                if np.any(np.asarray(v, dtype=complex) != 0)}
        if live:
            cells = live
        else:
            first = next(iter(sorted(cells.keys())))
            cells = {first: cells[first]}
        ks = np.array(sorted(cells.keys()), dtype=np.int64).reshape(len(cells), n)
        lo = ks.min(axis=0)
        hi = ks.max(axis=0)
        shape = tuple((hi - lo + 1).tolist())
        grid = np.zeros(shape + (d,), dtype=complex)
        for k, v in cells.items():
            idx = tuple(int(a - b) for a, b in zip(k, lo))
            grid[idx] = np.asarray(v, dtype=complex).reshape(d)
        return PiecewiseConstantField(
            scale=scale, origin_k=tuple(int(v) for v in lo),
            values=tuple(grid.ravel().tolist()), grid_shape=shape, d=d, n=n)

    def _grid(self) -> np.ndarray:
        return np.asarray(self.values, dtype=complex).reshape(self.grid_shape + (self.d,))

    def eval_batch(self, points):
        pts = self._pts(points)
        side = 2.0 ** (-self.scale)
        idx = np.floor(pts / side).astype(np.int64) - np.asarray(self.origin_k)
        ok = np.all((idx >= 0) & (idx < np.asarray(self.grid_shape)), axis=1)
        out = np.zeros((pts.shape[0], self.d), dtype=complex)
        if np.any(ok):
            sel = tuple(idx[ok].T)
            out[ok] = self._grid()[sel]
        return out

    def support_box(self):
        side = 2.0 ** (-self.scale)
        lo = np.asarray(self.origin_k) * side
        hi = (np.asarray(self.origin_k) + np.asarray(self.grid_shape)) * side
        return lo, hi

    def dyadic_scale(self):
        return self.scale

    def cell_means(self) -> dict:
        """The defining {k: value} map (own cells only)."""
        grid = self._grid()
        out = {}
        for idx in np.ndindex(*self.grid_shape):
            k = tuple(int(o + i) for o, i in zip(self.origin_k, idx))
            out[k] = grid[idx]
        return out

    def describe(self):
        return {"kind": "piecewise_constant", "scale": self.scale,
                "origin_k": list(self.origin_k), "grid_shape": list(self.grid_shape),
                "values": _enc_cvec(self.values), "d": self.d, "n": self.n}


def indicator_cube(j: int, k, n: int) -> PiecewiseConstantField:
    """The characteristic function of one dyadic cube (scalar field)."""
    k = tuple(int(c) for c in np.atleast_1d(k))
    return PiecewiseConstantField.from_cells(j, {k: np.array([1.0])}, n, 1)


@dataclass(frozen=True)
class BallTruncation(VectorField):
    """Restriction of a field to the inside or outside of a ball at 0."""

    inner: VectorField
    radius: float
    keep: str = "inside"

    def __post_init__(self):
        if self.keep not in ("inside", "outside"):
            raise ValueError("keep must be 'inside' or 'outside'")
        if self.radius <= 0:
            raise ValueError("truncation radius must be positive")

    @property
    def n(self) -> int:
        return self.inner.n

    @property
    def d(self) -> int:
        return self.inner.d

    def eval_batch(self, points):
        pts = self._pts(points)
        vals = self.inner.eval_batch(pts)
        inside = np.sum(pts * pts, axis=1) <= self.radius**2
        mask = inside if self.keep == "inside" else ~inside
        return np.where(mask[:, None], vals, 0.0)

    def support_box(self):
        if self.keep == "inside":
            lo = np.full(self.n, -self.radius)
            hi = np.full(self.n, self.radius)
            inner_box = self.inner.support_box()
            if inner_box is not None:
                lo = np.maximum(lo, inner_box[0])
                hi = np.minimum(hi, inner_box[1])
            return lo, hi
        return self.inner.support_box()

    def singular_points(self):
        pts = list(self.inner.singular_points())
        if self.n == 1:
            # the jump locations; grading makes the 1-d truncation cheap
            pts.extend([np.array([-self.radius]), np.array([self.radius])])
        return pts

    def describe(self):
        return {"kind": "ball_truncation", "base": self.inner.describe(),
                "radius": self.radius, "keep": self.keep}


@dataclass(frozen=True)
class TranslateField(VectorField):
    inner: VectorField
    shift: tuple

    def __post_init__(self):
        object.__setattr__(self, "shift", tuple(float(s) for s in np.atleast_1d(self.shift)))

    @property
    def n(self) -> int:
        return self.inner.n

    @property
    def d(self) -> int:
        return self.inner.d

    def eval_batch(self, points):
        pts = self._pts(points)
        return self.inner.eval_batch(pts - np.asarray(self.shift))

    def support_box(self):
        box = self.inner.support_box()
        if box is None:
            return None
        return box[0] + np.asarray(self.shift), box[1] + np.asarray(self.shift)

    def singular_points(self):
        return [p + np.asarray(self.shift) for p in self.inner.singular_points()]

    def dyadic_scale(self):
        s = self.inner.dyadic_scale()
        if s is None:
            return None
        steps = np.asarray(self.shift) * 2.0**s
        return s if np.all(steps == np.round(steps)) else None

    def gradient(self):
        g = self.inner.gradient()
        return TranslateField(g, self.shift) if g is not None else None

    def describe(self):
        return {"kind": "translate", "base": self.inner.describe(),
                "shift": list(self.shift)}


def translate(f: VectorField, y) -> VectorField:
    """tau_y f with (tau_y f)(x) = f(x - y); compositions are flattened."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if np.all(y == 0.0):
        return f
    if isinstance(f, TranslateField):
        return translate(f.inner, np.asarray(f.shift) + y)
    return TranslateField(f, tuple(y.tolist()))


@dataclass(frozen=True)
class LinearCombinationField(VectorField):
    terms: tuple   # ((coef, field), ...)

    def __post_init__(self):
        if not self.terms:
            raise ValueError("linear combination needs at least one term")
        object.__setattr__(self, "terms",
                           tuple((complex(c), f) for c, f in self.terms))

    @property
    def n(self) -> int:
        return self.terms[0][1].n

    @property
    def d(self) -> int:
        return self.terms[0][1].d

    def eval_batch(self, points):
        pts = self._pts(points)
        out = np.zeros((pts.shape[0], self.d), dtype=complex)
        for coef, f in self.terms:
            out += coef * f.eval_batch(pts)
        return out

    def support_box(self):
        los, his = [], []
        for _, f in self.terms:
            box = f.support_box()
            if box is None:
                return None
            los.append(box[0])
            his.append(box[1])
        return np.min(los, axis=0), np.max(his, axis=0)

    def singular_points(self):
        out = []
        for _, f in self.terms:
            out.extend(f.singular_points())
        return out

    def dyadic_scale(self):
        scales = [f.dyadic_scale() for _, f in self.terms]
        if any(s is None for s in scales):
            return None
        return max(scales)

    def gradient(self):
        grads = [(c, f.gradient()) for c, f in self.terms]
        if any(g is None for _, g in grads):
            return None
        return LinearCombinationField(tuple(grads))

    def describe(self):
        return {"kind": "linear_combination",
                "terms": [[_enc_c(c), f.describe()] for c, f in self.terms]}


def combine(*terms) -> LinearCombinationField:
    """combine((a, f), (b, g), ...) -> a f + b g + ..."""
    return LinearCombinationField(tuple(terms))


def difference(f: VectorField, g: VectorField) -> LinearCombinationField:
    return combine((1.0, f), (-1.0, g))


@dataclass(frozen=True)
class FDGradientField(VectorField):
    """Central finite-difference gradient of a scalar field."""

    inner: VectorField
    step: float = 1e-4

    def __post_init__(self):
        if self.inner.d != 1:
            raise ValueError("gradients are defined for scalar fields")
        if self.step <= 0:
            raise ValueError("finite-difference step must be positive")

    @property
    def n(self) -> int:
        return self.inner.n

    @property
    def d(self) -> int:
        return self.inner.n

    def eval_batch(self, points):
        pts = self._pts(points)
        out = np.empty((pts.shape[0], self.n), dtype=complex)
        for axis in range(self.n):
            e = np.zeros(self.n)
            e[axis] = self.step
            hi = self.inner.eval_batch(pts + e)[:, 0]
            lo = self.inner.eval_batch(pts - e)[:, 0]
            out[:, axis] = (hi - lo) / (2.0 * self.step)
        return out

    def support_box(self):
        box = self.inner.support_box()
        if box is None:
            return None
        return box[0] - self.step, box[1] + self.step

    def singular_points(self):
        return self.inner.singular_points()

    def describe(self):
        return {"kind": "fd_gradient", "base": self.inner.describe(), "step": self.step}


def gradient_field(f: VectorField, step: float = 1e-4):
    """Analytic gradient when the family has one, else central differences.

    Returns (field, step_used) with step_used None for analytic gradients.
    """
    g = f.gradient()
    if g is not None:
        return g, None
    return FDGradientField(f, step), step


# -- config round-trip -------------------------------------------------------

def _enc_c(z: complex):
    z = complex(z)
    return z.real if z.imag == 0.0 else [z.real, z.imag]


def _enc_cvec(vals):
    return [_enc_c(v) for v in vals]


def _dec_c(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    return complex(v)


def field_from_config(cfg: dict) -> VectorField:
    kind = cfg.get("kind")
    if kind == "constant":
        return ConstantField(tuple(_dec_c(v) for v in cfg["value"]), int(cfg["n"]))
    if kind == "coordinate":
        return CoordinateField(int(cfg["axis"]), int(cfg["n"]))
    if kind == "gaussian_bump":
        return GaussianBump(tuple(cfg["center"]), float(cfg["scale"]),
                            tuple(_dec_c(v) for v in cfg["direction"]), int(cfg["n"]))
    if kind == "gaussian_gradient":
        return _GaussianGradient(field_from_config(cfg["bump"]))
    if kind == "power_tail":
        return PowerTail(float(cfg["exponent"]), int(cfg["n"]))
    if kind == "piecewise_constant":
        return PiecewiseConstantField(
            scale=int(cfg["scale"]), origin_k=tuple(int(v) for v in cfg["origin_k"]),
            values=tuple(_dec_c(v) for v in cfg["values"]),
            grid_shape=tuple(int(v) for v in cfg["grid_shape"]),
            d=int(cfg["d"]), n=int(cfg["n"]))
    if kind == "ball_truncation":
        return BallTruncation(field_from_config(cfg["base"]), float(cfg["radius"]),
                              cfg.get("keep", "inside"))
    if kind == "translate":
        return TranslateField(field_from_config(cfg["base"]), tuple(cfg["shift"]))
    if kind == "linear_combination":
        return LinearCombinationField(tuple(
            (_dec_c(c), field_from_config(sub)) for c, sub in cfg["terms"]))
    if kind == "fd_gradient":
        return FDGradientField(field_from_config(cfg["base"]), float(cfg["step"]))
    raise ValueError(f"unknown field kind {kind!r}")
