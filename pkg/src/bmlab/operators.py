"""Averaging operators, their boundedness diagnostics, and the exponent
ledger.

The dyadic averaging operator at level ``a`` replaces a field by its
mean on every cube of side 2^a.  Means are cached per (field, a,
window); linear combinations are averaged term by term and
piecewise-constant fields by direct lookup, so linearity and
idempotence of the operator are exact on cached values, not just up to
quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dyadic import Box, SCALE_CAP, as_box, containing_cube, cube_geometry, \
    scale_cube_grid
from .fields import LinearCombinationField, PiecewiseConstantField, VectorField
from .quadrature import QuadratureSpec, integrate_cells
from .reducing import DimensionEstimate
from .spaces import SpaceParams, bm_norm, lp_norm


def _cube_means(f: VectorField, ks: np.ndarray, corners: np.ndarray,
                side: float, qspec: QuadratureSpec) -> np.ndarray:
    """Means of f over equal-side cubes, (C, d) complex.

    Exact shortcuts: linear combinations recurse term by term, and a
    field that is piecewise constant at or above the cube scale is read
    off at cube centers.
    """
    if isinstance(f, LinearCombinationField):
        out = np.zeros((ks.shape[0], f.d), dtype=complex)
        for coef, part in f.terms:
            out += coef * _cube_means(part, ks, corners, side, qspec)
        return out
    scale = f.dyadic_scale()
    j = -int(round(math.log2(side)))
    if scale is not None and j >= scale:
        return f.eval_batch(corners + side / 2.0)

    out = np.zeros((ks.shape[0], f.d), dtype=complex)
    box = f.support_box()
    lo = corners if box is None else np.maximum(corners, np.asarray(box[0]))
    hi = corners + side if box is None else np.minimum(corners + side,
                                                       np.asarray(box[1]))
    ext = hi - lo
    live = np.all(ext > 0, axis=1)
    if not np.any(live):
        return out
    sel = np.nonzero(live)[0]
    vals, _, _, _ = integrate_cells(
        lambda pts: f.eval_batch(pts), lo[sel], ext[sel], qspec,
        singular_points=f.singular_points())
    out[sel] = vals / side**f.n
    return out


@dataclass
class AveragingPlan:
    """Cached cube means of one field on the D_{-a} cubes of a window."""

    a: int
    side: float
    field: VectorField
    means: dict   # k-tuple -> (d,) complex

    def as_field(self) -> PiecewiseConstantField:
        return PiecewiseConstantField.from_cells(-self.a, self.means,
                                                 self.field.n, self.field.d)


def build_averaging_plan(f: VectorField, a: int, spatial_radius: float,
                         qspec: QuadratureSpec) -> AveragingPlan:
    """Means of f over the D_{-a} cubes meeting the ball of the given
    radius.

    The field's support must be inside the ball: cubes beyond it are
    omitted from the cache, and the averaged field treats them as zero,
    which is only exact when they carry no mass.
    """
    if abs(a) > SCALE_CAP:
        raise ValueError(f"averaging level must satisfy |a| <= {SCALE_CAP}")
    box = f.support_box()
    if box is None:
        raise ValueError("dyadic averaging needs a field with bounded support")
    if np.any(np.abs(box[0]) > spatial_radius) or np.any(np.abs(box[1]) > spatial_radius):
        raise ValueError("window does not cover the field support")
    j = -a
    ks, corners = scale_cube_grid(j, spatial_radius, f.n)
    side = 2.0**a
    means = _cube_means(f, ks, corners, side, qspec)
    table = {tuple(int(c) for c in row): means[i] for i, row in enumerate(ks)}
    return AveragingPlan(a=a, side=side, field=f, means=table)


_plan_cache: dict = {}


def dyadic_average(f: VectorField, a: int, spatial_radius: float,
                   qspec: QuadratureSpec) -> PiecewiseConstantField:
    """E_{d,a} f: the field replaced by its mean on each cube of side 2^a."""
    key = (f, a, float(spatial_radius), qspec)
    plan = _plan_cache.get(key)
    if plan is None:
        plan = build_averaging_plan(f, a, spatial_radius, qspec)
        _plan_cache.setdefault(key, plan)
    return plan.as_field()


def clear_average_cache():
    _plan_cache.clear()


@dataclass(frozen=True)
class CollectionAverageField(VectorField):
    """Average over an arbitrary disjoint cube collection: the mean on
    each cube, zero off the collection."""

    boxes: tuple
    values: tuple   # (d,)-tuples, aligned with boxes
    n: int
    d: int

    def eval_batch(self, points):
        pts = self._pts(points)
        out = np.zeros((pts.shape[0], self.d), dtype=complex)
        for box, val in zip(self.boxes, self.values):
            lo = np.asarray(box.corner)
            inside = np.all((pts >= lo) & (pts < lo + box.side), axis=1)
            if np.any(inside):
                out[inside] = np.asarray(val, dtype=complex)
        return out

    def describe(self):
        return {"kind": "collection_average", "boxes": len(self.boxes)}


def collection_average(f: VectorField, cubes,
                       qspec: QuadratureSpec) -> CollectionAverageField:
    """Averaging operator over an explicit pairwise-disjoint cube list."""
    boxes = [as_box(c) for c in cubes]
    for i in range(len(boxes)):
        for jj in range(i + 1, len(boxes)):
            a, b = boxes[i], boxes[jj]
            if all(a.corner[ax] < b.corner[ax] + b.side and
                   b.corner[ax] < a.corner[ax] + a.side for ax in range(a.n)):
                raise ValueError("averaging collection cubes overlap")
    vals = []
    for box in boxes:
        ks = np.zeros((1, f.n), dtype=np.int64)
        mean = _cube_means(f, ks, np.asarray([box.corner]), box.side, qspec)[0]
        vals.append(tuple(mean.tolist()))
    return CollectionAverageField(boxes=tuple(boxes), values=tuple(vals),
                                  n=f.n, d=f.d)


# -- boundedness diagnostics -------------------------------------------------

def avg_lp_bound_check(spec, p: float, members, a_range, spatial_radius: float,
                       qspec: QuadratureSpec) -> dict:
    """Ratios ||E_{d,a} f||_{L^p(W)} / ||f||_{L^p(W)} over the window.

    ``members`` is a list of (id, field).  Zero-norm members are
    skipped.  The report flags monotone growth of the per-a maximum
    beyond 10x across the range (evidence the weight is not in the
    class).
    """
    rows = []
    per_a_max: dict = {}
    for a in a_range:
        region = _region_cubes(members, a, spatial_radius)
        for fid, f in members:
            denom = lp_norm(f, spec, p, region, qspec)
            if denom == 0.0:
                continue
            avg = dyadic_average(f, a, spatial_radius, qspec)
            num = lp_norm(avg, spec, p, region, qspec)
            ratio = num / denom
            rows.append({"family_id": fid, "a": a, "ratio": ratio})
            per_a_max[a] = max(per_a_max.get(a, 0.0), ratio)
    ordered = [per_a_max[a] for a in a_range if a in per_a_max]
    growing = len(ordered) >= 2 and all(
        b > a for a, b in zip(ordered, ordered[1:])) and \
        ordered[-1] > 10.0 * ordered[0]
    return {"rows": rows, "max_ratio": max(per_a_max.values()) if per_a_max else 0.0,
            "per_a_max": {a: per_a_max[a] for a in per_a_max},
            "unbounded_growth_flag": growing}


def _region_cubes(members, a: int, spatial_radius: float):
    n = members[0][1].n
    ks, corners = scale_cube_grid(-a, spatial_radius, n)
    side = 2.0**a
    return [Box(tuple(c.tolist()), side) for c in corners]


@dataclass
class ExponentLedger:
    """Pure arithmetic of the averaging-boundedness hypothesis."""

    n: int
    p: float
    t: float
    r: float
    d_tilde: float
    dual_d_tilde: float | None
    beta_tilde: float
    condition_value: float

    @staticmethod
    def compute(n: int, params: SpaceParams,
                dims: DimensionEstimate) -> "ExponentLedger":
        p = params.p
        if p == 1:
            beta_tilde = float(n)
        else:
            if dims.dual_d_tilde is None:
                raise ValueError("dual dimension required when p > 1")
            pp = p / (p - 1.0)
            beta_tilde = n + dims.dual_d_tilde * p / pp
        cv = _condition_value(n, params, dims.d_tilde, beta_tilde)
        return ExponentLedger(n=n, p=p, t=params.t, r=params.r,
                              d_tilde=dims.d_tilde,
                              dual_d_tilde=dims.dual_d_tilde,
                              beta_tilde=beta_tilde, condition_value=cv)

    @property
    def satisfied(self) -> bool:
        if math.isinf(self.r):
            return self.condition_value <= 0.0
        return self.condition_value < 0.0

    @property
    def at_equality(self) -> bool:
        return math.isinf(self.r) and self.condition_value == 0.0

    def recompute_condition(self) -> float:
        params = SpaceParams(self.p, self.t, self.r)
        return _condition_value(self.n, params, self.d_tilde, self.beta_tilde)

    def to_json_dict(self) -> dict:
        return {"n": self.n, "p": self.p, "t": self.t,
                "r": "inf" if math.isinf(self.r) else self.r,
                "d_tilde": self.d_tilde, "dual_d_tilde": self.dual_d_tilde,
                "beta_tilde": self.beta_tilde,
                "condition_value": self.condition_value,
                "satisfied": self.satisfied}

    @staticmethod
    def from_json_dict(obj: dict) -> "ExponentLedger":
        r = obj["r"]
        return ExponentLedger(
            n=int(obj["n"]), p=float(obj["p"]), t=float(obj["t"]),
            r=math.inf if r in ("inf", None) else float(r),
            d_tilde=float(obj["d_tilde"]),
            dual_d_tilde=None if obj["dual_d_tilde"] is None else float(obj["dual_d_tilde"]),
            beta_tilde=float(obj["beta_tilde"]),
            condition_value=float(obj["condition_value"]))


def _condition_value(n: int, params: SpaceParams, d_tilde: float,
                     beta_tilde: float) -> float:
    p, t, r = params.p, params.t, params.r
    if math.isinf(r):
        return d_tilde / p - n / p - beta_tilde * (1.0 / t - 1.0 / p)
    return -n * r / p + d_tilde * r / p + n - beta_tilde * r * (1.0 / t - 1.0 / p)


def exponent_ledger(n: int, params: SpaceParams,
                    dims: DimensionEstimate) -> ExponentLedger:
    return ExponentLedger.compute(n, params, dims)


def avg_bm_bound_check(spec, params: SpaceParams, members, a_range, window,
                       qspec: QuadratureSpec,
                       ledger: ExponentLedger | None = None) -> dict:
    """Ratios ||E_{d,a} f|| / ||f|| in the Bourgain-Morrey norm.

    When the exponent-ledger hypothesis holds, the per-a maximum ratio
    must stay bounded and stable (the last three a values within 20% of
    each other); the report carries the observed constant.  With the
    hypothesis violated the sweep still runs, labeled accordingly.
    """
    rows = []
    per_a_max: dict = {}
    for a in a_range:
        for fid, f in members:
            denom = bm_norm(f, spec, params, window, qspec).value
            if denom == 0.0:
                continue
            avg = dyadic_average(f, a, window.spatial_radius, qspec)
            num = bm_norm(avg, spec, params, window, qspec).value
            ratio = num / denom
            rows.append({"family_id": fid, "a": a, "ratio": ratio})
            per_a_max[a] = max(per_a_max.get(a, 0.0), ratio)
    ordered = [per_a_max[a] for a in a_range if a in per_a_max]
    c_obs = max(ordered) if ordered else 0.0
    if len(ordered) >= 3:
        last = ordered[-3:]
        stable = (max(last) - min(last)) <= 0.2 * max(last)
    else:
        stable = False
    return {"rows": rows, "c_obs": c_obs,
            "per_a_max": {a: per_a_max[a] for a in per_a_max},
            "stable": stable,
            "hypothesis_satisfied": None if ledger is None else ledger.satisfied,
            "hypothesis_at_equality": False if ledger is None else ledger.at_equality}


def lebesgue_diff_check(f: VectorField, points, j_max: int,
                        qspec: QuadratureSpec, j_min: int = 0) -> list[dict]:
    """Mean-convergence curves e_j = |E_{Q_j(x)} f(x) - f(x)|.

    For each sample point, Q_j(x) is the containing dyadic cube at scale
    j.  The fitted per-step decay rate 2^slope is reported; smooth
    fields show first-order convergence (rate ~ 1/2).  Points on the
    field's declared singular set are rejected.
    """
    results = []
    sing = f.singular_points()
    for x in points:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if any(np.allclose(x, s) for s in sing):
            raise ValueError("sample point lies on the field's singular set")
        fx = f.eval_one(x)
        errors = []
        for j in range(j_min, j_max + 1):
            idx = containing_cube(x, j)
            corner, side, _ = cube_geometry(idx)
            mean = _cube_means(f, np.asarray([idx.k]), corner[None, :], side,
                               qspec)[0]
            errors.append(float(np.linalg.norm(mean - fx)))
        errs = np.asarray(errors)
        ok = errs > 0
        if np.count_nonzero(ok) >= 2:
            js = np.arange(j_min, j_max + 1, dtype=float)[ok]
            slope = np.polyfit(js, np.log2(errs[ok]), 1)[0]
            rate = float(2.0**slope)
        else:
            rate = 0.0
        results.append({"point": x.tolist(), "errors": errors, "rate": rate})
    return results
