"""Bourgain-Morrey norms over matrix weights, and the embedding checks.

The norm aggregates, in l^r over all dyadic cubes of a finite window,
the terms

    W(Q)^(1/t - 1/p) * (integral over Q of |W^(1/p) f|^p)^(1/p),

where W(Q) is the mass of ||W|| over Q.  The lattice is infinite in the
underlying definition; the window truncates it, and the report carries
per-scale masses plus a two-layer convergence check at both the fine
and the coarse end so truncation quality is always visible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dyadic import Box, DyadicIndex, LatticeWindow, SCALE_CAP, as_box, scale_cube_grid
from .fields import VectorField
from .linalg import NumericError
from .quadrature import (QuadratureSpec, integrate_cells, integrate_cube,
                         p_integral, weight_mass)
from .weights import MatrixWeightSpec

INF = math.inf


@dataclass(frozen=True)
class SpaceParams:
    """Exponent triple (p, t, r); exactly one validity regime applies.

    finite r:   1 <= p < t < r < inf
    infinite r: 1 <= p <= t,  r = inf

    The quasi-norm range p < 1 admitted by the definitions is rejected:
    the theory this toolkit exercises is stated for p >= 1.
    """

    p: float
    t: float
    r: float

    def __post_init__(self):
        p, t, r = self.p, self.t, self.r
        if p < 1:
            raise ValueError("space parameters require p >= 1")
        if math.isinf(r):
            if not p <= t:
                raise ValueError("infinite-r regime requires p <= t")
        else:
            if not (p < t < r):
                raise ValueError("finite-r regime requires p < t < r")

    @property
    def finite_r(self) -> bool:
        return not math.isinf(self.r)

    @property
    def scaling_exponent(self) -> float:
        return 1.0 / self.t - 1.0 / self.p

    def to_json_dict(self) -> dict:
        return {"p": self.p, "t": self.t, "r": "inf" if math.isinf(self.r) else self.r}

    @staticmethod
    def from_json_dict(obj: dict) -> "SpaceParams":
        r = obj["r"]
        return SpaceParams(float(obj["p"]), float(obj["t"]),
                           INF if r in ("inf", None) else float(r))


@dataclass
class NormReport:
    """Value of a windowed norm plus the evidence for trusting it."""

    value: float
    per_scale: dict            # j -> l^r mass of the layer (sup for r=inf)
    tail_estimate: float
    window: LatticeWindow
    converged: bool
    quadrature_converged: bool = True
    terms: list | None = None  # optional (j, k, term) rows

    def to_json_dict(self) -> dict:
        return {
            "value": self.value,
            "per_scale": {str(j): v for j, v in sorted(self.per_scale.items())},
            "tail_estimate": self.tail_estimate,
            "window": {"j_min": self.window.j_min, "j_max": self.window.j_max,
                       "spatial_radius": self.window.spatial_radius, "n": self.window.n},
            "converged": self.converged,
            "quadrature_converged": self.quadrature_converged,
        }

    def csv_rows(self):
        """(j, k_hash, term) rows; requires the norm was run with
        collect_terms."""
        if self.terms is None:
            raise ValueError("norm was computed without collect_terms")
        for j, k, term in self.terms:
            yield j, "_".join(str(c) for c in k), term


def window_for_family(support_radius: float, m: int, a: int, n: int) -> LatticeWindow:
    """Default window for a compactly supported family and parameters (m, a).

    Coarsest scale -m-2 (cubes four times the box [-2^m, 2^m)^n), finest
    six scales below the averaging partition of side 2^a.
    """
    j_max = min(-a + 6, SCALE_CAP)
    return LatticeWindow(j_min=-m - 2, j_max=j_max,
                         spatial_radius=4.0 * support_radius, n=n)


def _support_clip(f: VectorField):
    box = f.support_box()
    if box is None:
        return None, None
    return np.asarray(box[0], dtype=float), np.asarray(box[1], dtype=float)


def _layer_reduce(params: SpaceParams, terms: np.ndarray) -> float:
    if terms.size == 0:
        return 0.0
    if params.finite_r:
        return math.fsum((terms**params.r).tolist())
    return float(np.max(terms))


def _masses_for(spec: MatrixWeightSpec, corners: np.ndarray, side: float,
                qspec: QuadratureSpec, active: np.ndarray):
    """W(Q) for the active cubes of one scale layer (others left at 0)."""
    n = corners.shape[1]
    masses = np.zeros(corners.shape[0])
    if spec.is_identity_like():
        masses[active] = side**n
        return masses, True
    if not np.any(active):
        return masses, True
    sel = np.nonzero(active)[0]
    vals, _, _, conv = integrate_cells(
        lambda pts: spec.norm_batch(pts), corners[sel], np.full(sel.size, side),
        qspec, singular_points=spec.singular_points())
    masses[sel] = vals[:, 0].real
    return masses, bool(np.all(conv))


def bm_norm(f: VectorField, spec: MatrixWeightSpec, params: SpaceParams,
            window: LatticeWindow, qspec: QuadratureSpec, *,
            conv_rtol: float = 1e-5, collect_terms: bool = False,
            cube_scaling=None) -> NormReport:
    """Windowed matrix-weighted Bourgain-Morrey norm of a vector field.

    cube_scaling optionally replaces the cube mass W(Q) by a caller
    supplied value (signature cube_scaling(DyadicIndex) -> float); this
    is the hook for the reducing-operator variant of the norm, which
    uses (||A_Q||^p |Q|) in place of W(Q).
    """
    if f.n != window.n or f.n != spec.n:
        raise ValueError("field, weight, and window dimensions must agree")
    if f.d != spec.d:
        raise ValueError("field and weight must share the vector dimension d")
    clip_lo, clip_hi = _support_clip(f)
    sing = list(spec.singular_points()) + list(f.singular_points())
    p = params.p
    exp = params.scaling_exponent

    def integrand(pts):
        vals = f.eval_batch(pts)
        weighted = spec.apply_power_batch(pts, 1.0 / p, vals)
        sq = np.sum(np.abs(weighted) ** 2, axis=1)
        return sq if p == 2 else sq ** (p / 2.0)

    per_scale: dict[int, float] = {}
    term_rows: list | None = [] if collect_terms else None
    quad_ok = True
    field_scale = f.dyadic_scale()
    exact_cells = field_scale is not None and spec.is_identity_like()

    for j in window.scales():
        ks, corners = scale_cube_grid(j, window.spatial_radius, window.n,
                                      clip_lo, clip_hi)
        if ks.shape[0] == 0:
            per_scale[j] = 0.0
            continue
        side = 2.0 ** (-j)
        if exact_cells and j >= field_scale:
            # the integrand is constant on each cube: one evaluation is exact
            centers = corners + side / 2.0
            vals = f.eval_batch(centers)
            amp = np.sum(np.abs(vals) ** 2, axis=1) ** (p / 2.0)
            p_vals = amp * side**window.n
        else:
            # integrate each cube over its intersection with the support box
            lo = corners if clip_lo is None else np.maximum(corners, clip_lo)
            hi = corners + side if clip_hi is None else np.minimum(corners + side, clip_hi)
            ext = hi - lo
            pos = np.all(ext > 0, axis=1)
            p_vals = np.zeros(ks.shape[0])
            if np.any(pos):
                sel = np.nonzero(pos)[0]
                vals, _, _, p_conv = integrate_cells(integrand, lo[sel], ext[sel],
                                                     qspec, singular_points=sing)
                p_vals[sel] = np.maximum(vals[:, 0].real, 0.0)
                quad_ok &= bool(np.all(p_conv))
        active = p_vals > 0.0

        if cube_scaling is not None:
            masses = np.zeros(ks.shape[0])
            for i in np.nonzero(active)[0]:
                masses[i] = cube_scaling(DyadicIndex(j, tuple(int(c) for c in ks[i])))
        else:
            masses, mass_conv = _masses_for(spec, corners, side, qspec, active)
            quad_ok &= mass_conv
        if np.any(active & (masses <= 0.0)):
            raise NumericError("cube with positive field mass has zero weight mass")

        terms = np.zeros(ks.shape[0])
        nz = np.nonzero(active)[0]
        if nz.size:
            terms[nz] = masses[nz] ** exp * p_vals[nz] ** (1.0 / p)
        per_scale[j] = _layer_reduce(params, terms)
        if collect_terms:
            for i in nz:
                term_rows.append((j, tuple(int(c) for c in ks[i]), float(terms[i])))

    scales = sorted(per_scale)
    layer_vals = [per_scale[j] for j in scales]
    if params.finite_r:
        total = math.fsum(layer_vals)
        value = total ** (1.0 / params.r) if total > 0 else 0.0
    else:
        value = max(layer_vals) if layer_vals else 0.0

    converged, tail = _window_convergence(params, scales, per_scale, value, conv_rtol)
    return NormReport(value=value, per_scale=per_scale, tail_estimate=tail,
                      window=window, converged=converged,
                      quadrature_converged=quad_ok, terms=term_rows)


def _window_convergence(params: SpaceParams, scales, per_scale, value, conv_rtol):
    """Two-layer rule at both window ends.

    Finite r: the last two layers at each end must each carry less than
    conv_rtol of the total l^r mass.  r = inf: dropping the last two
    layers at each end must not change the sup by more than conv_rtol
    relatively.
    """
    if value == 0.0:
        return True, 0.0
    if len(scales) < 5:
        return False, value
    if params.finite_r:
        total = value**params.r
        fine = [per_scale[j] for j in scales[-2:]]
        coarse = [per_scale[j] for j in scales[:2]]
        ok = all(v <= conv_rtol * total for v in fine + coarse)
        tail = (per_scale[scales[-1]] + per_scale[scales[0]]) ** (1.0 / params.r)
        return ok, tail
    inner = [per_scale[j] for j in scales[2:-2]]
    ok = bool(inner) and max(inner) >= value * (1.0 - conv_rtol)
    tail = max(per_scale[scales[-1]], per_scale[scales[0]])
    return ok, tail


def scalar_bm_norm(f: VectorField, omega: MatrixWeightSpec, params: SpaceParams,
                   window: LatticeWindow, qspec: QuadratureSpec, *,
                   conv_rtol: float = 1e-5) -> NormReport:
    """Scalar-weighted Bourgain-Morrey norm (d = 1), assembled cube by cube.

    Kept as an independent, deliberately simple code path (per-cube
    integrals, explicit loops) so it can serve as an oracle for bm_norm
    in the d = 1 case.
    """
    if omega.d != 1 or f.d != 1:
        raise ValueError("scalar norm requires a d=1 weight and field")
    clip_lo, clip_hi = _support_clip(f)
    sing = list(omega.singular_points()) + list(f.singular_points())
    p = params.p
    exp = params.scaling_exponent
    per_scale: dict[int, float] = {}
    quad_ok = True

    def integrand(pts):
        vals = np.abs(f.eval_batch(pts)[:, 0]) ** p
        return vals * omega.norm_batch(pts)

    for j in window.scales():
        ks, corners = scale_cube_grid(j, window.spatial_radius, window.n,
                                      clip_lo, clip_hi)
        side = 2.0 ** (-j)
        terms = []
        for row, corner in zip(ks, corners):
            lo = corner if clip_lo is None else np.maximum(corner, clip_lo)
            hi = corner + side if clip_hi is None else np.minimum(corner + side, clip_hi)
            if np.any(hi - lo <= 0):
                continue
            vals, errs, _, conv = integrate_cells(integrand, lo[None, :],
                                                  (hi - lo)[None, :], qspec,
                                                  singular_points=sing)
            quad_ok &= bool(conv[0])
            value = float(vals[0, 0].real)
            if value <= 0.0:
                continue
            mass = weight_mass(omega, Box(tuple(corner.tolist()), side), qspec)
            terms.append(mass**exp * value ** (1.0 / p))
        per_scale[j] = _layer_reduce(params, np.asarray(terms))

    scales = sorted(per_scale)
    layer_vals = [per_scale[j] for j in scales]
    if params.finite_r:
        total = math.fsum(layer_vals)
        value = total ** (1.0 / params.r) if total > 0 else 0.0
    else:
        value = max(layer_vals) if layer_vals else 0.0
    converged, tail = _window_convergence(params, scales, per_scale, value, conv_rtol)
    return NormReport(value=value, per_scale=per_scale, tail_estimate=tail,
                      window=window, converged=converged, quadrature_converged=quad_ok)


def _assert_disjoint(boxes: list[Box]):
    sides = {b.side for b in boxes}
    if len(sides) == 1 and len({b.corner for b in boxes}) == len(boxes):
        # equal-side cubes on the dyadic grid are disjoint iff distinct
        side = next(iter(sides))
        on_grid = all(
            float(c / side) == round(c / side) for b in boxes for c in b.corner)
        if on_grid:
            return
    for i in range(len(boxes)):
        for jj in range(i + 1, len(boxes)):
            a, b = boxes[i], boxes[jj]
            overlap = all(
                a.corner[ax] < b.corner[ax] + b.side and
                b.corner[ax] < a.corner[ax] + a.side
                for ax in range(a.n))
            if overlap:
                raise ValueError("region cubes overlap")


def lp_norm(f: VectorField, spec: MatrixWeightSpec, p: float, region,
            qspec: QuadratureSpec) -> float:
    """L^p(W) norm over a disjoint union of cubes."""
    boxes = [as_box(b) for b in region]
    _assert_disjoint(boxes)
    parts = [p_integral(spec, f, p, b, qspec).value for b in boxes]
    return math.fsum(parts) ** (1.0 / p)


@dataclass
class SobolevNormReport:
    value: float
    function_term: float
    gradient_term: float
    fd_step: float | None


def sobolev_norm(f: VectorField, spec: MatrixWeightSpec, params: SpaceParams,
                 window: LatticeWindow, qspec: QuadratureSpec,
                 fd_step: float = 1e-4) -> SobolevNormReport:
    """Sobolev-variant norm: scalar norm of f under ||W|| plus the
    Bourgain-Morrey norm of the gradient under W itself.

    Requires a scalar field and a weight with d = n (the gradient lives
    in C^n).  The gradient is analytic when the family provides one,
    otherwise central differences at fd_step (reported).
    """
    from .fields import gradient_field

    if f.d != 1:
        raise ValueError("the Sobolev-variant norm is defined for scalar fields")
    if spec.d != spec.n:
        raise ValueError("gradient term needs a weight with d = n")
    omega = MatrixWeightSpec.operator_norm_of(spec)
    fun = scalar_bm_norm(f, omega, params, window, qspec)
    grad, used = gradient_field(f, fd_step)
    gr = bm_norm(grad, spec, params, window, qspec)
    return SobolevNormReport(value=fun.value + gr.value,
                             function_term=fun.value,
                             gradient_term=gr.value,
                             fd_step=used)


# -- embedding checks --------------------------------------------------------

def _covering_cubes(window: LatticeWindow) -> list[Box]:
    """At most 2^n orthant cubes jointly covering the whole window region."""
    extent = window.spatial_radius + 2.0 ** (-window.j_min)
    level = max(int(math.ceil(math.log2(extent))), -SCALE_CAP)
    side = 2.0**level
    out = []
    for bits in range(1 << window.n):
        corner = tuple((-side if (bits >> ax) & 1 else 0.0) for ax in range(window.n))
        out.append(Box(corner, side))
    return out


def embedding_check(suite: list[VectorField], spec: MatrixWeightSpec, cases,
                    window: LatticeWindow, qspec: QuadratureSpec,
                    slack: float = 1.01) -> dict:
    """Check the continuous-embedding inequalities on a function suite.

    Cases (hypotheses are validated before any computation):
      {"kind": "r_monotone", "p", "t", "r1", "r2"}   r1 < r2
      {"kind": "p_monotone", "p1", "p2", "t", "r"}   p1 < p2
      {"kind": "linf_chain", "p", "t"}               r = inf chain

    Each inequality must hold up to the quadrature slack factor.
    Returns a report dict with per-case worst ratios.
    """
    for case in cases:
        kind = case["kind"]
        if kind == "r_monotone":
            if not case["r1"] < case["r2"]:
                raise ValueError("r_monotone requires r1 < r2")
            SpaceParams(case["p"], case["t"], case["r1"])
            SpaceParams(case["p"], case["t"], case["r2"])
        elif kind == "p_monotone":
            if not case["p1"] < case["p2"]:
                raise ValueError("p_monotone requires p1 < p2")
            SpaceParams(case["p1"], case["t"], case["r"])
            SpaceParams(case["p2"], case["t"], case["r"])
        elif kind == "linf_chain":
            SpaceParams(case["p"], case["t"], INF)
            if not case["p"] <= case["t"]:
                raise ValueError("linf_chain requires p <= t")
        else:
            raise ValueError(f"unknown embedding case {kind!r}")

    results = []
    passed = True
    for case in cases:
        kind = case["kind"]
        worst = 0.0
        for f in suite:
            if kind == "r_monotone":
                lhs = bm_norm(f, spec, SpaceParams(case["p"], case["t"], case["r2"]),
                              window, qspec).value
                rhs = bm_norm(f, spec, SpaceParams(case["p"], case["t"], case["r1"]),
                              window, qspec).value
            elif kind == "p_monotone":
                lhs = bm_norm(f, spec, SpaceParams(case["p1"], case["t"], case["r"]),
                              window, qspec).value
                rhs = bm_norm(f, spec, SpaceParams(case["p2"], case["t"], case["r"]),
                              window, qspec).value
            else:
                lhs, rhs = _linf_chain_sides(f, spec, case, window, qspec)
            if rhs == 0.0 and lhs == 0.0:
                continue
            ratio = lhs / rhs if rhs > 0 else math.inf
            worst = max(worst, ratio)
        ok = worst <= slack
        passed &= ok
        results.append({"case": dict(case), "worst_ratio": worst, "pass": ok})
    return {"slack": slack, "pass": passed, "cases": results}


def _linf_chain_sides(f, spec, case, window, qspec):
    """Worse of the two r = inf chain ratios for one field."""
    params = SpaceParams(case["p"], case["t"], INF)
    cover = _covering_cubes(window)
    bm = bm_norm(f, spec, params, window, qspec).value
    lt = lp_norm(f, spec, case["t"], cover, qspec)
    ratio_a = (bm, lt)

    lp_local = lp_norm(f, spec, case["p"], cover, qspec)
    const = math.fsum(
        weight_mass(spec, b, qspec) ** (1.0 / case["p"] - 1.0 / case["t"])
        for b in cover)
    ratio_b = (lp_local, const * bm)

    # report the worse (largest) of the two lhs/rhs pairs
    val_a = ratio_a[0] / ratio_a[1] if ratio_a[1] > 0 else (0.0 if ratio_a[0] == 0 else math.inf)
    val_b = ratio_b[0] / ratio_b[1] if ratio_b[1] > 0 else (0.0 if ratio_b[0] == 0 else math.inf)
    return (ratio_a if val_a >= val_b else ratio_b)
