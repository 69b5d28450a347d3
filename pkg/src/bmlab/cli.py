"""Scenario runner: load a JSON config, execute one task, write reports.

    bm-lab <task> --config cfg.json [--out DIR] [--seed N] [--workers K]

Tasks: norm, reduce, apclass, avgop, compactness, counterexample,
embeddings.  Exit codes: 0 on completion (negative verdicts included),
2 on config/schema violations, 3 on numeric failure (a partial report
is still written when possible).

Reports are canonical JSON plus one CSV per curve; reruns with the same
config and seed are byte-identical regardless of the worker count
(workers are an execution knob, deliberately outside the hashed
config).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .compactness import FunctionFamily, certify, counterexample_remark
from .dyadic import Box, DyadicIndex, LatticeWindow, as_box
from .fields import field_from_config
from .linalg import NumericError
from .operators import ExponentLedger, avg_bm_bound_check, avg_lp_bound_check, \
    exponent_ledger
from .quadrature import QuadratureError, QuadratureSpec
from .reducing import ap_characteristic, ap_dimension, norm_mass_equiv, \
    reducing_operator, verify_reducing, SUP_LOWER_BOUND_NOTE
from .reporting import config_hash, csv_text, version_string, write_csv, \
    write_json_report
from .spaces import SpaceParams, bm_norm, embedding_check
from .weights import MatrixWeightSpec, WeightDomainError

TASKS = ("norm", "reduce", "apclass", "avgop", "compactness",
         "counterexample", "embeddings")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class ConfigError(ValueError):
    """The scenario config violates the schema."""


def _require(cfg: dict, key: str, context: str = "config"):
    if key not in cfg:
        raise ConfigError(f"{context} is missing required key {key!r}")
    return cfg[key]


def _parse_window(obj: dict) -> LatticeWindow:
    try:
        return LatticeWindow(j_min=int(_require(obj, "j_min", "window")),
                             j_max=int(_require(obj, "j_max", "window")),
                             spatial_radius=float(_require(obj, "spatial_radius", "window")),
                             n=int(_require(obj, "n", "window")))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid window: {exc}") from exc


def _parse_quadrature(obj: dict | None) -> QuadratureSpec:
    if obj is None:
        return QuadratureSpec()
    try:
        return QuadratureSpec(**{k: obj[k] for k in obj})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid quadrature spec: {exc}") from exc


def _parse_params(obj: dict) -> SpaceParams:
    try:
        return SpaceParams.from_json_dict(obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid space parameters: {exc}") from exc


def _parse_weight(obj: dict) -> MatrixWeightSpec:
    try:
        return MatrixWeightSpec.from_json_dict(obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid weight spec: {exc}") from exc


def _parse_field(obj: dict):
    try:
        return field_from_config(obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid field config: {exc}") from exc


def _parse_cube(obj) -> Box:
    if isinstance(obj, dict) and "j" in obj:
        return as_box(DyadicIndex(int(obj["j"]), tuple(int(c) for c in obj["k"])))
    if isinstance(obj, dict) and "corner" in obj:
        return Box(tuple(float(c) for c in obj["corner"]), float(obj["side"]))
    raise ConfigError(f"cube must be {{j, k}} or {{corner, side}}, got {obj!r}")


def family_from_config(obj: dict) -> FunctionFamily:
    kind = _require(obj, "kind", "family")
    if kind == "singleton":
        return FunctionFamily.singleton(_parse_field(_require(obj, "field", "family")))
    if kind == "list":
        members = [(m["id"], _parse_field(m["field"]))
                   for m in _require(obj, "members", "family")]
        try:
            return FunctionFamily(members, generator="list")
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if kind == "translates":
        base = _parse_field(_require(obj, "base", "family"))
        shifts = _require(obj, "shifts", "family")
        if not shifts:
            raise ConfigError("translates family needs at least one shift")
        return FunctionFamily.translates(base, [tuple(s) for s in shifts])
    if kind == "truncation_tails":
        return FunctionFamily.truncation_tails(
            float(_require(obj, "t", "family")),
            [int(j) for j in _require(obj, "j_list", "family")],
            int(_require(obj, "n", "family")))
    raise ConfigError(f"unknown family kind {kind!r}")


# -- task handlers -----------------------------------------------------------

def _task_norm(cfg, qspec, seed, workers):
    weight = _parse_weight(_require(cfg, "weight"))
    params = _parse_params(_require(cfg, "params"))
    window = _parse_window(_require(cfg, "window"))
    field = _parse_field(_require(cfg, "field"))
    rep = bm_norm(field, weight, params, window, qspec, collect_terms=True)
    report = {"task": "norm", "norm": rep.to_json_dict()}
    rows = list(rep.csv_rows())
    return report, {"terms": (["j", "k_hash", "term"], rows)}


def _task_reduce(cfg, qspec, seed, workers):
    weight = _parse_weight(_require(cfg, "weight"))
    p = float(_require(cfg, "p"))
    method = cfg.get("method", "exact_p2" if p == 2 else "mvee")
    cubes = [_parse_cube(c) for c in _require(cfg, "cubes")]
    n_verify = int(cfg.get("verify_dirs", 128))
    entries = []
    for box in cubes:
        op = reducing_operator(weight, box, p, method, qspec, seed=seed)
        c1, c2 = verify_reducing(op, weight, n_verify, qspec, seed=seed + 1)
        entries.append({
            "cube": {"corner": list(box.corner), "side": box.side},
            "matrix": [[[z.real, z.imag] for z in row] for row in op.matrix],
            "certified_c1": op.certified_c1, "certified_c2": op.certified_c2,
            "empirical_c1": c1, "empirical_c2": c2,
            "norm_mass_ratio": norm_mass_equiv(weight, box, p, qspec,
                                               method=method, seed=seed),
        })
    report = {"task": "reduce", "p": p, "method": method, "operators": entries}
    return report, {}


def _task_apclass(cfg, qspec, seed, workers):
    weight = _parse_weight(_require(cfg, "weight"))
    p = float(_require(cfg, "p"))
    family = [_parse_cube(c) for c in _require(cfg, "family")]
    base = [_parse_cube(c) for c in cfg.get("base_cubes", family)]
    i_max = int(cfg.get("i_max", 4))
    n_dirs = int(cfg.get("n_dirs", 32))
    est = ap_characteristic(weight, p, family, qspec)
    dims = ap_dimension(weight, p, base, i_max, qspec, n_dirs=n_dirs, seed=seed)
    report = {
        "task": "apclass", "p": p,
        "characteristic": est.characteristic,
        "characteristic_converged": est.converged,
        "d_tilde": dims.d_tilde, "dual_d_tilde": dims.dual_d_tilde,
        "beta": dims.beta, "residuals": dims.regression_residual,
        "note": SUP_LOWER_BOUND_NOTE,
    }
    return report, {}


def _task_avgop(cfg, qspec, seed, workers):
    weight = _parse_weight(_require(cfg, "weight"))
    params = _parse_params(_require(cfg, "params"))
    window = _parse_window(_require(cfg, "window"))
    family = family_from_config(_require(cfg, "family"))
    a_range = [int(a) for a in _require(cfg, "a_range")]
    if "dims" in cfg:
        dd = cfg["dims"]
        from .reducing import DimensionEstimate
        dims = DimensionEstimate(p=params.p, d_tilde=float(dd["d_tilde"]),
                                 dual_d_tilde=None if dd.get("dual_d_tilde") is None
                                 else float(dd["dual_d_tilde"]),
                                 beta=float(dd.get("beta", window.n)),
                                 regression_residual=0.0, per_cube_slopes=[])
    else:
        base = [_parse_cube(c) for c in _require(cfg, "base_cubes")]
        dims = ap_dimension(weight, params.p, base, int(cfg.get("i_max", 4)),
                            qspec, seed=seed)
    ledger = exponent_ledger(window.n, params, dims)
    lp_rep = avg_lp_bound_check(weight, params.p, family.members, a_range,
                                window.spatial_radius, qspec)
    bm_rep = avg_bm_bound_check(weight, params, family.members, a_range,
                                window, qspec, ledger)
    report = {"task": "avgop", "ledger": ledger.to_json_dict(),
              "lp_check": {k: v for k, v in lp_rep.items() if k != "rows"},
              "bm_check": {k: v for k, v in bm_rep.items() if k != "rows"}}
    rows = [(r["family_id"], r["a"], r["ratio"]) for r in bm_rep["rows"]]
    lp_rows = [(r["family_id"], r["a"], r["ratio"]) for r in lp_rep["rows"]]
    return report, {"bm_ratios": (["family_id", "a", "ratio"], rows),
                    "lp_ratios": (["family_id", "a", "ratio"], lp_rows)}


def _task_compactness(cfg, qspec, seed, workers):
    weight = _parse_weight(_require(cfg, "weight"))
    params = _parse_params(_require(cfg, "params"))
    family = family_from_config(_require(cfg, "family"))
    schedule = _require(cfg, "schedule")
    window = _parse_window(cfg["window"]) if "window" in cfg else None
    rep = certify(family, weight, params, schedule, qspec,
                  eps=float(cfg.get("epsilon", 0.1)),
                  mode=cfg.get("mode", "dyadic_average"),
                  window=window, workers=workers)
    report = {"task": "compactness", "report": rep.to_json_dict()}
    curves = {
        "tail_curve": (["R", "sup_tail_norm"], rep.tail_curve),
        "modulus_curve": (["parameter", "sup_modulus"], rep.modulus_curve),
    }
    return report, curves


def _task_counterexample(cfg, qspec, seed, workers):
    n = int(cfg.get("n", 1))
    p = float(cfg.get("p", 1.0))
    t = float(cfg.get("t", 2.0))
    j_range = [int(j) for j in cfg.get("j_range", range(1, 7))]
    rep = counterexample_remark(n, p, t, j_range, qspec)
    report = {"task": "counterexample", "n": n, "p": p, "t": t, **rep}
    rows = [(r["j"], r["lower_bound"], r["estimate"]) for r in rep["rows"]]
    return report, {"lower_bounds": (["j", "lower_bound", "estimate"], rows)}


def _task_embeddings(cfg, qspec, seed, workers):
    weight = _parse_weight(_require(cfg, "weight"))
    window = _parse_window(_require(cfg, "window"))
    suite = [_parse_field(f) for f in _require(cfg, "suite")]
    if not suite:
        raise ConfigError("embedding suite must be nonempty")
    cases = _require(cfg, "cases")
    rep = embedding_check(suite, weight, cases, window, qspec,
                          slack=float(cfg.get("slack", 1.01)))
    return {"task": "embeddings", "report": rep}, {}


_HANDLERS = {
    "norm": _task_norm,
    "reduce": _task_reduce,
    "apclass": _task_apclass,
    "avgop": _task_avgop,
    "compactness": _task_compactness,
    "counterexample": _task_counterexample,
    "embeddings": _task_embeddings,
}


def run_scenario(task: str, cfg: dict, out_dir: Path, seed: int | None = None,
                 workers: int | None = None) -> int:
    """Execute one scenario; write reports; return the exit code."""
    from .parallel import resolve_workers

    if task not in TASKS:
        raise ConfigError(f"unknown task {task!r}; expected one of {TASKS}")
    resolved = dict(cfg)
    resolved["task"] = task
    resolved["seed"] = int(seed if seed is not None else cfg.get("seed", 0))
    resolved.pop("workers", None)
    n_workers = resolve_workers(workers if workers is not None else cfg.get("workers"))
    qspec = _parse_quadrature(cfg.get("quadrature"))
    out_dir = Path(out_dir)
    base = resolved.get("output", task)

    header = {
        "config": resolved,
        "config_hash": config_hash(resolved),
        "version": version_string(),
    }
    try:
        report, curves = _HANDLERS[task](cfg, qspec, resolved["seed"], n_workers)
    except (NumericError, QuadratureError, WeightDomainError) as exc:
        partial = dict(header)
        partial.update({"task": task, "error": str(exc)})
        write_json_report(partial, out_dir / f"{base}.json")
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    report.update(header)
    paths = [write_json_report(report, out_dir / f"{base}.json")]
    for name, (head, rows) in curves.items():
        paths.append(write_csv(head, rows, out_dir / f"{base}_{name}.csv"))
    for p in paths:
        print(p)
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bm-lab",
        description="Run a weighted-space scenario from a JSON config.")
    parser.add_argument("task", choices=TASKS)
    parser.add_argument("--config", required=True, help="JSON scenario config")
    parser.add_argument("--out", default="reports", help="output directory")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--workers", type=int, default=None)
    args = parser.parse_args(argv)

    try:
        cfg = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run_scenario(args.task, cfg, Path(args.out), seed=args.seed,
                            workers=args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
