"""Command-line front end: config-driven checks with deterministic artifacts.

Every subcommand reads one TOML config, runs the corresponding checks, and
writes a JSON verdict report (plus a CSV of curve data where applicable)
into the output directory. Data artifacts never contain wall times or
other run-variant values, so reruns of the same config are byte-identical;
timings appear only in the stdout report. Exit codes: 0 all verdicts pass,
1 check failure or numerical error, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import weights as wt
from .analysis import (AnalysisError, bergman_restriction_check,
                       check_concavity, check_linearity_equivalence,
                       check_monotone_limits, compute_curve,
                       integration_by_parts_residual, layer_cake_check,
                       optimal_extension_check, quotient_monotonicity)
from .config import (ConfigError, ExperimentConfig, SUBCOMMANDS, config_hash,
                     load_config)
from .domains import DomainError, RefinementError
from .minimizer import (ExtensionProblem, GramError, MinimizerError,
                        minimal_integral, verify_extension_inequality,
                        verify_pythagoras)
from .ode import (OdeDomainError, OdeSingularityError, solve_closed_form,
                  verify_residuals)
from .quadrature import QuadratureError, TailBoundError

RUN_ERRORS = (AnalysisError, DomainError, RefinementError, GramError,
              MinimizerError, OdeDomainError, OdeSingularityError,
              QuadratureError, TailBoundError, wt.WeightError,
              FloatingPointError)


# ---------------------------------------------------------------------------
# deterministic artifact encoding


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    _atomic_write(path, "\n".join(lines) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


def write_json(path: Path, payload: dict) -> None:
    text = json.dumps(_jsonable(payload), sort_keys=True, indent=2)
    _atomic_write(path, text + "\n")


# ---------------------------------------------------------------------------
# run bookkeeping


@dataclass
class RunReport:
    op: str
    label: str
    config_digest: str
    verdicts: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    witnesses: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(self.verdicts) and all(self.verdicts.values())

    def check(self, name: str, fn) -> None:
        """Run one named check; a numerical failure fails just that verdict."""
        try:
            fn()
        except RUN_ERRORS as exc:
            self.verdicts[name] = False
            self.witnesses[f"{name}_error"] = f"{type(exc).__name__}: {exc}"


def _emit(report: RunReport, cfg: ExperimentConfig, out_dir: Path,
          curve_rows=None, curve_header=None) -> None:
    csv_name, json_name = cfg.artifact_names()
    if curve_rows is not None:
        csv_path = out_dir / csv_name
        write_csv(csv_path, curve_header, curve_rows)
        report.artifacts.append(str(csv_path))
    payload = {
        "tool": f"minl2 {__version__}",
        "op": report.op,
        "label": report.label,
        "config_hash": report.config_digest,
        "verdicts": report.verdicts,
        "residuals": report.residuals,
        "witnesses": report.witnesses,
        "passed": report.passed,
    }
    json_path = out_dir / json_name
    write_json(json_path, payload)
    report.artifacts.append(str(json_path))


def _problem(cfg: ExperimentConfig) -> ExtensionProblem:
    return ExtensionProblem(domain=cfg.domain, phi=cfg.phi,
                            weight=cfg.weight(), datum=cfg.datum_dict(),
                            ideal=cfg.ideal(), degree=cfg.degree)


def _solver_kw(cfg: ExperimentConfig) -> dict:
    return {"method": cfg.method, "resolution": cfg.resolution}


def _curve_grid(cfg: ExperimentConfig, weight) -> np.ndarray:
    ts = cfg.t_values()
    if ts.size < 2:
        raise ConfigError(f"{cfg.label}: [grid] count must be >= 2 for "
                          f"curve subcommands")
    if ts[0] < weight.T:
        raise ConfigError(f"{cfg.label}: [grid] t_min is below the weight "
                          f"origin T = {weight.T}")
    return ts


# ---------------------------------------------------------------------------
# subcommand handlers


def _run_compute_g(cfg: ExperimentConfig, report: RunReport, out_dir: Path):
    problem = _problem(cfg)
    ts = _curve_grid(cfg, problem.weight)
    solver_kw = _solver_kw(cfg)
    angular = cfg.angular_nodes or None
    rows = []
    finite = True
    converged = True
    for t in ts:
        res = minimal_integral(problem, t, angular_nodes=angular, **solver_kw)
        rows.append((t, problem.weight.tail_integral(t), res.value,
                     res.degree, res.converged))
        finite &= bool(np.isfinite(res.value))
        converged &= res.converged
    report.verdicts["finite"] = finite
    report.verdicts["degree_converged"] = converged
    values = np.array([row[2] for row in rows], dtype=float)
    rs = np.array([row[1] for row in rows], dtype=float)
    report.residuals["value_at_t_min"] = float(values[0])
    report.residuals["value_at_t_max"] = float(values[-1])
    if np.all(np.isfinite(values)) and values[0] > 0:
        report.residuals["slope_estimate"] = float(values[0] / rs[0])
    _emit(report, cfg, out_dir, rows,
          ("t", "r", "G", "basis_degree", "converged"))


def _run_check_concavity(cfg: ExperimentConfig, report: RunReport,
                         out_dir: Path):
    problem = _problem(cfg)
    ts = _curve_grid(cfg, problem.weight)
    curve = compute_curve(problem, ts, **_solver_kw(cfg))
    tol = cfg.tol("check")

    def _concavity():
        rep = check_concavity(curve, tol=tol)
        report.verdicts["concave"] = rep.concave
        report.residuals["max_slope_increase"] = rep.max_slope_increase
        report.residuals["min_slope_decrease"] = rep.min_slope_decrease
        report.residuals["slope"] = rep.slope
        report.witnesses["strictly_concave"] = rep.strictly_concave
        report.witnesses["linear"] = rep.linear

    def _monotone():
        rep = check_monotone_limits(curve, decay_bound=cfg.tol("decay"))
        report.verdicts["nonincreasing"] = rep.nonincreasing
        report.verdicts["r_nonincreasing"] = rep.r_nonincreasing
        report.residuals["end_ratio"] = rep.end_ratio
        report.witnesses["vanishing"] = rep.vanishing

    def _quotient():
        rep = quotient_monotonicity(curve)
        report.verdicts["quotient_nondecreasing"] = rep.nondecreasing
        report.residuals["quotient_min_step"] = rep.min_step
        report.witnesses["quotient_all_equal"] = rep.all_equal

    report.check("concave", _concavity)
    report.check("nonincreasing", _monotone)
    report.check("quotient_nondecreasing", _quotient)
    rows = list(zip(curve.t, curve.r, curve.values))
    _emit(report, cfg, out_dir, rows, ("t", "r", "G"))


def _run_check_linearity(cfg: ExperimentConfig, report: RunReport,
                         out_dir: Path):
    problem = _problem(cfg)
    ts = _curve_grid(cfg, problem.weight)
    curve = compute_curve(problem, ts, **_solver_kw(cfg))
    rep = check_linearity_equivalence(curve, tol=cfg.tol("check"))
    report.verdicts["criteria_consistent"] = rep.consistent
    report.witnesses["global_linear"] = rep.global_linear
    report.witnesses["interior_touch"] = rep.interior_touch
    report.witnesses["limit_match"] = rep.limit_match
    report.witnesses["limit_stalled"] = rep.limit_stalled
    report.residuals["slope"] = rep.slope
    report.residuals["limit_estimate"] = rep.limit_estimate
    report.residuals["max_global_deviation"] = rep.max_global_deviation
    report.residuals["min_interior_deviation"] = rep.min_interior_deviation
    rows = list(zip(curve.t, curve.r, curve.values))
    _emit(report, cfg, out_dir, rows, ("t", "r", "G"))


def _run_bergman_ratio(cfg: ExperimentConfig, report: RunReport,
                       out_dir: Path):
    weight = cfg.weight()
    ts = cfg.t_values()
    if ts[0] < weight.T:
        raise ConfigError(f"{cfg.label}: [grid] t_min is below the weight "
                          f"origin T = {weight.T}")
    tol = cfg.tol("check")
    rep = bergman_restriction_check(cfg.domain, cfg.phi, weight, list(ts),
                                    degree=cfg.degree, method=cfg.method,
                                    resolution=cfg.resolution, tol=tol)
    report.verdicts["kernel_duality"] = rep.max_product_residual <= tol
    report.verdicts["ratio_law"] = rep.max_ratio_residual <= tol
    report.residuals["max_product_residual"] = rep.max_product_residual
    report.residuals["max_ratio_residual"] = rep.max_ratio_residual
    g0 = weight.tail_integral(weight.T)
    rows = [(t, prod, ratio, g0 / weight.tail_integral(t))
            for t, prod, ratio in zip(rep.ts, rep.products, rep.ratios)]
    _emit(report, cfg, out_dir, rows,
          ("t", "kernel_times_g", "kernel_ratio", "expected_ratio"))


def _run_verify_ode(cfg: ExperimentConfig, report: RunReport, out_dir: Path):
    ts = cfg.t_values()
    tol = cfg.tol("check")
    csv_name, _ = cfg.artifact_names()
    stem = csv_name[:-4] if csv_name.endswith(".csv") else csv_name
    for i, spec in enumerate(cfg.weights):
        weight = spec.build(cfg.base_dir)
        tag = f"w{i}_{spec.family}"

        def _one(weight=weight, tag=tag, index=i):
            grid = ts + weight.T
            adm = wt.check_ode_admissible(weight, grid)
            report.verdicts[f"{tag}_admissible"] = adm.in_class
            sol = solve_closed_form(weight)
            rep = verify_residuals(sol, grid)
            report.verdicts[f"{tag}_residuals"] = bool(
                max(rep.max_res_mult, rep.max_res_lin) <= tol)
            report.verdicts[f"{tag}_positivity"] = rep.min_positivity > 0
            report.residuals[f"{tag}_max_res_mult"] = rep.max_res_mult
            report.residuals[f"{tag}_max_res_lin"] = rep.max_res_lin
            report.residuals[f"{tag}_min_positivity"] = rep.min_positivity
            rows = list(zip(rep.t, rep.res_mult, rep.res_lin,
                            rep.positivity))
            suffix = "" if len(cfg.weights) == 1 else f"_{tag}"
            path = out_dir / f"{stem}{suffix}.csv"
            write_csv(path, ("t", "res1", "res2", "min_pos"), rows)
            report.artifacts.append(str(path))

        report.check(f"{tag}_residuals", _one)
    _emit(report, cfg, out_dir)


def _run_verify_identities(cfg: ExperimentConfig, report: RunReport,
                           out_dir: Path):
    problem = _problem(cfg)
    weight = problem.weight
    T = weight.T
    ts = _curve_grid(cfg, weight)

    def _layer_cake():
        rep = layer_cake_check(cfg.domain, cfg.phi,
                               fn=lambda s: np.exp(-s),
                               dfn=lambda s: -np.exp(-s),
                               tol=cfg.tol("layer_cake"))
        report.verdicts["layer_cake"] = rep.passed
        report.residuals["layer_cake_residual"] = rep.residual
        report.witnesses["layer_cake_lhs"] = rep.lhs

    def _int_parts():
        instances = (
            ("bounded_slope", lambda s: 1.0 - np.exp(-(s - T)),
             lambda s: np.exp(-(s - T)), T),
            ("slow_rise", lambda s: 1.0 - np.exp(-(s - T) / 4.0),
             lambda s: np.exp(-(s - T) / 4.0) / 4.0, T + 1.0),
            ("unbounded", lambda s: s - T, lambda s: np.ones_like(s),
             T + 0.7),
        )
        tol = cfg.tol("int_parts")
        ok = True
        for name, a_fn, da_fn, t0 in instances:
            res = integration_by_parts_residual(weight, a_fn=a_fn,
                                                da_fn=da_fn, t0=t0)
            report.residuals[f"int_parts_{name}"] = abs(res)
            ok &= abs(res) <= tol
        report.verdicts["int_parts"] = ok

    def _pythagoras():
        rep = verify_pythagoras(problem, float(ts[0]), trials=20, seed=0,
                                method=cfg.method,
                                resolution=cfg.resolution,
                                tol=cfg.tol("pythagoras"))
        report.verdicts["pythagoras"] = rep.passed
        report.residuals["pythagoras_max_residual"] = rep.max_residual

    def _monotone():
        curve = compute_curve(problem, ts, **_solver_kw(cfg))
        rep = check_monotone_limits(curve, decay_bound=cfg.tol("decay"))
        report.verdicts["nonincreasing"] = rep.nonincreasing
        report.residuals["end_ratio"] = rep.end_ratio
        report.witnesses["vanishing"] = rep.vanishing

    report.check("layer_cake", _layer_cake)
    report.check("int_parts", _int_parts)
    report.check("pythagoras", _pythagoras)
    report.check("nonincreasing", _monotone)
    _emit(report, cfg, out_dir)


def _run_extension_check(cfg: ExperimentConfig, report: RunReport,
                         out_dir: Path):
    problem = _problem(cfg)
    ext = cfg.extension
    tol = cfg.tol("extension")
    rows = []
    for width in ext.widths:
        def _one(width=width):
            rep = verify_extension_inequality(problem, t0=ext.t0, B=width,
                                              pole_weighted=ext.pole_weighted,
                                              tol=tol)
            report.verdicts[f"feasible_B_{_fmt(width)}"] = rep.passed
            report.residuals[f"lhs_B_{_fmt(width)}"] = rep.lhs
            report.residuals[f"rhs_B_{_fmt(width)}"] = rep.rhs
            rows.append((width, rep.lhs, rep.rhs, rep.passed))

        report.check(f"feasible_B_{_fmt(width)}", _one)

    dom = cfg.domain
    slice_pole = dom.kind == "polydisc" and dom.pole_codim < dom.n
    datum_off_pole = all(
        sum(idx[dom.free_count:]) == 0 for idx, _ in cfg.datum)
    if slice_pole and datum_off_pole and cfg.phi.tag == "zero":
        def _equality():
            ts = _curve_grid(cfg, problem.weight)
            rep = optimal_extension_check(problem, ts, tol=tol)
            report.verdicts["optimal_equality"] = rep.passed
            report.residuals["optimal_max_residual"] = rep.max_residual
            report.residuals["coefficient_drift"] = rep.coefficient_drift

        report.check("optimal_equality", _equality)
    _emit(report, cfg, out_dir, rows, ("B", "lhs", "rhs", "feasible"))


_HANDLERS = {
    "compute-g": _run_compute_g,
    "check-concavity": _run_check_concavity,
    "check-linearity": _run_check_linearity,
    "bergman-ratio": _run_bergman_ratio,
    "verify-ode": _run_verify_ode,
    "verify-identities": _run_verify_identities,
    "extension-check": _run_extension_check,
}


def run_subcommand(op: str, cfg: ExperimentConfig, out_dir) -> RunReport:
    out_dir = Path(out_dir)
    report = RunReport(op=op, label=cfg.label, config_digest=config_hash(cfg))
    start = time.perf_counter()
    _HANDLERS[op](cfg, report, out_dir)
    report.wall_time = time.perf_counter() - start
    return report


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    from dataclasses import replace

    if args.resolution is not None:
        if args.resolution < 2:
            raise ConfigError("--resolution must be >= 2")
        cfg = replace(cfg, resolution=args.resolution)
    if args.tol is not None:
        if args.tol <= 0:
            raise ConfigError("--tol must be positive")
        tols = dict(cfg.tolerances)
        tols["check"] = args.tol
        cfg = replace(cfg, tolerances=tuple(sorted(tols.items())))
    return cfg


def _print_report(report: RunReport, stream=None) -> None:
    stream = stream or sys.stdout
    digest = report.config_digest[:12]
    print(f"minl2 {__version__}  {report.op}  {report.label}  "
          f"config sha256:{digest}", file=stream)
    for name in sorted(report.verdicts):
        mark = "PASS" if report.verdicts[name] else "FAIL"
        print(f"  {name}: {mark}", file=stream)
    for path in report.artifacts:
        print(f"  wrote {path}", file=stream)
    print(f"  wall time: {report.wall_time:.3f} s", file=stream)
    print("PASS" if report.passed else "FAIL", file=stream)


def _run_single(op: str, args) -> int:
    try:
        cfg = load_config(args.config)
        cfg = _apply_overrides(cfg, args)
        report = run_subcommand(op, cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except RUN_ERRORS as exc:
        print(f"check failed ({op}): {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 1
    _print_report(report)
    if not report.passed:
        failing = [k for k, v in sorted(report.verdicts.items()) if not v]
        print(f"failing checks: {', '.join(failing)}", file=sys.stderr)
        return 1
    return 0


def _run_suite(args) -> int:
    config_dir = Path(args.config)
    if not config_dir.is_dir():
        print(f"config error: suite needs a directory, got {config_dir}",
              file=sys.stderr)
        return 2
    paths = sorted(config_dir.glob("*.toml"))
    out_dir = Path(args.out)
    summary = {}
    exit_code = 0
    start = time.perf_counter()
    if not paths:
        print(f"warning: no .toml configs found in {config_dir}",
              file=sys.stderr)
    for path in paths:
        name = path.stem
        try:
            cfg = load_config(path)
            cfg = _apply_overrides(cfg, args)
            if cfg.op is None:
                raise ConfigError(f"{path}: suite members need [run] op")
            report = run_subcommand(cfg.op, cfg, out_dir)
        except ConfigError as exc:
            summary[name] = {"status": "config-error", "detail": str(exc)}
            print(f"{name}: CONFIG-ERROR ({exc})", file=sys.stderr)
            exit_code = 1
            continue
        except RUN_ERRORS as exc:
            summary[name] = {"status": "error",
                             "detail": f"{type(exc).__name__}: {exc}"}
            print(f"{name}: ERROR ({exc})", file=sys.stderr)
            exit_code = 1
            continue
        status = "pass" if report.passed else "fail"
        summary[name] = {
            "status": status,
            "op": report.op,
            "config_hash": report.config_digest,
            "verdicts": report.verdicts,
            "residuals": report.residuals,
        }
        print(f"{name}: {status.upper()}  ({report.wall_time:.3f} s)")
        if not report.passed:
            exit_code = 1
    payload = {"tool": f"minl2 {__version__}", "configs": summary}
    summary_path = out_dir / "suite_summary.json"
    write_json(summary_path, payload)
    n_pass = sum(1 for v in summary.values() if v["status"] == "pass")
    print(f"suite: {n_pass}/{len(summary)} passed, wrote {summary_path} "
          f"({time.perf_counter() - start:.3f} s)")
    return exit_code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="minl2",
        description="Minimal L2 integrals on model domains: compute curves "
                    "and verify their structure at fixed tolerances.")
    parser.add_argument("--version", action="version",
                        version=f"minl2 {__version__}")
    sub = parser.add_subparsers(dest="op", required=True)
    help_text = {
        "compute-g": "tabulate the minimal integral along the t grid",
        "check-concavity": "verify concavity of the curve against r",
        "check-linearity": "verify the three linearity criteria agree",
        "bergman-ratio": "verify kernel duality and the restriction ratio",
        "verify-ode": "verify closed-form ODE residuals per weight",
        "verify-identities": "layer cake, parts, Pythagoras, monotonicity",
        "extension-check": "extension feasibility and slice equality",
        "suite": "run every config in a directory and aggregate",
    }
    for name in SUBCOMMANDS + ("suite",):
        p = sub.add_parser(name, help=help_text[name])
        p.add_argument("--config", required=True,
                       help="config file (directory for suite)")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--resolution", type=int, default=None,
                       help="override solver resolution")
        p.add_argument("--tol", type=float, default=None,
                       help="override the primary check tolerance")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.op == "suite":
        return _run_suite(args)
    return _run_single(args.op, args)


if __name__ == "__main__":
    sys.exit(main())
