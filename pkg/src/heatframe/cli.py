"""``heatframe`` command line."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import frame as fr
from . import hardy as hd
from . import norms as nm
from .config import SUITES, ConfigError, RunConfig, parse_config
from .grid import GridFunction, read_grid_function, write_grid_function
from .operators import spectral_decompose
from .report import (Report, SuiteState, _jsonable, read_coefficients_csv, run_suite,
                     write_coefficients_csv, write_report)

NORM_CHOICES = ("sl", "g1", "g2", "g3", "g4", "radial", "nt", "gradnt", "hl")


def cache_dir(config: RunConfig) -> str:
    return os.environ.get("HEATFRAME_CACHE") or config["cache.dir"]


def _out_dir(config: RunConfig, args) -> Path:
    out = Path(args.output_dir or config["output.dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _print_json(obj):
    print(json.dumps(_jsonable(obj), indent=2))


def _frame(config: RunConfig, op):
    """Frame from fixed (delta, M), or from the parameter search when either is auto."""
    zeta = config.symbol()
    if config.is_auto("frame.delta") or config.is_auto("frame.M"):
        return SuiteState(config, cache_dir(config), op).frame()
    ctx = fr.build_frame(op, zeta, config["frame.delta"], config["frame.M"], config.j_range())
    fr.estimate_R_norm(ctx)
    return ctx


def _load_input(config: RunConfig, path, op) -> GridFunction:
    path = path or config["input.path"]
    if not path:
        raise ConfigError(["no input grid function (use --input or input.path)"])
    f = read_grid_function(path, side=op.domain.side)
    if f.domain.dim != op.domain.dim or f.domain.n != op.domain.n:
        raise ValueError(f"{path}: grid {f.domain.dim}D N={f.domain.n} does not match the configured domain")
    return GridFunction(op.domain, f.values)


def _setup(config: RunConfig):
    op = config.operator()
    spectral_decompose(op, cache_dir(config))
    return op


def cmd_build(config, args) -> int:
    op = _setup(config)
    ctx = _frame(config, op)
    summary = {"config_hash": config.config_hash, "delta": ctx.params.delta, "M": ctx.params.M,
               "j_min": ctx.params.j_min, "j_max": ctx.params.j_max, "cubes": len(ctx.net),
               "R_norm": ctx.R_norm_estimate, "truncation_residual": fr.truncation_residual(ctx)}
    (_out_dir(config, args) / "frame.json").write_text(json.dumps(summary, indent=2) + "\n")
    _print_json(summary)
    return 0 if ctx.R_norm_estimate < 1 else 1


def cmd_analyze(config, args) -> int:
    op = _setup(config)
    f = _load_input(config, args.input, op)
    ctx = _frame(config, op)
    coeffs = fr.analyze(ctx, f, config["frame.tol"], config["frame.max_iter"])
    out = Path(args.output) if args.output else _out_dir(config, args) / "coefficients.csv"
    write_coefficients_csv(out, coeffs)
    _print_json({"coefficients": str(out), "count": len(coeffs), "iterations": coeffs.inversion.iterations,
                 "residual": coeffs.inversion.residual})
    return 0


def cmd_synthesize(config, args) -> int:
    op = _setup(config)
    ctx = _frame(config, op)
    coeffs = read_coefficients_csv(args.coeffs, ctx.params)
    g = fr.synthesize(ctx, coeffs)
    out = Path(args.output) if args.output else _out_dir(config, args) / "synthesized.hfgf"
    write_grid_function(out, g)
    _print_json({"output": str(out), "L2": g.norm(2)})
    return 0


def cmd_search(config, args) -> int:
    st = SuiteState(config, cache_dir(config))
    res = st.search()
    _print_json({"delta": res.delta, "M": res.M, "achieved_norm": res.achieved_norm,
                 "achieved": res.achieved, "table": res.table})
    return 0 if res.achieved else 1


def cmd_norms(config, args) -> int:
    op = _setup(config)
    f = _load_input(config, args.input, op)
    cone = nm.ConeParams.default(op.domain, config["cone.nodes"])
    which = args.which
    if which == "sl":
        g = nm.square_function_SL(op, config.symbol(), f, cone)
    elif which in ("g1", "g2", "g3", "g4"):
        g = nm.g_function(int(which[1]), _frame(config, op), f)
    elif which == "radial":
        g = nm.radial_maximal(op, f, cone.times)
    elif which == "nt":
        g = nm.nontangential_maximal(op, f, cone)
    elif which == "gradnt":
        g = nm.gradient_nt_maximal(op, f, cone.with_aperture(2.0))
    else:
        g = nm.hl_maximal(f)
    if args.output:
        write_grid_function(args.output, g)
    _print_json({"which": which, "norms": {"1": g.norm(1), "2": g.norm(2)}, "values": g.values.real.tolist()})
    return 0


def cmd_hardy(config, args) -> int:
    op = _setup(config)
    suite = hd.standard_suite(op, config["suite.seed"])
    cone = nm.ConeParams.default(op.domain, config["cone.nodes"])
    rep = hd.maximal_equivalence_report(op, suite, cone)
    records = rep["records"]
    for rec, (name, f) in zip(records, suite):
        fields = hd.maximal_fields(op, f, cone)
        checks = [hd.good_lambda_check(op, f, s, r, cone, fields)
                  for s in hd.percentile_levels(fields.nontangential) for r in (0.25, 0.5, 1.0)]
        rec["good_lambda_holds"] = all(c.holds for c in checks)
        rec["good_lambda_violations"] = sum(len(c.violations) for c in checks)
    summary = {"max_nt_over_radial": rep["max_ratio"], "functions": len(records),
               "good_lambda_holds": all(r["good_lambda_holds"] for r in records)}
    text = json.dumps(_jsonable({"records": records, "summary": summary}), indent=2) + "\n"
    if args.report:
        Path(args.report).write_text(text, encoding="utf-8")
    print(text, end="")
    return 0 if summary["good_lambda_holds"] else 1


def _print_sections(report: Report):
    for sec in report.sections.values():
        status = "PASS" if sec.passed else "FAIL"
        extra = f" ({sec.error})" if sec.error else ""
        print(f"{status}  {sec.name}{extra}")


def cmd_verify(config, args) -> int:
    report = run_suite(config, args.suite, cache_dir(config))
    path = write_report(report, _out_dir(config, args))
    _print_sections(report)
    print(f"report: {path}")
    return 0 if report.passed else 1


def cmd_report(config, args) -> int:
    if args.source:
        report = Report.from_dict(json.loads(Path(args.source).read_text(encoding="utf-8")))
    else:
        report = run_suite(config, "all", cache_dir(config))
        write_report(report, _out_dir(config, args))
    _print_sections(report)
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="heatframe", description="Heat-semigroup frames on periodic grids.")
    sub = p.add_subparsers(dest="verb", required=True)

    def verb(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=name != "report", help="run configuration file")
        sp.add_argument("--output-dir", help="overrides output.dir")
        sp.set_defaults(func=func)
        return sp

    verb("build", cmd_build, "assemble the frame and cache the spectral data")
    sp = verb("analyze", cmd_analyze, "frame coefficients of a grid function")
    sp.add_argument("--input")
    sp.add_argument("--output", help="coefficient CSV (j, tau, re, im)")
    sp = verb("synthesize", cmd_synthesize, "grid function from frame coefficients")
    sp.add_argument("--coeffs", required=True)
    sp.add_argument("--output", help="output grid-function file")
    verb("search", cmd_search, "search (delta, M) for a contracting remainder")
    sp = verb("norms", cmd_norms, "square, g- and maximal functions of a grid function")
    sp.add_argument("--which", choices=NORM_CHOICES, required=True)
    sp.add_argument("--input")
    sp.add_argument("--output")
    sp = verb("hardy", cmd_hardy, "maximal-function and good-lambda checks on a test suite")
    sp.add_argument("--suite", choices=("standard",), default="standard")
    sp.add_argument("--report", help="JSON output path")
    sp = verb("verify", cmd_verify, "run a verification suite and write the report")
    sp.add_argument("suite", choices=(*SUITES, "all"))
    sp = verb("report", cmd_report, "summarize a saved report, or run every suite")
    sp.add_argument("--from", dest="source", help="existing report.json")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config is None:
            if not args.source:
                raise ConfigError(["report needs --config or --from"])
            config = None
        else:
            config = parse_config(args.config)
        return args.func(config, args)
    except ConfigError as exc:
        print(f"heatframe: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, RuntimeError, KeyError) as exc:
        print(f"heatframe: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
