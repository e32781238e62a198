"""Command-line interface: ``frackpp <subcommand> [--config FILE] [flags]``.

Exit codes: 0 success, 2 invalid input, 3 a numerical gate failed,
4 an iteration or tree did not terminate.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .branching import estimate_point, simulate_forward_tree
from .config import RunConfig, load_config
from .diagnostics import clock_cdf, kernel_cdf, ks_summary, stable_cdf
from .exceptions import (
    BoundViolationError,
    DomainTooSmallError,
    KernelValidationError,
    MLAccuracyError,
    ParameterError,
    PicardDivergenceError,
    RunawayTreeError,
    SpectralTableError,
)
from .kernels import KernelId, kernel_property_report
from .mittag_leffler import ml_eval
from .picard import solve_grid
from .samplers import RngStream, sample_branch_times, sample_kernel_displacements, sample_stable_feller

EXIT_OK, EXIT_INVALID, EXIT_GATE, EXIT_NONCONVERGENCE = 0, 2, 3, 4

# flag -> (config field, argparse keywords)
_FLAGS = {
    "--alpha": ("alpha", {}),
    "--beta": ("beta", {}),
    "--theta": ("theta", {}),
    "--rho": ("rho", {"help": "one | alpha"}),
    "--u0": ("u0", {"help": "constant | gaussian | tabulated"}),
    "--c": ("c", {"help": "value of the constant initial datum"}),
    "--amplitude": ("amplitude", {}),
    "--width": ("width", {}),
    "--center": ("center", {}),
    "--u0-file": ("u0_file", {"help": "two-column x, u0 file for u0 = tabulated"}),
    "--t": ("t", {"help": "evaluation times, comma separated"}),
    "--x": ("x", {"help": "evaluation positions, comma separated"}),
    "--z": ("z", {"help": "Mittag-Leffler arguments, comma separated (complex allowed)"}),
    "--n-paths": ("n_paths", {}),
    "--seed": ("seed", {}),
    "--workers": ("workers", {}),
    "--engine": ("engine", {"help": "backward | forward"}),
    "--max-depth": ("max_depth", {}),
    "--allow-unbounded": ("allow_unbounded", {"help": "true | false"}),
    "--T": ("T", {"help": "reference horizon (default: largest t)"}),
    "--N-t": ("N_t", {}),
    "--N-x": ("N_x", {"help": "0 chooses from the halfwidth"}),
    "--halfwidth": ("halfwidth", {"help": "0 chooses from the leak bound"}),
    "--tol": ("tol", {}),
    "--max-iters": ("max_iters", {}),
    "--grid-check": ("grid_check", {"help": "true | false"}),
    "--kernel-t": ("kernel_t", {}),
    "--n-points": ("n_points", {}),
    "--tail-target": ("tail_target", {}),
    "--sample-kind": ("sample_kind", {"help": "clock | stable | kernel"}),
    "--n-samples": ("n_samples", {}),
    "--lam": ("lam", {}),
    "--output": ("output", {"help": "output path (stdout when empty)"}),
}


# {{{ output helpers


def _metadata() -> dict:
    return {"timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(), "version": __version__}


def _document(command: str, cfg: RunConfig, results) -> dict:
    return {"command": command, "config": cfg.to_dict(), "metadata": _metadata(), "results": results}


def _emit(text: str, path: str) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _dump(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=True) + "\n"


def _num(value: float) -> str:
    return repr(float(value))


# }}}


# {{{ subcommands


def cmd_ml_eval(cfg: RunConfig) -> int:
    rho = cfg.rho_value()
    results = []
    for z in cfg.z:
        value = complex(ml_eval(cfg.alpha, rho, z))
        entry = {"z": [z.real, z.imag] if isinstance(z, complex) else [float(z), 0.0]}
        entry["value"] = [value.real, value.imag]
        results.append(entry)
    _emit(_dump(_document("ml-eval", cfg, {"alpha": cfg.alpha, "rho": rho, "values": results})), cfg.output)
    return EXIT_OK


def cmd_kernel_check(cfg: RunConfig) -> int:
    kid = KernelId(cfg.params(), cfg.rho_value(), cfg.kernel_t)
    report = kernel_property_report(kid, n_points=cfg.n_points, tail_target=cfg.tail_target)
    _emit(_dump(_document("kernel-check", cfg, report.to_dict())), cfg.output)
    return EXIT_OK if report.passed else EXIT_GATE


def cmd_sample_diag(cfg: RunConfig) -> int:
    gen = RngStream(cfg.seed).generator()
    params = cfg.params()
    n = cfg.n_samples
    if cfg.sample_kind == "clock":
        samples = sample_branch_times(cfg.alpha, gen, n)
        cdf = clock_cdf(cfg.alpha)
        label = {"kind": "clock", "alpha": cfg.alpha}
    elif cfg.sample_kind == "stable":
        samples = sample_stable_feller(cfg.beta, cfg.theta, cfg.lam, gen, n)
        cdf = stable_cdf(cfg.beta, cfg.theta, cfg.lam)
        label = {"kind": "stable", "beta": cfg.beta, "theta": cfg.theta, "lam": cfg.lam}
    else:
        kid = KernelId(params, cfg.rho_value(), cfg.kernel_t)
        samples = sample_kernel_displacements(params, kid.rho, np.full(n, kid.t), gen)
        cdf = kernel_cdf(kid)
        label = {"kind": "kernel", **kid.as_dict()}
    summary = ks_summary(samples, cdf)
    doc = _document("sample-diag", cfg, {"distribution": label, "ks": summary})
    if cfg.output:
        with open(cfg.output, "w", newline="") as fh:
            fh.write(f"# config = {json.dumps(cfg.to_dict(), sort_keys=True)}\n")
            fh.write(f"# distribution = {json.dumps(label, sort_keys=True)}\n")
            writer = csv.writer(fh)
            writer.writerow(["index", "value"])
            for i, v in enumerate(samples):
                writer.writerow([i, _num(v)])
    sys.stdout.write(_dump(doc))
    return EXIT_GATE if summary["passed"] is False else EXIT_OK


def cmd_solve_mc(cfg: RunConfig) -> int:
    params, u0 = cfg.params(), cfg.initial_condition()
    engine = estimate_point if cfg.engine == "backward" else simulate_forward_tree
    estimates = []
    for t in cfg.t:
        for x in cfg.x:
            est = engine(
                params,
                u0,
                t,
                x,
                cfg.n_paths,
                cfg.seed,
                n_workers=cfg.workers,
                max_depth=cfg.max_depth,
                allow_unbounded=cfg.allow_unbounded,
            )
            estimates.append(est.to_dict())
    _emit(_dump(_document("solve-mc", cfg, {"estimates": estimates})), cfg.output)
    return EXIT_OK


def cmd_solve_ref(cfg: RunConfig) -> int:
    params, u0 = cfg.params(), cfg.initial_condition()
    solution = solve_grid(
        params,
        u0,
        cfg.horizon(),
        domain_halfwidth=cfg.halfwidth or None,
        N_t=cfg.N_t,
        N_x=cfg.N_x or None,
        tol=cfg.tol,
        max_iters=cfg.max_iters,
        grid_check=cfg.grid_check,
    )
    points = []
    for t in cfg.t:
        values = solution.at(t, cfg.x)
        tolerance = solution.tolerance_at(t)
        for x, u in zip(cfg.x, values):
            points.append({"t": t, "x": x, "u": float(u), "grid_tolerance": tolerance})
    results = {"solution": solution.metadata(), "points": points}
    if cfg.output:
        stem = Path(cfg.output)
        csv_path = stem.with_suffix(".csv")
        solution.to_csv(csv_path, header={"config": cfg.to_dict()})
        results["grid_csv"] = str(csv_path)
        stem.with_suffix(".json").write_text(_dump(_document("solve-ref", cfg, results)))
    sys.stdout.write(_dump(_document("solve-ref", cfg, results)))
    return EXIT_OK


def compare_documents(mc_doc: dict, ref_doc: dict) -> dict:
    """Point-wise check ``|MC - ref| <= 3 stderr + grid tolerance``."""
    try:
        estimates = mc_doc["results"]["estimates"]
        points = ref_doc["results"]["points"]
    except (KeyError, TypeError) as exc:
        raise ParameterError("compare needs a solve-mc JSON and a solve-ref JSON") from exc
    lookup = {(p["t"], p["x"]): p for p in points}
    rows = []
    for est in estimates:
        key = (est["t"], est["x"])
        if key not in lookup:
            raise ParameterError(f"reference has no value at t={key[0]}, x={key[1]}")
        ref = lookup[key]
        grid_tol = ref.get("grid_tolerance") or 0.0
        allowed = 3.0 * est["stderr"] + grid_tol
        diff = abs(est["mean"] - ref["u"])
        rows.append(
            {
                "t": key[0],
                "x": key[1],
                "mc": est["mean"],
                "stderr": est["stderr"],
                "ref": ref["u"],
                "grid_tolerance": grid_tol,
                "abs_diff": diff,
                "allowed": allowed,
                "passed": bool(diff <= allowed),
            }
        )
    return {"points": rows, "passed": all(r["passed"] for r in rows)}


def cmd_compare(mc_path: str, ref_path: str, output: str = "") -> int:
    try:
        mc_doc = json.loads(Path(mc_path).read_text())
        ref_doc = json.loads(Path(ref_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParameterError(f"cannot read comparison inputs: {exc}") from exc
    report = compare_documents(mc_doc, ref_doc)
    doc = {
        "command": "compare",
        "inputs": {"mc": str(mc_path), "ref": str(ref_path)},
        "mc_config": mc_doc.get("config"),
        "ref_config": ref_doc.get("config"),
        "metadata": _metadata(),
        "results": report,
    }
    _emit(_dump(doc), output)
    return EXIT_OK if report["passed"] else EXIT_GATE


def cmd_print_config(cfg: RunConfig) -> int:
    _emit(cfg.to_ini(), cfg.output)
    return EXIT_OK


# }}}


_COMMANDS = {
    "ml-eval": cmd_ml_eval,
    "kernel-check": cmd_kernel_check,
    "sample-diag": cmd_sample_diag,
    "solve-mc": cmd_solve_mc,
    "solve-ref": cmd_solve_ref,
    "print-config": cmd_print_config,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="frackpp", description="Stochastic and reference solvers for the fractional KPP equation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="INI file; flags override its values")
        for flag, (dest, extra) in _FLAGS.items():
            p.add_argument(flag, dest=dest, default=None, **extra)
    p = sub.add_parser("compare", help="check solve-mc output against solve-ref output")
    p.add_argument("mc", help="JSON written by solve-mc")
    p.add_argument("ref", help="JSON written by solve-ref")
    p.add_argument("--output", default="")
    return parser


def _run(args) -> int:
    if args.command == "compare":
        return cmd_compare(args.mc, args.ref, args.output)
    overrides = {dest: getattr(args, dest) for dest, _ in _FLAGS.values()}
    cfg = load_config(args.config, overrides)
    return _COMMANDS[args.command](cfg)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        return _run(args)
    except (ParameterError, BoundViolationError) as exc:
        print(f"frackpp: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (KernelValidationError, SpectralTableError, MLAccuracyError, DomainTooSmallError) as exc:
        print(f"frackpp: numerical gate failed: {exc}", file=sys.stderr)
        return EXIT_GATE
    except (PicardDivergenceError, RunawayTreeError) as exc:
        print(f"frackpp: did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
