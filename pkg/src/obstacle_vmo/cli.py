"""Command-line runner: ``obstacle-vmo <solve|analyze|experiment|vmo|blowup> --config FILE``.

Exit status: 0 when every check passes, 1 when a check or the pinning/solver
fails (a diagnostics file is written), 2 for a missing or malformed config.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .artifacts import Manifest, dumps, save_solution, write_csv
from .blowup import PinningError
from .complementarity import SolverError
from .config import ConfigError, load_config, require
from .experiments import Report, run_alternative, run_blowup, run_experiment, run_vmo, _report, _solve

log = logging.getLogger("obstacle_vmo")

SUBCOMMANDS = ("solve", "analyze", "experiment", "vmo", "blowup")


def _run_solve(cfg) -> Report:
    rep = _report("solve", cfg)
    sol = _solve(cfg.problem(), cfg)
    d = sol.diagnostics
    rep.tables["diagnostics"] = (["key", "value"], [
        ["n_cells", d["n_cells"]], ["h", d["h"]], ["policies", d["iterations"]],
        ["residual", d["residual"]], ["contact_area", sol.contact.area()],
        ["fb_cells", len(sol.fb_cells)],
        ["monotone_violations", d["monotonicity"]["n_violations"]]])
    rep.checks["residual_within_tol"] = d["residual"] <= cfg.get("solver.tol")
    rep.solutions["solution"] = sol
    return rep


def _run_analyze(cfg) -> Report:
    rep = run_alternative(cfg)
    rep.name = "analyze"
    return rep


RUNNERS = {
    "solve": _run_solve,
    "analyze": _run_analyze,
    "experiment": run_experiment,
    "vmo": run_vmo,
    "blowup": run_blowup,
}


def emit(report: Report, out: Path, manifest: Manifest) -> Path:
    """Write tables as CSV, solutions as field files, and a JSON report."""
    out.mkdir(parents=True, exist_ok=True)
    for name, (header, rows) in report.tables.items():
        manifest.add(write_csv(out / f"{report.name}_{name}.csv", header, rows))
    for name, sol in report.solutions.items():
        manifest.add(*save_solution(out / f"{report.name}_{name}", sol))
    path = out / f"{report.name}_report.json"
    path.write_text(dumps({"name": report.name, "version": report.version, "config": report.config,
                           "checks": report.checks, "summary": report.summary}) + "\n")
    manifest.add(path)
    return path


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="obstacle-vmo", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("command", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, help="INI config file")
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("--threads", type=int, default=1,
                   help="worker count; runs are sequential, the value is recorded only")
    p.add_argument("--seedless", action="store_true",
                   help="assert that no random numbers are used (always true)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg_path = Path(args.config)
    try:
        text = cfg_path.read_text()
        cfg = load_config(cfg_path)
        if args.command == "experiment":
            require(cfg, "experiment.name")
    except FileNotFoundError:
        print(f"error: config file {cfg_path} not found", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"error: {cfg_path}: {exc}", file=sys.stderr)
        return 2

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(out, text)
    manifest.timings["threads"] = args.threads
    t0 = time.perf_counter()
    try:
        report = RUNNERS[args.command](cfg)
    except ConfigError as exc:
        print(f"error: {cfg_path}: {exc}", file=sys.stderr)
        return 2
    except (PinningError, SolverError) as exc:
        diag = out / "diagnostics.json"
        history = getattr(exc, "history", None)
        diag.write_text(dumps({"command": args.command, "error": type(exc).__name__,
                               "message": str(exc), "history": history}) + "\n")
        manifest.add(diag)
        manifest.assertions = {"completed": False}
        manifest.write()
        print(f"failed: {exc} (see {diag})", file=sys.stderr)
        return 1
    manifest.timings[args.command] = round(time.perf_counter() - t0, 3)
    path = emit(report, out, manifest)
    manifest.assertions = dict(report.checks)
    manifest.write()
    if not report.ok:
        print(f"checks failed: {', '.join(report.failed())} (see {path})", file=sys.stderr)
        return 1
    print(f"ok: {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
