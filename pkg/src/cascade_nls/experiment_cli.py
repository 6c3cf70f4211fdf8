"""Command-line entry point: ``cascade-nls <command> [--config PATH] [--out DIR] ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import config as config_mod
from . import experiments, nls_solver

log = logging.getLogger("cascade_nls")

COMMANDS = {
    "simulate": "simulate",
    "linear-layer": "linear_layer",
    "cascade": "cascade_layers",
    "main-theorem": "main_theorem",
    "instability": "instability_scan",
    "grenier": "grenier_convergence",
    "series": "series_orders",
}
CONFIG_SUFFIXES = (".cfg", ".ini", ".conf")


def _load(path: str | None, experiment: str, out: str | None, threads: int) -> config_mod.ExperimentConfig:
    overrides = {"experiment": experiment}
    if out:
        overrides["output_dir"] = out
    text = Path(path).read_text() if path else ""
    cfg = config_mod.parse_text(text, overrides)
    cfg.threads = threads
    return cfg


def run_config(cfg: config_mod.ExperimentConfig, dump_fields: bool = False) -> experiments.ExperimentResult:
    if cfg.experiment == "simulate":
        return experiments.run_simulate(cfg, dump_fields)
    return experiments.RUNNERS[cfg.experiment](cfg)


def _failure(name: str, error: Exception) -> dict:
    entry = {"config": name, "experiment": None, "passed": False, "error": f"{type(error).__name__}: {error}"}
    if isinstance(error, nls_solver.SolverAbort):
        entry["abort"] = {"step": error.step, "time": error.time}
    return entry


def run_all(config_dir: str | Path, out: str | Path | None = None, threads: int = 1) -> tuple[dict, int]:
    """Runs every config file in ``config_dir`` in name order; returns (manifest, exit code)."""
    config_dir = Path(config_dir)
    out = Path(out) if out else config_dir / "results"
    entries = []
    for path in sorted(p for p in config_dir.iterdir() if p.suffix in CONFIG_SUFFIXES):
        try:
            cfg = config_mod.load(path, {"output_dir": str(out / path.stem)})
            cfg.threads = threads
            res = run_config(cfg)
        except Exception as exc:  # the manifest records it and the run goes on
            log.error("%s failed: %s", path.name, exc)
            entries.append(_failure(path.name, exc))
            continue
        entries.append({
            "config": path.name,
            "config_hash": cfg.config_hash,
            "experiment": res.experiment,
            "passed": res.passed,
            "checks": res.checks,
            "numbers": res.numbers,
            "artifacts": res.artifacts,
            "notes": res.notes,
        })
    manifest = {"runs": entries, "all_passed": all(e["passed"] for e in entries)}
    if entries:
        out.mkdir(parents=True, exist_ok=True)
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=float))
    return manifest, 0 if manifest["all_passed"] else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cascade-nls", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--out", help="output directory for tables and dumps")
    common.add_argument("--threads", type=int, default=1, help="worker threads for independent runs")
    common.add_argument("--dump-fields", action="store_true", help="write CFD1 field snapshots (simulate)")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=f"run the {COMMANDS[name]} experiment")
    ra = sub.add_parser("run-all", parents=[common], help="run every config in a directory")
    ra.add_argument("config_dir")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "run-all":
        manifest, code = run_all(args.config_dir, args.out, args.threads)
        print(json.dumps({"all_passed": manifest["all_passed"], "runs": len(manifest["runs"])}))
        return code
    try:
        cfg = _load(args.config, COMMANDS[args.command], args.out, args.threads)
        res = run_config(cfg, args.dump_fields)
    except nls_solver.SolverAbort as exc:
        print(f"FAIL solver abort at step {exc.step}, t={exc.time:.6g}: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(res.summary(), indent=2, sort_keys=True, default=float))
    print(f"{'PASS' if res.passed else 'FAIL'} {res.experiment} [{cfg.config_hash}]")
    return 0 if res.passed else 1


if __name__ == "__main__":
    sys.exit(main())
