"""Command line entry point: ``srpolymer run <config>`` and ``srpolymer report <dir>``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .config import ConfigError, config_hash, load_config
from .errors import ParameterError
from .experiments import RUNNERS
from .results import Table, read_manifest, read_table, render_text, write_manifest, write_table, atomic_write, table_to_csv

log = logging.getLogger("srpolymer")

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_VALIDATION = 2
EXIT_UNCONVERGED = 3

OUT_ENV = "SRPOLYMER_OUT"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config, seed=args.seed)
    except (ConfigError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    digest = config_hash(cfg)
    out_root = Path(args.out or os.environ.get(OUT_ENV, "results"))
    out_dir = out_root if args.out else out_root / f"{cfg.name}-{digest[:12]}"
    out_dir.mkdir(parents=True, exist_ok=True)
    atomic_write(out_dir / "config.ini", cfg.source_text)
    manifest = {
        "kind": cfg.kind,
        "name": cfg.name,
        "config_hash": digest,
        "code_version": __version__,
        "seed": cfg.seed,
        "threads": args.threads,
        "started": _now(),
        "finished": None,
        "status": "running",
        "tasks": {cfg.kind: "running"},
        "outputs": [],
    }
    write_manifest(out_dir / "manifest.json", manifest)
    t0 = time.perf_counter()
    try:
        outcome = RUNNERS[cfg.kind](cfg, threads=args.threads)
    except ParameterError as exc:
        manifest.update(status="invalid", finished=_now(), tasks={cfg.kind: "invalid"}, error=str(exc))
        write_manifest(out_dir / "manifest.json", manifest)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001 - report any crash through the manifest
        log.exception("run failed")
        manifest.update(status="error", finished=_now(), tasks={cfg.kind: "error"}, error=repr(exc))
        write_manifest(out_dir / "manifest.json", manifest)
        return EXIT_INTERNAL
    outputs = [write_table(t, out_dir, digest).name for t in outcome.tables]
    if outcome.failures:
        status, code = "failed", EXIT_INTERNAL
    elif outcome.unconverged:
        status, code = "unconverged", EXIT_UNCONVERGED
    else:
        status, code = "ok", EXIT_OK
    manifest.update(status=status, finished=_now(), tasks={cfg.kind: status}, outputs=outputs,
                    elapsed_seconds=round(time.perf_counter() - t0, 3), failures=outcome.failures)
    write_manifest(out_dir / "manifest.json", manifest)
    for f in outcome.failures:
        print(f"FAIL {f}", file=sys.stderr)
    print(f"{cfg.kind}: {status} -> {out_dir}")
    return code


# columns shown by ``report`` for each known table
_REPORT_COLUMNS = {
    "gamma_fit": ["alpha", "beta", "h_x", "h_y", "gamma_hat", "gamma_se", "ci_low", "ci_high", "regime"],
    "msd_scan": ["alpha", "beta", "n", "msd", "msd_se", "msd_over_n", "msd_over_n2", "converged"],
    "ballistic": ["alpha", "beta", "hypothesis", "min_ratio", "last_ratio", "nondecreasing_2se", "regime"],
    "clt": ["n", "n_samples", "variance_method", "target_variance", "sample_variance", "ks_statistic", "p_value",
            "calibration_rejection_rate", "hypotheses"],
    "enumerate": ["alpha", "beta", "h_x", "h_y", "n", "msd", "msd_over_n", "msd_over_n2"],
    "variance_identity": ["beta", "v_x", "v_y", "n", "psi2_at_0", "variance_over_n", "gap", "convex"],
}


def cmd_report(args) -> int:
    d = Path(args.dir)
    manifest_path = d / "manifest.json"
    if not manifest_path.is_file():
        print(f"error: no manifest in {d}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        manifest = read_manifest(manifest_path)
        outputs = manifest["outputs"]
    except (ValueError, KeyError) as exc:
        print(f"error: corrupt manifest in {d}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    if not outputs:
        print(f"error: run in {d} has no results (status {manifest.get('status')})", file=sys.stderr)
        return EXIT_VALIDATION
    summary = Table("summary", ["table", "row", "column", "value"])
    chunks = [f"{manifest.get('kind')} run {manifest.get('config_hash', '')[:12]}  status={manifest.get('status')}"]
    for name in outputs:
        path = d / name
        if not path.is_file():
            print(f"error: manifest lists missing file {name}", file=sys.stderr)
            return EXIT_VALIDATION
        table = read_table(path)
        if table.name == "oracle_suite":
            passed = sum(1 for r in table.rows if r[-1] == "true")
            chunks.append(f"\n[oracle_suite] {passed}/{len(table.rows)} checks passed")
            cols = ["check", "n", "value", "tolerance", "pass"]
            failed = Table("failed", table.columns, [r for r in table.rows if r[-1] != "true"])
            if failed.rows:
                chunks.append(render_text(failed, cols))
        elif table.name in _REPORT_COLUMNS:
            cols = [c for c in _REPORT_COLUMNS[table.name] if c in table.columns]
            chunks.append(f"\n[{table.name}]\n" + render_text(table, cols))
        else:
            continue
        for i, row in enumerate(table.rows):
            for c, v in zip(table.columns, row):
                summary.add(table.name, i, c, v)
    text = "\n".join(chunks) + "\n"
    atomic_write(d / "summary.txt", text)
    atomic_write(d / "summary.csv", table_to_csv(summary, manifest.get("config_hash", "")))
    sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="srpolymer", description="Drifted self-repelling polymer experiments.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--seed", type=int, default=None, help="override the config seed (unsigned 64-bit)")
    r.add_argument("--threads", type=int, default=1, help="worker threads for Monte Carlo replicas")
    r.add_argument("--out", default=None, help=f"output directory (default: ${OUT_ENV} or ./results, per run)")
    r.set_defaults(func=cmd_run)
    rep = sub.add_parser("report", help="summarise a results directory")
    rep.add_argument("dir")
    rep.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_VALIDATION
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
