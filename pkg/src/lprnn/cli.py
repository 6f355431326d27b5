"""Command-line entry point: ``lprnn {run,report,gen-task,analyze-eigen,map-snn}``.

Exit codes: 0 ok, 2 invalid config, 3 diverged run, 4 I/O failure. Errors are
printed to stderr as one JSON object ``{"error": ..., "message": ...}``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from importlib import resources
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from . import _backend
from .checkpoint import save_checkpoint
from .config import ExperimentConfig, dump_config, load_config, parse_config
from .errors import CheckpointError, ConfigError, DivergenceError, LpRnnError
from .experiments import RunResult, Table, run_experiment
from .numerics import STREAM_TASK, seeded_rng
from .tasks import gen_addition_batch, gen_copy_batch, gen_esn_pattern

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO = 0, 2, 3, 4
OUTPUT_ROOT_ENV = "LPRNN_OUTPUT_ROOT"
SUMMARY = "summary.json"
RESOLVED = "resolved_config.json"
METRICS = "metrics.csv"


class ArtifactError(LpRnnError, OSError):
    """A run directory lacks an expected file."""


def bundled_configs() -> List[str]:
    root = resources.files("lprnn") / "configs"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".json"))


def bundled_config_path(name: str) -> Path:
    return Path(str(resources.files("lprnn") / "configs" / name))


def _find_config(arg: str) -> Path:
    p = Path(arg)
    if p.exists():
        return p
    for name in (arg, f"{arg}.json"):
        q = bundled_config_path(name)
        if q.exists():
            return q
    return p


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def write_table(path: Path, table: Table) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(table.fields), lineterminator="\n")
        w.writeheader()
        for row in table.rows:
            w.writerow({k: _fmt(row.get(k, "")) for k in table.fields})


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _output_dir(cfg: ExperimentConfig, config_path: Path, out: Optional[str]) -> Path:
    if out:
        return Path(out)
    root = Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))
    return root / (cfg.output_dir or config_path.stem)


def execute(cfg: ExperimentConfig, out_dir: Path, threads: int = 1,
            max_stages: Optional[int] = None) -> RunResult:
    """Run ``cfg`` and write every artefact into ``out_dir``."""
    out_dir.mkdir(parents=True, exist_ok=True)
    saved: List[str] = []

    def hook(name, obj, meta):
        fname = f"{name}.ckpt.json"
        save_checkpoint(out_dir / fname, obj, meta)
        saved.append(fname)

    with threadpool_limits(limits=threads):
        result = run_experiment(cfg, max_stages, hook)
    with open(out_dir / RESOLVED, "w", encoding="utf-8") as fh:
        json.dump(dump_config(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
    for name, table in result.tables.items():
        write_table(out_dir / f"{name}.csv", table)
    summary = {
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "backend": _backend.NAME,
        "threads": threads,
        "max_stages": max_stages,
        "diverged": result.diverged,
        "metrics": _json_safe(result.metrics),
        "timing": result.timing,
        "checkpoints": saved,
        "config": dump_config(cfg),
    }
    with open(out_dir / SUMMARY, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return result


# ---------------------------------------------------------------------------
# report

def render_report(run_dir: Path) -> str:
    summary_path = run_dir / SUMMARY
    metrics_path = run_dir / METRICS
    if not summary_path.exists() or not metrics_path.exists():
        raise ArtifactError(f"{run_dir}: missing {SUMMARY} or {METRICS}")
    with open(summary_path, encoding="utf-8") as fh:
        summary = json.load(fh)
    with open(metrics_path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    out = io.StringIO()
    out.write(f"experiment: {summary['experiment']}  seed: {summary['seed']}  "
              f"backend: {summary['backend']}\n")
    for key in sorted(summary["metrics"]):
        val = summary["metrics"][key]
        if not isinstance(val, (dict, list)):
            out.write(f"  {key}: {val}\n")
    if rows:
        fields = list(rows[0].keys())
        widths = [max(len(f), *(len(r[f]) for r in rows)) for f in fields]
        out.write("  ".join(f.rjust(w) for f, w in zip(fields, widths)) + "\n")
        for r in rows:
            out.write("  ".join(r[f].rjust(w) for f, w in zip(fields, widths)) + "\n")
    out.write(f"rows: {len(rows)}\n")
    return out.getvalue()


# ---------------------------------------------------------------------------
# gen-task

def gen_task_table(task: str, n: int, length: int, seed: int, k: int = 8, s_max: int = 5,
                   marker_count: int = 2) -> Table:
    rng = seeded_rng(seed, STREAM_TASK)
    rows = []
    if task == "addition":
        b = gen_addition_batch(n, length, rng, marker_count)
        for j in range(n):
            for t in range(length):
                rows.append({"sample": j, "t": t, "value": float(b.x[t, j, 0]),
                             "marker": int(b.x[t, j, 1]), "target": float(b.target[j])})
        return Table(("sample", "t", "value", "marker", "target"), rows)
    if task == "copy":
        b = gen_copy_batch(n, s_max, length, k, rng)
        cls = np.argmax(b.x, axis=-1)
        for j in range(n):
            for t in range(b.x.shape[0]):
                if b.mask[t, j]:
                    rows.append({"sample": j, "t": t, "input": int(cls[t, j]),
                                 "target": int(b.target[t, j])})
        return Table(("sample", "t", "input", "target"), rows)
    sig = gen_esn_pattern(length, rng)
    rows = [{"t": t, "x": float(sig.x[t]), "label": float(sig.label_trace[t])}
            for t in range(length)]
    return Table(("t", "x", "label"), rows)


# ---------------------------------------------------------------------------
# argument handling

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lprnn", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config (path or bundled name)")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (default $LPRNN_OUTPUT_ROOT/<name>)")
    r.add_argument("--threads", type=int, default=1)
    r.add_argument("--max-stages", type=int, default=None,
                   help="stop curricula after this many stages")

    rep = sub.add_parser("report", help="render a finished run directory")
    rep.add_argument("run_dir")

    g = sub.add_parser("gen-task", help="dump task samples as CSV")
    g.add_argument("task", choices=("addition", "copy", "esn-pattern"))
    g.add_argument("--n", type=int, default=4)
    g.add_argument("--length", type=int, default=20,
                   help="sequence length (addition), blanks (copy) or steps (esn-pattern)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--k", type=int, default=8)
    g.add_argument("--s-max", type=int, default=5)
    g.add_argument("--markers", type=int, default=2)
    g.add_argument("--out", help="CSV path (default stdout)")

    e = sub.add_parser("analyze-eigen", help="planted-spectrum eigenvalue shift table")
    e.add_argument("--size", type=int, default=20)
    e.add_argument("--seeds", type=int, default=100)
    e.add_argument("--alphas", type=float, nargs="+", default=[0.0, 0.3, 0.6, 0.9, 1.0])
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", help="output directory")

    m = sub.add_parser("map-snn", help="map an ESN/lpRNN checkpoint to a spiking network")
    m.add_argument("checkpoint", nargs="?", help="ESN or single-input lpRNN checkpoint "
                                                 "(default: fresh ESN from --seed)")
    m.add_argument("--theta", type=float, default=0.01)
    m.add_argument("--oversampling", type=int, default=64)
    m.add_argument("--substep-drive", action="store_true",
                   help="re-evaluate the drive every substep instead of once per step")
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out", help="output directory")

    for sp in (e, m):
        sp.add_argument("--threads", type=int, default=1)
    return p


def _fail(code: int, exc: BaseException) -> int:
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc),
                                 "exit_code": code}) + "\n")
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            path = _find_config(args.config)
            cfg = load_config(path)
            out = _output_dir(cfg, path, args.out)
            result = execute(cfg, out, args.threads, args.max_stages)
            print(json.dumps({"output_dir": str(out), "metrics": _json_safe(result.metrics)},
                             sort_keys=True)[:2000])
            if result.diverged:
                return _fail(EXIT_DIVERGED, DivergenceError("training diverged (non-finite loss)"))
            return EXIT_OK
        if args.command == "report":
            sys.stdout.write(render_report(Path(args.run_dir)))
            return EXIT_OK
        if args.command == "gen-task":
            table = gen_task_table(args.task, args.n, args.length, args.seed, args.k,
                                   args.s_max, args.markers)
            if args.out:
                write_table(Path(args.out), table)
            else:
                w = csv.DictWriter(sys.stdout, fieldnames=list(table.fields), lineterminator="\n")
                w.writeheader()
                for row in table.rows:
                    w.writerow({k: _fmt(v) for k, v in row.items()})
            return EXIT_OK
        if args.command == "analyze-eigen":
            cfg = parse_config({"experiment": "analyze-eigen", "seed": args.seed,
                                "eigen": {"size": args.size, "seeds": args.seeds,
                                          "alphas": args.alphas}})
            out = Path(args.out) if args.out else Path(os.environ.get(OUTPUT_ROOT_ENV, "runs")) / "analyze-eigen"
            result = execute(cfg, out, args.threads)
            print(json.dumps({"output_dir": str(out), "metrics": _json_safe(result.metrics)},
                             sort_keys=True))
            return EXIT_OK
        if args.command == "map-snn":
            snn = {"theta": args.theta, "oversampling": args.oversampling,
                   "hold": not args.substep_drive}
            if args.checkpoint:
                snn["checkpoint"] = os.path.abspath(args.checkpoint)
            cfg = parse_config({"experiment": "map-snn", "seed": args.seed, "snn": snn})
            out = Path(args.out) if args.out else Path(os.environ.get(OUTPUT_ROOT_ENV, "runs")) / "map-snn"
            result = execute(cfg, out, args.threads)
            m = result.metrics
            print(json.dumps({"output_dir": str(out), "nmse": m["nmse"],
                              "nmse_smoothed": m["nmse_smoothed"],
                              "spikes_per_step": m["spikes_per_step"]}, sort_keys=True))
            return EXIT_OK
    except (ConfigError, CheckpointError) as exc:
        return _fail(EXIT_CONFIG, exc)
    except DivergenceError as exc:
        return _fail(EXIT_DIVERGED, exc)
    except OSError as exc:
        return _fail(EXIT_IO, exc)
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
