"""Command-line entry point: ``idks run|bench|verify|sweep``.

Exit codes: 0 success, 1 bad configuration, 2 ingestion failure,
3 runtime failure, 4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .data import TwoClusterSpec, gen_two_cluster, load_csv, minmax_first_window, shuffle_dataset
from .data import LabeledDataset
from .evaluation import (
    SABOTAGE,
    bench_runtime,
    median_rows,
    oracle_equivalence,
    psi_sweep,
    uniformity_test,
)
from .exceptions import IngestionError, ParameterError
from .streaming import StreamConfig, run_stream

log = logging.getLogger("idks")

EXIT_OK, EXIT_CONFIG, EXIT_INGEST, EXIT_RUNTIME, EXIT_VERIFY = 0, 1, 2, 3, 4
OUT_ENV = "IDKS_OUT_DIR"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ParameterError(message)


def _int_list(text):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated integers, got %r" % text)
    return vals


def _add_source(p):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--input", type=Path, help="CSV file: features then a 0/1 label column")
    src.add_argument("--synth", choices=["two-cluster"], help="generate a synthetic stream")
    p.add_argument("--n", type=int, default=100_000, help="synthetic stream length")
    p.add_argument("--label-column", default="-1", help="label column index or header name")
    p.add_argument("--header", action="store_true", help="CSV has a header line")
    p.add_argument("--normalize", choices=["none", "minmax"], default="none")
    p.add_argument("--shuffle", action="store_true", help="shuffle rows before streaming")


def _add_detector(p, modes=True):
    if modes:
        p.add_argument("--mode", choices=["idks", "incremental", "retrain", "offline"], default="idks")
    p.add_argument("--window", type=int, default=2048)
    p.add_argument("--step", type=int, default=100)
    p.add_argument("--psi", type=int, default=4)
    p.add_argument("--t", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--retrain-interval", type=int, default=1)


def _add_out(p):
    p.add_argument("--out", type=Path, default=None,
                   help="output directory (default: $%s or ./idks-out)" % OUT_ENV)


def build_parser():
    parser = _Parser(prog="idks", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version="idks " + __version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("run", help="score a stream")
    _add_source(p)
    _add_detector(p)
    _add_out(p)
    p.add_argument("--ndjson", action="store_true", help="also write scores as NDJSON")
    p.add_argument("--replay", type=Path, help="re-run the parameters of a manifest.json")

    p = sub.add_parser("bench", help="time incremental vs retrain over a grid")
    _add_source(p)
    _add_detector(p, modes=False)
    _add_out(p)
    p.add_argument("--omegas", type=_int_list, default=[1024, 2048, 4096, 8192])
    p.add_argument("--modes", default="idks,retrain")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--max-updates", type=int, default=50)

    p = sub.add_parser("verify", help="sampling-uniformity and oracle-equivalence checks")
    p.add_argument("--window", type=int, default=6)
    p.add_argument("--psi", type=int, default=2)
    p.add_argument("--step", type=int, default=2)
    p.add_argument("--slides", type=int, default=3)
    p.add_argument("--trials", type=int, default=150_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sabotage", choices=sorted(SABOTAGE), default="none")
    p.add_argument("--oracle-n", type=int, default=3000)
    p.add_argument("--oracle-window", type=int, default=256)
    p.add_argument("--oracle-step", type=int, default=25)
    p.add_argument("--oracle-t", type=int, default=20)

    p = sub.add_parser("sweep", help="AUC and time per psi")
    _add_source(p)
    _add_detector(p)
    _add_out(p)
    p.add_argument("--psis", type=_int_list, default=[2, 4, 8, 16, 32, 64])
    return parser


def _seeds(seed):
    """Independent data, shuffle, and detector seeds derived from one ``--seed``."""
    children = np.random.SeedSequence(seed).spawn(3)
    return [int(c.generate_state(1, dtype=np.uint32)[0]) for c in children]


def _load_source(args):
    data_seed, shuffle_seed, run_seed = _seeds(args.seed)
    if args.input is not None:
        if not args.input.exists():
            raise IngestionError("input file not found: %s" % args.input)
        ds = load_csv(args.input, label_column=args.label_column, has_header=args.header,
                      normalize=args.normalize, omega=args.window)
        fingerprint = hashlib.sha256(args.input.read_bytes()).hexdigest()
    elif args.synth == "two-cluster":
        ds = gen_two_cluster(TwoClusterSpec(n=args.n, seed=data_seed))
        if args.normalize == "minmax":
            ds = LabeledDataset(minmax_first_window(ds.X, args.window), ds.y, ds.name)
        fingerprint = ds.fingerprint()
    else:
        raise IngestionError("no input: pass --input PATH or --synth two-cluster")
    if args.shuffle:
        ds = shuffle_dataset(ds, shuffle_seed)
    return ds, fingerprint, run_seed


def _out_dir(args) -> Path:
    out = args.out or Path(os.environ.get(OUT_ENV, "idks-out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


def _params(args):
    skip = {"out", "replay", "verbose", "func"}
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k not in skip}


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out: Path, args, fingerprint, started, outputs):
    manifest = {
        "tool": "idks",
        "version": __version__,
        "command": args.command,
        "params": _params(args),
        "seed": getattr(args, "seed", None),
        "input_fingerprint": fingerprint,
        "started": started,
        "finished": _now(),
        "outputs": {name: _sha256(out / name) for name in outputs},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def write_scores_csv(path: Path, result) -> None:
    labels = result.label
    with open(path, "w", newline="") as fh:
        fh.write("stream_index,normal_score,label,scored_at_step\n")
        for i in range(len(result)):
            lab = "" if labels is None else str(int(labels[i]))
            fh.write("%d,%r,%s,%d\n" % (result.stream_index[i], float(result.normal_score[i]), lab,
                                        result.scored_at_step[i]))


def write_scores_ndjson(path: Path, result) -> None:
    with open(path, "w") as fh:
        for rec in result.records():
            fh.write(json.dumps({"stream_index": rec.stream_index, "normal_score": rec.normal_score,
                                 "label": rec.label, "scored_at_step": rec.scored_at_step}) + "\n")


def _config(args, **override) -> StreamConfig:
    kw = dict(omega=args.window, step=args.step, psi=args.psi, t=args.t,
              mode=getattr(args, "mode", "incremental"), retrain_interval=args.retrain_interval)
    kw.update(override)
    return StreamConfig(**kw)


def cmd_run(args) -> int:
    if args.replay is not None:
        manifest = json.loads(args.replay.read_text())
        for k, v in manifest["params"].items():
            if k in ("input",) and v is not None:
                v = Path(v)
            setattr(args, k, v)
    started = _now()
    cfg = _config(args, seed=0)  # validate before loading data
    ds, fingerprint, run_seed = _load_source(args)
    cfg = replace(cfg, seed=run_seed)
    result = run_stream(ds.X, ds.y, cfg)
    out = _out_dir(args)
    write_scores_csv(out / "scores.csv", result)
    outputs = ["scores.csv"]
    if args.ndjson:
        write_scores_ndjson(out / "scores.ndjson", result)
        outputs.append("scores.ndjson")
    metrics = result.metrics()
    metrics["dataset"] = {"name": ds.name, "n": len(ds), "d": ds.d, "anomaly_rate": ds.anomaly_rate}
    (out / "metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    outputs.append("metrics.json")
    write_manifest(out, args, fingerprint, started, outputs)
    auc = metrics.get("auc")
    print("scored %d instances (%s), auc=%s, out=%s" % (
        len(ds), cfg.mode, "n/a" if auc is None else "%.4f" % auc, out))
    return EXIT_OK


BENCH_FIELDS = ["kind", "mode", "omega", "step", "psi", "t", "seed", "mean_update_time",
                "median_update_time", "total_time", "auc", "updates"]


def cmd_bench(args) -> int:
    modes = [m for m in args.modes.split(",") if m.strip()]
    if not args.omegas or not modes:
        raise ParameterError("empty benchmark grid")
    if args.repeats < 1:
        raise ParameterError("--repeats must be >= 1")
    started = _now()
    grid = [_config(args, omega=w, mode=m, seed=0) for w in args.omegas for m in modes]
    if args.input is None and args.synth is None:
        args.synth = "two-cluster"
        args.n = min(args.n, max(args.omegas) + args.max_updates * args.step)
    ds, fingerprint, run_seed = _load_source(args)
    grid = [replace(c, seed=run_seed) for c in grid]
    rows = bench_runtime(grid, ds.X, ds.y, repeats=args.repeats, max_updates=args.max_updates)
    out = _out_dir(args)
    with open(out / "bench.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=BENCH_FIELDS)
        w.writeheader()
        for kind, rs in (("seed", rows), ("median", median_rows(rows))):
            for r in rs:
                w.writerow(dict(r.to_dict(), kind=kind))
    write_manifest(out, args, fingerprint, started, ["bench.csv"])
    for r in median_rows(rows):
        print("%-11s omega=%-5d median update %.3f ms" % (r.mode, r.omega, 1e3 * r.median_update_time))
    return EXIT_OK


def cmd_verify(args) -> int:
    uni = uniformity_test(args.window, args.psi, args.step, args.slides, args.trials, args.seed,
                          draw=SABOTAGE[args.sabotage])
    print("sampling uniformity (omega=%d, psi=%d, step=%d, slides=%d, trials=%d, sabotage=%s): %s"
          % (args.window, args.psi, args.step, args.slides, args.trials, args.sabotage, uni.summary()))
    rng = np.random.default_rng(args.seed)
    X = rng.normal(size=(args.oracle_n, 2))
    cfg = StreamConfig(omega=args.oracle_window, step=args.oracle_step, psi=args.psi,
                       t=args.oracle_t, seed=args.seed)
    eq = oracle_equivalence(X, cfg)
    print("oracle equivalence (%d updates): %s, max relative score difference %.3g"
          % (eq["updates"], "PASS" if eq["passed"] else "FAIL %s" % eq["mismatches"][:5],
             eq["max_rel_score_diff"]))
    return EXIT_OK if uni.passed and eq["passed"] else EXIT_VERIFY


def cmd_sweep(args) -> int:
    if not args.psis:
        raise ParameterError("--psis is empty")
    started = _now()
    template = _config(args, psi=max(2, min(args.psis)), seed=0)
    for psi in args.psis:
        replace(template, psi=psi)  # validates each psi against omega
    ds, fingerprint, run_seed = _load_source(args)
    rows, best = psi_sweep(ds.X, ds.y, replace(template, seed=run_seed), args.psis)
    out = _out_dir(args)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["psi", "auc", "time"])
        for r in rows:
            w.writerow([r.psi, repr(r.auc), repr(r.time)])
    write_manifest(out, args, fingerprint, started, ["sweep.csv"])
    for r in rows:
        print("psi=%-3d auc=%.4f time=%.2fs" % (r.psi, r.auc, r.time))
    print("argmax_psi=%d" % best)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "bench": cmd_bench, "verify": cmd_verify, "sweep": cmd_sweep}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_CONFIG
        return COMMANDS[args.command](args)
    except ParameterError as exc:
        print("idks: configuration error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    except IngestionError as exc:
        print("idks: ingestion error: %s" % exc, file=sys.stderr)
        return EXIT_INGEST
    except Exception as exc:  # noqa: BLE001 - top-level boundary
        log.debug("runtime failure", exc_info=True)
        print("idks: runtime failure: %s: %s" % (type(exc).__name__, exc), file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
