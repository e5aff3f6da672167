"""Command-line entry point: ``ecgbo {prepare,train,tune,evaluate,report,synth}``.

Output layout under ``--out``::

    data/{train,val,test}.csv, data/summary.json      prepare
    train/{model.json,history.csv,metrics.csv,confusion.csv}
    tune-<method>/{trials.jsonl,best.json,model.json,...}
    comparison.csv                                   one row per method
    report/...                                       report (read-only on the rest)
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from contextlib import contextmanager
from pathlib import Path

from ecgbo import bo, kernels, pso
from ecgbo import metrics as M
from ecgbo.config import ExperimentConfig
from ecgbo.ecg import beats as B
from ecgbo.ecg import wfdb
from ecgbo.errors import ConfigError, EcgBoError, StateError
from ecgbo.model import HyperParams, build_model
from ecgbo.nn import Network, evaluate, train
from ecgbo.space import space_bounds
from ecgbo.trials import FitnessResult, best_so_far, load_trials

log = logging.getLogger("ecgbo")

SPLITS = ("train", "val", "test")
COMPARISON_HEADER = ["method", "precision", "recall", "f1", "accuracy", "val_accuracy"]
METHOD_ORDER = {"none": 0, "bo": 1, "pso": 2}
RUN_FILES = ("model.json", "history.csv", "metrics.csv", "confusion.csv")


# --------------------------------------------------------------------------- helpers

@contextmanager
def out_lock(out: Path):
    """Exclusive per-directory lock; a lock left by a dead process is taken over."""
    out.mkdir(parents=True, exist_ok=True)
    lock = out / ".lock"
    for _ in range(2):
        try:
            fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
            break
        except FileExistsError:
            try:
                pid = int(lock.read_text().strip() or 0)
                os.kill(pid, 0)
            except (ValueError, ProcessLookupError):
                lock.unlink(missing_ok=True)
                continue
            except PermissionError:
                pass
            raise StateError(f"{out} is locked by running process {pid}") from None
    else:
        raise StateError(f"could not acquire {lock}")
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def load_segments(cfg: ExperimentConfig) -> list[B.BeatSegment]:
    ds = cfg.dataset
    classes = cfg.classes
    segs: list[B.BeatSegment] = []
    if ds["format"] == "csv":
        files = [ds["csv"]] if isinstance(ds["csv"], str) else ds["csv"]
        for f in files:
            segs.extend(B.load_csv(cfg.resolve(f), classes))
        widths = {len(s.values) for s in segs}
        if len(widths) > 1:
            raise EcgBoError(f"segment files disagree on window length: {sorted(widths)}")
    else:
        base = cfg.resolve(ds["directory"])
        for rec_cfg in ds["records"]:
            rec = wfdb.read_signal(base / rec_cfg["signal"], int(rec_cfg["sample_count"]),
                                   int(rec_cfg.get("channel_count", 2)),
                                   float(rec_cfg.get("sampling_rate", 360.0)),
                                   float(rec_cfg.get("gain", 200.0)),
                                   rec_cfg.get("id") or Path(rec_cfg["signal"]).stem)
            anns = wfdb.read_annotations(base / rec_cfg["annotations"])
            segs.extend(B.segment_beats(rec, anns, int(ds["window"]), classes,
                                        int(ds["channel"])))
    if ds["normalize"]:
        segs = [B.normalize_segment(s) for s in segs]
    if ds["max_beats"] is not None:
        segs = B.stratified_subset(segs, int(ds["max_beats"]), cfg.split_seed, classes)
    return segs


def load_prepared(out: Path, classes):
    data = out / "data"
    missing = [f"data/{s}.csv" for s in SPLITS if not (data / f"{s}.csv").exists()]
    if missing:
        raise StateError(f"prepared data missing ({', '.join(missing)}); run 'prepare' first")
    return {s: B.to_arrays(B.load_csv(data / f"{s}.csv", classes), classes) for s in SPLITS}


def fit_model(cfg: ExperimentConfig, h: HyperParams, data, seed: int):
    (xt, yt), (xv, yv) = data["train"], data["val"]
    spec = build_model(h, xt.shape[1], len(cfg.classes), cfg.arch, space_bounds(cfg.space))
    net, opt = spec.instantiate(seed)
    hist = train(net, opt, xt, yt, xv, yv, cfg.train_config, seed=seed)
    return spec, net, hist


def write_run(run_dir: Path, cfg: ExperimentConfig, spec, net: Network, hist, data) -> dict:
    """Save the model and its test-set evaluation; return the comparison-row values."""
    xs, ys = data["test"]
    run_dir.mkdir(parents=True, exist_ok=True)
    cm = M.confusion(ys, net.predict(xs), len(cfg.classes), cfg.classes)
    net.save(run_dir / "model.json", extra={"spec": spec.to_dict(), "classes": list(cfg.classes),
                                           "best_epoch": hist.best_epoch,
                                           "stopped_epoch": hist.stopped_epoch})
    _write(run_dir / "history.csv", hist.to_csv())
    _write(run_dir / "metrics.csv", M.metrics_csv(cm))
    _write(run_dir / "confusion.csv", M.matrix_csv(cm))
    macro = M.macro_scores(cm)
    if macro.undefined:
        log.warning("%s: some per-class metrics had zero denominators (reported as 0)", run_dir.name)
    return {"precision": macro.precision, "recall": macro.recall, "f1": macro.f1,
            "accuracy": 100 * cm.accuracy(), "val_accuracy": 100 * hist.best.val_acc}


def update_comparison(out: Path, method: str, row: dict) -> None:
    path = out / "comparison.csv"
    rows = {}
    if path.exists():
        for r in csv.DictReader(io.StringIO(path.read_text())):
            rows[r["method"]] = r
    rows[method] = {"method": method, **{k: f"{row[k]:.4f}" for k in COMPARISON_HEADER[1:]}}
    buf = io.StringIO()
    w = csv.DictWriter(buf, COMPARISON_HEADER, lineterminator="\n")
    w.writeheader()
    for m in sorted(rows, key=lambda m: (METHOD_ORDER.get(m, 99), m)):
        w.writerow(rows[m])
    _write(path, buf.getvalue())


# --------------------------------------------------------------------------- commands

def cmd_prepare(cfg: ExperimentConfig, args) -> int:
    out = cfg.out_dir
    segs = load_segments(cfg)
    ds = B.split(segs, cfg.split_fractions, cfg.split_seed)
    parts = dict(zip(SPLITS, (ds.train, ds.validation, ds.test)))
    (out / "data").mkdir(parents=True, exist_ok=True)
    summary = {"seed": cfg.split_seed, "window": len(segs[0].values), "total": len(segs),
               "classes": list(cfg.classes), "sizes": {}, "class_counts": {}}
    for name, part in parts.items():
        B.write_csv(out / "data" / f"{name}.csv", part)
        summary["sizes"][name] = len(part)
        summary["class_counts"][name] = B.class_counts(part, cfg.classes)
    _write(out / "data" / "summary.json", _dump_json(summary))
    print(f"prepared {len(segs)} beats -> train/val/test {ds.sizes()} in {out / 'data'}")
    return 0


def cmd_train(cfg: ExperimentConfig, args) -> int:
    out = cfg.out_dir
    data = load_prepared(out, cfg.classes)
    h = cfg.hyperparams
    t0 = time.perf_counter()
    spec, net, hist = fit_model(cfg, h, data, cfg.seed)
    row = write_run(out / "train", cfg, spec, net, hist, data)
    update_comparison(out, "none", row)
    print(f"trained {h.as_dict()} in {time.perf_counter() - t0:.1f}s: "
          f"stopped at epoch {hist.stopped_epoch}, best epoch {hist.best_epoch}, "
          f"test accuracy {row['accuracy']:.2f}%")
    return 0


def make_fitness(cfg: ExperimentConfig, data, keep: dict):
    """Validation error (or loss) of a fully trained model; keeps the best network."""
    metric = cfg.fitness_metric

    def fitness(params: dict, seed: int) -> FitnessResult:
        h = HyperParams.from_dict(params)
        spec, net, hist = fit_model(cfg, h, data, seed)
        best = hist.best
        objective = 1.0 - best.val_acc if metric == "val_accuracy" else best.val_loss
        if "objective" not in keep or objective < keep["objective"]:
            keep.update(objective=objective, params=params, spec=spec, net=net, hist=hist)
        return FitnessResult(objective, best.val_acc, hist.to_rows(),
                             {"best_epoch": hist.best_epoch})

    return fitness


def cmd_tune(cfg: ExperimentConfig, args) -> int:
    out = cfg.out_dir
    data = load_prepared(out, cfg.classes)
    run_dir = out / f"tune-{args.method}"
    run_dir.mkdir(parents=True, exist_ok=True)
    keep: dict = {}
    fitness = make_fitness(cfg, data, keep)
    space = cfg.space
    default = cfg.hyperparams
    t0 = time.perf_counter()
    if args.method == "bo":
        best, records = bo.optimise(fitness, space, cfg.bo_config(), default_point=default,
                                    log_path=run_dir / "trials.jsonl", resume=not args.fresh)
    else:
        best, records = pso.pso_optimise(fitness, space, cfg.pso_config(), default_point=default,
                                         log_path=run_dir / "trials.jsonl", resume=not args.fresh)
    if best.error is not None:
        raise StateError(f"every trial failed; first error: {records[0].error}")
    _write(run_dir / "best.json", _dump_json({
        "method": args.method, "index": best.index, "params": best.params,
        "objective": best.objective, "val_accuracy": best.val_accuracy,
        "fitness": cfg.fitness_metric, "trials": len(records)}))

    if keep.get("params") == best.params:
        spec, net, hist = keep["spec"], keep["net"], keep["hist"]
    else:  # best trial came from a resumed log: retrain it (same seed, same weights)
        spec, net, hist = fit_model(cfg, HyperParams.from_dict(best.params), data, best.seed)
    row = write_run(run_dir, cfg, spec, net, hist, data)
    update_comparison(out, args.method, row)
    print(f"{args.method}: {len(records)} trials in {time.perf_counter() - t0:.1f}s; best trial "
          f"{best.index} {best.params} objective {best.objective:.6g}; "
          f"test accuracy {row['accuracy']:.2f}%")
    return 0


def cmd_evaluate(cfg: ExperimentConfig, args) -> int:
    out = cfg.out_dir
    model_path = Path(args.model) if args.model else out / "train" / "model.json"
    if not model_path.exists():
        raise StateError(f"model file not found: {model_path}")
    doc = json.loads(model_path.read_text())
    net = Network.from_dict(doc)
    classes = tuple(doc.get("meta", {}).get("classes", cfg.classes))
    x, y = load_prepared(out, classes)[args.split]
    cm = M.confusion(y, net.predict(x), len(classes), classes)
    loss, acc = evaluate(net, x, y)
    dest = out / f"eval-{args.split}"
    _write(dest / "metrics.csv", M.metrics_csv(cm))
    _write(dest / "confusion.csv", M.matrix_csv(cm))
    print(M.metrics_csv(cm), end="")
    print(f"loss {loss:.6f} accuracy {100 * acc:.4f}%")
    return 0


def cmd_report(cfg: ExperimentConfig, args) -> int:
    out = cfg.out_dir
    dest = out / "report"
    runs = [d for d in ("train", "tune-bo", "tune-pso") if (out / d).is_dir()]
    missing = [f"{r}/{f}" for r in runs for f in RUN_FILES if not (out / r / f).exists()]
    missing += [f"{r}/trials.jsonl" for r in runs
                if r.startswith("tune-") and not (out / r / "trials.jsonl").exists()]
    if not runs:
        missing.append("train/ or tune-*/ (no runs found)")
    if not (out / "comparison.csv").exists():
        missing.append("comparison.csv")

    written = []
    for r in runs:
        run = out / r
        if (run / "confusion.csv").exists():
            cm = M.read_matrix_csv((run / "confusion.csv").read_text())
            _write(dest / f"{r}_per_class.csv", M.metrics_csv(cm))
            _write(dest / f"{r}_confusion_normalized.csv",
                   M.matrix_csv(cm, M.normalized_confusion(cm), "{:.6f}"))
            written += [f"{r}_per_class.csv", f"{r}_confusion_normalized.csv"]
        if (run / "history.csv").exists():
            _write(dest / f"{r}_history.csv", (run / "history.csv").read_text())
            written.append(f"{r}_history.csv")
        if (run / "trials.jsonl").exists():
            recs = load_trials(run / "trials.jsonl")
            lines = ["trial,objective,best_so_far\n"]
            lines += [f"{rec.index},{rec.objective!r},{b!r}\n"
                      for rec, b in zip(recs, best_so_far(recs))]
            _write(dest / f"{r}_best_so_far.csv", "".join(lines))
            written.append(f"{r}_best_so_far.csv")
    if (out / "comparison.csv").exists():
        _write(dest / "comparison.csv", (out / "comparison.csv").read_text())
        written.append("comparison.csv")
    for name in written:
        print(f"wrote {dest / name}")
    if missing:
        print("missing artifacts: " + ", ".join(missing), file=sys.stderr)
        return 1
    return 0


def cmd_synth(cfg: ExperimentConfig, args) -> int:
    """Write a synthetic format-212 database plus a ready-to-use config file."""
    from ecgbo.ecg.synth import write_synthetic_database

    out = cfg.out_dir
    entries = write_synthetic_database(out / "records", n_records=args.records,
                                       duration_s=args.duration, seed=cfg.seed)
    doc = {"seed": cfg.seed, "out": "run",
           "dataset": {"format": "wfdb212", "directory": "records", "records": entries}}
    _write(out / "config.json", _dump_json(doc))
    print(f"wrote {len(entries)} synthetic records and {out / 'config.json'}")
    return 0


COMMANDS = {"prepare": cmd_prepare, "train": cmd_train, "tune": cmd_tune,
            "evaluate": cmd_evaluate, "report": cmd_report, "synth": cmd_synth}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON experiment config")
    common.add_argument("--seed", type=int, help="experiment seed (overrides config)")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides config)")
    common.add_argument("--backend", choices=kernels.available_backends(),
                        help="kernel backend (default: compiled when available)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="ecgbo", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("prepare", parents=[common], help="segment, normalize and split the dataset")
    sub.add_parser("train", parents=[common], help="train the configured hyperparameters")
    t = sub.add_parser("tune", parents=[common], help="hyperparameter search")
    t.add_argument("--method", choices=("bo", "pso"), default="bo")
    t.add_argument("--fresh", action="store_true", help="ignore an existing trials.jsonl")
    e = sub.add_parser("evaluate", parents=[common], help="score a saved model on one split")
    e.add_argument("--model", metavar="PATH", help="model.json (default: OUT/train/model.json)")
    e.add_argument("--split", choices=SPLITS, default="test")
    sub.add_parser("report", parents=[common], help="collect plot-ready CSVs under OUT/report")
    s = sub.add_parser("synth", parents=[common], help="write a synthetic ECG database")
    s.add_argument("--records", type=int, default=6)
    s.add_argument("--duration", type=float, default=300.0, help="seconds per record")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.backend:
            kernels.use_backend(args.backend)
        if args.command == "prepare" and not args.config:
            raise ConfigError("prepare needs --config naming the dataset")
        cfg = ExperimentConfig.load(args.config)
        cfg.override(seed=args.seed, out=args.out)
        with out_lock(cfg.out_dir):
            return COMMANDS[args.command](cfg, args)
    except (EcgBoError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
