import csv
import hashlib
import json
import os
import shutil

import numpy as np
import pytest

from ecgbo import cli
from ecgbo.ecg import BeatSegment, write_csv
from ecgbo.errors import TrainingDiverged

TINY = {
    "dataset": {"window": 128, "max_beats": 200},
    "arch": {"base_filters": 2, "max_filters": 4},
    "train": {"max_epochs": 2, "patience": 2, "batch_size": 64},
    "bo": {"budget": 5, "initial_design_size": 3, "candidates": 256},
    "pso": {"particles": 2, "iterations": 2},
}


def _config(tmp_path, synth_db, **over):
    directory, entries = synth_db
    doc = json.loads(json.dumps(TINY))
    doc["dataset"].update(format="wfdb212", directory=str(directory), records=entries)
    for k, v in over.items():
        doc[k] = {**doc.get(k, {}), **v} if isinstance(v, dict) else v
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    return str(path)


def _run(*argv):
    return cli.main([str(a) for a in argv])


def _tree_digest(root, skip=("report",)):
    out = {}
    for dirpath, dirs, files in os.walk(root):
        dirs[:] = [d for d in dirs if d not in skip]
        for f in files:
            p = os.path.join(dirpath, f)
            out[os.path.relpath(p, root)] = hashlib.sha256(open(p, "rb").read()).hexdigest()
    return out


@pytest.fixture(scope="module")
def full_run(tmp_path_factory, synth_db):
    """prepare -> train -> tune bo -> tune pso on the tiny config."""
    tmp = tmp_path_factory.mktemp("run")
    cfg = _config(tmp, synth_db)
    out = tmp / "out"
    for cmd in (["prepare"], ["train"], ["tune", "--method", "bo"], ["tune", "--method", "pso"]):
        assert _run(*cmd, "--config", cfg, "--out", out) == 0
    return cfg, out


def test_prepare_csv_split_sizes(tmp_path):
    rng = np.random.default_rng(0)
    segs = [BeatSegment(rng.normal(size=16), "NLRAV"[i % 5]) for i in range(100)]
    write_csv(tmp_path / "beats.csv", segs)
    (tmp_path / "c.json").write_text(json.dumps({"dataset": {"format": "csv", "csv": "beats.csv"}}))
    assert _run("prepare", "--config", tmp_path / "c.json", "--out", tmp_path / "o") == 0
    summary = json.loads((tmp_path / "o/data/summary.json").read_text())
    assert summary["sizes"] == {"train": 70, "val": 15, "test": 15}
    assert sum(summary["class_counts"]["train"].values()) == 70


def test_prepare_rerun_is_byte_identical(tmp_path, synth_db):
    cfg = _config(tmp_path, synth_db)
    for name in ("a", "b"):
        assert _run("prepare", "--config", cfg, "--out", tmp_path / name) == 0
    assert _tree_digest(tmp_path / "a") == _tree_digest(tmp_path / "b")


def test_missing_annotation_file_names_path(tmp_path, synth_db, capsys):
    directory, entries = synth_db
    bad = [dict(entries[0], annotations="nope.ann")]
    (tmp_path / "c.json").write_text(json.dumps(
        {"dataset": {"format": "wfdb212", "directory": str(directory), "records": bad}}))
    assert _run("prepare", "--config", tmp_path / "c.json", "--out", tmp_path / "o") == 1
    assert "nope.ann" in capsys.readouterr().err


def test_bad_config_reports_error(tmp_path, capsys):
    (tmp_path / "c.json").write_text('{"dataset": {"colour": 1}}')
    assert _run("prepare", "--config", tmp_path / "c.json") == 1
    assert "colour" in capsys.readouterr().err
    assert _run("prepare", "--out", tmp_path / "o") == 1


def test_train_without_data_fails(tmp_path, capsys):
    assert _run("train", "--out", tmp_path) == 1
    assert "prepare" in capsys.readouterr().err


def test_train_artifacts(full_run):
    _, out = full_run
    for f in cli.RUN_FILES:
        assert (out / "train" / f).exists()
    rows = (out / "train/metrics.csv").read_text().splitlines()
    assert rows[-1].startswith("accuracy,")
    meta = json.loads((out / "train/model.json").read_text())["meta"]
    history = (out / "train/history.csv").read_text().strip().splitlines()
    assert len(history) - 1 == meta["stopped_epoch"]


def test_train_accepts_paper_optimum(tmp_path, synth_db):
    cfg = _config(tmp_path, synth_db, hyperparams={"drop_rate": 0.010738, "n_dense": 1,
                                                   "n_conv": 3, "learning_rate": 0.001832,
                                                   "adam_decay": 6e-6})
    assert _run("prepare", "--config", cfg, "--out", tmp_path / "o") == 0
    assert _run("train", "--config", cfg, "--out", tmp_path / "o") == 0


def test_divergence_reports_epoch(full_run, monkeypatch, capsys, tmp_path):
    cfg, out = full_run
    shutil.copytree(out / "data", tmp_path / "data")

    def diverge(*a, **k):
        raise TrainingDiverged(4)

    monkeypatch.setattr(cli, "train", diverge)
    assert _run("train", "--config", cfg, "--out", tmp_path) == 1
    assert "epoch 4" in capsys.readouterr().err


def test_tune_logs_and_comparison(full_run):
    cfg, out = full_run
    bo_lines = (out / "tune-bo/trials.jsonl").read_text().splitlines()
    assert len(bo_lines) == TINY["bo"]["budget"]
    assert len((out / "tune-pso/trials.jsonl").read_text().splitlines()) == 4
    first = json.loads(bo_lines[0])
    assert first["source"] == "default"
    with open(out / "comparison.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["method"] for r in rows] == ["none", "bo", "pso"]
    # trial 0 is the untuned model trained with the same seed
    none = next(r for r in rows if r["method"] == "none")
    assert float(none["val_accuracy"]) == pytest.approx(100 * first["val_accuracy"], abs=1e-4)
    best = json.loads((out / "tune-bo/best.json").read_text())
    assert best["objective"] <= first["objective"]


def test_tune_resume_matches_uninterrupted(full_run, tmp_path):
    cfg, out = full_run
    shutil.copytree(out / "data", tmp_path / "data")
    full = (out / "tune-bo/trials.jsonl").read_bytes()
    (tmp_path / "tune-bo").mkdir()
    lines = full.decode().splitlines(keepends=True)
    (tmp_path / "tune-bo/trials.jsonl").write_text("".join(lines[:3]) + lines[3][:20])
    assert _run("tune", "--method", "bo", "--config", cfg, "--out", tmp_path) == 0
    assert (tmp_path / "tune-bo/trials.jsonl").read_bytes() == full


def test_seed_flag_overrides_config(full_run, tmp_path):
    cfg, out = full_run
    shutil.copytree(out / "data", tmp_path / "data")
    assert _run("tune", "--method", "pso", "--config", cfg, "--out", tmp_path, "--seed", "9") == 0
    first = json.loads((tmp_path / "tune-pso/trials.jsonl").read_text().splitlines()[0])
    assert first["seed"] == 9


def test_evaluate(full_run, capsys):
    cfg, out = full_run
    assert _run("evaluate", "--config", cfg, "--out", out, "--split", "val") == 0
    assert "accuracy" in capsys.readouterr().out
    assert (out / "eval-val/metrics.csv").exists()


def test_report_read_only_and_complete(full_run):
    cfg, out = full_run
    before = _tree_digest(out)
    assert _run("report", "--out", out) == 0
    assert _tree_digest(out) == before
    rep = out / "report"
    for run in ("train", "tune-bo", "tune-pso"):
        for suffix in ("per_class", "confusion_normalized", "history"):
            assert (rep / f"{run}_{suffix}.csv").exists()
    assert (rep / "tune-bo_best_so_far.csv").exists()
    rows = (rep / "train_per_class.csv").read_text().splitlines()
    assert [r.split(",")[0] for r in rows[1:6]] == list("NLRAV")


def test_report_lists_missing(full_run, tmp_path, capsys):
    _, out = full_run
    shutil.copytree(out / "train", tmp_path / "train")
    (tmp_path / "train/history.csv").unlink()
    assert _run("report", "--out", tmp_path) == 1
    err = capsys.readouterr().err
    assert "train/history.csv" in err and "comparison.csv" in err


def test_lock_blocks_second_process(tmp_path, capsys):
    tmp_path.joinpath(".lock").write_text(str(os.getpid()))
    assert _run("report", "--out", tmp_path) == 1
    assert "locked" in capsys.readouterr().err
    tmp_path.joinpath(".lock").write_text("999999999")  # dead process: lock is taken over
    assert _run("report", "--out", tmp_path) == 1  # fails only for missing artifacts
    assert not tmp_path.joinpath(".lock").exists()
