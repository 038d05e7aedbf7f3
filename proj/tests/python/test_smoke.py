import math
import os
import subprocess

import pytest

import semvis

TINY = {
    "backbone_hidden": [4, 6, 8],
    "backbone_channels": 8,
    "adapt_channels": 8,
    "embed_dim": 8,
    "word_dim": 4,
    "batch_size": 4,
    "lr": 0.01,
}


def test_worked_loss_example():
    assert semvis.ranking_loss([[0.9, 0.8], [0.1, 0.7]], [0, 1]) == pytest.approx(0.2, abs=1e-15)
    with pytest.raises(semvis.Error):
        semvis.ranking_loss([[0.9, 0.8], [0.1, 0.7]], [0, 0])


def test_retrieval_hand_case():
    r = semvis.eval_retrieval([[0.1, 0.9], [0.8, 0.2]], [0, 1])
    assert r["caption_retrieval"]["r_at"]["1"] == 0.0
    assert r["caption_retrieval"]["r_at"]["5"] == 1.0


def test_large_scale_dry_run():
    report = semvis.dry_run(semvis.large_scale_config(), 10000, 384)
    assert report["k"] == 180
    assert report["activations"]["adapted_features"] == [2400, 12, 12]
    with pytest.raises(semvis.Error):
        semvis.dry_run(None, 15, 72)


def test_train_save_load(tmp_path):
    data = semvis.generate_dataset(8, 3)
    assert len(data) == 8
    assert len(data.captions(0)) == 5
    assert len(data.vocab) == 15
    session = semvis.Session(TINY, data)
    log = session.run_epoch(data)
    assert log["epoch"] == 0 and math.isfinite(log["loss"])
    ckpt = tmp_path / "run.ckpt"
    session.save(ckpt)
    resumed = semvis.Session.load(ckpt)
    assert resumed.epoch == 1
    assert resumed.run_epoch(data) == session.run_epoch(data)
    phrase = data.regions(0)[0][0]
    loc = resumed.localize(data, 0, phrase)
    assert 0 <= loc["x"] < 64 and len(loc["values"]) == loc["rows"] * loc["cols"]
    pointing = resumed.evaluate_pointing(data)
    assert 0.0 <= pointing["accuracy"] <= 1.0


def test_cli_trains_on_python_written_dataset(tmp_path):
    cli = os.environ.get("SEMVIS_CLI")
    if not cli:
        pytest.skip("command-line tool not provided")
    data = semvis.generate_dataset(4, 5)
    data.save(tmp_path / "data")
    assert semvis.read_dataset(tmp_path / "data").captions(0) == data.captions(0)
    ckpt = tmp_path / "cli.ckpt"
    flags = [f"--{key.replace('_', '-')}" for key in TINY]
    values = [",".join(map(str, v)) if isinstance(v, list) else str(v) for v in TINY.values()]
    args = [cli, "train", "--data", str(tmp_path / "data"), "--out", str(ckpt), "--epochs", "1"]
    for flag, value in zip(flags, values):
        args += [flag, value]
    assert subprocess.run(args, capture_output=True).returncode == 0
    assert semvis.Session.load(ckpt).epoch == 1
