import math
import os

import pytest

import _vrlab

CONFIG = """
[problem]
n = 128
height = 8
width = 8
hidden = 12, 8
holdout_fraction = 0.25

[optimizer]
method = {method}
batch_size = 16
lr = 0.05

[run]
epochs = 2
lr_drops = none
seed = 99

[output]
run_id = smoke
"""


def test_run_experiment_roundtrip(tmp_path):
    config = CONFIG.format(method="svrg")
    records = _vrlab.run_experiment(config, ["output.out_dir=" + str(tmp_path)])
    assert len(records) == 4  # (train + holdout) rows for each of 2 epochs
    first = records[0]
    assert first.method == "svrg"
    assert first.epoch == 0
    assert first.train_loss > 0.0

    path = os.path.join(str(tmp_path), "smoke_metrics.csv")
    parsed = _vrlab.read_metrics_csv(path)
    assert len(parsed) == len(records)
    assert parsed[-1].run_id in ("smoke", "smoke/test")


def test_run_experiment_rejects_bad_config():
    with pytest.raises(ValueError):
        _vrlab.run_experiment("[optimizer]\nmethod = warp\n", [])


def test_variance_and_curvature_scans(tmp_path):
    config = CONFIG.format(method="svrg")
    overrides = ["output.out_dir=" + str(tmp_path), "run.epochs = 1"]
    var_rows = _vrlab.variance_scan(config, overrides)
    assert [row.fraction for row in var_rows] == [0.02, 0.11, 0.33, 0.66, 1.0]
    # With 8 steps per epoch, fraction 0.02 rounds to the snapshot itself,
    # where the locked estimator has exactly zero variance.
    assert all(row.var_ratio >= 0.0 for row in var_rows)
    assert var_rows[-1].var_ratio > 0.0
    assert os.path.exists(os.path.join(str(tmp_path), "smoke_variance.csv"))

    curv_rows = _vrlab.curvature_scan(config, overrides)
    assert len(curv_rows) == 5
    assert os.path.exists(os.path.join(str(tmp_path), "smoke_curvature.csv"))


def test_plot_emits_gnuplot_series(tmp_path):
    config = CONFIG.format(method="sgd")
    _vrlab.run_experiment(config, ["output.out_dir=" + str(tmp_path)])
    csv = os.path.join(str(tmp_path), "smoke_metrics.csv")
    out = os.path.join(str(tmp_path), "err.dat")
    _vrlab.plot("test_error", csv, out)
    with open(out) as fh:
        body = fh.read()
    assert "smoke/test@sgd" in body
    assert body.strip()


def test_generate_dataset_writes_file(tmp_path):
    path = os.path.join(str(tmp_path), "toy.bin")
    _vrlab.generate_dataset(64, 4, 4, 1, 2, 7, path)
    assert os.path.getsize(path) > 64 * 4 * 4 * 4


def test_numeric_helpers():
    assert _vrlab.trace_variance([[1.0, 2.0], [3.0, 4.0]]) == 2.0
    assert _vrlab.iterate_distance([0.0, 3.0], [4.0, 3.0]) == 4.0
    avg = _vrlab.tail_average_snapshot([[2.0], [4.0]], 1.0)
    assert avg == [3.0]
    assert _vrlab.schedule_lr(20, 0.1, [(15, 0.1)]) == pytest.approx(0.01)


def test_determinism_across_calls(tmp_path):
    config = CONFIG.format(method="scsg")
    overrides = ["optimizer.mega_batch=64"]  # default 160 exceeds n=128
    a = _vrlab.run_experiment(config, overrides + ["output.out_dir=" + str(tmp_path / "a")])
    b = _vrlab.run_experiment(config, overrides + ["output.out_dir=" + str(tmp_path / "b")])
    assert len(a) == len(b)
    for ra, rb in zip(a, b):
        assert ra.train_loss == rb.train_loss
        assert math.isfinite(ra.train_loss)
