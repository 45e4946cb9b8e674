"""End-to-end CLI: train a tiny model, emit, reload."""

import csv

import pytest

from attirnn.cli import main

from ar1util import ar1_trace


@pytest.fixture(scope="module")
def trace_csvs(tmp_path_factory):
    root = tmp_path_factory.mktemp("traces")
    paths = []
    for s in range(2):
        rsl = ar1_trace(80, seed=s)
        lines = ["timestamp_min,rsl_dbm"]
        lines += [f"{t},{v}" for t, v in enumerate(rsl)]
        p = root / f"link{s}.csv"
        p.write_text("\n".join(lines) + "\n")
        paths.append(p)
    return paths


def test_train_then_emit(tmp_path, trace_csvs, capsys):
    ckpt = tmp_path / "model.pt"
    rc = main(["train", "--traces", *map(str, trace_csvs), "--out", str(ckpt),
               "--epochs", "2", "--batch-size", "32", "--seed", "0"])
    assert rc == 0
    assert ckpt.exists()
    assert "val NLL" in capsys.readouterr().out

    out = tmp_path / "forecast.csv"
    rc = main(["emit", "--checkpoint", str(ckpt), "--trace",
               str(trace_csvs[0]), "--out", str(out), "--link-id", "0"])
    assert rc == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert rows[0].keys() == {"origin_slot", "h", "mu_dbm", "sigma2_db2"}
    assert len(rows) == (80 - 15 + 1) * 5


def test_missing_traces_exit_2(tmp_path, capsys):
    rc = main(["train", "--traces", str(tmp_path / "nope*.csv"),
               "--out", str(tmp_path / "m.pt")])
    assert rc == 2
    assert "no trace files" in capsys.readouterr().err
