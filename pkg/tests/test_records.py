import numpy as np
import pytest

from iterlearn.engine import ExperimentConfig, GenerationRecord, run_experiment
from iterlearn.metrics import MetricTriple
from iterlearn.records import (
    HEADER,
    OutputError,
    fmt,
    read_csv,
    read_manifest,
    write_csv,
    write_losses,
    write_manifest,
)

HEADER_LINE = "replicate,generation,x_raw,c_raw,s_raw,x,c,s,loss_dec,loss_enc,loss_auto,ms\n"


def record(rep=0, gen=1, **kw):
    m = MetricTriple(0.123456789, 0.5, 1.0, 0.0987654321, 0.25, 1.0)
    return GenerationRecord(rep, gen, m, **kw)


def test_header_is_exact():
    assert ",".join(HEADER) + "\n" == HEADER_LINE


def test_zero_records_gives_header_only(tmp_path):
    path = write_csv([], tmp_path / "r.csv")
    assert path.read_bytes() == HEADER_LINE.encode()


def test_number_formatting():
    assert fmt(0.123456789) == "0.123457"
    assert fmt(1.0) == "1"
    assert fmt(1234567.0) == "1.23457e+06"
    assert fmt(None) == "" and fmt(float("nan")) == ""


def test_row_layout_and_absent_losses(tmp_path):
    rec = record(loss_enc=np.array([0.9, 0.4]), ms=12.5)
    text = write_csv([rec], tmp_path / "r.csv").read_bytes()
    assert text == (HEADER_LINE + "0,1,0.123457,0.5,1,0.0987654,0.25,1,,0.4,,\n").encode()
    timed = write_csv([rec], tmp_path / "t.csv", timings=True).read_text()
    assert timed.endswith(",12.5\n")
    assert b"\r" not in text


def test_round_trip_at_six_digits(tmp_path):
    rec = record(3, 7, loss_dec=np.array([0.31, 0.2999999]), loss_auto=np.array([1.5]))
    back = read_csv(write_csv([rec], tmp_path / "r.csv"))
    assert len(back) == 1
    b = back[0]
    assert (b.replicate, b.generation) == (3, 7)
    for k in ("x_raw", "c_raw", "s_raw", "x", "c", "s"):
        assert getattr(b.metrics, k) == float(f"{getattr(rec.metrics, k):.6g}")
    assert b.loss_dec.tolist() == [0.3] and b.loss_enc is None and b.loss_auto.tolist() == [1.5]


def test_loss_sidecar_round_trip(tmp_path):
    rec = record(loss_dec=np.array([0.5, 0.25, 0.125]), loss_enc=np.array([1.0, 0.5, 0.1]))
    csv = write_csv([rec], tmp_path / "r.csv")
    losses = write_losses([rec], tmp_path / "l.csv")
    assert losses.read_text().splitlines()[:2] == ["replicate,generation,network,epoch,loss", "0,1,dec,1,0.5"]
    back = read_csv(csv, losses)[0]
    assert back.loss_dec.tolist() == [0.5, 0.25, 0.125]
    assert back.loss_auto is None


def test_failed_records_are_not_written(tmp_path):
    recs = [record(), GenerationRecord(1, 1, None, error="NumericError: boom")]
    assert len(write_csv(recs, tmp_path / "r.csv").read_text().splitlines()) == 2


def test_rerun_is_byte_identical(tmp_path):
    cfg = ExperimentConfig(model="oilm", n=4, bottleneck_size=8, generations=3, replicates=2, epochs=4)
    a = write_csv(run_experiment(cfg), tmp_path / "a.csv").read_bytes()
    b = write_csv(run_experiment(cfg), tmp_path / "b.csv").read_bytes()
    assert a == b


def test_wrong_header_is_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(OutputError, match="header"):
        read_csv(path)


def test_manifest_round_trip(tmp_path):
    path = write_manifest(tmp_path / "m.txt", {"schema": 1, "files": ["a", "b"], "flag": True, "empty": None})
    assert path.read_text() == "schema=1\nfiles=a,b\nflag=true\nempty=\n"
    assert read_manifest(path) == {"schema": "1", "files": "a,b", "flag": "true", "empty": ""}


def test_unwritable_destination(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OutputError):
        write_csv([], blocker / "r.csv")
