"""CSV output, the per-epoch loss sidecar and the run manifest."""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path

import numpy as np

from .engine import GenerationRecord
from .errors import IlmError
from .metrics import MetricTriple

SCHEMA_VERSION = 1
HEADER = (
    "replicate", "generation", "x_raw", "c_raw", "s_raw", "x", "c", "s",
    "loss_dec", "loss_enc", "loss_auto", "ms",
)
LOSS_HEADER = ("replicate", "generation", "network", "epoch", "loss")
NETWORKS = ("dec", "enc", "auto")


class OutputError(IlmError, OSError):
    """A file could not be written or read."""


def fmt(value) -> str:
    """Six significant digits; ``None`` and NaN become an empty field."""
    if value is None:
        return ""
    value = float(value)
    if math.isnan(value):
        return ""
    return f"{value:.6g}"


def _final(losses) -> float | None:
    return None if losses is None or len(losses) == 0 else float(losses[-1])


def _open_for_write(path: Path):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", encoding="utf-8", newline="")
    except OSError as exc:
        raise OutputError(f"{path}: {exc.strerror}") from None


def _write_rows(path, header, rows) -> Path:
    path = Path(path)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    with _open_for_write(path) as fh:
        fh.write(buf.getvalue())
    return path


def complete(records) -> list[GenerationRecord]:
    """Records with metrics, sorted by (replicate, generation)."""
    return sorted((r for r in records if r.metrics is not None), key=lambda r: r.key)


def write_csv(records, path, timings: bool = False) -> Path:
    """One row per (replicate, generation).

    Loss columns hold the final-epoch mean loss of each network. The ``ms``
    column is left empty unless ``timings`` is set, which keeps reruns
    byte-identical.
    """
    rows = []
    for rec in complete(records):
        m = rec.metrics
        rows.append([
            rec.replicate, rec.generation,
            fmt(m.x_raw), fmt(m.c_raw), fmt(m.s_raw), fmt(m.x), fmt(m.c), fmt(m.s),
            fmt(_final(rec.loss_dec)), fmt(_final(rec.loss_enc)), fmt(_final(rec.loss_auto)),
            fmt(rec.ms) if timings else "",
        ])
    return _write_rows(path, HEADER, rows)


def write_losses(records, path) -> Path:
    """Per-epoch mean losses in long form: one row per (replicate, generation, network, epoch)."""
    rows = []
    for rec in complete(records):
        for name, losses in zip(NETWORKS, (rec.loss_dec, rec.loss_enc, rec.loss_auto)):
            if losses is None:
                continue
            rows.extend([rec.replicate, rec.generation, name, e + 1, fmt(v)] for e, v in enumerate(losses))
    return _write_rows(path, LOSS_HEADER, rows)


def _num(text: str) -> float | None:
    return None if text == "" else float(text)


def _read_rows(path, header) -> list[dict]:
    path = Path(path)
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != header:
                raise OutputError(f"{path}: unexpected header {reader.fieldnames}")
            return list(reader)
    except OSError as exc:
        raise OutputError(f"{path}: {exc.strerror}") from None


def read_csv(path, losses_path=None) -> list[GenerationRecord]:
    """Records from :func:`write_csv` output.

    Loss arrays come from the sidecar when ``losses_path`` is given;
    otherwise each holds the single final-epoch value from the CSV.
    """
    records = []
    for row in _read_rows(path, HEADER):
        metrics = MetricTriple(*(float(row[k]) for k in ("x_raw", "c_raw", "s_raw", "x", "c", "s")))
        losses = {}
        for name in NETWORKS:
            v = _num(row[f"loss_{name}"])
            losses[name] = None if v is None else np.array([v])
        ms = _num(row["ms"])
        records.append(GenerationRecord(
            int(row["replicate"]), int(row["generation"]), metrics,
            losses["dec"], losses["enc"], losses["auto"], 0.0 if ms is None else ms,
        ))
    if losses_path is not None:
        attach_losses(records, read_losses(losses_path))
    return sorted(records, key=lambda r: r.key)


def read_losses(path) -> dict[tuple[int, int, str], np.ndarray]:
    acc: dict[tuple[int, int, str], dict[int, float]] = {}
    for row in _read_rows(path, LOSS_HEADER):
        key = (int(row["replicate"]), int(row["generation"]), row["network"])
        acc.setdefault(key, {})[int(row["epoch"])] = float(row["loss"])
    return {k: np.array([v[e] for e in sorted(v)]) for k, v in acc.items()}


def attach_losses(records, losses: dict) -> None:
    for rec in records:
        for name in NETWORKS:
            key = (rec.replicate, rec.generation, name)
            setattr(rec, f"loss_{name}", losses.get(key))


# -- manifest ----------------------------------------------------------------


def write_manifest(path, entries: dict) -> Path:
    """``key=value`` lines in insertion order."""
    path = Path(path)
    text = "".join(f"{k}={_manifest_value(v)}\n" for k, v in entries.items())
    with _open_for_write(path) as fh:
        fh.write(text)
    return path


def _manifest_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (list, tuple)):
        return ",".join(str(x) for x in v)
    return str(v).replace("\n", " ")


def read_manifest(path) -> dict[str, str]:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise OutputError(f"{path}: {exc.strerror}") from None
    return dict(line.split("=", 1) for line in lines if "=" in line)
