"""CSV formats for trajectories, endpoints, snapshots, loss logs and the f(alpha) curve.

Floats are written with ``repr`` so files round-trip exactly and reruns are
byte-identical.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from bridgematch.couplings import PairedBatch


class CsvFormatError(ValueError):
    def __init__(self, path, row: int, message: str):
        super().__init__(f"{path}: row {row}: {message}")
        self.row = row


def _fmt(x) -> str:
    return repr(float(x))


def _write(path, header: list[str], rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def endpoint_header(d: int) -> list[str]:
    return ["path_id"] + [f"x0_{i}" for i in range(d)] + [f"x1_{i}" for i in range(d)]


def trajectory_header(d: int) -> list[str]:
    return ["path_id", "step", "t"] + [f"x_{i}" for i in range(d)] + [f"pred_{i}" for i in range(d)]


def write_endpoints(path, batch: PairedBatch):
    d = batch.dim
    rows = ([str(i)] + [_fmt(v) for v in batch.x0s[i]] + [_fmt(v) for v in batch.x1s[i]]
            for i in range(len(batch)))
    _write(path, endpoint_header(d), rows)


def write_trajectories(path, times, states, preds, path_ids=None):
    n, steps, d = states.shape
    path_ids = range(n) if path_ids is None else path_ids

    def rows():
        for k, pid in enumerate(path_ids):
            for i in range(steps):
                yield ([str(pid), str(i), _fmt(times[i])] + [_fmt(v) for v in states[k, i]]
                       + [_fmt(v) for v in preds[k, i]])

    _write(path, trajectory_header(d), rows())


def write_snapshot(path, t: float, x0s, preds):
    d = x0s.shape[1]
    header = ["path_id", "t"] + [f"x0_{i}" for i in range(d)] + [f"pred_{i}" for i in range(d)]
    rows = ([str(k), _fmt(t)] + [_fmt(v) for v in x0s[k]] + [_fmt(v) for v in preds[k]]
            for k in range(len(x0s)))
    _write(path, header, rows)


def write_loss_log(path, log):
    _write(path, ["step", "loss"], ([str(s), _fmt(v)] for s, v in log))


def write_gaussian_curve(path, alphas, values, a_star: float):
    _write(path, ["alpha", "f_alpha", "alpha_star"],
           ([_fmt(a), _fmt(f), _fmt(a_star)] for a, f in zip(alphas, values)))


def read_table(path) -> tuple[list[str], np.ndarray]:
    """Header and a float matrix; rows are numbered from 1 after the header."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise CsvFormatError(path, 0, "empty file (no header)") from None
            data = []
            for row_no, row in enumerate(reader, start=1):
                if not row:
                    continue
                if len(row) != len(header):
                    raise CsvFormatError(path, row_no, f"expected {len(header)} fields, got {len(row)}")
                try:
                    data.append([float(v) for v in row])
                except ValueError:
                    raise CsvFormatError(path, row_no, "non-numeric field") from None
    except FileNotFoundError as exc:
        raise CsvFormatError(path, 0, "file not found") from exc
    arr = np.array(data, dtype=np.float64).reshape(len(data), len(header))
    return header, arr


def _columns(header, prefix):
    return [i for i, h in enumerate(header) if h.startswith(prefix)]


def csv_kind(header: list[str]) -> str:
    if header[:3] == ["path_id", "step", "t"]:
        return "trajectory"
    if header[:1] == ["path_id"] and any(h.startswith("x1_") for h in header):
        return "endpoints"
    if header[:1] == ["alpha"]:
        return "gaussian"
    if header[:2] == ["path_id", "t"]:
        return "snapshot"
    return "unknown"


def read_endpoints(path) -> PairedBatch:
    header, arr = read_table(path)
    if csv_kind(header) != "endpoints":
        raise CsvFormatError(path, 0, f"not an endpoint file (header {header})")
    c0, c1 = _columns(header, "x0_"), _columns(header, "x1_")
    if len(c0) != len(c1) or not c0:
        raise CsvFormatError(path, 0, "x0_/x1_ columns do not pair up")
    return PairedBatch(arr[:, c0].reshape(-1, len(c0)), arr[:, c1].reshape(-1, len(c1)))


def read_trajectories(path):
    """``{path_id: (t, states, preds)}`` from a trajectory file."""
    header, arr = read_table(path)
    if csv_kind(header) != "trajectory":
        raise CsvFormatError(path, 0, f"not a trajectory file (header {header})")
    cx, cp = _columns(header, "x_"), _columns(header, "pred_")
    out = {}
    for pid in dict.fromkeys(arr[:, 0].astype(int).tolist()):
        rows = arr[arr[:, 0] == pid]
        out[pid] = (rows[:, 2], rows[:, cx], rows[:, cp])
    return out
