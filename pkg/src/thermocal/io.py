"""Readers and writers for the on-disk formats.

Everything round-trips exactly: floats are serialized with repr-precision
(shortest string that parses back to the same double), so a file written
twice from the same state is byte-identical.  Parse failures raise
DataError naming the file and the 1-based line.

Formats
-------
forcing CSV       timestamp,t_ext,i_beam,i_diff,i_ghi,wind,t_set
measurement CSV   timestamp,power_w
geometry file     key = value lines, '#' comments
chain CSV         iter,theta1,theta2,theta3,lambda2
ensemble CSVs     draw,qoi_mean_power_w  /  draw,t,power_w
reports           plain JSON, sorted keys

Timestamps may be numeric seconds or ISO-8601; they are stored internally
as seconds and written back as numbers.
"""

from __future__ import annotations

import csv
import json
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import DataError
from .thermal import CellGeometry, ForcingMatrix

FORCING_HEADER = ["timestamp", "t_ext", "i_beam", "i_diff", "i_ghi", "wind", "t_set"]
MEASUREMENT_HEADER = ["timestamp", "power_w"]
CHAIN_HEADER = ["iter", "theta1", "theta2", "theta3", "lambda2"]
QOI_HEADER = ["draw", "qoi_mean_power_w"]
SERIES_HEADER = ["draw", "t", "power_w"]


def _fmt(x) -> str:
    return repr(float(x))


def parse_timestamp(text: str) -> float:
    """Seconds from a numeric literal or an ISO-8601 datetime."""
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    try:
        # fromisoformat only learned the Z suffix in 3.11
        stamp = datetime.fromisoformat(text[:-1] + "+00:00" if text.endswith("Z") else text)
    except ValueError:
        raise DataError(f"cannot parse timestamp {text!r} as seconds or ISO-8601") from None
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return stamp.timestamp()


def _parse_float(text: str, path, line_no: int, column: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise DataError(f"{path}:{line_no}: column {column!r} has non-numeric "
                        f"value {text.strip()!r}") from None


def _read_rows(path, header: list[str]):
    """Yield (line_no, row) for a CSV with an exact expected header."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        if [c.strip() for c in first] != header:
            raise DataError(f"{path}:1: expected header {','.join(header)!r}, "
                            f"got {','.join(first)!r}")
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{line_no}: expected {len(header)} fields, "
                                f"got {len(row)}")
            yield line_no, row


def load_forcing(path) -> ForcingMatrix:
    columns = {name: [] for name in FORCING_HEADER}
    for line_no, row in _read_rows(path, FORCING_HEADER):
        for name, cell in zip(FORCING_HEADER, row):
            if name == "timestamp":
                try:
                    columns[name].append(parse_timestamp(cell))
                except DataError as exc:
                    raise DataError(f"{path}:{line_no}: {exc}") from None
            else:
                columns[name].append(_parse_float(cell, path, line_no, name))
    arrays = {name: np.asarray(vals, dtype=float) for name, vals in columns.items()}
    if arrays["timestamp"].size == 0:
        raise DataError(f"{path}: no data rows")
    return ForcingMatrix(
        timestamps=arrays["timestamp"], t_ext=arrays["t_ext"],
        i_beam=arrays["i_beam"], i_diff=arrays["i_diff"], i_ghi=arrays["i_ghi"],
        wind=arrays["wind"], t_set=arrays["t_set"],
    )


def save_forcing(path, forcing: ForcingMatrix) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FORCING_HEADER)
        for k in range(forcing.n):
            writer.writerow([
                _fmt(forcing.timestamps[k]), _fmt(forcing.t_ext[k]),
                _fmt(forcing.i_beam[k]), _fmt(forcing.i_diff[k]),
                _fmt(forcing.i_ghi[k]), _fmt(forcing.wind[k]),
                _fmt(forcing.t_set[k]),
            ])


def load_measurements(path):
    """Returns (timestamps, values) as float arrays."""
    stamps, values = [], []
    for line_no, row in _read_rows(path, MEASUREMENT_HEADER):
        try:
            stamps.append(parse_timestamp(row[0]))
        except DataError as exc:
            raise DataError(f"{path}:{line_no}: {exc}") from None
        values.append(_parse_float(row[1], path, line_no, "power_w"))
    if not values:
        raise DataError(f"{path}: no data rows")
    return np.asarray(stamps, dtype=float), np.asarray(values, dtype=float)


def save_measurements(path, timestamps, values) -> None:
    timestamps = np.asarray(timestamps, dtype=float)
    values = np.asarray(values, dtype=float)
    if timestamps.shape != values.shape:
        raise DataError(f"timestamps and values differ in shape: "
                        f"{timestamps.shape} vs {values.shape}")
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MEASUREMENT_HEADER)
        for ts, v in zip(timestamps, values):
            writer.writerow([_fmt(ts), _fmt(v)])


def load_geometry(path) -> CellGeometry:
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    mapping: dict[str, float] = {}
    with path.open() as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataError(f"{path}:{line_no}: expected 'key = value', got {raw.strip()!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key in mapping:
                raise DataError(f"{path}:{line_no}: duplicate key {key!r}")
            mapping[key] = _parse_float(value, path, line_no, key)
    try:
        return CellGeometry.from_mapping(mapping)
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


def save_geometry(path, geom: CellGeometry) -> None:
    with Path(path).open("w") as fh:
        for name in CellGeometry.field_names():
            fh.write(f"{name} = {_fmt(getattr(geom, name))}\n")


def save_chain_csv(path, thetas, lambda2s) -> None:
    thetas = np.asarray(thetas, dtype=float)
    lambda2s = np.asarray(lambda2s, dtype=float)
    if thetas.ndim != 2 or thetas.shape[1] != 3 or thetas.shape[0] != lambda2s.shape[0]:
        raise DataError(f"chain arrays disagree: thetas {thetas.shape}, "
                        f"lambda2s {lambda2s.shape}")
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CHAIN_HEADER)
        for m in range(thetas.shape[0]):
            writer.writerow([str(m + 1), _fmt(thetas[m, 0]), _fmt(thetas[m, 1]),
                             _fmt(thetas[m, 2]), _fmt(lambda2s[m])])


def load_chain_csv(path):
    """Returns (thetas (M,3), lambda2s (M,))."""
    thetas, lambda2s = [], []
    expected = 1
    for line_no, row in _read_rows(path, CHAIN_HEADER):
        it = _parse_float(row[0], path, line_no, "iter")
        if int(it) != expected:
            raise DataError(f"{path}:{line_no}: iter column must count 1..M, "
                            f"expected {expected}, got {row[0]}")
        expected += 1
        thetas.append([_parse_float(row[j], path, line_no, CHAIN_HEADER[j])
                       for j in (1, 2, 3)])
        lambda2s.append(_parse_float(row[4], path, line_no, "lambda2"))
    if not lambda2s:
        raise DataError(f"{path}: no data rows")
    return np.asarray(thetas, dtype=float), np.asarray(lambda2s, dtype=float)


def save_qoi_csv(path, qoi) -> None:
    qoi = np.asarray(qoi, dtype=float)
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(QOI_HEADER)
        for m, value in enumerate(qoi, start=1):
            writer.writerow([str(m), _fmt(value)])


def save_series_ensemble_csv(path, series) -> None:
    """series: (M, T) matrix, one row per draw."""
    series = np.asarray(series, dtype=float)
    if series.ndim != 2:
        raise DataError(f"expected an (M, T) matrix, got shape {series.shape}")
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SERIES_HEADER)
        for m in range(series.shape[0]):
            for t in range(series.shape[1]):
                writer.writerow([str(m + 1), str(t + 1), _fmt(series[m, t])])


def load_series_ensemble_csv(path) -> np.ndarray:
    """Inverse of save_series_ensemble_csv; returns the (M, T) matrix."""
    rows: list[list[float]] = []
    current: list[float] = []
    draw = 1
    for line_no, row in _read_rows(path, SERIES_HEADER):
        d = int(_parse_float(row[0], path, line_no, "draw"))
        t = int(_parse_float(row[1], path, line_no, "t"))
        if d == draw + 1:
            rows.append(current)
            current = []
            draw = d
        elif d != draw:
            raise DataError(f"{path}:{line_no}: draw column must advance 1..M, "
                            f"expected {draw} or {draw + 1}, got {d}")
        if t != len(current) + 1:
            raise DataError(f"{path}:{line_no}: t column must count 1..T per draw, "
                            f"expected {len(current) + 1}, got {t}")
        current.append(_parse_float(row[2], path, line_no, "power_w"))
    if not current:
        raise DataError(f"{path}: no data rows")
    rows.append(current)
    lengths = {len(r) for r in rows}
    if len(lengths) != 1:
        raise DataError(f"{path}: draws have unequal lengths {sorted(lengths)}")
    return np.asarray(rows, dtype=float)


def load_qoi_csv(path) -> np.ndarray:
    """Inverse of save_qoi_csv; returns the (M,) QoI draw vector."""
    values = []
    for line_no, row in _read_rows(path, QOI_HEADER):
        d = int(_parse_float(row[0], path, line_no, "draw"))
        if d != len(values) + 1:
            raise DataError(f"{path}:{line_no}: draw column must count 1..M, "
                            f"expected {len(values) + 1}, got {d}")
        values.append(_parse_float(row[1], path, line_no, "qoi_mean_power_w"))
    if not values:
        raise DataError(f"{path}: no data rows")
    return np.asarray(values, dtype=float)


def save_curve_csv(path, d, expected_utility, se) -> None:
    """Decision curve: one row per scanned fee."""
    d = np.asarray(d, dtype=float)
    eu = np.asarray(expected_utility, dtype=float)
    se = np.asarray(se, dtype=float)
    if not (d.shape == eu.shape == se.shape) or d.ndim != 1:
        raise DataError(f"curve columns disagree: {d.shape}, {eu.shape}, {se.shape}")
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["d", "expected_utility", "se"])
        for k in range(d.size):
            writer.writerow([_fmt(d[k]), _fmt(eu[k]), _fmt(se[k])])


def write_json(path, payload: dict) -> None:
    with Path(path).open("w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with path.open() as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON ({exc})") from None
