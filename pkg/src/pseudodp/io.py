"""CSV ingestion and the release / study / sweep file writers."""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError, DataError
from .models.base import Dataset
from .utility import one_hot


@dataclass
class Table:
    header: list
    columns: dict  # name -> list of raw strings
    path: Optional[Path] = None

    @property
    def n(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def read_table(path) -> Table:
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: cannot open ({exc.strerror})") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, a header row is required") from None
        except (csv.Error, UnicodeDecodeError) as exc:
            raise DataError(f"{path}:1: {exc}") from exc
        header = [h.strip() for h in header]
        if len(set(header)) != len(header) or "" in header:
            raise DataError(f"{path}:1: header has empty or duplicate column names")
        cols = {h: [] for h in header}
        try:
            for row in reader:
                line = reader.line_num
                if not row or all(not cell.strip() for cell in row):
                    continue
                if len(row) != len(header):
                    raise DataError(f"{path}:{line}: expected {len(header)} fields, got {len(row)}")
                for h, cell in zip(header, row):
                    cols[h].append(cell.strip())
        except (csv.Error, UnicodeDecodeError) as exc:
            raise DataError(f"{path}:{reader.line_num}: {exc}") from exc
    if not cols[header[0]]:
        raise DataError(f"{path}: no data rows")
    return Table(header, cols, path)


def _response(table: Table, response: str, integer: bool) -> np.ndarray:
    if response not in table.columns:
        raise ConfigError(f"response column {response!r} not found; columns are {table.header}")
    out = np.empty(table.n)
    for i, raw in enumerate(table.columns[response]):
        try:
            v = float(raw)
        except ValueError:
            raise DataError(f"{table.path}:{i + 2}: response {response!r} value {raw!r} is not numeric") from None
        if not math.isfinite(v):
            raise DataError(f"{table.path}:{i + 2}: response {response!r} value {raw!r} is not finite")
        if integer and (v < 0 or v != int(v)):
            raise DataError(f"{table.path}:{i + 2}: Poisson response {raw!r} is not a non-negative integer")
        out[i] = v
    return out


def dataset_from_table(table: Table, response: str, model: str) -> Dataset:
    """Poisson: response only.  Mixture: remaining columns are categorical predictors."""
    y = _response(table, response, integer=(model == "poisson"))
    if model == "poisson":
        return Dataset(y)
    cats = {h: table.columns[h] for h in table.header if h != response}
    if not cats:
        return Dataset(y, np.ones((y.size, 1)))
    levels = {h: sorted(set(v)) for h, v in cats.items()}
    return Dataset(y, one_hot({h: np.asarray(v) for h, v in cats.items()}, levels))


def _fmt(v: float, integer: bool = False) -> str:
    if integer:
        return str(int(v))
    return repr(float(v))


def write_table(path, header, columns: dict):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(zip(*(columns[h] for h in header)))


def write_synthetic(outdir: Path, table: Table, response: str, databases, integer: bool) -> list:
    paths = []
    for j, db in enumerate(databases, start=1):
        cols = dict(table.columns)
        cols[response] = [_fmt(v, integer) for v in db]
        path = outdir / f"synthetic_{j:03d}.csv"
        write_table(path, table.header, cols)
        paths.append(path)
    return paths


def write_weights(path: Path, release) -> None:
    f = release.risk.f
    ft = release.risk.f_tilde
    a = release.weights.alpha
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["record_id", "f", "f_tilde", "alpha"])
        for i in range(a.size):
            w.writerow([i + 1, repr(float(f[i])), repr(float(ft[i])), repr(float(a[i]))])


def json_safe(obj):
    """Recursively convert numpy / non-finite values into JSON-representable ones."""
    if isinstance(obj, dict):
        return {str(k): json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [json_safe(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def dump_json(path: Path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(json_safe(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def config_hash(cfg: dict) -> str:
    blob = json.dumps(json_safe(cfg), sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()
