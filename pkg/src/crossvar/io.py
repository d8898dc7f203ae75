"""File formats: path CSV/binary dumps, report JSON, per-replicate CSV,
and the run manifest.

Binary path layout (all little-endian, offsets in bytes):

    0   4s   magic  b"CVBP"
    4   u16  format version (1)
    6   u16  reserved (0)
    8   f64  Hurst index H
    16  u64  N, number of grid intervals
    24  f64  horizon T
    32  i64  seed (-1 when unknown)
    40  i32  component id
    44  i32  replicate id
    48  16s  generator id, ascii, NUL-padded
    64  f64 * (N+1) path values

The grid is implicit: t_k = k * T / N.  Round-trips are bit-exact.

Numeric CSV output uses repr(), the shortest representation that
round-trips a float, so re-reading a file reproduces the same bits.
"""

from __future__ import annotations

import csv
import datetime
import hashlib
import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .fbm import PathMeta, SamplePath, uniform_grid

__all__ = [
    "write_path_csv",
    "read_path_csv",
    "write_path_binary",
    "read_path_binary",
    "write_report_json",
    "write_replicates_csv",
    "read_increment_csv",
    "RunManifest",
]

_MAGIC = b"CVBP"
_HEADER = struct.Struct("<4sHHdQdqii16s")


def write_path_csv(path: SamplePath, filename) -> None:
    """Two columns t,value at full round-trip precision."""
    with open(filename, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "value"])
        for t, v in zip(path.grid, path.values):
            w.writerow([repr(float(t)), repr(float(v))])


def read_path_csv(filename, meta: PathMeta | None = None) -> SamplePath:
    grid = []
    values = []
    with open(filename, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip() for h in header] != ["t", "value"]:
            raise ValueError(f"{filename}: expected header 't,value', got {header}")
        for i, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise ValueError(f"{filename}: row {i} has {len(row)} fields")
            try:
                grid.append(float(row[0]))
                values.append(float(row[1]))
            except ValueError as exc:
                raise ValueError(f"{filename}: row {i} is not numeric: {row}") from exc
    if meta is None:
        meta = PathMeta(H=0.5, seed=None, generator="imported-csv")
    return SamplePath(np.asarray(grid), np.asarray(values), meta)


def write_path_binary(path: SamplePath, filename) -> None:
    m = path.meta
    seed = -1 if m.seed is None else int(m.seed)
    gen = m.generator.encode("ascii", "replace")[:16].ljust(16, b"\0")
    header = _HEADER.pack(_MAGIC, 1, 0, float(m.H), path.n_intervals,
                          path.T, seed, int(m.component), int(m.replicate), gen)
    with open(filename, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(path.values, dtype="<f8").tobytes())


def read_path_binary(filename) -> SamplePath:
    with open(filename, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise ValueError(f"{filename}: truncated header")
        magic, version, _, H, N, T, seed, component, replicate, gen = _HEADER.unpack(raw)
        if magic != _MAGIC:
            raise ValueError(f"{filename}: bad magic {magic!r}")
        if version != 1:
            raise ValueError(f"{filename}: unsupported format version {version}")
        values = np.frombuffer(fh.read(8 * (N + 1)), dtype="<f8")
        if values.size != N + 1:
            raise ValueError(f"{filename}: truncated values block")
    meta = PathMeta(H=H, seed=None if seed == -1 else seed,
                    generator=gen.rstrip(b"\0").decode("ascii"),
                    component=component, replicate=replicate)
    return SamplePath(uniform_grid(N, T), values.copy(), meta)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, float) and obj != obj:     # NaN: JSON-safe encoding
        return "nan"
    return obj


def write_report_json(report_dict: dict, filename) -> None:
    """Deterministic serialization: sorted keys, round-trip float repr."""
    with open(filename, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(report_dict), fh, sort_keys=True, indent=2)
        fh.write("\n")


def write_replicates_csv(rows, filename) -> None:
    """Rows (replicate, n, t, statistic, normalization)."""
    with open(filename, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["replicate", "n", "t", "statistic", "normalization"])
        for rep, n, t, v, norm in rows:
            w.writerow([rep, n, repr(float(t)), repr(float(v)), norm])


def read_increment_csv(filename) -> tuple[np.ndarray, np.ndarray]:
    """Two-column increment file (optional header) for the hypothesis test."""
    d1, d2 = [], []
    with open(filename, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for i, row in enumerate(reader, start=1):
            if not row or (i == 1 and any(not _is_number(c) for c in row)):
                continue          # header or blank line
            if len(row) != 2:
                raise ValueError(f"{filename}: row {i} has {len(row)} fields, expected 2")
            if not (_is_number(row[0]) and _is_number(row[1])):
                raise ValueError(f"{filename}: row {i} is not numeric: {row}")
            d1.append(float(row[0]))
            d2.append(float(row[1]))
    if not d1:
        raise ValueError(f"{filename}: no increment rows found")
    return np.asarray(d1), np.asarray(d2)


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


@dataclass
class RunManifest:
    """Reproducibility record written into every output directory.

    Written once before the run starts (status "running") and finalized
    after it ends; the digest changes iff the effective config content
    changes.  Data outputs themselves carry no timestamps, so a rerun from
    the same manifest is byte-identical.
    """

    command: str
    config_digest: str
    master_seed: int
    version: str
    outputs: list[str] = field(default_factory=list)
    status: str = "running"
    started_at: str = ""
    finished_at: str = ""
    extra: dict = field(default_factory=dict)

    PATH = "manifest.json"

    def write(self, outdir) -> str:
        os.makedirs(outdir, exist_ok=True)
        if not self.started_at:
            self.started_at = _utcnow()
        target = os.path.join(outdir, self.PATH)
        with open(target, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")
        return target

    def finalize(self, outdir, outputs) -> str:
        self.outputs = [os.path.basename(str(p)) for p in outputs]
        self.status = "completed"
        self.finished_at = _utcnow()
        return self.write(outdir)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "config_digest": self.config_digest,
            "master_seed": self.master_seed,
            "version": self.version,
            "outputs": self.outputs,
            "status": self.status,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "extra": _jsonable(self.extra),
        }


def _utcnow() -> str:
    return datetime.datetime.now(datetime.timezone.utc).replace(
        microsecond=0).isoformat().replace("+00:00", "Z")


def file_sha256(filename) -> str:
    h = hashlib.sha256()
    with open(filename, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()
