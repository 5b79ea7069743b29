"""Binary containers and CSV exports for distance, kernel and embedding matrices.

All containers are little-endian. Common prefix::

    magic     4 bytes   b"NCDM" | b"NCDK" | b"NCDE"
    version   u32       1

NCDM (distance matrix)::

    n u64, symmetric u8, compressor tag u8, level u8,
    n*n f64 row-major values, n ids

NCDK (kernel matrix) is NCDM followed in the header by ``sigma2 f64, mode u8``
before the values. NCDE (embedding)::

    n u64, q u32, q f64 eigenvalues, n*q f64 row-major coords, n ids

Each id is a u32 byte length followed by UTF-8 bytes.
"""

from __future__ import annotations

import csv
import io
import struct
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .compress import Backend, CompressorSpec
from .errors import FormatError
from .kernel import KernelMatrix, KernelMode
from .kpca import Embedding
from .ncd import DistanceMatrix

VERSION = 1
MAGIC_DIST = b"NCDM"
MAGIC_KERNEL = b"NCDK"
MAGIC_EMBED = b"NCDE"

_UNKNOWN_TAG = 0xFF
_KERNEL_MODE_TAGS = {KernelMode.row_feature: 0, KernelMode.distance_substitution: 1}


def _spec_fields(spec: CompressorSpec | None) -> tuple[int, int]:
    if spec is None:
        return _UNKNOWN_TAG, 0
    return spec.backend.tag, spec.level


def _spec_from_fields(tag: int, level: int) -> CompressorSpec | None:
    if tag == _UNKNOWN_TAG:
        return None
    try:
        return CompressorSpec(Backend.from_tag(tag), level)
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def _write_ids(fh: BinaryIO, ids: list[str]) -> None:
    for rid in ids:
        raw = rid.encode("utf-8")
        fh.write(struct.pack("<I", len(raw)))
        fh.write(raw)


class _Reader:
    def __init__(self, data: bytes, what: str):
        self.data = data
        self.pos = 0
        self.what = what

    def take(self, size: int) -> bytes:
        end = self.pos + size
        if end > len(self.data):
            raise FormatError(f"truncated {self.what} file")
        chunk = self.data[self.pos:end]
        self.pos = end
        return chunk

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def floats(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * count), dtype="<f8").astype(np.float64)

    def ids(self, n: int) -> list[str]:
        out = []
        for _ in range(n):
            (size,) = self.unpack("<I")
            try:
                out.append(self.take(size).decode("utf-8"))
            except UnicodeDecodeError as exc:
                raise FormatError(f"bad id encoding in {self.what} file") from exc
        return out

    def finish(self) -> None:
        if self.pos != len(self.data):
            raise FormatError(f"trailing bytes in {self.what} file")


def _open(path: str | Path, magic: bytes, what: str) -> _Reader:
    r = _Reader(Path(path).read_bytes(), what)
    if len(r.data) < 8 or r.data[:4] != magic:
        raise FormatError(f"{path}: not a {what} file (bad magic)")
    r.take(4)
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported {what} version {version}")
    return r


def _values_bytes(values: np.ndarray) -> bytes:
    return np.ascontiguousarray(values, dtype="<f8").tobytes()


def dumps_distance(dm: DistanceMatrix) -> bytes:
    buf = io.BytesIO()
    tag, level = _spec_fields(dm.spec)
    buf.write(MAGIC_DIST)
    buf.write(struct.pack("<IQBBB", VERSION, dm.n, int(dm.symmetric), tag, level))
    buf.write(_values_bytes(dm.values))
    _write_ids(buf, dm.ids)
    return buf.getvalue()


def write_distance(dm: DistanceMatrix, path: str | Path) -> None:
    Path(path).write_bytes(dumps_distance(dm))


def read_distance(path: str | Path) -> DistanceMatrix:
    r = _open(path, MAGIC_DIST, "NCDM distance matrix")
    n, sym, tag, level = r.unpack("<QBBB")
    spec = _spec_from_fields(tag, level)
    values = r.floats(n * n).reshape(n, n)
    ids = r.ids(n)
    r.finish()
    return DistanceMatrix(values, ids, spec=spec, symmetric=bool(sym))


def write_kernel(km: KernelMatrix, path: str | Path) -> None:
    tag, level = _spec_fields(km.spec)
    with Path(path).open("wb") as fh:
        fh.write(MAGIC_KERNEL)
        fh.write(struct.pack("<IQBBB", VERSION, km.n, 1, tag, level))
        fh.write(struct.pack("<dB", km.sigma2, _KERNEL_MODE_TAGS[km.mode]))
        fh.write(_values_bytes(km.values))
        _write_ids(fh, km.ids)


def read_kernel(path: str | Path) -> KernelMatrix:
    r = _open(path, MAGIC_KERNEL, "NCDK kernel matrix")
    n, _sym, tag, level = r.unpack("<QBBB")
    sigma2, mode_tag = r.unpack("<dB")
    modes = {v: k for k, v in _KERNEL_MODE_TAGS.items()}
    if mode_tag not in modes:
        raise FormatError(f"unknown kernel mode tag {mode_tag}")
    values = r.floats(n * n).reshape(n, n)
    ids = r.ids(n)
    r.finish()
    return KernelMatrix(values, ids, sigma2, modes[mode_tag], spec=_spec_from_fields(tag, level))


def write_embedding(emb: Embedding, path: str | Path) -> None:
    with Path(path).open("wb") as fh:
        fh.write(MAGIC_EMBED)
        fh.write(struct.pack("<IQI", VERSION, emb.n, emb.q))
        fh.write(_values_bytes(emb.eigenvalues))
        fh.write(_values_bytes(emb.coords))
        _write_ids(fh, emb.ids)


def read_embedding(path: str | Path) -> Embedding:
    r = _open(path, MAGIC_EMBED, "NCDE embedding")
    n, q = r.unpack("<QI")
    eigenvalues = r.floats(q)
    coords = r.floats(n * q).reshape(n, q)
    ids = r.ids(n)
    r.finish()
    return Embedding(coords, eigenvalues, ids)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_matrix_csv(values: np.ndarray, ids: list[str], path: str | Path) -> None:
    """Square matrix as CSV: header row of ids, then one row per id."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", *ids])
        for rid, row in zip(ids, values):
            w.writerow([rid, *map(_fmt, row)])


def read_matrix_csv(path: str | Path) -> tuple[np.ndarray, list[str]]:
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path}: empty matrix CSV")
    ids = rows[0][1:]
    if [r[0] for r in rows[1:]] != ids:
        raise FormatError(f"{path}: row ids do not match header")
    try:
        values = np.array([[float(x) for x in r[1:]] for r in rows[1:]], dtype=np.float64)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    return values.reshape(len(ids), len(ids)), ids


def write_embedding_csv(
    emb: Embedding, path: str | Path, comment: str | None = None
) -> None:
    """``id,c0,...`` CSV with 17 significant digits.

    ``comment`` is written first as a ``# ...`` line when given.
    """
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", *(f"c{k}" for k in range(emb.q))])
        for rid, row in zip(emb.ids, emb.coords):
            w.writerow([rid, *map(_fmt, row)])


def read_embedding_csv(path: str | Path) -> tuple[np.ndarray, list[str], dict[str, str]]:
    """Return (coords, ids, comment key/values) from an embedding CSV."""
    meta: dict[str, str] = {}
    body = []
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                for part in line[1:].strip().split(","):
                    if "=" in part:
                        key, value = part.split("=", 1)
                        meta[key.strip()] = value.strip()
            else:
                body.append(line)
    rows = list(csv.reader(body))
    if not rows or not rows[0] or rows[0][0] != "id":
        raise FormatError(f"{path}: embedding CSV must start with an 'id' column header")
    q = len(rows[0]) - 1
    ids = [r[0] for r in rows[1:]]
    try:
        coords = np.array([[float(x) for x in r[1:]] for r in rows[1:]], dtype=np.float64)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    return coords.reshape(len(ids), q), ids, meta
