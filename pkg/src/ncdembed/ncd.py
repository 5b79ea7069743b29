"""Normalized compression distance and the pairwise distance matrix."""

from __future__ import annotations

import enum
import logging
import os
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .compress import (
    DEFLATE_WINDOW,
    Backend,
    CompressorSpec,
    GZIP9,
    compressed_len,
    joint_lengths,
)
from .errors import EmptyDataset, ZeroLength
from .seqio import Dataset, SequenceRecord

log = logging.getLogger(__name__)

NCD_SANITY_MAX = 1.5


class ConcatMode(str, enum.Enum):
    direct = "direct"
    space_joined = "space_joined"


def concat(a: bytes, b: bytes, mode: ConcatMode = ConcatMode.direct) -> bytes:
    if ConcatMode(mode) is ConcatMode.space_joined:
        return a + b" " + b
    return a + b


def ncd(len_x: int, len_y: int, len_xy: int) -> float:
    """NCD = (L(xy) - min(L(x), L(y))) / max(L(x), L(y))."""
    hi = max(len_x, len_y)
    if hi <= 0:
        raise ZeroLength("max(L_x, L_y) must be positive")
    return (len_xy - min(len_x, len_y)) / hi


@dataclass
class DistanceMatrix:
    values: np.ndarray
    ids: list[str]
    spec: CompressorSpec = GZIP9
    symmetric: bool = False
    concat_mode: ConcatMode = ConcatMode.direct
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] != self.values.shape[1]:
            raise ValueError(f"distance matrix must be square, got {self.values.shape}")
        if len(self.ids) != self.values.shape[0]:
            raise ValueError("id list length does not match matrix size")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def check(self) -> None:
        v = self.values
        if not np.all(np.isfinite(v)):
            raise ValueError("distance matrix has non-finite entries")
        if v.size and (v.min() < 0 or v.max() > NCD_SANITY_MAX):
            raise ValueError(
                f"NCD entries outside [0, {NCD_SANITY_MAX}]: "
                f"min={v.min():.6g} max={v.max():.6g}"
            )
        if self.symmetric and not np.array_equal(v, v.T):
            raise ValueError("matrix flagged symmetric but is not")


def resolve_threads(threads: int) -> int:
    if threads <= 0:
        return os.cpu_count() or 1
    return threads


def _row(
    i: int,
    seqs: Sequence[bytes],
    lengths: np.ndarray,
    spec: CompressorSpec,
    mode: ConcatMode,
) -> np.ndarray:
    prefix = concat(seqs[i], b"", mode)
    joint = np.fromiter(joint_lengths(spec, prefix, seqs), dtype=np.float64, count=len(seqs))
    li = lengths[i]
    return (joint - np.minimum(li, lengths)) / np.maximum(li, lengths)


def distance_matrix(
    d: Dataset,
    spec: CompressorSpec = GZIP9,
    concat_mode: ConcatMode = ConcatMode.direct,
    threads: int = 1,
    zero_diagonal: bool = False,
    progress: Optional[Callable[[int, int], None]] = None,
) -> DistanceMatrix:
    """Full n x n NCD matrix; entry [i, j] compresses s_i followed by s_j.

    Single-sequence lengths are computed once up front. Rows are farmed out to
    a thread pool (zlib and bz2 release the GIL while compressing); each row is
    computed independently, so the result does not depend on ``threads``.
    ``progress(done, total)`` is called from the calling thread.
    """
    if len(d) == 0:
        raise EmptyDataset()
    concat_mode = ConcatMode(concat_mode)
    seqs = [r.residues for r in d.records]
    n = len(seqs)
    lengths = np.array([compressed_len(spec, s) for s in seqs], dtype=np.float64)

    if spec.backend is Backend.deflate_gzip:
        sizes = np.sort([len(s) for s in seqs])
        sep = 1 if concat_mode is ConcatMode.space_joined else 0
        limit = DEFLATE_WINDOW - sep - sizes
        over = int(n * n - np.searchsorted(sizes, limit, side="right").sum())
        if over:
            log.warning(
                "%d of %d concatenations exceed the 32 KiB DEFLATE window; "
                "NCD is less informative for those pairs",
                over,
                n * n,
            )

    values = np.empty((n, n), dtype=np.float64)
    workers = resolve_threads(threads)
    if workers == 1:
        for i in range(n):
            values[i] = _row(i, seqs, lengths, spec, concat_mode)
            if progress:
                progress(i + 1, n)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {
                pool.submit(_row, i, seqs, lengths, spec, concat_mode): i for i in range(n)
            }
            for done, fut in enumerate(as_completed(futures), start=1):
                values[futures[fut]] = fut.result()
                if progress:
                    progress(done, n)

    if zero_diagonal:
        np.fill_diagonal(values, 0.0)
    dm = DistanceMatrix(
        values, d.ids, spec=spec, symmetric=False, concat_mode=concat_mode,
        meta={"zero_diagonal": zero_diagonal},
    )
    dm.check()
    return dm


def symmetrize(dm: DistanceMatrix) -> DistanceMatrix:
    """Replace each pair of mirrored entries by their average."""
    v = dm.values
    sym = (v + v.T) / 2.0
    return replace(dm, values=sym, symmetric=True, meta=dict(dm.meta))


def ncd_direct(
    s1: SequenceRecord | bytes,
    s2: SequenceRecord | bytes,
    spec: CompressorSpec = GZIP9,
    concat_mode: ConcatMode = ConcatMode.direct,
) -> float:
    a = s1.residues if isinstance(s1, SequenceRecord) else s1
    b = s2.residues if isinstance(s2, SequenceRecord) else s2
    return ncd(
        compressed_len(spec, a),
        compressed_len(spec, b),
        compressed_len(spec, concat(a, b, concat_mode)),
    )
