"""Deterministic lossless compressor backends and compressed-length measurement.

Two backends are provided: DEFLATE inside a gzip (RFC 1952) container and the
Burrows-Wheeler based bzip2 format. Every gzip header field that could vary
between runs or hosts is pinned, so the container bytes are a pure function of
(backend, level, input) and match ``gzip -n -<level>`` for levels 3-9.
"""

from __future__ import annotations

import bz2
import enum
import struct
import zlib
from dataclasses import dataclass
from typing import Iterable, Iterator

GZIP_HEADER_LEN = 10
GZIP_TRAILER_LEN = 8
GZIP_OVERHEAD = GZIP_HEADER_LEN + GZIP_TRAILER_LEN

# DEFLATE back-reference window.
DEFLATE_WINDOW = 32 * 1024

_GZIP_OS_UNIX = 3


class Backend(str, enum.Enum):
    deflate_gzip = "deflate_gzip"
    bwt_bzip2 = "bwt_bzip2"

    @property
    def tag(self) -> int:
        return _BACKEND_TAGS[self]

    @classmethod
    def from_tag(cls, tag: int) -> "Backend":
        for backend, t in _BACKEND_TAGS.items():
            if t == tag:
                return backend
        raise ValueError(f"unknown compressor tag {tag}")

    @classmethod
    def parse(cls, name: str) -> "Backend":
        name = name.lower()
        if name in ("gzip", "gz", "deflate", "deflate_gzip"):
            return cls.deflate_gzip
        if name in ("bz2", "bzip2", "bwt", "bwt_bzip2"):
            return cls.bwt_bzip2
        raise ValueError(f"unknown compressor {name!r}")


_BACKEND_TAGS = {Backend.deflate_gzip: 0, Backend.bwt_bzip2: 1}


@dataclass(frozen=True)
class CompressorSpec:
    backend: Backend = Backend.deflate_gzip
    level: int = 9

    def __post_init__(self):
        if not 1 <= self.level <= 9:
            raise ValueError(f"compression level must be in 1..9, got {self.level}")
        object.__setattr__(self, "backend", Backend(self.backend))

    @property
    def short_name(self) -> str:
        return "gzip" if self.backend is Backend.deflate_gzip else "bz2"

    def __str__(self) -> str:
        return f"{self.short_name}-{self.level}"


GZIP9 = CompressorSpec(Backend.deflate_gzip, 9)
BZ2_9 = CompressorSpec(Backend.bwt_bzip2, 9)


def _gzip_header(level: int) -> bytes:
    xfl = 2 if level == 9 else 4 if level == 1 else 0
    # magic, CM=deflate, FLG=0, MTIME=0, XFL, OS
    return struct.pack("<BBBBIBB", 0x1F, 0x8B, 8, 0, 0, xfl, _GZIP_OS_UNIX)


def _raw_deflate(level: int, data: bytes) -> bytes:
    c = zlib.compressobj(level, zlib.DEFLATED, -zlib.MAX_WBITS, 9)
    return c.compress(data) + c.flush()


def compress(spec: CompressorSpec, data: bytes) -> bytes:
    """Compress ``data`` into a complete gzip or bzip2 container."""
    if spec.backend is Backend.deflate_gzip:
        trailer = struct.pack("<II", zlib.crc32(data), len(data) & 0xFFFFFFFF)
        return _gzip_header(spec.level) + _raw_deflate(spec.level, data) + trailer
    return bz2.compress(data, spec.level)


def decompress(spec: CompressorSpec, blob: bytes) -> bytes:
    if spec.backend is Backend.deflate_gzip:
        d = zlib.decompressobj(16 + zlib.MAX_WBITS)
        out = d.decompress(blob) + d.flush()
        if not d.eof:
            raise ValueError("truncated gzip stream")
        return out
    return bz2.decompress(blob)


def compressed_len(spec: CompressorSpec, data: bytes) -> int:
    """Byte length of ``compress(spec, data)``, headers and trailers included.

    The gzip container adds a fixed 18 bytes around the DEFLATE stream, so the
    CRC is skipped here.
    """
    if spec.backend is Backend.deflate_gzip:
        return GZIP_OVERHEAD + len(_raw_deflate(spec.level, data))
    return len(bz2.compress(data, spec.level))


def joint_lengths(spec: CompressorSpec, prefix: bytes, suffixes: Iterable[bytes]) -> Iterator[int]:
    """Yield ``compressed_len(spec, prefix + s)`` for each ``s`` in ``suffixes``.

    For DEFLATE the compressor state after consuming ``prefix`` is built once
    and cloned per suffix. zlib's output does not depend on how input is split
    across ``compress`` calls, so the lengths equal the one-shot values.
    """
    if spec.backend is not Backend.deflate_gzip:
        for s in suffixes:
            yield compressed_len(spec, prefix + s)
        return
    primed = zlib.compressobj(spec.level, zlib.DEFLATED, -zlib.MAX_WBITS, 9)
    head = GZIP_OVERHEAD + len(primed.compress(prefix))
    for s in suffixes:
        c = primed.copy()
        yield head + len(c.compress(s)) + len(c.flush())


def conditional_bytes(len_x: int, len_xy: int) -> int:
    """Extra compressed bytes needed for y once x has been seen: ``L(xy) - L(x)``.

    Returned as-is, which may be zero or negative for degenerate inputs.
    """
    return len_xy - len_x
