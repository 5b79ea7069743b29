"""Labeled sequence ingestion: TSV, FASTA + label CSV, and canonical TSV export."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import (
    DataError,
    DuplicateId,
    EmptyDataset,
    EmptySequence,
    MalformedFasta,
    MissingColumn,
    UnlabeledSequence,
)

MAX_SEQUENCE_BYTES = 2**31 - 1
NORMALIZERS = ("none", "upper")


@dataclass(frozen=True)
class SequenceRecord:
    id: str
    label: str
    residues: bytes

    def __len__(self) -> int:
        return len(self.residues)


@dataclass(frozen=True)
class Dataset:
    records: tuple[SequenceRecord, ...]
    classes: tuple[str, ...]
    source: str = field(default="", compare=False)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.records]

    @property
    def labels(self) -> list[str]:
        return [r.label for r in self.records]

    def label_indices(self) -> list[int]:
        index = {c: i for i, c in enumerate(self.classes)}
        return [index[r.label] for r in self.records]


@dataclass(frozen=True)
class DatasetStats:
    count: int
    n_classes: int
    min_len: int
    max_len: int
    mean_len: float

    def summary(self) -> str:
        return (
            f"{self.count} sequences, {self.n_classes} classes, "
            f"len {self.min_len}–{self.max_len}, mean {self.mean_len:.2f}"
        )


def _encode(text: str, normalize: str) -> bytes:
    if normalize == "upper":
        text = text.upper()
    elif normalize != "none":
        raise ValueError(f"unknown normalization {normalize!r}")
    return text.encode("utf-8")


def build_dataset(
    triples: Iterable[tuple[str, str, bytes]], source: str = ""
) -> Dataset:
    """Assemble a Dataset from (id, label, residues) triples, enforcing invariants.

    Classes are listed in first-appearance order.
    """
    records = []
    seen: set[str] = set()
    classes: list[str] = []
    for row, (rid, label, residues) in enumerate(triples):
        if not residues:
            raise EmptySequence(row)
        if len(residues) > MAX_SEQUENCE_BYTES:
            raise ValueError(f"sequence {rid!r} exceeds {MAX_SEQUENCE_BYTES} bytes")
        if rid in seen:
            raise DuplicateId(rid)
        seen.add(rid)
        if label not in classes:
            classes.append(label)
        records.append(SequenceRecord(rid, label, residues))
    return Dataset(tuple(records), tuple(classes), source)


def load_tsv(
    path: str | Path,
    seq_col: str = "sequence",
    label_col: str = "class",
    id_col: Optional[str] = "id",
    normalize: str = "none",
) -> Dataset:
    """Load a tab-delimited file with a header row.

    If ``id_col`` is present in the header its values are used as record ids,
    otherwise ids are synthesized as ``row{k}`` (0-based data row index).
    """
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumn(seq_col) from None
        for col in (seq_col, label_col):
            if col not in header:
                raise MissingColumn(col)
        si, li = header.index(seq_col), header.index(label_col)
        ii = header.index(id_col) if id_col and id_col in header else None

        def rows():
            for k, row in enumerate(reader):
                if not row:
                    continue
                seq = row[si].strip() if si < len(row) else ""
                if not seq:
                    raise EmptySequence(k)
                label = row[li] if li < len(row) else ""
                rid = row[ii] if ii is not None else f"row{k}"
                yield rid, label, _encode(seq, normalize)

        try:
            return build_dataset(rows(), source=str(path))
        except csv.Error as exc:
            raise DataError(f"{path}: line {reader.line_num}: {exc}") from None


def read_labels_csv(path: str | Path) -> dict[str, str]:
    """Read a two-column ``id,label`` CSV with a header row."""
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 2:
            raise MissingColumn("id,label")
        labels: dict[str, str] = {}
        for row in reader:
            if not row:
                continue
            if row[0] in labels:
                raise DuplicateId(row[0])
            labels[row[0]] = row[1]
    return labels


def parse_fasta(lines: Iterable[str]) -> list[tuple[str, str]]:
    """Parse FASTA text into (id, sequence) pairs.

    The id is the first whitespace-delimited token of the header; body lines
    are concatenated with all whitespace removed.
    """
    out: list[tuple[str, str]] = []
    cur_id: Optional[str] = None
    buf: list[str] = []
    for lineno, line in enumerate(lines, start=1):
        line = line.rstrip("\r\n")
        if line.startswith(">"):
            if cur_id is not None:
                out.append((cur_id, "".join(buf)))
            tokens = line[1:].split()
            if not tokens:
                raise MalformedFasta(lineno, "empty header")
            cur_id, buf = tokens[0], []
        elif line.strip():
            if cur_id is None:
                raise MalformedFasta(lineno)
            buf.append("".join(line.split()))
    if cur_id is not None:
        out.append((cur_id, "".join(buf)))
    return out


def load_fasta(
    seq_path: str | Path, label_path: str | Path, normalize: str = "none"
) -> Dataset:
    with Path(seq_path).open("r", encoding="utf-8") as fh:
        entries = parse_fasta(fh)
    labels = read_labels_csv(label_path)

    def triples():
        for rid, seq in entries:
            if rid not in labels:
                raise UnlabeledSequence(rid)
            yield rid, labels[rid], _encode(seq, normalize)

    return build_dataset(triples(), source=str(seq_path))


def stats(d: Dataset) -> DatasetStats:
    if not d.records:
        raise EmptyDataset()
    lengths = [len(r.residues) for r in d.records]
    return DatasetStats(
        count=len(lengths),
        n_classes=len(d.classes),
        min_len=min(lengths),
        max_len=max(lengths),
        mean_len=sum(lengths) / len(lengths),
    )


def dumps_tsv(d: Dataset) -> str:
    buf = io.StringIO()
    buf.write("id\tclass\tsequence\n")
    for r in d.records:
        buf.write(f"{r.id}\t{r.label}\t{r.residues.decode('utf-8')}\n")
    return buf.getvalue()


def dump_tsv(d: Dataset, path: str | Path) -> None:
    """Write the canonical TSV form (``id``, ``class``, ``sequence`` columns)."""
    Path(path).write_text(dumps_tsv(d), encoding="utf-8", newline="")


def load_dataset(
    path: str | Path,
    labels: Optional[str | Path] = None,
    seq_col: str = "sequence",
    label_col: str = "class",
    normalize: str = "none",
) -> Dataset:
    """Load TSV, or FASTA when a label CSV is given or the file starts with '>'."""
    path = Path(path)
    if labels is None:
        with path.open("r", encoding="utf-8") as fh:
            first = fh.read(1)
        if first == ">":
            raise UnlabeledSequence(f"<all records in {path}> (no label CSV given)")
        if first == "":
            return Dataset((), (), str(path))
        return load_tsv(path, seq_col, label_col, normalize=normalize)
    return load_fasta(path, labels, normalize=normalize)


def select(d: Dataset, indices: Sequence[int]) -> Dataset:
    return build_dataset(
        ((d.records[i].id, d.records[i].label, d.records[i].residues) for i in indices),
        source=d.source,
    )
