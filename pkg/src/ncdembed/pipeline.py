"""Config-file driven pipeline with content-hash stage caching.

Stages run in order ``stats -> distmat -> embed -> eval``. Each stage's cache
key hashes the input files, the config keys the stage depends on and the key
of the stage before it; a stage is skipped when its key is unchanged and its
artifact still exists.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from . import matrixio
from .compress import Backend, CompressorSpec
from .errors import DataError, IdMismatch
from .evaluate import ExperimentConfig, evaluate_distance, evaluate_embedding
from .kernel import MEDIAN, KernelMode, build_kernel
from .kpca import DEFAULT_COMPONENTS, kpca_embed
from .ncd import ConcatMode, distance_matrix, symmetrize
from .seqio import Dataset, load_dataset, stats

log = logging.getLogger(__name__)

SECTION = "pipeline"
CACHE_FILE = ".ncdembed-cache.json"

ARTIFACTS = {
    "stats": "stats.json",
    "distmat": "distmat.ncdm",
    "embed": "embedding.csv",
    "eval": "report.json",
}


def _bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {value!r}")


def _sigma(value: Any):
    if isinstance(value, (int, float)):
        return float(value)
    return MEDIAN if str(value).strip().lower() == MEDIAN else float(value)


# key -> (parser, default)
KEYS: dict[str, tuple[Callable[[Any], Any], Any]] = {
    "input": (str, None),
    "labels": (str, None),
    "seq_col": (str, "sequence"),
    "label_col": (str, "class"),
    "normalize": (str, "none"),
    "compressor": (str, "gzip"),
    "level": (int, 9),
    "concat": (str, "direct"),
    "zero_diagonal": (_bool, False),
    "kernel_mode": (str, "row_feature"),
    "sigma": (_sigma, MEDIAN),
    "components": (int, DEFAULT_COMPONENTS),
    "center": (_bool, True),
    "clf": (str, "knn"),
    "k": (int, 5),
    "l2": (float, 1e-4),
    "lr": (float, 0.1),
    "epochs": (int, 500),
    "runs": (int, 5),
    "seed": (int, 0),
    "inductive": (_bool, False),
    "tune": (str, "none"),
    "threads": (int, 1),
    "workdir": (str, "artifacts"),
    "timing": (_bool, False),
}

STAGE_KEYS = {
    "stats": ("seq_col", "label_col", "normalize"),
    "distmat": ("seq_col", "label_col", "normalize", "compressor", "level", "concat", "zero_diagonal"),
    "embed": ("kernel_mode", "sigma", "components", "center"),
    "eval": ("clf", "k", "l2", "lr", "epochs", "runs", "seed", "inductive", "tune", "timing"),
}


def read_config(path: str | Path) -> dict[str, Any]:
    """Parse a flat ``key = value`` file; a ``[pipeline]`` header is optional.

    Relative ``input``/``labels``/``workdir`` paths resolve against the
    config file's directory.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if not text.lstrip().startswith("["):
        text = f"[{SECTION}]\n" + text
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise DataError(f"{path}: {exc}") from exc
    if not parser.has_section(SECTION):
        raise DataError(f"{path}: missing [{SECTION}] section")
    raw = dict(parser.items(SECTION))
    unknown = sorted(set(raw) - set(KEYS))
    if unknown:
        raise DataError(f"{path}: unknown config keys {unknown}")
    cfg = {}
    for key, value in raw.items():
        if key in ("input", "labels", "workdir") and value:
            value = str((path.parent / value).resolve()) if not Path(value).is_absolute() else value
        cfg[key] = value
    return cfg


def resolve(*layers: dict[str, Any]) -> dict[str, Any]:
    """Merge config layers (later wins, ``None`` ignored) over the defaults."""
    merged = {k: default for k, (_, default) in KEYS.items()}
    for layer in layers:
        merged.update({k: v for k, v in layer.items() if v is not None and k in KEYS})
    out = {}
    for key, value in merged.items():
        parse = KEYS[key][0]
        try:
            out[key] = value if value is None else parse(value)
        except ValueError as exc:
            raise DataError(f"bad value for {key!r}: {exc}") from exc
    if not out["input"]:
        raise DataError("config must set 'input'")
    return out


def experiment_config(c: dict[str, Any]) -> ExperimentConfig:
    return ExperimentConfig(
        spec=CompressorSpec(Backend.parse(c["compressor"]), c["level"]),
        concat_mode=ConcatMode(c["concat"]),
        zero_diagonal=c["zero_diagonal"],
        kernel_mode=KernelMode(c["kernel_mode"]),
        sigma=c["sigma"],
        components=c["components"],
        center=c["center"],
        classifier=c["clf"],
        k=c["k"],
        l2=c["l2"],
        lr=c["lr"],
        epochs=c["epochs"],
        runs=c["runs"],
        base_seed=c["seed"],
        inductive=c["inductive"],
        tune_k=c["tune"] == "k",
        threads=c["threads"],
    )


def file_digest(path: str | Path) -> str:
    h = hashlib.blake2b(digest_size=32)
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _key(stage: str, upstream: str, c: dict[str, Any], extra: Optional[dict] = None) -> str:
    payload = {
        "stage": stage,
        "upstream": upstream,
        "config": {k: c[k] for k in STAGE_KEYS[stage]},
        **(extra or {}),
    }
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.blake2b(blob, digest_size=32).hexdigest()


@dataclass
class StageResult:
    name: str
    path: Path
    skipped: bool


def run_pipeline(
    c: dict[str, Any],
    echo: Callable[[str], None] = lambda msg: print(msg, file=sys.stderr),
    progress: Optional[Callable[[int, int], None]] = None,
) -> list[StageResult]:
    workdir = Path(c["workdir"])
    workdir.mkdir(parents=True, exist_ok=True)
    manifest_path = workdir / CACHE_FILE
    manifest = json.loads(manifest_path.read_text()) if manifest_path.exists() else {}

    inputs = {"input": file_digest(c["input"])}
    if c["labels"]:
        inputs["labels"] = file_digest(c["labels"])
    base = hashlib.blake2b(json.dumps(inputs, sort_keys=True).encode(), digest_size=32).hexdigest()

    dataset: Optional[Dataset] = None

    def data() -> Dataset:
        nonlocal dataset
        if dataset is None:
            dataset = load_dataset(
                c["input"], c["labels"], c["seq_col"], c["label_col"], c["normalize"]
            )
        return dataset

    results = []
    keys = {}
    keys["stats"] = _key("stats", base, c)
    keys["distmat"] = _key("distmat", base, c)
    keys["embed"] = _key("embed", keys["distmat"], c)
    keys["eval"] = _key("eval", keys["embed"], c, {"labels_of": base})

    exp = experiment_config(c)

    def run_stats(out: Path):
        s = stats(data())
        out.write_text(json.dumps(
            {"count": s.count, "classes": s.n_classes, "min_len": s.min_len,
             "max_len": s.max_len, "mean_len": s.mean_len}, indent=2) + "\n")
        echo(f"stats: {s.summary()}")

    def run_distmat(out: Path):
        dm = distance_matrix(
            data(), exp.spec, exp.concat_mode, c["threads"], exp.zero_diagonal, progress
        )
        matrixio.write_distance(dm, out)

    def run_embed(out: Path):
        dm = symmetrize(matrixio.read_distance(workdir / ARTIFACTS["distmat"]))
        km = build_kernel(dm, exp.sigma, exp.kernel_mode)
        emb = kpca_embed(km, min(exp.components, dm.n), center=exp.center)
        matrixio.write_embedding_csv(emb, out, comment=embed_comment(km.sigma2, km.mode, emb.q))
        echo(f"embed: sigma2={km.sigma2!r} components={emb.q}")

    def run_eval(out: Path):
        d = data()
        if c["inductive"] or c["clf"] == "ncd-knn":
            dm = matrixio.read_distance(workdir / ARTIFACTS["distmat"])
            report = evaluate_distance(dm, d.labels, exp, d.classes)
        else:
            coords, ids, meta = matrixio.read_embedding_csv(workdir / ARTIFACTS["embed"])
            if ids != d.ids:
                raise IdMismatch("embedding rows do not match dataset ids")
            sigma2 = float(meta["sigma2"]) if "sigma2" in meta else None
            report = evaluate_embedding(
                coords, np.asarray(d.label_indices()), d.classes, exp, sigma2=sigma2
            )
        out.write_text(report.to_json(include_timing=c["timing"]))
        echo(report.table())

    runners = {"stats": run_stats, "distmat": run_distmat, "embed": run_embed, "eval": run_eval}
    for stage, runner in runners.items():
        out = workdir / ARTIFACTS[stage]
        if manifest.get(stage) == keys[stage] and out.exists():
            echo(f"{stage}: skipped (cached)")
            results.append(StageResult(stage, out, True))
            continue
        echo(f"{stage}: running")
        runner(out)
        manifest[stage] = keys[stage]
        manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        results.append(StageResult(stage, out, False))
    return results


def embed_comment(sigma2: float, mode: KernelMode, q: int) -> str:
    return f"sigma2={sigma2!r},kernel_mode={KernelMode(mode).value},components={q}"
