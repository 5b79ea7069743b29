"""Command-line interface.

Exit codes: 0 success, 2 input-data error, 3 IO error, 4 format error,
5 consistency error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__, matrixio, pipeline
from .compress import Backend, CompressorSpec
from .errors import DataError, IdMismatch, NcdError
from .evaluate import CLASSIFIERS, ExperimentConfig, evaluate_distance, evaluate_embedding
from .kernel import MEDIAN, KernelMode, build_kernel
from .kpca import DEFAULT_COMPONENTS, kpca_embed
from .ncd import ConcatMode, distance_matrix, symmetrize
from .seqio import NORMALIZERS, dump_tsv, load_dataset, read_labels_csv, stats

EXIT_IO = 3

log = logging.getLogger("ncdembed")

FLAG_SUMMARY = """\
flags by command:
  stats     INPUT [--labels CSV] [--seq-col] [--label-col] [--normalize {none,upper}]
  distmat   INPUT --out FILE [--compressor {gzip,bz2}] [--level 1-9]
            [--concat {direct,space_joined}] [--zero-diagonal] [--threads N] [--csv FILE]
  embed     DIST --out CSV [--kernel-mode {row_feature,distance_substitution}]
            [--sigma median|FLOAT] [--components Q] [--no-center] [--binary FILE] [--kernel-out FILE]
  eval      (--embedding CSV | --dist FILE) --labels FILE --report JSON
            [--clf {knn,lr,nb,ncd-knn}] [--k] [--l2] [--lr] [--epochs] [--runs] [--seed]
            [--inductive] [--tune k] [--timing]
  pipeline  CONFIG [any config key as --flag]
  dataset dump INPUT --out TSV
"""


def _progress(every: int = 1000):
    def report(done: int, total: int) -> None:
        if done % every == 0 or done == total:
            print(f"distmat: {done}/{total} rows", file=sys.stderr, flush=True)

    return report


def _sigma_arg(text: str):
    if text.lower() == MEDIAN:
        return MEDIAN
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'median' or a number, got {text!r}")
    if not value > 0:
        raise argparse.ArgumentTypeError("sigma must be positive")
    return value


def _add_input(p: argparse.ArgumentParser) -> None:
    p.add_argument("input", help="TSV dataset, or FASTA file together with --labels")
    p.add_argument("--labels", help="id,label CSV (required for FASTA input)")
    p.add_argument("--seq-col", default="sequence", help="TSV sequence column (default: sequence)")
    p.add_argument("--label-col", default="class", help="TSV label column (default: class)")
    p.add_argument("--normalize", choices=NORMALIZERS, default="none",
                   help="residue normalization before compression (default: none)")


def _add_compressor(p: argparse.ArgumentParser, defaults: bool = True) -> None:
    p.add_argument("--compressor", choices=("gzip", "bz2"), default="gzip" if defaults else None)
    p.add_argument("--level", type=int, choices=range(1, 10), metavar="1-9",
                   default=9 if defaults else None, help="compression level (default: 9)")
    p.add_argument("--concat", choices=[m.value for m in ConcatMode],
                   default="direct" if defaults else None,
                   help="how pairs are joined before compression (default: direct)")
    p.add_argument("--zero-diagonal", action="store_true", default=False if defaults else None,
                   help="force NCD(s, s) to 0")
    p.add_argument("--threads", type=int, default=1 if defaults else None,
                   help="worker threads, 0 = all cores (default: 1)")


def _add_kernel(p: argparse.ArgumentParser, defaults: bool = True) -> None:
    p.add_argument("--kernel-mode", choices=[m.value for m in KernelMode],
                   default="row_feature" if defaults else None)
    p.add_argument("--sigma", type=_sigma_arg, default=MEDIAN if defaults else None,
                   help="kernel bandwidth sigma^2: 'median' heuristic or a positive number")
    p.add_argument("--components", type=int, default=DEFAULT_COMPONENTS if defaults else None,
                   help=f"kernel PCA components (default: {DEFAULT_COMPONENTS})")
    p.add_argument("--no-center", dest="center", action="store_false",
                   default=True if defaults else None, help="skip kernel centering")


def _add_eval(p: argparse.ArgumentParser, defaults: bool = True) -> None:
    d = (lambda v: v) if defaults else (lambda v: None)
    p.add_argument("--clf", choices=CLASSIFIERS, default=d("knn"))
    p.add_argument("--k", type=int, default=d(5), help="neighbours for knn / ncd-knn")
    p.add_argument("--l2", type=float, default=d(1e-4), help="logistic regression L2 weight")
    p.add_argument("--lr", type=float, default=d(0.1), help="logistic regression learning rate")
    p.add_argument("--epochs", type=int, default=d(500))
    p.add_argument("--runs", type=int, default=d(5))
    p.add_argument("--seed", type=int, default=d(0), help="base seed; run r uses seed + r")
    p.add_argument("--inductive", action="store_true", default=d(False),
                   help="fit kernel/kPCA on training rows only (needs --dist)")
    p.add_argument("--tune", choices=("none", "k"), default=d("none"),
                   help="'k': choose k on the validation split")
    p.add_argument("--timing", action="store_true", default=d(False),
                   help="include train times in the JSON report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ncdembed",
        description="Compression-distance sequence embeddings and evaluation.",
        epilog=FLAG_SUMMARY,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="print dataset summary")
    _add_input(p)
    p.add_argument("--json", action="store_true", help="emit JSON instead of text")

    p = sub.add_parser("distmat", help="compute the NCD distance matrix")
    _add_input(p)
    _add_compressor(p)
    p.add_argument("--out", required=True, help="NCDM binary output")
    p.add_argument("--csv", help="also write the matrix as CSV")

    p = sub.add_parser("embed", help="distance matrix -> Gaussian kernel -> kernel PCA")
    p.add_argument("dist", help="NCDM distance matrix file")
    _add_kernel(p)
    p.add_argument("--out", required=True, help="embedding CSV output")
    p.add_argument("--binary", help="also write the NCDE binary embedding")
    p.add_argument("--kernel-out", help="also write the NCDK kernel matrix")

    p = sub.add_parser("eval", help="repeated stratified evaluation")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--embedding", help="embedding CSV")
    src.add_argument("--dist", help="NCDM distance matrix")
    p.add_argument("--labels", required=True,
                   help="id,label CSV (.csv) or a TSV dataset whose ids match the rows")
    p.add_argument("--seq-col", default="sequence")
    p.add_argument("--label-col", default="class")
    _add_kernel(p)
    _add_eval(p)
    p.add_argument("--report", required=True, help="JSON report output")

    p = sub.add_parser("pipeline", help="run stats -> distmat -> embed -> eval from a config")
    p.add_argument("config", help="INI-style key = value file")
    p.add_argument("--input")
    p.add_argument("--labels")
    p.add_argument("--seq-col")
    p.add_argument("--label-col")
    p.add_argument("--normalize", choices=NORMALIZERS)
    p.add_argument("--workdir")
    _add_compressor(p, defaults=False)
    _add_kernel(p, defaults=False)
    _add_eval(p, defaults=False)

    p = sub.add_parser("dataset", help="dataset utilities")
    dsub = p.add_subparsers(dest="dataset_command", required=True)
    dump = dsub.add_parser("dump", help="write the canonical TSV form of a dataset")
    _add_input(dump)
    dump.add_argument("--out", required=True)
    return parser


def _dataset(args):
    return load_dataset(args.input, args.labels, args.seq_col, args.label_col, args.normalize)


def cmd_stats(args) -> int:
    s = stats(_dataset(args))
    if args.json:
        print(json.dumps({"count": s.count, "classes": s.n_classes, "min_len": s.min_len,
                          "max_len": s.max_len, "mean_len": s.mean_len}))
    else:
        print(s.summary())
    return 0


def cmd_distmat(args) -> int:
    d = _dataset(args)
    spec = CompressorSpec(Backend.parse(args.compressor), args.level)
    dm = distance_matrix(d, spec, ConcatMode(args.concat), args.threads,
                         args.zero_diagonal, progress=_progress())
    matrixio.write_distance(dm, args.out)
    if args.csv:
        matrixio.write_matrix_csv(dm.values, dm.ids, args.csv)
    print(f"wrote {dm.n}x{dm.n} {spec} distance matrix to {args.out}")
    return 0


def cmd_embed(args) -> int:
    dm = symmetrize(matrixio.read_distance(args.dist))
    km = build_kernel(dm, args.sigma, KernelMode(args.kernel_mode))
    emb = kpca_embed(km, min(args.components, dm.n), center=args.center)
    comment = pipeline.embed_comment(km.sigma2, km.mode, emb.q)
    matrixio.write_embedding_csv(emb, args.out, comment=comment)
    if args.binary:
        matrixio.write_embedding(emb, args.binary)
    if args.kernel_out:
        matrixio.write_kernel(km, args.kernel_out)
    print(f"sigma2={km.sigma2!r} components={emb.q} -> {args.out}")
    return 0


def _labels_for(args, ids: list[str]) -> list[str]:
    path = Path(args.labels)
    if path.suffix.lower() == ".csv":
        mapping = read_labels_csv(path)
    else:
        d = load_dataset(path, None, args.seq_col, args.label_col)
        mapping = dict(zip(d.ids, d.labels))
    missing = [i for i in ids if i not in mapping]
    extra = sorted(set(mapping) - set(ids))
    if missing or extra:
        raise IdMismatch(
            f"ids do not line up with labels: {len(missing)} rows without a label "
            f"(e.g. {missing[:3]}), {len(extra)} labels without a row (e.g. {extra[:3]})"
        )
    return [mapping[i] for i in ids]


def _experiment(args) -> ExperimentConfig:
    return ExperimentConfig(
        kernel_mode=KernelMode(args.kernel_mode), sigma=args.sigma, components=args.components,
        center=args.center, classifier=args.clf, k=args.k, l2=args.l2, lr=args.lr,
        epochs=args.epochs, runs=args.runs, base_seed=args.seed, inductive=args.inductive,
        tune_k=args.tune == "k",
    )


def cmd_eval(args) -> int:
    cfg = _experiment(args)
    if args.dist:
        dm = matrixio.read_distance(args.dist)
        if dm.spec is not None:
            cfg.spec = dm.spec
        labels = _labels_for(args, dm.ids)
        report = evaluate_distance(dm, labels, cfg)
    else:
        if cfg.classifier == "ncd-knn" or cfg.inductive:
            raise DataError("--clf ncd-knn and --inductive need --dist, not --embedding")
        coords, ids, meta = matrixio.read_embedding_csv(args.embedding)
        labels = _labels_for(args, ids)
        classes = tuple(dict.fromkeys(labels))
        index = {c: i for i, c in enumerate(classes)}
        y = np.array([index[x] for x in labels])
        sigma2 = float(meta["sigma2"]) if "sigma2" in meta else None
        report = evaluate_embedding(coords, y, classes, cfg, sigma2=sigma2)
    Path(args.report).write_text(report.to_json(include_timing=args.timing))
    print(report.table())
    return 0


def cmd_pipeline(args) -> int:
    flags = {k: getattr(args, k, None) for k in pipeline.KEYS}
    c = pipeline.resolve(pipeline.read_config(args.config), flags)
    pipeline.run_pipeline(c, progress=_progress())
    return 0


def cmd_dataset(args) -> int:
    d = _dataset(args)
    dump_tsv(d, args.out)
    print(f"wrote {len(d)} records to {args.out}")
    return 0


COMMANDS = {
    "stats": cmd_stats,
    "distmat": cmd_distmat,
    "embed": cmd_embed,
    "eval": cmd_eval,
    "pipeline": cmd_pipeline,
    "dataset": cmd_dataset,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except NcdError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
