"""Repeated stratified 60/10/30 evaluation, metrics and report aggregation."""

from __future__ import annotations

import json
import math
import statistics
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np
from scipy.stats import rankdata

from . import classify
from .classify import LabeledVectors
from .compress import CompressorSpec, GZIP9
from .errors import ClassTooSmall, DataError, EmptyDataset, LengthMismatch
from .kernel import MEDIAN, KernelMode, SigmaPolicy, build_kernel, cross_kernel, select_sigma2
from .kpca import DEFAULT_COMPONENTS, KernelPCA, kpca_embed
from .ncd import ConcatMode, DistanceMatrix, distance_matrix, symmetrize
from .seqio import Dataset

TRAIN_FRAC = Fraction(6, 10)
VAL_FRAC = Fraction(1, 10)
MIN_CLASS_SIZE = 4
DEFAULT_RUNS = 5
CLASSIFIERS = ("knn", "lr", "nb", "ncd-knn")
TUNE_K_GRID = (1, 3, 5, 7, 9, 11, 15, 21)

METRICS = (
    "accuracy",
    "precision_weighted",
    "recall_weighted",
    "f1_weighted",
    "f1_macro",
    "roc_auc",
)


# ---------------------------------------------------------------- splits


@dataclass(frozen=True)
class Split:
    seed: int
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray


@dataclass(frozen=True)
class SplitPlan:
    base_seed: int
    splits: tuple[Split, ...]

    @property
    def run_seeds(self) -> list[int]:
        return [s.seed for s in self.splits]


def _round_half_up(x: Fraction) -> int:
    return math.floor(x + Fraction(1, 2))


def _options(n_c: int, strict_test: bool) -> list[tuple[int, int]]:
    t_ideal, v_ideal = TRAIN_FRAC * n_c, VAL_FRAC * n_c
    e_ideal = n_c - t_ideal - v_ideal
    opts = []
    for t in sorted({math.floor(t_ideal), math.ceil(t_ideal)}):
        for v in sorted({math.floor(v_ideal), math.ceil(v_ideal)}):
            e = n_c - t - v
            if e < 0:
                continue
            if strict_test and abs(e - e_ideal) > 1:
                continue
            opts.append((t, v))
    return opts


def allocate(counts: Sequence[int]) -> list[tuple[int, int, int]]:
    """Per-class (train, val, test) sizes.

    Totals are exactly round(0.6 n), round(0.1 n) and the remainder; each
    class part is within one sample of its proportional share. Among valid
    allocations the one closest to the ideal shares (squared deviation) wins,
    ties going to the first found in class order.
    """
    n = sum(counts)
    target = (_round_half_up(TRAIN_FRAC * n), _round_half_up(VAL_FRAC * n))
    for strict in (True, False):
        # state: (sum_t, sum_v) -> (cost, choices)
        states: dict[tuple[int, int], tuple[Fraction, tuple]] = {(0, 0): (Fraction(0), ())}
        for n_c in counts:
            nxt: dict[tuple[int, int], tuple[Fraction, tuple]] = {}
            for (st, sv), (cost, path) in states.items():
                for t, v in _options(n_c, strict):
                    e = n_c - t - v
                    c = (
                        cost
                        + (t - TRAIN_FRAC * n_c) ** 2
                        + (v - VAL_FRAC * n_c) ** 2
                        + (e - (1 - TRAIN_FRAC - VAL_FRAC) * n_c) ** 2
                    )
                    key = (st + t, sv + v)
                    if key not in nxt or c < nxt[key][0]:
                        nxt[key] = (c, path + ((t, v, e),))
            states = nxt
        if target in states:
            return list(states[target][1])
    raise DataError(f"cannot allocate a stratified split for class sizes {list(counts)}")


def _label_indices(d) -> tuple[np.ndarray, tuple[str, ...]]:
    if isinstance(d, Dataset):
        return np.asarray(d.label_indices(), dtype=np.intp), d.classes
    labels = list(d)
    classes = tuple(dict.fromkeys(labels))
    index = {c: i for i, c in enumerate(classes)}
    return np.array([index[x] for x in labels], dtype=np.intp), classes


def make_splits(
    d: Union[Dataset, Sequence], runs: int = DEFAULT_RUNS, base_seed: int = 0
) -> SplitPlan:
    """Stratified train/val/test index splits; run r is seeded with base_seed + r.

    ``d`` is a Dataset or a plain sequence of labels.
    """
    y, classes = _label_indices(d)
    if len(y) == 0:
        raise EmptyDataset()
    counts = np.bincount(y, minlength=len(classes))
    for c, size in enumerate(counts):
        if size < MIN_CLASS_SIZE:
            raise ClassTooSmall(classes[c], int(size))
    sizes = allocate([int(x) for x in counts])
    members = [np.flatnonzero(y == c) for c in range(len(classes))]
    splits = []
    for r in range(runs):
        seed = base_seed + r
        rng = np.random.default_rng(seed)
        parts: tuple[list, list, list] = ([], [], [])
        for idx, (t, v, _e) in zip(members, sizes):
            perm = rng.permutation(idx)
            parts[0].append(perm[:t])
            parts[1].append(perm[t:t + v])
            parts[2].append(perm[t + v:])
        train, val, test = (np.sort(np.concatenate(p)) for p in parts)
        splits.append(Split(seed, train, val, test))
    return SplitPlan(base_seed, tuple(splits))


# ---------------------------------------------------------------- metrics


def _auc(scores: np.ndarray, positive: np.ndarray) -> Optional[Fraction]:
    P = int(positive.sum())
    N = len(positive) - P
    if P == 0 or N == 0:
        return None
    ranks = rankdata(scores)  # average ranks for ties
    rank_sum = Fraction(float(ranks[positive].sum()))
    return (rank_sum - Fraction(P * (P + 1), 2)) / (P * N)


def compute_metrics(
    y_true: Sequence[int], proba: np.ndarray, n_classes: Optional[int] = None
) -> dict[str, float]:
    """Accuracy, weighted precision/recall/F1, macro F1 and one-vs-rest ROC-AUC.

    Predictions are the per-row argmax of ``proba``. Metrics are evaluated in
    exact rational arithmetic and rounded once to float.
    """
    y_true = np.asarray(y_true, dtype=np.intp)
    proba = np.atleast_2d(np.asarray(proba, dtype=np.float64))
    if len(y_true) != len(proba):
        raise LengthMismatch(f"{len(y_true)} labels vs {len(proba)} predictions")
    if len(y_true) == 0:
        raise EmptyDataset("prediction set")
    C = n_classes or proba.shape[1]
    y_pred = classify.predict_labels(proba)
    m = len(y_true)
    cm = np.zeros((C, C), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    tp = np.diag(cm)
    support = cm.sum(axis=1)
    predicted = cm.sum(axis=0)

    def ratio(a, b) -> Fraction:
        return Fraction(int(a), int(b)) if b else Fraction(0)

    prec = [ratio(tp[c], predicted[c]) for c in range(C)]
    rec = [ratio(tp[c], support[c]) for c in range(C)]
    f1 = [ratio(2 * tp[c], support[c] + predicted[c]) for c in range(C)]
    present = [c for c in range(C) if support[c] or predicted[c]]

    def weighted(vals):
        return sum((v * int(support[c]) for c, v in enumerate(vals)), Fraction(0)) / m

    aucs = [a for c in range(C) if (a := _auc(proba[:, c], y_true == c)) is not None]
    return {
        "accuracy": float(Fraction(int(tp.sum()), m)),
        "precision_weighted": float(weighted(prec)),
        "recall_weighted": float(weighted(rec)),
        "f1_weighted": float(weighted(f1)),
        "f1_macro": float(sum((f1[c] for c in present), Fraction(0)) / len(present)),
        "roc_auc": float(sum(aucs, Fraction(0)) / len(aucs)) if aucs else float("nan"),
    }


# ---------------------------------------------------------------- experiment


@dataclass
class ExperimentConfig:
    spec: CompressorSpec = GZIP9
    concat_mode: ConcatMode = ConcatMode.direct
    zero_diagonal: bool = False
    kernel_mode: KernelMode = KernelMode.row_feature
    sigma: SigmaPolicy = MEDIAN
    components: int = DEFAULT_COMPONENTS
    center: bool = True
    classifier: str = "knn"
    k: int = classify.DEFAULT_K
    l2: float = classify.DEFAULT_L2
    lr: float = classify.DEFAULT_LR
    epochs: int = classify.DEFAULT_EPOCHS
    runs: int = DEFAULT_RUNS
    base_seed: int = 0
    inductive: bool = False
    tune_k: bool = False
    threads: int = 1

    def __post_init__(self):
        if self.classifier not in CLASSIFIERS:
            raise ValueError(f"unknown classifier {self.classifier!r}; choose from {CLASSIFIERS}")

    def echo(self) -> dict:
        return {
            "compressor": self.spec.short_name,
            "level": self.spec.level,
            "concat": ConcatMode(self.concat_mode).value,
            "zero_diagonal": self.zero_diagonal,
            "kernel_mode": KernelMode(self.kernel_mode).value,
            "sigma_policy": self.sigma if isinstance(self.sigma, str) else float(self.sigma),
            "components_requested": self.components,
            "center": self.center,
            "classifier": self.classifier,
            "k": self.k,
            "l2": self.l2,
            "lr": self.lr,
            "epochs": self.epochs,
            "runs": self.runs,
            "base_seed": self.base_seed,
            "inductive": self.inductive,
            "tune_k": self.tune_k,
        }


@dataclass
class RunResult:
    seed: int
    metrics: dict[str, float]
    train_time: float
    k: Optional[int] = None
    sigma2: Optional[float] = None
    components: Optional[int] = None


@dataclass
class EvalReport:
    config: dict
    class_names: list[str]
    runs: list[RunResult] = field(default_factory=list)

    def aggregate(self) -> dict[str, dict[str, float]]:
        out = {}
        for name in (*METRICS, "train_time"):
            vals = [r.train_time if name == "train_time" else r.metrics[name] for r in self.runs]
            if any(math.isnan(v) for v in vals):
                out[name] = {"mean": float("nan"), "sd": float("nan")}
                continue
            lo, hi = min(vals), max(vals)
            mean = min(max(statistics.fmean(vals), lo), hi)
            sd = statistics.stdev(vals) if len(vals) > 1 else 0.0
            out[name] = {"mean": mean, "sd": sd}
        return out

    def mean(self, metric: str) -> float:
        return self.aggregate()[metric]["mean"]

    def sd(self, metric: str) -> float:
        return self.aggregate()[metric]["sd"]

    def to_dict(self, include_timing: bool = False) -> dict:
        agg = self.aggregate()
        if not include_timing:
            agg.pop("train_time")
        runs = []
        for r in self.runs:
            row = {"seed": r.seed, "metrics": {m: r.metrics[m] for m in METRICS}}
            for key in ("k", "sigma2", "components"):
                if getattr(r, key) is not None:
                    row[key] = getattr(r, key)
            if include_timing:
                row["train_time"] = r.train_time
            runs.append(row)
        return {
            "schema": "ncdembed.eval/1",
            "config": self.config,
            "classes": self.class_names,
            "aggregate": agg,
            "runs": runs,
        }

    def to_json(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_dict(include_timing), indent=2) + "\n"

    def table(self) -> str:
        agg = self.aggregate()
        clf = self.config.get("classifier", "?")
        lines = [f"{'metric':<20}{'mean':>10}{'sd':>10}   ({clf}, {len(self.runs)} runs)"]
        for name, v in agg.items():
            lines.append(f"{name:<20}{v['mean']:>10.4f}{v['sd']:>10.4f}")
        return "\n".join(lines)


def _fit_predict(cfg: ExperimentConfig, train: LabeledVectors, X_test, k: int):
    """Returns (proba, seconds spent fitting)."""
    t0 = time.perf_counter()
    if cfg.classifier == "knn":
        proba = classify.knn_fit_predict(train, X_test, k)
        return proba, time.perf_counter() - t0
    if cfg.classifier == "nb":
        proba = classify.gnb_fit_predict(train, X_test)
        return proba, time.perf_counter() - t0
    model = classify.logreg_fit(train, cfg.l2, cfg.epochs, cfg.lr, seed=cfg.base_seed)
    elapsed = time.perf_counter() - t0
    return classify.logreg_predict(model, X_test), elapsed


def _tuned_k(score_k, n_train: int, default: int) -> int:
    """Pick k from the grid by validation accuracy; ties go to the smaller k."""
    best_k, best = default, -1.0
    for k in TUNE_K_GRID:
        if k > n_train:
            break
        acc = score_k(k)
        if acc > best:
            best_k, best = k, acc
    return best_k


def _accuracy(y: np.ndarray, proba: np.ndarray) -> float:
    return float(np.mean(classify.predict_labels(proba) == y))


def evaluate_embedding(
    X: np.ndarray,
    y: np.ndarray,
    class_names: Sequence[str],
    cfg: ExperimentConfig,
    plan: Optional[SplitPlan] = None,
    sigma2: Optional[float] = None,
) -> EvalReport:
    """Train/test the configured classifier on fixed embedding rows."""
    if cfg.classifier == "ncd-knn":
        raise ValueError("ncd-knn works on distances; use evaluate_distance")
    y = np.asarray(y, dtype=np.intp)
    plan = plan or make_splits([class_names[i] for i in y], cfg.runs, cfg.base_seed)
    report = EvalReport({**cfg.echo(), "sigma2": sigma2, "components": X.shape[1]}, list(class_names))
    C = len(class_names)
    for sp in plan.splits:
        train = LabeledVectors(X[sp.train], y[sp.train], tuple(class_names))
        k = cfg.k
        if cfg.tune_k and cfg.classifier == "knn" and len(sp.val):
            k = _tuned_k(
                lambda kk: _accuracy(y[sp.val], classify.knn_fit_predict(train, X[sp.val], kk)),
                len(sp.train),
                cfg.k,
            )
        proba, secs = _fit_predict(cfg, train, X[sp.test], k)
        report.runs.append(
            RunResult(sp.seed, compute_metrics(y[sp.test], proba, C), secs,
                      k=k if cfg.classifier == "knn" else None)
        )
    return report


def _evaluate_ncd_knn(dm: DistanceMatrix, y, class_names, cfg, plan) -> EvalReport:
    report = EvalReport(cfg.echo(), list(class_names))
    C = len(class_names)
    for sp in plan.splits:
        k = cfg.k
        if cfg.tune_k and len(sp.val):
            k = _tuned_k(
                lambda kk: _accuracy(
                    y[sp.val], classify.ncd_knn_predict(dm.values, y, sp.train, sp.val, C, kk)
                ),
                len(sp.train),
                cfg.k,
            )
        t0 = time.perf_counter()
        proba = classify.ncd_knn_predict(dm.values, y, sp.train, sp.test, C, k)
        secs = time.perf_counter() - t0
        report.runs.append(RunResult(sp.seed, compute_metrics(y[sp.test], proba, C), secs, k=k))
    return report


def _inductive_features(dm: DistanceMatrix, sp: Split, cfg: ExperimentConfig):
    """Fit kernel + kPCA on training rows only; project everything else."""
    D = dm.values
    tr = sp.train
    mode = KernelMode(cfg.kernel_mode)
    if mode is KernelMode.row_feature:
        feats = D[:, tr]
        fit_dm = DistanceMatrix(feats[tr], [dm.ids[i] for i in tr], symmetric=True)
        sigma2 = select_sigma2(fit_dm, cfg.sigma, mode)
        K_fit = cross_kernel(feats[tr], feats[tr], sigma2, mode)
        np.fill_diagonal(K_fit, 1.0)
        K_all = cross_kernel(feats, feats[tr], sigma2, mode)
    else:
        fit_dm = DistanceMatrix(D[np.ix_(tr, tr)], [dm.ids[i] for i in tr], symmetric=True)
        sigma2 = select_sigma2(fit_dm, cfg.sigma, mode)
        K_fit = cross_kernel(D[np.ix_(tr, tr)], None, sigma2, mode)
        np.fill_diagonal(K_fit, 1.0)
        K_all = cross_kernel(D[:, tr], None, sigma2, mode)
    K_fit = (K_fit + K_fit.T) / 2.0
    model = KernelPCA(min(cfg.components, len(tr)), center=cfg.center).fit(K_fit)
    X = model.transform(K_all)
    X[tr] = model.embedding_
    return X, sigma2


def evaluate_distance(
    dm: DistanceMatrix,
    labels: Sequence[str],
    cfg: ExperimentConfig,
    class_names: Optional[Sequence[str]] = None,
) -> EvalReport:
    """Evaluate from a (possibly asymmetric) NCD matrix whose rows match ``labels``."""
    if len(labels) != dm.n:
        raise LengthMismatch(f"{len(labels)} labels for a {dm.n}x{dm.n} matrix")
    if class_names is None:
        class_names = tuple(dict.fromkeys(labels))
    index = {c: i for i, c in enumerate(class_names)}
    y = np.array([index[x] for x in labels], dtype=np.intp)
    plan = make_splits(list(labels), cfg.runs, cfg.base_seed)
    sym = dm if dm.symmetric else symmetrize(dm)
    if cfg.classifier == "ncd-knn":
        return _evaluate_ncd_knn(sym, y, class_names, cfg, plan)
    if not cfg.inductive:
        km = build_kernel(sym, cfg.sigma, cfg.kernel_mode)
        emb = kpca_embed(km, min(cfg.components, sym.n), center=cfg.center)
        return evaluate_embedding(emb.coords, y, class_names, cfg, plan, sigma2=km.sigma2)
    report = EvalReport(cfg.echo(), list(class_names))
    for sp in plan.splits:
        X, sigma2 = _inductive_features(sym, sp, cfg)
        single = SplitPlan(plan.base_seed, (sp,))
        sub = evaluate_embedding(X, y, class_names, cfg, single, sigma2=sigma2)
        run = sub.runs[0]
        run.sigma2, run.components = sigma2, X.shape[1]
        report.runs.append(run)
    return report


def run_experiment(
    d: Dataset,
    cfg: Optional[ExperimentConfig] = None,
    dist: Optional[DistanceMatrix] = None,
) -> EvalReport:
    """Full pipeline: NCD matrix over all sequences, then per-run evaluation.

    The distance matrix (and, unless ``cfg.inductive``, the kernel and kPCA)
    are computed once over the whole dataset; labels are only seen by the
    classifier through the training indices.
    """
    cfg = cfg or ExperimentConfig()
    if len(d) == 0:
        raise EmptyDataset()
    if dist is None:
        dist = distance_matrix(d, cfg.spec, cfg.concat_mode, cfg.threads, cfg.zero_diagonal)
    return evaluate_distance(dist, d.labels, cfg, d.classes)
