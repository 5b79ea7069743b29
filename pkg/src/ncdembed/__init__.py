"""Compression-based sequence embeddings: NCD -> Gaussian kernel -> kernel PCA."""

from .compress import Backend, CompressorSpec, compress, compressed_len, conditional_bytes, decompress
from .evaluate import EvalReport, ExperimentConfig, compute_metrics, make_splits, run_experiment
from .kernel import KernelMatrix, KernelMode, gaussian_kernel, select_sigma2
from .kpca import Embedding, KernelPCA, center_kernel, kpca_embed
from .ncd import ConcatMode, DistanceMatrix, distance_matrix, ncd, ncd_direct, symmetrize
from .seqio import Dataset, SequenceRecord, load_fasta, load_tsv, stats

__version__ = "0.1.0"

__all__ = [
    "Backend",
    "CompressorSpec",
    "ConcatMode",
    "Dataset",
    "DistanceMatrix",
    "Embedding",
    "EvalReport",
    "ExperimentConfig",
    "KernelMatrix",
    "KernelMode",
    "KernelPCA",
    "SequenceRecord",
    "center_kernel",
    "compress",
    "compressed_len",
    "compute_metrics",
    "conditional_bytes",
    "decompress",
    "distance_matrix",
    "gaussian_kernel",
    "kpca_embed",
    "load_fasta",
    "load_tsv",
    "make_splits",
    "ncd",
    "ncd_direct",
    "run_experiment",
    "select_sigma2",
    "stats",
    "symmetrize",
]
