"""Kernel PCA: centering, eigendecomposition, and out-of-sample projection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateKernel, DimensionMismatch

# Eigenpairs at or below this fraction of the largest eigenvalue are dropped.
EIG_DROP_RTOL = 1e-10
DEFAULT_COMPONENTS = 64


@dataclass
class Embedding:
    coords: np.ndarray
    eigenvalues: np.ndarray
    ids: list[str]

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def q(self) -> int:
        return self.coords.shape[1]


def _as_array(K) -> np.ndarray:
    return np.asarray(getattr(K, "values", K), dtype=np.float64)


def center_kernel(K) -> np.ndarray:
    """Double-center a symmetric kernel matrix: ``(I - 1/n) K (I - 1/n)``.

    The result is symmetrized so that it is exactly symmetric in floating point.
    """
    K = _as_array(K)
    means = K.mean(axis=0)
    Kc = K - means[:, None] - means[None, :] + means.mean()
    return (Kc + Kc.T) / 2.0


def _sign_fix(vecs: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    if vecs.size == 0:
        return vecs
    rows = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[rows, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


class KernelPCA:
    """Kernel PCA fitted on a precomputed kernel matrix.

    After ``fit``, ``embedding_`` holds the training coordinates
    ``sqrt(lambda_k) * v_k`` and ``transform`` projects new rows of kernel
    values (against the fitting set) onto the same axes.
    """

    def __init__(self, n_components: int = DEFAULT_COMPONENTS, center: bool = True):
        if n_components < 1:
            raise ValueError("n_components must be >= 1")
        self.n_components = n_components
        self.center = center

    def fit(self, K) -> "KernelPCA":
        K = _as_array(K)
        n = K.shape[0]
        if self.n_components > n:
            raise ValueError(f"requested {self.n_components} components from {n} points")
        self._col_means = K.mean(axis=0)
        self._grand_mean = self._col_means.mean()
        Kc = center_kernel(K) if self.center else K
        vals, vecs = np.linalg.eigh(Kc)
        vals, vecs = vals[::-1], vecs[:, ::-1]
        top = vals[0] if vals.size else 0.0
        if not top > 0:
            raise DegenerateKernel("centered kernel has no positive eigenvalues")
        keep = vals > EIG_DROP_RTOL * top
        q = min(self.n_components, int(keep.sum()))
        self.eigenvalues_ = vals[:q].copy()
        self.eigenvectors_ = _sign_fix(vecs[:, :q])
        self.embedding_ = self.eigenvectors_ * np.sqrt(self.eigenvalues_)
        self.n_fit_ = n
        return self

    def transform(self, K_new) -> np.ndarray:
        """Project points given their kernel values against the fitting set."""
        K_new = np.atleast_2d(_as_array(K_new))
        if K_new.shape[1] != self.n_fit_:
            raise DimensionMismatch(
                f"expected kernel rows of width {self.n_fit_}, got {K_new.shape[1]}"
            )
        if self.center:
            K_new = (
                K_new
                - K_new.mean(axis=1, keepdims=True)
                - self._col_means[None, :]
                + self._grand_mean
            )
        return K_new @ self.eigenvectors_ / np.sqrt(self.eigenvalues_)


def kpca_embed(
    K,
    q: int = DEFAULT_COMPONENTS,
    center: bool = True,
    ids: Optional[list[str]] = None,
) -> Embedding:
    """Embed every point of ``K`` into at most ``q`` kernel principal components."""
    values = _as_array(K)
    q = min(q, values.shape[0])
    model = KernelPCA(q, center=center).fit(values)
    if ids is None:
        ids = list(getattr(K, "ids", [str(i) for i in range(values.shape[0])]))
    return Embedding(model.embedding_, model.eigenvalues_, ids)
