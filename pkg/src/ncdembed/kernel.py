"""Gaussian kernel over a symmetric NCD distance matrix.

Two readings of "distance between distances" are supported:

``row_feature``
    each sequence is represented by its row of the distance matrix and the
    kernel compares rows, ``K[i, j] = exp(-||D[i] - D[j]||^2 / sigma2)``.
    This is a Gaussian kernel on finite vectors and therefore PSD.
``distance_substitution``
    the NCD value is used directly as the distance,
    ``K[i, j] = exp(-D[i, j]^2 / sigma2)``. Not guaranteed PSD.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

from .compress import CompressorSpec
from .errors import AsymmetricInput, NonPositiveSigma
from .ncd import DistanceMatrix


class KernelMode(str, enum.Enum):
    row_feature = "row_feature"
    distance_substitution = "distance_substitution"


MEDIAN = "median"
SigmaPolicy = Union[str, float]


@dataclass
class KernelMatrix:
    values: np.ndarray
    ids: list[str]
    sigma2: float
    mode: KernelMode = KernelMode.row_feature
    spec: Optional[CompressorSpec] = None

    @property
    def n(self) -> int:
        return self.values.shape[0]


def _require_symmetric(dm: DistanceMatrix) -> None:
    if not dm.symmetric or not np.array_equal(dm.values, dm.values.T):
        raise AsymmetricInput("kernel input must be a symmetrized distance matrix")


def squared_distances(dm: DistanceMatrix, mode: KernelMode) -> np.ndarray:
    """The n x n matrix of squared distances the Gaussian is applied to."""
    if KernelMode(mode) is KernelMode.row_feature:
        return squareform(pdist(dm.values, "sqeuclidean"), checks=False)
    return dm.values**2


def _upper(sq: np.ndarray) -> np.ndarray:
    return sq[np.triu_indices(sq.shape[0], k=1)]


def select_sigma2(
    dm: DistanceMatrix,
    policy: SigmaPolicy = MEDIAN,
    mode: KernelMode = KernelMode.row_feature,
) -> float:
    """Median heuristic over all i < j pairs, or a fixed positive value."""
    _require_symmetric(dm)
    if isinstance(policy, str):
        if policy != MEDIAN:
            raise ValueError(f"unknown sigma policy {policy!r}")
        if dm.n < 2:
            raise NonPositiveSigma("median heuristic needs at least 2 sequences")
        if KernelMode(mode) is KernelMode.row_feature:
            pairs = pdist(dm.values, "sqeuclidean")
        else:
            pairs = _upper(dm.values) ** 2
        sigma2 = float(np.median(pairs))
    else:
        sigma2 = float(policy)
    if not sigma2 > 0 or not np.isfinite(sigma2):
        raise NonPositiveSigma(
            f"sigma2={sigma2!r}; sequences may all be identical, supply a fixed sigma"
        )
    return sigma2


def gaussian_from_sqdist(sq: np.ndarray, sigma2: float) -> np.ndarray:
    if not sigma2 > 0:
        raise NonPositiveSigma(f"sigma2 must be positive, got {sigma2!r}")
    return np.exp(-sq / sigma2)


def gaussian_kernel(
    dm: DistanceMatrix,
    sigma2: float,
    mode: KernelMode = KernelMode.row_feature,
) -> KernelMatrix:
    _require_symmetric(dm)
    mode = KernelMode(mode)
    values = gaussian_from_sqdist(squared_distances(dm, mode), sigma2)
    # Unit self-similarity, exactly.
    np.fill_diagonal(values, 1.0)
    return KernelMatrix(values, list(dm.ids), float(sigma2), mode, spec=dm.spec)


def build_kernel(
    dm: DistanceMatrix,
    sigma: SigmaPolicy = MEDIAN,
    mode: KernelMode = KernelMode.row_feature,
) -> KernelMatrix:
    """Select the bandwidth and build the kernel in one step."""
    return gaussian_kernel(dm, select_sigma2(dm, sigma, mode), mode)


def cross_kernel(
    dist_rows: np.ndarray,
    dist_fit: np.ndarray,
    sigma2: float,
    mode: KernelMode = KernelMode.row_feature,
) -> np.ndarray:
    """Kernel between new points and a fitting set.

    In ``row_feature`` mode ``dist_rows`` (m x f) and ``dist_fit`` (n x f) are
    distance-profile feature vectors over the same f reference sequences. In
    ``distance_substitution`` mode ``dist_rows`` is the m x n block of NCD values
    to the fitting set and ``dist_fit`` is ignored.
    """
    if KernelMode(mode) is KernelMode.row_feature:
        sq = cdist(dist_rows, dist_fit, "sqeuclidean")
    else:
        sq = np.asarray(dist_rows, dtype=np.float64) ** 2
    return gaussian_from_sqdist(sq, sigma2)
