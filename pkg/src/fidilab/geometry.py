"""Pairwise distances and distance-to-probability maps with derivatives.

Two maps convert a pairwise distance d >= 0 into a similarity probability
u in (0, 1]:

    exponential: u = exp(-beta * d)
    sigmoid:     u = 1 / (1 + exp(beta * d))

Both decrease in d. The exponential map has slope -beta at d = 0 versus
-beta/4 for the sigmoid, which is the quantified sense in which it reacts
more sharply to small distances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError

# log(u) appears in the pairwise loss; clamping u away from 0 implements
# the 0*log(0) = 0 convention continuously.
U_FLOOR = 1e-12


@dataclass(frozen=True)
class DistanceKind:
    """Pairwise distance variant plus the square-root stabilizer.

    variant: "euclidean" or "squared_euclidean".
    eps: added inside the square root; the plain Euclidean distance has an
        unbounded derivative at 0, which wrecks gradient checks on
        duplicated samples.
    """

    variant: str = "euclidean"
    eps: float = 1e-12

    def __post_init__(self):
        if self.variant not in ("euclidean", "squared_euclidean"):
            raise ConfigError(f"unknown distance variant: {self.variant!r}")
        if self.eps <= 0:
            raise ConfigError("distance eps must be > 0")


@dataclass(frozen=True)
class ProbMap:
    """Distance-to-probability map selection and its scale parameter."""

    variant: str = "exponential"
    beta: float = 0.5

    def __post_init__(self):
        if self.variant not in ("exponential", "sigmoid"):
            raise ConfigError(f"unknown probability map: {self.variant!r}")
        if self.beta <= 0:
            raise ConfigError("beta must be > 0")


def pairwise_distances(embeddings: np.ndarray, kind: DistanceKind = DistanceKind()) -> np.ndarray:
    """B x B distance matrix, symmetric with an exactly zero diagonal.

    The euclidean entry is sqrt(sum (z_i - z_j)^2 + eps) - sqrt(eps), so
    the diagonal is exactly 0 and the derivative stays finite everywhere.
    Differences are formed explicitly rather than via the dot-product
    identity: no cancellation, and (i, j) / (j, i) are bit-identical.
    """
    e = np.asarray(embeddings, dtype=np.float64)
    if e.ndim != 2 or e.shape[0] < 1:
        raise NumericError(f"embeddings must be a non-empty 2-D array, got shape {e.shape}")
    if not np.all(np.isfinite(e)):
        raise NumericError("embeddings contain non-finite entries")
    sq = squared_pairwise(e)
    if kind.variant == "squared_euclidean":
        return sq
    return np.sqrt(sq + kind.eps) - np.sqrt(kind.eps)


def squared_pairwise(embeddings: np.ndarray) -> np.ndarray:
    """Squared pairwise distances (no stabilizer); helper for gradients.

    Computed from explicit differences in row chunks: memory stays
    bounded for large sets and, unlike the dot-product identity, there is
    no cancellation and the (i, j) / (j, i) entries are bit-identical.
    """
    e = np.asarray(embeddings, dtype=np.float64)
    n = e.shape[0]
    sq = np.empty((n, n))
    step = max(1, int(2**22 / max(n * e.shape[1], 1)))  # ~32 MB chunks
    for lo in range(0, n, step):
        hi = min(lo + step, n)
        diff = e[lo:hi, None, :] - e[None, :, :]
        sq[lo:hi] = np.einsum("ijk,ijk->ij", diff, diff)
    return sq


def prob_of_distance(d, pmap: ProbMap = ProbMap()):
    """Map distances to similarity probabilities; returns (u, du/dd).

    Accepts scalars or arrays. u is clamped to [U_FLOOR, 1] before any use
    in the loss; where the clamp is active du/dd is reported as 0, the
    consistent subgradient.
    """
    arr = np.asarray(d, dtype=np.float64)
    if np.any(arr < 0):
        raise ValueError("distances must be >= 0")
    if pmap.variant == "exponential":
        u = np.exp(-pmap.beta * arr)
        du = -pmap.beta * u
    else:
        u = 1.0 / (1.0 + np.exp(pmap.beta * arr))
        du = -pmap.beta * u * (1.0 - u)
    clipped = u < U_FLOOR
    u = np.where(clipped, U_FLOOR, u)
    du = np.where(clipped, 0.0, du)
    if np.isscalar(d) or arr.ndim == 0:
        return float(u), float(du)
    return u, du
