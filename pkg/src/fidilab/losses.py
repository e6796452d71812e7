"""Loss functions with analytic gradients w.r.t. the embedding matrix.

The fine-grained difference-aware (FIDI) pairwise loss compares the
predicted pair-similarity probability u to the binary pair label k via a
symmetrized, alpha-scaled relative entropy

    l(u, k) = u * log(alpha*u / ((alpha-1)*u + k))
            + k * log(alpha*k / ((alpha-1)*k + u)),      alpha > 1,

with the 0*log(0) = 0 convention. Its key properties, all covered by
tests: l(a, b) = l(b, a) bit-identically, l(a, a) = 0, and for u -> 0 the
loss tends to 0 when k = 0 and to the bound log(alpha/(alpha-1)) when
k = 1. Small distances between wrongly-related pairs are punished steeply
(through u = exp(-beta*d)) while large differences saturate at the bound,
unlike the unbounded hinge of the triplet loss.

Competitor losses: batch-all triplet, batch-hard triplet, plain and
batch-hard contrastive, and softmax cross-entropy for the classifier
head. Every loss returns both its value and the exact gradient; all
gradients are validated against central finite differences in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericError, ShapeError
from .geometry import (
    U_FLOOR,
    DistanceKind,
    ProbMap,
    pairwise_distances,
    prob_of_distance,
    squared_pairwise,
)

LOSS_KINDS = ("fidi", "tl", "btl", "cl", "bcl")


@dataclass(frozen=True)
class FidiConfig:
    """FIDI loss configuration.

    alpha must be strictly greater than 1: the per-pair loss divides by
    (alpha-1)*u + k and its bound log(alpha/(alpha-1)) only exists there.
    pair_policy "all_pairs" uses every unordered pair in the batch;
    "hard_pairs" keeps, per anchor, its farthest positive and nearest
    negative.
    """

    alpha: float = 1.05
    prob_map: ProbMap = field(default_factory=ProbMap)
    distance: DistanceKind = field(default_factory=DistanceKind)
    pair_policy: str = "all_pairs"
    reduction: str = "mean"

    def __post_init__(self):
        if self.alpha <= 1.0:
            raise ConfigError(f"alpha must be > 1, got {self.alpha}")
        if self.pair_policy not in ("all_pairs", "hard_pairs"):
            raise ConfigError(f"unknown pair_policy: {self.pair_policy!r}")
        if self.reduction not in ("mean", "sum"):
            raise ConfigError(f"unknown reduction: {self.reduction!r}")


@dataclass(frozen=True)
class TripletConfig:
    """Margin-loss configuration shared by triplet and contrastive losses."""

    margin: float = 0.3
    variant: str = "batch_hard"
    distance: DistanceKind = field(default_factory=DistanceKind)

    def __post_init__(self):
        if self.margin < 0:
            raise ConfigError(f"margin must be >= 0, got {self.margin}")
        if self.variant not in ("batch_all", "batch_hard"):
            raise ConfigError(f"unknown variant: {self.variant!r}")


@dataclass
class LossOutput:
    """Scalar loss plus gradients; a gradient is None when the loss does
    not touch that input."""

    value: float
    grad_embeddings: np.ndarray | None = None
    grad_logits: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.value = float(self.value)
        if not np.isfinite(self.value):
            raise NumericError(f"loss value is not finite: {self.value}")


# ---------------------------------------------------------------------------
# FIDI per-pair loss
# ---------------------------------------------------------------------------

def fidi_pair_loss(a: float, b: float, alpha: float) -> float:
    """Symmetric per-pair loss l(a, b); zero iff a == b.

    Either argument may be 0 (its term vanishes by the 0*log(0)
    convention). Written so that l(a, b) and l(b, a) are bit-identical.
    """
    if alpha <= 1.0:
        raise ConfigError(f"alpha must be > 1, got {alpha}")
    return float(_pair_term(a, b, alpha) + _pair_term(b, a, alpha))


def _pair_term(x: float, y: float, alpha: float) -> float:
    if x == 0.0:
        return 0.0
    return x * np.log(alpha * x / ((alpha - 1.0) * x + y))


def fidi_bound(alpha: float) -> float:
    """Upper bound log(alpha/(alpha-1)) of the per-pair loss (k=1, u->0)."""
    if alpha <= 1.0:
        raise ConfigError(f"alpha must be > 1, got {alpha}")
    return float(np.log(alpha / (alpha - 1.0)))


def _pair_loss_and_grad(u: np.ndarray, k: np.ndarray, alpha: float):
    """Vectorized l(u, k) and dl/du for u >= U_FLOOR and binary k."""
    am1 = alpha - 1.0
    den_u = am1 * u + k
    term_u = u * np.log(alpha * u / den_u)
    # k-side term: log(alpha/((alpha-1) + u)) where k == 1, else 0
    term_k = np.where(k > 0.0, np.log(alpha / (am1 + u)), 0.0)
    loss = term_u + term_k
    grad = (np.log(alpha * u / den_u) + 1.0 - u * am1 / den_u
            - np.where(k > 0.0, 1.0 / (am1 + u), 0.0))
    return loss, grad


# ---------------------------------------------------------------------------
# shared gradient plumbing
# ---------------------------------------------------------------------------

def _labels_array(labels, n: int) -> np.ndarray:
    lab = np.asarray(labels)
    if lab.shape != (n,):
        raise ShapeError(f"labels shape {lab.shape} does not match batch size {n}")
    return lab


def _chain_to_embeddings(e: np.ndarray, coef: np.ndarray, kind: DistanceKind) -> np.ndarray:
    """Gradient of sum_ij coef[i,j] * d_ij w.r.t. the embeddings.

    coef must be symmetric with a zero diagonal: coef[i,j] is the total
    derivative of the loss w.r.t. the unordered pair distance d_ij.
    """
    if kind.variant == "euclidean":
        r = np.sqrt(squared_pairwise(e) + kind.eps)
        c = coef / r
    else:
        c = 2.0 * coef
    return c.sum(axis=1)[:, None] * e - c @ e


def _masks(labels: np.ndarray):
    same = labels[:, None] == labels[None, :]
    eye = np.eye(len(labels), dtype=bool)
    pos = same & ~eye          # same identity, self excluded
    neg = ~same
    return pos, neg


def _argmax_masked(row: np.ndarray, mask: np.ndarray) -> int:
    # first occurrence wins, i.e. ties break toward the lowest index
    return int(np.argmax(np.where(mask, row, -np.inf)))


def _argmin_masked(row: np.ndarray, mask: np.ndarray) -> int:
    return int(np.argmin(np.where(mask, row, np.inf)))


# ---------------------------------------------------------------------------
# batch losses
# ---------------------------------------------------------------------------

def fidi_loss(embeddings: np.ndarray, labels, cfg: FidiConfig = FidiConfig()) -> LossOutput:
    """FIDI loss over a batch with the gradient w.r.t. the embeddings.

    Distances -> probabilities u -> per-pair losses l(u, k), reduced over
    the selected pair set. A batch holding a single identity is legal
    under all_pairs: the loss is computed over positive pairs only and
    flagged in meta["positives_only"].
    """
    e = np.asarray(embeddings, dtype=np.float64)
    labels = _labels_array(labels, e.shape[0])
    b = e.shape[0]
    if b < 2:
        raise ShapeError(f"need a batch of >= 2 samples, got {b}")

    d = pairwise_distances(e, cfg.distance)
    u, dudd = prob_of_distance(d, cfg.prob_map)
    k = (labels[:, None] == labels[None, :]).astype(np.float64)
    loss_mat, dldu = _pair_loss_and_grad(u, k, cfg.alpha)

    pos, neg = _masks(labels)
    if cfg.pair_policy == "all_pairs":
        weights = 1.0 - np.eye(b)
    else:
        weights = np.zeros((b, b))
        for a in range(b):
            if pos[a].any():
                p = _argmax_masked(d[a], pos[a])
                weights[a, p] += 1.0
                weights[p, a] += 1.0
            if neg[a].any():
                n = _argmin_masked(d[a], neg[a])
                weights[a, n] += 1.0
                weights[n, a] += 1.0

    total = 0.5 * weights.sum()   # number of selected (multiset) pairs
    if total == 0:
        raise ShapeError("empty pair set: no pairs selected from this batch")
    norm = total if cfg.reduction == "mean" else 1.0

    value = 0.5 * float((weights * loss_mat).sum()) / norm
    coef = weights * dldu * dudd / norm
    grad = _chain_to_embeddings(e, coef, cfg.distance)

    n_pos = int(pos.sum()) // 2
    n_neg = int(neg.sum()) // 2
    return LossOutput(value, grad_embeddings=grad, meta={
        "num_pairs": int(total),
        "positive_pairs": n_pos,
        "negative_pairs": n_neg,
        "positives_only": n_neg == 0,
    })


def triplet_loss(embeddings: np.ndarray, labels, cfg: TripletConfig = TripletConfig(variant="batch_all")) -> LossOutput:
    """Batch-all triplet loss: mean of [d_ap - d_an + m]_+ over all valid
    (anchor, positive, negative) triples.

    Inactive triplets contribute zero gradient; the subgradient exactly at
    the hinge is taken as 0.
    """
    e = np.asarray(embeddings, dtype=np.float64)
    labels = _labels_array(labels, e.shape[0])
    d = pairwise_distances(e, cfg.distance)
    pos, neg = _masks(labels)

    valid = pos[:, :, None] & neg[:, None, :]
    total = int(valid.sum())
    if total == 0:
        raise ShapeError("batch contains no valid (anchor, positive, negative) triplet")

    hinge = d[:, :, None] - d[:, None, :] + cfg.margin
    active = valid & (hinge > 0.0)
    value = float(np.where(active, hinge, 0.0).sum()) / total

    # d(value)/d d_ap counts active triplets over n; d/d d_an over p
    m_ap = active.sum(axis=2).astype(np.float64)
    m_an = active.sum(axis=1).astype(np.float64)
    ordered = (m_ap - m_an) / total
    coef = ordered + ordered.T
    grad = _chain_to_embeddings(e, coef, cfg.distance)
    return LossOutput(value, grad_embeddings=grad, meta={"num_triplets": total})


def batch_hard_triplet_loss(embeddings: np.ndarray, labels, cfg: TripletConfig = TripletConfig()) -> LossOutput:
    """Batch-hard triplet loss: per anchor, [max_p d_ap - min_n d_an + m]_+.

    Anchors lacking a positive or a negative are skipped; ties in the
    max/min break toward the lowest index. Mean over surviving anchors.
    """
    e = np.asarray(embeddings, dtype=np.float64)
    labels = _labels_array(labels, e.shape[0])
    b = e.shape[0]
    d = pairwise_distances(e, cfg.distance)
    pos, neg = _masks(labels)

    terms = []
    picks = []   # (anchor, hardest_pos, hardest_neg)
    for a in range(b):
        if not pos[a].any() or not neg[a].any():
            continue
        p = _argmax_masked(d[a], pos[a])
        n = _argmin_masked(d[a], neg[a])
        terms.append(max(d[a, p] - d[a, n] + cfg.margin, 0.0))
        picks.append((a, p, n))
    if not terms:
        raise ShapeError("no anchor in this batch has both a positive and a negative")

    count = len(terms)
    value = float(sum(terms)) / count
    ordered = np.zeros((b, b))
    for (a, p, n), t in zip(picks, terms):
        if t > 0.0:
            ordered[a, p] += 1.0 / count
            ordered[a, n] -= 1.0 / count
    coef = ordered + ordered.T
    grad = _chain_to_embeddings(e, coef, cfg.distance)
    return LossOutput(value, grad_embeddings=grad, meta={
        "num_anchors": count,
        "anchor_terms": [float(t) for t in terms],
    })


def contrastive_loss(embeddings: np.ndarray, labels, cfg: TripletConfig = TripletConfig(variant="batch_all")) -> LossOutput:
    """Contrastive loss: d for positive pairs, [m - d]_+ for negatives.

    variant "batch_all" averages over every unordered pair. variant
    "batch_hard" mines per anchor: the farthest positive contributes its
    distance and the nearest negative its hinge; the mean is taken over
    anchors having both sides.
    """
    e = np.asarray(embeddings, dtype=np.float64)
    labels = _labels_array(labels, e.shape[0])
    b = e.shape[0]
    if b < 2:
        raise ShapeError(f"need a batch of >= 2 samples, got {b}")
    d = pairwise_distances(e, cfg.distance)
    pos, neg = _masks(labels)

    if cfg.variant == "batch_all":
        offdiag = 1.0 - np.eye(b)
        total = 0.5 * offdiag.sum()
        loss_mat = np.where(pos, d, np.where(neg, np.maximum(cfg.margin - d, 0.0), 0.0))
        dldd = np.where(pos, 1.0, np.where(neg & (d < cfg.margin), -1.0, 0.0))
        value = 0.5 * float((offdiag * loss_mat).sum()) / total
        coef = offdiag * dldd / total
        grad = _chain_to_embeddings(e, coef, cfg.distance)
        return LossOutput(value, grad_embeddings=grad,
                          meta={"num_pairs": int(total)})

    terms = []
    picks = []
    for a in range(b):
        if not pos[a].any() or not neg[a].any():
            continue
        p = _argmax_masked(d[a], pos[a])
        n = _argmin_masked(d[a], neg[a])
        terms.append(d[a, p] + max(cfg.margin - d[a, n], 0.0))
        picks.append((a, p, n))
    if not terms:
        raise ShapeError("no anchor in this batch has both a positive and a negative")
    count = len(terms)
    value = float(sum(terms)) / count
    ordered = np.zeros((b, b))
    for a, p, n in picks:
        ordered[a, p] += 1.0 / count
        if d[a, n] < cfg.margin:
            ordered[a, n] -= 1.0 / count
    coef = ordered + ordered.T
    grad = _chain_to_embeddings(e, coef, cfg.distance)
    return LossOutput(value, grad_embeddings=grad, meta={"num_anchors": count})


def cross_entropy_loss(logits: np.ndarray, labels) -> LossOutput:
    """Mean softmax cross-entropy with max-subtraction stabilization.

    grad_logits is (softmax - onehot) / B; each row sums to zero.
    """
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 2:
        raise ShapeError(f"logits must be 2-D, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise NumericError("logits contain non-finite entries")
    b, c = z.shape
    lab = np.asarray(labels)
    if lab.shape != (b,):
        raise ShapeError(f"labels shape {lab.shape} does not match batch size {b}")
    if lab.min(initial=0) < 0 or lab.max(initial=0) >= c:
        raise ValueError(f"labels must lie in [0, {c}), got range "
                         f"[{lab.min()}, {lab.max()}]")

    shifted = z - z.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(shifted).sum(axis=1))
    value = float(np.mean(logsumexp - shifted[np.arange(b), lab]))
    softmax = np.exp(shifted - logsumexp[:, None])
    grad = softmax.copy()
    grad[np.arange(b), lab] -= 1.0
    grad /= b
    return LossOutput(value, grad_logits=grad)


def metric_loss(kind: str, embeddings: np.ndarray, labels,
                fidi_cfg: FidiConfig | None = None,
                margin_cfg: TripletConfig | None = None) -> LossOutput:
    """Dispatch on a loss kind: fidi | tl | btl | cl | bcl."""
    if kind == "fidi":
        return fidi_loss(embeddings, labels, fidi_cfg or FidiConfig())
    base = margin_cfg or TripletConfig()
    if kind == "tl":
        return triplet_loss(embeddings, labels,
                            TripletConfig(base.margin, "batch_all", base.distance))
    if kind == "btl":
        return batch_hard_triplet_loss(embeddings, labels,
                                       TripletConfig(base.margin, "batch_hard", base.distance))
    if kind == "cl":
        return contrastive_loss(embeddings, labels,
                                TripletConfig(base.margin, "batch_all", base.distance))
    if kind == "bcl":
        return contrastive_loss(embeddings, labels,
                                TripletConfig(base.margin, "batch_hard", base.distance))
    raise ConfigError(f"unknown loss kind: {kind!r} (expected one of {LOSS_KINDS})")
