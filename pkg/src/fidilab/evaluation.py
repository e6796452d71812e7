"""Retrieval evaluation: CMC / rank-1, mAP, per-anchor fidelity error
statistics, and distance-distribution summaries.

Protocol notes. A gallery entry sharing both identity and camera with
the query is dropped before ranking when exclude_same_camera is on (the
standard multi-camera retrieval rule); queries left without any relevant
gallery entry are excluded from the averages and counted in the report.
Error-I counts, per anchor, negatives closer than the anchor's farthest
positive; Error-II counts positives farther than its nearest negative.
Both use strict inequalities: exact ties do not count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EvalError
from .geometry import DistanceKind, pairwise_distances


@dataclass(frozen=True)
class EvalProtocol:
    exclude_same_camera: bool = True
    cmc_ranks: tuple[int, ...] = (1, 5, 10)

    def __post_init__(self):
        if not self.cmc_ranks or list(self.cmc_ranks) != sorted(self.cmc_ranks):
            raise EvalError("cmc_ranks must be a nonempty ascending sequence")


@dataclass
class DistanceSummary:
    """Per-anchor mean intra/inter distances plus shared-bin histograms."""

    intra_means: np.ndarray
    inter_means: np.ndarray
    bin_edges: np.ndarray
    intra_hist: np.ndarray
    inter_hist: np.ndarray


@dataclass
class EvalReport:
    map: float
    cmc: dict[int, float]
    error_i: float
    error_ii: float
    distance_summary: DistanceSummary | None = None
    excluded_queries: int = 0
    num_queries: int = 0
    meta: dict = field(default_factory=dict)


def rank_gallery(query_emb: np.ndarray, gallery_emb: np.ndarray,
                 kind: DistanceKind = DistanceKind()) -> np.ndarray:
    """Per-query gallery indices by ascending distance; ties break toward
    the lower gallery index (stable sort)."""
    q = np.asarray(query_emb, dtype=np.float64)
    g = np.asarray(gallery_emb, dtype=np.float64)
    if g.shape[0] == 0:
        raise EvalError("empty gallery")
    if q.ndim != 2 or g.ndim != 2 or q.shape[1] != g.shape[1]:
        raise EvalError(f"embedding dims do not match: {q.shape} vs {g.shape}")
    stacked = pairwise_distances(np.vstack([q, g]), kind)
    dist = stacked[:q.shape[0], q.shape[0]:]
    return np.argsort(dist, axis=1, kind="stable")


def cmc_and_map(rankings: np.ndarray, q_labels, g_labels, q_cams, g_cams,
                protocol: EvalProtocol = EvalProtocol(),
                exclude_self: bool = False):
    """CMC values at the protocol ranks and mAP.

    rankings: (Q, G) gallery indices, ascending distance (rank_gallery
    output). exclude_self drops gallery entry j == query index i, for the
    leave-one-out protocol where gallery and query are the same set.

    Returns (cmc dict, mAP, excluded_query_count). AP for one query is
    the mean over its relevant items of the precision at each item's
    rank; queries with no relevant gallery entry after filtering are
    excluded from both averages.
    """
    rankings = np.asarray(rankings)
    q_labels = np.asarray(q_labels)
    g_labels = np.asarray(g_labels)
    q_cams = np.asarray(q_cams)
    g_cams = np.asarray(g_cams)

    cmc_hits = np.zeros(len(protocol.cmc_ranks))
    ap_values = []
    excluded = 0
    for qi in range(rankings.shape[0]):
        order = rankings[qi]
        keep = np.ones(len(order), dtype=bool)
        if protocol.exclude_same_camera:
            keep &= ~((g_labels[order] == q_labels[qi]) & (g_cams[order] == q_cams[qi]))
        if exclude_self:
            keep &= order != qi
        matches = (g_labels[order] == q_labels[qi])[keep]
        if not matches.any():
            excluded += 1
            continue
        first_hit = int(np.argmax(matches))
        for ri, rank in enumerate(protocol.cmc_ranks):
            if first_hit < rank:
                cmc_hits[ri] += 1
        hits = np.cumsum(matches)
        precisions = hits[matches] / (np.flatnonzero(matches) + 1.0)
        ap_values.append(precisions.mean())

    valid = rankings.shape[0] - excluded
    if valid == 0:
        raise EvalError("every query was excluded: no relevant gallery items")
    cmc = {rank: float(cmc_hits[ri] / valid)
           for ri, rank in enumerate(protocol.cmc_ranks)}
    return cmc, float(np.mean(ap_values)), excluded


def error_stats(features: np.ndarray, labels,
                kind: DistanceKind = DistanceKind(),
                dist: np.ndarray | None = None):
    """Mean per-anchor Error-I / Error-II counts.

    Anchors are samples whose identity has >= 2 samples; others are
    excluded and counted. Returns (error_i, error_ii, excluded_anchors).
    A precomputed distance matrix may be passed via ``dist``.
    """
    feats = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    n = feats.shape[0]
    d = pairwise_distances(feats, kind) if dist is None else dist
    same = labels[:, None] == labels[None, :]
    eye = np.eye(n, dtype=bool)
    pos = same & ~eye
    neg = ~same

    err_i, err_ii = [], []
    excluded = 0
    for a in range(n):
        if not pos[a].any():
            excluded += 1
            continue
        max_pos = d[a][pos[a]].max()
        if neg[a].any():
            min_neg = d[a][neg[a]].min()
            err_i.append(int((d[a][neg[a]] < max_pos).sum()))
            err_ii.append(int((d[a][pos[a]] > min_neg).sum()))
        else:
            err_i.append(0)
            err_ii.append(0)
    if not err_i:
        raise EvalError("no identity has >= 2 samples; error stats undefined")
    return float(np.mean(err_i)), float(np.mean(err_ii)), excluded


def distance_summary(features: np.ndarray, labels, bins: int = 20,
                     kind: DistanceKind = DistanceKind(),
                     dist: np.ndarray | None = None) -> DistanceSummary:
    """Per-anchor mean intra/inter distances and their histograms.

    Histograms share one set of ``bins`` equal-width bins spanning both
    populations, so each histogram's counts sum to the anchor count.
    """
    if bins < 1:
        raise EvalError("bins must be >= 1")
    feats = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    n = feats.shape[0]
    d = pairwise_distances(feats, kind) if dist is None else dist
    same = labels[:, None] == labels[None, :]
    eye = np.eye(n, dtype=bool)

    intra, inter = [], []
    for a in range(n):
        pos = same[a] & ~eye[a]
        neg = ~same[a]
        if not pos.any() or not neg.any():
            continue
        intra.append(d[a][pos].mean())
        inter.append(d[a][neg].mean())
    intra = np.asarray(intra)
    inter = np.asarray(inter)
    if intra.size == 0:
        lo, hi = 0.0, 1.0
    else:
        lo = float(min(intra.min(), inter.min()))
        hi = float(max(intra.max(), inter.max()))
        if hi <= lo:
            hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    intra_hist, _ = np.histogram(intra, bins=edges)
    inter_hist, _ = np.histogram(inter, bins=edges)
    return DistanceSummary(intra, inter, edges, intra_hist, inter_hist)


def evaluate_embeddings(embeddings: np.ndarray, labels, cameras,
                        protocol: EvalProtocol = EvalProtocol(),
                        kind: DistanceKind = DistanceKind(),
                        bins: int = 20) -> EvalReport:
    """Leave-one-out evaluation of one embedded set: every sample queries
    all the others (itself excluded), then fidelity statistics and the
    distance summary are computed on the same embeddings."""
    e = np.asarray(embeddings, dtype=np.float64)
    dist = pairwise_distances(e, kind)   # shared by all three analyses
    rankings = np.argsort(dist, axis=1, kind="stable")
    cmc, mean_ap, excluded = cmc_and_map(
        rankings, labels, labels, cameras, cameras, protocol, exclude_self=True)
    err_i, err_ii, skipped = error_stats(e, labels, kind, dist=dist)
    summary = distance_summary(e, labels, bins, kind, dist=dist)
    return EvalReport(map=mean_ap, cmc=cmc, error_i=err_i, error_ii=err_ii,
                      distance_summary=summary, excluded_queries=excluded,
                      num_queries=e.shape[0],
                      meta={"anchors_without_positive": skipped})


def save_report(report: EvalReport, report_path, cmc_csv_path) -> None:
    """Flat key=value report file plus a per-rank CMC CSV."""
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write(f"mAP={report.map!r}\n")
        for rank in sorted(report.cmc):
            fh.write(f"cmc_{rank}={report.cmc[rank]!r}\n")
        fh.write(f"error_I={report.error_i!r}\n")
        fh.write(f"error_II={report.error_ii!r}\n")
        fh.write(f"num_queries={report.num_queries}\n")
        fh.write(f"excluded_queries={report.excluded_queries}\n")
        if report.distance_summary is not None:
            s = report.distance_summary
            if s.intra_means.size:
                fh.write(f"mean_intra_distance={float(s.intra_means.mean())!r}\n")
                fh.write(f"mean_inter_distance={float(s.inter_means.mean())!r}\n")
    with open(cmc_csv_path, "w", encoding="utf-8") as fh:
        fh.write("rank,cmc\n")
        for rank in sorted(report.cmc):
            fh.write(f"{rank},{report.cmc[rank]!r}\n")
