import numpy as np
import pytest

from fidilab import (
    EvalError,
    EvalProtocol,
    Rng,
    cmc_and_map,
    distance_summary,
    error_stats,
    evaluate_embeddings,
    pairwise_distances,
    rank_gallery,
    save_report,
)


# ---------------------------------------------------------------------------
# independent brute-force oracles
# ---------------------------------------------------------------------------

def oracle_cmc_map(dist, q_labels, g_labels, q_cams, g_cams, protocol,
                   exclude_self=False):
    """Explicit per-query enumeration: sort kept gallery entries by
    (distance, index), then walk the relevance list accumulating
    precision at every relevant position."""
    cmc_hits = {r: 0 for r in protocol.cmc_ranks}
    aps = []
    excluded = 0
    for qi in range(dist.shape[0]):
        entries = []
        for gj in range(dist.shape[1]):
            if exclude_self and gj == qi:
                continue
            if (protocol.exclude_same_camera
                    and g_labels[gj] == q_labels[qi]
                    and g_cams[gj] == q_cams[qi]):
                continue
            entries.append((dist[qi, gj], gj))
        entries.sort()
        relevance = [g_labels[gj] == q_labels[qi] for _, gj in entries]
        if not any(relevance):
            excluded += 1
            continue
        hits = 0
        precisions = []
        for pos, rel in enumerate(relevance):
            if rel:
                hits += 1
                precisions.append(hits / (pos + 1))
        aps.append(np.mean(precisions))
        first = relevance.index(True)
        for r in protocol.cmc_ranks:
            if first < r:
                cmc_hits[r] += 1
    valid = dist.shape[0] - excluded
    cmc = {r: cmc_hits[r] / valid for r in protocol.cmc_ranks}
    return cmc, float(np.mean(aps)), excluded


def oracle_error_stats(dist, labels):
    """O(N^2) double loop with strict inequalities."""
    n = len(labels)
    err_i, err_ii = [], []
    excluded = 0
    for a in range(n):
        pos = [j for j in range(n) if j != a and labels[j] == labels[a]]
        neg = [j for j in range(n) if labels[j] != labels[a]]
        if not pos:
            excluded += 1
            continue
        if not neg:
            err_i.append(0)
            err_ii.append(0)
            continue
        max_pos = max(dist[a, p] for p in pos)
        min_neg = min(dist[a, j] for j in neg)
        err_i.append(sum(1 for j in neg if dist[a, j] < max_pos))
        err_ii.append(sum(1 for p in pos if dist[a, p] > min_neg))
    return float(np.mean(err_i)), float(np.mean(err_ii)), excluded


# ---------------------------------------------------------------------------
# rank_gallery
# ---------------------------------------------------------------------------

def test_rank_single_gallery_row():
    r = rank_gallery(np.zeros((2, 3)), np.ones((1, 3)))
    assert r.shape == (2, 1) and r[0, 0] == 0


def test_rank_exact_match_first():
    g = np.array([[0.0, 0.0], [5.0, 5.0], [2.0, 2.0]])
    r = rank_gallery(np.array([[2.0, 2.0]]), g)
    assert r[0, 0] == 2


def test_rank_tie_breaks_to_lower_index():
    g = np.array([[1.0, 0.0], [-1.0, 0.0], [1.0, 0.0]])
    r = rank_gallery(np.array([[0.0, 0.0]]), g)
    assert list(r[0]) == [0, 1, 2]


def test_rank_rejects_empty_gallery_and_dim_mismatch():
    with pytest.raises(EvalError):
        rank_gallery(np.zeros((1, 3)), np.zeros((0, 3)))
    with pytest.raises(EvalError):
        rank_gallery(np.zeros((1, 3)), np.zeros((2, 4)))


# ---------------------------------------------------------------------------
# cmc / mAP
# ---------------------------------------------------------------------------

def _run_both(q, g, q_lab, g_lab, q_cam, g_cam, protocol):
    dist = pairwise_distances(np.vstack([q, g]))[:len(q), len(q):]
    rankings = rank_gallery(q, g)
    got = cmc_and_map(rankings, q_lab, g_lab, q_cam, g_cam, protocol)
    want = oracle_cmc_map(dist, q_lab, g_lab, q_cam, g_cam, protocol)
    return got, want


def test_ap_hand_case_one_zero_one():
    # ranked relevance [1, 0, 1]: AP = (1/1 + 2/3)/2, rank-1 hit
    q = np.array([[0.0]])
    g = np.array([[0.1], [0.2], [0.3]])
    protocol = EvalProtocol(exclude_same_camera=False, cmc_ranks=(1, 2, 3))
    cmc, mean_ap, excluded = cmc_and_map(rank_gallery(q, g), [0], [0, 1, 0],
                                         [0], [0, 0, 0], protocol)
    assert abs(mean_ap - 5.0 / 6.0) < 1e-12
    assert cmc[1] == 1.0
    assert excluded == 0


def test_all_relevant_gives_perfect_scores():
    q = np.array([[0.0]])
    g = np.array([[0.5], [1.0]])
    protocol = EvalProtocol(exclude_same_camera=False, cmc_ranks=(1, 2))
    cmc, mean_ap, _ = cmc_and_map(rank_gallery(q, g), [3], [3, 3],
                                  [0], [0, 0], protocol)
    assert mean_ap == 1.0 and cmc[1] == 1.0 and cmc[2] == 1.0


def test_top_miss_second_hit():
    q = np.array([[0.0]])
    g = np.array([[0.1], [0.2]])
    protocol = EvalProtocol(exclude_same_camera=False, cmc_ranks=(1, 2))
    cmc, _, _ = cmc_and_map(rank_gallery(q, g), [7], [1, 7], [0], [0, 0], protocol)
    assert cmc[1] == 0.0 and cmc[2] == 1.0


def test_same_camera_entries_are_dropped():
    # the d=0 same-camera duplicate must not count as the first match
    q = np.array([[0.0]])
    g = np.array([[0.0], [1.0], [0.5]])
    g_lab, g_cam = [4, 4, 9], [0, 1, 0]
    protocol = EvalProtocol(exclude_same_camera=True, cmc_ranks=(1,))
    cmc, mean_ap, _ = cmc_and_map(rank_gallery(q, g), [4], g_lab, [0], g_cam, protocol)
    # kept gallery: id 9 at 0.5, id 4 at 1.0 -> first hit at rank 2
    assert cmc[1] == 0.0
    assert abs(mean_ap - 0.5) < 1e-12


def test_queries_without_relevant_items_are_excluded():
    q = np.array([[0.0], [10.0]])
    g = np.array([[0.1], [0.2]])
    protocol = EvalProtocol(exclude_same_camera=False, cmc_ranks=(1,))
    cmc, mean_ap, excluded = cmc_and_map(rank_gallery(q, g), [0, 5], [0, 0],
                                         [0, 0], [0, 0], protocol)
    assert excluded == 1
    assert cmc[1] == 1.0 and mean_ap == 1.0


def test_cmc_map_matches_oracle_on_random_instances():
    rng = Rng(2025)
    protocol = EvalProtocol(exclude_same_camera=True, cmc_ranks=(1, 3, 5))
    for trial in range(200):
        nq = 1 + rng.randbelow(6)
        ng = 2 + rng.randbelow(19)
        dim = 1 + rng.randbelow(3)
        q = rng.normals(nq * dim).reshape(nq, dim)
        g = rng.normals(ng * dim).reshape(ng, dim)
        n_ids = 1 + rng.randbelow(5)
        q_lab = [rng.randbelow(n_ids) for _ in range(nq)]
        g_lab = [rng.randbelow(n_ids) for _ in range(ng)]
        q_cam = [rng.randbelow(3) for _ in range(nq)]
        g_cam = [rng.randbelow(3) for _ in range(ng)]
        dist = pairwise_distances(np.vstack([q, g]))[:nq, nq:]
        try:
            want = oracle_cmc_map(dist, q_lab, g_lab, q_cam, g_cam, protocol)
        except Exception:
            continue  # oracle hit the every-query-excluded case
        if np.isnan(want[1]):
            continue
        got = cmc_and_map(rank_gallery(q, g), q_lab, g_lab, q_cam, g_cam, protocol)
        assert abs(got[1] - want[1]) <= 1e-12
        assert got[2] == want[2]
        for r in protocol.cmc_ranks:
            assert abs(got[0][r] - want[0][r]) <= 1e-12


def test_cmc_monotone_and_map_in_unit_interval():
    rng = Rng(31)
    protocol = EvalProtocol(exclude_same_camera=False, cmc_ranks=(1, 2, 4, 8))
    for _ in range(20):
        e = rng.normals(12 * 2).reshape(12, 2)
        labels = [rng.randbelow(3) for _ in range(12)]
        cams = [rng.randbelow(2) for _ in range(12)]
        report = evaluate_embeddings(e, labels, cams, protocol)
        values = [report.cmc[r] for r in (1, 2, 4, 8)]
        assert all(a <= b + 1e-15 for a, b in zip(values, values[1:]))
        assert 0.0 <= report.map <= 1.0


# ---------------------------------------------------------------------------
# error statistics
# ---------------------------------------------------------------------------

def test_error_stats_separated_clusters_are_clean():
    e = np.array([[0.0], [0.1], [10.0], [10.1]])
    err_i, err_ii, _ = error_stats(e, [0, 0, 1, 1])
    assert err_i == 0.0 and err_ii == 0.0


def test_error_stats_hand_example():
    # anchor 0 (id A): positive at 10, negatives at 1 and 20 -> one negative
    # closer than the farthest positive, one positive beyond the nearest
    # negative; remaining anchors enumerated the same way by hand
    e = np.array([[0.0], [10.0], [1.0], [20.0]])
    labels = [0, 0, 1, 1]
    err_i, err_ii, excluded = error_stats(e, labels)
    assert abs(err_i - (1 + 1 + 2 + 1) / 4.0) < 1e-12
    assert abs(err_ii - 1.0) < 1e-12
    assert excluded == 0


def test_error_stats_matches_oracle_on_random_sets():
    rng = Rng(404)
    for trial in range(200):
        n = 4 + rng.randbelow(47)
        dim = 1 + rng.randbelow(3)
        e = rng.normals(n * dim).reshape(n, dim)
        labels = [rng.randbelow(1 + rng.randbelow(6)) for _ in range(n)]
        dist = pairwise_distances(e)
        try:
            want = oracle_error_stats(dist, labels)
        except Exception:
            continue
        got = error_stats(e, labels)
        assert got == want


def test_error_stats_duplicated_samples_verified_by_oracle():
    rng = Rng(99)
    e = rng.normals(10 * 2).reshape(10, 2)
    labels = [0, 0, 0, 1, 1, 2, 2, 2, 3, 3]
    for feats, labs in ((e, labels), (np.vstack([e, e]), labels + labels)):
        got = error_stats(feats, labs)
        want = oracle_error_stats(pairwise_distances(feats), labs)
        assert got == want


def test_error_stats_excludes_singleton_identities():
    e = np.array([[0.0], [1.0], [2.0]])
    err_i, err_ii, excluded = error_stats(e, [0, 0, 5])
    assert excluded == 1


def test_error_stats_needs_some_anchor():
    with pytest.raises(EvalError):
        error_stats(np.zeros((3, 1)), [0, 1, 2])


# ---------------------------------------------------------------------------
# distance summary
# ---------------------------------------------------------------------------

def test_summary_all_identical_samples():
    s = distance_summary(np.ones((6, 2)), [0, 0, 0, 1, 1, 1], bins=4)
    assert np.all(s.intra_means == 0.0) and np.all(s.inter_means == 0.0)


def test_summary_separated_identities_ordered_histograms():
    e = np.vstack([Rng(1).normals(10).reshape(5, 2),
                   Rng(2).normals(10).reshape(5, 2) + 50.0])
    s = distance_summary(e, [0] * 5 + [1] * 5, bins=10)
    assert s.intra_means.max() < s.inter_means.min()
    # all intra mass in lower bins than any inter mass
    top_intra = np.flatnonzero(s.intra_hist).max()
    bottom_inter = np.flatnonzero(s.inter_hist).min()
    assert top_intra < bottom_inter


def test_summary_histogram_counts_sum_to_anchor_count():
    rng = Rng(7)
    e = rng.normals(24).reshape(12, 2)
    labels = [0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3]
    s = distance_summary(e, labels, bins=5)
    assert s.intra_hist.sum() == len(s.intra_means) == 12
    assert s.inter_hist.sum() == 12


def test_summary_rejects_zero_bins():
    with pytest.raises(EvalError):
        distance_summary(np.ones((4, 1)), [0, 0, 1, 1], bins=0)


# ---------------------------------------------------------------------------
# report plumbing
# ---------------------------------------------------------------------------

def test_save_report_key_value_and_cmc_csv(tmp_path):
    rng = Rng(15)
    e = rng.normals(16 * 3).reshape(16, 3)
    labels = [i % 4 for i in range(16)]
    cams = [i % 2 for i in range(16)]
    report = evaluate_embeddings(e, labels, cams,
                                 EvalProtocol(exclude_same_camera=False,
                                              cmc_ranks=(1, 5)))
    rp, cp = tmp_path / "report.txt", tmp_path / "cmc.csv"
    save_report(report, rp, cp)
    text = rp.read_text()
    for key in ("mAP=", "cmc_1=", "error_I=", "error_II="):
        assert key in text
    lines = cp.read_text().splitlines()
    assert lines[0] == "rank,cmc"
    assert len(lines) == 3


def test_protocol_validation():
    with pytest.raises(EvalError):
        EvalProtocol(cmc_ranks=())
    with pytest.raises(EvalError):
        EvalProtocol(cmc_ranks=(5, 1))
