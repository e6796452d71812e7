"""Acceptance suite: every release-gating property, one test per
criterion, each printing a PASS/FAIL line (run with -s to watch).

Criteria 6-9 train real models on the hard synthetic configuration (100
confusable identity pairs, 20 samples each, strong camera offsets) and
take a few minutes; everything else is near-instant.
"""

import time

import numpy as np
import pytest

from fidilab import (
    EvalProtocol,
    FidiConfig,
    ProbMap,
    Rng,
    SynthConfig,
    TrainConfig,
    cmc_and_map,
    error_stats,
    fidi_bound,
    fidi_pair_loss,
    generate_synthetic,
    init_model,
    pairwise_distances,
    prob_of_distance,
    rank_gallery,
    split_identities,
    triplet_loss,
    TripletConfig,
)
from fidilab.gradcheck import run_all_checks
from fidilab.pipeline import evaluate_model, run_experiment

ALPHAS = (1.05, 1.2, 2.0)

# hard synthetic configuration: confusable pairs one unit apart inside the
# identity subspace, sample noise comparable to that separation, and
# camera offsets that dwarf it
HARD = SynthConfig(num_identity_pairs=100, samples_per_identity=20,
                   feature_dim=32, pair_separation=1.0, intra_noise=0.3,
                   camera_count=4, camera_offset_scale=1.0, seed=42)
SEEDS = (1, 2, 3, 4, 5)
FRACTIONS = (0.25, 0.5, 0.75, 1.0)
PROTOCOL = EvalProtocol(exclude_same_camera=True, cmc_ranks=(1, 5, 10))


def _announce(num: int, passed: bool, detail: str) -> None:
    print(f"ACCEPTANCE {num}: {'PASS' if passed else 'FAIL'} - {detail}")


def _train_cfg(loss: str, seed: int) -> TrainConfig:
    return TrainConfig(loss_kind=loss,
                       fidi=FidiConfig(alpha=1.05,
                                       prob_map=ProbMap("exponential", 0.5),
                                       pair_policy="hard_pairs"),
                       margin=TripletConfig(margin=0.3),
                       lambda_cls=0.5, iterations=2000,
                       p_identities=8, k_instances=16,
                       hidden_dims=(64,), embed_dim=16, seed=seed)


def _run_grid():
    """Train fidi and btl over all seeds and keep fractions; returns the
    per-run metrics and the random-init baseline report."""
    data = generate_synthetic(HARD)
    train_set, test_set = split_identities(data, 0.5, Rng(97))
    random_init = init_model((HARD.feature_dim, 64, 16),
                             train_set.num_identities, True, Rng(1))
    baseline = evaluate_model(random_init, test_set, PROTOCOL)

    runs = {}
    for frac in FRACTIONS:
        for loss in ("fidi", "btl"):
            for seed in SEEDS:
                res = run_experiment(train_set, test_set, _train_cfg(loss, seed),
                                     PROTOCOL, keep_fraction=frac, keep_seed=seed)
                runs[(loss, seed, frac)] = (res.report.map, res.report.error_i)
    return runs, (baseline.map, baseline.error_i)


@pytest.fixture(scope="module")
def experiment_grid():
    t0 = time.time()
    first = _run_grid()
    mid = time.time()
    second = _run_grid()
    print(f"\n[experiment grid: {mid - t0:.0f}s + rerun {time.time() - mid:.0f}s]")
    return first, second


def _maps(runs, loss, frac):
    return np.array([runs[(loss, seed, frac)][0] for seed in SEEDS])


def test_criterion_1_bounds():
    u = 1e-9
    ok = True
    for alpha in ALPHAS:
        k0 = fidi_pair_loss(u, 0.0, alpha)
        k1 = fidi_pair_loss(u, 1.0, alpha)
        bound = fidi_bound(alpha)
        ok &= abs(k0) <= 1e-8
        ok &= abs(k1 - bound) <= 1e-6 * bound
    ok &= abs(fidi_bound(1.05) - 3.044522) < 1e-6
    _announce(1, ok, "per-pair loss limits at u=1e-9 match 0 and log(a/(a-1))")
    assert ok


def test_criterion_2_symmetry():
    grid = np.round(np.linspace(0.0, 1.0, 11), 10)
    ok = True
    for a in grid:
        for b in grid:
            ok &= fidi_pair_loss(float(a), float(b), 1.05) == \
                fidi_pair_loss(float(b), float(a), 1.05)
        ok &= abs(fidi_pair_loss(float(a), float(a), 1.05)) <= 1e-12
    _announce(2, ok, "l(a,b) = l(b,a) bit-identically on the 11x11 grid; l(a,a) = 0")
    assert ok


def test_criterion_3_gradient_oracle():
    t0 = time.time()
    results = run_all_checks(num_batches=20, base_seed=2024, tolerance=1e-5)
    elapsed = time.time() - t0
    ok = all(r.passed for r in results) and elapsed < 30.0
    worst = max(r.max_rel_err for r in results)
    _announce(3, ok, f"all analytic gradients within 1e-5 of central "
                     f"differences (worst {worst:.2e}, {elapsed:.1f}s)")
    assert ok


def test_criterion_4_loss_shape():
    grid = np.linspace(0.0, 20.0, 1000)
    pm = ProbMap("exponential", 0.5)
    ok = True
    for alpha in ALPHAS:
        bound = fidi_bound(alpha)
        u, _ = prob_of_distance(grid, pm)
        k1 = np.array([fidi_pair_loss(float(v), 1.0, alpha) for v in u])
        k0 = np.array([fidi_pair_loss(float(v), 0.0, alpha) for v in u])
        ok &= bool(np.all(np.diff(k1) >= -1e-12))
        ok &= bool(np.all(np.diff(k0) <= 1e-12))
        ok &= bool(np.all(k1 <= bound))
    # unbounded hinge contrast: a far positive makes one triplet's value
    # exceed every bound above
    e = np.array([[0.0], [50.0], [-1.0]])
    out = triplet_loss(e, [0, 0, 1], TripletConfig(margin=0.3, variant="batch_all"))
    per_triplet_max = 50.0 - 1.0 + 0.3  # d_ap - d_an + m for the far pair
    ok &= per_triplet_max > max(fidi_bound(a) for a in ALPHAS)
    ok &= out.value > 0.0
    _announce(4, ok, "loss monotone in d per pair label, capped at the bound; "
                     "triplet value grows past every bound")
    assert ok


def _oracle_cmc_map(dist, q_labels, g_labels, q_cams, g_cams, protocol):
    cmc_hits = {r: 0 for r in protocol.cmc_ranks}
    aps = []
    excluded = 0
    for qi in range(dist.shape[0]):
        entries = []
        for gj in range(dist.shape[1]):
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
        hits, precisions = 0, []
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
    if valid == 0:
        return None
    return ({r: cmc_hits[r] / valid for r in protocol.cmc_ranks},
            float(np.mean(aps)), excluded)


def _oracle_error_stats(dist, labels):
    n = len(labels)
    err_i, err_ii = [], []
    for a in range(n):
        pos = [j for j in range(n) if j != a and labels[j] == labels[a]]
        neg = [j for j in range(n) if labels[j] != labels[a]]
        if not pos:
            continue
        if not neg:
            err_i.append(0)
            err_ii.append(0)
            continue
        max_pos = max(dist[a, p] for p in pos)
        min_neg = min(dist[a, j] for j in neg)
        err_i.append(sum(1 for j in neg if dist[a, j] < max_pos))
        err_ii.append(sum(1 for p in pos if dist[a, p] > min_neg))
    return float(np.mean(err_i)), float(np.mean(err_ii))


def test_criterion_5_evaluator_oracles():
    rng = Rng(5150)
    protocol = EvalProtocol(exclude_same_camera=True, cmc_ranks=(1, 3, 5))
    ok = True

    # fixed hand case: ranked relevance [1, 0, 1]
    q = np.array([[0.0]])
    g = np.array([[0.1], [0.2], [0.3]])
    open_protocol = EvalProtocol(exclude_same_camera=False, cmc_ranks=(1,))
    cmc, mean_ap, _ = cmc_and_map(rank_gallery(q, g), [0], [0, 1, 0],
                                  [0], [0, 0, 0], open_protocol)
    ok &= abs(mean_ap - 5.0 / 6.0) < 1e-12 and cmc[1] == 1.0

    checked = 0
    for _ in range(200):
        nq = 1 + rng.randbelow(6)
        ng = 2 + rng.randbelow(19)
        q = rng.normals(nq * 2).reshape(nq, 2)
        g = rng.normals(ng * 2).reshape(ng, 2)
        n_ids = 1 + rng.randbelow(5)
        q_lab = [rng.randbelow(n_ids) for _ in range(nq)]
        g_lab = [rng.randbelow(n_ids) for _ in range(ng)]
        q_cam = [rng.randbelow(3) for _ in range(nq)]
        g_cam = [rng.randbelow(3) for _ in range(ng)]
        dist = pairwise_distances(np.vstack([q, g]))[:nq, nq:]
        want = _oracle_cmc_map(dist, q_lab, g_lab, q_cam, g_cam, protocol)
        if want is None:
            continue
        got = cmc_and_map(rank_gallery(q, g), q_lab, g_lab, q_cam, g_cam, protocol)
        ok &= abs(got[1] - want[1]) <= 1e-12
        ok &= all(abs(got[0][r] - want[0][r]) <= 1e-12 for r in protocol.cmc_ranks)
        checked += 1

    for _ in range(200):
        n = 4 + rng.randbelow(47)
        e = rng.normals(n * 2).reshape(n, 2)
        labels = [rng.randbelow(1 + rng.randbelow(6)) for _ in range(n)]
        if all(labels.count(v) < 2 for v in set(labels)):
            continue
        want = _oracle_error_stats(pairwise_distances(e), labels)
        got = error_stats(e, labels)
        ok &= got[0] == want[0] and got[1] == want[1]

    _announce(5, ok, f"cmc/mAP and error stats match brute force exactly "
                     f"({checked}+ retrieval instances)")
    assert ok


def test_criterion_6_fine_grained_advantage(experiment_grid):
    (runs, _), _ = experiment_grid
    fidi = _maps(runs, "fidi", 1.0)
    btl = _maps(runs, "btl", 1.0)
    gap = float(fidi.mean() - btl.mean())
    wins = int(np.sum(fidi > btl))
    ok = gap >= 0.02 and wins >= 4
    _announce(6, ok, f"held-out mAP fidi={fidi.mean():.4f} btl={btl.mean():.4f} "
                     f"gap={100 * gap:.1f}pts wins={wins}/5")
    assert ok


def test_criterion_7_data_efficiency(experiment_grid):
    (runs, _), _ = experiment_grid
    ok = True
    parts = []
    for frac in FRACTIONS:
        f_mean = _maps(runs, "fidi", frac).mean()
        b_mean = _maps(runs, "btl", frac).mean()
        ok &= f_mean >= b_mean
        parts.append(f"{frac:.2f}: {f_mean:.3f}/{b_mean:.3f}")
    _announce(7, ok, "fidi mAP >= btl mAP at every identity fraction "
                     f"({', '.join(parts)})")
    assert ok


def test_criterion_8_fidelity_direction(experiment_grid):
    (runs, baseline), _ = experiment_grid
    base_err = baseline[1]
    trained = np.array([runs[("fidi", seed, 1.0)][1] for seed in SEEDS])
    ratio = base_err / trained.mean()
    ok = base_err >= 10.0 * trained.mean()
    _announce(8, ok, f"error-I random-init={base_err:.1f} vs fidi-trained="
                     f"{trained.mean():.1f} ({ratio:.1f}x reduction)")
    assert ok


def test_criterion_9_determinism(experiment_grid):
    (runs1, base1), (runs2, base2) = experiment_grid
    ok = base1 == base2
    for key, vals in runs1.items():
        ok &= vals == runs2[key]
    _announce(9, ok, "all experiment metrics bit-identical across a full rerun")
    assert ok
