"""Train the pairwise loss against the batch-hard triplet loss on a
scaled-down confusable-pairs problem and compare held-out retrieval
quality. A compact version of the package's flagship experiment; expect
roughly a minute.

Run:  python3 demos/04_train_and_evaluate.py
"""

import time

import numpy as np

from fidilab import (
    EvalProtocol,
    FidiConfig,
    Rng,
    SynthConfig,
    TrainConfig,
    generate_synthetic,
    init_model,
    split_identities,
)
from fidilab.pipeline import evaluate_model, run_experiment

data = generate_synthetic(SynthConfig(
    num_identity_pairs=40, samples_per_identity=16, feature_dim=32,
    pair_separation=1.0, intra_noise=0.3, camera_count=4,
    camera_offset_scale=1.0, seed=42))
train_set, test_set = split_identities(data, 0.5, Rng(97))
protocol = EvalProtocol(exclude_same_camera=True, cmc_ranks=(1, 5, 10))
print(f"train identities: {train_set.num_identities}, "
      f"held-out identities: {test_set.num_identities}")

baseline = evaluate_model(init_model((32, 64, 16), train_set.num_identities,
                                     True, Rng(1)), test_set, protocol)
print(f"\nrandom-init model: mAP={baseline.map:.3f} "
      f"error-I={baseline.error_i:.1f} per anchor")

for loss in ("fidi", "btl"):
    cfg = TrainConfig(loss_kind=loss,
                      fidi=FidiConfig(pair_policy="hard_pairs"),
                      lambda_cls=0.5, iterations=1200,
                      p_identities=8, k_instances=16,
                      hidden_dims=(64,), embed_dim=16, seed=1)
    t0 = time.time()
    result = run_experiment(train_set, test_set, cfg, protocol)
    hist = result.history
    report = result.report
    print(f"\n{loss}: trained {cfg.iterations} iterations in {time.time()-t0:.0f}s")
    print(f"  metric loss {np.mean(hist.metric_loss[:50]):.3f} -> "
          f"{np.mean(hist.metric_loss[-50:]):.3f}")
    print(f"  held-out mAP={report.map:.3f}  "
          + " ".join(f"cmc@{r}={v:.3f}" for r, v in sorted(report.cmc.items())))
    print(f"  error-I={report.error_i:.1f}  error-II={report.error_ii:.2f}")

print("\nBoth losses clear the random baseline by a wide margin; the")
print("pairwise loss keeps pressing on the confusable pairs after the")
print("triplet hinge has gone quiet, which shows up as the mAP gap and the")
print("lower error-I above.")
