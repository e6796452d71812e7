"""Finite-difference validation of every analytic gradient.

Margin losses are piecewise linear, so a check is only meaningful away
from their hinge and tie points: a central difference with step h
straddles the kink whenever the hinge argument is within h of zero.
Batches are therefore drawn from a seeded stream and redrawn (moving to
the next seed) until every hinge argument, mining tie gap, and ReLU
pre-activation clears a safety band well above h.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FidilabError
from .geometry import pairwise_distances
from .losses import (
    FidiConfig,
    TripletConfig,
    cross_entropy_loss,
    metric_loss,
)
from .model import backward, forward, init_model
from .numerics import Rng, finite_diff_grad, rel_error

SAFETY_BAND = 1e-3
DEFAULT_TOLERANCE = 1e-5


def _labels_for(batch: int, num_ids: int) -> np.ndarray:
    # balanced labels: num_ids identities, batch/num_ids instances each
    return np.arange(batch) % num_ids


def _hinge_margins(e: np.ndarray, labels: np.ndarray, margin: float) -> float:
    """Smallest distance of any hinge argument or mining tie from zero."""
    d = pairwise_distances(e)
    same = labels[:, None] == labels[None, :]
    eye = np.eye(len(labels), dtype=bool)
    pos, neg = same & ~eye, ~same

    worst = np.inf
    b = len(labels)
    for a in range(b):
        dp = np.sort(d[a][pos[a]])[::-1]
        dn = np.sort(d[a][neg[a]])
        if len(dp) >= 2:
            worst = min(worst, dp[0] - dp[1])      # batch-hard max tie
        if len(dn) >= 2:
            worst = min(worst, dn[1] - dn[0])      # batch-hard min tie
        if len(dp) and len(dn):
            worst = min(worst, abs(dp[0] - dn[0] + margin))   # btl hinge
            for p in d[a][pos[a]]:
                worst = min(worst, np.min(np.abs(p - d[a][neg[a]] + margin)))
        for n in d[a][neg[a]] if len(dn) else []:
            worst = min(worst, abs(margin - n))    # contrastive hinge
    return float(worst)


def safe_batch(seed: int, batch: int = 16, dim: int = 8, num_ids: int = 4,
               margin: float = 0.3, max_tries: int = 200):
    """Seeded random batch whose hinge arguments all clear SAFETY_BAND.

    Returns (embeddings, labels, seed_used); the search walks seeds
    deterministically so the same request always yields the same batch.
    """
    labels = _labels_for(batch, num_ids)
    for attempt in range(max_tries):
        s = seed + 1000 * attempt
        e = Rng(s).normals(batch * dim).reshape(batch, dim)
        if _hinge_margins(e, labels, margin) > SAFETY_BAND:
            return e, labels, s
    raise FidilabError(f"could not find a hinge-safe batch from seed {seed}")


@dataclass
class CheckResult:
    name: str
    max_rel_err: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= self.tolerance


def check_loss_gradient(kind: str, seeds, batch: int = 16, dim: int = 8,
                        num_classes: int = 5, margin: float = 0.3,
                        h: float = 1e-4,
                        tolerance: float = DEFAULT_TOLERANCE,
                        corrupt: bool = False) -> CheckResult:
    """Compare one loss's analytic gradient to central differences over
    several hinge-safe seeded batches; reports the worst relative error."""
    fidi_cfg = FidiConfig()
    margin_cfg = TripletConfig(margin=margin)
    worst = 0.0
    for seed in seeds:
        if kind == "ce":
            logits = Rng(seed).normals(batch * num_classes).reshape(batch, num_classes)
            labels = _labels_for(batch, num_classes)
            out = cross_entropy_loss(logits, labels)
            analytic = out.grad_logits
            fd = finite_diff_grad(lambda z: cross_entropy_loss(z, labels).value,
                                  logits.copy(), h)
        else:
            e, labels, _ = safe_batch(seed, batch, dim, margin=margin)
            out = metric_loss(kind, e, labels, fidi_cfg=fidi_cfg, margin_cfg=margin_cfg)
            analytic = out.grad_embeddings
            fd = finite_diff_grad(
                lambda z: metric_loss(kind, z, labels, fidi_cfg=fidi_cfg,
                                      margin_cfg=margin_cfg).value, e.copy(), h)
        if corrupt:
            analytic = analytic.copy()
            analytic.flat[0] += 1e-2
        worst = max(worst, rel_error(analytic, fd))
    return CheckResult(kind, worst, tolerance)


def check_model_gradient(seeds, feature_dim: int = 5, hidden=(6,),
                         embed_dim: int = 4, num_classes: int = 3,
                         batch: int = 6, lambda_cls: float = 1.0,
                         h: float = 1e-4,
                         tolerance: float = DEFAULT_TOLERANCE,
                         corrupt: bool = False) -> CheckResult:
    """Full-parameter backprop check of FIDI + cross-entropy through the
    network, batch-norm neck included."""
    worst = 0.0
    for seed in seeds:
        model, x, labels = _safe_model_case(seed, feature_dim, hidden,
                                            embed_dim, num_classes, batch)

        def total(m):
            emb, logits, _ = forward(m, x, mode="train")
            value = metric_loss("fidi", emb, labels).value
            return value + lambda_cls * cross_entropy_loss(logits, labels).value

        emb, logits, cache = forward(model, x, mode="train")
        mo = metric_loss("fidi", emb, labels)
        co = cross_entropy_loss(logits, labels)
        grads = backward(model, cache, mo.grad_embeddings,
                         lambda_cls * co.grad_logits)
        if corrupt:
            grads = {k: v.copy() for k, v in grads.items()}
            next(iter(grads.values())).flat[0] += 1e-2
        # one relative error over the whole flattened gradient: some
        # blocks (the last-layer bias under a bn neck) are structurally
        # zero and would otherwise divide FD noise by nothing
        analytic_parts, fd_parts = [], []
        for name in sorted(model.params):
            def f(arr, name=name):
                m2 = model.copy()
                m2.params[name] = arr.reshape(model.params[name].shape)
                return total(m2)
            fd = finite_diff_grad(f, model.params[name].copy(), h)
            analytic_parts.append(grads[name].ravel())
            fd_parts.append(fd.ravel())
        worst = max(worst, rel_error(np.concatenate(analytic_parts),
                                     np.concatenate(fd_parts)))
    return CheckResult("model", worst, tolerance)


def _safe_model_case(seed: int, feature_dim, hidden, embed_dim, num_classes,
                     batch, max_tries: int = 200):
    labels = _labels_for(batch, num_classes)
    for attempt in range(max_tries):
        s = seed + 1000 * attempt
        rng = Rng(s)
        model = init_model((feature_dim, *hidden, embed_dim), num_classes, True, rng)
        x = rng.normals(batch * feature_dim).reshape(batch, feature_dim)
        _, _, cache = forward(model, x, mode="train")
        preacts = cache["preacts"]
        if not preacts or min(np.min(np.abs(p)) for p in preacts) > SAFETY_BAND:
            return model, x, labels
    raise FidilabError(f"could not find a ReLU-safe model case from seed {seed}")


def run_all_checks(num_batches: int = 20, base_seed: int = 2024,
                   tolerance: float = DEFAULT_TOLERANCE,
                   model_batches: int = 3,
                   corrupt: bool = False) -> list[CheckResult]:
    """The full check matrix: one row per loss kind plus the model row."""
    seeds = [base_seed + i for i in range(num_batches)]
    results = [check_loss_gradient(kind, seeds, tolerance=tolerance,
                                   corrupt=corrupt)
               for kind in ("fidi", "tl", "btl", "cl", "bcl", "ce")]
    results.append(check_model_gradient(seeds[:model_batches],
                                        tolerance=tolerance, corrupt=corrupt))
    return results
