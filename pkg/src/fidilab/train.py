"""Optimizers and the training loop binding sampler, model, and losses.

The objective is metric_loss(embeddings) + lambda_cls * cross_entropy
(logits), both computed on PK-sampled batches. Everything is driven by a
single seeded RNG stream (model init first, then sampling), so a config
reproduces bit-identical histories and parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import SampleSet, pk_sample
from .errors import ConfigError, DataFormatError, NumericError
from .losses import FidiConfig, LOSS_KINDS, TripletConfig, cross_entropy_loss, metric_loss
from .model import MlpModel, backward, forward, init_model
from .numerics import Rng


@dataclass(frozen=True)
class TrainConfig:
    """Training-run description; defaults follow the package-wide
    conventions (P=8 identities, batch 128, Adam at 1e-3)."""

    loss_kind: str = "fidi"
    fidi: FidiConfig = field(default_factory=FidiConfig)
    margin: TripletConfig = field(default_factory=TripletConfig)
    lambda_cls: float = 1.0
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 0.0
    iterations: int = 1000
    p_identities: int = 8
    k_instances: int = 16
    hidden_dims: tuple[int, ...] = (32,)
    embed_dim: int = 8
    use_bn: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.loss_kind not in LOSS_KINDS:
            raise ConfigError(f"loss_kind must be one of {LOSS_KINDS}, got {self.loss_kind!r}")
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.lambda_cls < 0:
            raise ConfigError("lambda_cls must be >= 0")
        if self.optimizer not in ("adam", "sgd_momentum"):
            raise ConfigError(f"optimizer must be adam or sgd_momentum, got {self.optimizer!r}")


@dataclass
class TrainHistory:
    """Per-iteration loss records."""

    iteration: list[int] = field(default_factory=list)
    metric_loss: list[float] = field(default_factory=list)
    cls_loss: list[float] = field(default_factory=list)
    total: list[float] = field(default_factory=list)

    def append(self, it: int, metric: float, cls: float, tot: float) -> None:
        self.iteration.append(it)
        self.metric_loss.append(metric)
        self.cls_loss.append(cls)
        self.total.append(tot)

    def __len__(self) -> int:
        return len(self.iteration)


def save_history(history: TrainHistory, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("iter,metric_loss,cls_loss,total\n")
        for row in zip(history.iteration, history.metric_loss,
                       history.cls_loss, history.total):
            fh.write(f"{row[0]},{float(row[1])!r},{float(row[2])!r},"
                     f"{float(row[3])!r}\n")


def load_history(path) -> TrainHistory:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "iter,metric_loss,cls_loss,total":
        raise DataFormatError(f"{path}: not a training-history CSV")
    hist = TrainHistory()
    for line in lines[1:]:
        if not line.strip():
            continue
        it, m, c, t = line.split(",")
        hist.append(int(it), float(m), float(c), float(t))
    return hist


# ---------------------------------------------------------------------------
# optimizers
# ---------------------------------------------------------------------------

class SgdMomentum:
    """v = momentum * v + g; p -= lr * v. Weight decay adds wd * p to g."""

    def __init__(self, lr: float, momentum: float = 0.9, weight_decay: float = 0.0):
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        for name in sorted(params):
            g = grads[name]
            if not np.all(np.isfinite(g)):
                raise NumericError(f"non-finite gradient for parameter {name!r}")
            if self.weight_decay:
                g = g + self.weight_decay * params[name]
            v = self.velocity.get(name)
            v = g if v is None else self.momentum * v + g
            self.velocity[name] = v
            params[name] -= self.lr * v


class Adam:
    """Adam with bias correction:

    m = b1*m + (1-b1)*g;  v = b2*v + (1-b2)*g^2
    p -= lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
    """

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8, weight_decay: float = 0.0):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        for name in sorted(params):
            g = grads[name]
            if not np.all(np.isfinite(g)):
                raise NumericError(f"non-finite gradient for parameter {name!r}")
            if self.weight_decay:
                g = g + self.weight_decay * params[name]
            m = self.m.get(name, np.zeros_like(params[name]))
            v = self.v.get(name, np.zeros_like(params[name]))
            m = self.beta1 * m + (1.0 - self.beta1) * g
            v = self.beta2 * v + (1.0 - self.beta2) * g * g
            self.m[name], self.v[name] = m, v
            m_hat = m / (1.0 - self.beta1 ** self.t)
            v_hat = v / (1.0 - self.beta2 ** self.t)
            params[name] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def make_optimizer(cfg: TrainConfig):
    if cfg.optimizer == "adam":
        return Adam(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps,
                    cfg.weight_decay)
    return SgdMomentum(cfg.learning_rate, cfg.momentum, cfg.weight_decay)


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------

class TrainingDiverged(NumericError):
    def __init__(self, iteration: int, detail: str):
        super().__init__(f"training diverged at iteration {iteration}: {detail}")
        self.iteration = iteration


def train(data: SampleSet, cfg: TrainConfig) -> tuple[MlpModel, TrainHistory]:
    """Run the full loop: pk_sample -> forward(train) -> losses ->
    backward -> optimizer step, for cfg.iterations iterations."""
    rng = Rng(cfg.seed)
    dims = (data.feature_dim, *cfg.hidden_dims, cfg.embed_dim)
    model = init_model(dims, max(data.num_identities, 2), cfg.use_bn, rng)
    opt = make_optimizer(cfg)
    history = TrainHistory()

    for it in range(cfg.iterations):
        batch = pk_sample(data, cfg.p_identities, cfg.k_instances, rng)
        x = data.features[batch.indices]
        labels = data.identity[batch.indices]

        try:
            embeddings, logits, cache = forward(model, x, mode="train")
            metric = metric_loss(cfg.loss_kind, embeddings, labels,
                                 fidi_cfg=cfg.fidi, margin_cfg=cfg.margin)
            if cfg.lambda_cls > 0:
                cls = cross_entropy_loss(logits, labels)
                grad_logits = cfg.lambda_cls * cls.grad_logits
                cls_value = cls.value
            else:
                grad_logits = None
                cls_value = 0.0
            total = metric.value + cfg.lambda_cls * cls_value
            if not np.isfinite(total):
                raise NumericError(f"non-finite total loss: {total}")
            grads = backward(model, cache, metric.grad_embeddings, grad_logits)
            opt.step(model.params, grads)
        except NumericError as exc:
            raise TrainingDiverged(it, str(exc)) from exc
        history.append(it, metric.value, cls_value, total)
    return model, history
