"""End-to-end experiment plumbing shared by the CLI and the test suite:
dataset preparation, identity-disjoint train/test splitting, training a
model, and evaluating it on held-out identities."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .config import ExperimentConfig
from .data import SampleSet, generate_synthetic, load_sampleset, split_identities
from .errors import ConfigError
from .evaluation import EvalProtocol, EvalReport, evaluate_embeddings
from .model import MlpModel, forward
from .numerics import Rng
from .train import TrainConfig, TrainHistory, train


def dataset(cfg: ExperimentConfig) -> SampleSet:
    if cfg.data_path is not None:
        return load_sampleset(cfg.data_path)
    return generate_synthetic(cfg.synth)


def train_test_split(data: SampleSet, train_fraction: float,
                     split_seed: int) -> tuple[SampleSet, SampleSet]:
    """Identity-disjoint split; train_fraction == 1 reuses the training
    identities for evaluation (useful only for sanity checks)."""
    if train_fraction >= 1.0:
        return data, data
    return split_identities(data, train_fraction, Rng(split_seed))


def embed(model: MlpModel, data: SampleSet) -> np.ndarray:
    embeddings, _, _ = forward(model, data.features, mode="eval")
    return embeddings


def evaluate_model(model: MlpModel, data: SampleSet,
                   protocol: EvalProtocol = EvalProtocol(),
                   bins: int = 20) -> EvalReport:
    if model.feature_dim != data.feature_dim:
        raise ConfigError(
            f"checkpoint expects feature dim {model.feature_dim}, "
            f"dataset has {data.feature_dim}")
    return evaluate_embeddings(embed(model, data), data.identity, data.camera,
                               protocol, bins=bins)


@dataclass
class RunResult:
    model: MlpModel
    history: TrainHistory
    report: EvalReport


def run_experiment(train_set: SampleSet, test_set: SampleSet,
                   train_cfg: TrainConfig,
                   protocol: EvalProtocol = EvalProtocol(),
                   keep_fraction: float = 1.0,
                   keep_seed: int = 11) -> RunResult:
    """Optionally thin the training identities, then train and evaluate
    on the held-out set."""
    if keep_fraction < 1.0:
        train_set, _ = split_identities(train_set, keep_fraction, Rng(keep_seed))
    model, history = train(train_set, train_cfg)
    report = evaluate_model(model, test_set, protocol)
    return RunResult(model, history, report)


def with_seed(cfg: TrainConfig, seed: int) -> TrainConfig:
    return replace(cfg, seed=seed)

def with_alpha(cfg: TrainConfig, alpha: float) -> TrainConfig:
    return replace(cfg, fidi=replace(cfg.fidi, alpha=alpha))

def with_beta(cfg: TrainConfig, beta: float) -> TrainConfig:
    pm = replace(cfg.fidi.prob_map, beta=beta)
    return replace(cfg, fidi=replace(cfg.fidi, prob_map=pm))
