"""Experiment config files.

The grammar is INI (configparser): ``[section]`` headers, ``key = value``
lines, ``#`` comments. Sections: [data] (either ``path = file.csv`` or
synthetic-generator keys, never both), [train], [eval], [sweep],
[output]. Unknown keys are rejected so typos fail loudly. All defaults
live here, so an empty section is valid.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .data import SynthConfig
from .errors import ConfigError
from .evaluation import EvalProtocol
from .geometry import DistanceKind, ProbMap
from .losses import FidiConfig, TripletConfig
from .train import TrainConfig

_DATA_KEYS = {"path", "num_identity_pairs", "samples_per_identity", "feature_dim",
              "pair_separation", "intra_noise", "camera_count",
              "camera_offset_scale", "seed"}
_TRAIN_KEYS = {"loss", "alpha", "beta", "prob_map", "distance", "pair_policy",
               "reduction", "margin", "lambda_cls", "optimizer", "learning_rate",
               "momentum", "weight_decay", "iterations", "p_identities",
               "k_instances", "hidden_dims", "embed_dim", "use_bn", "seed"}
_EVAL_KEYS = {"exclude_same_camera", "cmc_ranks", "train_fraction", "split_seed",
              "histogram_bins"}
_SWEEP_KEYS = {"alphas", "betas", "keep_fractions", "seeds"}
_OUTPUT_KEYS = {"dir"}


@dataclass
class ExperimentConfig:
    data_path: str | None
    synth: SynthConfig | None
    train: TrainConfig
    protocol: EvalProtocol
    train_fraction: float
    split_seed: int
    histogram_bins: int
    sweep_alphas: tuple[float, ...] = ()
    sweep_betas: tuple[float, ...] = ()
    sweep_keep_fractions: tuple[float, ...] = ()
    sweep_seeds: tuple[int, ...] = (1,)
    out_dir: str = "out"
    meta: dict = field(default_factory=dict)


def _section(parser: configparser.ConfigParser, name: str, allowed: set[str],
             required: bool = False) -> dict[str, str]:
    if name not in parser:
        if required:
            raise ConfigError(f"missing required config section [{name}]")
        return {}
    items = dict(parser[name])
    unknown = set(items) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(sorted(unknown))}")
    return items


def _get(items: dict, key: str, cast, default):
    if key not in items:
        return default
    raw = items[key].strip()
    try:
        return cast(raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})") from exc


def _bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


def _num_list(cast):
    def parse(raw: str):
        raw = raw.strip()
        if not raw:
            return ()
        return tuple(cast(tok.strip()) for tok in raw.split(","))
    return parse


def load_config(path, require_data: bool = False) -> ExperimentConfig:
    """Parse an experiment config file into typed sub-configs."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    data = _section(parser, "data", _DATA_KEYS, required=require_data)
    train = _section(parser, "train", _TRAIN_KEYS)
    ev = _section(parser, "eval", _EVAL_KEYS)
    sweep = _section(parser, "sweep", _SWEEP_KEYS)
    output = _section(parser, "output", _OUTPUT_KEYS)

    data_path = data.get("path")
    synth = None
    synth_keys = set(data) - {"path"}
    if data_path is not None and synth_keys:
        raise ConfigError("[data] must give either path or synthetic keys, not both")
    if data_path is None:
        synth = SynthConfig(
            num_identity_pairs=_get(data, "num_identity_pairs", int, 10),
            samples_per_identity=_get(data, "samples_per_identity", int, 8),
            feature_dim=_get(data, "feature_dim", int, 16),
            pair_separation=_get(data, "pair_separation", float, 1.0),
            intra_noise=_get(data, "intra_noise", float, 0.25),
            camera_count=_get(data, "camera_count", int, 2),
            camera_offset_scale=_get(data, "camera_offset_scale", float, 0.0),
            seed=_get(data, "seed", int, 0),
        )

    distance = DistanceKind(variant=_get(train, "distance", str, "euclidean"))
    fidi = FidiConfig(
        alpha=_get(train, "alpha", float, 1.05),
        prob_map=ProbMap(variant=_get(train, "prob_map", str, "exponential"),
                         beta=_get(train, "beta", float, 0.5)),
        distance=distance,
        pair_policy=_get(train, "pair_policy", str, "all_pairs"),
        reduction=_get(train, "reduction", str, "mean"),
    )
    margin = TripletConfig(margin=_get(train, "margin", float, 0.3),
                           distance=distance)
    train_cfg = TrainConfig(
        loss_kind=_get(train, "loss", str, "fidi"),
        fidi=fidi,
        margin=margin,
        lambda_cls=_get(train, "lambda_cls", float, 1.0),
        optimizer=_get(train, "optimizer", str, "adam"),
        learning_rate=_get(train, "learning_rate", float, 1e-3),
        momentum=_get(train, "momentum", float, 0.9),
        weight_decay=_get(train, "weight_decay", float, 0.0),
        iterations=_get(train, "iterations", int, 1000),
        p_identities=_get(train, "p_identities", int, 8),
        k_instances=_get(train, "k_instances", int, 16),
        hidden_dims=_get(train, "hidden_dims", _num_list(int), (32,)),
        embed_dim=_get(train, "embed_dim", int, 8),
        use_bn=_get(train, "use_bn", _bool, True),
        seed=_get(train, "seed", int, 1),
    )

    protocol = EvalProtocol(
        exclude_same_camera=_get(ev, "exclude_same_camera", _bool, True),
        cmc_ranks=_get(ev, "cmc_ranks", _num_list(int), (1, 5, 10)),
    )
    train_fraction = _get(ev, "train_fraction", float, 0.5)
    if not (0.0 < train_fraction <= 1.0):
        raise ConfigError(f"train_fraction must be in (0, 1], got {train_fraction}")

    return ExperimentConfig(
        data_path=data_path,
        synth=synth,
        train=train_cfg,
        protocol=protocol,
        train_fraction=train_fraction,
        split_seed=_get(ev, "split_seed", int, 97),
        histogram_bins=_get(ev, "histogram_bins", int, 20),
        sweep_alphas=_get(sweep, "alphas", _num_list(float), ()),
        sweep_betas=_get(sweep, "betas", _num_list(float), ()),
        sweep_keep_fractions=_get(sweep, "keep_fractions", _num_list(float), ()),
        sweep_seeds=_get(sweep, "seeds", _num_list(int), (1,)),
        out_dir=output.get("dir", "out"),
    )
