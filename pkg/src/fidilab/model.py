"""Minimal trainable embedding network with hand-derived backprop.

Architecture: a stack of linear layers with ReLU between them (dims
[F, h1, ..., D]), producing the embedding; an optional batch-norm neck on
the embedding; and a bias-free linear classifier on the neck output.
Metric losses consume the pre-neck embeddings, the classification loss
the post-neck logits, and backward() combines both upstream gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataFormatError, ShapeError
from .numerics import Rng

CHECKPOINT_MAGIC = "fidilab-checkpoint v1"


@dataclass
class MlpModel:
    """Parameter container. params keys: w{i}/b{i} per linear layer,
    bn_gamma/bn_shift when the neck is enabled, and classifier (D x C,
    deliberately bias-free)."""

    dims: tuple[int, ...]
    num_classes: int
    use_bn: bool
    params: dict[str, np.ndarray]
    running_mean: np.ndarray
    running_var: np.ndarray
    bn_momentum: float = 0.9
    bn_eps: float = 1e-5

    @property
    def feature_dim(self) -> int:
        return self.dims[0]

    @property
    def embed_dim(self) -> int:
        return self.dims[-1]

    def copy(self) -> "MlpModel":
        return MlpModel(self.dims, self.num_classes, self.use_bn,
                        {k: v.copy() for k, v in self.params.items()},
                        self.running_mean.copy(), self.running_var.copy(),
                        self.bn_momentum, self.bn_eps)


def init_model(dims, num_classes: int, use_bn: bool, rng: Rng,
               bn_momentum: float = 0.9, bn_eps: float = 1e-5) -> MlpModel:
    """Fan-in-scaled uniform init: each weight ~ U(-1/sqrt(fan_in),
    +1/sqrt(fan_in)), biases zero. Deterministic given the rng seed."""
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2:
        raise ConfigError("dims must list at least input and embedding sizes")
    if any(d < 1 for d in dims):
        raise ConfigError(f"all dims must be >= 1, got {dims}")
    if num_classes < 2:
        raise ConfigError(f"num_classes must be >= 2, got {num_classes}")

    params: dict[str, np.ndarray] = {}
    for i in range(len(dims) - 1):
        fan_in, fan_out = dims[i], dims[i + 1]
        scale = 1.0 / np.sqrt(fan_in)
        params[f"w{i}"] = (rng.uniforms(fan_in * fan_out) * 2.0 - 1.0).reshape(
            fan_in, fan_out) * scale
        params[f"b{i}"] = np.zeros(fan_out)
    d = dims[-1]
    if use_bn:
        params["bn_gamma"] = np.ones(d)
        params["bn_shift"] = np.zeros(d)
    params["classifier"] = (rng.uniforms(d * num_classes) * 2.0 - 1.0).reshape(
        d, num_classes) / np.sqrt(d)
    return MlpModel(dims, num_classes, use_bn, params,
                    np.zeros(d), np.ones(d), bn_momentum, bn_eps)


def forward(model: MlpModel, x: np.ndarray, mode: str = "train"):
    """Run the network; returns (embeddings, logits, cache).

    Train mode normalizes with batch statistics and updates the running
    stats; eval mode uses the running stats and mutates nothing.
    """
    if mode not in ("train", "eval"):
        raise ConfigError(f"mode must be 'train' or 'eval', got {mode!r}")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.feature_dim:
        raise ShapeError(f"input shape {x.shape} does not match feature dim "
                         f"{model.feature_dim}")
    n_layers = len(model.dims) - 1
    layer_inputs = []
    preacts = []
    a = x
    for i in range(n_layers):
        layer_inputs.append(a)
        h = a @ model.params[f"w{i}"] + model.params[f"b{i}"]
        if i < n_layers - 1:
            preacts.append(h)
            a = np.maximum(h, 0.0)
        else:
            a = h
    embeddings = a

    if model.use_bn:
        if mode == "train":
            if x.shape[0] < 2:
                raise ShapeError("batch-norm train mode needs a batch of >= 2 "
                                 "(batch variance is undefined otherwise)")
            mean = embeddings.mean(axis=0)
            var = embeddings.var(axis=0)   # biased, matches normalization
            m = model.bn_momentum
            model.running_mean = m * model.running_mean + (1.0 - m) * mean
            model.running_var = m * model.running_var + (1.0 - m) * var
        else:
            mean = model.running_mean
            var = model.running_var
        inv_std = 1.0 / np.sqrt(var + model.bn_eps)
        xhat = (embeddings - mean) * inv_std
        neck = model.params["bn_gamma"] * xhat + model.params["bn_shift"]
    else:
        inv_std = xhat = None
        neck = embeddings
    logits = neck @ model.params["classifier"]

    cache = {
        "mode": mode,
        "layer_inputs": layer_inputs,
        "preacts": preacts,
        "embeddings": embeddings,
        "xhat": xhat,
        "inv_std": inv_std,
        "neck": neck,
        "batch_size": x.shape[0],
    }
    return embeddings, logits, cache


def backward(model: MlpModel, cache: dict,
             grad_embeddings: np.ndarray | None,
             grad_logits: np.ndarray | None) -> dict[str, np.ndarray]:
    """Exact parameter gradients for a train-mode forward pass.

    Combines the metric-loss gradient (on pre-neck embeddings) with the
    classification gradient (on logits) through the neck.
    """
    if cache.get("mode") != "train":
        raise ShapeError("backward requires a cache from a train-mode forward")
    b = cache["batch_size"]
    d = model.embed_dim

    if grad_logits is None:
        grad_logits = np.zeros((b, model.num_classes))
    grad_logits = np.asarray(grad_logits, dtype=np.float64)
    if grad_logits.shape != (b, model.num_classes):
        raise ShapeError(f"grad_logits shape {grad_logits.shape}, expected "
                         f"{(b, model.num_classes)}")
    if grad_embeddings is None:
        grad_embeddings = np.zeros((b, d))
    grad_embeddings = np.asarray(grad_embeddings, dtype=np.float64)
    if grad_embeddings.shape != (b, d):
        raise ShapeError(f"grad_embeddings shape {grad_embeddings.shape}, "
                         f"expected {(b, d)}")

    grads: dict[str, np.ndarray] = {}
    grads["classifier"] = cache["neck"].T @ grad_logits
    g_neck = grad_logits @ model.params["classifier"].T

    if model.use_bn:
        xhat, inv_std = cache["xhat"], cache["inv_std"]
        grads["bn_gamma"] = (g_neck * xhat).sum(axis=0)
        grads["bn_shift"] = g_neck.sum(axis=0)
        gamma = model.params["bn_gamma"]
        # standard batch-norm backward with biased batch variance
        g_emb_cls = (gamma * inv_std) * (
            g_neck - g_neck.mean(axis=0) - xhat * (g_neck * xhat).mean(axis=0))
    else:
        g_emb_cls = g_neck

    g = grad_embeddings + g_emb_cls
    n_layers = len(model.dims) - 1
    for i in range(n_layers - 1, -1, -1):
        a_in = cache["layer_inputs"][i]
        grads[f"w{i}"] = a_in.T @ g
        grads[f"b{i}"] = g.sum(axis=0)
        if i > 0:
            g = (g @ model.params[f"w{i}"].T) * (cache["preacts"][i - 1] > 0.0)
    return grads


# ---------------------------------------------------------------------------
# checkpoint I/O
# ---------------------------------------------------------------------------

def save_model(model: MlpModel, path) -> None:
    """Write the documented text checkpoint.

    Layout: a magic line; dims/classes/use_bn/bn_momentum/bn_eps header
    lines; then one ``param <name> <rows> <cols>`` (or ``buffer ...``)
    block per array with comma-separated repr() floats, one row per line.
    repr() floats make the round-trip exact.
    """
    def block(fh, tag, name, arr):
        a = np.atleast_2d(np.asarray(arr, dtype=np.float64))
        fh.write(f"{tag} {name} {a.shape[0]} {a.shape[1]}\n")
        for row in a:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")

    with open(path, "w", encoding="utf-8") as fh:
        fh.write(CHECKPOINT_MAGIC + "\n")
        fh.write("dims=" + ",".join(str(d) for d in model.dims) + "\n")
        fh.write(f"classes={model.num_classes}\n")
        fh.write(f"use_bn={int(model.use_bn)}\n")
        fh.write(f"bn_momentum={repr(model.bn_momentum)}\n")
        fh.write(f"bn_eps={repr(model.bn_eps)}\n")
        for name in sorted(model.params):
            block(fh, "param", name, model.params[name])
        block(fh, "buffer", "running_mean", model.running_mean)
        block(fh, "buffer", "running_var", model.running_var)


def load_model(path) -> MlpModel:
    """Read a checkpoint written by save_model."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataFormatError(f"cannot read checkpoint {path}: {exc}") from exc
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise DataFormatError(f"{path}: not a fidilab checkpoint")

    header: dict[str, str] = {}
    idx = 1
    while idx < len(lines) and "=" in lines[idx]:
        key, _, val = lines[idx].partition("=")
        header[key] = val
        idx += 1
    try:
        dims = tuple(int(d) for d in header["dims"].split(","))
        num_classes = int(header["classes"])
        use_bn = bool(int(header["use_bn"]))
        bn_momentum = float(header["bn_momentum"])
        bn_eps = float(header["bn_eps"])
    except (KeyError, ValueError) as exc:
        raise DataFormatError(f"{path}: malformed checkpoint header ({exc})") from exc

    arrays: dict[str, np.ndarray] = {}
    shapes_1d = {"bn_gamma", "bn_shift", "running_mean", "running_var"} | {
        f"b{i}" for i in range(len(dims) - 1)}
    while idx < len(lines):
        if not lines[idx].strip():
            idx += 1
            continue
        parts = lines[idx].split()
        if len(parts) != 4 or parts[0] not in ("param", "buffer"):
            raise DataFormatError(f"{path}: line {idx + 1}: expected an array block")
        _, name, rows, cols = parts
        rows, cols = int(rows), int(cols)
        try:
            data = [[float(c) for c in lines[idx + 1 + r].split(",")]
                    for r in range(rows)]
        except (ValueError, IndexError) as exc:
            raise DataFormatError(
                f"{path}: array {name!r} starting line {idx + 1}: {exc}") from exc
        arr = np.asarray(data, dtype=np.float64).reshape(rows, cols)
        arrays[name] = arr[0] if name in shapes_1d else arr
        idx += 1 + rows

    try:
        running_mean = arrays.pop("running_mean")
        running_var = arrays.pop("running_var")
    except KeyError as exc:
        raise DataFormatError(f"{path}: missing buffer {exc}") from exc
    return MlpModel(dims, num_classes, use_bn, arrays,
                    running_mean, running_var, bn_momentum, bn_eps)
