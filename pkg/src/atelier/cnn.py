"""A small, self-contained convolutional network over numpy.

The architecture is a stack of valid-padding conv+ReLU stages, each
optionally followed by 2x2 max pooling, then one hidden dense layer and
a single sigmoid output unit. Forward passes run as im2col + GEMM;
gradients are exact (hand-derived, verified against finite differences
in the test suite). Training is plain SGD with momentum, selecting the
epoch with the best validation accuracy.

Model files use a custom little-endian container (magic ``ATRM``) with
a JSON header, raw float64 tensors, and a trailing CRC-32.
"""

from __future__ import annotations

import dataclasses
import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ModelFormatError, TrainingError

MODEL_MAGIC = b"ATRM"
MODEL_VERSION = 1

# Inference always chunks work into batches of this size so that results
# are bit-identical regardless of how many tiles arrive at once.
INFERENCE_BATCH = 32


@dataclass(frozen=True)
class CnnConfig:
    """Hyperparameters that fully determine a network and its training run.

    conv_layers is a tuple of (filters, kernel, pool) triples applied in
    order; pool is a bool selecting a 2x2 max pool after the ReLU.
    """

    input_size: int
    input_channels: int
    conv_layers: tuple[tuple[int, int, bool], ...]
    dense_units: int
    seed: int = 42
    learning_rate: float = 0.01
    momentum: float = 0.9
    epochs: int = 10
    batch_size: int = 32

    def __post_init__(self):
        if self.input_size < 1:
            raise ValueError(f"input_size must be >= 1, got {self.input_size}")
        if self.input_channels not in (1, 3):
            raise ValueError(f"input_channels must be 1 or 3, got {self.input_channels}")
        if not self.conv_layers:
            raise ValueError("at least one conv stage is required")
        if self.dense_units < 1:
            raise ValueError(f"dense_units must be >= 1, got {self.dense_units}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        side = self.input_size
        for i, (filters, kernel, pool) in enumerate(self.conv_layers):
            if filters < 1 or kernel < 1:
                raise ValueError(f"conv stage {i}: filters and kernel must be >= 1")
            if side < kernel:
                raise ValueError(
                    f"conv stage {i}: spatial extent {side} is smaller than "
                    f"kernel {kernel}"
                )
            side = side - kernel + 1
            if pool:
                if side < 2:
                    raise ValueError(
                        f"conv stage {i}: extent {side} too small for 2x2 pooling"
                    )
                side //= 2

    def stage_sides(self) -> list[int]:
        """Spatial extent after each conv stage (post-pool where pooled)."""
        side = self.input_size
        out = []
        for _, kernel, pool in self.conv_layers:
            side = side - kernel + 1
            if pool:
                side //= 2
            out.append(side)
        return out

    def flat_features(self) -> int:
        """Length of the flattened vector entering the dense layers."""
        return self.stage_sides()[-1] ** 2 * self.conv_layers[-1][0]


@dataclass
class CnnModel:
    """A config plus its weights.

    weights holds one {"w", "b"} dict per layer: each conv stage (w is
    (k, k, c_in, filters)), then the hidden dense layer, then the
    1-unit output layer. trained_epochs is the 1-based index of the
    epoch the weights were taken from (0 for an untrained model).
    """

    config: CnnConfig
    weights: list[dict[str, np.ndarray]]
    version: int = MODEL_VERSION
    trained_epochs: int = 0


def init_model(config: CnnConfig) -> CnnModel:
    """He-initialized weights, zero biases, from the config's seed."""
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0]))
    weights = []
    c_in = config.input_channels
    for filters, kernel, _ in config.conv_layers:
        fan_in = kernel * kernel * c_in
        weights.append({
            "w": rng.normal(0.0, np.sqrt(2.0 / fan_in), (kernel, kernel, c_in, filters)),
            "b": np.zeros(filters),
        })
        c_in = filters
    flat = config.flat_features()
    weights.append({
        "w": rng.normal(0.0, np.sqrt(2.0 / flat), (flat, config.dense_units)),
        "b": np.zeros(config.dense_units),
    })
    weights.append({
        "w": rng.normal(0.0, np.sqrt(2.0 / config.dense_units), (config.dense_units, 1)),
        "b": np.zeros(1),
    })
    return CnnModel(config=config, weights=weights)


def parameter_count(model: CnnModel) -> int:
    return sum(layer["w"].size + layer["b"].size for layer in model.weights)


def _im2col(x: np.ndarray, kernel: int) -> tuple[np.ndarray, int, int]:
    """Unfold (n, s, s, c) into (n*oh*ow, k*k*c) patch rows."""
    win = np.lib.stride_tricks.sliding_window_view(x, (kernel, kernel), axis=(1, 2))
    # window axes arrive last: (n, oh, ow, c, k, k) -> (n, oh, ow, k, k, c)
    win = win.transpose(0, 1, 2, 4, 5, 3)
    n, oh, ow = win.shape[:3]
    return win.reshape(n * oh * ow, -1), oh, ow


def _pool_forward(a: np.ndarray) -> tuple[np.ndarray, np.ndarray, tuple]:
    """2x2 max pool with stride 2; odd trailing rows/columns are dropped.

    Returns (pooled, argmax indices, cropped shape); ties resolve to the
    first element in row-major window order.
    """
    n, oh, ow, f = a.shape
    ph, pw = oh // 2, ow // 2
    crop = a[:, :2 * ph, :2 * pw, :]
    win = crop.reshape(n, ph, 2, pw, 2, f).transpose(0, 1, 3, 2, 4, 5)
    flat = win.reshape(n, ph, pw, 4, f)
    idx = np.argmax(flat, axis=3)
    pooled = np.take_along_axis(flat, idx[:, :, :, np.newaxis, :], axis=3)[:, :, :, 0, :]
    return pooled, idx, crop.shape


def _pool_backward(
    dpool: np.ndarray, idx: np.ndarray, crop_shape: tuple, a_shape: tuple
) -> np.ndarray:
    """Route pooled gradients back to the winning pre-pool positions."""
    n, ph, pw, f = dpool.shape
    d4 = np.zeros((n, ph, pw, 4, f))
    np.put_along_axis(d4, idx[:, :, :, np.newaxis, :], dpool[:, :, :, np.newaxis, :], axis=3)
    dcrop = d4.reshape(n, ph, pw, 2, 2, f).transpose(0, 1, 3, 2, 4, 5).reshape(crop_shape)
    if crop_shape == a_shape:
        return dcrop
    da = np.zeros(a_shape)
    da[:, :crop_shape[1], :crop_shape[2], :] = dcrop
    return da


def _forward(model: CnnModel, x: np.ndarray) -> tuple[np.ndarray, list[dict]]:
    """Run the network on (n, s, s, c) inputs in [0, 1].

    Returns pre-sigmoid scores (n,) and a per-layer cache for backprop.
    """
    cfg = model.config
    if x.ndim != 4 or x.shape[1:] != (cfg.input_size, cfg.input_size, cfg.input_channels):
        raise ValueError(
            f"expected (n, {cfg.input_size}, {cfg.input_size}, {cfg.input_channels}) "
            f"input, got {x.shape}"
        )
    caches = []
    out = x
    for stage, (filters, kernel, pool) in enumerate(cfg.conv_layers):
        layer = model.weights[stage]
        cols, oh, ow = _im2col(out, kernel)
        z = (cols @ layer["w"].reshape(-1, filters) + layer["b"]).reshape(
            out.shape[0], oh, ow, filters
        )
        a = np.maximum(z, 0.0)
        cache = {"x_shape": out.shape, "cols": cols, "z": z, "a": a}
        if pool:
            out, idx, crop_shape = _pool_forward(a)
            cache["idx"] = idx
            cache["crop_shape"] = crop_shape
        else:
            out = a
        caches.append(cache)
    n = out.shape[0]
    flat = out.reshape(n, -1)
    w1, b1 = model.weights[-2]["w"], model.weights[-2]["b"]
    w2, b2 = model.weights[-1]["w"], model.weights[-1]["b"]
    z1 = flat @ w1 + b1
    h = np.maximum(z1, 0.0)
    score = (h @ w2 + b2)[:, 0]
    caches.append({"flat": flat, "z1": z1, "h": h, "pooled_shape": out.shape})
    return score, caches


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward_batch(model: CnnModel, x: np.ndarray) -> np.ndarray:
    """Probabilities for a batch of tiles, shape (n,)."""
    score, _ = _forward(model, x)
    return _sigmoid(score)


def forward(model: CnnModel, tile: np.ndarray) -> float:
    """Probability for a single (s, s, c) tile."""
    return float(forward_batch(model, tile[np.newaxis])[0])


def predict_batched(model: CnnModel, x: np.ndarray) -> np.ndarray:
    """Probabilities computed in fixed-size chunks.

    Chunking by INFERENCE_BATCH keeps the arithmetic (and therefore the
    bits of the result) independent of how many tiles the caller
    submits at once.
    """
    if x.shape[0] == 0:
        return np.empty(0)
    parts = [
        forward_batch(model, x[i:i + INFERENCE_BATCH])
        for i in range(0, x.shape[0], INFERENCE_BATCH)
    ]
    return np.concatenate(parts)


def loss_and_gradients(
    model: CnnModel, x: np.ndarray, y: np.ndarray
) -> tuple[float, list[dict[str, np.ndarray]]]:
    """Mean binary cross-entropy and its gradient for every parameter.

    Loss is computed from pre-sigmoid scores via softplus so extreme
    scores cannot overflow: y*softplus(-z) + (1-y)*softplus(z).
    """
    y = np.asarray(y)
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    y = y.astype(np.float64)
    n = x.shape[0]
    score, caches = _forward(model, x)
    loss = float(np.mean(y * np.logaddexp(0.0, -score) + (1.0 - y) * np.logaddexp(0.0, score)))

    cfg = model.config
    grads = [
        {"w": np.zeros_like(layer["w"]), "b": np.zeros_like(layer["b"])}
        for layer in model.weights
    ]
    head = caches[-1]
    dscore = (_sigmoid(score) - y) / n  # (n,)
    w1, w2 = model.weights[-2]["w"], model.weights[-1]["w"]
    grads[-1]["w"][:] = head["h"].T @ dscore[:, np.newaxis]
    grads[-1]["b"][:] = dscore.sum(keepdims=True)
    dh = dscore[:, np.newaxis] @ w2.T
    dz1 = dh * (head["z1"] > 0)
    grads[-2]["w"][:] = head["flat"].T @ dz1
    grads[-2]["b"][:] = dz1.sum(axis=0)
    dout = (dz1 @ w1.T).reshape(head["pooled_shape"])

    for stage in range(len(cfg.conv_layers) - 1, -1, -1):
        filters, kernel, pool = cfg.conv_layers[stage]
        cache = caches[stage]
        if pool:
            da = _pool_backward(dout, cache["idx"], cache["crop_shape"], cache["a"].shape)
        else:
            da = dout
        dz = da * (cache["z"] > 0)
        dz_flat = dz.reshape(-1, filters)
        grads[stage]["w"][:] = (cache["cols"].T @ dz_flat).reshape(
            model.weights[stage]["w"].shape
        )
        grads[stage]["b"][:] = dz_flat.sum(axis=0)
        if stage > 0:
            dcols = dz_flat @ model.weights[stage]["w"].reshape(-1, filters).T
            n_, oh, ow, _ = dz.shape
            dcols = dcols.reshape(n_, oh, ow, kernel, kernel, cache["x_shape"][3])
            dout = np.zeros(cache["x_shape"])
            for ki in range(kernel):
                for kj in range(kernel):
                    dout[:, ki:ki + oh, kj:kj + ow, :] += dcols[:, :, :, ki, kj, :]
    return loss, grads


def train(
    model: CnnModel,
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray,
    y_val: np.ndarray,
) -> tuple[CnnModel, list[tuple[int, float, float]]]:
    """SGD with momentum; returns the best-validation-epoch weights.

    The returned history holds one (epoch, train_loss, val_accuracy)
    row per epoch, 1-based. The winning epoch is the one with the
    highest validation accuracy (earliest on ties) and is recorded in
    the returned model's trained_epochs. With epochs=0 the
    initialization is returned untouched and the history is empty.
    """
    cfg = model.config
    if x_train.shape[0] == 0:
        raise TrainingError("empty training set")
    if x_val.shape[0] == 0:
        raise TrainingError("empty validation set")
    weights = [{k: v.copy() for k, v in layer.items()} for layer in model.weights]
    work = CnnModel(config=cfg, weights=weights, trained_epochs=0)
    if cfg.epochs == 0:
        return work, []

    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
    velocity = [
        {"w": np.zeros_like(layer["w"]), "b": np.zeros_like(layer["b"])}
        for layer in weights
    ]
    n = x_train.shape[0]
    history: list[tuple[int, float, float]] = []
    best_acc, best_epoch, best_weights = -1.0, 0, None
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            loss, grads = loss_and_gradients(work, x_train[batch], y_train[batch])
            if not np.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, batch {start // cfg.batch_size}"
                )
            total += loss * len(batch)
            for layer, vel, grad in zip(weights, velocity, grads):
                for key in ("w", "b"):
                    vel[key] *= cfg.momentum
                    vel[key] -= cfg.learning_rate * grad[key]
                    layer[key] += vel[key]
        train_loss = total / n
        probs = predict_batched(work, x_val)
        val_acc = float(np.mean((probs >= 0.5).astype(np.int64) == y_val))
        history.append((epoch, train_loss, val_acc))
        if val_acc > best_acc:
            best_acc = val_acc
            best_epoch = epoch
            best_weights = [{k: v.copy() for k, v in layer.items()} for layer in weights]
    return CnnModel(config=cfg, weights=best_weights, trained_epochs=best_epoch), history


# --- Grad-CAM ---------------------------------------------------------------


def _bilinear_resize(src: np.ndarray, out_size: int) -> np.ndarray:
    """Upsample a 2-D map with half-pixel-center sample alignment."""
    s = src.shape[0]
    if s == out_size:
        return src.copy()
    coords = (np.arange(out_size) + 0.5) * s / out_size - 0.5
    coords = np.clip(coords, 0.0, s - 1.0)
    lo = np.floor(coords).astype(np.int64)
    hi = np.minimum(lo + 1, s - 1)
    frac = coords - lo
    rows = src[lo][:, hi] * frac[np.newaxis, :] + src[lo][:, lo] * (1 - frac[np.newaxis, :])
    rows_hi = src[hi][:, hi] * frac[np.newaxis, :] + src[hi][:, lo] * (1 - frac[np.newaxis, :])
    return rows * (1 - frac[:, np.newaxis]) + rows_hi * frac[:, np.newaxis]


def gradcam(model: CnnModel, tile: np.ndarray) -> np.ndarray:
    """Class-activation map for one tile, resized to the tile's extent.

    Gradients of the pre-sigmoid score are taken with respect to the
    last conv stage's post-ReLU (pre-pool) activations; channel weights
    are the spatial means of those gradients; the weighted channel sum
    is clipped at zero, bilinearly upsampled, and scaled so its peak is
    1 (a map with no positive response stays all zeros).
    """
    cfg = model.config
    if tile.shape != (cfg.input_size, cfg.input_size, cfg.input_channels):
        raise ValueError(
            f"expected ({cfg.input_size}, {cfg.input_size}, {cfg.input_channels}) "
            f"tile, got {tile.shape}"
        )
    _, caches = _forward(model, tile[np.newaxis])
    head = caches[-1]
    last = caches[len(cfg.conv_layers) - 1]
    w1, w2 = model.weights[-2]["w"], model.weights[-1]["w"]
    dh = w2.T  # d(score)/d(h), shape (1, dense_units)
    dz1 = dh * (head["z1"] > 0)
    dout = (dz1 @ w1.T).reshape(head["pooled_shape"])
    if cfg.conv_layers[-1][2]:
        da = _pool_backward(dout, last["idx"], last["crop_shape"], last["a"].shape)
    else:
        da = dout
    activations = last["a"][0]  # (oh, ow, f)
    channel_w = da[0].mean(axis=(0, 1))  # (f,)
    cam = np.maximum((activations * channel_w).sum(axis=2), 0.0)
    cam = _bilinear_resize(cam, cfg.input_size)
    peak = cam.max()
    if peak > 0:
        cam /= peak
    return cam


# --- Serialization ----------------------------------------------------------


def _config_to_header(config: CnnConfig, trained_epochs: int) -> bytes:
    doc = {
        "config": {
            "input_size": config.input_size,
            "input_channels": config.input_channels,
            "conv_layers": [list(stage) for stage in config.conv_layers],
            "dense_units": config.dense_units,
            "seed": config.seed,
            "learning_rate": config.learning_rate,
            "momentum": config.momentum,
            "epochs": config.epochs,
            "batch_size": config.batch_size,
        },
        "trained_epochs": trained_epochs,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("ascii")


def save_model(model: CnnModel, path) -> None:
    """Serialize to the ATRM container (JSON header + float64 tensors + CRC)."""
    header = _config_to_header(model.config, model.trained_epochs)
    parts = [MODEL_MAGIC, struct.pack("<II", MODEL_VERSION, len(header)), header]
    for layer in model.weights:
        for key in ("w", "b"):
            parts.append(np.ascontiguousarray(layer[key], dtype="<f8").tobytes())
    body = b"".join(parts)
    Path(path).write_bytes(body + struct.pack("<I", zlib.crc32(body)))


def load_model(path) -> CnnModel:
    """Read an ATRM file, verifying magic, version, sizes, and checksum."""
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:4] != MODEL_MAGIC:
        raise ModelFormatError(f"{path}: not a model file (bad magic)")
    stored_crc = struct.unpack("<I", data[-4:])[0]
    if zlib.crc32(data[:-4]) != stored_crc:
        raise ModelFormatError(f"{path}: checksum mismatch (file corrupt or truncated)")
    version, header_len = struct.unpack("<II", data[4:12])
    if version > MODEL_VERSION:
        raise ModelFormatError(
            f"{path}: file version {version} is newer than supported "
            f"version {MODEL_VERSION}"
        )
    try:
        doc = json.loads(data[12:12 + header_len].decode("ascii"))
        cfg_doc = dict(doc["config"])
        cfg_doc["conv_layers"] = tuple(tuple(stage) for stage in cfg_doc["conv_layers"])
        config = CnnConfig(**cfg_doc)
        trained_epochs = int(doc["trained_epochs"])
    except (KeyError, TypeError, ValueError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"{path}: bad header: {exc}") from exc
    model = init_model(config)
    offset = 12 + header_len
    payload = data[:-4]
    for layer in model.weights:
        for key in ("w", "b"):
            nbytes = layer[key].size * 8
            chunk = payload[offset:offset + nbytes]
            if len(chunk) != nbytes:
                raise ModelFormatError(f"{path}: truncated tensor data")
            layer[key] = np.frombuffer(chunk, dtype="<f8").reshape(layer[key].shape).copy()
            offset += nbytes
    if offset != len(payload):
        raise ModelFormatError(f"{path}: {len(payload) - offset} unexpected trailing bytes")
    model.trained_epochs = trained_epochs
    return model
