"""Feed-forward network in plain numpy.

Batches are row-major (``[N, features]``); weights are ``[out, in]``.
Hidden layers come from greedy sparse-autoencoder pretraining, the head is a
softmax layer trained on bit targets normalised to a distribution, and the
stack is then fine-tuned end to end with minibatch SGD.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

__all__ = [
    "LayerParams",
    "NetParams",
    "TrainConfig",
    "SchemaMismatch",
    "init_layer",
    "forward",
    "ae_loss",
    "loss_and_grads",
    "train_autoencoder",
    "pretrain_stack",
    "train_softmax",
    "fine_tune",
    "random_net",
    "build_network",
    "default_hidden_dims",
    "normalize_targets",
    "evaluate",
    "evaluate_outputs",
    "chance_outputs",
    "save_checkpoint",
    "load_checkpoint",
]

ACTIVATIONS = ("sigmoid", "softmax", "linear")
RHO_CLAMP = 1e-8
CHECKPOINT_MAGIC = "dlrra-checkpoint"
CHECKPOINT_VERSION = 1


class SchemaMismatch(ValueError):
    """Network and dataset were built for different scenarios."""


@dataclass
class LayerParams:
    weights: np.ndarray
    biases: np.ndarray
    activation: str = "sigmoid"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        self.weights = np.asarray(self.weights, dtype=float)
        self.biases = np.asarray(self.biases, dtype=float)
        if self.biases.shape != (self.weights.shape[0],):
            raise ValueError("bias length must equal the number of output units")

    @property
    def shape(self) -> tuple[int, int]:
        return self.weights.shape


@dataclass
class NetParams:
    layers: list
    fingerprint: str = ""

    def __post_init__(self):
        for a, b in zip(self.layers, self.layers[1:]):
            if b.shape[1] != a.shape[0]:
                raise ValueError(f"layer widths do not chain: {a.shape} -> {b.shape}")

    @property
    def input_dim(self) -> int:
        return self.layers[0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].shape[0]


@dataclass(frozen=True)
class TrainConfig:
    """Sparse-AE and SGD settings.

    ``learning_rate`` and ``l2_lambda`` drive autoencoder pretraining;
    ``finetune_learning_rate`` and ``finetune_l2_lambda`` drive the output
    layer and end-to-end fine-tuning. ``output_loss`` selects the head:
    ``"xent"`` (softmax against the normalised bit vector) or ``"mse"``
    (independent sigmoids on raw bits).
    """

    sparsity_rho: float = 0.15
    sparsity_beta: float = 4.0
    l2_lambda: float = 0.004
    max_epochs: int = 1000
    learning_rate: float = 1.0
    batch_size: int = 64
    error_threshold: float = 1e-4
    rng_seed: int = 0
    output_loss: str = "xent"
    finetune_learning_rate: float = 5.0
    finetune_l2_lambda: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.sparsity_rho < 1.0:
            raise ValueError("sparsity_rho must be in (0, 1)")
        if self.sparsity_beta < 0 or self.l2_lambda < 0 or self.error_threshold < 0:
            raise ValueError("regularisation weights and threshold must be >= 0")
        if self.finetune_l2_lambda < 0:
            raise ValueError("finetune_l2_lambda must be >= 0")
        if self.max_epochs < 1 or self.batch_size < 1 or min(self.learning_rate, self.finetune_learning_rate) <= 0:
            raise ValueError("invalid SGD settings")
        if self.output_loss not in ("xent", "mse"):
            raise ValueError("output_loss must be 'xent' or 'mse'")

    @classmethod
    def from_file(cls, path) -> "TrainConfig":
        """Flat ``key = value`` file with field names as keys."""
        kinds = {"max_epochs": int, "batch_size": int, "rng_seed": int, "output_loss": str}
        kwargs = {}
        for raw in Path(path).read_text(encoding="utf-8").splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in cls.__dataclass_fields__:
                raise ValueError(f"unknown train config key {key!r}")
            kwargs[key] = kinds.get(key, float)(value)
        return cls(**kwargs)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _log_softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def _activate(z, activation):
    if activation == "sigmoid":
        return _sigmoid(z)
    if activation == "softmax":
        return np.exp(_log_softmax(z))
    return z


def init_layer(n_in: int, n_out: int, rng, activation: str = "sigmoid") -> LayerParams:
    limit = np.sqrt(6.0 / (n_in + n_out))
    return LayerParams(rng.uniform(-limit, limit, size=(n_out, n_in)), np.zeros(n_out), activation)


def _layers(net):
    return net.layers if isinstance(net, NetParams) else list(net)


def _forward(layers, x):
    acts, zs = [x], []
    for layer in layers:
        if acts[-1].shape[-1] != layer.shape[1]:
            raise ValueError(f"input width {acts[-1].shape[-1]} does not match layer {layer.shape}")
        z = acts[-1] @ layer.weights.T + layer.biases
        zs.append(z)
        acts.append(_activate(z, layer.activation))
    return acts, zs


def forward(net, x):
    """Return ``(output, activations)`` where activations[0] is the input.

    ``x`` may be one vector or a batch of rows.
    """
    x = np.asarray(x, dtype=float)
    acts, _ = _forward(_layers(net), np.atleast_2d(x))
    if x.ndim == 1:
        acts = [a[0] for a in acts]
    return acts[-1], acts


def _kl(rho, rho_hat):
    return rho * np.log(rho / rho_hat) + (1 - rho) * np.log((1 - rho) / (1 - rho_hat))


def loss_and_grads(net, x, t, tc: TrainConfig, *, kind: str, sparse_layer=None):
    """Objective and exact gradients for a batch.

    ``kind="mse"``: per-sample squared error summed over outputs, averaged
    over the batch. ``kind="xent"``: ``-mean(sum(t * log y))`` against a
    softmax output. Both add ``(l2/2) * sum(W**2)`` over all layers; if
    ``sparse_layer`` is an index, ``beta * sum KL(rho || mean activation)``
    of that hidden layer is added too.

    Returns ``(loss, [(dW, db), ...])``.
    """
    layers = _layers(net)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    t = np.atleast_2d(np.asarray(t, dtype=float))
    n = x.shape[0]
    acts, zs = _forward(layers, x)
    y = acts[-1]
    out = layers[-1].activation

    if kind == "mse":
        diff = y - t
        loss = float((diff**2).sum() / n)
        dz = 2.0 * diff / n
        if out == "sigmoid":
            dz = dz * y * (1 - y)
        elif out != "linear":
            raise ValueError("mse loss needs a sigmoid or linear output")
    elif kind == "xent":
        if out != "softmax":
            raise ValueError("xent loss needs a softmax output")
        loss = float(-(t * _log_softmax(zs[-1])).sum() / n)
        dz = (y * t.sum(axis=1, keepdims=True) - t) / n
    else:
        raise ValueError(f"unknown loss kind {kind!r}")

    lam = tc.l2_lambda
    loss += 0.5 * lam * sum(float((l.weights**2).sum()) for l in layers)

    sparse_grad = None
    if sparse_layer is not None and tc.sparsity_beta > 0:
        h = acts[sparse_layer + 1]
        rho = tc.sparsity_rho
        rho_hat = np.clip(h.mean(axis=0), RHO_CLAMP, 1 - RHO_CLAMP)
        loss += tc.sparsity_beta * float(_kl(rho, rho_hat).sum())
        sparse_grad = tc.sparsity_beta * (-rho / rho_hat + (1 - rho) / (1 - rho_hat)) / n

    grads = [None] * len(layers)
    for i in range(len(layers) - 1, -1, -1):
        grads[i] = (dz.T @ acts[i] + lam * layers[i].weights, dz.sum(axis=0))
        if i == 0:
            break
        da = dz @ layers[i].weights
        if sparse_grad is not None and i - 1 == sparse_layer:
            da = da + sparse_grad
        h = acts[i]
        act = layers[i - 1].activation
        if act == "sigmoid":
            dz = da * h * (1 - h)
        elif act == "linear":
            dz = da
        else:
            raise ValueError("softmax is only supported as the output layer")
    return loss, grads


def ae_loss(encoder: LayerParams, decoder: LayerParams, x, tc: TrainConfig) -> float:
    """Reconstruction error + KL sparsity on the code + L2 on both weight sets."""
    return loss_and_grads([encoder, decoder], x, x, tc, kind="mse", sparse_layer=0)[0]


def _sgd(layers, x, t, tc: TrainConfig, rng, *, kind, sparse_layer=None, x_val=None, t_val=None):
    """Minibatch SGD; returns (best layers, per-epoch training loss).

    ``history[0]`` is the loss before training. The returned parameters are
    those with the lowest validation loss (training loss when no validation
    set is given). Stops when the epoch loss changes by < error_threshold.
    """
    layers = copy.deepcopy(layers)
    n = x.shape[0]

    def objective(xx, tt):
        return loss_and_grads(layers, xx, tt, tc, kind=kind, sparse_layer=sparse_layer)[0]

    history = [objective(x, t)]
    best_score = objective(x_val, t_val) if x_val is not None else history[0]
    best = copy.deepcopy(layers)
    for _ in range(tc.max_epochs):
        order = rng.permutation(n)
        for lo in range(0, n, tc.batch_size):
            idx = order[lo:lo + tc.batch_size]
            _, grads = loss_and_grads(layers, x[idx], t[idx], tc, kind=kind, sparse_layer=sparse_layer)
            for layer, (dw, db) in zip(layers, grads):
                layer.weights -= tc.learning_rate * dw
                layer.biases -= tc.learning_rate * db
        history.append(objective(x, t))
        score = objective(x_val, t_val) if x_val is not None else history[-1]
        if score < best_score:
            best_score = score
            best = copy.deepcopy(layers)
        if abs(history[-2] - history[-1]) < tc.error_threshold:
            break
    return best, history


def _feature_range(x):
    lo = x.min(axis=0)
    span = x.max(axis=0) - lo
    return lo, np.where(span > 0, span, 1.0)


def _fold_scaling(layer: LayerParams, lo, span) -> LayerParams:
    """Encoder acting on raw inputs that equals ``layer`` on ``(x - lo) / span``."""
    w = layer.weights / span
    return LayerParams(w, layer.biases - w @ lo, layer.activation)


def train_autoencoder(x, width: int, tc: TrainConfig = TrainConfig(), *, stage: int = 0):
    """One sparse AE (sigmoid encoder and decoder) on ``x``.

    Returns ``(encoder, decoder, loss_history)``.
    """
    x = np.asarray(x, dtype=float)
    rng = np.random.default_rng([tc.rng_seed, 1, stage])
    ae = [init_layer(x.shape[1], width, rng), init_layer(width, x.shape[1], rng)]
    ae, hist = _sgd(ae, x, x, tc, rng, kind="mse", sparse_layer=0)
    return ae[0], ae[1], hist


def pretrain_stack(inputs, hidden_dims, tc: TrainConfig = TrainConfig(), *, return_history: bool = False):
    """Greedy layer-wise sparse-AE pretraining; returns the encoder layers.

    AE ``i`` is trained on the codes produced by encoders ``0..i-1``, each
    feature min-max scaled to [0, 1]; the scaling is folded into the
    returned encoder weights so encoders apply to unscaled codes.
    """
    if not hidden_dims:
        raise ValueError("hidden_dims must be non-empty")
    codes = np.asarray(inputs, dtype=float)
    encoders, histories = [], []
    for i, width in enumerate(hidden_dims):
        lo, span = _feature_range(codes)
        enc, _, hist = train_autoencoder((codes - lo) / span, width, tc, stage=i)
        enc = _fold_scaling(enc, lo, span)
        encoders.append(enc)
        histories.append(hist)
        codes, _ = forward([enc], codes)
    return (encoders, histories) if return_history else encoders


def normalize_targets(target_bits) -> np.ndarray:
    t = np.atleast_2d(np.asarray(target_bits, dtype=float))
    total = t.sum(axis=1, keepdims=True)
    if np.any(total == 0):
        raise ValueError("all-zero target row cannot be normalised")
    return t / total


def _finetune_config(tc: TrainConfig) -> TrainConfig:
    return replace(tc, learning_rate=tc.finetune_learning_rate, l2_lambda=tc.finetune_l2_lambda)


def _head_targets(target_bits, tc):
    return normalize_targets(target_bits) if tc.output_loss == "xent" else np.asarray(target_bits, dtype=float)


def train_softmax(codes, target_bits, tc: TrainConfig = TrainConfig()) -> LayerParams:
    """Output layer trained on the last hidden codes.

    Softmax + cross-entropy against bits normalised to sum to one, or a
    sigmoid layer with MSE when ``tc.output_loss == "mse"``.
    """
    codes = np.asarray(codes, dtype=float)
    t = _head_targets(target_bits, tc)
    rng = np.random.default_rng([tc.rng_seed, 2])
    act = "softmax" if tc.output_loss == "xent" else "sigmoid"
    head = [init_layer(codes.shape[1], t.shape[1], rng, act)]
    head, _ = _sgd(head, codes, t, _finetune_config(tc), rng, kind=tc.output_loss)
    return head[0]


def fine_tune(net: NetParams, inputs, target_bits, tc: TrainConfig = TrainConfig(), *,
              val_inputs=None, val_bits=None, return_history: bool = False):
    """End-to-end SGD on the output loss; returns the best-scoring parameters."""
    x = np.asarray(inputs, dtype=float)
    t = _head_targets(target_bits, tc)
    xv = tv = None
    if val_inputs is not None:
        xv, tv = np.asarray(val_inputs, dtype=float), _head_targets(val_bits, tc)
    rng = np.random.default_rng([tc.rng_seed, 3])
    layers, history = _sgd(net.layers, x, t, _finetune_config(tc), rng, kind=tc.output_loss, x_val=xv, t_val=tv)
    tuned = NetParams(layers, net.fingerprint)
    return (tuned, history) if return_history else tuned


def random_net(input_dim: int, hidden_dims, output_dim: int, tc: TrainConfig = TrainConfig(), fingerprint: str = "") -> NetParams:
    """Glorot-initialised network with the same shape as a pretrained one."""
    rng = np.random.default_rng([tc.rng_seed, 4])
    dims = [input_dim, *hidden_dims]
    layers = [init_layer(a, b, rng) for a, b in zip(dims, dims[1:])]
    layers.append(init_layer(dims[-1], output_dim, rng, "softmax" if tc.output_loss == "xent" else "sigmoid"))
    return NetParams(layers, fingerprint)


def build_network(inputs, target_bits, hidden_dims, tc: TrainConfig = TrainConfig(), *, fingerprint: str = "",
                  val_inputs=None, val_bits=None, return_history: bool = False):
    """Pretrain encoders, train the head on their codes, then fine-tune."""
    encoders = pretrain_stack(inputs, hidden_dims, tc)
    codes, _ = forward(encoders, inputs)
    head = train_softmax(codes, target_bits, tc)
    stacked = NetParams([*encoders, head], fingerprint)
    return fine_tune(stacked, inputs, target_bits, tc, val_inputs=val_inputs, val_bits=val_bits,
                     return_history=return_history)


def default_hidden_dims(input_dim: int, n_layers: int, bottleneck: int = 64) -> list[int]:
    """Geometric interpolation from the input width to ``bottleneck``."""
    ratio = bottleneck / input_dim
    return [max(1, int(round(input_dim * ratio ** ((i + 1) / n_layers)))) for i in range(n_layers)]


def _field_bits(outputs, n_bits: int, rule: str = "complement"):
    """Decoded value bits ``[N, fields, n]`` plus an ambiguity mask."""
    x = np.asarray(outputs, dtype=float)
    x = x.reshape(x.shape[0], -1, 2, n_bits)
    if rule == "complement":
        return (x[:, :, 0] > x[:, :, 1]).astype(np.int8)
    return (x[:, :, 0] > 0.5).astype(np.int8)


def evaluate_outputs(outputs, target_bits, n_bits: int, *, rule: str = "complement") -> dict:
    """Field accuracy, exact-match rate and bit accuracy of raw network outputs.

    Fields are compared on their decoded bits, so an out-of-range decoded
    index never counts as correct.
    """
    pred = _field_bits(outputs, n_bits, rule)
    true = _field_bits(target_bits, n_bits, "complement")
    bit_ok = pred == true
    field_ok = bit_ok.all(axis=-1)
    return {
        "field_accuracy": float(field_ok.mean()),
        "exact_match": float(field_ok.all(axis=1).mean()),
        "bit_accuracy": float(bit_ok.mean()),
    }


def evaluate(net: NetParams, ds, *, rule: str = "complement") -> dict:
    """Metrics of ``net`` on a :class:`~dlrra.dataset.Dataset`."""
    if net.fingerprint and net.fingerprint != ds.scenario_fingerprint:
        raise SchemaMismatch(f"network fingerprint {net.fingerprint} != dataset {ds.scenario_fingerprint}")
    x = ds.inputs
    if x.shape[1] != net.input_dim or ds.targets.shape[1] != net.output_dim:
        raise SchemaMismatch("network dimensions do not match the dataset")
    out, _ = forward(net, x)
    return evaluate_outputs(out, ds.targets, ds.bits_per_field, rule=rule)


def chance_outputs(ds) -> np.ndarray:
    """Outputs of a predictor that emits the same activation everywhere."""
    return np.full(ds.targets.shape, 1.0 / ds.targets.shape[1])


def _fmt(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def save_checkpoint(net: NetParams, path) -> None:
    """Write a versioned plain-text checkpoint.

    Layout::

        dlrra-checkpoint 1
        input_dim <int>
        output_dim <int>
        fingerprint <hex or ->
        layers <count>
        layer <rows> <cols> <activation>     # repeated per layer, followed by
        <rows lines of cols floats>          # weights, row-major
        <one line of rows floats>            # biases

    Floats are written with ``repr`` and round-trip exactly.
    """
    lines = [
        f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}",
        f"input_dim {net.input_dim}",
        f"output_dim {net.output_dim}",
        f"fingerprint {net.fingerprint or '-'}",
        f"layers {len(net.layers)}",
    ]
    for layer in net.layers:
        rows, cols = layer.shape
        lines.append(f"layer {rows} {cols} {layer.activation}")
        lines.extend(_fmt(row) for row in layer.weights)
        lines.append(_fmt(layer.biases))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_checkpoint(path) -> NetParams:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    magic, version = lines[0].split()
    if magic != CHECKPOINT_MAGIC or int(version) != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: not a version {CHECKPOINT_VERSION} checkpoint")
    header = dict(l.split(" ", 1) for l in lines[1:5])
    fingerprint = "" if header["fingerprint"] == "-" else header["fingerprint"]
    pos, layers = 5, []
    for _ in range(int(header["layers"])):
        _, rows, cols, act = lines[pos].split()
        rows, cols = int(rows), int(cols)
        w = np.array([[float(v) for v in lines[pos + 1 + r].split()] for r in range(rows)]).reshape(rows, cols)
        b = np.array([float(v) for v in lines[pos + 1 + rows].split()])
        layers.append(LayerParams(w, b, act))
        pos += rows + 2
    net = NetParams(layers, fingerprint)
    if net.input_dim != int(header["input_dim"]) or net.output_dim != int(header["output_dim"]):
        raise ValueError(f"{path}: layer shapes disagree with header")
    return net
