"""Fully-connected autoencoder with from-scratch backpropagation and Adam.

The encoder runs the input through dense layers whose widths step down to
the bottleneck (the first width equals the input size and is a genuine
hidden layer); the decoder mirrors the widths back up. Every layer uses a
leaky ReLU except the final decoder layer, which stays linear so
reconstructions of unit-norm profiles are not saturated.
"""

from dataclasses import dataclass, field

import numpy as np

from .adp import similarity
from .errors import DomainError, TrainingError
from .seeding import derive_seed

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class AutoencoderConfig:
    """Encoder widths (input width first, bottleneck last) and training recipe."""

    layer_widths: tuple
    leaky_slope: float = 0.01
    learning_rate: float = 0.0005
    epochs: int = 1000
    batch_size: int = 256
    rng_seed: int = 0

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        object.__setattr__(self, "layer_widths", widths)
        if len(widths) < 2:
            raise DomainError("need at least an input width and a bottleneck width")
        if any(w <= 0 for w in widths):
            raise DomainError("layer widths must be positive")
        if any(a <= b for a, b in zip(widths, widths[1:])):
            raise DomainError(f"widths must strictly decrease to the bottleneck: {widths}")
        if self.learning_rate < 0 or self.epochs < 0 or self.batch_size < 1:
            raise DomainError("invalid training recipe")

    @property
    def input_width(self) -> int:
        return self.layer_widths[0]

    @property
    def code_width(self) -> int:
        return self.layer_widths[-1]


@dataclass
class AutoencoderModel:
    """Weights/biases for encoder and decoder plus training history."""

    layer_widths: tuple
    leaky_slope: float
    encoder_weights: list
    encoder_biases: list
    decoder_weights: list
    decoder_biases: list
    history: list = field(default_factory=list)
    rng_seed: int = 0
    epochs_trained: int = 0
    provenance: tuple = ()

    @property
    def input_width(self) -> int:
        return self.layer_widths[0]

    @property
    def code_width(self) -> int:
        return self.layer_widths[-1]


def _layer_plan(widths):
    """(fan_in, fan_out) per encoder layer and per decoder layer.

    widths[0] is both the input width and the first hidden width, so the
    first encoder layer is square.
    """
    encoder = [(widths[0], widths[0])]
    encoder += [(widths[i], widths[i + 1]) for i in range(len(widths) - 1)]
    reverse = widths[::-1]
    decoder = [(reverse[i], reverse[i + 1]) for i in range(len(reverse) - 1)]
    return encoder, decoder


def initialize(config: AutoencoderConfig) -> AutoencoderModel:
    """Seeded uniform weights scaled by 1/sqrt(fan_in); zero biases."""
    rng = np.random.default_rng(config.rng_seed)
    encoder_plan, decoder_plan = _layer_plan(config.layer_widths)

    def make(plan):
        weights, biases = [], []
        for fan_in, fan_out in plan:
            scale = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-scale, scale, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return weights, biases

    enc_w, enc_b = make(encoder_plan)
    dec_w, dec_b = make(decoder_plan)
    return AutoencoderModel(
        layer_widths=config.layer_widths,
        leaky_slope=config.leaky_slope,
        encoder_weights=enc_w,
        encoder_biases=enc_b,
        decoder_weights=dec_w,
        decoder_biases=dec_b,
        rng_seed=config.rng_seed,
    )


def _leaky(z, slope):
    return np.where(z >= 0, z, slope * z)


def _leaky_grad(z, slope):
    return np.where(z >= 0, 1.0, slope)


def _as_batch(v, width, what):
    arr = np.asarray(v, dtype=float)
    squeeze = arr.ndim == 1
    batch = arr[None, :] if squeeze else arr
    if batch.ndim != 2 or batch.shape[1] != width:
        raise DomainError(f"{what} width {arr.shape[-1] if arr.ndim else '?'} != expected {width}")
    return batch, squeeze


def _forward(weights, biases, slope, X, linear_last):
    """Activations after each layer; pre-activations kept for backprop."""
    pre, post = [], []
    a = X
    last = len(weights) - 1
    for i, (W, b) in enumerate(zip(weights, biases)):
        z = a @ W.T + b
        pre.append(z)
        a = z if (linear_last and i == last) else _leaky(z, slope)
        post.append(a)
    return pre, post


def encode(model: AutoencoderModel, adp_vector: np.ndarray) -> np.ndarray:
    """Compress a unit-norm profile vector (or batch) to the bottleneck code."""
    batch, squeeze = _as_batch(adp_vector, model.input_width, "input")
    _, post = _forward(model.encoder_weights, model.encoder_biases, model.leaky_slope, batch, False)
    code = post[-1]
    return code[0] if squeeze else code


def decode(model: AutoencoderModel, code: np.ndarray) -> np.ndarray:
    """Reconstruct a profile vector (or batch) from a bottleneck code."""
    batch, squeeze = _as_batch(code, model.code_width, "code")
    _, post = _forward(model.decoder_weights, model.decoder_biases, model.leaky_slope, batch, True)
    out = post[-1]
    return out[0] if squeeze else out


def reconstruction_similarity(model: AutoencoderModel, adp_vector: np.ndarray) -> float:
    """Normalized correlation between a profile and its round-trip reconstruction.

    Anticorrelated reconstructions (possible for an untrained model) are
    reported as 0.
    """
    v = np.asarray(adp_vector, dtype=float)
    recon = decode(model, encode(model, v))
    return max(0.0, similarity(v, recon))


class Adam:
    """Adam optimizer over a flat list of parameter arrays."""

    def __init__(self, params, learning_rate, beta1=ADAM_BETA1, beta2=ADAM_BETA2, eps=ADAM_EPS):
        self.params = params
        self.lr = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads):
        self.t += 1
        for i, (p, g) in enumerate(zip(self.params, grads)):
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * g * g
            m_hat = self.m[i] / (1 - self.beta1 ** self.t)
            v_hat = self.v[i] / (1 - self.beta2 ** self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _loss_and_grads(model: AutoencoderModel, batch: np.ndarray):
    """Reconstruction MSE over the batch and gradients for every weight/bias."""
    slope = model.leaky_slope
    enc_pre, enc_post = _forward(model.encoder_weights, model.encoder_biases, slope, batch, False)
    dec_pre, dec_post = _forward(model.decoder_weights, model.decoder_biases, slope, enc_post[-1], True)
    recon = dec_post[-1]

    diff = recon - batch
    loss = float(np.mean(diff ** 2))
    delta = 2.0 * diff / diff.size  # d loss / d recon

    def backprop(weights, pre, inputs, delta, linear_last):
        grads_w = [None] * len(weights)
        grads_b = [None] * len(weights)
        last = len(weights) - 1
        for i in range(last, -1, -1):
            dz = delta if (linear_last and i == last) else delta * _leaky_grad(pre[i], slope)
            grads_w[i] = dz.T @ inputs[i]
            grads_b[i] = dz.sum(axis=0)
            delta = dz @ weights[i]
        return grads_w, grads_b, delta

    dec_inputs = [enc_post[-1]] + dec_post[:-1]
    dec_gw, dec_gb, delta = backprop(model.decoder_weights, dec_pre, dec_inputs, delta, True)
    enc_inputs = [batch] + enc_post[:-1]
    enc_gw, enc_gb, _ = backprop(model.encoder_weights, enc_pre, enc_inputs, delta, False)
    return loss, enc_gw + enc_gb + dec_gw + dec_gb


def train(config: AutoencoderConfig, dataset) -> AutoencoderModel:
    """Minibatch Adam on reconstruction MSE with seeded shuffling.

    `dataset` is an (n, input_width) array of unit-norm profile vectors.
    Records the per-epoch mean loss; raises TrainingError (with the epoch)
    if the loss stops being finite.
    """
    data = np.atleast_2d(np.asarray(dataset, dtype=float))
    if data.size == 0:
        raise DomainError("training dataset is empty")
    if data.shape[1] != config.input_width:
        raise DomainError(
            f"dataset width {data.shape[1]} != configured input width {config.input_width}"
        )
    model = initialize(config)
    params = (
        model.encoder_weights + model.encoder_biases + model.decoder_weights + model.decoder_biases
    )
    optimizer = Adam(params, config.learning_rate)
    # init and shuffling use independent streams from the one config seed
    rng = np.random.default_rng(derive_seed(config.rng_seed, "autoencoder-shuffle"))

    n = data.shape[0]
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, config.batch_size):
            batch = data[order[start:start + config.batch_size]]
            loss, grads = _loss_and_grads(model, batch)
            if not np.isfinite(loss):
                raise TrainingError(f"training diverged at epoch {epoch}")
            optimizer.step(grads)
            losses.append(loss)
        model.history.append(float(np.mean(losses)))
    model.epochs_trained = config.epochs
    return model
