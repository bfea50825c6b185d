"""Hybrid GAN: quantum generator, classical discriminator, alternating training.

The generator is the RY/CZ circuit from :mod:`qbde.qsim`; a generated
sample is its exact output probability vector (the circuit has a fixed
input state, so the generator is a distribution, not a per-noise map).
The discriminator is a small fully connected network with leaky-rectifier
hidden layers and a sigmoid output.

Losses, with batch size m and the sigmoid output clamped to
[1e-7, 1 - 1e-7] before logs:

* generator:      L_G = -(1/m) sum_l log D(g_l)          (non-saturating)
* discriminator:  L_D = -(1/m) sum_l [log D(x_l) + log(1 - D(g_l))]

Generator gradients chain the discriminator's input gradient through the
parameter-shift jacobian of the circuit probabilities, so the whole loop
is exact and framework free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .optim import Adam
from .qsim import GeneratorParams, prob_jacobian, probabilities, run_generator_circuit

SIGMOID_CLAMP = 1e-7
CROSS_ENTROPY_CLAMP = 1e-12


# --------------------------------------------------------------------------
# Discriminator
# --------------------------------------------------------------------------

@dataclass
class DiscriminatorNet:
    """Fully connected net: in -> hidden layers (leaky ReLU) -> 1 (sigmoid).

    ``weights[i]`` has shape (out_i, in_i); ``biases[i]`` has shape (out_i,).
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    leak: float = 0.01

    def __post_init__(self):
        sizes = self.layer_sizes
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[i + 1], sizes[i]) or b.shape != (sizes[i + 1],):
                raise ValueError("weight/bias shapes are inconsistent")
        if sizes[-1] != 1:
            raise ValueError("output layer must have a single unit")

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def n_inputs(self) -> int:
        return self.weights[0].shape[1]

    @classmethod
    def create(cls, n_inputs: int, hidden: tuple[int, ...],
               rng: np.random.Generator) -> "DiscriminatorNet":
        """He-initialised weights, zero biases, drawn from ``rng``."""
        sizes = [n_inputs, *hidden, 1]
        weights = [
            rng.normal(0.0, math.sqrt(2.0 / sizes[i]), size=(sizes[i + 1], sizes[i]))
            for i in range(len(sizes) - 1)
        ]
        biases = [np.zeros(sizes[i + 1]) for i in range(len(sizes) - 1)]
        return cls(weights, biases)

    def param_list(self) -> list[np.ndarray]:
        """Optimiser view: all weights then all biases, fixed order."""
        return [*self.weights, *self.biases]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _forward(net: DiscriminatorNet, x: np.ndarray) -> tuple[np.ndarray, dict]:
    """Batched forward pass; returns clamped outputs and a backprop cache."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != net.n_inputs:
        raise ValueError(f"expected input length {net.n_inputs}, got {x.shape[1]}")
    pre, post = [], [x]
    a = x
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        z = a @ w.T + b
        a = np.where(z > 0, z, net.leak * z)
        pre.append(z)
        post.append(a)
    z_out = (a @ net.weights[-1].T + net.biases[-1]).ravel()
    y_raw = _sigmoid(z_out)
    y = np.clip(y_raw, SIGMOID_CLAMP, 1.0 - SIGMOID_CLAMP)
    return y, {"pre": pre, "post": post, "y_raw": y_raw}


def _backward(net: DiscriminatorNet, cache: dict,
              dz_out: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray], np.ndarray]:
    """Backprop from the output pre-activation gradient ``dz_out`` (one per
    sample) to weight, bias and input gradients."""
    pre, post = cache["pre"], cache["post"]
    dz = dz_out[:, None]
    dw = [dz.T @ post[-1]]
    db = [dz.sum(axis=0)]
    da = dz @ net.weights[-1]
    for i in range(len(pre) - 1, -1, -1):
        dz = da * np.where(pre[i] > 0, 1.0, net.leak)
        dw.append(dz.T @ post[i])
        db.append(dz.sum(axis=0))
        da = dz @ net.weights[i]
    dw.reverse()
    db.reverse()
    return dw, db, da


def disc_forward(net: DiscriminatorNet, x: np.ndarray) -> float:
    """Probability the discriminator assigns to one input being real."""
    y, _ = _forward(net, np.asarray(x, dtype=float).reshape(1, -1))
    return float(y[0])


def generator_output(params: GeneratorParams) -> np.ndarray:
    """The generated sample: the circuit's exact output distribution."""
    return probabilities(run_generator_circuit(params))


def loss_g(net: DiscriminatorNet, generated: np.ndarray) -> float:
    """-(1/m) sum log D(g); small when D labels generated samples as real."""
    generated = np.atleast_2d(generated)
    if generated.shape[0] == 0:
        raise ValueError("generated batch must be non-empty")
    y, _ = _forward(net, generated)
    return float(-np.mean(np.log(y)))


def loss_d(net: DiscriminatorNet, real: np.ndarray, generated: np.ndarray) -> float:
    """-(1/m) sum [log D(x) + log(1 - D(g))] over paired batches."""
    real = np.atleast_2d(real)
    generated = np.atleast_2d(generated)
    if real.shape[0] != generated.shape[0]:
        raise ValueError("real and generated batch sizes must match")
    if real.shape[0] == 0:
        raise ValueError("batches must be non-empty")
    y_real, _ = _forward(net, real)
    y_gen, _ = _forward(net, generated)
    return float(-np.mean(np.log(y_real)) - np.mean(np.log(1.0 - y_gen)))


def disc_grads(net: DiscriminatorNet, real: np.ndarray,
               generated: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Backprop gradients of ``loss_d`` for every weight and bias.

    The clamp only guards the logs; gradients follow the plain sigmoid.
    """
    real = np.atleast_2d(real)
    generated = np.atleast_2d(generated)
    if real.shape[0] != generated.shape[0]:
        raise ValueError("real and generated batch sizes must match")
    m = real.shape[0]
    _, cache_r = _forward(net, real)
    _, cache_g = _forward(net, generated)
    # d(-log s(z))/dz = s(z) - 1;  d(-log(1 - s(z)))/dz = s(z)
    dw_r, db_r, _ = _backward(net, cache_r, (cache_r["y_raw"] - 1.0) / m)
    dw_g, db_g, _ = _backward(net, cache_g, cache_g["y_raw"] / m)
    return ([a + b for a, b in zip(dw_r, dw_g)],
            [a + b for a, b in zip(db_r, db_g)])


def gen_grads(params: GeneratorParams, net: DiscriminatorNet,
              jacobian: np.ndarray | None = None,
              probs: np.ndarray | None = None) -> np.ndarray:
    """Gradient of L_G w.r.t. every rotation angle, shape like ``params.angles``.

    Chain rule: the discriminator's input gradient of -log D(p) times the
    parameter-shift jacobian of p.  ``jacobian``/``probs`` can be passed in
    when already computed for the current parameters.
    """
    if probs is None:
        probs = generator_output(params)
    _, cache = _forward(net, probs[None, :])
    _, _, dx = _backward(net, cache, cache["y_raw"] - 1.0)
    if jacobian is None:
        jacobian = prob_jacobian(params)
    return (dx[0] @ jacobian).reshape(params.angles.shape)


def cross_entropy_to_target(generated: np.ndarray, target: np.ndarray) -> float:
    """-sum target_j log generated_j, with the generated entries clamped."""
    generated = np.asarray(generated, dtype=float)
    target = np.asarray(target, dtype=float)
    if generated.shape != target.shape:
        raise ValueError("distributions must have equal length")
    return float(-np.sum(target * np.log(np.maximum(generated, CROSS_ENTROPY_CLAMP))))


# --------------------------------------------------------------------------
# Training
# --------------------------------------------------------------------------

@dataclass
class TrainConfig:
    batch: int = 16
    epochs: int = 300
    lr_g: float = 0.05
    lr_d: float = 0.01
    depth: int = 8
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    hidden: tuple[int, ...] = (64, 32)
    entangler: str = "ring"
    init_spread: float = 0.1  # layers 1..K start uniform in [-spread, spread]

    def __post_init__(self):
        if self.batch < 1:
            raise ValueError("batch size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.lr_g <= 0 or self.lr_d <= 0:
            raise ValueError("learning rates must be > 0")
        if self.depth < 1:
            raise ValueError("circuit depth must be >= 1")


@dataclass
class TrainState:
    """Everything needed to continue training exactly where it stopped."""

    params: GeneratorParams
    net: DiscriminatorNet
    opt_g: Adam
    opt_d: Adam
    rng: np.random.Generator
    epoch: int = 0


@dataclass
class TrainTrace:
    """Per-epoch losses and the final state of a training run."""

    loss_g: list[float] = field(default_factory=list)
    loss_d: list[float] = field(default_factory=list)
    cross_entropy: list[float] = field(default_factory=list)
    state: TrainState | None = None

    @property
    def params(self) -> GeneratorParams:
        return self.state.params

    @property
    def net(self) -> DiscriminatorNet:
        return self.state.net


def init_train_state(n_qubits: int, cfg: TrainConfig) -> TrainState:
    """Fresh parameters, discriminator and optimisers from ``cfg.seed``.

    Layer 0 starts at pi/2 on every qubit (the uniform superposition, an
    uninformative prior); the trainable layers start near zero.
    """
    rng = np.random.default_rng(cfg.seed)
    angles = np.empty((cfg.depth + 1, n_qubits))
    angles[0, :] = np.pi / 2
    angles[1:, :] = rng.uniform(-cfg.init_spread, cfg.init_spread,
                                size=(cfg.depth, n_qubits))
    params = GeneratorParams(n_qubits, angles, cfg.entangler)
    net = DiscriminatorNet.create(2**n_qubits, cfg.hidden, rng)
    opt_g = Adam(cfg.lr_g, cfg.beta1, cfg.beta2, cfg.adam_eps)
    opt_d = Adam(cfg.lr_d, cfg.beta1, cfg.beta2, cfg.adam_eps)
    return TrainState(params, net, opt_g, opt_d, rng)


def _check_simplex_rows(data: np.ndarray) -> None:
    if np.min(data) < -1e-9:
        raise ValueError("training vectors must be non-negative")
    if not np.allclose(data.sum(axis=1), 1.0, atol=1e-6):
        raise ValueError("training vectors must each sum to 1")


def train(real_data: np.ndarray, cfg: TrainConfig,
          state: TrainState | None = None) -> TrainTrace:
    """Alternating adversarial training for ``cfg.epochs`` epochs.

    ``real_data`` is an (N, 2**n) array of probability vectors.  One epoch
    shuffles the data and walks it in batches of ``cfg.batch``; each batch
    takes one discriminator step, then one generator step.  Recorded
    losses are the values seen before the updates of each batch; the
    cross-entropy column compares the generator to the data mean after
    each epoch.  Passing a ``state`` resumes a previous run and is
    bit-identical to never having stopped.
    """
    data = np.atleast_2d(np.asarray(real_data, dtype=float))
    if data.size == 0:
        raise ValueError("real data must be non-empty")
    n_qubits = data.shape[1].bit_length() - 1
    if 2**n_qubits != data.shape[1]:
        raise ValueError("data width must be a power of two")
    _check_simplex_rows(data)

    if state is None:
        state = init_train_state(n_qubits, cfg)
    if state.params.n_qubits != n_qubits:
        raise ValueError("checkpointed state does not match the data width")

    target = data.mean(axis=0)
    n_rows = data.shape[0]
    iters = math.ceil(n_rows / cfg.batch)
    trace = TrainTrace(state=state)
    disc_params = state.net.param_list()

    for _ in range(cfg.epochs):
        order = state.rng.permutation(n_rows)
        lg_sum = 0.0
        ld_sum = 0.0
        for start in range(0, n_rows, cfg.batch):
            batch = data[order[start:start + cfg.batch]]
            probs = generator_output(state.params)
            fake = np.tile(probs, (batch.shape[0], 1))
            ld_sum += loss_d(state.net, batch, fake)
            lg_sum += loss_g(state.net, fake)
            dw, db = disc_grads(state.net, batch, fake)
            state.opt_d.step(disc_params, [*dw, *db])
            grad = gen_grads(state.params, state.net,
                             jacobian=prob_jacobian(state.params), probs=probs)
            state.opt_g.step([state.params.angles], [grad])
        state.epoch += 1
        trace.loss_g.append(lg_sum / iters)
        trace.loss_d.append(ld_sum / iters)
        trace.cross_entropy.append(
            cross_entropy_to_target(generator_output(state.params), target))
    return trace
