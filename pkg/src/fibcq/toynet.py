"""Small dense ReLU network, synthetic regression task and SGD trainer.

Parameters live in a flat ``dict`` keyed ``l{i}.weight`` / ``l{i}.bias`` so
they can be handed to the INQ scheduler and written to containers directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, DomainError

DEFAULT_WIDTHS = (2, 16, 32, 32, 32, 16, 8, 1)

Params = dict  # name -> float64 ndarray


@dataclass
class SyntheticTask:
    """Inputs uniform in [-1, 1]^2, targets ``sin(3 x1) + x2^2``."""

    seed: int = 0
    n_train: int = 2048
    n_val: int = 1024
    x_train: np.ndarray = field(init=False, repr=False)
    y_train: np.ndarray = field(init=False, repr=False)
    x_val: np.ndarray = field(init=False, repr=False)
    y_val: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        rng = np.random.default_rng(self.seed)
        x = rng.uniform(-1.0, 1.0, size=(self.n_train + self.n_val, 2))
        y = (np.sin(3 * x[:, 0]) + x[:, 1] ** 2)[:, None]
        self.x_train, self.x_val = x[: self.n_train], x[self.n_train :]
        self.y_train, self.y_val = y[: self.n_train], y[self.n_train :]

    def baseline_loss(self) -> float:
        """Validation loss of the best constant predictor (the target variance)."""
        return float(np.var(self.y_val))


@dataclass
class ToyNetwork:
    params: Params
    activations: tuple[str, ...]

    @property
    def n_layers(self) -> int:
        return len(self.activations)

    @property
    def weight_names(self) -> list[str]:
        return [f"l{i}.weight" for i in range(self.n_layers)]

    @property
    def bias_names(self) -> list[str]:
        return [f"l{i}.bias" for i in range(self.n_layers)]

    def copy(self) -> "ToyNetwork":
        return ToyNetwork({k: v.copy() for k, v in self.params.items()}, self.activations)

    def with_params(self, params: Params) -> "ToyNetwork":
        return ToyNetwork(params, self.activations)


def init_network(widths=DEFAULT_WIDTHS, seed: int = 0) -> ToyNetwork:
    """Uniform init in [-r, r], r = 1/sqrt(fan_in); ReLU on all but the output layer."""
    if len(widths) < 2:
        raise DomainError("need at least an input and an output width")
    rng = np.random.default_rng(seed)
    params = {}
    for i, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
        r = 1.0 / np.sqrt(fan_in)
        params[f"l{i}.weight"] = rng.uniform(-r, r, size=(fan_in, fan_out))
        params[f"l{i}.bias"] = rng.uniform(-r, r, size=(fan_out,))
    acts = ("relu",) * (len(widths) - 2) + ("identity",)
    return ToyNetwork(params, acts)


def forward(net: ToyNetwork, x: np.ndarray, params: Params | None = None):
    """Return the prediction and the per-layer (input, pre-activation) cache."""
    params = net.params if params is None else params
    cache = []
    h = x
    for i, act in enumerate(net.activations):
        z = h @ params[f"l{i}.weight"] + params[f"l{i}.bias"]
        cache.append((h, z))
        h = np.maximum(z, 0.0) if act == "relu" else z
    return h, cache


def loss(net: ToyNetwork, x: np.ndarray, y: np.ndarray, params: Params | None = None) -> float:
    pred, _ = forward(net, x, params)
    return float(np.mean((pred - y) ** 2))


def gradients(net: ToyNetwork, x: np.ndarray, y: np.ndarray, params: Params | None = None):
    """Mean-squared loss and its gradient with respect to every parameter."""
    params = net.params if params is None else params
    pred, cache = forward(net, x, params)
    diff = pred - y
    value = float(np.mean(diff**2))
    grads = {}
    delta = 2.0 * diff / diff.size
    for i in reversed(range(net.n_layers)):
        h, z = cache[i]
        if net.activations[i] == "relu":
            delta = delta * (z > 0)
        grads[f"l{i}.weight"] = h.T @ delta
        grads[f"l{i}.bias"] = delta.sum(axis=0)
        if i:
            delta = delta @ params[f"l{i}.weight"].T
    return value, grads


def validation_loss(net: ToyNetwork, task: SyntheticTask, params: Params | None = None) -> float:
    return loss(net, task.x_val, task.y_val, params)


@dataclass
class TrainConfig:
    lr: float = 0.05
    momentum: float = 0.9
    batch_size: int = 64
    seed: int = 0


def train(
    net: ToyNetwork,
    task: SyntheticTask,
    steps: int,
    config: TrainConfig | None = None,
    frozen: dict | None = None,
) -> tuple[ToyNetwork, list[float]]:
    """Mini-batch SGD with heavy-ball momentum on the training split.

    ``frozen`` maps parameter names to boolean masks; masked entries get a
    zero update on every step. Returns a new network and the per-step
    training loss.
    """
    config = config or TrainConfig()
    if steps < 0:
        raise DomainError(f"steps must be non-negative, got {steps}")
    if config.lr <= 0:
        raise DomainError(f"learning rate must be positive, got {config.lr}")
    params = {k: v.copy() for k, v in net.params.items()}
    velocity = {k: np.zeros_like(v) for k, v in params.items()}
    keep = {k: ~np.asarray(m, dtype=bool) for k, m in (frozen or {}).items()}
    rng = np.random.default_rng(config.seed)
    curve = []
    n = task.x_train.shape[0]
    for _ in range(steps):
        idx = rng.integers(0, n, size=config.batch_size)
        with np.errstate(over="ignore", invalid="ignore"):  # divergence is reported below
            value, grads = gradients(net, task.x_train[idx], task.y_train[idx], params)
        if not np.isfinite(value):
            raise DivergenceError(f"training loss became {value}")
        curve.append(value)
        for k, g in grads.items():
            if k in keep:
                g = g * keep[k]
            velocity[k] = config.momentum * velocity[k] + g
            params[k] -= config.lr * velocity[k]
    return net.with_params(params), curve


def retrain_hook_for(net: ToyNetwork, task: SyntheticTask, config: TrainConfig | None = None):
    """INQ retrain hook: ``(params, frozen_masks, steps) -> params``.

    Each call restarts the optimiser from the same seed, so the hook is a pure
    function of its arguments.
    """
    config = config or TrainConfig()

    def hook(params: Params, frozen: dict, steps: int) -> Params:
        trained, _ = train(net.with_params(params), task, steps, config, frozen)
        return trained.params

    return hook


def pretrained_network(seed: int = 0, steps: int = 5000, config: TrainConfig | None = None):
    """Default network trained on the default task; deterministic for a seed."""
    task = SyntheticTask(seed)
    net = init_network(DEFAULT_WIDTHS, seed)
    config = config or TrainConfig(seed=seed)
    net, curve = train(net, task, steps, config)
    return net, task, curve
