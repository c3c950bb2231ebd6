"""Losses, gradients, optimizers and the mini-batch training loop.

Labels are {0, 1} everywhere.  The squared-error loss maps them to
eigenvalues {+1, -1} via y~ = 1 - 2y before comparing against the
readout <Z>; the cross-entropy loss uses the readout probabilities
directly and is the negated mean log-likelihood, so both losses are
minimized.

Gradients: the parameter-shift path differentiates the per-sample
readout <Z> exactly (two-term rule for plain rotations, four-term rule
for controlled rotations, two-term rule at +-pi/4 for XX/YY/ZZ
exponentials) and chains through the analytic loss derivative.  The
finite-difference path is a central difference of the whole batch loss
and doubles as the always-available oracle.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import ansatz as anz
from .encoding import encode_batch
from .model import (
    ModelSpec,
    count_params,
    forward_batch,
    model_hash,
    placements,
    plan_wiring,
)
from .simulator import _apply_2q_kernel, _readout_kernel

LOSSES = ("mse", "xent")
OPTIMIZERS = ("nesterov", "adam")
GRADIENT_METHODS = ("parameter_shift", "finite_difference")

_PROB_EPS = 1e-10
_FD_STEP = 1e-6

# shift-rule tables: list of (shift, coefficient) pairs per rule kind
_D_PLUS = (np.sqrt(2) + 1) / (4 * np.sqrt(2))
_D_MINUS = (np.sqrt(2) - 1) / (4 * np.sqrt(2))
SHIFT_TABLES = {
    anz.SHIFT_ROT: ((np.pi / 2, 0.5), (-np.pi / 2, -0.5)),
    anz.SHIFT_PEXP: ((np.pi / 4, 1.0), (-np.pi / 4, -1.0)),
    anz.SHIFT_CTRL: (
        (np.pi / 2, _D_PLUS),
        (-np.pi / 2, -_D_PLUS),
        (3 * np.pi / 2, -_D_MINUS),
        (-3 * np.pi / 2, _D_MINUS),
    ),
}


class TrainingFailure(RuntimeError):
    """Training aborted (non-finite loss or failed convergence contract)."""


@dataclass(frozen=True)
class TrainConfig:
    loss: str = "xent"
    optimizer: str = "nesterov"
    learning_rate: float = 0.01
    batch_size: int = 25
    iterations: int = 200
    seeds: tuple = (0, 1, 2, 3, 4)
    gradient_method: str = "parameter_shift"
    momentum: float = 0.9
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    # near-identity random start; wide inits strand the small ansatz in
    # flat regions of the landscape (see decisions ledger)
    init_low: float = -0.1
    init_high: float = 0.1

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if self.gradient_method not in GRADIENT_METHODS:
            raise ValueError(f"gradient_method must be one of {GRADIENT_METHODS}")

    def to_dict(self) -> dict:
        return {
            "loss": self.loss,
            "optimizer": self.optimizer,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "iterations": self.iterations,
            "seeds": list(self.seeds),
            "gradient_method": self.gradient_method,
            "momentum": self.momentum,
        }


@dataclass
class TrainRun:
    config: dict
    model: dict
    model_hash: str
    seed: int
    loss_trace: list
    wall_time_s: float
    final_params: list
    test_accuracy: float | None
    n_params: int
    tag: str = "qcnn"

    def to_dict(self) -> dict:
        return {
            "tag": self.tag,
            "model_hash": self.model_hash,
            "seed": self.seed,
            "config": self.config,
            "model": self.model,
            "n_params": self.n_params,
            "loss_trace": self.loss_trace,
            "wall_time_s": self.wall_time_s,
            "final_params": self.final_params,
            "test_accuracy": self.test_accuracy,
        }


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------


def loss_mse(z_expectations, labels01) -> float:
    z = np.asarray(z_expectations, dtype=float)
    y = np.asarray(labels01, dtype=float)
    if z.size == 0:
        raise ValueError("empty batch")
    y_signed = 1.0 - 2.0 * y
    return float(np.mean((z - y_signed) ** 2))


def loss_xent(p1s, labels01) -> float:
    p1 = np.clip(np.asarray(p1s, dtype=float), _PROB_EPS, 1 - _PROB_EPS)
    y = np.asarray(labels01, dtype=float)
    if p1.size == 0:
        raise ValueError("empty batch")
    return float(-np.mean(y * np.log(p1) + (1 - y) * np.log(1 - p1)))


def _loss_from_z(z, labels01, loss: str) -> float:
    if loss == "mse":
        return loss_mse(z, labels01)
    return loss_xent((1.0 - np.asarray(z)) / 2.0, labels01)


def _dloss_dz(z, labels01, loss: str) -> np.ndarray:
    """Per-sample derivative of the batch loss w.r.t. each readout <Z>."""
    z = np.asarray(z, dtype=float)
    y = np.asarray(labels01, dtype=float)
    n = z.size
    if loss == "mse":
        return 2.0 * (z - (1.0 - 2.0 * y)) / n
    p1 = np.clip((1.0 - z) / 2.0, _PROB_EPS, 1 - _PROB_EPS)
    p0 = 1.0 - p1
    return (y / (2.0 * p1) - (1.0 - y) / (2.0 * p0)) / n


def batch_loss(spec: ModelSpec, params, features, labels01, loss: str) -> float:
    _, _, z = forward_batch(spec, params, features)
    return _loss_from_z(z, labels01, loss)


# ---------------------------------------------------------------------------
# Gradients
# ---------------------------------------------------------------------------


def gradient_parameter_shift(spec, params, features, labels01, loss: str):
    """Exact gradient of the batch loss via per-occurrence shifts.

    A shared slot appears in several gate applications; the shift rule
    applies to each occurrence separately and the contributions add up
    (product rule).  States before every block are cached so a shifted
    evaluation only replays the circuit suffix.
    """
    params = np.asarray(params, dtype=float)
    places = placements(spec)
    n = spec.n_qubits
    readout_q = plan_wiring(spec).readout
    mats = [anz.bind_raw(p.template, params[list(p.slots)]) for p in places]

    prefixes = [encode_batch(spec.encoding, features)]
    for p, mat in zip(places, mats):
        prefixes.append(
            _apply_2q_kernel(prefixes[-1], mat, p.pair[0], p.pair[1], n)
        )

    p0, p1 = _readout_kernel(prefixes[-1], readout_q, n)
    dz = _dloss_dz(p0 - p1, labels01, loss)

    grad = np.zeros_like(params)
    for i, p in enumerate(places):
        local = params[list(p.slots)]
        rules = p.template.slot_rules()
        variants = []  # (global slot, coefficient, shifted 4x4)
        for j, k in enumerate(p.slots):
            for shift, coeff in SHIFT_TABLES[rules[j]]:
                shifted = local.copy()
                shifted[j] += shift
                variants.append((k, coeff, anz.bind_raw(p.template, shifted)))
        # evaluate every variant of this block through the shared suffix
        stack = np.broadcast_to(
            prefixes[i], (len(variants),) + prefixes[i].shape
        )
        stack = _apply_2q_kernel(
            stack, np.stack([m for _, _, m in variants]), p.pair[0], p.pair[1], n
        )
        for later, mat in zip(places[i + 1 :], mats[i + 1 :]):
            stack = _apply_2q_kernel(stack, mat, later.pair[0], later.pair[1], n)
        q0, q1 = _readout_kernel(stack, readout_q, n)
        contrib = (q0 - q1) @ dz  # one dot product per variant
        for (k, coeff, _), c in zip(variants, contrib):
            grad[k] += coeff * float(c)
    return grad


def gradient_finite_difference(spec, params, features, labels01, loss: str):
    params = np.asarray(params, dtype=float)
    grad = np.zeros_like(params)
    for k in range(params.size):
        up = params.copy()
        up[k] += _FD_STEP
        down = params.copy()
        down[k] -= _FD_STEP
        grad[k] = (
            batch_loss(spec, up, features, labels01, loss)
            - batch_loss(spec, down, features, labels01, loss)
        ) / (2 * _FD_STEP)
    return grad


def gradient(spec, params, features, labels01, loss: str, method: str):
    if method == "parameter_shift":
        return gradient_parameter_shift(spec, params, features, labels01, loss)
    if method == "finite_difference":
        return gradient_finite_difference(spec, params, features, labels01, loss)
    raise ValueError(f"unknown gradient method {method!r}")


# ---------------------------------------------------------------------------
# Optimizers
# ---------------------------------------------------------------------------


class NesterovOptimizer:
    """Momentum with gradient evaluated at the lookahead point."""

    def __init__(self, learning_rate: float, momentum: float = 0.9):
        self.lr = learning_rate
        self.momentum = momentum
        self.velocity = None

    def lookahead(self, params: np.ndarray) -> np.ndarray:
        if self.velocity is None:
            return params
        return params - self.momentum * self.velocity

    def apply(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.velocity is None:
            self.velocity = np.zeros_like(params)
        self.velocity = self.momentum * self.velocity + self.lr * grad
        return params - self.velocity


class AdamOptimizer:
    def __init__(self, learning_rate: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = None
        self.v = None
        self.t = 0

    def lookahead(self, params: np.ndarray) -> np.ndarray:
        return params

    def apply(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad**2
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def make_optimizer(config: TrainConfig):
    if config.optimizer == "nesterov":
        return NesterovOptimizer(config.learning_rate, config.momentum)
    return AdamOptimizer(
        config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps
    )


# ---------------------------------------------------------------------------
# Training loop and evaluation
# ---------------------------------------------------------------------------


def train(
    spec: ModelSpec,
    config: TrainConfig,
    seed: int,
    train_features,
    train_labels,
    test_features=None,
    test_labels=None,
) -> TrainRun:
    """Run one seeded training instance and return its record.

    Parameters are initialized i.i.d. uniform on [init_low, init_high);
    every iteration draws a fresh batch without replacement within the
    batch (with replacement across iterations).
    """
    t_start = time.perf_counter()
    rng = np.random.default_rng(seed)
    X = np.asarray(train_features, dtype=float)
    y = np.asarray(train_labels)
    n_params = count_params(spec)
    params = rng.uniform(config.init_low, config.init_high, n_params)
    opt = make_optimizer(config)
    trace = []
    for it in range(config.iterations):
        idx = rng.choice(X.shape[0], size=min(config.batch_size, X.shape[0]),
                         replace=False)
        xb, yb = X[idx], y[idx]
        loss_val = batch_loss(spec, params, xb, yb, config.loss)
        if not np.isfinite(loss_val):
            raise TrainingFailure(f"non-finite loss at iteration {it}")
        trace.append(loss_val)
        point = opt.lookahead(params)
        grad = gradient(spec, point, xb, yb, config.loss, config.gradient_method)
        params = opt.apply(params, grad)
    accuracy = None
    if test_features is not None:
        accuracy = evaluate(spec, params, test_features, test_labels)
    return TrainRun(
        config=config.to_dict(),
        model=spec.to_dict(),
        model_hash=model_hash(spec),
        seed=seed,
        loss_trace=trace,
        wall_time_s=time.perf_counter() - t_start,
        final_params=list(map(float, params)),
        test_accuracy=accuracy,
        n_params=n_params,
    )


def predict(spec: ModelSpec, params, features) -> np.ndarray:
    """Class per sample: 0 when <Z> is positive, else 1 (ties go to 1)."""
    _, _, z = forward_batch(spec, params, features)
    return (z <= 0).astype(int)


def evaluate(spec: ModelSpec, params, features, labels01) -> float:
    preds = predict(spec, params, features)
    return float(np.mean(preds == np.asarray(labels01)))
