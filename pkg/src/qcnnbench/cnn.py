"""Tiny 1-D CNN baselines with exact trainable-parameter budgets.

Architecture: two conv(valid, stride 1) + ReLU + max-pool(2) stages, a
final pool being skipped when the sequence is too short, then one fully
connected layer with a sigmoid output.  Layer shapes (kernel sizes and
channel counts) are found by a deterministic lexicographic enumeration
until the parameter census hits the requested budget exactly; the plans
for the benchmark budgets are frozen below and asserted by tests.

Gradients are plain hand-written backprop (validated against central
finite differences in the test suite); training mirrors the quantum
models' conditions except for the optimizer, which is Adam.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .training import AdamOptimizer, TrainConfig, TrainingFailure, TrainRun

TARGET_BUDGETS = (26, 34, 44, 56)

# (input_len, target_params) -> (k1, c1, k2, c2), from enumerate_plan
FROZEN_PLANS = {
    (8, 26): (2, 3, 2, 2),
    (16, 34): (2, 1, 2, 5),
    (8, 44): (2, 1, 2, 10),
    (16, 56): (4, 1, 2, 10),
}


@dataclass(frozen=True)
class CnnSpec:
    input_len: int
    target_params: int

    def plan(self):
        if (self.input_len, self.target_params) in FROZEN_PLANS:
            return FROZEN_PLANS[(self.input_len, self.target_params)]
        return enumerate_plan(self.input_len, self.target_params)


def _stage_lengths(input_len: int, k1: int, k2: int):
    l1 = input_len - k1 + 1
    if l1 < 1:
        return None
    p1 = l1 // 2 if l1 >= 2 else l1
    l2 = p1 - k2 + 1
    if l2 < 1:
        return None
    p2 = l2 // 2 if l2 >= 2 else l2
    return l1, p1, l2, p2


def plan_param_count(input_len: int, plan) -> int:
    k1, c1, k2, c2 = plan
    lengths = _stage_lengths(input_len, k1, k2)
    if lengths is None:
        return -1
    _, _, _, p2 = lengths
    return (k1 * c1 + c1) + (k2 * c1 * c2 + c2) + (p2 * c2 + 1)


def enumerate_plan(input_len: int, target: int):
    """First (k1, c1, k2, c2) in lexicographic order hitting the budget."""
    for k1 in range(2, 5):
        for c1 in range(1, 11):
            for k2 in range(2, 5):
                for c2 in range(1, 11):
                    if plan_param_count(input_len, (k1, c1, k2, c2)) == target:
                        return (k1, c1, k2, c2)
    raise ValueError(
        f"no two-stage plan reaches exactly {target} parameters "
        f"for input length {input_len}"
    )


class TinyCnn:
    """conv-pool-conv-pool-dense network on (batch, length) inputs."""

    def __init__(self, spec: CnnSpec, rng=None, init_scale: float = 1.0):
        self.spec = spec
        k1, c1, k2, c2 = spec.plan()
        lengths = _stage_lengths(spec.input_len, k1, k2)
        self.k1, self.c1, self.k2, self.c2 = k1, c1, k2, c2
        self.lengths = lengths
        flat = lengths[3] * c2
        if rng is None:
            rng = np.random.default_rng(0)
        self.w1 = rng.normal(0, init_scale, (k1, 1, c1))
        self.b1 = np.zeros(c1)
        self.w2 = rng.normal(0, init_scale, (k2, c1, c2))
        self.b2 = np.zeros(c2)
        self.wd = rng.normal(0, init_scale, (flat,))
        self.bd = np.zeros(1)
        assert self.n_params == spec.target_params, (
            self.n_params,
            spec.target_params,
        )

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.param_list())

    def param_list(self):
        return [self.w1, self.b1, self.w2, self.b2, self.wd, self.bd]

    def get_flat_params(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.param_list()])

    def set_flat_params(self, flat: np.ndarray):
        i = 0
        for p in self.param_list():
            p[...] = flat[i : i + p.size].reshape(p.shape)
            i += p.size

    # forward/backward -----------------------------------------------------

    @staticmethod
    def _conv(x, w, b):
        k = w.shape[0]
        lout = x.shape[1] - k + 1
        windows = np.stack([x[:, i : i + lout] for i in range(k)], axis=2)
        out = np.einsum("blkc,kco->blo", windows, w)
        return windows, out + b

    @staticmethod
    def _pool(x):
        if x.shape[1] < 2:
            return x, None
        lp = x.shape[1] // 2
        view = x[:, : 2 * lp].reshape(x.shape[0], lp, 2, x.shape[2])
        idx = view.argmax(axis=2)
        out = np.take_along_axis(view, idx[:, :, None, :], axis=2)[:, :, 0, :]
        return out, (idx, x.shape)

    def forward(self, x, keep_cache: bool = False):
        x = np.asarray(x, dtype=float)[:, :, None]  # (B, L, 1)
        win1, z1 = self._conv(x, self.w1, self.b1)
        a1 = np.maximum(z1, 0)
        p1, pc1 = self._pool(a1)
        win2, z2 = self._conv(p1, self.w2, self.b2)
        a2 = np.maximum(z2, 0)
        p2, pc2 = self._pool(a2)
        flat = p2.reshape(p2.shape[0], -1)
        logit = flat @ self.wd + self.bd
        prob = 1.0 / (1.0 + np.exp(-logit))
        if keep_cache:
            self._cache = (x, win1, z1, a1, p1, pc1, win2, z2, a2, p2, pc2, flat)
        return prob

    def backward(self, dlogit):
        """Gradient of the loss given dL/dlogit; returns a flat vector."""
        x, win1, z1, a1, p1, pc1, win2, z2, a2, p2, pc2, flat = self._cache
        g_wd = flat.T @ dlogit
        g_bd = np.array([dlogit.sum()])
        dflat = dlogit[:, None] * self.wd[None, :]
        dp2 = dflat.reshape(p2.shape)
        da2 = _pool_backward(dp2, pc2, a2)
        dz2 = da2 * (z2 > 0)
        g_w2, g_b2, dp1 = _conv_backward(dz2, win2, self.w2, p1.shape)
        da1 = _pool_backward(dp1, pc1, a1)
        dz1 = da1 * (z1 > 0)
        g_w1, g_b1, _ = _conv_backward(dz1, win1, self.w1, x.shape)
        return np.concatenate(
            [g_w1.ravel(), g_b1.ravel(), g_w2.ravel(), g_b2.ravel(),
             g_wd.ravel(), g_bd.ravel()]
        )


def _conv_backward(dz, windows, w, x_shape):
    b, lout, k, cin = windows.shape
    cout = w.shape[2]
    g_w = np.einsum("blkc,blo->kco", windows, dz)
    g_b = dz.sum(axis=(0, 1))
    dwin = np.einsum("blo,kco->blkc", dz, w)
    dx = np.zeros((b, x_shape[1], cin))
    for i in range(k):
        dx[:, i : i + lout] += dwin[:, :, i, :]
    return g_w, g_b, dx


def _pool_backward(dp, cache, pre_pool):
    if cache is None:
        return dp
    idx, shape = cache
    lp = dp.shape[1]
    dview = np.zeros((shape[0], lp, 2, shape[2]))
    np.put_along_axis(dview, idx[:, :, None, :], dp[:, :, None, :], axis=2)
    out = np.zeros(shape)
    out[:, : 2 * lp] = dview.reshape(shape[0], 2 * lp, shape[2])
    return out


def build_cnn(spec: CnnSpec, seed: int = 0, init_scale: float = 1.0) -> TinyCnn:
    """Construct the network; raises if no plan hits the budget exactly."""
    return TinyCnn(spec, np.random.default_rng(seed), init_scale)


def cnn_loss(probs, labels01, eps: float = 1e-10) -> float:
    p = np.clip(np.asarray(probs, dtype=float), eps, 1 - eps)
    y = np.asarray(labels01, dtype=float)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


def cnn_gradient(net: TinyCnn, x, labels01) -> np.ndarray:
    probs = net.forward(x, keep_cache=True)
    y = np.asarray(labels01, dtype=float)
    dlogit = (probs - y) / len(y)
    return net.backward(dlogit)


def train_cnn(
    spec: CnnSpec,
    config: TrainConfig,
    seed: int,
    train_features,
    train_labels,
    test_features=None,
    test_labels=None,
    init_scale: float = 1.0,
) -> TrainRun:
    """Adam-trained baseline under the matched benchmark conditions."""
    t_start = time.perf_counter()
    rng = np.random.default_rng(seed)
    X = np.asarray(train_features, dtype=float)
    y = np.asarray(train_labels)
    net = TinyCnn(spec, rng, init_scale)
    opt = AdamOptimizer(
        config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps
    )
    params = net.get_flat_params()
    trace = []
    for it in range(config.iterations):
        idx = rng.choice(X.shape[0], size=min(config.batch_size, X.shape[0]),
                         replace=False)
        xb, yb = X[idx], y[idx]
        net.set_flat_params(params)
        loss_val = cnn_loss(net.forward(xb), yb)
        if not np.isfinite(loss_val):
            raise TrainingFailure(f"non-finite loss at iteration {it}")
        trace.append(loss_val)
        grad = cnn_gradient(net, xb, yb)
        params = opt.apply(params, grad)
    net.set_flat_params(params)
    accuracy = None
    if test_features is not None:
        probs = net.forward(np.asarray(test_features, dtype=float))
        preds = (probs >= 0.5).astype(int)
        accuracy = float(np.mean(preds == np.asarray(test_labels)))
    return TrainRun(
        config=config.to_dict(),
        model={
            "input_len": spec.input_len,
            "target_params": spec.target_params,
            "plan": list(spec.plan()),
        },
        model_hash=f"cnn-{spec.input_len}-{spec.target_params}",
        seed=seed,
        loss_trace=trace,
        wall_time_s=time.perf_counter() - t_start,
        final_params=list(map(float, params)),
        test_accuracy=accuracy,
        n_params=net.n_params,
        tag="cnn",
    )
