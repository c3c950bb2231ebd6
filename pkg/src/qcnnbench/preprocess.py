"""Classical dimensionality reduction and feature rescaling.

Pipelines feeding the encoders:

* ``bilinear`` - 28x28 -> 16x16 bilinear interpolation, flattened to 256
  features (amplitude encoding only).
* ``pca``      - projection onto the leading principal components of the
  mean-centered training matrix.
* ``autoenc``  - latent layer of a single-hidden-layer autoencoder
  (784 -> latent sigmoid -> 784 sigmoid) trained on reconstruction MSE.

Pixel grids are scaled to [0, 1] before any reducer.  Reducers are fit
on the training split only; ``rescale`` maps features into a target
interval using training-split minima/maxima, clamping test values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

REDUCTION_METHODS = ("bilinear", "pca", "autoenc")
LATENT_DIMS = (8, 16, 30, 32)

CACHE_VERSION = 1


class TrainingFailure(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Bilinear interpolation
# ---------------------------------------------------------------------------


def bilinear_resize(image, out_h: int = 16, out_w: int = 16) -> np.ndarray:
    """Resize one 28x28 grid with half-pixel-aligned sampling, row-major."""
    img = np.asarray(image, dtype=float)
    if img.shape != (28, 28):
        raise ValueError(f"expected a 28x28 image, got {img.shape}")
    return _bilinear_many(img[None, :, :], out_h, out_w)[0].ravel()


def _bilinear_many(images: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    n, in_h, in_w = images.shape
    sy, sx = in_h / out_h, in_w / out_w
    ys = (np.arange(out_h) + 0.5) * sy - 0.5
    xs = (np.arange(out_w) + 0.5) * sx - 0.5
    ys = np.clip(ys, 0, in_h - 1)
    xs = np.clip(xs, 0, in_w - 1)
    y0 = np.clip(np.floor(ys).astype(int), 0, in_h - 2)
    x0 = np.clip(np.floor(xs).astype(int), 0, in_w - 2)
    fy = (ys - y0)[None, :, None]
    fx = (xs - x0)[None, None, :]
    a = images[:, y0][:, :, x0]
    b = images[:, y0][:, :, x0 + 1]
    c = images[:, y0 + 1][:, :, x0]
    d = images[:, y0 + 1][:, :, x0 + 1]
    return (
        a * (1 - fy) * (1 - fx)
        + b * (1 - fy) * fx
        + c * fy * (1 - fx)
        + d * fy * fx
    )


def bilinear_features(images: np.ndarray, out_dim: int = 256) -> np.ndarray:
    """Batch of 28x28 grids -> (n, out_dim) flattened bilinear features."""
    side = int(np.sqrt(out_dim))
    if side * side != out_dim:
        raise ValueError("bilinear output dimension must be a square")
    return _bilinear_many(np.asarray(images, dtype=float), side, side).reshape(
        len(images), out_dim
    )


# ---------------------------------------------------------------------------
# PCA
# ---------------------------------------------------------------------------


@dataclass
class PcaReducer:
    mean: np.ndarray
    components: np.ndarray  # (out_dim, features), orthonormal rows
    explained_variance: np.ndarray

    def apply(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return (x - self.mean) @ self.components.T


def fit_pca(train_features, out_dim: int) -> PcaReducer:
    x = np.asarray(train_features, dtype=float)
    if out_dim > x.shape[1]:
        raise ValueError(
            f"out_dim {out_dim} exceeds feature dimension {x.shape[1]}"
        )
    mean = x.mean(axis=0)
    centered = x - mean
    # SVD of the centered data; eigh of the covariance is the test oracle
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    comps = vt[:out_dim]
    # deterministic sign: largest-magnitude entry of each component positive
    for row in comps:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1
    var = (s[:out_dim] ** 2) / (x.shape[0] - 1)
    return PcaReducer(mean, comps, var)


# ---------------------------------------------------------------------------
# Autoencoder (784 -> latent -> 784, sigmoid activations)
# ---------------------------------------------------------------------------


@dataclass
class AutoencoderReducer:
    w_enc: np.ndarray
    b_enc: np.ndarray
    w_dec: np.ndarray
    b_dec: np.ndarray
    loss_curve: np.ndarray

    def apply(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return _sigmoid(x @ self.w_enc + self.b_enc)

    def reconstruct(self, x) -> np.ndarray:
        return _sigmoid(self.apply(x) @ self.w_dec + self.b_dec)


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def fit_autoencoder(
    train_features,
    latent_dim: int,
    epochs: int = 20,
    batch_size: int = 64,
    learning_rate: float = 1e-3,
    seed: int = 0,
) -> AutoencoderReducer:
    """Train the reducer on reconstruction MSE with Adam."""
    x = np.asarray(train_features, dtype=float)
    n, d = x.shape
    rng = np.random.default_rng(seed)
    lim1 = np.sqrt(6.0 / (d + latent_dim))
    w1 = rng.uniform(-lim1, lim1, (d, latent_dim))
    b1 = np.zeros(latent_dim)
    w2 = rng.uniform(-lim1, lim1, (latent_dim, d))
    b2 = np.zeros(d)

    params = [w1, b1, w2, b2]
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    t = 0
    curve = []
    for _ in range(epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for s in range(0, n, batch_size):
            xb = x[order[s : s + batch_size]]
            h = _sigmoid(xb @ w1 + b1)
            out = _sigmoid(h @ w2 + b2)
            err = out - xb
            epoch_loss += float(np.mean(err**2)) * len(xb)
            # backprop of mean squared reconstruction error
            g_out = 2.0 * err / err.size * (out * (1 - out))
            g_w2 = h.T @ g_out
            g_b2 = g_out.sum(axis=0)
            g_h = g_out @ w2.T * (h * (1 - h))
            g_w1 = xb.T @ g_h
            g_b1 = g_h.sum(axis=0)
            t += 1
            for p, g, mi, vi in zip(params, (g_w1, g_b1, g_w2, g_b2), m, v):
                mi *= beta1
                mi += (1 - beta1) * g
                vi *= beta2
                vi += (1 - beta2) * g**2
                p -= learning_rate * (mi / (1 - beta1**t)) / (
                    np.sqrt(vi / (1 - beta2**t)) + eps
                )
        curve.append(epoch_loss / n)
    if curve[-1] > curve[0]:
        raise TrainingFailure(
            f"autoencoder diverged: loss {curve[0]:.4g} -> {curve[-1]:.4g}"
        )
    return AutoencoderReducer(w1, b1, w2, b2, np.asarray(curve))


# ---------------------------------------------------------------------------
# Min-max rescaling
# ---------------------------------------------------------------------------


@dataclass
class Rescaler:
    lo: float
    hi: float
    feat_min: np.ndarray
    feat_max: np.ndarray
    shrink: float = 1e-6

    @property
    def upper(self) -> float:
        # keep the top of the interval exclusive (rotation angles < pi)
        return self.hi - self.shrink * (self.hi - self.lo)

    def apply(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        span = self.feat_max - self.feat_min
        out = np.empty_like(x)
        flat = span == 0
        with np.errstate(invalid="ignore", divide="ignore"):
            scaled = (x - self.feat_min) / span * (self.hi - self.lo) + self.lo
        out[:, ~flat] = scaled[:, ~flat]
        out[:, flat] = 0.5 * (self.lo + self.hi)  # constant feature -> midpoint
        return np.clip(out, self.lo, self.upper)


def fit_rescale(train_features, interval=(0.0, np.pi)) -> Rescaler:
    lo, hi = float(interval[0]), float(interval[1])
    if not lo < hi:
        raise ValueError("interval lower bound must be below the upper bound")
    x = np.atleast_2d(np.asarray(train_features, dtype=float))
    return Rescaler(lo, hi, x.min(axis=0), x.max(axis=0))


def rescale(features, interval=(0.0, np.pi)) -> np.ndarray:
    """Fit-and-apply convenience for a single matrix."""
    return fit_rescale(features, interval).apply(features)


# ---------------------------------------------------------------------------
# Encoder-facing pipelines with caching
# ---------------------------------------------------------------------------

# target rescale interval per encoding kind; None = raw features
ENCODING_INTERVALS = {
    "amplitude": None,
    "qubit": (0.0, np.pi),
    "dense": (0.0, np.pi),
    "hde": None,
    "hae": (0.0, np.pi / 2),
}

ENCODING_DIMS = {"amplitude": 256, "qubit": 8, "dense": 16, "hde": 32, "hae": 30}


def reduce_features(
    method: str,
    out_dim: int,
    train_images: np.ndarray,
    test_images: np.ndarray,
    seed: int = 0,
):
    """Fit a reducer on the training split and transform both splits."""
    if method not in REDUCTION_METHODS:
        raise ValueError(f"unknown reduction method {method!r}")
    train = np.asarray(train_images, dtype=float).reshape(len(train_images), -1)
    test = np.asarray(test_images, dtype=float).reshape(len(test_images), -1)
    train = train / 255.0
    test = test / 255.0
    if method == "bilinear":
        if out_dim != 256:
            raise ValueError("bilinear reduction only pairs with out_dim=256")
        return (
            bilinear_features(train.reshape(-1, 28, 28), out_dim),
            bilinear_features(test.reshape(-1, 28, 28), out_dim),
        )
    if method == "pca":
        red = fit_pca(train, out_dim)
    else:
        red = fit_autoencoder(train, out_dim, seed=seed)
    return red.apply(train), red.apply(test)


def features_for_encoding(
    encoding: str,
    method: str,
    train_images,
    test_images,
    seed: int = 0,
    cache_dir=None,
    dataset_name: str = "",
):
    """Full pipeline: reduce, then rescale into the encoder's interval."""
    out_dim = ENCODING_DIMS[encoding]
    cache_path = None
    if cache_dir is not None:
        from pathlib import Path

        cache_path = Path(cache_dir) / (
            f"feat_v{CACHE_VERSION}_{dataset_name}_{method}_{out_dim}_s{seed}.npz"
        )
        if cache_path.exists():
            blob = np.load(cache_path)
            train_f, test_f = blob["train"], blob["test"]
        else:
            train_f, test_f = reduce_features(
                method, out_dim, train_images, test_images, seed
            )
            cache_path.parent.mkdir(parents=True, exist_ok=True)
            np.savez_compressed(
                cache_path, train=train_f, test=test_f, version=CACHE_VERSION
            )
    else:
        train_f, test_f = reduce_features(
            method, out_dim, train_images, test_images, seed
        )
    interval = ENCODING_INTERVALS[encoding]
    if interval is not None:
        scaler = fit_rescale(train_f, interval)
        train_f, test_f = scaler.apply(train_f), scaler.apply(test_f)
    return train_f, test_f
