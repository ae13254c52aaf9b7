"""Stochastic objectives: noisy quadratics, small datasets, and a numpy MLP.

Every objective exposes the same surface::

    dim            -- number of parameters
    loss(x, batch) / grad(x, batch) / loss_and_grad(x, batch)
    full_loss(x)   -- exact (noise-free) objective, or mean over the dataset
    full_grad(x)   -- exact gradient, or mean over the dataset
    hvp(x, v)      -- Hessian-vector product (analytic where available)
    make_sampler(batch_size, rng) -> callable yielding batches

A *batch* carries all of a step's stochasticity.  For dataset-backed
objectives it is an index array drawn without replacement with a per-epoch
reshuffle.  For ``NoisyQuadratic`` the batch IS the gradient-noise vector:
the two gradient evaluations of a sharpness-aware step then see identical
noise, which is exactly the same-batch semantics the optimizers rely on.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .core import as_param_vector, norm2
from .errors import ConfigError, DimensionMismatchError, InvalidParameterError


class EpochSampler:
    """Without-replacement minibatch sampler with per-epoch reshuffle."""

    def __init__(self, n: int, batch_size: int, rng: np.random.Generator):
        if batch_size < 1:
            raise InvalidParameterError(f"batch_size must be >= 1, got {batch_size}")
        self.n = n
        self.batch_size = min(batch_size, n)
        self.rng = rng
        self.epoch = -1
        self._order = None
        self._pos = 0
        self.batches_per_epoch = math.ceil(n / self.batch_size)

    def __call__(self) -> np.ndarray:
        if self._order is None or self._pos >= self.n:
            self._order = self.rng.permutation(self.n)
            self._pos = 0
            self.epoch += 1
        batch = self._order[self._pos:self._pos + self.batch_size]
        self._pos += self.batch_size
        return batch


class NoisyQuadratic:
    """f(x) = 1/2 x'Ax + b'x with isotropic Gaussian gradient noise.

    ``A`` may be a dense symmetric PSD matrix or a 1-D vector of diagonal
    entries (kept as a diagonal so large spectra stay cheap).  A batch is a
    noise vector zeta ~ N(0, sigma^2 I); ``grad(x, zeta) = Ax + b + zeta`` and
    ``loss(x, zeta) = f(x) + zeta'x`` so the batch gradient is exactly the
    gradient of the batch loss.  ``sigma2`` = dim * sigma^2 is the declared
    total gradient-noise variance E||g - grad f||^2.
    """

    has_analytic_hvp = True

    def __init__(self, A, b=None, sigma: float = 0.0):
        A = np.asarray(A, dtype=np.float64)
        if A.ndim == 1:
            self._diag = A.copy()
            self._A = None
            self.dim = A.shape[0]
        elif A.ndim == 2:
            if A.shape[0] != A.shape[1]:
                raise DimensionMismatchError(f"A must be square, got {A.shape}")
            if not np.allclose(A, A.T, atol=1e-12):
                raise InvalidParameterError("A must be symmetric")
            self._A = A.copy()
            self._diag = None
            self.dim = A.shape[0]
        else:
            raise DimensionMismatchError(f"A must be 1-D or 2-D, got ndim {A.ndim}")
        if sigma < 0:
            raise InvalidParameterError(f"sigma must be >= 0, got {sigma}")
        self.b = np.zeros(self.dim) if b is None else as_param_vector(b, self.dim)
        self.sigma = float(sigma)
        self.sigma2 = self.dim * self.sigma ** 2

    def _Ax(self, x: np.ndarray) -> np.ndarray:
        if self._diag is not None:
            return self._diag * x
        return self._A @ x

    def lambda_max(self) -> float:
        if self._diag is not None:
            return float(np.max(self._diag))
        return float(np.linalg.eigvalsh(self._A)[-1])

    def full_loss(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self._Ax(x) + self.b @ x)

    def full_grad(self, x: np.ndarray) -> np.ndarray:
        return self._Ax(x) + self.b

    def loss(self, x: np.ndarray, batch: np.ndarray) -> float:
        return self.full_loss(x) + float(batch @ x)

    def grad(self, x: np.ndarray, batch: np.ndarray) -> np.ndarray:
        return self.full_grad(x) + batch

    def loss_and_grad(self, x, batch):
        return self.loss(x, batch), self.grad(x, batch)

    def hvp(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        return self._Ax(v)

    def make_sampler(self, batch_size: int, rng: np.random.Generator):
        # batch_size is irrelevant here: one noise draw per batch.
        dim, sigma = self.dim, self.sigma

        def sample() -> np.ndarray:
            return sigma * rng.standard_normal(dim)

        return sample

    def grad_draws(self, x: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
        """n stochastic gradients at x, stacked; vectorized for Monte-Carlo loops."""
        return self.full_grad(x)[np.newaxis, :] + \
            self.sigma * rng.standard_normal((n, self.dim))


def quadratic_objective(A, b=None, sigma: float = 0.0, rng=None) -> NoisyQuadratic:
    """Construct a NoisyQuadratic (thin alias kept for a uniform factory API)."""
    return NoisyQuadratic(A, b=b, sigma=sigma)


# ---------------------------------------------------------------------------
# datasets


@dataclass
class Dataset:
    features: np.ndarray          # (n_samples, n_features)
    labels: np.ndarray            # (n_samples,) integer classes
    noise_fraction: float = 0.0   # fraction of labels that were flipped

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise DimensionMismatchError(f"features must be 2-D, got {self.features.shape}")
        if self.labels.shape != (self.features.shape[0],):
            raise DimensionMismatchError(
                f"labels shape {self.labels.shape} does not match {self.features.shape[0]} samples")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1 if self.n_samples else 0


def load_dataset_csv(path: str, header: bool = False) -> Dataset:
    """CSV rows are features followed by an integer label in the last column."""
    rows = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        if header:
            next(reader, None)
        for row in reader:
            if row:
                rows.append([float(v) for v in row])
    if not rows:
        raise ConfigError(path, "dataset file has no rows")
    arr = np.asarray(rows, dtype=np.float64)
    labels = arr[:, -1]
    if not np.allclose(labels, np.round(labels)):
        raise ConfigError(path, "last column must hold integer class labels")
    return Dataset(arr[:, :-1], labels.astype(np.int64))


def make_blobs_dataset(n_per_class: int, n_classes: int, dim: int,
                       separation: float, rng: np.random.Generator) -> Dataset:
    """Gaussian blobs, one unit-variance cloud per class.

    Class c is centred at separation * (+-e_{c mod dim}), cycling through the
    coordinate axes with a sign flip on each wrap.
    """
    feats, labels = [], []
    for c in range(n_classes):
        center = np.zeros(dim)
        sign = -1.0 if (c // dim) % 2 else 1.0
        center[c % dim] = sign * separation
        feats.append(center + rng.standard_normal((n_per_class, dim)))
        labels.append(np.full(n_per_class, c, dtype=np.int64))
    return Dataset(np.vstack(feats), np.concatenate(labels))


def inject_label_noise(dataset: Dataset, fraction: float,
                       rng: np.random.Generator) -> Dataset:
    """Flip exactly floor(fraction*n) labels, uniformly among the other classes."""
    if not 0.0 <= fraction <= 1.0:
        raise InvalidParameterError(f"fraction must be in [0,1], got {fraction}")
    n = dataset.n_samples
    k = int(math.floor(fraction * n))
    labels = dataset.labels.copy()
    if k > 0:
        n_classes = dataset.n_classes
        if n_classes < 2:
            raise InvalidParameterError("label noise needs at least 2 classes")
        idx = rng.choice(n, size=k, replace=False)
        # uniform draw over the other classes: shift past the original label
        offsets = rng.integers(1, n_classes, size=k)
        labels[idx] = (labels[idx] + offsets) % n_classes
    return Dataset(dataset.features.copy(), labels, noise_fraction=fraction)


# ---------------------------------------------------------------------------
# multilayer perceptron with handwritten backprop


def _act(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _act_deriv(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (z > 0.0).astype(np.float64)
    t = np.tanh(z)
    return 1.0 - t * t


class Mlp:
    """Fully-connected net, cross-entropy loss, parameters in one flat vector.

    ``layer_sizes`` = [d_in, hidden..., n_classes].  Layer l stores a weight
    matrix W_l of shape (out, in) followed by its bias, so the parameter count
    is sum((in+1)*out).
    """

    def __init__(self, layer_sizes, activation: str = "tanh"):
        if len(layer_sizes) < 2 or any(s < 1 for s in layer_sizes):
            raise InvalidParameterError(f"bad layer_sizes {layer_sizes}")
        if activation not in ("relu", "tanh"):
            raise InvalidParameterError(f"unknown activation {activation!r}")
        self.layer_sizes = list(layer_sizes)
        self.activation = activation
        self.shapes = []
        offset = 0
        self._offsets = []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            self.shapes.append((fan_out, fan_in))
            self._offsets.append((offset, offset + fan_out * fan_in,
                                  offset + fan_out * fan_in + fan_out))
            offset = self._offsets[-1][2]
        self.dim = offset

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        x = np.zeros(self.dim)
        for (w0, b0, end), (fan_out, fan_in) in zip(self._offsets, self.shapes):
            scale = math.sqrt(2.0 / fan_in) if self.activation == "relu" \
                else math.sqrt(1.0 / fan_in)
            x[w0:b0] = scale * rng.standard_normal(fan_out * fan_in)
            # biases stay zero
        return x

    def unpack(self, x: np.ndarray):
        layers = []
        for (w0, b0, end), (fan_out, fan_in) in zip(self._offsets, self.shapes):
            layers.append((x[w0:b0].reshape(fan_out, fan_in), x[b0:end]))
        return layers

    def forward(self, x: np.ndarray, feats: np.ndarray):
        """Return (pre-activations per layer, activations per layer, logits)."""
        layers = self.unpack(x)
        a = feats
        zs, acts = [], [a]
        for i, (W, b) in enumerate(layers):
            z = a @ W.T + b
            zs.append(z)
            a = _act(z, self.activation) if i < len(layers) - 1 else z
            acts.append(a)
        return zs, acts, a

    def loss_and_grad(self, x: np.ndarray, feats: np.ndarray, labels: np.ndarray):
        """Mean cross-entropy over the batch and its gradient in x."""
        n = feats.shape[0]
        layers = self.unpack(x)
        zs, acts, logits = self.forward(x, feats)
        # stable log-softmax
        zmax = logits.max(axis=1, keepdims=True)
        logsumexp = zmax[:, 0] + np.log(np.exp(logits - zmax).sum(axis=1))
        loss = float(np.mean(logsumexp - logits[np.arange(n), labels]))

        grad = np.zeros(self.dim)
        probs = np.exp(logits - zmax)
        probs /= probs.sum(axis=1, keepdims=True)
        delta = probs
        delta[np.arange(n), labels] -= 1.0
        delta /= n
        for i in range(len(layers) - 1, -1, -1):
            W, _ = layers[i]
            w0, b0, end = self._offsets[i]
            grad[w0:b0] = (delta.T @ acts[i]).ravel()
            grad[b0:end] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ W) * _act_deriv(zs[i - 1], self.activation)
        return loss, grad

    def normalize_direction(self, direction: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Per-neuron direction scaling for landscape slices.

        Each output neuron's weight row together with its bias is rescaled so
        its norm matches the corresponding group of ``x`` (the usual
        filter-wise normalization, with rows standing in for conv filters).
        """
        out = direction.copy()
        for (w0, b0, end), (fan_out, fan_in) in zip(self._offsets, self.shapes):
            for j in range(fan_out):
                sl_w = slice(w0 + j * fan_in, w0 + (j + 1) * fan_in)
                idx_b = b0 + j
                dnorm = math.sqrt(norm2(out[sl_w]) ** 2 + out[idx_b] ** 2)
                xnorm = math.sqrt(norm2(x[sl_w]) ** 2 + x[idx_b] ** 2)
                if dnorm > 0.0:
                    factor = xnorm / dnorm
                    out[sl_w] *= factor
                    out[idx_b] *= factor
        return out


class MlpObjective:
    """An Mlp bound to a dataset (optionally with a held-out split)."""

    has_analytic_hvp = False

    def __init__(self, mlp: Mlp, dataset: Dataset,
                 holdout_fraction: float = 0.0, rng: np.random.Generator | None = None):
        if dataset.n_features != mlp.layer_sizes[0]:
            raise DimensionMismatchError(
                f"dataset width {dataset.n_features} != input size {mlp.layer_sizes[0]}")
        if dataset.n_classes > mlp.layer_sizes[-1]:
            raise DimensionMismatchError(
                f"{dataset.n_classes} classes but only {mlp.layer_sizes[-1]} outputs")
        self.mlp = mlp
        self.dataset = dataset
        self.dim = mlp.dim
        self.sigma2 = None
        if holdout_fraction > 0.0:
            if rng is None:
                raise InvalidParameterError("holdout split needs an rng")
            n = dataset.n_samples
            k = int(math.floor(holdout_fraction * n))
            perm = rng.permutation(n)
            self._holdout_idx = np.sort(perm[:k])
            self._train_idx = np.sort(perm[k:])
        else:
            self._holdout_idx = None
            self._train_idx = np.arange(dataset.n_samples)

    @property
    def n_samples(self) -> int:
        return self._train_idx.shape[0]

    def has_holdout(self) -> bool:
        return self._holdout_idx is not None and self._holdout_idx.size > 0

    def _rows(self, batch: np.ndarray):
        idx = self._train_idx[batch]
        return self.dataset.features[idx], self.dataset.labels[idx]

    def loss_and_grad(self, x, batch):
        feats, labels = self._rows(batch)
        return self.mlp.loss_and_grad(x, feats, labels)

    def loss(self, x, batch) -> float:
        return self.loss_and_grad(x, batch)[0]

    def grad(self, x, batch) -> np.ndarray:
        return self.loss_and_grad(x, batch)[1]

    def full_loss(self, x) -> float:
        feats = self.dataset.features[self._train_idx]
        labels = self.dataset.labels[self._train_idx]
        return self.mlp.loss_and_grad(x, feats, labels)[0]

    def full_grad(self, x) -> np.ndarray:
        feats = self.dataset.features[self._train_idx]
        labels = self.dataset.labels[self._train_idx]
        return self.mlp.loss_and_grad(x, feats, labels)[1]

    def holdout_loss(self, x) -> float:
        if not self.has_holdout():
            raise InvalidParameterError("objective has no held-out split")
        feats = self.dataset.features[self._holdout_idx]
        labels = self.dataset.labels[self._holdout_idx]
        return self.mlp.loss_and_grad(x, feats, labels)[0]

    def hvp(self, x, v) -> np.ndarray:
        return hvp_finite_difference(self, x, v)

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        return self.mlp.init_params(rng)

    def normalize_direction(self, direction, x):
        return self.mlp.normalize_direction(direction, x)

    def make_sampler(self, batch_size: int, rng: np.random.Generator):
        return EpochSampler(self.n_samples, batch_size, rng)


def mlp_objective(layer_sizes, activation: str, dataset: Dataset,
                  loss: str = "cross_entropy", holdout_fraction: float = 0.0,
                  rng: np.random.Generator | None = None) -> MlpObjective:
    if loss != "cross_entropy":
        raise InvalidParameterError(f"unsupported loss {loss!r}")
    return MlpObjective(Mlp(layer_sizes, activation), dataset,
                        holdout_fraction=holdout_fraction, rng=rng)


# ---------------------------------------------------------------------------
# Hessian-vector products


def hvp_finite_difference(obj, x: np.ndarray, v: np.ndarray,
                          h: float | None = None) -> np.ndarray:
    """Central-difference Hessian-vector product on the full gradient.

    Dispatches to the objective's analytic hvp when one exists.  The default
    step h = 1e-3 * (1 + ||x||_inf) balances truncation against roundoff.
    """
    if v.shape[0] != obj.dim:
        raise DimensionMismatchError(f"v has dim {v.shape[0]}, objective {obj.dim}")
    if getattr(obj, "has_analytic_hvp", False):
        return obj.hvp(x, v)
    vnorm = norm2(v)
    if vnorm == 0.0:
        return np.zeros_like(v)
    if h is None:
        h = 1e-3 * (1.0 + float(np.max(np.abs(x))))
    vhat = v / vnorm
    gp = obj.full_grad(x + h * vhat)
    gm = obj.full_grad(x - h * vhat)
    return (gp - gm) * (vnorm / (2.0 * h))


# ---------------------------------------------------------------------------
# the four-sample scalar example where partitioning changes the objective


_MS_DATA = ((0.0, 1.0), (0.0, -1.0), (-1.0, 0.0), (1.0, 0.0))  # (a_i, b_i)
_MS_PARTITIONS = {"by_b": ((0, 1), (2, 3)), "by_a": ((0, 2), (1, 3))}


def m_sharpness_example(partition: str):
    """Two per-partition losses of the 4-sample scalar problem.

    Sample i has loss l_i(w) = a_i w^2 + b_i w.  A partition groups the four
    samples into two pairs; each pair's loss (as a function of the shared
    parameter w and its own perturbation delta) is the sum over the pair:
    f_P(w, delta) = a_P (w+delta)^2 + b_P (w+delta).
    """
    if partition not in _MS_PARTITIONS:
        raise InvalidParameterError(f"partition must be one of {sorted(_MS_PARTITIONS)}")
    fns = []
    for group in _MS_PARTITIONS[partition]:
        a = sum(_MS_DATA[i][0] for i in group)
        b = sum(_MS_DATA[i][1] for i in group)

        def f(w, delta, a=a, b=b):
            u = w + delta
            return a * u * u + b * u

        fns.append(f)
    return tuple(fns)


def _max_quadratic_on_interval(a: float, b: float, lo: float, hi: float) -> float:
    """max of a*u^2 + b*u over u in [lo, hi], exactly."""
    cand = [a * lo * lo + b * lo, a * hi * hi + b * hi]
    if a < 0.0:
        u_star = -b / (2.0 * a)
        if lo < u_star < hi:
            cand.append(a * u_star * u_star + b * u_star)
    return max(cand)


def m_sharpness_objective(partition: str, w: float, rho: float) -> float:
    """Sum over partitions of max_{|delta|<=rho} f_P(w, delta), in closed form."""
    if rho < 0:
        raise InvalidParameterError(f"rho must be >= 0, got {rho}")
    total = 0.0
    for group in _MS_PARTITIONS[_check_partition(partition)]:
        a = sum(_MS_DATA[i][0] for i in group)
        b = sum(_MS_DATA[i][1] for i in group)
        total += _max_quadratic_on_interval(a, b, w - rho, w + rho)
    return total


def _check_partition(partition: str) -> str:
    if partition not in _MS_PARTITIONS:
        raise InvalidParameterError(f"partition must be one of {sorted(_MS_PARTITIONS)}")
    return partition
