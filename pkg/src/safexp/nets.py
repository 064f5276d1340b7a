"""Small tanh multilayer perceptrons with handwritten differentiation.

Everything here works on a flat float64 parameter vector so that the
trust-region machinery can treat parameters as a plain Euclidean point.
Three primitives are provided:

- ``forward``: batched evaluation, returning a cache of activations,
- ``vjp``: reverse-mode, cotangent on the outputs -> gradient w.r.t. params,
- ``jvp``: forward-mode, tangent on the params -> directional output derivative.

No autodiff framework is used; the architecture is fixed (dense layers,
tanh hidden activations, linear output), which keeps the code short and the
gradient path directly testable against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MlpSpec:
    """Architecture descriptor: layer sizes of a dense tanh network."""

    in_dim: int
    out_dim: int
    hidden: tuple[int, ...] = (32, 32)

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        sizes = (self.in_dim, *self.hidden, self.out_dim)
        return [(sizes[i + 1], sizes[i]) for i in range(len(sizes) - 1)]

    @property
    def param_count(self) -> int:
        return sum(o * i + o for o, i in self.layer_dims)


def init_params(spec: MlpSpec, rng: np.random.Generator) -> np.ndarray:
    """Scaled-Gaussian weights, zero biases, as one flat vector."""
    chunks = []
    for out, inp in spec.layer_dims:
        w = rng.normal(size=(out, inp)) / np.sqrt(inp)
        chunks.append(w.ravel())
        chunks.append(np.zeros(out))
    return np.concatenate(chunks)


def unflatten(spec: MlpSpec, theta: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split a flat vector into per-layer (W, b) views (no copies)."""
    if theta.shape != (spec.param_count,):
        raise ValueError(
            f"parameter vector has shape {theta.shape}, expected ({spec.param_count},)"
        )
    layers = []
    k = 0
    for out, inp in spec.layer_dims:
        w = theta[k : k + out * inp].reshape(out, inp)
        k += out * inp
        b = theta[k : k + out]
        k += out
        layers.append((w, b))
    return layers


def flatten(spec: MlpSpec, layers: list[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    chunks = []
    for w, b in layers:
        chunks.append(np.asarray(w).ravel())
        chunks.append(np.asarray(b).ravel())
    theta = np.concatenate(chunks)
    if theta.shape != (spec.param_count,):
        raise ValueError("layer shapes inconsistent with spec")
    return theta


def forward(spec: MlpSpec, theta: np.ndarray, x: np.ndarray):
    """Evaluate the network on a batch.

    Returns ``(y, cache)`` where ``y`` has shape (N, out_dim) and ``cache``
    holds the post-activation of every layer (input included), as needed by
    both ``vjp`` and ``jvp``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != spec.in_dim:
        raise ValueError(f"input has {x.shape[1]} features, expected {spec.in_dim}")
    layers = unflatten(spec, theta)
    acts = [x]
    h = x
    for i, (w, b) in enumerate(layers):
        z = h @ w.T + b
        h = z if i == len(layers) - 1 else np.tanh(z)
        acts.append(h)
    return h, acts


def vjp(spec: MlpSpec, theta: np.ndarray, acts: list[np.ndarray], dy: np.ndarray) -> np.ndarray:
    """Backpropagate an output cotangent; returns d(sum dy.y)/d(theta), flat.

    The cotangent is summed over the batch, so per-sample weights belong in
    ``dy`` itself.
    """
    layers = unflatten(spec, theta)
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(layers)  # type: ignore[list-item]
    d = np.asarray(dy, dtype=np.float64)
    for i in range(len(layers) - 1, -1, -1):
        w, _ = layers[i]
        if i != len(layers) - 1:
            d = d * (1.0 - acts[i + 1] ** 2)  # tanh'
        grads[i] = (d.T @ acts[i], d.sum(axis=0))
        if i > 0:
            d = d @ w
    return flatten(spec, grads)


def jvp(spec: MlpSpec, theta: np.ndarray, acts: list[np.ndarray], v: np.ndarray) -> np.ndarray:
    """Directional derivative of the outputs along the parameter tangent v."""
    layers = unflatten(spec, theta)
    tangents = unflatten(spec, np.asarray(v, dtype=np.float64))
    dh = np.zeros_like(acts[0])
    for i, ((w, _), (dw, db)) in enumerate(zip(layers, tangents)):
        dz = acts[i] @ dw.T + dh @ w.T + db
        dh = dz if i == len(layers) - 1 else dz * (1.0 - acts[i + 1] ** 2)
    return dh


class Adam:
    """Plain Adam on a flat parameter vector."""

    def __init__(self, dim: int, lr: float = 3e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(dim)
        self.v = np.zeros(dim)
        self.t = 0

    def step(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        mhat = self.m / (1.0 - self.beta1 ** self.t)
        vhat = self.v / (1.0 - self.beta2 ** self.t)
        return theta - self.lr * mhat / (np.sqrt(vhat) + self.eps)
