"""Small fully connected networks stored as flat parameter vectors."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import jax
import jax.numpy as jnp
import numpy as np

# logits further than this from the max are treated as this far away
LOGIT_CLIP = 30.0


def sigmoid(z):
    return jax.nn.sigmoid(jnp.clip(z, -LOGIT_CLIP, LOGIT_CLIP))


def softmax(logits, axis: int = -1):
    """Softmax with a saturation guard.

    Logits are shifted by their max first, so the guard never breaks
    shift invariance.
    """
    logits = jnp.asarray(logits)
    shifted = logits - jax.lax.stop_gradient(jnp.max(logits, axis=axis, keepdims=True))
    shifted = jnp.maximum(shifted, -LOGIT_CLIP)
    e = jnp.exp(shifted)
    return e / jnp.sum(e, axis=axis, keepdims=True)


def softmax_head(logits, n_actions: int = 2):
    """Probabilities from a flat logit vector, one softmax per group of ``n_actions``.

    Returns an array of shape ``(n_sets, n_actions)``.
    """
    logits = jnp.asarray(logits)
    if logits.shape[-1] % n_actions:
        raise ValueError(f"{logits.shape[-1]} logits do not split into sets of {n_actions}")
    return softmax(logits.reshape(logits.shape[:-1] + (-1, n_actions)))


def mlp_param_count(layer_sizes: Sequence[int]) -> int:
    return int(sum((a + 1) * b for a, b in zip(layer_sizes[:-1], layer_sizes[1:])))


def he_init(layer_sizes: Sequence[int], key) -> jnp.ndarray:
    """Weights ~ Normal(0, 2 / fan_in), biases zero, flattened layer by layer."""
    if len(layer_sizes) < 2 or any(s < 1 for s in layer_sizes):
        raise ValueError(f"bad layer sizes {layer_sizes}")
    parts = []
    keys = jax.random.split(key, len(layer_sizes) - 1)
    for k, fan_in, fan_out in zip(keys, layer_sizes[:-1], layer_sizes[1:]):
        w = jax.random.normal(k, (fan_in, fan_out)) * jnp.sqrt(2.0 / fan_in)
        parts += [w.reshape(-1), jnp.zeros(fan_out)]
    return jnp.concatenate(parts)


def unflatten(params, layer_sizes: Sequence[int]) -> list[tuple[jnp.ndarray, jnp.ndarray]]:
    layers = []
    pos = 0
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        w = params[pos:pos + fan_in * fan_out].reshape(fan_in, fan_out)
        pos += fan_in * fan_out
        b = params[pos:pos + fan_out]
        pos += fan_out
        layers.append((w, b))
    return layers


def mlp_forward(params, layer_sizes: Sequence[int], inputs, activation: Callable = jnp.tanh):
    """Apply the network to ``inputs`` of shape ``(..., layer_sizes[0])``.

    The activation is applied after every layer except the last.
    """
    params = jnp.asarray(params)
    if params.shape[-1] != mlp_param_count(layer_sizes):
        raise ValueError(
            f"expected {mlp_param_count(layer_sizes)} parameters, got {params.shape[-1]}"
        )
    h = jnp.asarray(inputs)
    if h.shape[-1] != layer_sizes[0]:
        raise ValueError(f"input has size {h.shape[-1]}, network expects {layer_sizes[0]}")
    layers = unflatten(params, layer_sizes)
    for k, (w, b) in enumerate(layers):
        h = h @ w + b
        if k < len(layers) - 1:
            h = activation(h)
    return h


@dataclass(frozen=True)
class Mlp:
    layer_sizes: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))

    @property
    def n_params(self) -> int:
        return mlp_param_count(self.layer_sizes)

    def init(self, key):
        return he_init(self.layer_sizes, key)

    def __call__(self, params, inputs):
        return mlp_forward(params, self.layer_sizes, inputs)


@dataclass(frozen=True)
class ImplicitDensityStrategy:
    """Mixed strategy given by pushing Gaussian noise through an MLP.

    With ``squash`` the outputs go through a sigmoid, landing in the unit box.
    """

    noise_dim: int
    out_dim: int
    hidden: int = 32
    squash: bool = True

    @property
    def net(self) -> Mlp:
        return Mlp((self.noise_dim, self.hidden, self.out_dim))

    @property
    def n_params(self) -> int:
        return self.net.n_params

    def init(self, key):
        return self.net.init(key)

    def transform(self, params, noise):
        out = self.net(params, noise)
        return sigmoid(out) if self.squash else out

    def sample(self, params, batch: int, key):
        if batch < 1:
            raise ValueError("batch must be at least 1")
        noise = jax.random.normal(key, (batch, self.noise_dim))
        return self.transform(params, noise)


def sample_strategy(strategy: ImplicitDensityStrategy, params, batch: int = 64, key=None):
    if key is None:
        key = jax.random.PRNGKey(0)
    return strategy.sample(params, batch, key)


def param_variance(params, layer_sizes) -> list[float]:
    """Empirical per-layer weight variance; handy for checking initializers."""
    return [float(np.var(np.asarray(w))) for w, _ in unflatten(jnp.asarray(params), layer_sizes)]
