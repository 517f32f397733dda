"""Toy GAN training as a two-player zero-sum game."""
from __future__ import annotations

import jax
import jax.numpy as jnp
import numpy as np

from ..nn import Mlp
from .base import Game, as_key
from .continuous import DEFAULT_BATCH

DATASETS = ("ring", "grid", "spiral", "cube")
DATA_STD = 0.1
SPIRAL_TURNS = 2
SPIRAL_STD = 0.05
CUBE_STD = 0.05


def ring_centers() -> np.ndarray:
    angles = 2 * np.pi * np.arange(8) / 8
    return np.stack([np.cos(angles), np.sin(angles)], axis=1)


def grid_centers() -> np.ndarray:
    g = np.array([-1.0, 0.0, 1.0])
    return np.array([(a, b) for a in g for b in g])


def cube_edges() -> tuple[np.ndarray, np.ndarray]:
    """Start points and directions of the 12 edges of the cube [-1, 1]^3."""
    starts, dirs = [], []
    for axis in range(3):
        others = [k for k in range(3) if k != axis]
        for s1 in (-1.0, 1.0):
            for s2 in (-1.0, 1.0):
                p = np.zeros(3)
                p[axis] = -1.0
                p[others[0]], p[others[1]] = s1, s2
                d = np.zeros(3)
                d[axis] = 2.0
                starts.append(p)
                dirs.append(d)
    return np.array(starts), np.array(dirs)


def data_dim(dataset: str) -> int:
    return 3 if dataset == "cube" else 2


def _mixture(key, n, centers, std):
    k1, k2 = jax.random.split(key)
    which = jax.random.randint(k1, (n,), 0, len(centers))
    return jnp.asarray(centers)[which] + std * jax.random.normal(k2, (n, centers.shape[1]))


def sample_dataset(dataset: str, n: int, rng=None):
    """Draw ``n`` i.i.d. points from one of the toy distributions.

    ``rng`` may be a jax key or an integer seed. Traceable under ``jit``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    key = as_key(rng)
    if dataset == "ring":
        return _mixture(key, n, ring_centers(), DATA_STD)
    if dataset == "grid":
        return _mixture(key, n, grid_centers(), DATA_STD)
    if dataset == "spiral":
        k1, k2 = jax.random.split(key)
        t = jax.random.uniform(k1, (n,))
        r = jnp.sqrt(t)
        theta = 2 * jnp.pi * r * SPIRAL_TURNS
        mean = jnp.stack([r * jnp.cos(theta), r * jnp.sin(theta)], axis=1)
        return mean + SPIRAL_STD * jax.random.normal(k2, (n, 2))
    if dataset == "cube":
        starts, dirs = cube_edges()
        k1, k2, k3 = jax.random.split(key, 3)
        edge = jax.random.randint(k1, (n,), 0, 12)
        s = jax.random.uniform(k2, (n, 1))
        pts = jnp.asarray(starts)[edge] + s * jnp.asarray(dirs)[edge]
        return pts + CUBE_STD * jax.random.normal(k3, (n, 3))
    raise ValueError(f"unknown dataset {dataset!r}; expected one of {DATASETS}")


class GanGame(Game):
    """Player 1 is the generator (utility ``-V``), player 2 the discriminator (``+V``).

    ``V(D, G) = E log D(x) + E log(1 - D(G(z)))`` with the discriminator
    producing a logit.
    """

    n_players = 2
    zero_sum = True
    is_stochastic = True

    def __init__(self, dataset: str = "ring", batch_size: int = DEFAULT_BATCH, hidden: int = 32):
        if dataset not in DATASETS:
            raise ValueError(f"unknown dataset {dataset!r}; expected one of {DATASETS}")
        self.dataset = dataset
        self.name = f"gan-{dataset}"
        self.batch_size = int(batch_size)
        k = data_dim(dataset)
        self.data_dim = k
        self.generator = Mlp((k, hidden, k))
        self.discriminator = Mlp((k, hidden, 1))
        self.param_dims = (self.generator.n_params, self.discriminator.n_params)

    def init_block(self, i, key):
        return (self.generator if i == 0 else self.discriminator).init(key)

    def generate(self, g_params, n, key):
        z = jax.random.normal(key, (n, self.data_dim))
        return self.generator(g_params, z)

    def value(self, g_params, d_params, key):
        k_real, k_fake = jax.random.split(key)
        real = sample_dataset(self.dataset, self.batch_size, k_real)
        fake = self.generate(g_params, self.batch_size, k_fake)
        d_real = self.discriminator(d_params, real)[:, 0]
        d_fake = self.discriminator(d_params, fake)[:, 0]
        return jnp.mean(jax.nn.log_sigmoid(d_real)) + jnp.mean(jax.nn.log_sigmoid(-d_fake))

    def utilities(self, x, key=None):
        if key is None:
            key = jax.random.PRNGKey(0)
        g, d = self.layout.split(x)
        V = self.value(g, d, key)
        return jnp.stack([-V, V])


def make_gan(dataset: str = "ring", batch_size: int = DEFAULT_BATCH, hidden: int = 32) -> GanGame:
    return GanGame(dataset, batch_size, hidden)
