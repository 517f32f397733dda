"""Games with continuous actions: saddle, Glicksberg-Gross, security."""
from __future__ import annotations

import jax
import jax.numpy as jnp
import numpy as np

from ..nn import ImplicitDensityStrategy
from .base import Game

DEFAULT_BATCH = 64


class SaddleGame(Game):
    """``u_1(x, y) = x y = -u_2(x, y)``; unique equilibrium at the origin."""

    name = "saddle"
    n_players = 2
    param_dims = (1, 1)
    zero_sum = True
    known_ne = np.zeros(2)

    def utilities(self, x, key=None):
        p = x[0] * x[1]
        return jnp.stack([p, -p])

    def init_block(self, i, key):
        return jax.random.normal(key, (1,))

    def init_params(self, key):
        # start on the unit circle around the equilibrium
        theta = jax.random.uniform(key, (), minval=0.0, maxval=2.0 * jnp.pi)
        return jnp.stack([jnp.cos(theta), jnp.sin(theta)])

    def distance_to_ne(self, x):
        return jnp.sqrt(jnp.sum(jnp.asarray(x) ** 2))


def make_saddle() -> SaddleGame:
    return SaddleGame()


class SampledGame(Game):
    """Two-player game whose players are implicit density strategies.

    Expected utility is estimated from ``batch_size`` samples per player,
    averaging the payoff over every pair of samples.
    """

    is_stochastic = True
    zero_sum = True
    n_players = 2

    def __init__(self, strategies, batch_size: int = DEFAULT_BATCH):
        self.players = tuple(strategies)
        self.param_dims = tuple(s.n_params for s in self.players)
        self.batch_size = int(batch_size)

    def pairwise_payoff(self, a, b):
        """Player 1's payoff for each sample pair, shape ``(len(a), len(b))``."""
        raise NotImplementedError

    def samples(self, x, key, batch=None):
        batch = batch or self.batch_size
        keys = jax.random.split(key, self.n_players)
        return [s.sample(b, batch, k) for s, b, k in zip(self.players, self.layout.split(x), keys)]

    def utilities(self, x, key=None):
        if key is None:
            key = jax.random.PRNGKey(0)
        a, b = self.samples(x, key)
        u1 = jnp.mean(self.pairwise_payoff(a, b))
        return jnp.stack([u1, -u1])

    def init_block(self, i, key):
        return self.players[i].init(key)


def gg_payoff(x, y):
    return (1 + x) * (1 + y) * (1 - x * y) / (1 + x * y) ** 2


def gg_cdf(t):
    """Equilibrium CDF of each player in the Glicksberg-Gross game."""
    return 4.0 / np.pi * np.arctan(np.sqrt(np.clip(t, 0.0, 1.0)))


def gg_inverse_cdf(u):
    return np.tan(np.pi * np.asarray(u) / 4.0) ** 2


class GlicksbergGross(SampledGame):
    name = "gg"

    def __init__(self, batch_size: int = DEFAULT_BATCH, hidden: int = 32):
        super().__init__([ImplicitDensityStrategy(1, 1, hidden)] * 2, batch_size)

    def pairwise_payoff(self, a, b):
        return gg_payoff(a[:, 0][:, None], b[:, 0][None, :])


def make_glicksberg_gross(batch_size: int = DEFAULT_BATCH, hidden: int = 32) -> GlicksbergGross:
    return GlicksbergGross(batch_size, hidden)


def security_payoff(attacker, defender_points):
    """Defender's payoff ``exp(-d^2)``, d the distance to the closest defender point.

    ``attacker`` is ``(..., 2)``; ``defender_points`` is ``(..., n, 2)``.
    """
    sq = jnp.sum((attacker[..., None, :] - defender_points) ** 2, axis=-1)
    return jnp.exp(-jnp.min(sq, axis=-1))


class SecurityGame(SampledGame):
    """Attacker (player 1) picks a point in the unit square, defender (player 2) picks n points."""

    def __init__(self, n_points: int = 1, batch_size: int = DEFAULT_BATCH, hidden: int = 32):
        if n_points not in (1, 2):
            raise ValueError("the security game supports 1 or 2 defender points")
        self.n_points = n_points
        self.name = f"security{n_points}"
        super().__init__(
            [ImplicitDensityStrategy(2, 2, hidden), ImplicitDensityStrategy(2, 2 * n_points, hidden)],
            batch_size,
        )

    def pairwise_payoff(self, a, b):
        d = b.reshape(b.shape[0], self.n_points, 2)
        return -security_payoff(a[:, None, :], d[None, :, :, :])


def make_security(n_points: int = 1, batch_size: int = DEFAULT_BATCH, hidden: int = 32) -> SecurityGame:
    return SecurityGame(n_points, batch_size, hidden)


class PolynomialGame(Game):
    """Random general-sum game with cubic utilities.

    ``u_i(x) = b_i.x + x'A_i x / 2 + T_i[x, x, x] / 6`` with Gaussian
    coefficients; used to exercise operator identities away from bilinear
    structure, where several dynamics coincide exactly.
    """

    def __init__(self, param_dims=(2, 2), seed: int = 0, scale: float = 0.5):
        self.param_dims = tuple(int(d) for d in param_dims)
        self.n_players = len(self.param_dims)
        self.name = f"poly{self.n_players}x{sum(self.param_dims)}"
        d = sum(self.param_dims)
        rng = np.random.default_rng(seed)
        self.b = jnp.asarray(scale * rng.standard_normal((self.n_players, d)))
        self.A = jnp.asarray(scale * rng.standard_normal((self.n_players, d, d)))
        self.T = jnp.asarray(scale * rng.standard_normal((self.n_players, d, d, d)))

    def utilities(self, x, key=None):
        lin = self.b @ x
        quad = 0.5 * jnp.einsum("ijk,j,k->i", self.A, x, x)
        cub = jnp.einsum("ijkl,j,k,l->i", self.T, x, x, x) / 6.0
        return lin + quad + cub

    def init_block(self, i, key):
        return jax.random.normal(key, (self.param_dims[i],))
