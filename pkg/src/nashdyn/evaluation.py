"""Exploitability (exact and lower bounds), distances to equilibrium, EWD."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import jax
import jax.numpy as jnp
import numpy as np
from scipy.optimize import linear_sum_assignment

from .exceptions import NonFiniteError
from .games.base import FiniteGame, require_oracle
from .games.continuous import GlicksbergGross, gg_cdf
from .games.kuhn import KuhnPoker
from .games.normal_form import NormalFormGame


@dataclass
class ExploitabilityReport:
    regrets: np.ndarray
    total: float
    mode: str  # "exact" or "lower-bound"
    details: dict = field(default_factory=dict)

    def is_epsilon_equilibrium(self, eps: float) -> bool:
        return bool(np.max(self.regrets) <= eps)

    @property
    def epsilon(self) -> float:
        """Smallest ``eps`` for which the profile is an ``eps``-equilibrium."""
        return float(np.max(self.regrets))


@lru_cache(maxsize=None)
def _compiled_regrets(game):
    return jax.jit(game.regrets)


def exact_regret_normal_form(game, x, i: int) -> float:
    """``max_a u_i(a, x_-i) - u_i(x)`` for a normal-form game."""
    if not isinstance(game, NormalFormGame):
        raise TypeError(f"{game.name} is not a normal-form game")
    return float(_compiled_regrets(game)(jnp.asarray(x, dtype=jnp.float64))[i])


def exact_exploitability(game, x) -> ExploitabilityReport:
    """NashConv: the sum over players of exact best-response regrets."""
    require_oracle(game)
    regrets = np.asarray(_compiled_regrets(game)(jnp.asarray(x, dtype=jnp.float64)))
    if not np.all(np.isfinite(regrets)):
        raise NonFiniteError("non-finite regret")
    # regrets can dip a hair below zero through rounding
    regrets = np.maximum(regrets, 0.0)
    return ExploitabilityReport(regrets, float(regrets.sum()), "exact",
                                {"oracle": type(game).__name__})


def kuhn_best_response_value(game: KuhnPoker, x, i: int) -> float:
    """Expected value of player ``i``'s exact best response in Kuhn poker."""
    if not isinstance(game, KuhnPoker):
        raise TypeError(f"{game.name} is not Kuhn poker")
    value, _ = game.best_response(game.strategies(jnp.asarray(x, dtype=jnp.float64)), i)
    return float(value)


def _inner_ascent(game, x, i, starts, key, steps, lr):
    def gain(y):
        return game.deviation_utility(x, i, y, key)

    g = jax.grad(gain)

    def body(carry, _):
        y, best = carry
        y = y + lr * jax.vmap(g)(y)
        best = jnp.maximum(best, jax.vmap(gain)(y))
        return (y, best), None

    best0 = jax.vmap(gain)(starts)
    (_, best), _ = jax.lax.scan(body, (starts, best0), None, length=steps)
    return jnp.max(best)


@lru_cache(maxsize=None)
def _compiled_ascent(game, steps, lr):
    return jax.jit(lambda x, i_starts, key, i: _inner_ascent(game, x, i, i_starts, key, steps, lr),
                   static_argnums=3)


def approx_exploitability(game, x, restarts: int = 8, inner_steps: int = 200,
                          inner_lr: float = 1e-2, rng=None) -> ExploitabilityReport:
    """Lower bound on exploitability from per-player gradient ascent.

    Each player ascends ``u_i(y, x_-i)`` from its current strategy and from
    ``restarts - 1`` fresh draws of its initial distribution; the best value
    seen is kept. Sampled games use one fixed noise batch throughout.
    """
    if restarts < 1:
        raise ValueError("restarts must be at least 1")
    key = jax.random.PRNGKey(0) if rng is None else (
        jax.random.PRNGKey(rng) if isinstance(rng, (int, np.integer)) else rng)
    x = jnp.asarray(x, dtype=jnp.float64)
    eval_key, start_key = jax.random.split(key)
    u = np.asarray(game.utilities(x, eval_key))
    fn = _compiled_ascent(game, int(inner_steps), float(inner_lr))
    regrets = np.zeros(game.n_players)
    for i in range(game.n_players):
        keys = jax.random.split(jax.random.fold_in(start_key, i), restarts - 1)
        fresh = [game.init_block(i, k) for k in keys]
        starts = jnp.stack([game.layout.block(x, i)] + fresh)
        best = float(fn(x, starts, eval_key, i))
        regrets[i] = max(0.0, best - u[i])
    return ExploitabilityReport(regrets, float(regrets.sum()), "lower-bound",
                                {"restarts": restarts, "inner_steps": inner_steps, "inner_lr": inner_lr})


def distance_to_ne(game, x) -> float:
    """Euclidean distance to the known equilibrium.

    Raw parameters for the saddle, probability vectors for finite games.
    """
    return float(game.distance_to_ne(jnp.asarray(x, dtype=jnp.float64)))


def gg_cdf_distance(samples) -> float:
    """Kolmogorov-Smirnov distance between samples and the Glicksberg-Gross equilibrium CDF."""
    s = np.sort(np.asarray(samples, dtype=float).ravel())
    if s.size == 0:
        raise ValueError("need at least one sample")
    n = s.size
    F = gg_cdf(s)
    above = np.arange(1, n + 1) / n - F
    below = F - np.arange(0, n) / n
    return float(max(above.max(), below.max()))


def gg_strategy_distance(game: GlicksbergGross, x, n: int = 4096, rng=0) -> float:
    """Mean over both players of the KS distance to the equilibrium CDF."""
    key = jax.random.PRNGKey(rng) if isinstance(rng, (int, np.integer)) else rng
    samples = game.samples(jnp.asarray(x, dtype=jnp.float64), key, batch=n)
    return float(np.mean([gg_cdf_distance(s) for s in samples]))


@dataclass(frozen=True)
class AssignmentSolution:
    permutation: np.ndarray
    cost: float


def assignment_solve(cost) -> AssignmentSolution:
    """Minimum-cost perfect matching; ``permutation[r]`` is the column for row ``r``."""
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ValueError(f"cost matrix must be square, got shape {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise NonFiniteError("cost matrix has non-finite entries")
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(len(rows), dtype=int)
    perm[rows] = cols
    return AssignmentSolution(perm, float(cost[rows, cols].sum()))


def ewd(real, fake) -> float:
    """Empirical Wasserstein distance: optimal matching cost under Euclidean distance."""
    real = np.atleast_2d(np.asarray(real, dtype=float))
    fake = np.atleast_2d(np.asarray(fake, dtype=float))
    if real.shape != fake.shape:
        raise ValueError(f"point sets differ in shape: {real.shape} vs {fake.shape}")
    dist = np.sqrt(np.sum((real[:, None, :] - fake[None, :, :]) ** 2, axis=-1))
    return assignment_solve(dist).cost


def gan_ewd(game, x, n: int = 256, rng=0) -> float:
    from .games.gan import sample_dataset

    key = jax.random.PRNGKey(rng) if isinstance(rng, (int, np.integer)) else rng
    k_real, k_fake = jax.random.split(key)
    g = game.layout.block(jnp.asarray(x, dtype=jnp.float64), 0)
    return ewd(sample_dataset(game.dataset, n, k_real), game.generate(g, n, k_fake))


def _random_simplex_profile(game: NormalFormGame, rng: np.random.Generator):
    return [rng.dirichlet(np.ones(k)) for k in game.action_counts]


def midpoint_convexity_check(game: FiniteGame, n_pairs: int = 1000, rng=None, tol: float = 1e-9) -> float:
    """Fraction of random pairs of mixed profiles where exploitability is midpoint convex.

    Works directly on probability vectors (not logits).
    """
    require_oracle(game)
    if not isinstance(game, NormalFormGame):
        raise TypeError("midpoint convexity is checked on normal-form games")
    rng = np.random.default_rng(rng)
    phi = jax.jit(lambda s: game.exploitability_from_strategies(s))
    ok = 0
    for _ in range(n_pairs):
        p = [jnp.asarray(s) for s in _random_simplex_profile(game, rng)]
        q = [jnp.asarray(s) for s in _random_simplex_profile(game, rng)]
        mid = [(a + b) / 2 for a, b in zip(p, q)]
        if float(phi(mid)) <= 0.5 * (float(phi(p)) + float(phi(q))) + tol:
            ok += 1
    return ok / n_pairs
