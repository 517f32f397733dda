"""Approximate exploitability descent.

Two ways of standing in for the exact best responses that exploitability
needs:

* ``brf``: a hypernetwork ``b(w, x)`` mapping the whole profile to a
  deviation profile. ``x`` descends ``phi(x, b(w, x))`` (total derivative,
  through ``b``) while ``w`` ascends it.
* ``bre``: an ensemble of candidate deviations per player. ``x`` descends
  against the best candidate of each ensemble; every candidate ascends its
  own deviation gain, weighted by its rank within the ensemble.
"""
from __future__ import annotations

from dataclasses import dataclass

import jax
import jax.numpy as jnp
import numpy as np

from .autodiff import ensure_finite
from .exceptions import NonFiniteError
from .methods import Method, MethodConfig, register
from .nn import Mlp


# -- Nikaido-Isoda function --------------------------------------------------


def _gains(game, x, y, key):
    """Per-player ``u_i(y_i, x_{-i}) - u_i(x)``."""
    u = game.utilities(x, key)
    dev = jnp.stack([
        game.deviation_utility(x, i, game.layout.block(y, i), key) for i in range(game.n_players)
    ])
    return dev - u


def _phi(game, x, y, key):
    return jnp.sum(_gains(game, x, y, key))


@dataclass(frozen=True)
class NiEvaluation:
    phi: float
    gains: np.ndarray


def ni(game, x, y, key=None) -> NiEvaluation:
    """Nikaido-Isoda function ``phi(x, y) = sum_i u_i(y_i, x_-i) - u_i(x)``."""
    x = jnp.asarray(x, dtype=jnp.float64)
    y = jnp.asarray(y, dtype=jnp.float64)
    if x.shape != (game.dim,) or y.shape != (game.dim,):
        raise ValueError(f"profiles must have shape ({game.dim},), got {x.shape} and {y.shape}")
    gains = ensure_finite(np.asarray(_gains(game, x, y, key)), "deviation gain")
    return NiEvaluation(float(gains.sum()), gains)


# -- rank weighting ----------------------------------------------------------


@dataclass(frozen=True)
class RankWeights:
    ranks: np.ndarray
    weights: np.ndarray


def _ranks(values):
    """Ordinal ranks 1..n, best value gets n; ties favour the lower index."""
    n = values.shape[-1]
    order = jnp.argsort(-values, axis=-1, stable=True)
    rank_of_position = jnp.arange(n, 0, -1, dtype=values.dtype)
    return jnp.zeros_like(values).at[order].set(rank_of_position)


def rank_weights(values) -> RankWeights:
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size < 1:
        raise ValueError("need a non-empty 1-D array of values")
    if not np.all(np.isfinite(values)):
        raise NonFiniteError("rank weights need finite values",
                             index=(int(np.flatnonzero(~np.isfinite(values))[0]),))
    ranks = np.asarray(_ranks(jnp.asarray(values))).astype(int)
    return RankWeights(ranks, ranks / values.size)


def mix(values) -> float:
    """Rank-weighted sum ``(1/n) sum_j r_j a_j``. Not mean preserving."""
    rw = rank_weights(values)
    return float(np.dot(rw.weights, np.asarray(values, dtype=float)))


# -- best-response functions -------------------------------------------------


@dataclass(frozen=True)
class BestResponseFunction:
    """Hypernetwork from a flattened profile to a deviation profile of the same size."""

    dim: int
    hidden: int = 32

    @property
    def mlp(self) -> Mlp:
        return Mlp((self.dim, self.hidden, self.dim))

    @property
    def n_params(self) -> int:
        return self.mlp.n_params

    def init(self, key):
        return self.mlp.init(key)

    def __call__(self, w, x):
        return self.mlp(w, x)


def brf_forward(brf: BestResponseFunction, w, x):
    return brf(jnp.asarray(w), jnp.asarray(x))


def _brf_update(game, brf, x, w, key, eta):
    def objective(x, w):
        return _phi(game, x, brf(w, x), key)

    gx, gw = jax.grad(objective, argnums=(0, 1))(x, w)
    return x - eta * gx, w + eta * gw


def brf_step(game, x, brf: BestResponseFunction, w, cfg: MethodConfig, key=None):
    """One simultaneous step: ``x`` down and ``w`` up the NI value at ``b(w, x)``."""
    x_new, w_new = _brf_update(game, brf, jnp.asarray(x), jnp.asarray(w), key, cfg.eta)
    ensure_finite(x_new, "profile after brf step")
    ensure_finite(w_new, "hypernetwork weights after brf step")
    return x_new, w_new


@register
class BRF(Method):
    id = "brf"

    def init_state(self, game, x, key, cfg):
        return {"w": BestResponseFunction(game.dim, cfg.brf_hidden).init(key)}

    def step(self, game, x, state, key, eta, cfg):
        brf = BestResponseFunction(game.dim, cfg.brf_hidden)
        x, w = _brf_update(game, brf, x, state["w"], key, eta)
        return x, {"w": w}


# -- best-response ensembles -------------------------------------------------
# An ensemble is a list with one (ensemble_size, d_i) array per player.


def init_ensemble(game, size: int, key) -> list:
    keys = jax.random.split(key, game.n_players)
    return [
        jax.vmap(lambda k, i=i: game.init_block(i, k))(jax.random.split(keys[i], size))
        for i in range(game.n_players)
    ]


def _candidate_values(game, x, ensemble, key):
    return [
        jax.vmap(lambda y, i=i: game.deviation_utility(x, i, y, key))(ensemble[i])
        for i in range(game.n_players)
    ]


def _bre_update(game, x, ensemble, key, eta):
    values = [jax.lax.stop_gradient(v) for v in _candidate_values(game, x, ensemble, key)]
    best = [jnp.argmax(v) for v in values]
    weights = [_ranks(v) / v.shape[0] for v in values]

    def descent_objective(x):
        u = game.utilities(x, key)
        return sum(
            game.deviation_utility(x, i, jax.lax.stop_gradient(ensemble[i][best[i]]), key) - u[i]
            for i in range(game.n_players)
        )

    def ascent_objective(ens):
        vals = _candidate_values(game, x, ens, key)
        return sum(jnp.dot(w, v) for w, v in zip(weights, vals))

    gx = jax.grad(descent_objective)(x)
    gy = jax.grad(ascent_objective)(ensemble)
    return x - eta * gx, [y + eta * g for y, g in zip(ensemble, gy)]


def bre_select(game, x, ensemble, key=None):
    """Index and value of each player's best candidate; ties go to the lower index."""
    values = [np.asarray(v) for v in _candidate_values(game, jnp.asarray(x), ensemble, key)]
    idx = np.array([int(np.argmax(v)) for v in values])
    return idx, np.array([v[j] for v, j in zip(values, idx)])


def bre_step(game, x, ensemble, cfg: MethodConfig, key=None):
    x_new, ens_new = _bre_update(game, jnp.asarray(x), [jnp.asarray(e) for e in ensemble],
                                 key, cfg.eta)
    ensure_finite(x_new, "profile after bre step")
    for e in ens_new:
        ensure_finite(e, "ensemble after bre step")
    return x_new, ens_new


@register
class BRE(Method):
    id = "bre"

    def init_state(self, game, x, key, cfg):
        return {"ensemble": init_ensemble(game, cfg.ensemble_size, key)}

    def step(self, game, x, state, key, eta, cfg):
        x, ens = _bre_update(game, x, state["ensemble"], key, eta)
        return x, {"ensemble": ens}


def approx_exploitability_from_responses(game, x, responses, key=None) -> float:
    """Lower bound on exploitability from a finite set of deviations per player.

    ``responses[i]`` is an array of shape ``(k_i, d_i)``. Each player's best
    gain is clamped at zero.
    """
    x = jnp.asarray(x, dtype=jnp.float64)
    u = np.asarray(game.utilities(x, key))
    total = 0.0
    for i, r in enumerate(responses):
        r = jnp.atleast_2d(jnp.asarray(r, dtype=jnp.float64))
        vals = np.asarray(jax.vmap(lambda y: game.deviation_utility(x, i, y, key))(r))
        total += max(0.0, float(np.max(vals) - u[i]))
    return total
