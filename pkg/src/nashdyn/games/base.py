from __future__ import annotations

import jax
import jax.numpy as jnp
import numpy as np

from ..autodiff import BlockLayout
from ..exceptions import NoKnownEquilibriumError, NoOracleError

LOGIT_INIT_SCALE = 0.1
TIE_TOL = 1e-12


class Game:
    """A differentiable game over flat parameter vectors.

    Subclasses set ``name``, ``n_players`` and ``param_dims`` and implement
    :meth:`utilities` and :meth:`init_block`.
    """

    name: str = "game"
    n_players: int
    param_dims: tuple[int, ...]
    is_stochastic = False
    zero_sum = False
    has_oracle = False

    @property
    def layout(self) -> BlockLayout:
        layout = self.__dict__.get("_layout")
        if layout is None:
            layout = self.__dict__["_layout"] = BlockLayout(self.param_dims)
        return layout

    @property
    def dim(self) -> int:
        return self.layout.size

    def utilities(self, x, key=None):
        """Per-player (expected) utilities, shape ``(n_players,)``."""
        raise NotImplementedError

    def init_block(self, i: int, key):
        raise NotImplementedError

    def init_params(self, key):
        keys = jax.random.split(key, self.n_players)
        return jnp.concatenate([self.init_block(i, k) for i, k in enumerate(keys)])

    def deviation_utility(self, x, i: int, y_i, key=None):
        """``u_i(y_i, x_{-i})``."""
        return self.utilities(self.layout.replace(x, i, y_i), key)[i]

    def distance_to_ne(self, x):
        raise NoKnownEquilibriumError(f"{self.name} has no known equilibrium")

    @property
    def has_known_ne(self) -> bool:
        return type(self).distance_to_ne is not Game.distance_to_ne

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"


class FiniteGame(Game):
    """Game with finitely many actions per decision, parameterized by logits.

    Player ``i``'s strategy is an array of probabilities of shape
    ``(n_decisions_i, n_actions)``; its parameters are the matching logits.
    """

    has_oracle = True
    n_actions = 2

    def strategies(self, x) -> list:
        from ..nn import softmax_head

        return [softmax_head(b, self.n_actions) for b in self.layout.split(jnp.asarray(x))]

    def utilities_from_strategies(self, strategies):
        raise NotImplementedError

    def best_response(self, strategies, i: int):
        """Value of player ``i``'s best response and a pure best response.

        Ties between actions go to the lower action index.
        """
        raise NotImplementedError

    def tied_best_response(self, strategies, i: int, tol: float = TIE_TOL):
        """Best response mixing uniformly over actions within ``tol`` of the best.

        At an equilibrium this can coincide with the current strategy, which
        a single pure best response cannot.
        """
        return self.best_response(strategies, i)[1]

    def utilities(self, x, key=None):
        return self.utilities_from_strategies(self.strategies(x))

    def init_block(self, i, key):
        return LOGIT_INIT_SCALE * jax.random.normal(key, (self.param_dims[i],))

    def regrets_from_strategies(self, strategies):
        u = self.utilities_from_strategies(strategies)
        br = jnp.stack([self.best_response(strategies, i)[0] for i in range(self.n_players)])
        return br - u

    def exploitability_from_strategies(self, strategies):
        return jnp.sum(self.regrets_from_strategies(strategies))

    def regrets(self, x):
        return self.regrets_from_strategies(self.strategies(x))

    def exploitability(self, x):
        return jnp.sum(self.regrets(x))


def require_oracle(game: Game):
    if not getattr(game, "has_oracle", False):
        raise NoOracleError(
            f"{game.name} has no exact best-response oracle; use approx_exploitability instead"
        )


def as_key(rng):
    """Accept a jax key, an int seed or None."""
    if rng is None:
        return jax.random.PRNGKey(0)
    if isinstance(rng, (int, np.integer)):
        return jax.random.PRNGKey(int(rng))
    return rng
