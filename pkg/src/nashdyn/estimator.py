"""Scikit-learn style front end to the solvers."""
from __future__ import annotations

import warnings

import jax
import jax.numpy as jnp
import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import ConvergenceWarning
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_is_fitted

from . import evaluation as ev
from .harness import Schedule, _trajectory_fn
from .utils.validation import check_game, check_method, check_profile


class EquilibriumSolver(BaseEstimator):
    """Run one equilibrium-finding method on one game.

    ``fit`` takes the game (or its registry id) in place of ``X``. After
    fitting, ``profile_`` holds the final strategy profile, ``state_`` the
    method state (ensembles, hypernetwork weights, ...) and ``n_steps_``
    the number of steps taken. ``partial_fit`` continues from there.

    Parameters
    ----------
    method : str
        Registered method id, e.g. ``"bre"`` or ``"sg"``.
    eta, gamma : float
        Euler step size and method coefficient.
    steps : int
        Steps per call to ``fit`` / ``partial_fit``.
    ensemble_size, brf_hidden : int
        Sizes for the two learned-response methods.
    batch_size : int
        Samples per player when the game is given by id and is sampled.
    schedule : str
        ``"constant"`` or ``"harmonic(c)"``.
    random_state : int, RandomState or None
    """

    def __init__(self, method="bre", eta=1e-3, gamma=1e-1, steps=1000, ensemble_size=10,
                 brf_hidden=32, batch_size=64, schedule="constant", random_state=None):
        self.method = method
        self.eta = eta
        self.gamma = gamma
        self.steps = steps
        self.ensemble_size = ensemble_size
        self.brf_hidden = brf_hidden
        self.batch_size = batch_size
        self.schedule = schedule
        self.random_state = random_state

    def _method_config(self):
        from .methods import MethodConfig

        try:
            return MethodConfig(self.method, float(self.eta), float(self.gamma),
                                int(self.ensemble_size), int(self.brf_hidden))
        except ValueError as exc:
            raise ValueError(f"invalid solver parameters: {exc}") from None

    def _validate(self, game):
        if int(self.steps) < 1:
            raise ValueError("steps must be at least 1")
        game = check_game(game, self.batch_size)
        method = check_method(self.method, game)
        return game, method

    def fit(self, game, y=None, x0=None):
        """Initialize a profile (or use ``x0``) and run ``steps`` steps."""
        game, method = self._validate(game)
        cfg = self._method_config()
        seed = check_random_state(self.random_state).randint(np.iinfo(np.int32).max)
        k_init, k_state, self._key = jax.random.split(jax.random.PRNGKey(seed), 3)
        x = game.init_params(k_init) if x0 is None else jnp.asarray(check_profile(game, x0))
        self.game_ = game
        self.profile_ = np.asarray(x)
        self.state_ = method.init_state(game, x, k_state, cfg)
        self.n_steps_ = 0
        self.diverged_ = False
        return self._run()

    def partial_fit(self, game=None, y=None):
        """Take another ``steps`` steps from the current profile."""
        if not hasattr(self, "profile_"):
            if game is None:
                raise ValueError("the first call to partial_fit needs a game")
            return self.fit(game)
        if game is not None and check_game(game, self.batch_size) is not self.game_:
            raise ValueError("partial_fit must be called with the game used in fit")
        return self._run()

    def _run(self):
        cfg = self._method_config()
        schedule = Schedule.parse(self.schedule, cfg.eta)
        fn = _trajectory_fn(self.game_, cfg, schedule, int(self.steps), int(self.steps))
        xs, state, div_at = fn(jnp.asarray(self.profile_), self.state_, self._key,
                               jnp.asarray(self.n_steps_))
        self.profile_ = np.asarray(xs[-1])
        self.state_ = state
        self.n_steps_ += int(self.steps)
        if int(div_at) >= 0:
            self.diverged_ = True
            warnings.warn(f"{self.method} diverged on {self.game_.name} at step {int(div_at)}; "
                          "profile_ holds the last finite iterate", ConvergenceWarning)
        return self

    def exploitability(self) -> float:
        """Exact exploitability when the game has an oracle, else the ascent lower bound."""
        check_is_fitted(self, "profile_")
        if self.game_.has_oracle:
            return ev.exact_exploitability(self.game_, self.profile_).total
        return ev.approx_exploitability(self.game_, self.profile_).total

    def score(self, game=None, y=None) -> float:
        """Negative exploitability, so larger is better."""
        return -self.exploitability()

    def strategies(self) -> list[np.ndarray]:
        """Mixed strategies of a finite game at the fitted profile."""
        check_is_fitted(self, "profile_")
        if not hasattr(self.game_, "strategies"):
            raise AttributeError(f"{self.game_.name} has no finite strategy representation")
        return [np.asarray(s) for s in self.game_.strategies(jnp.asarray(self.profile_))]
