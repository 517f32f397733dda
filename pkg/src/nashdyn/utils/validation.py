"""Input validation shared by the estimator, harness and CLI."""
from __future__ import annotations

import numpy as np

from ..exceptions import ConfigError, UnsupportedMethodError
from ..games import make_game
from ..games.base import Game
from ..methods import Method, get_method


def check_game(game, batch_size: int | None = None) -> Game:
    """Accept a :class:`Game` or a registered game id."""
    if isinstance(game, Game):
        return game
    if isinstance(game, str):
        try:
            return make_game(game, batch_size=batch_size)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    raise TypeError(f"expected a Game or a game id, got {type(game).__name__}")


def check_profile(game: Game, x) -> np.ndarray:
    """Flat float64 profile of the right size with finite entries."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] != game.dim:
        raise ValueError(f"{game.name} expects a profile of shape ({game.dim},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("profile contains NaN or infinite entries")
    return arr


def check_method(method_id: str, game: Game | None = None) -> Method:
    """Look up a method and, if a game is given, check the pair is runnable."""
    try:
        method = get_method(method_id)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if game is not None:
        try:
            method.check(game)
        except UnsupportedMethodError as exc:
            raise ConfigError(str(exc)) from None
    return method
