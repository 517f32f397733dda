"""Benchmark games and a string-keyed registry."""
from .base import FiniteGame, Game
from .continuous import (
    GlicksbergGross,
    PolynomialGame,
    SaddleGame,
    SecurityGame,
    gg_cdf,
    gg_inverse_cdf,
    gg_payoff,
    make_glicksberg_gross,
    make_saddle,
    make_security,
    security_payoff,
)
from .gan import DATASETS, GanGame, make_gan, sample_dataset
from .kuhn import KuhnPoker, make_kuhn
from .normal_form import NormalFormGame, make_matching_pennies, make_rps, make_shapley

_REGISTRY = {
    "saddle": lambda **kw: make_saddle(),
    "mp2": lambda **kw: make_matching_pennies(2),
    "mp3": lambda **kw: make_matching_pennies(3),
    "rps3": lambda **kw: make_rps(3),
    "rps4": lambda **kw: make_rps(4),
    "shapley": lambda **kw: make_shapley(),
    "kuhn2": lambda **kw: make_kuhn(2),
    "kuhn3": lambda **kw: make_kuhn(3),
    "gg": lambda **kw: make_glicksberg_gross(**kw),
    "security1": lambda **kw: make_security(1, **kw),
    "security2": lambda **kw: make_security(2, **kw),
    "gan-ring": lambda **kw: make_gan("ring", **kw),
    "gan-grid": lambda **kw: make_gan("grid", **kw),
    "gan-spiral": lambda **kw: make_gan("spiral", **kw),
    "gan-cube": lambda **kw: make_gan("cube", **kw),
}

GAME_IDS = tuple(_REGISTRY)


def make_game(game_id: str, batch_size: int | None = None, hidden: int | None = None) -> Game:
    """Build a registered game. ``batch_size`` and ``hidden`` only affect sampled games."""
    try:
        factory = _REGISTRY[game_id]
    except KeyError:
        raise ValueError(f"unknown game {game_id!r}; known games: {', '.join(GAME_IDS)}") from None
    kw = {}
    if batch_size is not None:
        kw["batch_size"] = batch_size
    if hidden is not None:
        kw["hidden"] = hidden
    return factory(**kw)


__all__ = [
    "DATASETS", "FiniteGame", "GAME_IDS", "Game", "GanGame", "GlicksbergGross", "KuhnPoker",
    "NormalFormGame", "PolynomialGame", "SaddleGame", "SecurityGame", "gg_cdf", "gg_inverse_cdf", "gg_payoff",
    "make_game", "make_gan", "make_glicksberg_gross", "make_kuhn", "make_matching_pennies",
    "make_rps", "make_saddle", "make_security", "make_shapley", "sample_dataset",
    "security_payoff",
]
