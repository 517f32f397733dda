"""Method registry shared by the baseline dynamics and the two ApproxED methods.

A method is an object with ``init_state`` and ``step``. ``step`` must be
traceable so that whole trajectories can be compiled with ``lax.scan``;
``eta`` may be a traced scalar (step-size schedules).
"""
from __future__ import annotations

from dataclasses import dataclass

from .exceptions import UnsupportedMethodError

METHOD_IDS = (
    "sg", "eg", "op", "co", "sga", "sla", "la", "lola", "pcgd", "ed", "gni", "eda", "brf", "bre",
)
BASELINE_IDS = METHOD_IDS[:12]

_REGISTRY: dict[str, "Method"] = {}


@dataclass(frozen=True)
class MethodConfig:
    """Hyperparameters shared by every method.

    ``eta`` is the Euler step size and ``gamma`` the method-specific
    coefficient (look-ahead distance, penalty weight, ...).
    """

    method: str = "sg"
    eta: float = 1e-3
    gamma: float = 1e-1
    ensemble_size: int = 10
    brf_hidden: int = 32

    def __post_init__(self):
        if self.eta < 0 or self.gamma < 0:
            raise ValueError("eta and gamma must be non-negative")
        if self.ensemble_size < 1 or self.brf_hidden < 1:
            raise ValueError("ensemble_size and brf_hidden must be at least 1")


class Method:
    id = ""
    needs_oracle = False

    def check(self, game):
        if self.needs_oracle and not getattr(game, "has_oracle", False):
            raise UnsupportedMethodError(
                f"method {self.id!r} needs an exact best-response oracle, which {game.name} lacks"
            )

    def init_state(self, game, x, key, cfg: MethodConfig):
        return {}

    def step(self, game, x, state, key, eta, cfg: MethodConfig):
        raise NotImplementedError

    def __repr__(self):
        return f"<method {self.id}>"


def register(cls):
    _REGISTRY[cls.id] = cls()
    return cls


def get_method(method_id: str) -> Method:
    # importing these modules fills the registry
    from . import approxed, dynamics  # noqa: F401

    try:
        return _REGISTRY[method_id]
    except KeyError:
        raise ValueError(
            f"unknown method {method_id!r}; known methods: {', '.join(METHOD_IDS)}"
        ) from None


def step(game, x, cfg: MethodConfig, state, key):
    """One update ``(x, state) -> (x', state')`` of ``cfg.method``."""
    return get_method(cfg.method).step(game, x, state, key, cfg.eta, cfg)
