"""Normal-form games: matching pennies, rock paper scissors, Shapley."""
from __future__ import annotations

import itertools
import string

import jax.numpy as jnp
import numpy as np

from ..nn import softmax
from .base import TIE_TOL, FiniteGame

RPS3 = np.array([
    [0, -1, 1],
    [1, 0, -1],
    [-1, 1, 0],
], dtype=float)

RPS4 = np.array([
    [0, -1, 0, 1],
    [1, 0, -1, 0],
    [0, 1, 0, -1],
    [-1, 0, 1, 0],
], dtype=float)

SHAPLEY_1 = np.eye(3)
SHAPLEY_2 = np.array([
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 0],
], dtype=float)


class NormalFormGame(FiniteGame):
    """Game given by a payoff tensor ``payoffs[i, a_1, ..., a_n]``."""

    def __init__(self, payoffs, name="normal-form", zero_sum=None, known_ne=None):
        payoffs = np.asarray(payoffs, dtype=float)
        n = payoffs.shape[0]
        if payoffs.ndim != n + 1:
            raise ValueError(f"payoff tensor for {n} players needs {n + 1} axes, got {payoffs.ndim}")
        self.payoffs = payoffs
        self.name = name
        self.n_players = n
        self.action_counts = tuple(payoffs.shape[1:])
        self.param_dims = self.action_counts
        if zero_sum is None:
            zero_sum = bool(np.allclose(payoffs.sum(axis=0), 0.0))
        self.zero_sum = zero_sum
        self.known_ne = None if known_ne is None else [np.asarray(p, float) for p in known_ne]
        self._T = jnp.asarray(payoffs)

    # strategies here are plain probability vectors, one per player
    def strategies(self, x):
        return [softmax(b) for b in self.layout.split(jnp.asarray(x))]

    def _contract(self, tensor, strategies, skip=()):
        letters = string.ascii_lowercase[: self.n_players]
        operands = [tensor]
        subs = ["Z" + letters]
        for j, s in enumerate(strategies):
            if j in skip:
                continue
            operands.append(s)
            subs.append(letters[j])
        out = "Z" + "".join(letters[j] for j in sorted(skip))
        return jnp.einsum(",".join(subs) + "->" + out, *operands)

    def utilities_from_strategies(self, strategies):
        return self._contract(self._T, strategies)

    def action_values(self, strategies, i: int):
        """Player ``i``'s expected payoff for each of its pure actions."""
        return self._contract(self._T[i:i + 1], strategies, skip=(i,))[0]

    def best_response(self, strategies, i):
        values = self.action_values(strategies, i)
        a = jnp.argmax(values)
        return values[a], jnp.zeros_like(values).at[a].set(1.0)

    def tied_best_response(self, strategies, i, tol=TIE_TOL):
        values = self.action_values(strategies, i)
        tied = (values >= jnp.max(values) - tol).astype(values.dtype)
        return tied / jnp.sum(tied)

    def distance_to_ne(self, x):
        if self.known_ne is None:
            return super().distance_to_ne(x)
        diff = jnp.concatenate([s - p for s, p in zip(self.strategies(x), self.known_ne)])
        return jnp.sqrt(jnp.sum(diff ** 2))

    @property
    def has_known_ne(self):
        return self.known_ne is not None

    def pure_profile_utilities(self, actions):
        return self.payoffs[(slice(None),) + tuple(actions)]


def matching_pennies_payoffs(n_players: int) -> np.ndarray:
    n = n_players
    T = np.zeros((n,) + (2,) * n)
    for a in itertools.product(range(2), repeat=n):
        for i in range(n):
            sign = -1.0 if i == n - 1 else 1.0
            T[(i,) + a] = (2.0 * (a[i] == a[(i + 1) % n]) - 1.0) * sign
    return T


def make_matching_pennies(n_players: int = 2) -> NormalFormGame:
    """Each player wants to match the next one; the last wants to mismatch the first."""
    if n_players < 2:
        raise ValueError("matching pennies needs at least 2 players")
    uniform = [np.full(2, 0.5)] * n_players
    return NormalFormGame(matching_pennies_payoffs(n_players), name=f"mp{n_players}", known_ne=uniform)


def cyclic_rps_matrix(n_actions: int) -> np.ndarray:
    """Row player's payoffs: action ``a`` beats ``a - 1`` and loses to ``a + 1`` (mod n)."""
    n = n_actions
    M = np.zeros((n, n))
    for a1 in range(n):
        for a2 in range(n):
            M[a1, a2] = float((a1 - a2) % n == 1) - float((a2 - a1) % n == 1)
    return M


def make_rps(n_actions: int = 3) -> NormalFormGame:
    if n_actions < 3:
        raise ValueError("rock paper scissors needs at least 3 actions")
    M = {3: RPS3, 4: RPS4}.get(n_actions)
    if M is None:
        M = cyclic_rps_matrix(n_actions)
    uniform = [np.full(n_actions, 1.0 / n_actions)] * 2
    return NormalFormGame(np.stack([M, -M]), name=f"rps{n_actions}", zero_sum=True, known_ne=uniform)


def make_shapley() -> NormalFormGame:
    uniform = [np.full(3, 1.0 / 3.0)] * 2
    return NormalFormGame(np.stack([SHAPLEY_1, SHAPLEY_2]), name="shapley", zero_sum=False,
                          known_ne=uniform)
