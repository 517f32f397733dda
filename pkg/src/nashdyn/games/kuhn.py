"""Kuhn poker for 2 or 3 players with behavioral strategies.

Rules: each player antes 1 and receives one card from a deck of
``n_players + 1`` ranked cards. Players act in turn. Until someone bets,
a player may check (action 0) or bet 1 (action 1). After a bet every other
player, in turn order, may fold (0) or call (1). The highest card among the
players who did not fold takes the pot.

An information set is (player, own card, public action history). Each has
two logits, so 2-player Kuhn has 12 per player and 3-player Kuhn has 32.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import jax.numpy as jnp
import numpy as np

from .base import TIE_TOL, FiniteGame

CARD_NAMES = "JQKA"


@dataclass
class KuhnTree:
    n_players: int
    deals: list[tuple[int, ...]]
    deal_probs: np.ndarray
    # info_sets[i] lists (card, history) for player i in parameter order
    info_sets: list[list[tuple[int, str]]] = field(default_factory=list)
    # per terminal: chance weight, payoff vector, and the decisions on its path
    chance: list[float] = field(default_factory=list)
    payoffs: list[np.ndarray] = field(default_factory=list)
    paths: list[list[tuple[int, int, int]]] = field(default_factory=list)


def _histories(n_players: int):
    """Yield (history, acting player or None at terminals) over the public tree."""

    def walk(history):
        bet_at = history.find("b")
        if bet_at < 0:
            if len(history) == n_players:
                yield history, None
                return
            yield history, len(history)
            for a in "pb":
                yield from walk(history + a)
            return
        responders = n_players - 1
        responded = len(history) - bet_at - 1
        if responded == responders:
            yield history, None
            return
        yield history, (bet_at + 1 + responded) % n_players
        for a in "pb":
            yield from walk(history + a)

    yield from walk("")


def _terminal_payoffs(history: str, cards, n_players: int) -> np.ndarray:
    contrib = np.ones(n_players)
    bet_at = history.find("b")
    if bet_at < 0:
        in_pot = list(range(n_players))
    else:
        bettor = bet_at
        contrib[bettor] += 1
        in_pot = [bettor]
        for k, a in enumerate(history[bet_at + 1:]):
            player = (bet_at + 1 + k) % n_players
            if a == "b":
                contrib[player] += 1
                in_pot.append(player)
    winner = max(in_pot, key=lambda p: cards[p])
    out = -contrib
    out[winner] += contrib.sum()
    return out


def build_kuhn_tree(n_players: int) -> KuhnTree:
    if n_players not in (2, 3):
        raise ValueError("Kuhn poker is defined here for 2 or 3 players")
    deck = range(n_players + 1)
    deals = list(itertools.permutations(deck, n_players))
    tree = KuhnTree(n_players, deals, np.full(len(deals), 1.0 / len(deals)))

    public = list(_histories(n_players))
    decision_histories = [[h for h, p in public if p == i] for i in range(n_players)]
    index = []
    for i in range(n_players):
        sets = [(c, h) for c in deck for h in decision_histories[i]]
        tree.info_sets.append(sets)
        index.append({s: k for k, s in enumerate(sets)})

    acting_at = dict(public)

    def walk(history, cards, path, prob):
        acting = acting_at[history]
        if acting is None:
            tree.chance.append(prob)
            tree.payoffs.append(_terminal_payoffs(history, cards, n_players))
            tree.paths.append(path)
            return
        k = index[acting][(cards[acting], history)]
        for a, label in enumerate("pb"):
            walk(history + label, cards, path + [(acting, k, a)], prob)

    for cards, p in zip(deals, tree.deal_probs):
        walk("", cards, [], float(p))
    return tree


class KuhnPoker(FiniteGame):
    zero_sum = True
    n_actions = 2

    def __init__(self, n_players: int = 2):
        self.tree = tree = build_kuhn_tree(n_players)
        self.name = f"kuhn{n_players}"
        self.n_players = n_players
        self.n_info_sets = tuple(len(s) for s in tree.info_sets)
        self.param_dims = tuple(2 * k for k in self.n_info_sets)

        offsets = np.concatenate([[0], np.cumsum(self.param_dims)])
        pad = int(offsets[-1])  # index of a constant 1.0 appended to the probabilities
        T = len(tree.paths)
        depth = max(len(p) for p in tree.paths)
        idx = np.full((T, depth), pad)
        for z, path in enumerate(tree.paths):
            for k, (i, s, a) in enumerate(path):
                idx[z, k] = offsets[i] + 2 * s + a
        self._path_idx = jnp.asarray(idx)
        self._chance = jnp.asarray(tree.chance)
        self._payoffs = jnp.asarray(np.array(tree.payoffs))
        self._br = [self._br_structure(i, offsets, pad) for i in range(n_players)]

    def _br_structure(self, i, offsets, pad):
        """Index tables for player i's best-response recursion."""
        tree = self.tree
        n_inf = self.n_info_sets[i]
        T = len(tree.paths)
        depth = max(len(p) for p in tree.paths)
        opp_idx = np.full((T, depth), pad)
        last_slot = np.zeros((2 * n_inf, T))
        root_terminal = np.zeros(T)
        children = np.zeros((2 * n_inf, n_inf))
        is_root = np.zeros(n_inf)
        parent = {}
        for z, path in enumerate(tree.paths):
            own = [(s, a) for (j, s, a) in path if j == i]
            for k, (j, s, a) in enumerate(path):
                if j != i:
                    opp_idx[z, k] = offsets[j] + 2 * s + a
            if own:
                s, a = own[-1]
                last_slot[2 * s + a, z] = 1.0
            else:
                root_terminal[z] = 1.0
            for (s, a), (s2, _) in zip(own[:-1], own[1:]):
                parent[s2] = 2 * s + a
            if own:
                parent.setdefault(own[0][0], None)
        for s, slot in parent.items():
            if slot is None:
                is_root[s] = 1.0
            else:
                children[slot, s] = 1.0
        levels = max(sum(1 for (j, _, _) in p if j == i) for p in tree.paths)
        return dict(
            opp_idx=jnp.asarray(opp_idx), last_slot=jnp.asarray(last_slot),
            root_terminal=jnp.asarray(root_terminal), children=jnp.asarray(children),
            is_root=jnp.asarray(is_root), levels=levels,
        )

    def _flat_probs(self, strategies):
        return jnp.concatenate([jnp.asarray(s).reshape(-1) for s in strategies] + [jnp.ones(1)])

    def reach_weights(self, strategies):
        probs = self._flat_probs(strategies)
        return self._chance * jnp.prod(probs[self._path_idx], axis=1)

    def utilities_from_strategies(self, strategies):
        return self.reach_weights(strategies) @ self._payoffs

    def action_values(self, strategies, i):
        """Best-response action values ``Q[info_set, action]`` for player ``i``."""
        st = self._br[i]
        probs = self._flat_probs(strategies)
        contrib = self._chance * jnp.prod(probs[st["opp_idx"]], axis=1) * self._payoffs[:, i]
        immediate = st["last_slot"] @ contrib
        V = jnp.zeros(self.n_info_sets[i])
        for _ in range(st["levels"]):
            Q = (immediate + st["children"] @ V).reshape(-1, 2)
            V = jnp.max(Q, axis=1)
        return Q, V, st["root_terminal"] @ contrib + st["is_root"] @ V

    def best_response(self, strategies, i):
        Q, _, value = self.action_values(strategies, i)
        a = jnp.argmax(Q, axis=1)
        pure = jnp.zeros_like(Q).at[jnp.arange(Q.shape[0]), a].set(1.0)
        return value, pure

    def tied_best_response(self, strategies, i, tol=TIE_TOL):
        Q, _, _ = self.action_values(strategies, i)
        tied = (Q >= jnp.max(Q, axis=1, keepdims=True) - tol).astype(Q.dtype)
        return tied / jnp.sum(tied, axis=1, keepdims=True)

    def info_set_labels(self, i):
        return [f"{CARD_NAMES[c]}:{h or '-'}" for c, h in self.tree.info_sets[i]]

    def pure_strategies(self, i):
        """All pure behavioral strategies of player ``i`` as one-hot arrays."""
        n = self.n_info_sets[i]
        for bits in itertools.product(range(2), repeat=n):
            yield np.eye(2)[list(bits)]


def make_kuhn(n_players: int = 2) -> KuhnPoker:
    if n_players not in (2, 3):
        raise ValueError("Kuhn poker needs 2 or 3 players")
    return KuhnPoker(n_players)
