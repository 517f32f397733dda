"""Numerical property suite behind ``nashdyn check``.

Each check returns a :class:`CheckResult`; the heavier ones take a size
argument so the CLI can run a quick version and the test suite a full one.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache, partial

import jax
import jax.numpy as jnp
import numpy as np

from . import dynamics as dyn
from . import evaluation as ev
from .approxed import BestResponseFunction, _phi, ni, rank_weights
from .autodiff import _sim_grad, fd_grad
from .games import GAME_IDS, PolynomialGame, make_game
from .games.base import FiniteGame
from .games.kuhn import KuhnPoker

FD_STEP = 1e-5


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def _key(seed=0):
    return jax.random.PRNGKey(seed)


@lru_cache(maxsize=None)
def _batched_init(game):
    return jax.jit(jax.vmap(game.init_params))


def random_profiles(game, n: int, seed: int = 0) -> list:
    """``n`` draws from the game's initial distribution."""
    return list(_batched_init(game)(jax.random.split(_key(seed), n)))


def operator_games() -> list:
    return [make_game("saddle"), PolynomialGame((2, 2), seed=3)]


# -- operator identities -----------------------------------------------------


def co_identity_error(game, x, key=None) -> float:
    """``|J^T v - grad(|v|^2 / 2)|`` with the gradient taken by finite differences."""
    x = jnp.asarray(x, dtype=jnp.float64)
    v, pullback = jax.vjp(lambda z: _sim_grad(game, z, key), x)
    jtv = np.asarray(pullback(v)[0])
    fd = fd_grad(lambda z: 0.5 * jnp.sum(_sim_grad(game, z, key) ** 2), np.asarray(x), FD_STEP)
    return float(np.max(np.abs(jtv - fd)))


def discrepancy(game, x, pair: tuple[str, str], gamma: float, key=None) -> float:
    fa = dyn._FIELDS[pair[0]](game, jnp.asarray(x), key, gamma)
    fb = dyn._FIELDS[pair[1]](game, jnp.asarray(x), key, gamma)
    return float(jnp.linalg.norm(fa - fb))


EXACT_ZERO = 1e-13


def gamma_slope(game, x, pair, gammas=(1e-1, 1e-2, 1e-3)) -> float:
    """Log-log slope of the discrepancy between two fields against ``gamma``.

    Returns ``inf`` when the fields agree to rounding at every ``gamma``
    (the discrepancy is then ``C gamma^2`` with ``C = 0``).
    """
    d = np.array([discrepancy(game, x, pair, g) for g in gammas])
    if np.all(d < EXACT_ZERO):
        return float("inf")
    return float(np.polyfit(np.log(gammas), np.log(np.maximum(d, 1e-300)), 1)[0])


def slope_ok(slope: float, target: float = 2.0, tol: float = 0.2) -> bool:
    return slope == float("inf") or abs(slope - target) <= tol


# -- gradient checks ---------------------------------------------------------
# Field and scalar are module-level functions so each (field, game) pair
# compiles once and is reused across profiles.


MAX_FD_DIRECTIONS = 64
KINK_TOL = 1e-7


def fd_directions(dim: int, seed: int = 0) -> np.ndarray:
    """Coordinate axes for small problems, otherwise fixed random unit directions."""
    if dim <= MAX_FD_DIRECTIONS:
        return np.eye(dim)
    d = np.random.default_rng(seed).standard_normal((MAX_FD_DIRECTIONS, dim))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def _directional_error(f, grad, z, D):
    """Max ``|<grad, u> - central difference along u|`` over rows ``u`` of ``D``.

    Each direction is differenced with steps ``h`` and ``h / 2``. On a smooth
    function the two agree to ``O(h^2)``; when they do not, the segment
    straddles a kink of ``f`` (a ``min`` switching branch, say) and the
    direction is left out and counted.
    """
    h = FD_STEP * (1.0 + jnp.max(jnp.abs(z)))
    n = D.shape[0]
    # a single batched call keeps one copy of f in the compiled program
    vals = jax.vmap(f)(jnp.concatenate([z + h * D, z - h * D, z + 0.5 * h * D, z - 0.5 * h * D]))
    wide = (vals[:n] - vals[n:2 * n]) / (2.0 * h)
    narrow = (vals[2 * n:3 * n] - vals[3 * n:]) / h
    kink = jnp.abs(wide - narrow) > KINK_TOL * (1.0 + jnp.abs(narrow))
    err = jnp.where(kink, 0.0, jnp.abs(D @ grad - narrow))
    return jnp.max(err), jnp.sum(kink)


# these programs run a handful of times, so spend little time optimizing them
_CHEAP_COMPILE = {"xla_backend_optimization_level": 0, "xla_llvm_disable_expensive_passes": True}


def _field_error(field, scalar, game, z, D, *args):
    return _directional_error(lambda p: scalar(game, p, z, *args), field(game, z, *args), z, D)


def _utility_errors(game, x, D, key):
    out = []
    for i in range(game.n_players):
        def u(z, i=i):
            return game.utilities(z, key)[i]

        out.append(_directional_error(u, jax.grad(u)(x), x, D))
    return jnp.max(jnp.stack([e for e, _ in out])), sum(k for _, k in out)


@partial(jax.jit, static_argnums=(0,), compiler_options=_CHEAP_COMPILE)
def _utility_error(game, x, D, key):
    return _utility_errors(game, x, D, key)


def utility_gradient_error(game, x, key) -> tuple[float, int]:
    """Worst error over players of ``grad u_i`` against central differences, and kinks skipped."""
    x = jnp.asarray(x, dtype=jnp.float64)
    e, k = _utility_error(game, x, jnp.asarray(fd_directions(x.size)), key)
    return float(e), int(k)


def _sg_field(game, z, key):
    return _sim_grad(game, z, key)


def _sg_scalar(game, p, z, key):
    # gradient at p = z is the stacked own-parameter gradients
    return sum(game.deviation_utility(z, i, game.layout.block(p, i), key) for i in range(game.n_players))


def _jtv_field(game, z, key):
    v, pullback = jax.vjp(lambda q: _sim_grad(game, q, key), z)
    return pullback(v)[0]


def _half_sq_norm(game, p, z, key):
    return 0.5 * jnp.sum(_sim_grad(game, p, key) ** 2)


def _gni_field(game, z, key, gamma):
    return -dyn._f_gni(game, z, key, gamma)


def _local_ni(game, p, z, key, gamma):
    return _phi(game, p, p + gamma * _sim_grad(game, p, key), key)


def _eda_field(game, z, key):
    d = game.dim
    gx, gy = jax.grad(lambda a, b: _phi(game, a, b, key), argnums=(0, 1))(z[:d], z[d:])
    return jnp.concatenate([gx, gy])


def _eda_scalar(game, p, z, key):
    return _phi(game, p[:game.dim], p[game.dim:], key)


def _brf_net(game):
    return BestResponseFunction(game.dim, 8)


def _brf_field(game, z, key):
    brf, d = _brf_net(game), game.dim
    gx, gw = jax.grad(lambda a, b: _phi(game, a, brf(b, a), key), argnums=(0, 1))(z[:d], z[d:])
    return jnp.concatenate([gx, gw])


def _brf_scalar(game, p, z, key):
    brf, d = _brf_net(game), game.dim
    return _phi(game, p[:d], brf(p[d:], p[:d]), key)


def _ed_field(game, z, key):
    return -dyn._f_ed(game, z, key, 0.0)


def _ed_scalar(game, p, z, key):
    strat = [jax.lax.stop_gradient(t) for t in game.strategies(z)]
    brs = [game.tied_best_response(strat, i) for i in range(game.n_players)]
    s = game.strategies(p)
    u = game.utilities_from_strategies(s)
    return sum(game.utilities_from_strategies(s[:i] + [brs[i]] + s[i + 1:])[i] - u[i]
               for i in range(game.n_players))


@partial(jax.jit, static_argnums=(0,), compiler_options=_CHEAP_COMPILE)
def _all_field_errors(game, x, key, gamma):
    # one program per game: compiling the fields separately costs far more
    y = x + 0.1 * jax.random.normal(_key(11), x.shape)
    w = _brf_net(game).init(_key(12))
    D1 = jnp.asarray(fd_directions(x.size))
    out = {
        "utility": _utility_errors(game, x, D1, key),
        "sg": _field_error(_sg_field, _sg_scalar, game, x, D1, key),
        "co": _field_error(_jtv_field, _half_sq_norm, game, x, D1, key),
        "gni": _field_error(_gni_field, _local_ni, game, x, D1, key, gamma),
        "eda": _field_error(_eda_field, _eda_scalar, game, jnp.concatenate([x, y]),
                            jnp.asarray(fd_directions(2 * x.size)), key),
        "brf": _field_error(_brf_field, _brf_scalar, game, jnp.concatenate([x, w]),
                            jnp.asarray(fd_directions(x.size + w.size)), key),
    }
    if isinstance(game, FiniteGame):
        out["ed"] = _field_error(_ed_field, _ed_scalar, game, x, D1, key)
    return out


def field_gradient_errors(game, x, key, gamma: float = 0.1) -> dict:
    """Utilities and the fields that are (minus) gradients of a scalar, against central differences.

    Returns ``{name: (max error, kinked directions skipped)}``; ``"utility"``
    covers every player's utility gradient.
    """
    out = _all_field_errors(game, jnp.asarray(x, dtype=jnp.float64), key, gamma)
    return {k: (float(e), int(n)) for k, (e, n) in out.items()}


# -- oracle cross-checks -----------------------------------------------------


def simplex_grid(n_actions: int, resolution: int = 100) -> np.ndarray:
    """All points of the simplex with coordinates in multiples of ``1/resolution``."""
    pts = [c for c in itertools.combinations_with_replacement(range(n_actions), resolution)]
    out = np.zeros((len(pts), n_actions))
    for r, c in enumerate(pts):
        out[r] = np.bincount(c, minlength=n_actions)
    return out / resolution


def grid_exploitability(game, x, resolution: int = 100) -> float:
    """Exploitability with each best response taken over a simplex grid."""
    strat = [np.asarray(s) for s in game.strategies(jnp.asarray(x))]
    u = np.asarray(game.utilities_from_strategies([jnp.asarray(s) for s in strat]))
    total = 0.0
    for i in range(game.n_players):
        grid = jnp.asarray(simplex_grid(len(strat[i]), resolution))

        def val(p, i=i):
            s = [jnp.asarray(t) for t in strat]
            s[i] = p
            return game.utilities_from_strategies(s)[i]

        total += float(jnp.max(jax.vmap(val)(grid))) - u[i]
    return total


def kuhn_enumeration_value(game: KuhnPoker, x, i: int) -> float:
    """Best response value by enumerating every pure strategy of player ``i``."""
    strat = game.strategies(jnp.asarray(x))
    pure = jnp.asarray(np.stack(list(game.pure_strategies(i))))

    def val(p):
        s = list(strat)
        s[i] = p
        return game.utilities_from_strategies(s)[i]

    return float(jnp.max(jax.vmap(val)(pure)))


@lru_cache(maxsize=None)
def _permutations(n: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(n))))


def brute_force_assignment(cost) -> float:
    """Minimum assignment cost by trying every permutation."""
    cost = np.asarray(cost, dtype=float)
    perms = _permutations(cost.shape[0])
    return float(cost[np.arange(cost.shape[0]), perms].sum(axis=1).min())


# -- the suite ---------------------------------------------------------------


def gradient_sweep(game_ids, n_profiles: int, batch_size: int = 16) -> dict:
    """Worst gradient error per check name over games and random profiles.

    Returns ``{name: (max error, game id where it occurred, kinks skipped)}``.
    """
    out = {}
    for gid in game_ids:
        g = make_game(gid, batch_size=batch_size)
        # profiles one at a time: a vmapped program compiles no faster and runs slower
        for k, x in enumerate(random_profiles(g, n_profiles, seed=1)):
            for name, (e, n) in field_gradient_errors(g, x, _key(k)).items():
                worst, where, kinks = out.get(name, (0.0, "", 0))
                if e >= worst:
                    worst, where = e, gid
                out[name] = (worst, where, kinks + n)
    return out


def run_checks(n_profiles: int = 3) -> list[CheckResult]:
    results = []

    errs = [co_identity_error(g, x) for g in operator_games() for x in random_profiles(g, n_profiles)]
    results.append(CheckResult("co-identity", max(errs) < 1e-6, f"max error {max(errs):.2e}"))

    for pair in (("pcgd", "la"), ("sla", "eg")):
        slopes = [gamma_slope(g, random_profiles(g, 1, 5)[0], pair) for g in operator_games()]
        ok = all(slope_ok(s) for s in slopes)
        results.append(CheckResult(f"gamma^2 {pair[0]}~{pair[1]}", ok,
                                   "slopes " + ", ".join(f"{s:.3f}" for s in slopes)))

    sweep = gradient_sweep(GAME_IDS, n_profiles)
    for name, (worst, where, kinks) in sorted(sweep.items()):
        results.append(CheckResult(f"{name} gradient", worst < 1e-5,
                                   f"max error {worst:.2e} ({where}), {kinks} kinked directions skipped"))

    vals = []
    for gid in ("saddle", "mp3", "kuhn2", "gg"):
        g = make_game(gid, batch_size=16)
        for x in random_profiles(g, n_profiles, seed=3):
            vals.append(abs(ni(g, x, x, _key(0)).phi))
    results.append(CheckResult("phi(x, x) = 0", max(vals) < 1e-12, f"max |phi| {max(vals):.1e}"))

    vals = []
    for gid in ("mp2", "mp3", "rps3", "rps4", "shapley"):
        g = make_game(gid)
        vals.append(ev.exact_exploitability(g, jnp.zeros(g.dim)).total)
    kuhn = make_game("kuhn2")
    vals.append(ev.exact_exploitability(kuhn, kuhn_equilibrium_logits(kuhn)).total)
    results.append(CheckResult("exploitability at known equilibria", max(vals) < 1e-9,
                               f"max {max(vals):.1e}"))

    rng = np.random.default_rng(0)
    ok = True
    for _ in range(20):
        v = rng.standard_normal(7)
        ok &= np.array_equal(rank_weights(v).ranks, rank_weights(2 * v + 7).ranks)
        ok &= np.array_equal(rank_weights(v).ranks, rank_weights(np.exp(v)).ranks)
    results.append(CheckResult("rank weights monotone invariant", bool(ok), "20 random draws"))

    errs = []
    for _ in range(10):
        c = rng.random((6, 6))
        errs.append(abs(ev.assignment_solve(c).cost - brute_force_assignment(c)))
    results.append(CheckResult("assignment optimality", max(errs) < 1e-9, "10 random 6x6 matrices"))

    fracs = [ev.midpoint_convexity_check(make_game(g), 100, rng=0) for g in ("mp2", "rps3")]
    results.append(CheckResult("midpoint convexity", min(fracs) == 1.0,
                               "fractions " + ", ".join(f"{f:.2f}" for f in fracs)))
    return results


def kuhn_equilibrium_logits(game: KuhnPoker, alpha: float = 1.0 / 3.0) -> np.ndarray:
    """Logits of the classic 2-player Kuhn equilibrium family (first player bluffs with J at rate alpha)."""
    if game.n_players != 2:
        raise ValueError("closed-form equilibrium only for 2 players")
    p_bet = {
        ("J", "-"): alpha, ("Q", "-"): 0.0, ("K", "-"): 3 * alpha,
        ("J", "pb"): 0.0, ("Q", "pb"): alpha + 1.0 / 3.0, ("K", "pb"): 1.0,
        ("J", "p"): 1.0 / 3.0, ("Q", "p"): 0.0, ("K", "p"): 1.0,
        ("J", "b"): 0.0, ("Q", "b"): 1.0 / 3.0, ("K", "b"): 1.0,
    }
    blocks = []
    for i in range(2):
        logits = []
        for label in game.info_set_labels(i):
            card, hist = label.split(":")
            p = min(max(p_bet[(card, hist)], 1e-15), 1 - 1e-15)
            # second action (bet / call) gets logit log(p / (1 - p))
            logits.extend([0.0, float(np.log(p) - np.log1p(-p))])
        blocks.append(logits)
    return np.concatenate(blocks)
