"""Baseline game dynamics.

Each method defines a vector field ``xdot`` built from the simultaneous
gradient ``v`` and its Jacobian ``J``. Steps are explicit Euler,
``x' = x + eta * xdot``, except OP (which adds ``gamma (v - v_prev)``) and
EDA (extragradient on the profile and a deviation profile).

The ``field_*`` functions are the public, eager entry points: they return
numpy arrays and raise if the field is not finite. Inside compiled loops
the ``_field`` functions are used instead.
"""
from __future__ import annotations

import jax
import jax.numpy as jnp
import numpy as np

from .approxed import _phi
from .autodiff import _jacobian, _sim_grad
from .exceptions import MethodError, UnsupportedMethodError
from .methods import Method, MethodConfig, register

PCGD_MAX_DIM = 2000
PCGD_MAX_COND = 1e12


def _v_and_jvp(game, x, key, t):
    return jax.jvp(lambda z: _sim_grad(game, z, key), (x,), (t,))


def _v_and_vjp(game, x, key):
    return jax.vjp(lambda z: _sim_grad(game, z, key), x)


def _offdiag_jvp(game, x, key, v):
    """``J_o v``: J times v with each player's own block of J removed."""
    _, Jv = _v_and_jvp(game, x, key, v)
    out = Jv
    for m in game.layout.masks:
        _, Jv_i = _v_and_jvp(game, x, key, v * m)
        out = out - m * Jv_i
    return out


def _f_sg(game, x, key, gamma):
    return _sim_grad(game, x, key)


def _f_eg(game, x, key, gamma):
    v = _sim_grad(game, x, key)
    return _sim_grad(game, x + gamma * v, key)


def _f_co(game, x, key, gamma):
    v, pullback = _v_and_vjp(game, x, key)
    return v - gamma * pullback(v)[0]


def _f_sga(game, x, key, gamma):
    v, pullback = _v_and_vjp(game, x, key)
    _, Jv = _v_and_jvp(game, x, key, v)
    JTv = pullback(v)[0]
    # J_a^T v = (J^T v - J v) / 2
    return v - gamma * 0.5 * (JTv - Jv)


def _f_sla(game, x, key, gamma):
    v, Jv = _v_and_jvp(game, x, key, _sim_grad(game, x, key))
    return v + gamma * Jv


def _f_la(game, x, key, gamma):
    v = _sim_grad(game, x, key)
    return v + gamma * _offdiag_jvp(game, x, key, v)


def _lola_shaping(game, x, key):
    """Block i: ``sum_{j != i} (dv_j/dx_i)^T grad_{x_j} u_i``."""
    _, pullback = _v_and_vjp(game, x, key)
    grads = jax.jacrev(lambda z: game.utilities(z, key))(x)
    masks = game.layout.masks
    out = jnp.zeros_like(x)
    for i, m in enumerate(masks):
        cot = grads[i] * (1.0 - m)
        out = out + m * pullback(cot)[0]
    return out


def _f_lola(game, x, key, gamma):
    return _f_la(game, x, key, gamma) + gamma * _lola_shaping(game, x, key)


def _f_pcgd(game, x, key, gamma):
    v = _sim_grad(game, x, key)
    J = _jacobian(game, x, key)
    J_o = J * (1.0 - jnp.asarray(game.layout.diagonal_blocks))
    return jnp.linalg.solve(jnp.eye(x.shape[0]) - gamma * J_o, v)


def _f_gni(game, x, key, gamma):
    def local_ni(z):
        return _phi(game, z, z + gamma * _sim_grad(game, z, key), key)

    return -jax.grad(local_ni)(x)


def _f_ed(game, x, key, gamma):
    strat = [jax.lax.stop_gradient(s) for s in game.strategies(x)]
    brs = [game.tied_best_response(strat, i) for i in range(game.n_players)]

    def ni_at_best_responses(z):
        s = game.strategies(z)
        u = game.utilities_from_strategies(s)
        total = 0.0
        for i in range(game.n_players):
            dev = s[:i] + [brs[i]] + s[i + 1:]
            total = total + game.utilities_from_strategies(dev)[i] - u[i]
        return total

    return -jax.grad(ni_at_best_responses)(x)


_FIELDS = {
    "sg": _f_sg, "eg": _f_eg, "co": _f_co, "sga": _f_sga, "sla": _f_sla, "la": _f_la,
    "lola": _f_lola, "pcgd": _f_pcgd, "gni": _f_gni, "ed": _f_ed,
}


class _FieldMethod(Method):
    def step(self, game, x, state, key, eta, cfg):
        return x + eta * _FIELDS[self.id](game, x, key, cfg.gamma), state


def _make(method_id, **attrs):
    cls = type(method_id.upper(), (_FieldMethod,), {"id": method_id, **attrs})
    return register(cls)


for _mid in ("sg", "eg", "co", "sga", "sla", "la", "lola", "gni"):
    _make(_mid)


@register
class ED(_FieldMethod):
    id = "ed"
    needs_oracle = True


@register
class PCGD(_FieldMethod):
    id = "pcgd"

    def check(self, game):
        if game.dim > PCGD_MAX_DIM:
            raise UnsupportedMethodError(
                f"pcgd solves a dense {game.dim}x{game.dim} system; the cap is {PCGD_MAX_DIM}"
            )


@register
class OP(Method):
    """``x' = x + eta v + gamma (v - v_prev)``; the first step is plain SG."""

    id = "op"

    def init_state(self, game, x, key, cfg):
        return {"v_prev": jnp.zeros_like(x), "first": jnp.asarray(True)}

    def step(self, game, x, state, key, eta, cfg):
        v = _sim_grad(game, x, key)
        v_prev = jnp.where(state["first"], v, state["v_prev"])
        x = x + eta * v + cfg.gamma * (v - v_prev)
        return x, {"v_prev": v, "first": jnp.asarray(False)}


def _eda_update(game, x, y, key, eta, gamma):
    def grads(x, y):
        gx, gy = jax.grad(lambda a, b: _phi(game, a, b, key), argnums=(0, 1))(x, y)
        return gx, gy

    gx, gy = grads(x, y)
    x_mid, y_mid = x - gamma * gx, y + gamma * gy
    gx, gy = grads(x_mid, y_mid)
    return x - eta * gx, y + eta * gy


@register
class EDA(Method):
    """Extragradient descent-ascent on ``min_x max_y phi(x, y)``.

    ``y`` is a full deviation profile. The extrapolation step uses ``gamma``,
    like EG; the update from the original point uses ``eta``.
    """

    id = "eda"

    def init_state(self, game, x, key, cfg):
        return {"y": x}

    def step(self, game, x, state, key, eta, cfg):
        x, y = _eda_update(game, x, state["y"], key, eta, cfg.gamma)
        return x, {"y": y}


# -- eager public API --------------------------------------------------------


def _eager(method_id, game, x, gamma, key):
    x = jnp.asarray(x, dtype=jnp.float64)
    out = np.asarray(_FIELDS[method_id](game, x, key, gamma))
    if not np.all(np.isfinite(out)):
        raise MethodError(f"{method_id}: non-finite field at index {int(np.flatnonzero(~np.isfinite(out))[0])}")
    return out


def field_sg(game, x, key=None):
    """Simultaneous gradient ``v``."""
    return _eager("sg", game, x, 0.0, key)


def field_eg(game, x, gamma=0.1, key=None):
    """``v`` evaluated at the look-ahead point ``x + gamma v``."""
    return _eager("eg", game, x, gamma, key)


def field_co(game, x, gamma=0.1, key=None):
    """``(I - gamma J^T) v``."""
    return _eager("co", game, x, gamma, key)


def field_sga(game, x, gamma=0.1, key=None):
    """``(I - gamma J_a^T) v``."""
    return _eager("sga", game, x, gamma, key)


def field_sla(game, x, gamma=0.1, key=None):
    """``(I + gamma J) v``."""
    return _eager("sla", game, x, gamma, key)


def field_la(game, x, gamma=0.1, key=None):
    """``(I + gamma J_o) v``."""
    return _eager("la", game, x, gamma, key)


def field_lola(game, x, gamma=0.1, key=None):
    """LA plus the opponent-shaping term.

    The shaping term matches the gradient of the look-ahead objective
    ``u_i(x_i, x_-i + gamma v_-i(x))`` to first order in ``gamma``.
    """
    return _eager("lola", game, x, gamma, key)


def field_pcgd(game, x, gamma=0.1, key=None):
    """``(I - gamma J_o)^{-1} v`` via a dense solve."""
    if game.dim > PCGD_MAX_DIM:
        raise MethodError(f"pcgd: dimension {game.dim} exceeds the cap of {PCGD_MAX_DIM}")
    x = jnp.asarray(x, dtype=jnp.float64)
    J = np.asarray(_jacobian(game, x, key))
    A = np.eye(game.dim) - gamma * np.where(game.layout.diagonal_blocks > 0, 0.0, J)
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > PCGD_MAX_COND:
        raise MethodError(f"pcgd: ill-conditioned system (condition number {cond:.3g})")
    return _eager("pcgd", game, x, gamma, key)


def field_ed(game, x, key=None):
    """``-grad_x phi(x, y*)`` with exact best responses ``y*`` held fixed.

    Tied actions share the best-response mass, so the field vanishes at
    equilibria.
    """
    if not getattr(game, "has_oracle", False):
        raise UnsupportedMethodError(f"ed needs an exact best-response oracle; {game.name} has none")
    return _eager("ed", game, x, 0.0, key)


def field_gni(game, x, gamma=0.1, key=None):
    """``-grad_x phi(x, x + gamma v(x))``, differentiating through ``v``."""
    return _eager("gni", game, x, gamma, key)


def field_op(game, x, v_prev=None, gamma=0.1, eta=1e-3, key=None):
    """Effective OP velocity ``v + (gamma / eta) (v - v_prev)``."""
    v = field_sg(game, x, key)
    if v_prev is None:
        return v
    return v + (gamma / eta) * (v - np.asarray(v_prev))


def step_eda(game, x, y, cfg: MethodConfig, key=None):
    x_new, y_new = _eda_update(game, jnp.asarray(x, dtype=jnp.float64),
                               jnp.asarray(y, dtype=jnp.float64), key, cfg.eta, cfg.gamma)
    x_new, y_new = np.asarray(x_new), np.asarray(y_new)
    if not (np.all(np.isfinite(x_new)) and np.all(np.isfinite(y_new))):
        raise MethodError("eda: non-finite midpoint or update")
    return x_new, y_new


def step(game, x, cfg: MethodConfig, state=None, key=None):
    """Eager single step of any registered method.

    Returns ``(x', state')``. Pass ``state=None`` to initialize.
    """
    from .methods import get_method

    method = get_method(cfg.method)
    method.check(game)
    x = jnp.asarray(x, dtype=jnp.float64)
    if key is None:
        key = jax.random.PRNGKey(0)
    if state is None:
        state = method.init_state(game, x, jax.random.fold_in(key, 1), cfg)
    x_new, state = method.step(game, x, state, key, cfg.eta, cfg)
    x_new = np.asarray(x_new)
    if not np.all(np.isfinite(x_new)):
        raise MethodError(f"{cfg.method}: non-finite update")
    return x_new, state
