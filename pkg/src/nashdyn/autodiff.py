"""Gradients, game vector fields and their Jacobians.

Everything here works on flat parameter vectors. A :class:`BlockLayout`
records which slice of the vector belongs to which player.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import jax
import jax.numpy as jnp
import numpy as np

from .exceptions import NonFiniteError


@dataclass(frozen=True)
class BlockLayout:
    """Per-player blocks tiling a flat parameter vector."""

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 1 for d in dims):
            raise ValueError(f"block dimensions must be positive, got {self.dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def n_blocks(self) -> int:
        return len(self.dims)

    @cached_property
    def offsets(self) -> tuple[int, ...]:
        return tuple(int(o) for o in np.concatenate([[0], np.cumsum(self.dims)[:-1]]))

    @property
    def size(self) -> int:
        return int(sum(self.dims))

    @property
    def blocks(self) -> list[tuple[int, int, int]]:
        """(player, offset, length) triples in player order."""
        return [(i, o, d) for i, (o, d) in enumerate(zip(self.offsets, self.dims))]

    def slice(self, i: int) -> slice:
        return slice(self.offsets[i], self.offsets[i] + self.dims[i])

    def block(self, x, i: int):
        return x[..., self.slice(i)]

    def split(self, x) -> list:
        return [self.block(x, i) for i in range(self.n_blocks)]

    def join(self, blocks: Sequence) -> jnp.ndarray:
        return jnp.concatenate([jnp.asarray(b) for b in blocks], axis=-1)

    def replace(self, x, i: int, y_i):
        return x.at[..., self.slice(i)].set(y_i)

    @cached_property
    def masks(self) -> np.ndarray:
        """(n_blocks, size) 0/1 matrix selecting each block."""
        m = np.zeros((self.n_blocks, self.size))
        for i in range(self.n_blocks):
            m[i, self.slice(i)] = 1.0
        return m

    @cached_property
    def diagonal_blocks(self) -> np.ndarray:
        """(size, size) 0/1 matrix that is 1 inside each player's own block."""
        return self.masks.T @ self.masks


def _raise_if_nonfinite(values, what: str = "value"):
    arr = np.asarray(values)
    if not np.all(np.isfinite(arr)):
        loc = tuple(int(c) for c in np.argwhere(~np.isfinite(arr))[0]) if arr.ndim else ()
        raise NonFiniteError(f"non-finite {what} at index {loc}", index=loc)
    return values


def ensure_finite(values, what: str = "value"):
    """Return ``values`` unchanged, raising :class:`NonFiniteError` on NaN/inf."""
    return _raise_if_nonfinite(values, what)


def fd_grad(f: Callable, x, step: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient of scalar ``f`` at ``x``.

    The step for coordinate ``c`` is ``step * (1 + |x_c|)``. ``f`` must be
    traceable; all perturbed points are evaluated in one vectorized call.
    """
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return np.zeros_like(x)
    h = step * (1.0 + np.abs(x))
    E = np.diag(h)
    fv = jax.vmap(f)
    plus = np.asarray(fv(jnp.asarray(x + E)))
    minus = np.asarray(fv(jnp.asarray(x - E)))
    return (plus - minus) / (2.0 * h)


def grad(f: Callable, x, mode: str = "exact", fd_step: float = 1e-5) -> np.ndarray:
    """Gradient of a scalar function built from jax primitives.

    ``mode`` is ``"exact"`` (reverse mode) or ``"finite-difference"``.
    """
    x = jnp.asarray(x, dtype=jnp.float64)
    value = f(x)
    _raise_if_nonfinite(value, "function value")
    if mode == "exact":
        g = np.asarray(jax.grad(f)(x))
    elif mode == "finite-difference":
        g = fd_grad(f, x, fd_step)
    else:
        raise ValueError(f"unknown gradient mode {mode!r}")
    return _raise_if_nonfinite(g, "gradient")


def pseudogradient(f: Callable, x, sigma: float, m: int, key, max_retries: int = 10) -> np.ndarray:
    """Monte-Carlo gradient of ``f`` smoothed by a Gaussian of scale ``sigma``.

    Uses antithetic pairs, ``(f(x + s e) - f(x - s e)) e / (2 s)``, averaged over
    ``m`` draws. Draws hitting a non-finite value are redrawn up to
    ``max_retries`` times each.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if m < 1:
        raise ValueError("m must be at least 1")
    x = jnp.asarray(x, dtype=jnp.float64)
    fv = jax.jit(jax.vmap(f))
    total = np.zeros(x.shape)
    accepted = 0
    retries = 0
    while accepted < m:
        key, sub = jax.random.split(key)
        need = m - accepted
        eps = np.asarray(jax.random.normal(sub, (need,) + x.shape))
        plus = np.asarray(fv(x + sigma * eps))
        minus = np.asarray(fv(x - sigma * eps))
        ok = np.isfinite(plus) & np.isfinite(minus)
        if not ok.all():
            retries += 1
            if retries > max_retries:
                bad = int(np.flatnonzero(~ok)[0])
                raise NonFiniteError(
                    f"non-finite function value at perturbed point after {max_retries} retries",
                    index=(bad,),
                )
        total += ((plus[ok] - minus[ok])[:, None] * eps[ok]).sum(axis=0) / (2.0 * sigma)
        accepted += int(ok.sum())
    return total / m


def check_gradient(f: Callable, x, step: float = 1e-6) -> float:
    """Max abs difference between reverse-mode and central-difference gradients."""
    exact = grad(f, x, "exact")
    approx = fd_grad(f, x, step)
    return float(np.max(np.abs(exact - approx))) if exact.size else 0.0


@dataclass(frozen=True)
class GradientOracle:
    """Selectable gradient source for the public gradient helpers."""

    mode: str = "exact-reverse-mode"
    fd_step: float = 1e-5
    smoothing_sigma: float = 1e-2
    mc_samples: int = 64

    def __post_init__(self):
        if self.mode not in ("exact-reverse-mode", "finite-difference", "pseudogradient"):
            raise ValueError(f"unknown oracle mode {self.mode!r}")
        if self.fd_step <= 0 or self.smoothing_sigma <= 0 or self.mc_samples < 1:
            raise ValueError("fd_step and smoothing_sigma must be > 0, mc_samples >= 1")

    def grad(self, f: Callable, x, key=None) -> np.ndarray:
        if self.mode == "exact-reverse-mode":
            return grad(f, x, "exact")
        if self.mode == "finite-difference":
            return grad(f, x, "finite-difference", self.fd_step)
        if key is None:
            key = jax.random.PRNGKey(0)
        return pseudogradient(f, x, self.smoothing_sigma, self.mc_samples, key)


# -- game vector fields ------------------------------------------------------
# The underscore versions are traceable and used inside jitted loops.


def _sim_grad(game, x, key):
    jac = jax.jacrev(lambda z: game.utilities(z, key))(x)
    return jnp.sum(jac * game.layout.masks, axis=0)


def _jacobian(game, x, key):
    return jax.jacfwd(lambda z: _sim_grad(game, z, key))(x)


def simultaneous_gradient(game, x, key=None, oracle: GradientOracle | None = None) -> np.ndarray:
    """Stack of each player's utility gradient w.r.t. its own parameters."""
    x = jnp.asarray(x, dtype=jnp.float64)
    _raise_if_nonfinite(game.utilities(x, key), "utility")
    if oracle is None or oracle.mode == "exact-reverse-mode":
        return ensure_finite(np.asarray(_sim_grad(game, x, key)), "simultaneous gradient")
    blocks = []
    for i in range(game.n_players):
        sl = game.layout.slice(i)

        def u_i(y, i=i):
            return game.utilities(game.layout.replace(x, i, y), key)[i]

        blocks.append(oracle.grad(u_i, x[sl], key))
    return ensure_finite(np.concatenate(blocks), "simultaneous gradient")


def field_jacobian(game, x, key=None, mode: str = "exact", fd_step: float = 1e-5) -> np.ndarray:
    """Jacobian of the simultaneous gradient, ``J[r, c] = dv_r / dx_c``."""
    x = jnp.asarray(x, dtype=jnp.float64)
    if mode == "exact":
        J = np.asarray(_jacobian(game, x, key))
    elif mode == "finite-difference":
        v = jax.jit(lambda z: _sim_grad(game, z, key))
        x_np = np.asarray(x)
        J = np.zeros((x_np.size, x_np.size))
        for c in range(x_np.size):
            h = fd_step * (1.0 + abs(x_np[c]))
            e = np.zeros_like(x_np)
            e[c] = h
            J[:, c] = (np.asarray(v(x_np + e)) - np.asarray(v(x_np - e))) / (2.0 * h)
    else:
        raise ValueError(f"unknown jacobian mode {mode!r}")
    return ensure_finite(J, "jacobian entry")


def jacobian_parts(J, layout: BlockLayout | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Antisymmetric part and per-player off-diagonal part of ``J``.

    Without a layout every coordinate is its own block, so the off-diagonal
    part is ``J`` with its diagonal zeroed.
    """
    J = np.asarray(J, dtype=float)
    if J.ndim != 2 or J.shape[0] != J.shape[1]:
        raise ValueError(f"J must be square, got shape {J.shape}")
    J_a = 0.5 * (J - J.T)
    if layout is None:
        layout = BlockLayout((1,) * J.shape[0])
    J_o = np.where(layout.diagonal_blocks > 0, 0.0, J)
    return J_a, J_o
