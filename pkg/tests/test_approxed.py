import jax
import jax.numpy as jnp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nashdyn.approxed import (
    BestResponseFunction,
    _phi,
    approx_exploitability_from_responses,
    bre_select,
    bre_step,
    brf_forward,
    brf_step,
    init_ensemble,
    mix,
    ni,
    rank_weights,
)
from nashdyn.autodiff import fd_grad
from nashdyn.checks import random_profiles
from nashdyn.evaluation import exact_exploitability
from nashdyn.exceptions import NonFiniteError
from nashdyn.games import GAME_IDS, make_game, make_saddle
from nashdyn.methods import MethodConfig

BIG = 40.0
H, T = np.array([BIG, 0.0]), np.array([0.0, BIG])
values_st = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=8)


def test_ni_examples():
    # [DERIVED] payoff table / formula
    mp2 = make_game("mp2")
    hh = np.concatenate([H, H])
    ht = np.concatenate([H, T])
    ev = ni(mp2, hh, ht)
    np.testing.assert_allclose(ev.gains, [0, 2], atol=1e-12)
    assert abs(ev.phi - 2) < 1e-12
    assert ni(make_saddle(), [1.0, 0.0], [1.0, 1.0]).phi == -1.0


def test_ni_shape_error():
    with pytest.raises(ValueError):
        ni(make_saddle(), [1.0, 0.0], [1.0])


@pytest.mark.parametrize("game_id", GAME_IDS)
def test_phi_vanishes_on_diagonal(game_id):
    # [TRIVIAL] deviating to the current strategy gains nothing; sampled games share the noise batch
    g = make_game(game_id, batch_size=16)
    xs = jnp.stack(random_profiles(g, 100, seed=4))
    key = jax.random.PRNGKey(0)
    vals = jax.jit(jax.vmap(lambda x: _phi(g, x, x, key)))(xs)
    assert float(jnp.max(jnp.abs(vals))) < 1e-12


def test_rank_weights_examples():
    # [TRIVIAL]
    np.testing.assert_array_equal(rank_weights([3, 1, 2]).ranks, [3, 1, 2])
    np.testing.assert_array_equal(rank_weights([5, 5]).ranks, [2, 1])
    np.testing.assert_allclose(rank_weights([3, 1, 2]).weights, [1, 1 / 3, 2 / 3])
    with pytest.raises(NonFiniteError):
        rank_weights([1.0, np.nan])
    with pytest.raises(ValueError):
        rank_weights([])


@given(st.lists(st.integers(-1000, 1000), min_size=1, max_size=8))
def test_rank_weights_monotone_invariance(values):
    # integers keep the transforms strictly increasing in floating point
    v = np.array(values, dtype=float)
    r = rank_weights(v).ranks
    np.testing.assert_array_equal(rank_weights(2 * v + 7).ranks, r)
    np.testing.assert_array_equal(rank_weights(np.exp(v / 1000)).ranks, r)
    assert sorted(r) == list(range(1, len(v) + 1))


@given(values_st, st.randoms(use_true_random=False))
def test_rank_weights_permutation_equivariant(values, rnd):
    # distinct values: ranks follow the permutation
    v = np.unique(np.array(values))
    perm = list(range(len(v)))
    rnd.shuffle(perm)
    np.testing.assert_array_equal(rank_weights(v[perm]).ranks, rank_weights(v).ranks[perm])


@given(values_st)
def test_ties_favour_lower_index(values):
    v = np.array(values + values)  # every value appears twice
    r = rank_weights(v).ranks
    n = len(values)
    assert np.all(r[:n] > r[n:])


def test_mix_examples():
    # [TRIVIAL] rank-weighted sum, not mean preserving
    assert abs(mix([3, 1, 2]) - 14 / 3) < 1e-12
    assert mix([4.5]) == 4.5
    assert abs(mix([2.0, 2.0, 2.0]) - 4.0) < 1e-12


def test_brf_forward_zero_weights_and_shape():
    g = make_game("mp3")
    brf = BestResponseFunction(g.dim, 8)
    y = brf_forward(brf, jnp.zeros(brf.n_params), jnp.ones(g.dim))
    np.testing.assert_array_equal(y, 0.0)
    assert len(g.layout.split(y)) == g.n_players


def test_brf_step_identity_cases():
    g = make_saddle()
    brf = BestResponseFunction(2, 4)
    w = brf.init(jax.random.PRNGKey(0))
    x = jnp.array([0.4, -0.3])
    x1, w1 = brf_step(g, x, brf, w, MethodConfig("brf", eta=0.0))
    np.testing.assert_array_equal(x1, x)
    np.testing.assert_array_equal(w1, w)
    # zero weights propose y = 0 = x at the origin, where every gradient vanishes
    x2, w2 = brf_step(g, jnp.zeros(2), brf, jnp.zeros(brf.n_params), MethodConfig("brf", eta=0.1))
    np.testing.assert_array_equal(x2, 0.0)
    np.testing.assert_array_equal(w2, 0.0)


def test_brf_step_matches_finite_differences():
    # [DERIVED] descent on x (through b) and ascent on w, both from the pre-step point
    g = make_saddle()
    brf = BestResponseFunction(2, 4)
    w = brf.init(jax.random.PRNGKey(1))
    x = jnp.array([0.7, -0.2])
    eta = 0.05
    gx = fd_grad(lambda z: _phi(g, z, brf(w, z), None), np.asarray(x))
    gw = fd_grad(lambda v: _phi(g, x, brf(v, x), None), np.asarray(w))
    x1, w1 = brf_step(g, x, brf, w, MethodConfig("brf", eta=eta))
    np.testing.assert_allclose(x1, x - eta * gx, atol=1e-10)
    np.testing.assert_allclose(w1, w + eta * gw, atol=1e-10)


def test_bre_select_tie_and_singleton():
    # saddle with x_2 = 1: candidate values for player 1 are the candidates themselves
    g = make_saddle()
    x = jnp.array([0.0, 1.0])
    ens = [jnp.array([[0.2], [0.9], [0.9]]), jnp.array([[0.0]])]
    idx, vals = bre_select(g, x, ens)
    assert idx[0] == 1 and abs(vals[0] - 0.9) < 1e-15
    assert idx[1] == 0


@given(st.lists(st.sampled_from([0.1, 0.5, 0.9]), min_size=1, max_size=6))
def test_bre_select_lowest_index_on_ties(cands):
    g = make_saddle()
    ens = [jnp.array(cands)[:, None], jnp.zeros((1, 1))]
    idx, _ = bre_select(g, jnp.array([0.0, 1.0]), ens)
    assert idx[0] == cands.index(max(cands))


def test_bre_select_mp2():
    # [DERIVED] column plays H: row prefers H (+1) over T (-1)
    g = make_game("mp2")
    x = jnp.asarray(np.concatenate([T, H]))
    ens = [jnp.stack([jnp.asarray(T), jnp.asarray(H)]), jnp.asarray(H)[None]]
    idx, vals = bre_select(g, x, ens)
    assert idx[0] == 1 and abs(vals[0] - 1) < 1e-12


def test_bre_step_identity_at_zero_eta():
    g = make_game("mp3")
    x = g.init_params(jax.random.PRNGKey(0))
    ens = init_ensemble(g, 10, jax.random.PRNGKey(1))
    x1, ens1 = bre_step(g, x, ens, MethodConfig("bre", eta=0.0))
    np.testing.assert_array_equal(x1, x)
    for a, b in zip(ens, ens1):
        np.testing.assert_array_equal(a, b)
    assert [e.shape for e in ens] == [(10, 2)] * 3


def test_bre_step_with_candidates_at_x():
    # [DERIVED] with y = x the profile takes an SG step and copy j ascends with weight r_j / n
    g = make_game("mp3")
    x = g.init_params(jax.random.PRNGKey(2))
    n, eta = 4, 0.1
    ens = [jnp.tile(b, (n, 1)) for b in g.layout.split(x)]
    x1, ens1 = bre_step(g, x, ens, MethodConfig("bre", eta=eta))
    v = np.asarray(jax.jacrev(g.utilities)(x) * g.layout.masks).sum(axis=0)
    np.testing.assert_allclose(x1, np.asarray(x) + eta * v, atol=1e-14)
    weights = np.arange(n, 0, -1) / n  # equal values: rank by index
    for i, e in enumerate(ens1):
        expected = np.asarray(g.layout.block(x, i))[None] + eta * weights[:, None] * v[g.layout.slice(i)]
        np.testing.assert_allclose(e, expected, atol=1e-14)


def test_bre_singleton_is_plain_ascent():
    g = make_game("rps3")
    x = g.init_params(jax.random.PRNGKey(3))
    ens = init_ensemble(g, 1, jax.random.PRNGKey(4))
    _, ens1 = bre_step(g, x, ens, MethodConfig("bre", eta=0.1))
    for i in range(2):
        grad = jax.grad(lambda y: g.deviation_utility(x, i, y))(ens[i][0])
        np.testing.assert_allclose(ens1[i][0], ens[i][0] + 0.1 * grad, atol=1e-15)


def test_approx_from_responses_examples():
    g = make_game("mp2")
    hh = np.concatenate([H, H])
    assert approx_exploitability_from_responses(g, hh, [H[None], H[None]]) == 0.0
    assert abs(approx_exploitability_from_responses(g, hh, [H[None], np.stack([H, T])]) - 2) < 1e-12


@pytest.mark.parametrize("game_id", ["mp2", "rps3"])
def test_approx_from_responses_is_lower_bound(game_id):
    # [DERIVED] against the exact oracle
    g = make_game(game_id)
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.normal(size=g.dim)
        responses = [rng.normal(size=(5, d)) * 3 for d in g.param_dims]
        approx = approx_exploitability_from_responses(g, x, responses)
        assert 0 <= approx <= exact_exploitability(g, x).total + 1e-12
