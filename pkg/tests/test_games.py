import itertools

import jax
import jax.numpy as jnp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nashdyn.games import (
    GAME_IDS,
    DATASETS,
    PolynomialGame,
    gg_cdf,
    gg_inverse_cdf,
    gg_payoff,
    make_game,
    make_gan,
    make_kuhn,
    make_matching_pennies,
    make_rps,
    make_shapley,
    sample_dataset,
    security_payoff,
)
from nashdyn.games.gan import cube_edges, grid_centers, ring_centers
from nashdyn.games.normal_form import cyclic_rps_matrix

H, T = 0, 1
BIG = 40.0  # logit gap that makes a strategy pure to double precision


def pure_logits(actions, n_actions):
    return np.concatenate([BIG * np.eye(n_actions)[a] for a in actions])


def test_registry_has_fifteen_games():
    assert len(GAME_IDS) == 15
    for gid in GAME_IDS:
        g = make_game(gid, batch_size=8)
        x = g.init_params(jax.random.PRNGKey(0))
        assert x.shape == (g.dim,)
        assert g.utilities(x, jax.random.PRNGKey(1)).shape == (g.n_players,)
    with pytest.raises(ValueError):
        make_game("go")


def test_mp3_pure_payoffs():
    # [DERIVED] (H, H, H): players 1 and 2 match, player 3 mismatches -> (1, 1, -1)
    g = make_matching_pennies(3)
    np.testing.assert_array_equal(g.pure_profile_utilities((H, H, H)), [1, 1, -1])
    np.testing.assert_allclose(g.utilities(pure_logits((H, H, H), 2)), [1, 1, -1])


def test_mp2_table():
    # [DERIVED] row matches column, column mismatches row
    g = make_matching_pennies(2)
    np.testing.assert_array_equal(g.pure_profile_utilities((H, H)), [1, -1])
    np.testing.assert_array_equal(g.pure_profile_utilities((H, T)), [-1, 1])
    assert g.zero_sum


def test_uniform_is_equilibrium_of_mp():
    for n in (2, 3, 4):
        g = make_matching_pennies(n)
        assert float(g.exploitability(jnp.zeros(g.dim))) < 1e-12


def test_rps_tables():
    # [DERIVED] row plays R, column plays P: paper beats rock
    g3 = make_rps(3)
    assert g3.pure_profile_utilities((0, 1))[0] == -1
    # RPS4: action A against D
    g4 = make_rps(4)
    assert g4.pure_profile_utilities((0, 3))[0] == 1
    for g in (g3, g4):
        np.testing.assert_array_equal(g.payoffs[0], -g.payoffs[1])


def test_cyclic_rps_matches_tables():
    np.testing.assert_array_equal(cyclic_rps_matrix(3), make_rps(3).payoffs[0])
    g5 = make_rps(5)
    np.testing.assert_array_equal(g5.payoffs[0], -g5.payoffs[0].T)
    with pytest.raises(ValueError):
        make_rps(2)


def test_shapley_tables():
    # [DERIVED] from the two payoff matrices
    g = make_shapley()
    A, B, C = 0, 1, 2
    np.testing.assert_array_equal(g.pure_profile_utilities((A, A)), [1, 0])
    np.testing.assert_array_equal(g.pure_profile_utilities((A, B)), [0, 1])
    np.testing.assert_array_equal(g.pure_profile_utilities((C, A)), [0, 1])
    assert not g.zero_sum
    assert float(g.exploitability(jnp.zeros(g.dim))) < 1e-12


@settings(max_examples=20)
@given(st.integers(0, 10_000))
def test_normal_form_multilinearity(seed):
    # [DERIVED] expected utility equals explicit enumeration over pure profiles
    g = make_matching_pennies(3)
    r = np.random.default_rng(seed)
    x = r.normal(size=g.dim)
    probs = [np.asarray(s) for s in g.strategies(jnp.asarray(x))]
    expected = np.zeros(3)
    for a in itertools.product(range(2), repeat=3):
        w = np.prod([p[ai] for p, ai in zip(probs, a)])
        expected += w * g.pure_profile_utilities(a)
    np.testing.assert_allclose(g.utilities(jnp.asarray(x)), expected, atol=1e-12)


def test_payoff_tensor_validation():
    from nashdyn.games import NormalFormGame

    with pytest.raises(ValueError):
        NormalFormGame(np.zeros((2, 3)))


def test_kuhn_sizes():
    g2, g3 = make_kuhn(2), make_kuhn(3)
    assert g2.n_info_sets == (6, 6) and g2.dim == 24
    assert len(g2.tree.deals) == 6 and len(g3.tree.deals) == 24
    assert g2.info_set_labels(0)[:2] == ["J:-", "J:pb"]
    with pytest.raises(ValueError):
        make_kuhn(4)


def kuhn2_value(probs):
    """Independent recursion over the 2-player tree; ``probs[(player, card, history)]`` = P(bet)."""
    terminal = {"pp": 1, "pbp": -1, "pbb": 2, "bp": 1, "bb": 2}

    def walk(cards, h):
        if h in terminal:
            stake = terminal[h]
            if h in ("pbp", "bp"):
                return float(stake if h == "bp" else -1)
            return stake * (1.0 if cards[0] > cards[1] else -1.0)
        player = len(h) % 2
        p = probs[(player, cards[player], h)]
        return p * walk(cards, h + "b") + (1 - p) * walk(cards, h + "p")

    deals = list(itertools.permutations(range(3), 2))
    return sum(walk(c, "") for c in deals) / len(deals)


def test_kuhn_uniform_value():
    # [DERIVED] uniform play: 1/8 for the first player by direct recursion
    g = make_kuhn(2)
    u = np.asarray(g.utilities(jnp.zeros(g.dim)))
    assert abs(u.sum()) < 1e-12
    assert abs(u[0] - 0.125) < 1e-12
    g3 = make_kuhn(3)
    assert abs(float(jnp.sum(g3.utilities(jnp.zeros(g3.dim))))) < 1e-12


@settings(max_examples=15)
@given(st.integers(0, 10_000))
def test_kuhn_matches_independent_recursion(seed):
    # [DERIVED] tree utilities against a hand-written recursion
    g = make_kuhn(2)
    x = np.random.default_rng(seed).normal(size=g.dim)
    strat = [np.asarray(s) for s in g.strategies(jnp.asarray(x))]
    probs = {}
    for i in range(2):
        for k, label in enumerate(g.info_set_labels(i)):
            card, hist = label.split(":")
            probs[(i, "JQK".index(card), "" if hist == "-" else hist)] = strat[i][k, 1]
    assert abs(float(g.utilities(jnp.asarray(x))[0]) - kuhn2_value(probs)) < 1e-12


def test_kuhn_always_check_splits_antes():
    # [DERIVED] everyone checks: showdown for the ante, higher card wins 1
    g = make_kuhn(2)
    x = np.tile([BIG, 0.0], g.dim // 2)
    u = np.asarray(g.utilities(jnp.asarray(x)))
    assert abs(u[0]) < 1e-12  # symmetric deal


def test_kuhn_pure_strategy_count():
    # [DERIVED] six information sets with two actions each
    assert sum(1 for _ in make_kuhn(2).pure_strategies(0)) == 64


def test_kuhn_equilibrium_family():
    # [PAPER] the classic equilibrium family has value -1/18 for the first player
    from nashdyn.checks import kuhn_equilibrium_logits

    g = make_kuhn(2)
    for alpha in (0.0, 1 / 6, 1 / 3):
        x = kuhn_equilibrium_logits(g, alpha)
        assert abs(float(g.utilities(jnp.asarray(x))[0]) + 1 / 18) < 1e-9
        assert float(g.exploitability(jnp.asarray(x))) < 1e-9


def test_gg_payoff_examples():
    # [DERIVED] formula
    assert gg_payoff(0.0, 0.0) == 1.0
    assert gg_payoff(1.0, 1.0) == 0.0
    assert gg_payoff(1.0, 0.0) == 2.0


def test_gg_cdf_endpoints_and_inverse():
    assert gg_cdf(0.0) == 0.0
    assert abs(gg_cdf(1.0) - 1.0) < 1e-15
    u = np.linspace(0, 1, 11)
    np.testing.assert_allclose(gg_cdf(gg_inverse_cdf(u)), u, atol=1e-12)


def test_gg_samples_in_unit_interval():
    g = make_game("gg", batch_size=32)
    x = g.init_params(jax.random.PRNGKey(0))
    for s in g.samples(x, jax.random.PRNGKey(1)):
        s = np.asarray(s)
        assert s.shape == (32, 1) and np.all((s >= 0) & (s <= 1))


def test_security_payoff_examples():
    # [DERIVED] exp(-d^2)
    a = jnp.array([0.0, 0.0])
    assert float(security_payoff(a, jnp.array([[0.0, 0.0]]))) == 1.0
    assert abs(float(security_payoff(a, jnp.array([[1.0, 0.0]]))) - np.exp(-1)) < 1e-15
    # farthest points of the unit square: d^2 = 2
    assert abs(float(security_payoff(a, jnp.array([[1.0, 1.0]]))) - np.exp(-2)) < 1e-15
    # the closest of two defender points counts
    two = jnp.array([[1.0, 1.0], [0.0, 1.0]])
    assert abs(float(security_payoff(a, two)) - np.exp(-1)) < 1e-15


def test_security_is_zero_sum():
    for gid in ("security1", "security2"):
        g = make_game(gid, batch_size=16)
        u = g.utilities(g.init_params(jax.random.PRNGKey(2)), jax.random.PRNGKey(3))
        assert float(u[0] + u[1]) == 0.0
        assert float(u[1]) > 0


def test_dataset_centers():
    assert ring_centers().shape == (8, 2)
    np.testing.assert_allclose(np.linalg.norm(ring_centers(), axis=1), 1.0)
    assert grid_centers().shape == (9, 2)
    starts, dirs = cube_edges()
    ends = starts + dirs
    edges = {tuple(sorted((tuple(s), tuple(e)))) for s, e in zip(starts, ends)}
    assert len(edges) == 12
    # [DERIVED] every cube edge joins vertices differing in exactly one coordinate
    assert all(np.sum(np.abs(s - e) > 0) == 1 for s, e in zip(starts, ends))


def test_ring_mean_radius():
    # [DERIVED] centres on the unit circle with std 0.1 noise; mean radius within 0.01 of 1
    pts = np.asarray(sample_dataset("ring", 100_000, 0))
    assert abs(np.linalg.norm(pts, axis=1).mean() - 1.0) < 0.01


@pytest.mark.parametrize("dataset", DATASETS)
def test_datasets_shapes_and_determinism(dataset):
    a = np.asarray(sample_dataset(dataset, 100, 5))
    b = np.asarray(sample_dataset(dataset, 100, 5))
    np.testing.assert_array_equal(a, b)
    assert a.shape == (100, 3 if dataset == "cube" else 2)
    assert np.abs(a).max() < 2


def test_dataset_errors():
    with pytest.raises(ValueError):
        sample_dataset("moons", 10)
    with pytest.raises(ValueError):
        sample_dataset("ring", 0)
    with pytest.raises(ValueError):
        make_gan("moons")


def test_gan_value_with_constant_discriminator():
    # [DERIVED] D = 1/2 everywhere: V = 2 log(1/2) = -1.3863
    g = make_gan("ring", batch_size=32)
    x = np.array(g.init_params(jax.random.PRNGKey(0)))
    x[g.layout.slice(1)] = 0.0  # zero discriminator -> logit 0
    u = np.asarray(g.utilities(jnp.asarray(x), jax.random.PRNGKey(1)))
    np.testing.assert_allclose(u, [2 * np.log(2), -2 * np.log(2)], atol=1e-12)
    assert abs(u[1] + 1.3863) < 1e-4


def test_gan_generator_latent_matches_data_dim():
    g = make_gan("cube")
    assert g.data_dim == 3
    fake = g.generate(g.layout.block(g.init_params(jax.random.PRNGKey(0)), 0), 7, jax.random.PRNGKey(1))
    assert fake.shape == (7, 3)


def test_common_random_numbers():
    # the same key gives the same estimate; different keys differ
    g = make_game("gan-ring", batch_size=16)
    x = g.init_params(jax.random.PRNGKey(0))
    k = jax.random.PRNGKey(4)
    assert float(g.utilities(x, k)[0]) == float(g.utilities(x, k)[0])
    assert float(g.utilities(x, k)[0]) != float(g.utilities(x, jax.random.PRNGKey(5))[0])


def test_polynomial_game_is_smooth_and_general_sum():
    g = PolynomialGame((2, 2), seed=3)
    assert g.dim == 4 and g.n_players == 2
    u = np.asarray(g.utilities(jnp.ones(4)))
    assert abs(u.sum()) > 1e-6


def test_distance_to_ne_requires_known_ne():
    from nashdyn.exceptions import NoKnownEquilibriumError

    g = make_game("gg", batch_size=8)
    assert not g.has_known_ne
    with pytest.raises(NoKnownEquilibriumError):
        g.distance_to_ne(jnp.zeros(g.dim))


def test_saddle_utilities():
    g = make_game("saddle")
    np.testing.assert_array_equal(g.utilities(jnp.array([2.0, 3.0])), [6, -6])
    np.testing.assert_array_equal(g.utilities(jnp.array([0.0, 7.0])), [0, 0])


def test_uniform_profiles_are_zero_value():
    for gid in ("mp2", "rps3"):
        np.testing.assert_allclose(make_game(gid).utilities(jnp.zeros(make_game(gid).dim)), 0, atol=1e-15)


def test_kuhn_dimensions_and_deals():
    # [PAPER] 12 logits per player in the 2-player game
    g2, g3 = make_kuhn(2), make_kuhn(3)
    assert g2.param_dims == (12, 12)
    assert g3.param_dims == (32, 32, 32)
    for g in (g2, g3):
        assert abs(g.tree.deal_probs.sum() - 1) < 1e-15
