import warnings

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import ConvergenceWarning, NotFittedError

from nashdyn import EquilibriumSolver
from nashdyn.exceptions import ConfigError
from nashdyn.games import make_game


def test_params_and_clone():
    est = EquilibriumSolver(method="sg", eta=0.01, steps=10, random_state=3)
    params = est.get_params()
    assert params["method"] == "sg" and params["random_state"] == 3
    twin = clone(est)
    assert twin.get_params() == params and twin is not est
    est.set_params(gamma=0.5)
    assert est.gamma == 0.5


def test_fit_by_id_and_instance():
    a = EquilibriumSolver(method="bre", steps=200, random_state=0).fit("rps3")
    b = EquilibriumSolver(method="bre", steps=200, random_state=0).fit(make_game("rps3"))
    np.testing.assert_array_equal(a.profile_, b.profile_)
    assert a.n_steps_ == 200 and not a.diverged_
    assert a.profile_.shape == (6,)
    strat = a.strategies()
    assert len(strat) == 2 and abs(strat[0].sum() - 1) < 1e-12


def test_partial_fit_continues_the_run():
    # two halves equal one run of the full length (step counter and keys carry over)
    whole = EquilibriumSolver(method="sg", eta=0.05, steps=40, random_state=1).fit("mp2")
    half = EquilibriumSolver(method="sg", eta=0.05, steps=20, random_state=1).fit("mp2")
    half.partial_fit()
    assert half.n_steps_ == 40
    np.testing.assert_allclose(half.profile_, whole.profile_, atol=1e-14)


def test_partial_fit_without_fit():
    est = EquilibriumSolver(method="sg", steps=5, random_state=0)
    with pytest.raises(ValueError):
        est.partial_fit()
    est.partial_fit("mp2")
    assert est.n_steps_ == 5
    with pytest.raises(ValueError):
        est.partial_fit("rps3")


def test_x0_and_validation():
    est = EquilibriumSolver(method="sg", eta=0.1, steps=1).fit("saddle", x0=[1.0, 0.0])
    np.testing.assert_allclose(est.profile_, [1.0, -0.1])
    with pytest.raises(ValueError):
        EquilibriumSolver(method="sg").fit("saddle", x0=[1.0])
    with pytest.raises(ValueError):
        EquilibriumSolver(method="sg").fit("saddle", x0=[np.nan, 0.0])
    with pytest.raises(ConfigError):
        EquilibriumSolver(method="ed").fit("gg")
    with pytest.raises(ConfigError):
        EquilibriumSolver(method="nope").fit("mp2")
    with pytest.raises(ValueError):
        EquilibriumSolver(steps=0).fit("mp2")
    with pytest.raises(ValueError):
        EquilibriumSolver(eta=-1.0).fit("mp2")


def test_exploitability_and_score():
    est = EquilibriumSolver(method="bre", steps=3000, eta=1e-2, random_state=0)
    with pytest.raises(NotFittedError):
        est.exploitability()
    est.fit("mp2")
    assert est.exploitability() < 0.05
    assert est.score() == -est.exploitability()


def test_exploitability_without_oracle_is_lower_bound():
    est = EquilibriumSolver(method="sg", steps=2, batch_size=8, random_state=0).fit("security1")
    assert est.exploitability() >= 0
    with pytest.raises(AttributeError):
        est.strategies()


def test_divergence_warns():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        est = EquilibriumSolver(method="sg", eta=10.0, steps=200, random_state=0).fit("saddle")
    assert est.diverged_
    assert any(issubclass(w.category, ConvergenceWarning) for w in caught)
    assert np.all(np.isfinite(est.profile_))
