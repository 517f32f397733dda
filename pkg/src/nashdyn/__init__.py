"""Approximate Nash equilibria by minimizing approximate exploitability."""
import jax

# exploitability checks are pinned at 1e-9 and need double precision
jax.config.update("jax_enable_x64", True)

__version__ = "0.1.0"


def __getattr__(name):
    # the estimator pulls in scikit-learn, so load it on first use
    if name == "EquilibriumSolver":
        from .estimator import EquilibriumSolver

        return EquilibriumSolver
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
