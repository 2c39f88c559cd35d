"""Single dispatch point for every registered solver."""

from .asynchronous import run_dave_pg
from .exploit import (
    run_pg_adaptive_inertia,
    run_predictor_corrector,
    run_random_subspace,
)
from .solvers import run_apg, run_dr, run_pg, run_saga

__all__ = ["SOLVERS", "run_solver"]

SOLVERS = {
    "pg": run_pg,
    "apg": run_apg,
    "dr": run_dr,
    "saga": run_saga,
    "dave-pg": run_dave_pg,
    "pg-adaptive": run_pg_adaptive_inertia,
    "predictor-corrector": run_predictor_corrector,
    "random-subspace": run_random_subspace,
}


def run_solver(name, problem, config=None, **kwargs):
    """Run a solver by registry name; extra kwargs go to the solver."""
    try:
        solver = SOLVERS[name]
    except KeyError:
        known = ", ".join(sorted(SOLVERS))
        raise ValueError(f"unknown solver {name!r}; known: {known}") from None
    return solver(problem, config, **kwargs)
