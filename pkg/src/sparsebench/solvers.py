"""Name-keyed registry tying every solver to one entry point, used by the
classifiers, the benchmark harness and the service layer.
"""

from .constrained import adm_solve, gpsr_solve, tnipm_solve
from .greedy import mp_solve, omp_solve
from .homotopy import bpdn_homotopy, lasso_homotopy, reweighted_homotopy
from .problem import SolverConfig, Sparsity, SparseProblem, SparseSolution
from .proximal import (
    dalm_solve,
    fista_solve,
    half_proximal_solve,
    ista_solve,
    palm_solve,
    sparsa_solve,
)

# how each solver's scalar benchmark parameter is interpreted
_MODES = {
    "mp": "greedy",
    "omp": "greedy",
    "gpsr": "lagrangian",
    "l1ls": "lagrangian",
    "adm": "lagrangian",
    "ista": "lagrangian",
    "fista": "lagrangian",
    "sparsa": "lagrangian",
    "bpdn-homotopy": "lagrangian",
    "lasso-homotopy": "lagrangian",
    "reweighted-homotopy": "lagrangian",
    "palm": "interpolating",
    "dalm": "interpolating",
    "half": "sparsity",
}

SOLVER_NAMES = tuple(_MODES)


def solver_mode(name: str) -> str:
    try:
        return _MODES[name]
    except KeyError:
        raise ValueError(f"unknown solver {name!r}; known: {', '.join(SOLVER_NAMES)}")


def _half(problem: SparseProblem, config: SolverConfig) -> SparseSolution:
    if not isinstance(problem.constraint, Sparsity):
        raise ValueError("the l1/2 solver needs a Sparsity constraint")
    return half_proximal_solve(problem, config, k=problem.constraint.k)


def _lasso_homotopy(problem: SparseProblem, config: SolverConfig) -> SparseSolution:
    solution, _path = lasso_homotopy(problem, config)
    return solution


def _reweighted(problem: SparseProblem, config: SolverConfig) -> SparseSolution:
    import numpy as np

    weights = np.full(problem.dictionary.num_atoms, problem.constraint.lam)
    return reweighted_homotopy(problem, weights, config)


_SOLVERS = {
    "mp": mp_solve,
    "omp": omp_solve,
    "gpsr": gpsr_solve,
    "l1ls": tnipm_solve,
    "adm": adm_solve,
    "ista": ista_solve,
    "fista": fista_solve,
    "sparsa": sparsa_solve,
    "half": _half,
    "palm": palm_solve,
    "dalm": dalm_solve,
    "lasso-homotopy": _lasso_homotopy,
    "bpdn-homotopy": bpdn_homotopy,
    "reweighted-homotopy": _reweighted,
}


def solve_by_name(name: str, problem: SparseProblem,
                  config: SolverConfig = SolverConfig()) -> SparseSolution:
    solver_mode(name)
    return _SOLVERS[name](problem, config)
