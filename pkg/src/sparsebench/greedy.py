"""Greedy pursuit solvers: matching pursuit and orthogonal matching pursuit.

Both expect a normalized dictionary and either a Sparsity(k) or
ResidualBound(eps) constraint. MP keeps the classic semantics where an atom
may be selected repeatedly; OMP never re-selects and re-fits the selected
coefficients by least squares every iteration, so its residual stays
orthogonal to the chosen atoms.
"""

import numpy as np

from .problem import (
    ConstraintMismatchError,
    ResidualBound,
    SolverConfig,
    Sparsity,
    SparseProblem,
    SparseSolution,
    solution_from_alpha,
)

# Ridge bump applied when the selected-atom Gram goes numerically singular
# (duplicate-direction pathologies must not abort a benchmark run).
_GRAM_RIDGE = 1e-12


def _greedy_limits(problem: SparseProblem, config: SolverConfig):
    """Resolve (max_selections, residual_target) from the constraint."""
    c = problem.constraint
    n = problem.dictionary.num_atoms
    default_eps = 1e-6 * float(np.linalg.norm(problem.y))
    if isinstance(c, Sparsity):
        return min(c.k, config.max_iterations), default_eps
    if isinstance(c, ResidualBound):
        return config.max_iterations, max(c.epsilon, 0.0)
    raise ConstraintMismatchError(
        f"greedy solvers need Sparsity or ResidualBound, got {type(c).__name__}"
    )


def mp_solve(problem: SparseProblem, config: SolverConfig = SolverConfig()) -> SparseSolution:
    """Matching pursuit: peel off the best-correlated atom each iteration."""
    if not problem.dictionary.normalized:
        raise ValueError("matching pursuit expects a normalized dictionary")
    x = problem.x
    max_sel, eps = _greedy_limits(problem, config)
    alpha = np.zeros(x.shape[1])
    residual = problem.y.copy()
    trace = [float(np.linalg.norm(residual))]
    it = 0
    while it < max_sel and trace[-1] > eps:
        corr = x.T @ residual
        j = int(np.argmax(np.abs(corr)))  # argmax ties break to lowest index
        c = corr[j]
        if c == 0.0:
            break
        alpha[j] += c
        residual = residual - c * x[:, j]
        trace.append(float(np.linalg.norm(residual)))
        it += 1
    # a residual bound not met within budget flags non-convergence; the
    # k-sparse variant always terminates by construction
    if isinstance(problem.constraint, ResidualBound):
        converged = trace[-1] <= eps
    else:
        converged = True
    return solution_from_alpha(problem, alpha, objective_trace=trace,
                               iterations=it, converged=converged)


def omp_solve(problem: SparseProblem, config: SolverConfig = SolverConfig()) -> SparseSolution:
    """Orthogonal matching pursuit with least-squares re-fit per iteration.

    The selected-atom Gram factor is grown one Cholesky row per selection,
    so the per-step refit costs O(|support|^2) instead of a fresh solve.
    """
    if not problem.dictionary.normalized:
        raise ValueError("orthogonal matching pursuit expects a normalized dictionary")
    from scipy.linalg import solve_triangular

    x = problem.x
    max_sel, eps = _greedy_limits(problem, config)
    max_sel = min(max_sel, x.shape[1])
    support: list[int] = []
    flags = []
    alpha = np.zeros(x.shape[1])
    residual = problem.y.copy()
    trace = [float(np.linalg.norm(residual))]
    coeffs = np.zeros(0)
    chol = np.zeros((max_sel, max_sel))
    while len(support) < max_sel and trace[-1] > eps:
        corr = x.T @ residual
        corr[support] = 0.0  # never re-select an atom
        j = int(np.argmax(np.abs(corr)))
        if corr[j] == 0.0:
            break
        k = len(support)
        if k == 0:
            chol[0, 0] = 1.0  # unit atoms
        else:
            g = x[:, support].T @ x[:, j]
            w = solve_triangular(chol[:k, :k], g, lower=True, check_finite=False)
            rem = 1.0 - float(w @ w)
            if rem <= _GRAM_RIDGE:
                rem = _GRAM_RIDGE  # collinear selection: keep the factor alive
                flags.append("gram_ridge")
            chol[k, :k] = w
            chol[k, k] = np.sqrt(rem)
        support.append(j)
        k += 1
        rhs = x[:, support].T @ problem.y
        half = solve_triangular(chol[:k, :k], rhs, lower=True, check_finite=False)
        coeffs = solve_triangular(chol[:k, :k].T, half, lower=False, check_finite=False)
        residual = problem.y - x[:, support] @ coeffs
        trace.append(float(np.linalg.norm(residual)))
    alpha[support] = coeffs
    if isinstance(problem.constraint, ResidualBound):
        converged = trace[-1] <= eps
    else:
        converged = True
    return solution_from_alpha(problem, alpha, objective_trace=trace,
                               iterations=len(support), converged=converged,
                               flags=flags)


def batch_omp(dictionary: np.ndarray, signals: np.ndarray, k_max: int,
              eps: float = 0.0) -> np.ndarray:
    """Gram-cached OMP over many signals at once; returns the code matrix.

    dictionary: d x M with unit columns, signals: d x N. Selection stops at
    k_max atoms or when the residual l2 norm drops to eps. Uses the
    precomputed Gram so each signal costs O(k^2 M) instead of repeated
    d x |support| least squares; the dictionary-learning and denoising loops
    call this thousands of times per sweep.
    """
    d, m = dictionary.shape
    n = signals.shape[1]
    gram = dictionary.T @ dictionary
    proj0 = dictionary.T @ signals  # M x N
    codes = np.zeros((m, n))
    eps2 = eps * eps
    k_max = min(k_max, m, d)
    for i in range(n):
        p = proj0[:, i].copy()
        res2 = float(signals[:, i] @ signals[:, i])
        if res2 <= eps2:
            continue
        support: list[int] = []
        coef = np.zeros(0)
        for _ in range(k_max):
            p_abs = np.abs(p)
            if support:
                p_abs[support] = 0.0
            j = int(np.argmax(p_abs))
            if p_abs[j] == 0.0:
                break
            support.append(j)
            g = gram[np.ix_(support, support)]
            try:
                coef = np.linalg.solve(g, proj0[support, i])
            except np.linalg.LinAlgError:
                coef = np.linalg.solve(g + _GRAM_RIDGE * np.eye(len(support)), proj0[support, i])
            p = proj0[:, i] - gram[:, support] @ coef
            res2 = float(signals[:, i] @ signals[:, i] - proj0[support, i] @ coef)
            if res2 <= eps2:
                break
        codes[support, i] = coef
    return codes
